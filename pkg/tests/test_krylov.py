import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from crfve.krylov import (InnerProduct, dense_spectrum, estimate_Cp, estimate_cp, gmres,
                          lanczos, spectral_norm, write_history_csv)


def _spd(rng, n):
    G = rng.standard_normal((n, n))
    return G @ G.T + n * np.eye(n)


def _nonsym(rng, n, shift=3.0):
    return shift * np.eye(n) + rng.standard_normal((n, n)) / np.sqrt(n)


def _gmres_oracle(T, b, M, m):
    """argmin over K_m(T, b) of ||b - T x||_M by dense least squares."""
    K = np.column_stack([np.linalg.matrix_power(T, j) @ b for j in range(m)])
    K, _ = np.linalg.qr(K)
    L = np.linalg.cholesky(M)
    y = np.linalg.lstsq(L.T @ T @ K, L.T @ b, rcond=None)[0]
    return K @ y


def test_identity_converges_in_one_step():
    b = np.arange(1.0, 6.0)
    x, rep = gmres(lambda v: v, b)
    assert rep.converged and rep.iterations == 1
    np.testing.assert_allclose(x, b)


def test_spd_three_by_three():
    A = np.array([[4.0, 1, 0], [1, 3, 1], [0, 1, 2]])
    b = np.array([1.0, 2, 3])
    x, rep = gmres(lambda v: A @ v, b, rtol=1e-12)
    assert rep.converged and rep.iterations <= 3
    np.testing.assert_allclose(x, np.linalg.solve(A, b), rtol=1e-10)


@pytest.mark.parametrize("m", [1, 3, 6])
def test_iterates_minimise_energy_residual(rng, m):
    n = 12
    T, M, b = _nonsym(rng, n), _spd(rng, n), rng.standard_normal(n)
    x, rep = gmres(lambda v: T @ v, b, InnerProduct.energy(M), rtol=1e-300, maxit=m)
    assert rep.iterations == m and rep.reason == "maxit"
    np.testing.assert_allclose(x, _gmres_oracle(T, b, M, m), rtol=1e-8, atol=1e-10)
    r = b - T @ x
    assert rep.ip_residual_history[-1] == pytest.approx(np.sqrt(r @ M @ r), rel=1e-8)


@given(st.integers(0, 2 ** 32 - 1), st.integers(5, 30))
@settings(max_examples=20)
def test_basis_orthonormal_and_residual_monotone(seed, n):
    rng = np.random.default_rng(seed)
    T, M, b = _nonsym(rng, n, 1.0), _spd(rng, n), rng.standard_normal(n)
    ip = InnerProduct.energy(M)
    x, rep = gmres(lambda v: T @ v, b, ip, rtol=1e-10, keep_basis=True)
    Q = rep.basis
    G = Q @ M @ Q.T
    assert np.abs(G - np.eye(len(Q))).max() <= 1e-10
    h = np.array(rep.ip_residual_history)
    assert np.all(np.diff(h) <= 1e-12 * h[0])
    assert rep.converged
    np.testing.assert_allclose(T @ x, b, atol=1e-8 * np.linalg.norm(b))


def test_monitor_controls_stopping(rng):
    n = 20
    T, b = _nonsym(rng, n), rng.standard_normal(n)
    calls = []

    def monitor(x):
        calls.append(1)
        return np.linalg.norm(b - T @ x)

    x, rep = gmres(lambda v: T @ v, b, rtol=1e-8, monitor=monitor)
    assert rep.converged and len(rep.residual_history) == rep.iterations + 1
    assert rep.residual_history[-1] <= 1e-8
    assert np.linalg.norm(b - T @ x) <= 1e-8 * np.linalg.norm(b)
    assert len(calls) == rep.iterations + 1


def test_zero_rhs_and_stagnation():
    x, rep = gmres(lambda v: v, np.zeros(4))
    assert rep.converged and rep.iterations == 0 and not x.any()
    # the cyclic shift makes GMRES stall until the full dimension is reached
    n = 40
    S = np.roll(np.eye(n), 1, axis=0)
    _, rep = gmres(lambda v: S @ v, np.eye(n)[0], stagnation_window=10)
    assert not rep.converged and rep.reason == "stagnation"


def _energy_transform(T, M):
    L = np.linalg.cholesky(M)
    return L.T @ T @ np.linalg.inv(L.T)


def test_cp_Cp_against_dense_oracle(rng):
    n = 15
    T, M = _nonsym(rng, n, 2.0), _spd(rng, n)
    Tt = _energy_transform(T, M)
    ip = InnerProduct.energy(M)
    cp = estimate_cp(T, ip, tol=1e-10)
    Cp = estimate_Cp(T, ip, tol=1e-10)
    assert cp == pytest.approx(np.linalg.eigvalsh(0.5 * (Tt + Tt.T)).min(), rel=1e-8)
    assert Cp == pytest.approx(np.linalg.norm(Tt, 2), rel=1e-8)


def test_estimator_examples():
    assert estimate_cp(np.eye(7)) == pytest.approx(1.0)
    assert estimate_Cp(np.eye(7)) == pytest.approx(1.0)
    assert estimate_Cp(np.diag([1.0, 2.0, 3.0])) == pytest.approx(3.0)
    assert estimate_cp(np.diag([1.0, 2.0, 3.0])) == pytest.approx(1.0)
    assert spectral_norm(np.diag([-4.0, 1.0])) == pytest.approx(4.0)


def test_lanczos_warns_when_not_converged(rng):
    A = np.diag(np.linspace(1, 2, 400))
    with pytest.warns(RuntimeWarning, match="Lanczos"):
        res = lanczos(lambda v: A @ v, 400, which="smallest", tol=1e-14, maxiter=5)
    assert not res.converged
    with pytest.raises(ValueError):
        lanczos(lambda v: v, 3, which="middle")


def test_inner_product_checks():
    with pytest.raises(ValueError, match="symmetric"):
        InnerProduct.energy(np.array([[2.0, 1.0], [0.0, 2.0]]))
    with pytest.raises(ValueError, match="positive"):
        InnerProduct.energy(-np.eye(3))


def test_dense_spectrum(rng):
    S = _spd(rng, 10)
    ev = dense_spectrum(S)
    assert np.abs(ev.imag).max() <= 1e-10
    assert np.all(np.diff(ev.real) >= 0)
    np.testing.assert_allclose(ev.real, np.linalg.eigvalsh(S), rtol=1e-10)
    rot = np.array([[0.0, -1.0], [1.0, 0.0]])
    np.testing.assert_allclose(sorted(dense_spectrum(rot).imag), [-1, 1])
    with pytest.raises(ValueError, match="cap"):
        dense_spectrum(np.eye(5), cap=4)


def test_history_csv(tmp_path, rng):
    T, b = _nonsym(rng, 10), rng.standard_normal(10)
    _, rep = gmres(lambda v: T @ v, b, monitor=lambda x: np.linalg.norm(b - T @ x))
    write_history_csv(rep, tmp_path / "h.csv")
    lines = (tmp_path / "h.csv").read_text().splitlines()
    assert lines[0] == "iter,true_resid_rel,precond_resid_rel"
    data = np.loadtxt(lines[1:], delimiter=",")
    assert data.shape == (rep.iterations + 1, 3)
    np.testing.assert_array_equal(data[:, 0], np.arange(rep.iterations + 1))
    np.testing.assert_allclose(data[0, 1:], 1.0)
