import numpy as np
import pytest
from hypothesis import given, strategies as st

from crfve.decomposition import (apply_IA, build_block_partition, layer_contrast,
                                 partition_from_labels, write_partition)
from crfve.discretization import constant_coefficient
from crfve.harness.config import preset_geometry
from crfve.mesh import TriMesh, build_unit_square_mesh

# (n, M) pairs with M | n
blocks = st.sampled_from([(2, 1), (2, 2), (4, 2), (6, 3), (8, 2), (8, 4), (12, 3), (16, 4)])


def _layer_oracle(mesh, labels, i):
    """Triangles of subdomain i with a vertex on its boundary, by brute force."""
    bverts = set()
    for e, (t0, t1) in enumerate(mesh.edge_triangles.tolist()):
        subs = {labels[t0]} | ({labels[t1]} if t1 >= 0 else set())
        if i in subs and (t1 < 0 or len(subs) == 2):
            bverts |= set(mesh.edges[e].tolist())
    return sorted(t for t in range(mesh.n_triangles)
                  if labels[t] == i and bverts & set(mesh.triangles[t].tolist()))


def test_four_blocks_of_eight_triangles():
    p = build_block_partition(build_unit_square_mesh(4), 2)
    assert p.n_subdomains == 4
    assert np.bincount(p.subdomain_of).tolist() == [8, 8, 8, 8]
    np.testing.assert_allclose(p.H, np.sqrt(2) / 2)


@given(blocks)
def test_dof_classification(nm):
    n, M = nm
    mesh = build_unit_square_mesh(n)
    p = build_block_partition(mesh, M)
    assert np.bincount(p.subdomain_of, minlength=M * M).sum() == mesh.n_triangles
    # every interface edge crosses a block boundary line: 2 (M - 1) n of them
    assert len(p.interface_dofs) == 2 * (M - 1) * n
    interior = np.concatenate(p.interior_dofs) if p.interior_dofs else np.zeros(0, int)
    assert len(np.unique(interior)) == len(interior)
    assert set(interior.tolist()).isdisjoint(p.interface_dofs.tolist())
    assert len(interior) + len(p.interface_dofs) == mesh.n_dofs
    # each interface midpoint sits on exactly two subdomain boundaries
    counts = np.bincount(np.concatenate(p.boundary_dofs + (np.zeros(0, int),)),
                         minlength=mesh.n_dofs)
    np.testing.assert_array_equal(counts[p.interface_dofs], 2)
    assert counts[interior].sum() == 0
    assert np.all(p.interior_owner[p.interface_dofs] == -1)


@pytest.mark.parametrize("n, M", [(4, 2), (6, 3), (8, 4)])
def test_layers_match_brute_force(n, M):
    mesh = build_unit_square_mesh(n)
    p = build_block_partition(mesh, M)
    for i in range(p.n_subdomains):
        assert p.layer_triangles[i].tolist() == _layer_oracle(mesh, p.subdomain_of, i)


def test_partition_errors():
    with pytest.raises(ValueError, match="divisible"):
        build_block_partition(build_unit_square_mesh(6), 4)
    with pytest.raises(ValueError):
        build_block_partition(build_unit_square_mesh(4), 0)
    m = build_unit_square_mesh(4)
    raw = TriMesh.from_arrays(m.points, m.triangles)
    with pytest.raises(ValueError, match="structured"):
        build_block_partition(raw, 2)
    with pytest.raises(ValueError):
        partition_from_labels(m, np.zeros(3))


def test_labels_are_compacted_and_H_measured():
    m = build_unit_square_mesh(4)
    labels = np.where(m.centroids[:, 0] < 0.5, 7, 3)
    p = partition_from_labels(m, labels)
    assert p.n_subdomains == 2
    # a half square has diameter sqrt(1/4 + 1)
    np.testing.assert_allclose(p.H, np.sqrt(1.25))


def test_apply_IA_examples(rng):
    p = build_block_partition(build_unit_square_mesh(8), 4)
    n = p.mesh.n_dofs
    np.testing.assert_array_equal(apply_IA(np.ones(n), p), np.ones(n))
    u = rng.standard_normal(n)
    u[p.interface_dofs] = 0.0
    assert not apply_IA(u, p).any()
    with pytest.raises(ValueError):
        apply_IA(np.ones(n + 1), p)


@given(blocks, st.integers(0, 2 ** 32 - 1), st.booleans())
def test_IA_projection_and_coarse_basis(nm, seed, average_outer):
    n, M = nm
    p = build_block_partition(build_unit_square_mesh(n), M, average_outer=average_outer)
    rng = np.random.default_rng(seed)
    u, v = rng.standard_normal((2, p.mesh.n_dofs))
    w = apply_IA(u, p)
    np.testing.assert_allclose(apply_IA(w, p), w, atol=1e-12)
    np.testing.assert_allclose(apply_IA(2 * u - 3 * v, p),
                               2 * w - 3 * apply_IA(v, p), atol=1e-12)
    np.testing.assert_array_equal(w[p.interface_dofs], u[p.interface_dofs])
    # V0 = range(I_A): I_A u is the prolongation of its interface values,
    # and prolongations are fixed by I_A
    P = p.prolongation
    assert P.shape == (p.mesh.n_dofs, len(p.interface_dofs))
    np.testing.assert_allclose(P @ u[p.interface_dofs], w, atol=1e-12)
    c = rng.standard_normal(P.shape[1])
    np.testing.assert_allclose(apply_IA(P @ c, p), P @ c, atol=1e-12)


def test_interior_value_is_interface_mean():
    p = build_block_partition(build_unit_square_mesh(8), 2)
    u = np.arange(p.mesh.n_dofs, dtype=float)
    w = apply_IA(u, p)
    for inner, bnd in zip(p.interior_dofs, p.boundary_dofs):
        np.testing.assert_allclose(w[inner], u[bnd].mean())
    q = build_block_partition(build_unit_square_mesh(8), 2, average_outer=True)
    # each corner block has 8 outer midpoints on an 8x8 grid split in four
    np.testing.assert_array_equal(q.n_outer, [8, 8, 8, 8])
    w = apply_IA(u, q)
    for inner, bnd in zip(q.interior_dofs, q.boundary_dofs):
        np.testing.assert_allclose(w[inner], u[bnd].sum() / (len(bnd) + 8))


def test_single_subdomain_has_no_coarse_space():
    p = build_block_partition(build_unit_square_mesh(4), 1)
    assert len(p.interface_dofs) == 0
    assert p.prolongation.shape == (p.mesh.n_dofs, 0)
    assert not apply_IA(np.ones(p.mesh.n_dofs), p).any()


def test_layer_contrast_constant_alpha():
    n, M = 16, 4
    p = build_block_partition(build_unit_square_mesh(n), M)
    lc = layer_contrast(p, constant_coefficient(3.0))
    np.testing.assert_allclose(lc.ratio, 1.0)
    assert lc.beta1_quadratic == pytest.approx((n / M) ** 2)
    assert lc.beta1_linear == pytest.approx(n / M)


def _layer_ratio(example, alpha1, n=32):
    spec = preset_geometry(example, n).with_alpha1(alpha1)
    mesh, alpha = spec.build(build_unit_square_mesh(n))
    return layer_contrast(build_block_partition(mesh, 4), alpha).ratio.max()


def test_layer_ratio_versus_jump():
    # interior-only jumps leave the layer untouched
    assert _layer_ratio(1, 1e4) == pytest.approx(_layer_ratio(1, 1.0))
    # interface jumps put the contrast straight into the layer
    r1, r2 = _layer_ratio(2, 1e2), _layer_ratio(2, 1e4)
    assert r2 / r1 == pytest.approx(100, rel=0.05)


def test_write_partition(tmp_path):
    p = build_block_partition(build_unit_square_mesh(4), 2)
    write_partition(p, tmp_path / "p.txt")
    lines = (tmp_path / "p.txt").read_text().splitlines()
    assert lines[0] == "# triangles 32 subdomains 4"
    body = np.loadtxt(lines[1:33], dtype=int)
    np.testing.assert_array_equal(body[:, 1], p.subdomain_of)
    counts = np.loadtxt(lines[34:], dtype=int)
    np.testing.assert_array_equal(counts[:, 1], [len(a) for a in p.interior_dofs])
    np.testing.assert_array_equal(counts[:, 2], p.n_boundary)
