"""Experiment configuration: dataclasses plus JSON loading.

A config is one JSON document::

    {"mesh": {"n": 32, "diagonal": "ll_ur"},
     "partition": {"m": 4},
     "preset": 1,
     "coefficient": {"base": "sinusoidal", "frequency": 100,
                     "inclusions": [[x0, x1, y0, y1], ...], "alpha1": 1e3},
     "solver": {"k": 2, "rtol": 1e-6, "maxit": 1000},
     "sweep": {"alpha1": [1, 10, 100]},
     "output": {"path": "out.csv"}}

Coefficient keys given next to a preset override the preset's values.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

import numpy as np

from ..discretization import (CoefficientField, constant_coefficient,
                              sinusoidal_coefficient)
from ..mesh import TriMesh
from ..quadrature import QuadratureRule

__all__ = [
    "CoefficientSpec",
    "SolverConfig",
    "ExperimentConfig",
    "preset_geometry",
    "load_config",
    "config_from_dict",
]

INCLUSION_TAG = 1
# The oscillatory coefficients are under-resolved on coarse meshes, so the
# experiments integrate them with rules well beyond the polynomial degree.
HARNESS_QUAD = QuadratureRule(triangle_degree=10, segment_points=8)
_ALIGN_TOL = 1e-9


@dataclass(frozen=True)
class CoefficientSpec:
    """Base field times ``alpha1`` on a union of axis-aligned rectangles.

    ``base`` is ``"constant"`` (value ``value``) or ``"sinusoidal"``
    (``offset + sin(k pi x) sin(k pi y)`` with ``k = frequency``).
    ``inclusions`` are ``(x0, x1, y0, y1)`` rectangles; ``grid`` is the
    resolution they were drawn on (informational).
    """

    base: str = "sinusoidal"
    frequency: float = 100.0
    offset: float = 2.0
    value: float = 1.0
    inclusions: tuple = ()
    alpha1: float = 1.0
    grid: int | None = None

    def __post_init__(self):
        if self.base not in ("constant", "sinusoidal"):
            raise ValueError(f"unknown coefficient base {self.base!r}")
        rects = tuple(tuple(float(c) for c in r) for r in self.inclusions)
        for r in rects:
            if len(r) != 4 or not (r[0] < r[1] and r[2] < r[3]):
                raise ValueError(f"bad inclusion rectangle {r}")
        object.__setattr__(self, "inclusions", rects)
        # keep alpha >= 1 everywhere
        lowest = self.value if self.base == "constant" else self.offset - 1.0
        if lowest < 1.0 or self.alpha1 < 1.0:
            raise ValueError("coefficient must satisfy alpha >= 1 "
                             f"(base minimum {lowest}, alpha1 {self.alpha1})")

    def with_alpha1(self, alpha1: float) -> "CoefficientSpec":
        return replace(self, alpha1=float(alpha1))

    def check_alignment(self, n: int) -> None:
        """Raise unless every rectangle side lies on a line of the ``n`` grid."""
        for r in self.inclusions:
            scaled = np.asarray(r) * n
            if np.any(np.abs(scaled - np.round(scaled)) > _ALIGN_TOL * n):
                raise ValueError(f"inclusion {r} is not aligned with an n={n} mesh")

    def region_tags(self, mesh: TriMesh) -> np.ndarray:
        """Tag 1 for triangles whose centroid lies in an inclusion, else 0."""
        if mesh.structured_n is not None:
            self.check_alignment(mesh.structured_n)
        c = mesh.centroids
        tags = np.zeros(mesh.n_triangles, dtype=np.int64)
        for x0, x1, y0, y1 in self.inclusions:
            inside = (c[:, 0] > x0) & (c[:, 0] < x1) & (c[:, 1] > y0) & (c[:, 1] < y1)
            tags[inside] = INCLUSION_TAG
        return tags

    def field(self) -> CoefficientField:
        mult = {INCLUSION_TAG: self.alpha1} if self.inclusions else None
        if self.base == "sinusoidal":
            return sinusoidal_coefficient(self.frequency, self.offset, mult)
        if not mult:
            return constant_coefficient(self.value)
        from ..discretization import piecewise_constant_coefficient
        return piecewise_constant_coefficient([self.value, self.value * self.alpha1])

    def build(self, mesh: TriMesh) -> tuple[TriMesh, CoefficientField]:
        """Mesh carrying the inclusion tags, and the coefficient on it."""
        return mesh.with_region_tags(self.region_tags(mesh)), self.field()

    def to_dict(self) -> dict:
        d = asdict(self)
        d["inclusions"] = [list(r) for r in self.inclusions]
        return d


@dataclass(frozen=True)
class SolverConfig:
    k: int = 2
    rtol: float = 1e-6
    maxit: int = 1000
    estimate_cp: bool = True
    estimate_Cp: bool = False
    verify: bool = False        # compare against a direct sparse solve

    def __post_init__(self):
        if self.k not in (1, 2, 3):
            raise ValueError(f"solver.k must be 1, 2 or 3, got {self.k}")
        if not 0 < self.rtol < 1:
            raise ValueError("solver.rtol must lie in (0, 1)")
        if self.maxit < 1:
            raise ValueError("solver.maxit must be positive")


@dataclass(frozen=True)
class ExperimentConfig:
    n: int = 32
    m: int = 4
    diagonal: str = "ll_ur"
    average_outer: bool = False
    preset: int | None = None
    coefficient: CoefficientSpec = field(default_factory=CoefficientSpec)
    solver: SolverConfig = field(default_factory=SolverConfig)
    sweep: dict = field(default_factory=dict)
    output_path: str | None = None
    quadrature: QuadratureRule = HARNESS_QUAD

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("mesh.n must be at least 1")
        if self.m < 1:
            raise ValueError("partition.m must be at least 1")


def _preset_path(example: int):
    return resources.files("crfve.harness").joinpath("presets").joinpath(f"example{example}.json")


def preset_data(example: int) -> dict:
    """The raw preset document (a runnable config)."""
    if example not in (1, 2, 3, 4):
        raise ValueError(f"no preset geometry {example!r}; choose 1, 2, 3 or 4")
    return json.loads(_preset_path(example).read_text())


def preset_geometry(example: int, n: int | None = None) -> CoefficientSpec:
    """Coefficient of a shipped example geometry, checked against an ``n`` mesh."""
    data = preset_data(example)
    spec = _coefficient_from_dict(data["coefficient"])
    if n is not None:
        grid = spec.grid or 1
        if n % grid:
            raise ValueError(f"example {example} is drawn on a {grid}x{grid} grid; "
                             f"n={n} is not a multiple")
        spec.check_alignment(n)
    return spec


def _coefficient_from_dict(d: dict, base: CoefficientSpec | None = None) -> CoefficientSpec:
    known = {f.name for f in fields(CoefficientSpec)}
    unknown = set(d) - known
    if unknown:
        raise ValueError(f"unknown coefficient keys: {sorted(unknown)}")
    kw = dict(d)
    if "inclusions" in kw:
        kw["inclusions"] = tuple(tuple(r) for r in kw["inclusions"])
    return replace(base, **kw) if base is not None else CoefficientSpec(**kw)


def config_from_dict(d: dict) -> ExperimentConfig:
    d = dict(d)
    d.pop("description", None)
    mesh = d.pop("mesh", {})
    part = d.pop("partition", {})
    preset = d.pop("preset", None)
    coef = d.pop("coefficient", {})
    solver = d.pop("solver", {})
    sweep = d.pop("sweep", {})
    output = d.pop("output", {})
    quad = d.pop("quadrature", {})
    if d:
        raise ValueError(f"unknown config sections: {sorted(d)}")
    base = None
    if preset is not None:
        pdata = preset_data(int(preset))
        mesh = {**pdata.get("mesh", {}), **mesh}
        part = {**pdata.get("partition", {}), **part}
        solver = {**pdata.get("solver", {}), **solver}
        sweep = {**pdata.get("sweep", {}), **sweep}
    n = int(mesh.get("n", 32))
    if preset is not None:
        base = preset_geometry(int(preset), n)
    spec = _coefficient_from_dict(coef, base)
    return ExperimentConfig(
        n=n,
        m=int(part.get("m", 4)),
        diagonal=mesh.get("diagonal", "ll_ur"),
        average_outer=bool(part.get("average_outer", False)),
        preset=None if preset is None else int(preset),
        coefficient=spec,
        solver=SolverConfig(**solver),
        sweep=sweep,
        output_path=output.get("path"),
        quadrature=replace(HARNESS_QUAD, **quad),
    )


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: not valid JSON ({exc})") from None
    return config_from_dict(data)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    out = {"mesh": {"n": cfg.n, "diagonal": cfg.diagonal},
           "partition": {"m": cfg.m, "average_outer": cfg.average_outer},
           "coefficient": cfg.coefficient.to_dict(),
           "solver": asdict(cfg.solver),
           "sweep": cfg.sweep,
           "quadrature": asdict(cfg.quadrature)}
    if cfg.output_path:
        out["output"] = {"path": cfg.output_path}
    return out


def write_config(cfg: ExperimentConfig, path) -> None:
    Path(path).write_text(json.dumps(config_to_dict(cfg), indent=2) + "\n")
