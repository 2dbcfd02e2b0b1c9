"""Domains, grids, subregions, quadrature and analytic coefficient fields."""

from dataclasses import dataclass

import numpy as np

from .fields import (
    AnnulusDimple,
    BallCutoff,
    BoxCutoff,
    CallableField,
    Constant,
    ConstantMetric,
    ExpField,
    Gaussian,
    Linear,
    MetricField,
    Polynomial1D,
    Quadratic,
    ScalarField,
    SineProduct,
    SumField,
    TrigMetric,
    field_from_descriptor,
    metric_from_descriptor,
)
from .grid import (
    BoundaryComponent,
    Grid,
    Subregion,
    ball,
    boundary_integrate,
    box,
    build_grid,
    check_region,
    complement,
    integrate,
    region_from_descriptor,
    sublevel,
    union,
    whole,
)


@dataclass
class FieldReport:
    max_gradient_error: float
    max_hessian_error: float
    tolerance: float
    samples: int

    @property
    def passed(self):
        return self.max_gradient_error <= self.tolerance and self.max_hessian_error <= self.tolerance


def _rel(a, b):
    scale = np.maximum(1.0, np.linalg.norm(b.reshape(b.shape[0], -1), axis=1))
    return np.linalg.norm((a - b).reshape(a.shape[0], -1), axis=1) / scale


def validate_field(fld, grid: Grid, samples: int = 100, seed: int = 0) -> FieldReport:
    """Finite-difference consistency check of a field's analytic derivatives.

    Central differences with step ``delta = 1e-4 * diameter`` at seeded points
    of the grid's bounding box; the error is measured relative to
    ``max(1, |exact|)`` and the pass threshold is ``10 * delta**2``.
    A :class:`MetricField` is checked through its ``deriv`` instead.
    """
    lo, hi = np.array(grid.lo), np.array(grid.hi)
    delta = 1e-4 * grid.diameter
    rng = np.random.default_rng(seed)
    # keep the stencil inside the box
    x = lo + delta + (hi - lo - 2 * delta) * rng.random((samples, grid.dim))
    if np.any(x < lo) or np.any(x > hi):
        raise ValueError("sample point outside domain of definition")
    eye = np.eye(grid.dim) * delta

    if isinstance(fld, MetricField):
        fd = np.stack([(fld(x + e) - fld(x - e)) / (2 * delta) for e in eye], axis=-1)
        err = float(np.max(_rel(fd, fld.deriv(x))))
        return FieldReport(err, 0.0, 10 * delta**2, samples)

    fd_g = np.stack([(fld(x + e) - fld(x - e)) / (2 * delta) for e in eye], axis=-1)
    fd_h = np.stack([(fld.grad(x + e) - fld.grad(x - e)) / (2 * delta) for e in eye], axis=-1)
    H = fld.hess(x)
    if not np.allclose(H, np.swapaxes(H, -1, -2), rtol=1e-12, atol=1e-12):
        return FieldReport(float(np.max(_rel(fd_g, fld.grad(x)))), float("inf"), 10 * delta**2, samples)
    return FieldReport(
        float(np.max(_rel(fd_g, fld.grad(x)))),
        float(np.max(_rel(fd_h, H))),
        10 * delta**2,
        samples,
    )


__all__ = [
    "AnnulusDimple", "BallCutoff", "BoundaryComponent", "BoxCutoff", "CallableField",
    "Constant", "ConstantMetric", "ExpField", "FieldReport", "Gaussian", "Grid", "Linear",
    "MetricField", "Polynomial1D", "Quadratic", "ScalarField", "SineProduct", "Subregion",
    "SumField", "TrigMetric", "ball", "boundary_integrate", "box", "build_grid",
    "check_region", "complement", "field_from_descriptor", "integrate",
    "metric_from_descriptor", "region_from_descriptor", "sublevel", "union",
    "validate_field", "whole",
]
