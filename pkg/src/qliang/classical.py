"""Classical bivariate Liang-Kleeman information flow on a 2-D grid.

For a deterministic system dx/dt = F(x) the density obeys the Liouville
(continuity) equation, and the flow from x2 to x1 is

    T_{2->1} = -E[ (F1 / rho1) d(rho1)/dx1 + dF1/dx1 ]

where rho1 is the x1 marginal. Densities live on a uniform cell-centred
grid; evolution uses a first-order donor-cell (upwind) finite-volume scheme
with zero-flux walls, which keeps the density nonnegative and its mass
exactly conserved.

Entropies are differential entropies in bits computed as
``-sum p log2 p * cell_size``; only differences and rates are meaningful.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import BoundaryMassError, StabilityError

CFL_LIMIT = 0.5
MARGINAL_FLOOR = 1e-14
BOUNDARY_MASS_TOL = 1e-6
ENTROPY_CONVENTION = "differential entropy in bits, -sum p log2(p) * cell size"

Func = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class VectorField2D:
    """``F = (f1, f2)`` on the box ``[a1, b1] x [a2, b2]``.

    ``df1_dx1`` / ``df2_dx2`` may be given analytically; otherwise they are
    taken by central differences with step ``fd_step``.
    """

    f1: Func
    f2: Func
    box: tuple[tuple[float, float], tuple[float, float]]
    df1_dx1: Func | None = None
    df2_dx2: Func | None = None
    fd_step: float = 1e-5

    def __call__(self, x1, x2):
        x1, x2 = np.broadcast_arrays(np.asarray(x1, float), np.asarray(x2, float))
        return (np.broadcast_to(self.f1(x1, x2), x1.shape),
                np.broadcast_to(self.f2(x1, x2), x1.shape))

    def partial(self, axis: int, x1, x2) -> np.ndarray:
        """``dF_i/dx_i`` for ``axis`` i (0 or 1)."""
        x1, x2 = np.broadcast_arrays(np.asarray(x1, float), np.asarray(x2, float))
        exact = self.df1_dx1 if axis == 0 else self.df2_dx2
        if exact is not None:
            return np.broadcast_to(exact(x1, x2), x1.shape)
        h = self.fd_step
        if axis == 0:
            return (self.f1(x1 + h, x2) - self.f1(x1 - h, x2)) / (2 * h)
        return (self.f2(x1, x2 + h) - self.f2(x1, x2 - h)) / (2 * h)

    def divergence(self, x1, x2) -> np.ndarray:
        return self.partial(0, x1, x2) + self.partial(1, x1, x2)

    def reversed(self) -> "VectorField2D":
        """``-F``: running the Liouville equation under it goes back in time."""
        neg = lambda f: (None if f is None else (lambda a, b: -f(a, b)))  # noqa: E731
        return VectorField2D(
            neg(self.f1), neg(self.f2), self.box,
            neg(self.df1_dx1), neg(self.df2_dx2), self.fd_step,
        )


@dataclass(frozen=True)
class DensityGrid:
    """Cell-averaged density on a uniform grid spanning ``box``."""

    values: np.ndarray
    box: tuple[tuple[float, float], tuple[float, float]]

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or min(values.shape) < 3:
            raise ValueError("density grid must be 2-D with at least 3 cells per axis")
        if np.any(values < 0):
            raise ValueError("density must be nonnegative")
        object.__setattr__(self, "values", values)
        mass = values.sum() * self.dx1 * self.dx2
        if abs(mass - 1.0) > 1e-6:
            raise ValueError(f"density integrates to {mass:.9g}, not 1")

    @property
    def shape(self):
        return self.values.shape

    @property
    def dx1(self) -> float:
        (a, b), _ = self.box
        return (b - a) / self.values.shape[0]

    @property
    def dx2(self) -> float:
        _, (a, b) = self.box
        return (b - a) / self.values.shape[1]

    def edges(self, axis: int) -> np.ndarray:
        a, b = self.box[axis]
        return np.linspace(a, b, self.values.shape[axis] + 1)

    def centers(self, axis: int) -> np.ndarray:
        e = self.edges(axis)
        return 0.5 * (e[1:] + e[:-1])

    def mesh(self):
        return np.meshgrid(self.centers(0), self.centers(1), indexing="ij")

    def marginal(self, axis: int) -> np.ndarray:
        """Marginal density of ``x_{axis+1}`` at cell centres."""
        if axis == 0:
            return self.values.sum(axis=1) * self.dx2
        return self.values.sum(axis=0) * self.dx1

    def cell(self, axis: int) -> float:
        return self.dx1 if axis == 0 else self.dx2

    def boundary_mass(self) -> float:
        v = self.values
        ring = v[0, :].sum() + v[-1, :].sum() + v[1:-1, 0].sum() + v[1:-1, -1].sum()
        return float(ring * self.dx1 * self.dx2)

    def total_mass(self) -> float:
        return float(self.values.sum() * self.dx1 * self.dx2)


def gaussian_density(mean, cov, box, shape=(241, 241)) -> DensityGrid:
    """Normalised bivariate Gaussian sampled at cell centres."""
    mean = np.asarray(mean, float)
    prec = np.linalg.inv(np.asarray(cov, float))
    (a1, b1), (a2, b2) = box
    c1 = np.linspace(a1, b1, shape[0] + 1)
    c2 = np.linspace(a2, b2, shape[1] + 1)
    x1, x2 = np.meshgrid(0.5 * (c1[1:] + c1[:-1]) - mean[0], 0.5 * (c2[1:] + c2[:-1]) - mean[1], indexing="ij")
    q = prec[0, 0] * x1**2 + 2 * prec[0, 1] * x1 * x2 + prec[1, 1] * x2**2
    values = np.exp(-0.5 * q)
    values /= values.sum() * (c1[1] - c1[0]) * (c2[1] - c2[0])
    return DensityGrid(values, box)


def _face_velocities(rho: DensityGrid, field: VectorField2D):
    e1, e2 = rho.edges(0), rho.edges(1)
    c1, c2 = rho.centers(0), rho.centers(1)
    # normal components on interior faces only; walls carry zero flux
    u1 = np.asarray(field(e1[1:-1, None], c2[None, :])[0])
    u2 = np.asarray(field(c1[:, None], e2[None, 1:-1])[1])
    return u1, u2


def cfl_number(rho: DensityGrid, field: VectorField2D, dt: float) -> float:
    u1, u2 = _face_velocities(rho, field)
    return max(np.abs(u1).max() * dt / rho.dx1, np.abs(u2).max() * dt / rho.dx2)


def evolve_density(rho: DensityGrid, field: VectorField2D, dt: float, steps: int) -> DensityGrid:
    """Advance ``d rho/dt = -div(F rho)`` by ``steps`` upwind steps of size ``dt``."""
    u1, u2 = _face_velocities(rho, field)
    cfl = max(np.abs(u1).max() * dt / rho.dx1, np.abs(u2).max() * dt / rho.dx2)
    if cfl >= CFL_LIMIT:
        raise StabilityError(f"CFL number {cfl:.3g} >= {CFL_LIMIT}; reduce dt")
    v = rho.values.copy()
    pos1, neg1 = np.maximum(u1, 0), np.minimum(u1, 0)
    pos2, neg2 = np.maximum(u2, 0), np.minimum(u2, 0)
    r1, r2 = dt / rho.dx1, dt / rho.dx2
    for _ in range(int(steps)):
        flux1 = pos1 * v[:-1, :] + neg1 * v[1:, :]
        flux2 = pos2 * v[:, :-1] + neg2 * v[:, 1:]
        dv = np.zeros_like(v)
        dv[:-1, :] -= r1 * flux1
        dv[1:, :] += r1 * flux1
        dv[:, :-1] -= r2 * flux2
        dv[:, 1:] += r2 * flux2
        v += dv
    return DensityGrid(v, rho.box)


def _entropy_bits(p: np.ndarray, cell: float) -> float:
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p)) * cell)


def marginal_entropy(rho: DensityGrid, axis: int) -> float:
    """Differential entropy (bits) of the ``x_{axis+1}`` marginal.

    Follows :data:`ENTROPY_CONVENTION`.
    """
    return _entropy_bits(rho.marginal(axis), rho.cell(axis))


def joint_entropy(rho: DensityGrid) -> float:
    return _entropy_bits(rho.values.ravel(), rho.dx1 * rho.dx2)


def classical_flow_rate(rho: DensityGrid, field: VectorField2D, target: int = 0) -> float:
    """Rate of information flow (bits / time) into ``x_{target+1}`` from the other variable.

    ``target=0`` gives T_{2->1}, ``target=1`` gives T_{1->2}.
    """
    if rho.boundary_mass() > BOUNDARY_MASS_TOL:
        raise BoundaryMassError(
            f"mass {rho.boundary_mass():.3g} on the grid edge; enlarge the box"
        )
    x1, x2 = rho.mesh()
    force = field(x1, x2)[target]
    dfdx = field.partial(target, x1, x2)
    cell_other = rho.cell(1 - target)
    cell_self = rho.cell(target)
    marg = rho.marginal(target)
    dmarg = np.gradient(marg, cell_self)
    # E[F_t | x_t] * rho_t, integrated over the other variable
    weighted = (rho.values * force).sum(axis=1 - target) * cell_other
    ok = marg > MARGINAL_FLOOR
    advective = np.sum(weighted[ok] * dmarg[ok] / marg[ok]) * cell_self
    contraction = np.sum(rho.values * dfdx) * rho.dx1 * rho.dx2
    return float(-(advective + contraction) / math.log(2))


def stable_substeps(rho: DensityGrid, field: VectorField2D, tau: float, safety: float = 0.9) -> int:
    """Smallest step count that keeps ``tau / k`` under the CFL limit."""
    cfl = cfl_number(rho, field, tau)
    return max(1, math.ceil(cfl / (CFL_LIMIT * safety)))


def marginal_entropy_rate(
    rho: DensityGrid, field: VectorField2D, axis: int = 0, tau: float = 0.01
) -> float:
    """dS/dt of a marginal by a central difference over ``+-tau``.

    The backward half runs the Liouville equation under ``-F``. Upwind
    numerical diffusion raises the entropy in both halves, so its leading
    contribution cancels in the difference.
    """
    k = stable_substeps(rho, field, tau)
    fwd = evolve_density(rho, field, tau / k, k)
    bwd = evolve_density(rho, field.reversed(), tau / k, k)
    return (marginal_entropy(fwd, axis) - marginal_entropy(bwd, axis)) / (2 * tau)


def joint_entropy_rate(rho: DensityGrid, field: VectorField2D, tau: float = 0.01) -> float:
    k = stable_substeps(rho, field, tau)
    fwd = evolve_density(rho, field, tau / k, k)
    bwd = evolve_density(rho, field.reversed(), tau / k, k)
    return (joint_entropy(fwd) - joint_entropy(bwd)) / (2 * tau)
