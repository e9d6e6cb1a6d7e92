"""Quantum Liang information flow between subsystems.

The flow from a set of source sites F to a target subsystem A compares two
trajectories started from the same state: the full dynamics, and the
dynamics with every Hamiltonian term touching F deleted. The cumulative flow
is the difference of the target's entropy change along the two,

    T_cum(t) = [S_A(t) - S_A(0)] - [S_A|F frozen(t) - S_A(0)],

and the rate is its time derivative.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import core
from .core import DensityMatrix, HermitianOperator
from .errors import FlowRequestError, NonUnitaryError, RegistryError
from .hamiltonians import HamiltonianSpec, freeze

RATE_MODES = ("from_start", "instantaneous")
MIN_RATE_STEP = 1e-6


def _labels(x: str | Iterable[str]) -> tuple[str, ...]:
    if isinstance(x, str):
        return (x,)
    return tuple(x)


@dataclass(frozen=True)
class FlowRequest:
    """Everything needed to evaluate one directed flow on a time grid.

    ``steps`` is the number of grid intervals; the grid has ``steps + 1``
    points from 0 to ``t_max``.
    """

    hamiltonian: HamiltonianSpec
    initial: DensityMatrix
    target: tuple[str, ...]
    sources: tuple[str, ...]
    t_max: float
    steps: int
    rate_mode: str = "from_start"
    rate_step: float = 1e-3

    def __post_init__(self):
        object.__setattr__(self, "target", _labels(self.target))
        object.__setattr__(self, "sources", _labels(self.sources))
        reg = self.hamiltonian.registry
        if self.initial.registry != reg:
            raise FlowRequestError("initial state and Hamiltonian use different registries")
        if not self.target:
            raise FlowRequestError("target must name at least one site")
        if not self.sources:
            raise FlowRequestError("sources must name at least one site")
        try:
            reg.check_labels(self.target + self.sources)
        except RegistryError as exc:
            raise FlowRequestError(str(exc)) from None
        overlap = set(self.target) & set(self.sources)
        if overlap:
            raise FlowRequestError(f"sites {sorted(overlap)} are both source and target")
        if int(self.steps) < 2:
            raise FlowRequestError("grid needs at least 2 steps")
        if not self.t_max > 0:
            raise FlowRequestError("t_max must be positive")
        if self.rate_mode not in RATE_MODES:
            raise FlowRequestError(f"rate_mode must be one of {RATE_MODES}")
        if self.rate_step < MIN_RATE_STEP:
            raise FlowRequestError(f"rate_step {self.rate_step:g} below {MIN_RATE_STEP:g}")

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, float(self.t_max), int(self.steps) + 1)

    @property
    def frozen_hamiltonian(self) -> HamiltonianSpec:
        return freeze(self.hamiltonian, self.sources)

    def with_sources(self, sources) -> "FlowRequest":
        return FlowRequest(
            self.hamiltonian, self.initial, self.target, _labels(sources),
            self.t_max, self.steps, self.rate_mode, self.rate_step,
        )


@dataclass
class FlowSeries:
    """Entropies (bits), cumulative flow (bits) and rate (bits / time) on a grid."""

    times: np.ndarray
    s_target: np.ndarray
    s_target_frozen: np.ndarray
    cumulative: np.ndarray
    rate: np.ndarray
    sources: tuple[str, ...] = ()
    target: tuple[str, ...] = ()
    meta: dict = field(default_factory=dict)

    @property
    def name(self) -> str:
        return f"{''.join(self.sources)}->{''.join(self.target)}"

    def at(self, t: float) -> float:
        """Cumulative flow at the grid point closest to ``t``."""
        return float(self.cumulative[np.argmin(np.abs(self.times - t))])


def target_entropy(rho: DensityMatrix, target: Sequence[str]) -> float:
    return core.von_neumann_entropy(core.partial_trace(rho, target))


def entropy_trajectory(
    rho0: DensityMatrix, h: HermitianOperator, target: Sequence[str], times: Iterable[float]
) -> np.ndarray:
    """Marginal entropy of ``target`` along ``exp(-iht) rho0 exp(iht)``."""
    return np.array([target_entropy(core.evolve(rho0, h, t), target) for t in times])


def rate_from_cumulative(times: np.ndarray, cumulative: np.ndarray) -> np.ndarray:
    """Central differences inside the grid, one-sided at the two ends."""
    return np.gradient(cumulative, times, edge_order=1)


def _is_complement(req: FlowRequest) -> bool:
    return set(req.sources) | set(req.target) == set(req.hamiltonian.registry.labels)


def cumulative_flow(req: FlowRequest, shortcut: bool = True) -> FlowSeries:
    """Evaluate the directed flow ``sources -> target`` on the request grid.

    With ``shortcut`` and sources covering everything outside the target,
    the frozen dynamics is local to the target, so its entropy stays at the
    initial value and the frozen trajectory is not simulated.
    """
    times = req.times
    s_full = entropy_trajectory(req.initial, req.hamiltonian.materialize(), req.target, times)
    if shortcut and _is_complement(req):
        s_frozen = np.full_like(s_full, s_full[0])
    else:
        s_frozen = entropy_trajectory(
            req.initial, req.frozen_hamiltonian.materialize(), req.target, times
        )
    # shared initial state: the two entropy changes telescope
    cumulative = (s_full - s_full[0]) - (s_frozen - s_frozen[0])
    if req.rate_mode == "from_start":
        rate = rate_from_cumulative(times, cumulative)
    else:
        rate = np.array([instantaneous_rate(req, t) for t in times])
    return FlowSeries(
        times, s_full, s_frozen, cumulative, rate,
        sources=req.sources, target=req.target,
        meta={"rate_mode": req.rate_mode},
    )


def instantaneous_rate(req: FlowRequest, t: float, h: float | None = None) -> float:
    """Flow rate with the sources frozen at time ``t`` rather than at 0.

    The state is carried to ``t`` under the full dynamics; both branches are
    then differentiated by a central difference of half-width ``h``.
    """
    h = req.rate_step if h is None else h
    if h < MIN_RATE_STEP:
        raise FlowRequestError(f"derivative step {h:g} below {MIN_RATE_STEP:g}")
    if not 0 <= t <= req.t_max:
        raise FlowRequestError(f"t={t} outside [0, {req.t_max}]")
    full = req.hamiltonian.materialize()
    frozen = req.frozen_hamiltonian.materialize()
    rho_t = core.evolve(req.initial, full, t)

    def ddt(op):
        plus = target_entropy(core.evolve(rho_t, op, h), req.target)
        minus = target_entropy(core.evolve(rho_t, op, -h), req.target)
        return (plus - minus) / (2 * h)

    return ddt(full) - ddt(frozen)


def check_unitary(u: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise NonUnitaryError(f"expected a square matrix, got shape {u.shape}")
    err = np.max(np.abs(u.conj().T @ u - np.eye(len(u))))
    if err > tol:
        raise NonUnitaryError(f"||U^dag U - I|| = {err:.3g}")
    return u


def discrete_map_flow(
    rho0: DensityMatrix,
    u_full: np.ndarray,
    target: str | Sequence[str],
    u_frozen: np.ndarray | None = None,
) -> float:
    """Cumulative flow into ``target`` for a single discrete step.

    Without ``u_frozen`` the frozen map is taken to act locally on the
    target (the bipartite case), so the frozen entropy change is zero.
    """
    target = _labels(target)
    u_full = check_unitary(u_full)
    s0 = target_entropy(rho0, target)
    ds_full = target_entropy(core.evolve_unitary(rho0, u_full), target) - s0
    if u_frozen is None:
        return ds_full
    u_frozen = check_unitary(u_frozen)
    ds_frozen = target_entropy(core.evolve_unitary(rho0, u_frozen), target) - s0
    return ds_full - ds_frozen


def flow_at(
    hamiltonian: HamiltonianSpec, initial: DensityMatrix, sources, target, t: float
) -> float:
    """Cumulative flow at a single time."""
    sources, target = _labels(sources), _labels(target)
    full = hamiltonian.materialize()
    frozen = freeze(hamiltonian, sources).materialize()
    s0 = target_entropy(initial, target)
    s_full = target_entropy(core.evolve(initial, full, t), target)
    s_frozen = target_entropy(core.evolve(initial, frozen, t), target)
    return (s_full - s0) - (s_frozen - s0)


def pairwise_flow_matrix(
    hamiltonian: HamiltonianSpec,
    initial: DensityMatrix,
    t: float,
    max_workers: int | None = None,
) -> tuple[tuple[str, ...], np.ndarray]:
    """Single-site flows ``M[i, j] = T_cum(i -> j)`` at time ``t``; NaN diagonal."""
    labels = hamiltonian.registry.labels
    n = len(labels)
    pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    # materialise once so worker threads share the cached eigensystem
    hamiltonian.materialize().eigensystem

    def one(pair):
        i, j = pair
        return flow_at(hamiltonian, initial, labels[i], labels[j], t)

    if max_workers and max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            values = list(pool.map(one, pairs))
    else:
        values = [one(p) for p in pairs]
    out = np.full((n, n), np.nan)
    for (i, j), v in zip(pairs, values):
        out[i, j] = v
    return labels, out


@dataclass
class SuperadditivityReport:
    times: np.ndarray
    joint: np.ndarray
    singles: dict[tuple[str, ...], np.ndarray]
    sum_of_singles: np.ndarray
    gap: np.ndarray

    @property
    def superadditive(self) -> np.ndarray:
        return self.gap > 0


def superadditivity_report(
    hamiltonian: HamiltonianSpec,
    initial: DensityMatrix,
    sources: Sequence[str | Sequence[str]],
    target: str | Sequence[str],
    t_max: float,
    steps: int,
) -> SuperadditivityReport:
    """Compare the joint flow from all ``sources`` with the sum of their individual flows."""
    groups = [_labels(s) for s in sources]
    seen: set[str] = set()
    for g in groups:
        if seen & set(g):
            raise FlowRequestError("source groups must be pairwise disjoint")
        seen |= set(g)
    joint_sources = tuple(label for g in groups for label in g)
    base = FlowRequest(hamiltonian, initial, _labels(target), joint_sources, t_max, steps)
    joint = cumulative_flow(base).cumulative
    if len(groups) == 1:
        singles = {groups[0]: joint.copy()}
    else:
        singles = {g: cumulative_flow(base.with_sources(g)).cumulative for g in groups}
    total = np.sum(list(singles.values()), axis=0)
    return SuperadditivityReport(base.times, joint, singles, total, joint - total)
