"""Self-check suite behind ``qliang validate``.

Each check is a small, deterministic computation returning pass/fail plus a
short detail string. The suite covers the structural invariants (nil
causality, entropy conservation, freezing algebra) and the reference
numbers of the bundled scenarios.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import analysis, bath, classical, core, flow, hamiltonians, scenario
from .core import DensityMatrix, SiteRegistry
from .hamiltonians import HamiltonianSpec


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def as_dict(self):
        return {"name": self.name, "passed": self.passed, "detail": self.detail,
                "seconds": round(self.seconds, 3)}


CHECKS: list[tuple[str, Callable[[], tuple[bool, str]]]] = []


def check(name):
    def deco(fn):
        CHECKS.append((name, fn))
        return fn
    return deco


def random_density(rng, dim, rank=None):
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_hermitian(rng, dim, scale=1.0):
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return scale * (g + g.conj().T) / 2


def brute_partial_trace(matrix, dims, keep):
    """Explicit index loops; independent of the reshape/einsum path."""
    n = len(dims)
    kept = [i for i in range(n) if i in keep]
    traced = [i for i in range(n) if i not in keep]
    all_idx = list(itertools.product(*[range(d) for d in dims]))
    flat = {idx: k for k, idx in enumerate(all_idx)}
    dk = int(np.prod([dims[i] for i in kept]))
    kept_idx = list(itertools.product(*[range(dims[i]) for i in kept]))
    traced_idx = list(itertools.product(*[range(dims[i]) for i in traced]))
    out = np.zeros((dk, dk), dtype=complex)
    for a, ka in enumerate(kept_idx):
        for b, kb in enumerate(kept_idx):
            total = 0
            for tr in traced_idx:
                ia = [0] * n
                ib = [0] * n
                for pos, i in enumerate(kept):
                    ia[i], ib[i] = ka[pos], kb[pos]
                for pos, i in enumerate(traced):
                    ia[i] = ib[i] = tr[pos]
                total += matrix[flat[tuple(ia)], flat[tuple(ib)]]
            out[a, b] = total
    return out


def product_form_instance(rng, shape: str):
    """Random H that factorises as A|BC (``"M_A x N_BC"``) or AC|B (``"O_AC x Q_B"``)."""
    reg = SiteRegistry.qubits("ABC")
    if shape == "M_A x N_BC":
        local = hamiltonians.terms_from_matrix(random_hermitian(rng, 2), ["A"])
        rest = hamiltonians.terms_from_matrix(random_hermitian(rng, 4), ["B", "C"])
    else:
        local = hamiltonians.terms_from_matrix(random_hermitian(rng, 4), ["A", "C"])
        rest = hamiltonians.terms_from_matrix(random_hermitian(rng, 2), ["B"])
    spec = HamiltonianSpec(reg, tuple(local + rest))
    rho = DensityMatrix(reg, random_density(rng, 8))
    return spec, rho


def nil_causality_max(n_instances=50, seed=7, t_max=3.0, steps=30) -> float:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for k in range(n_instances):
        shape = "M_A x N_BC" if k % 2 == 0 else "O_AC x Q_B"
        spec, rho = product_form_instance(rng, shape)
        req = flow.FlowRequest(spec, rho, "A", "B", t_max, steps)
        worst = max(worst, float(np.max(np.abs(flow.cumulative_flow(req).cumulative))))
    return worst


@check("entropy_golden_0.9_0.1")
def _entropy_golden():
    s = core.von_neumann_entropy(np.diag([0.9, 0.1]))
    return abs(s - 0.4690) <= 5e-4, f"S = {s:.6f} bits"


@check("entropy_small_eigenvalues")
def _entropy_small():
    p = 1e-6
    exact = -(p * np.log2(p) + (1 - p) * np.log2(1 - p))
    s = core.von_neumann_entropy(np.diag([1 - p, p]))
    return abs(s - exact) < 1e-12, f"S = {s:.6e} bits, closed form {exact:.6e}"


@check("partial_trace_bruteforce")
def _ptrace():
    rng = np.random.default_rng(1)
    reg = SiteRegistry.qubits("ABC")
    rho = DensityMatrix(reg, random_density(rng, 8))
    worst = 0.0
    for keep in [{"A"}, {"B"}, {"C"}, {"A", "C"}, {"A", "B"}]:
        idx = {reg.index(k) for k in keep}
        ref = brute_partial_trace(rho.matrix, reg.dims, idx)
        worst = max(worst, np.max(np.abs(core.partial_trace(rho, keep).matrix - ref)))
    return worst < 1e-12, f"max deviation {worst:.2e}"


@check("global_entropy_conservation")
def _global_entropy():
    rng = np.random.default_rng(2)
    reg = SiteRegistry.qubits("ABCD")
    rho = DensityMatrix(reg, random_density(rng, 16, rank=5))
    h = core.HermitianOperator(reg, random_hermitian(rng, 16))
    s0 = core.von_neumann_entropy(rho)
    dev = max(abs(core.von_neumann_entropy(core.evolve(rho, h, t)) - s0) for t in np.linspace(0, 5, 11))
    return dev < 1e-8, f"max |dS| {dev:.2e}"


@check("nil_causality_50_instances")
def _nil():
    worst = nil_causality_max()
    return worst < 1e-8, f"max |T_B->A| {worst:.2e}"


@check("complement_rule")
def _complement():
    rng = np.random.default_rng(3)
    reg = SiteRegistry.qubits("ABC")
    spec = HamiltonianSpec(reg, tuple(hamiltonians.terms_from_matrix(random_hermitian(rng, 8), "ABC")))
    rho = DensityMatrix(reg, random_density(rng, 8))
    req = flow.FlowRequest(spec, rho, "A", ("B", "C"), 2.0, 20)
    series = flow.cumulative_flow(req, shortcut=False)
    dev = float(np.max(np.abs(series.cumulative - (series.s_target - series.s_target[0]))))
    return dev < 1e-10, f"max deviation {dev:.2e}"


@check("pure_bipartite_symmetry")
def _bipartite():
    rng = np.random.default_rng(4)
    reg = SiteRegistry.qubits("AB")
    psi = rng.normal(size=4) + 1j * rng.normal(size=4)
    rho = DensityMatrix.from_pure(reg, psi)
    spec = HamiltonianSpec(reg, tuple(hamiltonians.terms_from_matrix(random_hermitian(rng, 4), "AB")))
    ba = flow.cumulative_flow(flow.FlowRequest(spec, rho, "A", "B", 2.0, 20), shortcut=False)
    ab = flow.cumulative_flow(flow.FlowRequest(spec, rho, "B", "A", 2.0, 20), shortcut=False)
    dev = max(np.max(np.abs(ba.s_target - ab.s_target)), np.max(np.abs(ba.cumulative - ab.cumulative)))
    return dev < 1e-9, f"max |S_A - S_B| or |T_BA - T_AB| {dev:.2e}"


@check("freeze_golden_term_list")
def _freeze_golden():
    reg = SiteRegistry.qubits("ABC")
    # chain A-C-B plus a free term on A; freezing A must leave only B-C
    spec = hamiltonians.xy_chain(reg, [("A", "C", 1.0), ("B", "C", 3.0)])
    spec = spec.with_terms([hamiltonians.build_field_z("A", 0.7)])
    frozen = hamiltonians.freeze(spec, {"A"})
    expected = tuple(hamiltonians.build_xy_coupling("B", "C", 3.0))
    return frozen.terms == expected, f"{len(frozen.terms)} terms after freezing A"


@check("freeze_algebra")
def _freeze_algebra():
    spec = scenario.build_hamiltonian(scenario.load_bundled("fig3b"))
    ok = hamiltonians.freeze(hamiltonians.freeze(spec, {"C"}), {"C"}) == hamiltonians.freeze(spec, {"C"})
    ok &= hamiltonians.freeze(spec, {"A", "C"}) == hamiltonians.freeze(hamiltonians.freeze(spec, {"A"}), {"C"})
    h = hamiltonians.freeze(spec, {"C"}).materialize().matrix
    local = core.embed([("C", core.SIGMA_X)], spec.registry)
    comm = float(np.max(np.abs(h @ local - local @ h)))
    return bool(ok) and comm < 1e-10, f"idempotent/union ok={bool(ok)}, commutator {comm:.1e}"


@check("cnot_discrete_flow")
def _cnot():
    reg = SiteRegistry.qubits("AB")
    rho = DensityMatrix.product(reg, {"A": core.maximally_mixed(2), "B": core.basis_projector(2, 0)})
    u = hamiltonians.gate_unitary("CNOT", ["A", "B"], reg)
    to_b = flow.discrete_map_flow(rho, u, "B")
    to_a = flow.discrete_map_flow(rho, u, "A")
    ok = abs(to_b - 1.0) < 1e-12 and abs(to_a) < 1e-12
    return ok, f"T_A->B {to_b:.12f}, T_B->A {to_a:.1e}"


GRADED_STAR_GOLDEN = {"A": 0.0731, "B": 0.0132, "C": 0.0022, "D": 0.0001}


def graded_star_series():
    cfg = scenario.load_bundled("appD")
    series = scenario.run_flows(cfg)
    return {s.sources: s for s in series}


@check("graded_star_golden")
def _graded_star():
    by_src = graded_star_series()
    singles = [by_src[(k,)] for k in "ABCD"]
    t = singles[0].times
    vals = {k: s.at(0.26) for k, s in zip("ABCD", singles)}
    close = all(abs(vals[k] - GRADED_STAR_GOLDEN[k]) <= 5e-4 for k in GRADED_STAR_GOLDEN)
    window = (t > 0) & (t <= 0.26 + 1e-12)
    c = np.array([s.cumulative[window] for s in singles])
    ordered = bool(np.all((c[0] > c[1]) & (c[1] > c[2]) & (c[2] > c[3])))
    joint = by_src[("A", "B", "C", "D")].at(0.26)
    superadd = joint > sum(vals.values())
    detail = ", ".join(f"{k}:{v:.4f}" for k, v in vals.items()) + f"; ordered={ordered}, joint={joint:.4f}"
    return close and ordered and superadd, detail


@check("star_capacity_and_symmetry")
def _star():
    cfg = scenario.load_bundled("fig3a")
    series = scenario.run_flows(cfg)
    t_cap = analysis.first_capacity_time(series[0].times, series[0].s_target)
    spread = max(float(np.max(np.abs(a.cumulative - b.cumulative))) for a, b in itertools.combinations(series, 2))
    return abs(t_cap - 0.69) <= 0.01 and spread < 1e-9, f"S_E capacity at t={t_cap:.3f}, spread {spread:.1e}"


@check("extra_edge_negative_flow")
def _fig3b():
    series = {s.sources: s for s in scenario.run_flows(scenario.load_bundled("fig3b"))}
    c = series[("C",)]
    crossings = analysis.zero_crossings(c.times, c.cumulative)
    first = float(crossings[0]) if len(crossings) else float("nan")
    return abs(first - 0.49) <= 0.02, f"T_C->E first crosses zero at t={first:.3f}"


@check("bath_decoupling_limit")
def _bath():
    res = bath.discretize_lorentzian(1.0, 10.0, n_modes=201, cutoff_width=20.0)
    psi = bath.default_initial_state(res.n_modes)
    worst = 0.0
    for src, tgt in [("A", "B"), ("B", "A")]:
        s = bath.bath_flow(psi, res, 1.0, 0.0, src, tgt, 2.0, 100)
        worst = max(worst, float(np.max(np.abs(s.cumulative))))
    return worst < 1e-12, f"max |T| {worst:.1e}"


def _gauss_box():
    return ((-6.0, 6.0), (-6.0, 6.0))


@check("classical_nil_causality")
def _classical_nil():
    box = _gauss_box()
    rho = classical.gaussian_density([0.3, -0.2], [[1.0, 0.4], [0.4, 0.6]], box)
    f = classical.VectorField2D(lambda a, b: -a, lambda a, b: a - b, box)
    t21 = classical.classical_flow_rate(rho, f, target=0)
    return abs(t21) < 1e-3, f"T_2->1 = {t21:.2e}"


@check("classical_closed_system")
def _classical_closed():
    box = _gauss_box()
    rho = classical.gaussian_density([0.0, 0.0], [[1.0, 0.4], [0.4, 0.5]], box)
    f = classical.VectorField2D(lambda a, b: -b, lambda a, b: a, box)
    t21 = classical.classical_flow_rate(rho, f, target=0)
    ds1 = classical.marginal_entropy_rate(rho, f, axis=0)
    return abs(t21 - ds1) < 1e-3, f"T_2->1 {t21:.5f} vs dS1/dt {ds1:.5f}"


def run_validation(names: list[str] | None = None) -> list[CheckResult]:
    results = []
    for name, fn in CHECKS:
        if names and name not in names:
            continue
        start = time.perf_counter()
        try:
            passed, detail = fn()
        except Exception as exc:  # a crashing check is a failing check
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        results.append(CheckResult(name, bool(passed), detail, time.perf_counter() - start))
    return results
