import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qliang import core, flow, hamiltonians as hm, scenario, validation
from qliang.core import DensityMatrix, SiteRegistry
from qliang.errors import FlowRequestError, NonUnitaryError
from qliang.flow import FlowRequest
from qliang.hamiltonians import HamiltonianSpec

from conftest import random_density, random_hermitian


def generic_spec(rng, labels):
    reg = SiteRegistry.qubits(labels)
    terms = hm.terms_from_matrix(random_hermitian(rng, reg.dim), list(labels))
    return HamiltonianSpec(reg, tuple(terms))


@pytest.fixture
def fig1a():
    cfg = scenario.load_bundled("fig1a")
    return scenario.build_hamiltonian(cfg), scenario.build_initial(cfg)


class TestRequest:
    def test_overlap_rejected(self, fig1a):
        h, rho = fig1a
        with pytest.raises(FlowRequestError):
            FlowRequest(h, rho, "C", ("A", "C"), 1.0, 10)

    @pytest.mark.parametrize("kwargs", [
        {"steps": 1}, {"t_max": 0.0}, {"rate_mode": "sometimes"}, {"rate_step": 1e-7},
    ])
    def test_bad_grid_or_mode(self, fig1a, kwargs):
        h, rho = fig1a
        args = {"t_max": 1.0, "steps": 10} | kwargs
        with pytest.raises(FlowRequestError):
            FlowRequest(h, rho, "C", "A", **args)

    def test_unknown_label(self, fig1a):
        h, rho = fig1a
        with pytest.raises(FlowRequestError):
            FlowRequest(h, rho, "C", "Q", 1.0, 10)

    def test_grid_points(self, fig1a):
        h, rho = fig1a
        req = FlowRequest(h, rho, "C", "A", 1.0, 4)
        np.testing.assert_allclose(req.times, [0, 0.25, 0.5, 0.75, 1.0])


class TestCumulative:
    def test_series_invariants(self, fig1a):
        h, rho = fig1a
        s = flow.cumulative_flow(FlowRequest(h, rho, "C", "B", 0.6, 60))
        assert s.cumulative[0] == 0.0
        np.testing.assert_allclose(s.cumulative, s.s_target - s.s_target_frozen, atol=1e-12)
        assert s.name == "B->C"

    def test_joint_sources_equal_entropy_change(self, fig1a):
        h, rho = fig1a
        s = flow.cumulative_flow(FlowRequest(h, rho, "C", ("A", "B"), 0.6, 60))
        np.testing.assert_allclose(s.cumulative, s.s_target - s.s_target[0], atol=1e-12)

    def test_shortcut_matches_full_simulation(self, fig1a):
        h, rho = fig1a
        req = FlowRequest(h, rho, "C", ("A", "B"), 0.6, 30)
        a = flow.cumulative_flow(req).cumulative
        b = flow.cumulative_flow(req, shortcut=False).cumulative
        np.testing.assert_allclose(a, b, atol=1e-10)

    def test_grid_refinement(self, fig1a):
        h, rho = fig1a
        coarse = flow.cumulative_flow(FlowRequest(h, rho, "C", "A", 0.6, 60))
        fine = flow.cumulative_flow(FlowRequest(h, rho, "C", "A", 0.6, 120))
        assert np.max(np.abs(coarse.cumulative - fine.cumulative[::2])) < 1e-9

    def test_rate_matches_derivative(self, fig1a):
        h, rho = fig1a
        s = flow.cumulative_flow(FlowRequest(h, rho, "C", "B", 0.6, 600))
        np.testing.assert_allclose(s.rate[1:-1], np.gradient(s.cumulative, s.times)[1:-1])
        integral = np.concatenate([[0], np.cumsum(0.5 * (s.rate[1:] + s.rate[:-1]) * np.diff(s.times))])
        assert np.max(np.abs(integral - s.cumulative)) < 1e-3

    def test_multi_site_target(self, rng):
        spec = generic_spec(rng, "ABC")
        rho = DensityMatrix(spec.registry, random_density(rng, 8))
        s = flow.cumulative_flow(FlowRequest(spec, rho, ("A", "B"), "C", 1.0, 10))
        assert s.target == ("A", "B")
        assert np.all(np.isfinite(s.cumulative))

    def test_negative_flows_allowed(self):
        cfg = scenario.load_bundled("fig3b")
        req = [r for r in scenario.build_requests(cfg) if r.sources == ("C",)][0]
        assert flow.cumulative_flow(req).cumulative.min() < 0


def test_nil_causality_both_shapes():
    assert validation.nil_causality_max(n_instances=10, seed=11) < 1e-8


def test_complement_rule(rng):
    spec = generic_spec(rng, "ABCD")
    rho = DensityMatrix(spec.registry, random_density(rng, 16))
    s = flow.cumulative_flow(FlowRequest(spec, rho, "B", ("A", "C", "D"), 2.0, 20), shortcut=False)
    assert np.max(np.abs(s.cumulative - (s.s_target - s.s_target[0]))) < 1e-10


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_pure_bipartite_symmetry(seed):
    rng = np.random.default_rng(seed)
    spec = generic_spec(rng, "AB")
    psi = rng.normal(size=4) + 1j * rng.normal(size=4)
    rho = DensityMatrix.from_pure(spec.registry, psi)
    ba = flow.cumulative_flow(FlowRequest(spec, rho, "A", "B", 3.0, 15), shortcut=False)
    ab = flow.cumulative_flow(FlowRequest(spec, rho, "B", "A", 3.0, 15), shortcut=False)
    assert np.max(np.abs(ba.s_target - ab.s_target)) < 1e-9
    assert np.max(np.abs(ba.cumulative - ab.cumulative)) < 1e-9


class TestInstantaneous:
    def test_product_form_zero(self):
        spec, rho = validation.product_form_instance(np.random.default_rng(5), "M_A x N_BC")
        req = FlowRequest(spec, rho, "A", "B", 2.0, 10, rate_mode="instantaneous")
        for t in (0.0, 0.7, 2.0):
            assert abs(flow.instantaneous_rate(req, t)) < 1e-6

    def test_pure_bipartite_equals_entropy_rate(self, rng):
        spec = generic_spec(rng, "AB")
        rho = DensityMatrix.from_pure(spec.registry, rng.normal(size=4) + 1j * rng.normal(size=4))
        req = FlowRequest(spec, rho, "A", "B", 2.0, 10)
        h = req.rate_step
        hop = spec.materialize()
        for t in (0.3, 1.1):
            # fine-step oracle for dS_A/dt
            eps = 1e-5
            ds = (flow.target_entropy(core.evolve(rho, hop, t + eps), "A")
                  - flow.target_entropy(core.evolve(rho, hop, t - eps), "A")) / (2 * eps)
            # curvature bound on the central difference, scaled by |H|^3
            bound = 2 * h**2 * np.linalg.norm(hop.matrix, 2) ** 3
            assert abs(flow.instantaneous_rate(req, t) - ds) < bound

    def test_at_zero_agrees_with_cumulative_slope(self, rng):
        # freezing at t = 0 is the from-start construction, so the slopes agree
        spec = generic_spec(rng, "ABC")
        rho = DensityMatrix(spec.registry, random_density(rng, 8))
        req = FlowRequest(spec, rho, "C", "A", 1.0, 10)
        eps = 1e-4
        slope = (flow.flow_at(spec, rho, "A", "C", eps) - flow.flow_at(spec, rho, "A", "C", -eps)) / (2 * eps)
        assert flow.instantaneous_rate(req, 0.0, h=eps) == pytest.approx(slope, abs=1e-9)

    def test_later_time_differs_from_cumulative_slope(self, fig1a):
        h, rho = fig1a
        req = FlowRequest(h, rho, "C", "B", 0.4, 400)
        s = flow.cumulative_flow(req)
        assert abs(flow.instantaneous_rate(req, 0.3) - s.rate[300]) > 1e-3

    def test_small_step_rejected(self, fig1a):
        h, rho = fig1a
        req = FlowRequest(h, rho, "C", "B", 1.0, 10)
        with pytest.raises(FlowRequestError):
            flow.instantaneous_rate(req, 0.5, h=1e-8)
        with pytest.raises(FlowRequestError):
            flow.instantaneous_rate(req, 2.0)

    def test_instantaneous_mode_series(self, fig1a):
        h, rho = fig1a
        req = FlowRequest(h, rho, "C", "B", 0.4, 4, rate_mode="instantaneous")
        s = flow.cumulative_flow(req)
        assert s.meta["rate_mode"] == "instantaneous"
        assert s.rate[2] == pytest.approx(flow.instantaneous_rate(req, 0.2))


class TestDiscrete:
    def cnot_setup(self):
        reg = SiteRegistry.qubits("AB")
        rho = DensityMatrix.product(reg, {"A": core.maximally_mixed(2), "B": core.basis_projector(2, 0)})
        return reg, rho, hm.gate_unitary("CNOT", ["A", "B"], reg)

    def test_cnot(self):
        _, rho, u = self.cnot_setup()
        assert abs(flow.discrete_map_flow(rho, u, "B") - 1.0) < 1e-12
        assert abs(flow.discrete_map_flow(rho, u, "A")) < 1e-12

    def test_local_product_unitary(self, rng):
        reg = SiteRegistry.qubits("AB")
        rho = DensityMatrix(reg, random_density(rng, 4))
        ua = core.hermitian_eig(random_hermitian(rng, 2)).propagator(1.3)
        ub = core.hermitian_eig(random_hermitian(rng, 2)).propagator(0.4)
        u = np.kron(ua, ub)
        for target in "AB":
            assert abs(flow.discrete_map_flow(rho, u, target)) < 1e-12

    def test_explicit_frozen_map(self):
        reg, rho, u = self.cnot_setup()
        assert abs(flow.discrete_map_flow(rho, u, "B", u_frozen=np.eye(4)) - 1.0) < 1e-12

    def test_non_unitary(self):
        _, rho, _ = self.cnot_setup()
        with pytest.raises(NonUnitaryError):
            flow.discrete_map_flow(rho, np.diag([1, 1, 1, 0.5]), "B")


class TestPairwise:
    def test_star_leaves_identical(self):
        cfg = scenario.load_bundled("fig3a")
        h, rho = scenario.build_hamiltonian(cfg), scenario.build_initial(cfg)
        labels, m = flow.pairwise_flow_matrix(h, rho, 0.69, max_workers=4)
        e = labels.index("E")
        col = [m[i, e] for i in range(len(labels)) if i != e]
        assert np.ptp(col) < 1e-9
        assert np.all(np.isnan(np.diag(m)))

    def test_disconnected_pairs(self, rng):
        reg = SiteRegistry.qubits("ABCD")
        spec = hm.xy_chain(reg, [("A", "B", 1.3), ("C", "D", 0.7)])
        rho = DensityMatrix(reg, random_density(rng, 16))
        labels, m = flow.pairwise_flow_matrix(spec, rho, 1.5)
        for i, j in [(0, 2), (0, 3), (1, 2), (1, 3), (2, 0), (3, 1)]:
            assert abs(m[i, j]) < 1e-8

    def test_appd_values(self):
        cfg = scenario.load_bundled("appD")
        h, rho = scenario.build_hamiltonian(cfg), scenario.build_initial(cfg)
        labels, m = flow.pairwise_flow_matrix(h, rho, 0.26)
        got = [m[labels.index(k), labels.index("E")] for k in "ABCD"]
        np.testing.assert_allclose(got, [0.0731, 0.0132, 0.0022, 0.0001], atol=5e-4)


class TestSuperadditivity:
    def test_three_qubit_gap_positive(self, fig1a):
        h, rho = fig1a
        rep = flow.superadditivity_report(h, rho, ["A", "B"], "C", 0.49, 49)
        assert np.all(rep.superadditive[1:])

    def test_single_source_gap_zero(self, fig1a):
        h, rho = fig1a
        rep = flow.superadditivity_report(h, rho, ["A"], "C", 0.5, 10)
        assert not np.any(rep.gap)

    def test_overlapping_groups(self, fig1a):
        h, rho = fig1a
        with pytest.raises(FlowRequestError):
            flow.superadditivity_report(h, rho, [("A", "B"), ("B",)], "C", 0.5, 10)


def test_source_bound_when_target_starts_pure():
    # target B starts pure and couples only to C: T_C->B = dS_B, and
    # T_A->B = dS_B - dS_B(A frozen) <= dS_B because the frozen entropy cannot drop below 0
    cfg = scenario.load_bundled("fig2_B0")
    h, rho = scenario.build_hamiltonian(cfg), scenario.build_initial(cfg)
    via_c = flow.cumulative_flow(FlowRequest(h, rho, "B", "C", 10.0, 1000), shortcut=False)
    via_a = flow.cumulative_flow(FlowRequest(h, rho, "B", "A", 10.0, 1000))
    np.testing.assert_allclose(via_c.cumulative, via_c.s_target - via_c.s_target[0], atol=1e-12)
    assert np.all(via_a.cumulative <= via_c.cumulative + 1e-12)
