import numpy as np
import pytest
from scipy.integrate import quad

from qliang import bath
from qliang.errors import ConvergenceError, FlowRequestError, StateError


@pytest.fixture(scope="module")
def reservoir():
    return bath.discretize_lorentzian(1.0, 10.0)


@pytest.fixture(scope="module")
def alphas():
    return bath.normalized_alphas(10.0)


def populations(psi0, res, a, b, times):
    amps = bath.sector_trajectory(psi0, bath.sector_hamiltonian(res, a, b), times)
    return np.abs(amps) ** 2


class TestDiscretization:
    def test_default_grid(self, reservoir):
        assert reservoir.n_modes == 401
        assert reservoir.omegas[0] == -40.0 and reservoir.omegas[-1] == 40.0

    def test_total_coupling_against_quadrature(self, reservoir):
        # independent quadrature of J over the window
        window, _ = quad(lambda w: bath.lorentzian_density(w, 1.0, 10.0), -40, 40, points=[0])
        total = float(np.sum(reservoir.couplings**2))
        assert abs(total - window) / window < 0.02
        assert abs(total - 100.0) / 100.0 < 0.02

    def test_zero_strength(self):
        res = bath.discretize_lorentzian(1.0, 0.0, n_modes=64, cutoff_width=10.0)
        assert not np.any(res.couplings)
        psi = bath.default_initial_state(64)
        out = bath.evolve_sector(psi, bath.sector_hamiltonian(res, 0.6, 0.8), 3.0)
        assert abs(abs(out.c_a) ** 2 - 2 / 3) < 1e-12

    def test_too_coarse_grid(self):
        with pytest.raises(ConvergenceError):
            bath.discretize_lorentzian(1.0, 10.0, n_modes=9, cutoff_width=40.0)

    @pytest.mark.parametrize("kwargs", [{"n_modes": 4}, {"cutoff_width": 5.0}, {"lam": -1.0}])
    def test_bad_arguments(self, kwargs):
        args = {"lam": 1.0, "big_r": 10.0} | kwargs
        with pytest.raises(ValueError):
            bath.discretize_lorentzian(**args)

    def test_mode_doubling(self, reservoir, alphas):
        fine = bath.discretize_lorentzian(1.0, 10.0, n_modes=801)
        times = np.linspace(0, 2, 201)
        a = populations(bath.default_initial_state(401), reservoir, *alphas, times)[:, 0]
        b = populations(bath.default_initial_state(801), fine, *alphas, times)[:, 0]
        assert np.max(np.abs(a - b)) < 1e-3

    def test_flow_converged_in_modes(self, reservoir, alphas):
        fine = bath.discretize_lorentzian(1.0, 10.0, n_modes=801)
        for src, tgt in [("A", "B"), ("B", "A")]:
            a = bath.bath_flow(bath.default_initial_state(401), reservoir, *alphas, src, tgt, 2.0, 200)
            b = bath.bath_flow(bath.default_initial_state(801), fine, *alphas, src, tgt, 2.0, 200)
            assert np.max(np.abs(a.cumulative - b.cumulative)) < 1e-2


class TestSector:
    def test_alpha_normalisation(self):
        a, b = bath.normalized_alphas(10.0)
        assert a == pytest.approx(10 / np.sqrt(101))
        assert a**2 + b**2 == pytest.approx(1.0)

    def test_matrix_layout(self):
        res = bath.discretize_lorentzian(1.0, 2.0, omega0=0.5, n_modes=16, cutoff_width=10.0)
        h = bath.sector_hamiltonian(res, 0.6, 0.8).matrix
        assert h.shape == (18, 18)
        np.testing.assert_allclose(np.diag(h), np.concatenate([[0.5, 0.5], res.omegas]))
        np.testing.assert_allclose(h[0, 2:], 0.6 * res.couplings)
        np.testing.assert_allclose(h[1, 2:], 0.8 * res.couplings)
        modes = h[2:, 2:]
        assert not np.any(modes - np.diag(np.diag(modes)))
        assert h[0, 1] == 0

    def test_decoupled_row(self, reservoir):
        h = bath.sector_hamiltonian(reservoir, 1.0, 0.0).matrix
        assert not np.any(h[1, 2:]) and not np.any(h[2:, 1])

    def test_symmetric_couplings_swap(self, reservoir):
        h = bath.sector_hamiltonian(reservoir, 0.5, 0.5).matrix
        perm = np.arange(h.shape[0])
        perm[[0, 1]] = [1, 0]
        np.testing.assert_array_equal(h[np.ix_(perm, perm)], h)

    def test_state_norm_checked(self):
        with pytest.raises(StateError):
            bath.SingleExcitationState.qubits(1.0, 1.0, 4)

    def test_evolve_identity_at_zero(self, reservoir, alphas):
        psi = bath.default_initial_state(reservoir.n_modes)
        assert bath.evolve_sector(psi, bath.sector_hamiltonian(reservoir, *alphas), 0.0) is psi

    def test_norm_conserved(self, reservoir, alphas):
        psi = bath.default_initial_state(reservoir.n_modes)
        amps = bath.sector_trajectory(psi, bath.sector_hamiltonian(reservoir, *alphas), np.linspace(0, 10, 101))
        assert np.max(np.abs(np.sum(np.abs(amps) ** 2, axis=1) - 1)) < 1e-10

    def test_trajectory_matches_single_steps(self, reservoir, alphas):
        psi = bath.default_initial_state(reservoir.n_modes)
        h = bath.sector_hamiltonian(reservoir, *alphas)
        traj = bath.sector_trajectory(psi, h, [0.0, 0.7])
        np.testing.assert_allclose(traj[1], bath.evolve_sector(psi, h, 0.7).vector, atol=1e-12)

    def test_decoupled_amplitude_constant(self, reservoir):
        psi = bath.default_initial_state(reservoir.n_modes)
        amps = bath.sector_trajectory(psi, bath.sector_hamiltonian(reservoir, 1.0, 0.0), np.linspace(0, 5, 51))
        assert np.max(np.abs(amps[:, 1] - amps[0, 1])) < 1e-12

    def test_strong_coupling_revivals(self, reservoir, alphas):
        # a Markovian decay would be monotone; here the population comes back
        times = np.linspace(0, 2, 2001)
        psi = bath.SingleExcitationState.qubits(1.0, 0.0, reservoir.n_modes)
        pa = populations(psi, reservoir, *alphas, times)[:, 0]
        rises = np.diff(pa) > 0
        assert rises.any()
        first_min = np.argmax(rises)
        assert pa[first_min:].max() - pa[first_min] > 0.1


class TestFlow:
    def test_binary_entropy(self):
        np.testing.assert_allclose(bath.binary_entropy([0.0, 0.5, 1.0]), [0.0, 1.0, 0.0])
        p = 0.2
        assert bath.binary_entropy(p) == pytest.approx(-(p * np.log2(p) + (1 - p) * np.log2(1 - p)))

    def test_decoupling_limit_zero(self, reservoir):
        psi = bath.default_initial_state(reservoir.n_modes)
        for src, tgt in [("A", "B"), ("B", "A")]:
            s = bath.bath_flow(psi, reservoir, 1.0, 0.0, src, tgt, 5.0, 200)
            assert np.max(np.abs(s.cumulative)) < 1e-12

    def test_swap_symmetry(self, reservoir):
        n = reservoir.n_modes
        ca, cb = np.sqrt(2 / 3), np.sqrt(1 / 3)
        a, b = bath.normalized_alphas(3.0)
        fwd = bath.SingleExcitationState.qubits(ca, cb, n)
        swapped = bath.SingleExcitationState.qubits(cb, ca, n)
        ab = bath.bath_flow(fwd, reservoir, a, b, "A", "B", 3.0, 300)
        ba_swapped = bath.bath_flow(swapped, reservoir, b, a, "B", "A", 3.0, 300)
        np.testing.assert_allclose(ab.cumulative, ba_swapped.cumulative, rtol=0, atol=1e-12)

    def test_series_shape(self, reservoir, alphas):
        s = bath.bath_flow(bath.default_initial_state(reservoir.n_modes), reservoir, *alphas, "B", "A", 2.0, 100)
        assert s.times.shape == (101,) and s.cumulative[0] == 0.0
        assert s.name == "B->A"

    @pytest.mark.parametrize("src,tgt", [("A", "A"), ("A", "C")])
    def test_bad_pairs(self, reservoir, src, tgt):
        psi = bath.default_initial_state(reservoir.n_modes)
        with pytest.raises(FlowRequestError):
            bath.bath_flow(psi, reservoir, 1.0, 0.0, src, tgt, 1.0, 10)
