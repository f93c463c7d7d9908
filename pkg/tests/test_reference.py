from __future__ import annotations

import cmath
import math

import numpy as np
import pytest

from oracles import lindblad_expm
from sselab import hilbert, models, reference
from sselab.errors import IntegrationFailure, InvalidParameter, ParameterDomain

OMEGA0 = math.sqrt(37.0) / 2.0
PARAMS = [(1.0, 1.0), (2.0, 1.0), (1.0, 0.5)]


def _homodyne_lindblad(omega_R, gamma, t_final=10.0, dt=0.01):
    H = models.homodyne_hamiltonian(omega_R)
    L = math.sqrt(gamma) * hilbert.sigma_minus()
    return reference.lindblad_evolve(H, [L], hilbert.pure_density(hilbert.ground()), t_final, dt)


# ---------------------------------------------------------------- closed form


def test_homodyne_eta11_examples():
    assert reference.homodyne_eta11(0.0, 1.0, 1.0) == pytest.approx(0.0, abs=1e-15)
    assert reference.homodyne_eta11(100.0, 1.0, 1.0) == pytest.approx(1 / 3, abs=1e-10)
    s = reference.homodyne_solution(1.0, 1.0)
    assert s.a_plus == pytest.approx(0.75 + 1j * math.sqrt(15) / 4)
    assert s.a_minus == pytest.approx(0.75 - 1j * math.sqrt(15) / 4)


def test_homodyne_sigma_examples():
    assert reference.homodyne_sigma_y(0.0, 1.0, 1.0) == pytest.approx(0.0, abs=1e-15)
    assert reference.homodyne_sigma_y(100.0, 1.0, 1.0) == pytest.approx(-2 / 3, abs=1e-10)
    np.testing.assert_array_equal(reference.homodyne_sigma_x(np.linspace(0, 5, 6), 1.0, 1.0), 0.0)


@pytest.mark.parametrize("omega_R,gamma", PARAMS)
def test_homodyne_solution_structure(omega_R, gamma):
    s = reference.homodyne_solution(omega_R, gamma)
    assert s.a_plus.real == pytest.approx(0.75 * gamma)
    assert s.v_plus + s.v_minus + s.steady == pytest.approx(0, abs=1e-15)
    assert s.u_plus + s.u_minus == pytest.approx(omega_R * gamma / (omega_R**2 + gamma**2 / 2))
    assert s.steady == pytest.approx(omega_R**2 / (2 * omega_R**2 + gamma**2))
    t = np.linspace(0, 10, 1001)
    modes = s.v_plus * np.exp(-s.a_plus * t) + s.v_minus * np.exp(-s.a_minus * t)
    assert np.max(np.abs(modes.imag)) <= 1e-12
    eta = reference.homodyne_eta11(t, omega_R, gamma)
    assert np.all((eta >= 0) & (eta <= 1))
    assert np.all(np.abs(reference.homodyne_sigma_y(t, omega_R, gamma)) <= 1)


def test_homodyne_domain():
    with pytest.raises(ParameterDomain):
        reference.homodyne_eta11(1.0, 0.2, 1.0)
    with pytest.raises(ParameterDomain):
        reference.homodyne_mean_output(1.0, 0.25, 1.0)
    with pytest.raises(ParameterDomain):
        reference.homodyne_sigma_x(1.0, 0.0, 1.0)


def test_homodyne_mean_output_examples():
    assert reference.homodyne_mean_output(0.0, 1.0, 1.0) == 0.0
    assert abs(reference.homodyne_mean_output(0.01, 1.0, 1.0)) < 1e-3
    slope = reference.homodyne_mean_output(61.0, 1.0, 1.0) - reference.homodyne_mean_output(60.0, 1.0, 1.0)
    assert slope == pytest.approx(-2 / 3, abs=1e-8)


def test_homodyne_mean_output_quadrature_accuracy():
    # exact integral of the two decaying modes plus the steady term
    omega_R, gamma, t = 1.3, 0.9, 3.7
    s = reference.homodyne_solution(omega_R, gamma)
    exact = (
        sum(c / a * (1 - cmath.exp(-a * t)) for c, a in ((s.u_plus, s.a_plus), (s.u_minus, s.a_minus))).real
        + s.steady_y * t
    ) * math.sqrt(gamma)
    assert reference.homodyne_mean_output(t, omega_R, gamma) == pytest.approx(exact, abs=1e-6)


# ---------------------------------------------------------------- Lindblad


@pytest.mark.parametrize("omega_R,gamma", PARAMS)
def test_lindblad_matches_closed_form(omega_R, gamma):
    times, rhos = _homodyne_lindblad(omega_R, gamma)
    eta = rhos[:, 0, 0].real
    y = np.einsum("ij,tji->t", hilbert.sigma_y(), rhos).real
    x = np.einsum("ij,tji->t", hilbert.sigma_x(), rhos).real
    assert np.max(np.abs(eta - reference.homodyne_eta11(times, omega_R, gamma))) <= 1e-6
    assert np.max(np.abs(y - reference.homodyne_sigma_y(times, omega_R, gamma))) <= 1e-6
    assert np.max(np.abs(x)) <= 1e-6


def test_lindblad_matches_matrix_exponential():
    H, L = models.homodyne_hamiltonian(1.0), hilbert.sigma_minus()
    rho0 = hilbert.pure_density(hilbert.ground())
    times, rhos = reference.lindblad_evolve(H, [L], rho0, 4.0, 0.5)
    np.testing.assert_allclose(rhos, lindblad_expm(H, [L], rho0, times), atol=1e-10)


def test_lindblad_states_stay_physical():
    _, rhos = _homodyne_lindblad(1.0, 1.0, 5.0, 0.05)
    for rho in rhos:
        hilbert.check_density(rho)


def test_lindblad_closed_system_rotates_coherences():
    omega0 = 2.0
    H = 0.5 * omega0 * hilbert.sigma_z()
    psi = np.array([1, 1]) / math.sqrt(2)
    times, rhos = reference.lindblad_evolve(H, [], hilbert.pure_density(psi), 2.0, 0.01)
    np.testing.assert_allclose(rhos[:, 0, 0].real, 0.5, atol=1e-12)
    np.testing.assert_allclose(rhos[:, 0, 1], 0.5 * np.exp(-1j * omega0 * times), atol=1e-10)


def test_oscillator_oracle():
    times, n = reference.oscillator_mean_n(1.0, 0.01, 1.0, 12, 9)
    assert n[-1] == pytest.approx(9 / math.e, abs=1e-6)
    np.testing.assert_allclose(n, 9 * np.exp(-times), atol=1e-9)


def test_lindblad_rejects_bad_input():
    with pytest.raises(InvalidParameter):
        reference.lindblad_evolve(hilbert.sigma_minus(), [], np.diag([1.0, 0.0]), 1.0, 0.1)
    with pytest.raises(InvalidParameter):
        reference.lindblad_evolve(hilbert.sigma_z(), [], np.diag([2.0, 0.0]), 1.0, 0.1)


def test_lindblad_real_start_keeps_coherences():
    H = models.homodyne_hamiltonian(1.0)
    times, rhos = reference.lindblad_evolve(H, [hilbert.sigma_minus()], np.diag([0.0, 1.0]), 2.0, 0.1)
    assert np.iscomplexobj(rhos)
    y = np.einsum("ij,tji->t", hilbert.sigma_y(), rhos).real
    np.testing.assert_allclose(y, reference.homodyne_sigma_y(times, 1.0, 1.0), atol=1e-6)


def test_lindblad_unstable_generator_fails():
    with pytest.raises(IntegrationFailure):
        reference.lindblad_evolve(np.zeros((2, 2)), [1e4 * hilbert.sigma_minus()],
                                  np.diag([1.0, 0.0]), 1.0, 0.5)


# ---------------------------------------------------------------- RK4


def test_rk4_examples():
    _, path = reference.rk4_solve(lambda t, y: np.zeros_like(y), [1.0, 2.0], 1.0, 0.1)
    np.testing.assert_array_equal(path, [[1.0, 2.0]] * 11)
    _, path = reference.rk4_solve(lambda t, y: -y, [1.0], 1.0, 1e-3)
    assert path[-1, 0] == pytest.approx(math.exp(-1), abs=1e-10)


def test_rk4_fourth_order():
    M = reference.nonmarkov_matrix(OMEGA0, 1.0, 0.0)

    def err(dt):
        _, path = reference.rk4_solve(lambda t, y: M @ y, [0, 0, 0, 0, 0, 1.0], 2.0, dt)
        return abs(path[-1, 5] - math.exp(-2.0))

    assert err(0.1) / err(0.05) >= 12


def test_rk4_substeps_refine_grid():
    t1, p1 = reference.rk4_solve(lambda t, y: -y, [1.0], 1.0, 0.1, substeps=10)
    t2, p2 = reference.rk4_solve(lambda t, y: -y, [1.0], 1.0, 0.01)
    np.testing.assert_allclose(p1[:, 0], p2[::10, 0], rtol=1e-14)
    assert t1.size == 11


def test_rk4_detects_blow_up():
    with pytest.raises(IntegrationFailure):
        reference.rk4_solve(lambda t, y: y * y, [1.0], 2.0, 0.1)


# ---------------------------------------------------------------- non-Markovian ODEs


def test_nonmarkov_k0_examples():
    p = reference.nonmarkov_bloch(5.0, 0.01, OMEGA0, 1.0, 0.0)
    np.testing.assert_allclose(p.z, np.exp(-p.times), atol=1e-12)
    np.testing.assert_allclose(p.eta11, 0.5 * (1 + np.exp(-p.times)), atol=1e-12)
    np.testing.assert_array_equal(p.zeta, 0.0)


def test_nonmarkov_k0_transverse_block_is_damped_rotation():
    x0 = (0.6, 0.0, 0.0)
    p = reference.nonmarkov_bloch(3.0, 0.01, OMEGA0, 1.0, 0.0, x0=x0)
    M = reference.nonmarkov_matrix(OMEGA0, 1.0, 0.0)[:2, :2]
    w, V = np.linalg.eig(M)
    exact = (V @ np.diag(np.exp(w * 3.0)) @ np.linalg.inv(V) @ np.array([0.6, 0.0])).real
    np.testing.assert_allclose([p.x[-1], p.y[-1]], exact, atol=1e-10)


def test_nonmarkov_k0_matches_master_equation():
    H0, Ls = reference.ou_qubit_markov_lindblad(OMEGA0, 1.0)
    times, rhos = reference.lindblad_evolve(H0, Ls, np.diag([1.0, 0.0]), 10.0, 0.01)
    z = (rhos[:, 0, 0] - rhos[:, 1, 1]).real
    p = reference.nonmarkov_bloch(10.0, 0.01, OMEGA0, 1.0, 0.0)
    assert np.max(np.abs(p.z - z)) <= 1e-8


@pytest.mark.parametrize("k", [0.0, 1.0, 2.0])
def test_nonmarkov_limit_half(k):
    p = reference.nonmarkov_bloch(50.0, 0.01, OMEGA0, 1.0, k)
    assert p.eta11[-1] == pytest.approx(0.5, abs=1e-6)


def test_memory_slows_decay():
    values = [reference.nonmarkov_bloch(2.0, 0.01, OMEGA0, 1.0, k).eta11[-1] for k in (0, 1, 2)]
    assert values[0] < values[1] < values[2]


@pytest.mark.parametrize("k", [0.0, 0.5, 2.0])
def test_nonmarkov_stays_in_bloch_ball(k):
    p = reference.nonmarkov_bloch(10.0, 0.01, OMEGA0, 1.0, k, x0=(0.3, -0.2, 0.9))
    assert np.max(p.x**2 + p.y**2 + p.z**2) <= 1 + 1e-8


def test_nonmarkov_domain():
    with pytest.raises(ParameterDomain):
        reference.nonmarkov_bloch(1.0, 0.01, 0.4, 1.0, 1.0)
    with pytest.raises(ParameterDomain):
        reference.nonmarkov_bloch(1.0, 0.01, OMEGA0, 1.0, -1.0)
    with pytest.raises(ParameterDomain):
        reference.nonmarkov_bloch(1.0, 0.01, OMEGA0, 0.0, 1.0)
