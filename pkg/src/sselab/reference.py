"""Deterministic reference curves for the stochastic simulations.

* closed-form solution of the driven, damped qubit (homodyne model),
* RK4 integration of Lindblad master equations,
* the constant-coefficient ODE systems approximating the mean state of the
  O-U driven qubit (memory kernels eliminated with auxiliary variables).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import hilbert
from .errors import IntegrationFailure, InvalidParameter, ParameterDomain

REFERENCE_DT = 1e-3


# --------------------------------------------------------------------------
# generic RK4


def rk4_solve(
    field: Callable[[float, np.ndarray], np.ndarray],
    y0,
    t_final: float,
    dt: float,
    substeps: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """Classical fourth-order Runge-Kutta on the grid ``t_n = n dt``.

    Each output interval is split into ``substeps`` equal RK4 steps.
    Returns ``(times, path)`` where ``path[n]`` is the state at ``times[n]``.
    """
    if not (dt > 0.0 and math.isfinite(dt)):
        raise InvalidParameter(f"dt must be positive, got {dt}")
    if t_final < 0.0:
        raise InvalidParameter("t_final must be nonnegative")
    n = round(t_final / dt)
    if abs(n * dt - t_final) > 1e-9 * max(t_final, dt):
        raise InvalidParameter(f"dt={dt} does not divide t_final={t_final}")
    y = np.array(y0, dtype=np.result_type(np.asarray(y0), float))
    # a complex field on a real start (e.g. a real density matrix) needs a complex path
    y = y.astype(np.result_type(y, field(0.0, y)))
    path = np.empty((n + 1,) + y.shape, dtype=y.dtype)
    path[0] = y
    h = dt / substeps
    t = 0.0
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(n):
            for j in range(substeps):
                t = (i + j / substeps) * dt
                k1 = field(t, y)
                k2 = field(t + 0.5 * h, y + 0.5 * h * k1)
                k3 = field(t + 0.5 * h, y + 0.5 * h * k2)
                k4 = field(t + h, y + h * k3)
                y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not np.all(np.isfinite(y)):
                raise IntegrationFailure(f"non-finite state at t={(i + 1) * dt}")
            path[i + 1] = y
    return dt * np.arange(n + 1), path


def _substeps(dt: float) -> int:
    # integrate on min(dt, REFERENCE_DT), keeping the output grid at dt
    return max(1, math.ceil(dt / REFERENCE_DT - 1e-9))


# --------------------------------------------------------------------------
# Lindblad


def lindblad_generator(H, L_list) -> Callable[[float, np.ndarray], np.ndarray]:
    """``rho -> -i[H, rho] + sum (L rho L^dag - 1/2 {L^dag L, rho})``."""
    H = np.asarray(H, dtype=np.complex128)
    Ls = [np.asarray(l, dtype=np.complex128) for l in L_list]
    Keff = -1j * H - 0.5 * sum((l.conj().T @ l for l in Ls), np.zeros_like(H))

    def field(t, rho):
        out = Keff @ rho
        out = out + out.conj().T
        for l in Ls:
            out = out + l @ rho @ l.conj().T
        return out

    return field


def lindblad_evolve(H, L_list, rho0, t_final: float, dt: float):
    """RK4 solution of the Lindblad equation sampled on ``t_n = n dt``.

    Returns ``(times, rhos)`` with ``rhos`` of shape ``(n + 1, dim, dim)``.
    Raises :class:`IntegrationFailure` if the trace drifts by more than 1e-8.
    """
    H = np.asarray(H, dtype=np.complex128)
    if not hilbert.is_hermitian(H):
        raise InvalidParameter("H must be Hermitian")
    hilbert.check_density(rho0)
    times, rhos = rk4_solve(lindblad_generator(H, L_list), rho0, t_final, dt, _substeps(dt))
    drift = np.max(np.abs(np.trace(rhos, axis1=1, axis2=2) - 1.0))
    if drift > 1e-8:
        raise IntegrationFailure(f"trace drifted by {drift:.3g}")
    return times, rhos


# --------------------------------------------------------------------------
# homodyne closed form


@dataclass(frozen=True)
class HomodyneSolution:
    """Coefficients of ``eta_11(t)`` and ``Tr{sigma_y eta(t)}`` for a ground-state start."""

    u_plus: complex
    u_minus: complex
    v_plus: complex
    v_minus: complex
    a_plus: complex
    a_minus: complex
    steady: float
    steady_y: float


def homodyne_solution(omega_R: float, gamma: float) -> HomodyneSolution:
    if not gamma > 0.0:
        raise ParameterDomain("gamma must be positive")
    disc = omega_R**2 - gamma**2 / 16.0
    if not disc > 0.0:
        raise ParameterDomain("closed form requires omega_R^2 > gamma^2/16")
    q = math.sqrt(disc)
    den = 2.0 * omega_R**2 + gamma**2
    u = [
        omega_R * (gamma * q - s * 1j * (omega_R**2 - gamma**2 / 4.0)) / (q * den)
        for s in (1, -1)
    ]
    v = [omega_R**2 * (-s * 3j * gamma / 4.0 - q) / (2.0 * q * den) for s in (1, -1)]
    return HomodyneSolution(
        u_plus=u[0],
        u_minus=u[1],
        v_plus=v[0],
        v_minus=v[1],
        a_plus=complex(0.75 * gamma, q),
        a_minus=complex(0.75 * gamma, -q),
        steady=omega_R**2 / den,
        steady_y=-omega_R * gamma / (omega_R**2 + gamma**2 / 2.0),
    )


def _two_mode(cp: complex, cm: complex, s: HomodyneSolution, t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise InvalidParameter("t must be nonnegative")
    return cp * np.exp(-s.a_plus * t) + cm * np.exp(-s.a_minus * t)


def homodyne_eta11(t, omega_R: float, gamma: float):
    """Excited-state population of the driven qubit started in ``|0>``."""
    s = homodyne_solution(omega_R, gamma)
    # clip the rounding residue of v_+ + v_- + steady = 0 at t = 0
    return np.clip(_two_mode(s.v_plus, s.v_minus, s, t).real + s.steady, 0.0, 1.0)


def homodyne_sigma_y(t, omega_R: float, gamma: float):
    s = homodyne_solution(omega_R, gamma)
    return np.clip(_two_mode(s.u_plus, s.u_minus, s, t).real + s.steady_y, -1.0, 1.0)


def homodyne_sigma_x(t, omega_R: float, gamma: float):
    homodyne_solution(omega_R, gamma)
    return np.zeros_like(np.asarray(t, dtype=float))


def homodyne_mean_output(t, omega_R: float, gamma: float, max_step: float = 2.5e-4):
    """Mean integrated photocurrent ``sqrt(gamma) * int_0^t Tr{sigma_y eta}``.

    Composite trapezoid rule with step at most ``max_step``.
    """
    scalar = np.ndim(t) == 0
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(ts < 0):
        raise InvalidParameter("t must be nonnegative")
    homodyne_solution(omega_R, gamma)
    out = np.empty_like(ts)
    for i, tt in enumerate(ts):
        n = max(1, math.ceil(tt / max_step))
        grid = np.linspace(0.0, tt, n + 1)
        out[i] = math.sqrt(gamma) * np.trapezoid(homodyne_sigma_y(grid, omega_R, gamma), grid)
    return float(out[0]) if scalar else out


# --------------------------------------------------------------------------
# O-U qubit: approximate mean-state equations


@dataclass(frozen=True)
class BlochPath:
    times: np.ndarray
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    zeta: np.ndarray
    xi: np.ndarray
    eps: np.ndarray

    @property
    def eta11(self) -> np.ndarray:
        return 0.5 * (1.0 + self.z)


def nonmarkov_matrix(omega0: float, gamma: float, k: float) -> np.ndarray:
    """Generator of the two decoupled linear systems.

    State order ``(x, y, zeta, xi, eps, z)``: the first block couples the
    transverse Bloch components to ``zeta``; the second couples ``z`` to the
    kernel variables ``xi`` and ``eps``.
    """
    if not gamma > 0.0:
        raise ParameterDomain("gamma must be positive")
    if not omega0 > gamma / 2.0:
        raise ParameterDomain("requires omega0 > gamma/2")
    if not (k >= 0.0 and math.isfinite(k)):
        raise ParameterDomain("k must be nonnegative")
    nu2 = omega0**2 - gamma**2 / 4.0
    M = np.zeros((6, 6))
    # x, y, zeta
    M[0, 0], M[0, 1], M[0, 2] = -gamma, -omega0, k
    M[1, 0] = omega0
    M[2, 2], M[2, 0] = -(k + gamma), gamma
    # xi, eps, z
    M[3, 3], M[3, 4], M[3, 5] = -(k + gamma / 2.0), 2.0 * nu2 / gamma, gamma
    M[4, 4], M[4, 3] = -(k + gamma / 2.0), -gamma / 2.0
    M[5, 5], M[5, 3], M[5, 4] = -gamma, k, k
    return M


def nonmarkov_bloch(
    t_final: float, dt: float, omega0: float, gamma: float, k: float,
    x0: Sequence[float] = (0.0, 0.0, 1.0),
) -> BlochPath:
    """Approximate mean Bloch vector of the O-U qubit; ``k = 0`` is Markovian.

    Starts from the excited state (``z = 1``) by default, with all kernel
    variables zero.
    """
    M = nonmarkov_matrix(omega0, gamma, k)
    y0 = np.array([x0[0], x0[1], 0.0, 0.0, 0.0, x0[2]])
    times, path = rk4_solve(lambda t, y: M @ y, y0, t_final, dt, _substeps(dt))
    return BlochPath(
        times=times, x=path[:, 0], y=path[:, 1], zeta=path[:, 2],
        xi=path[:, 3], eps=path[:, 4], z=path[:, 5],
    )


def ou_qubit_markov_lindblad(omega0: float, gamma: float):
    """``(H0, [L])`` of the k = 0 master equation of the O-U qubit."""
    H0 = 0.5 * omega0 * hilbert.sigma_z()
    L = math.sqrt(gamma / 2.0) * hilbert.sigma_y()
    return H0, [L]


def oscillator_mean_n(t_final: float, dt: float, gamma: float, n_max: int, n0: int):
    """``<a^dag a>(t)`` from the Lindblad equation with ``L = sqrt(gamma) a``."""
    a = hilbert.annihilation(n_max)
    rho0 = hilbert.pure_density(hilbert.basis(n_max + 1, n0))
    times, rhos = lindblad_evolve(np.zeros_like(a), [math.sqrt(gamma) * a], rho0, t_final, dt)
    levels = np.arange(n_max + 1)
    return times, np.einsum("tii,i->t", rhos, levels).real
