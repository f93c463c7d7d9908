"""Concrete SSE models: homodyne-detected qubit, damped oscillator, O-U qubit."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from . import hilbert
from .errors import InvalidParameter
from .sde import DiffusionModel


def nonlinear_sse(
    name: str, H: np.ndarray, R_list, *, params=None, output_channel: int | None = None,
    truncation_guard=None,
) -> DiffusionModel:
    """Build the normalized (nonlinear) SSE of the pair ``(H, [R_j])``.

    With ``m_j = 2 Re <psi|R_j psi>``:

        drift     = (-iH - 1/2 sum R^dag R + 1/2 sum m_j R_j - 1/8 sum m_j^2) psi
        diffusion = (R_j - m_j / 2) psi

    ``output_channel`` selects which ``m_j`` is exposed as the output signal.
    """
    H = np.asarray(H, dtype=np.complex128)
    Rs = tuple(np.asarray(r, dtype=np.complex128) for r in R_list)
    K = -1j * H - 0.5 * sum((r.conj().T @ r for r in Rs), np.zeros_like(H))
    dim, d = H.shape[0], len(Rs)
    # one matmul yields K psi and every R_j psi
    stacked_T = np.concatenate([K.T] + [r.T for r in Rs], axis=1)

    def coefficients(t, psi, aux):
        P = (psi @ stacked_T).reshape(psi.shape[:-1] + (d + 1, dim))
        Rpsi = P[..., 1:, :]
        m = 2.0 * np.vecdot(psi[..., None, :], Rpsi).real
        half_m = 0.5 * m[..., None]
        drift = (
            P[..., 0, :]
            + np.sum(half_m * Rpsi, axis=-2)
            - (0.125 * np.sum(m * m, axis=-1))[..., None] * psi
        )
        return drift, Rpsi - half_m * psi[..., None, :]

    def drift(t, psi, aux):
        return coefficients(t, psi, aux)[0]

    def diffusion(t, psi, aux):
        Rpsi = (psi @ stacked_T[:, dim:]).reshape(psi.shape[:-1] + (d, dim))
        m = 2.0 * np.vecdot(psi[..., None, :], Rpsi).real
        return Rpsi - (0.5 * m)[..., None] * psi[..., None, :]

    output = None
    if output_channel is not None:
        r_out = Rs[output_channel]

        def output(psi):
            return 2.0 * np.vecdot(psi, psi @ r_out.T).real

    return DiffusionModel(
        name=name,
        dim=H.shape[0],
        drift=drift,
        diffusion=diffusion,
        coefficients=coefficients,
        n_channels=d,
        output_signal=output,
        linear_form=(H, Rs),
        truncation_guard=truncation_guard,
        params=dict(params or {}),
    )


def coloured_noise_sse(name: str, H0: np.ndarray, L: np.ndarray, k: float, *, params=None):
    """Norm-preserving SSE driven by an O-U process ``X`` with rate ``k``:

        d psi = -i[(H0 - k X L) dt + L dW] psi - 1/2 L^2 psi dt,
        dX    = -k X dt + dW,   X(0) = Z / sqrt(2k).

    The auxiliary state is ``X``; the diffusion coefficient is ``-i L psi``.
    """
    if not (k > 0.0 and math.isfinite(k)):
        raise InvalidParameter(f"O-U rate k must be positive, got {k}")
    H0 = np.asarray(H0, dtype=np.complex128)
    L = np.asarray(L, dtype=np.complex128)
    if not (hilbert.is_hermitian(H0) and hilbert.is_hermitian(L)):
        raise InvalidParameter("H0 and L must be Hermitian")
    C = -1j * H0 - 0.5 * (L @ L)
    D = -1j * L

    def drift(t, psi, aux):
        x = aux[..., 0]
        return psi @ C.T + (-k * x)[..., None] * (psi @ D.T)

    def diffusion(t, psi, aux):
        return (psi @ D.T)[..., None, :]

    def aux_drift(t, aux):
        return -k * aux

    def aux_diffusion(t, aux):
        return np.ones(aux.shape + (1,))

    def aux_init(z):
        return z / math.sqrt(2.0 * k)

    return DiffusionModel(
        name=name,
        dim=H0.shape[0],
        drift=drift,
        diffusion=diffusion,
        n_channels=1,
        aux_dim=1,
        aux_drift=aux_drift,
        aux_diffusion=aux_diffusion,
        aux_init=aux_init,
        params=dict(params or {}),
    )


# --------------------------------------------------------------------------
# parameter sets


@dataclass(frozen=True)
class HomodyneParams:
    """Resonantly driven two-level atom under homodyne detection.

    ``theta`` is the local-oscillator phase; ``pi/2`` is the standard
    setting, ``0`` measures the ``sigma_x`` quadrature instead.
    """

    omega_R: float = 1.0
    gamma: float = 1.0
    theta: float = math.pi / 2

    def __post_init__(self):
        if not (self.gamma > 0.0 and math.isfinite(self.gamma)):
            raise InvalidParameter("gamma must be positive")
        if not (self.omega_R >= 0.0 and math.isfinite(self.omega_R)):
            raise InvalidParameter("omega_R must be nonnegative")
        if not math.isfinite(self.theta):
            raise InvalidParameter("theta must be finite")


@dataclass(frozen=True)
class OscillatorParams:
    gamma: float = 1.0
    n_max: int = 12
    n0: int = 9

    def __post_init__(self):
        if not (self.gamma > 0.0 and math.isfinite(self.gamma)):
            raise InvalidParameter("gamma must be positive")
        if self.n_max < 1:
            raise InvalidParameter("n_max must be >= 1")
        if not 0 <= self.n0 <= self.n_max:
            raise InvalidParameter("n0 must lie in [0, n_max]")


@dataclass(frozen=True)
class OUQubitParams:
    omega0: float = math.sqrt(37.0) / 2.0
    gamma: float = 1.0
    k: float = 1.0

    def __post_init__(self):
        if not (self.gamma > 0.0 and math.isfinite(self.gamma)):
            raise InvalidParameter("gamma must be positive")
        if not (self.k > 0.0 and math.isfinite(self.k)):
            raise InvalidParameter("k must be positive for the stochastic model")
        # the reference comparison needs nu = sqrt(omega0^2 - gamma^2/4) real
        if not self.omega0 > self.gamma / 2.0:
            raise InvalidParameter("omega0 must exceed gamma/2")


# --------------------------------------------------------------------------
# model constructors


def _unit_phase(theta: float) -> complex:
    z = cmath.exp(1j * theta)
    # exact quadrature phases for theta in {0, pi/2, ...}
    re = 0.0 if abs(z.real) < 1e-15 else z.real
    im = 0.0 if abs(z.imag) < 1e-15 else z.imag
    return complex(re, im)


def homodyne_hamiltonian(omega_R: float) -> np.ndarray:
    """Rotating-frame laser Hamiltonian ``H_L = -(omega_R / 2) sigma_x``."""
    return -0.5 * omega_R * hilbert.sigma_x()


def homodyne_qubit(p: HomodyneParams = HomodyneParams()) -> DiffusionModel:
    """Rotating-frame SSE of the homodyne-detected qubit.

    The measurement operator is ``sqrt(gamma) e^{i theta} sigma_-``.  For
    ``theta = pi/2`` the drift and diffusion reduce to

        A1(psi) = -i H_L psi + gamma/2 (m_y i sigma_- - sigma_+ sigma_- - m_y^2/4) psi
        A2(psi) = sqrt(gamma) (i sigma_- - m_y/2) psi

    with ``m_y = <psi|sigma_y psi>``; the output signal is
    ``sqrt(gamma) m_y``.
    """
    R = math.sqrt(p.gamma) * _unit_phase(p.theta) * hilbert.sigma_minus()
    return nonlinear_sse(
        "homodyne",
        homodyne_hamiltonian(p.omega_R),
        [R],
        params={"omega_R": p.omega_R, "gamma": p.gamma, "theta": p.theta},
        output_channel=0,
    )


def damped_oscillator(p: OscillatorParams = OscillatorParams()) -> DiffusionModel:
    a = hilbert.annihilation(p.n_max)
    edge = p.n_max

    def guard(psi):
        return (psi[..., edge].real ** 2 + psi[..., edge].imag ** 2) > 1e-6

    model = nonlinear_sse(
        "oscillator",
        np.zeros_like(a),
        [math.sqrt(p.gamma) * a],
        params={"gamma": p.gamma, "n_max": p.n_max, "n0": p.n0},
        truncation_guard=guard,
    )
    return model


def ou_qubit_operators(omega0: float, gamma: float) -> tuple[np.ndarray, np.ndarray]:
    """``H0 = (omega0/2) sigma_z`` and ``L = sqrt(gamma/2) sigma_y``."""
    return 0.5 * omega0 * hilbert.sigma_z(), math.sqrt(gamma / 2.0) * hilbert.sigma_y()


def ou_qubit(p: OUQubitParams = OUQubitParams()) -> DiffusionModel:
    """Dissipative qubit driven by O-U coloured noise.

    In components (index 0 excited):

        d psi_1 = -1/2 (gamma/2 + i omega0) psi_1 dt - sqrt(gamma/2) psi_2 dX
        d psi_2 = -1/2 (gamma/2 - i omega0) psi_2 dt + sqrt(gamma/2) psi_1 dX
    """
    H0, L = ou_qubit_operators(p.omega0, p.gamma)
    return coloured_noise_sse(
        "ouqubit", H0, L, p.k,
        params={"omega0": p.omega0, "gamma": p.gamma, "k": p.k},
    )


def initial_state(model: DiffusionModel) -> np.ndarray:
    """Default initial vector: ground state for homodyne, ``|n0>`` for the
    oscillator, excited state for the O-U qubit."""
    if model.name == "homodyne":
        return hilbert.ground()
    if model.name == "oscillator":
        return hilbert.basis(model.dim, int(model.params["n0"]))
    if model.name == "ouqubit":
        return hilbert.excited()
    raise InvalidParameter(f"no default initial state for model {model.name!r}")
