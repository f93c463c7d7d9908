"""Small dense complex linear algebra for qubits and truncated oscillators.

States are plain ``complex128`` numpy vectors and operators are square
``complex128`` matrices.  Most helpers also accept a leading batch axis on
the state (shape ``(..., dim)``) so the trajectory integrators can advance
many realizations at once.

Qubit basis convention: index 0 is the excited state ``|1>`` and index 1 is
the ground state ``|0>``.  With this ordering ``sigma_z = diag(+1, -1)``, the
excited population is ``(1 + z) / 2`` and ``eta_11`` is the ``[0, 0]`` entry
of a density matrix.

Fock convention: index ``n`` is ``|n>`` for ``n = 0 .. n_max``.
"""

from __future__ import annotations

import numpy as np
from numpy.typing import NDArray

from .errors import DimensionMismatch, InvalidParameter, ZeroNorm

ComplexArray = NDArray[np.complex128]

ZERO_NORM_THRESHOLD = 1e-300
HERMITIAN_TOL = 1e-12

EXCITED = 0
GROUND = 1


def _as_state(v) -> ComplexArray:
    v = np.asarray(v, dtype=np.complex128)
    if v.ndim < 1 or v.shape[-1] < 1:
        raise DimensionMismatch(f"not a state vector: shape {v.shape}")
    return v


def _as_operator(a) -> ComplexArray:
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"operator must be square, got shape {a.shape}")
    return a


# --------------------------------------------------------------------------
# constructors


def basis(dim: int, index: int) -> ComplexArray:
    """Unit vector ``|index>`` in a ``dim``-dimensional space."""
    if dim < 1 or not 0 <= index < dim:
        raise InvalidParameter(f"basis index {index} out of range for dim {dim}")
    v = np.zeros(dim, dtype=np.complex128)
    v[index] = 1.0
    return v


def excited() -> ComplexArray:
    return basis(2, EXCITED)


def ground() -> ComplexArray:
    return basis(2, GROUND)


def identity(dim: int) -> ComplexArray:
    return np.eye(dim, dtype=np.complex128)


def sigma_minus() -> ComplexArray:
    """Lowering operator ``|0><1|`` (excited -> ground)."""
    m = np.zeros((2, 2), dtype=np.complex128)
    m[GROUND, EXCITED] = 1.0
    return m


def sigma_plus() -> ComplexArray:
    return sigma_minus().conj().T.copy()


def sigma_x() -> ComplexArray:
    return sigma_plus() + sigma_minus()


def sigma_y() -> ComplexArray:
    return 1j * (sigma_minus() - sigma_plus())


def sigma_z() -> ComplexArray:
    return np.diag([1.0, -1.0]).astype(np.complex128)


def annihilation(n_max: int) -> ComplexArray:
    """Truncated annihilation operator with ``a[n-1, n] = sqrt(n)``."""
    if n_max < 1:
        raise InvalidParameter("n_max must be >= 1")
    n = np.arange(1, n_max + 1)
    a = np.zeros((n_max + 1, n_max + 1), dtype=np.complex128)
    a[n - 1, n] = np.sqrt(n)
    return a


def creation(n_max: int) -> ComplexArray:
    return annihilation(n_max).conj().T.copy()


def number(n_max: int) -> ComplexArray:
    return np.diag(np.arange(n_max + 1, dtype=float)).astype(np.complex128)


def is_hermitian(a, tol: float = HERMITIAN_TOL) -> bool:
    a = _as_operator(a)
    return bool(np.max(np.abs(a - a.conj().T), initial=0.0) <= tol)


# --------------------------------------------------------------------------
# vector operations


def inner(u, v) -> complex:
    """``<u|v>``, conjugate-linear in the first slot."""
    u, v = _as_state(u), _as_state(v)
    if u.shape != v.shape:
        raise DimensionMismatch(f"inner: shapes {u.shape} and {v.shape}")
    out = np.sum(u.conj() * v, axis=-1)
    return complex(out) if out.ndim == 0 else out


def apply(a, v) -> ComplexArray:
    """Matrix-vector product; ``v`` may carry leading batch axes."""
    a, v = _as_operator(a), _as_state(v)
    if a.shape[1] != v.shape[-1]:
        raise DimensionMismatch(f"apply: operator {a.shape} on state {v.shape}")
    return v @ a.T


def expectation(a, psi) -> complex:
    """``<psi|A psi>`` without normalizing ``psi``."""
    return inner(psi, apply(a, psi))


def norm(v) -> float:
    v = _as_state(v)
    return np.sqrt(np.sum(v.real**2 + v.imag**2, axis=-1))


def normalize(v) -> ComplexArray:
    """Return ``v / ||v||``.

    Raises
    ------
    ZeroNorm
        If the norm is below ``1e-300`` or not finite.
    """
    v = _as_state(v)
    n = norm(v)
    if not np.all(np.isfinite(n)) or np.any(n <= ZERO_NORM_THRESHOLD):
        raise ZeroNorm(f"cannot normalize vector with norm {n}")
    return v / n[..., None] if v.ndim > 1 else v / n


# --------------------------------------------------------------------------
# density matrices


def pure_density(psi) -> ComplexArray:
    """Projector ``|psi><psi|``."""
    psi = _as_state(psi)
    return np.multiply.outer(psi, psi.conj()) if psi.ndim == 1 else (
        psi[..., :, None] * psi[..., None, :].conj()
    )


def check_density(rho, trace_tol: float = 1e-10) -> None:
    """Raise ``InvalidParameter`` unless ``rho`` is Hermitian, trace one and has a nonnegative diagonal."""
    rho = _as_operator(rho)
    if not is_hermitian(rho):
        raise InvalidParameter("density matrix is not Hermitian")
    tr = np.trace(rho)
    if abs(tr - 1.0) > trace_tol:
        raise InvalidParameter(f"density matrix trace {tr} != 1")
    if np.any(np.diag(rho).real < -1e-10):
        raise InvalidParameter("density matrix has a negative population")


def bloch_vector(rho) -> tuple[float, float, float]:
    """Bloch components ``(Tr sx rho, Tr sy rho, Tr sz rho)`` of a qubit state."""
    rho = _as_operator(rho)
    if rho.shape != (2, 2):
        raise DimensionMismatch(f"bloch_vector needs a 2x2 matrix, got {rho.shape}")
    return tuple(
        float(np.trace(s @ rho).real) for s in (sigma_x(), sigma_y(), sigma_z())
    )
