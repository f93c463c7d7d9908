"""Diffusive SDE integrators acting on Hilbert-space states.

A :class:`DiffusionModel` bundles the drift and diffusion maps of an Ito SDE

    d psi = drift(t, psi, aux) dt + sum_j diffusion_j(t, psi, aux) dW_j

optionally coupled to real auxiliary scalars (the O-U value ``X`` for the
coloured-noise models) that follow their own Ito SDE driven by the *same*
Wiener increments.  All maps accept leading batch axes, so one call advances
a whole block of realizations.

Two schemes are provided, both renormalizing the state after every step:
Euler-Maruyama (:func:`euler_step`) and Platen's second-order weak scheme
(:func:`platen_step`, single channel only).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from . import hilbert
from .errors import (
    DimensionMismatch,
    InvalidParameter,
    MultiChannelUnsupported,
    StepFailure,
    ZeroNorm,
)
from .noise import NoiseStream, normal_matrix

Map = Callable[..., np.ndarray]


class SchemeId(str, enum.Enum):
    EULER = "euler"
    PLATEN = "platen"


@dataclass(frozen=True)
class DiffusionModel:
    """Coefficients of a diffusive SSE.

    ``drift(t, psi, aux)`` returns shape ``(..., dim)``;
    ``diffusion(t, psi, aux)`` returns ``(..., n_channels, dim)``.
    Auxiliary scalars follow ``d aux = aux_drift(t, aux) dt +
    aux_diffusion(t, aux) . dW`` where ``aux_diffusion`` has shape
    ``(..., aux_dim, n_channels)``; ``aux_init`` maps ``aux_dim`` standard
    normals to the initial auxiliary values.
    """

    name: str
    dim: int
    drift: Map
    diffusion: Map
    n_channels: int = 1
    aux_dim: int = 0
    aux_drift: Map | None = None
    aux_diffusion: Map | None = None
    aux_init: Map | None = None
    # optional (t, psi, aux) -> (drift, diffusion) sharing work between the two
    coefficients: Map | None = None
    output_signal: Callable[[np.ndarray], np.ndarray] | None = None
    # (H, [R_j]) of the linear SSE whose normalized solution this model is
    linear_form: tuple[np.ndarray, tuple[np.ndarray, ...]] | None = None
    # psi -> bool, flags states that leak into the truncation edge
    truncation_guard: Callable[[np.ndarray], np.ndarray] | None = None
    params: Mapping[str, float] = field(default_factory=dict)


@dataclass
class TrajectoryRecord:
    times: np.ndarray
    functional_samples: dict[str, np.ndarray]
    output_path: np.ndarray | None
    final_state: np.ndarray
    final_aux: np.ndarray
    stream_index: int | None = None


@dataclass
class BatchResult:
    """Realizations of one block of streams, rows in stream order."""

    times: np.ndarray
    stream_indices: np.ndarray
    samples: dict[str, np.ndarray]
    output_path: np.ndarray | None
    final_states: np.ndarray
    final_aux: np.ndarray
    aborted: np.ndarray
    abort_step: np.ndarray
    guard_hits: int = 0

    def record(self, row: int) -> TrajectoryRecord:
        return TrajectoryRecord(
            times=self.times,
            functional_samples={k: v[row] for k, v in self.samples.items()},
            output_path=None if self.output_path is None else self.output_path[row],
            final_state=self.final_states[row],
            final_aux=self.final_aux[row],
            stream_index=int(self.stream_indices[row]),
        )


@dataclass(frozen=True)
class MartingaleControl:
    """Zero-mean control variate for a functional ``<psi|O psi>`` whose
    ensemble mean obeys ``d E<O> = -rate E<O> dt``.

    The running sum ``c_{n+1} = e^{-rate dt} (c_n + sum_j g_j(psi_n) dW_{n,j})``
    with ``g_j = 2 Re <psi|O diffusion_j(psi)>`` has exactly zero mean on the
    grid, so ``F - c`` is an unbiased, lower-variance sample of ``F``.  The
    corrected series is stored under ``functional + "_cv"``.
    """

    functional: str
    observable: np.ndarray
    rate: float


# --------------------------------------------------------------------------
# grid and functionals


def time_grid(t_final: float, dt: float) -> tuple[int, np.ndarray]:
    """Uniform grid ``t_n = n dt``; ``t_final`` must be a multiple of ``dt``."""
    if not (dt > 0.0 and math.isfinite(dt)):
        raise InvalidParameter(f"dt must be positive, got {dt}")
    if not (t_final > 0.0 and math.isfinite(t_final)):
        raise InvalidParameter(f"t_final must be positive, got {t_final}")
    n = round(t_final / dt)
    if n < 1 or abs(n * dt - t_final) > 1e-9 * t_final:
        raise InvalidParameter(f"dt={dt} does not divide t_final={t_final}")
    return n, dt * np.arange(n + 1)


def _probabilities(psi: np.ndarray) -> np.ndarray:
    return psi.real**2 + psi.imag**2


def resolve_functional(model: DiffusionModel, name: str) -> Callable:
    """Look up a named real functional ``F(psi, aux)`` for ``model``.

    ``output_B`` is not a state functional; it is read off the output path.
    """
    if name == "eta11":
        if model.dim != 2:
            raise InvalidParameter("eta11 needs a qubit model")
        return lambda psi, aux: _probabilities(psi[..., hilbert.EXCITED])
    if name == "bloch_z":
        if model.dim != 2:
            raise InvalidParameter("bloch_z needs a qubit model")
        return lambda psi, aux: _probabilities(psi[..., 0]) - _probabilities(psi[..., 1])
    if name == "mean_n":
        levels = np.arange(model.dim, dtype=float)
        return lambda psi, aux: _probabilities(psi) @ levels
    if name == "norm2":
        return lambda psi, aux: np.sum(_probabilities(psi), axis=-1)
    if name == "ou_x":
        if model.aux_dim < 1:
            raise InvalidParameter("ou_x needs a model with an O-U auxiliary")
        return lambda psi, aux: aux[..., 0].copy()
    raise InvalidParameter(f"unknown functional {name!r}")


# --------------------------------------------------------------------------
# single steps


def _noise_term(coeff: np.ndarray, dW: np.ndarray) -> np.ndarray:
    # coeff (..., n_channels, n) contracted with dW (..., n_channels)
    return np.sum(coeff * dW[..., :, None], axis=-2)


def _aux_parts(m: DiffusionModel, t, aux):
    if m.aux_dim == 0:
        return 0.0, None
    return m.aux_drift(t, aux), m.aux_diffusion(t, aux)


def _coefficients(m: DiffusionModel, t, psi, aux):
    if m.coefficients is not None:
        return m.coefficients(t, psi, aux)
    return m.drift(t, psi, aux), m.diffusion(t, psi, aux)


def _euler_raw(m: DiffusionModel, t, psi, aux, dt, dW):
    a, b = _coefficients(m, t, psi, aux)
    new = psi + a * dt + _noise_term(b, dW)
    if m.aux_dim:
        a, b = _aux_parts(m, t, aux)
        aux = aux + a * dt + np.sum(b * dW[..., None, :], axis=-1)
    return new, aux


def _platen_raw(m: DiffusionModel, t, psi, aux, dt, dW):
    if m.n_channels != 1:
        raise MultiChannelUnsupported("Platen scheme is single-channel only")
    w = dW[..., 0]
    sq = math.sqrt(dt)
    d1, d2 = _coefficients(m, t, psi, aux)
    d2 = d2[..., 0, :]
    if m.aux_dim:
        a1, b = _aux_parts(m, t, aux)
        a2 = b[..., 0]
        aux_tilde = aux + a1 * dt + a2 * w[..., None]
        aux_p = aux + a1 * dt + a2 * sq
        aux_m = aux + a1 * dt - a2 * sq
    else:
        aux_tilde = aux_p = aux_m = aux
    wc = w[..., None]
    tilde = psi + d1 * dt + d2 * wc
    plus = psi + d1 * dt + d2 * sq
    minus = psi + d1 * dt - d2 * sq
    t1 = t + dt
    d2p = m.diffusion(t1, plus, aux_p)[..., 0, :]
    d2m = m.diffusion(t1, minus, aux_m)[..., 0, :]
    corr = (wc * wc - dt) / sq
    new = (
        psi
        + 0.5 * (m.drift(t1, tilde, aux_tilde) + d1) * dt
        + 0.25 * (d2p + d2m + 2.0 * d2) * wc
        + 0.25 * (d2p - d2m) * corr
    )
    if m.aux_dim:
        a1p = m.aux_drift(t1, aux_tilde)
        b2p = m.aux_diffusion(t1, aux_p)[..., 0]
        b2m = m.aux_diffusion(t1, aux_m)[..., 0]
        aux = (
            aux
            + 0.5 * (a1p + a1) * dt
            + 0.25 * (b2p + b2m + 2.0 * a2) * w[..., None]
            + 0.25 * (b2p - b2m) * corr
        )
    return new, aux


def _prepare(m: DiffusionModel, psi, aux, dW):
    psi = np.asarray(psi, dtype=np.complex128)
    if psi.shape[-1] != m.dim:
        raise DimensionMismatch(f"state dim {psi.shape[-1]} != model dim {m.dim}")
    aux = np.zeros(psi.shape[:-1] + (m.aux_dim,)) if aux is None else np.asarray(aux, float)
    dW = np.atleast_1d(np.asarray(dW, dtype=float))
    if dW.shape[-1] != m.n_channels:
        raise DimensionMismatch(f"expected {m.n_channels} Wiener increments, got {dW.shape[-1]}")
    return psi, aux, dW


def euler_step(m: DiffusionModel, t: float, psi, aux, dt: float, dW):
    """One Euler-Maruyama step followed by renormalization.

    Returns ``(psi_next, aux_next)``; raises :class:`ZeroNorm` if the
    updated vector cannot be normalized.
    """
    psi, aux, dW = _prepare(m, psi, aux, dW)
    new, aux = _euler_raw(m, t, psi, aux, dt, dW)
    return hilbert.normalize(new), aux


def platen_step(m: DiffusionModel, t: float, psi, aux, dt: float, dW):
    """One step of Platen's explicit order-2 weak scheme, then renormalization.

    Auxiliary scalars are advanced by the same scheme on the joint
    ``(psi, aux)`` process.
    """
    psi, aux, dW = _prepare(m, psi, aux, dW)
    new, aux = _platen_raw(m, t, psi, aux, dt, dW)
    return hilbert.normalize(new), aux


_RAW_STEPS = {SchemeId.EULER: _euler_raw, SchemeId.PLATEN: _platen_raw}


# --------------------------------------------------------------------------
# trajectory driver


def _split_normals(m: DiffusionModel, z: np.ndarray, n_steps: int, dt: float):
    """Stream layout: ``aux_dim`` normals for the initial auxiliaries, then
    ``n_channels`` normals per step (step-major)."""
    aux0 = z[:, : m.aux_dim]
    aux0 = m.aux_init(aux0) if m.aux_dim else aux0
    dW = z[:, m.aux_dim :].reshape(z.shape[0], n_steps, m.n_channels) * math.sqrt(dt)
    return aux0, dW


def integrate_batch(
    m: DiffusionModel,
    scheme: SchemeId | str,
    psi0,
    t_final: float,
    dt: float,
    seed: int,
    stream_indices: Sequence[int],
    functionals: Sequence[str] = ("norm2",),
    control: MartingaleControl | None = None,
) -> BatchResult:
    """Integrate one realization per stream index, vectorized over the block.

    Stream ``r`` of ``seed`` supplies, in order, ``aux_dim`` normals for the
    initial auxiliaries and then ``n_channels`` normals per step.
    """
    n_steps, _ = time_grid(t_final, dt)
    idx = np.asarray(list(stream_indices), dtype=np.int64)
    z = normal_matrix(seed, idx, m.aux_dim + n_steps * m.n_channels)
    aux0, dW = _split_normals(m, z, n_steps, dt)
    res = integrate_paths(m, scheme, psi0, dt, dW, aux0, functionals, control)
    res.stream_indices = idx
    return res


def integrate_paths(
    m: DiffusionModel,
    scheme: SchemeId | str,
    psi0,
    dt: float,
    dW: np.ndarray,
    aux0: np.ndarray | None = None,
    functionals: Sequence[str] = ("norm2",),
    control: MartingaleControl | None = None,
) -> BatchResult:
    """Integrate realizations driven by explicit Wiener increments.

    ``dW`` has shape ``(n_paths, n_steps, n_channels)``.  A realization whose
    state collapses or goes non-finite is frozen at its last good state,
    flagged in ``aborted`` and its samples after the failure are NaN.  The
    output path ``B_n`` (for models with an output signal) accumulates
    ``dW_k + m(psi_k) dt`` with the pre-update state ``psi_k``.
    """
    scheme = SchemeId(scheme)
    step = _RAW_STEPS[scheme]
    if scheme is SchemeId.PLATEN and m.n_channels != 1:
        raise MultiChannelUnsupported("Platen scheme is single-channel only")
    dW = np.asarray(dW, dtype=float)
    if dW.ndim != 3 or dW.shape[2] != m.n_channels:
        raise DimensionMismatch(f"increments must have shape (paths, steps, {m.n_channels})")
    nb, n_steps = dW.shape[:2]
    times = dt * np.arange(n_steps + 1)
    psi0 = hilbert.normalize(np.asarray(psi0, dtype=np.complex128))
    if psi0.shape != (m.dim,):
        raise DimensionMismatch(f"initial state shape {psi0.shape} != ({m.dim},)")
    if aux0 is None:
        aux = np.zeros((nb, m.aux_dim))
    else:
        aux = np.asarray(aux0, dtype=float).reshape(nb, m.aux_dim)
    psi = np.broadcast_to(psi0, (nb, m.dim)).copy()

    wanted = [f for f in functionals if f != "output_B"]
    fns = {name: resolve_functional(m, name) for name in wanted}
    samples = {name: np.full((nb, n_steps + 1), np.nan) for name in wanted}
    want_output = m.output_signal is not None
    output = np.full((nb, n_steps + 1), np.nan) if want_output else None
    if "output_B" in functionals and not want_output:
        raise InvalidParameter(f"model {m.name} defines no output signal")

    alive = np.ones(nb, dtype=bool)
    abort_step = np.full(nb, -1, dtype=np.int64)
    guard = np.zeros(nb, dtype=bool)

    for name, fn in fns.items():
        samples[name][:, 0] = fn(psi, aux)
    if want_output:
        output[:, 0] = 0.0
    if control is not None:
        if control.functional not in fns:
            raise InvalidParameter(f"control functional {control.functional!r} not requested")
        obs_T = np.asarray(control.observable, dtype=np.complex128).T
        decay = math.exp(-control.rate * dt)
        cv = np.zeros(nb)
        corrected = np.full((nb, n_steps + 1), np.nan)
        corrected[:, 0] = samples[control.functional][:, 0]

    for n in range(n_steps):
        t = times[n]
        if want_output:
            output[:, n + 1] = output[:, n] + dW[:, n, 0] + m.output_signal(psi) * dt
        if control is not None:
            b = _coefficients(m, t, psi, aux)[1]
            g = 2.0 * np.vecdot(psi[:, None, :], b @ obs_T).real
            cv = decay * (cv + np.sum(g * dW[:, n], axis=-1))
        with np.errstate(all="ignore"):
            new, new_aux = step(m, t, psi, aux, dt, dW[:, n])
            nrm = np.sqrt(np.sum(_probabilities(new), axis=-1))
            ok = np.isfinite(nrm) & (nrm > hilbert.ZERO_NORM_THRESHOLD)
            if m.aux_dim:
                ok &= np.all(np.isfinite(new_aux), axis=-1)
        failed = alive & ~ok
        if failed.any():
            abort_step[failed] = n
            alive &= ok
        keep = alive[:, None]
        psi = np.where(keep, new / np.where(ok, nrm, 1.0)[:, None], psi)
        if m.aux_dim:
            aux = np.where(keep, new_aux, aux)
        if m.truncation_guard is not None:
            guard |= m.truncation_guard(psi) & alive
        for name, fn in fns.items():
            col = fn(psi, aux)
            samples[name][:, n + 1] = np.where(alive, col, np.nan)
        if control is not None:
            corrected[:, n + 1] = samples[control.functional][:, n + 1] - cv

    if control is not None:
        samples[control.functional + "_cv"] = corrected
    if want_output:
        # output after a failed step is meaningless
        for row in np.flatnonzero(abort_step >= 0):
            output[row, abort_step[row] + 2 :] = np.nan
        if "output_B" in functionals:
            samples["output_B"] = output
    return BatchResult(
        times=times,
        stream_indices=np.arange(nb, dtype=np.int64),
        samples=samples,
        output_path=output,
        final_states=psi,
        final_aux=aux,
        aborted=abort_step >= 0,
        abort_step=abort_step,
        guard_hits=int(guard.sum()),
    )


def simulate_trajectory(
    m: DiffusionModel,
    scheme: SchemeId | str,
    psi0,
    t_final: float,
    dt: float,
    stream: NoiseStream,
    functionals: Sequence[str] = ("norm2",),
) -> TrajectoryRecord:
    """Integrate one realization driven by ``stream``.

    Functionals are sampled on every grid point of ``[0, t_final]`` after
    renormalization.  A collapsed step raises :class:`StepFailure` carrying
    the stream and step indices.
    """
    res = integrate_batch(
        m, scheme, psi0, t_final, dt,
        stream.master_seed, [stream.stream_index], functionals,
    )
    if res.aborted[0]:
        step = int(res.abort_step[0])
        raise StepFailure(
            f"trajectory {stream.stream_index} failed at step {step}",
            trajectory=stream.stream_index,
            step=step,
        ) from ZeroNorm("state collapsed or became non-finite")
    return res.record(0)


# --------------------------------------------------------------------------
# linear SSE


def linear_euler_step(H, R_list, phi, dt: float, dB):
    """Unnormalized Euler step of the linear diffusive SSE

        d phi = (-i H - 1/2 sum R^dag R) phi dt + sum R phi dB.

    ``dB`` holds one increment per operator in ``R_list``; ``phi`` may carry
    leading batch axes (then ``dB`` has shape ``(..., len(R_list))``).
    """
    H = np.asarray(H, dtype=np.complex128)
    phi = np.asarray(phi, dtype=np.complex128)
    if H.shape != (phi.shape[-1],) * 2:
        raise DimensionMismatch(f"H {H.shape} does not act on state {phi.shape}")
    R_list = [np.asarray(r, dtype=np.complex128) for r in R_list]
    dB = np.atleast_1d(np.asarray(dB, dtype=float))
    if len(R_list) and dB.shape[-1] != len(R_list):
        raise DimensionMismatch("one increment per R operator is required")
    K = -1j * H
    for r in R_list:
        if r.shape != H.shape:
            raise DimensionMismatch(f"R {r.shape} does not match H {H.shape}")
        K = K - 0.5 * (r.conj().T @ r)
    out = phi + (phi @ K.T) * dt
    for j, r in enumerate(R_list):
        out = out + (phi @ r.T) * dB[..., j : j + 1]
    return out


def integrate_linear_batch(
    H, R_list, psi0, t_final: float, dt: float, seed: int, stream_indices: Sequence[int]
) -> tuple[np.ndarray, np.ndarray]:
    """Euler paths of the linear SSE under the reference measure.

    Returns ``(times, norm2)`` with ``norm2[r, n] = ||phi_r(t_n)||^2``.
    """
    n_steps, times = time_grid(t_final, dt)
    idx = list(stream_indices)
    d = len(R_list)
    z = normal_matrix(seed, idx, n_steps * d).reshape(len(idx), n_steps, d)
    dB = z * math.sqrt(dt)
    phi = np.broadcast_to(np.asarray(psi0, dtype=np.complex128), (len(idx), len(psi0))).copy()
    norm2 = np.empty((len(idx), n_steps + 1))
    norm2[:, 0] = np.sum(_probabilities(phi), axis=-1)
    for n in range(n_steps):
        phi = linear_euler_step(H, R_list, phi, dt, dB[:, n])
        norm2[:, n + 1] = np.sum(_probabilities(phi), axis=-1)
    return times, norm2
