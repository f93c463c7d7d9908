"""Experiment configuration, block-parallel ensembles and CSV emission.

Realization ``r`` always uses noise stream ``r`` of the master seed.  The
realizations are split into fixed blocks of :data:`BLOCK_SIZE` streams, each
block is reduced in row order and the block accumulators are merged in block
order, so the output does not depend on the worker count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Mapping

import numpy as np

from . import __version__, models, reference, sde
from .errors import AbortRateExceeded, ConfigError, InvalidParameter
from .noise import NoiseStream
from .stats import EnsembleAccumulator

BLOCK_SIZE = 1024
ABORT_LIMIT = 1e-3
MODELS = ("homodyne", "oscillator", "ouqubit")
SCHEMES = ("euler", "platen")
FUNCTIONALS = {
    "homodyne": ("eta11", "bloch_z", "output_B", "norm2"),
    "oscillator": ("mean_n", "norm2"),
    "ouqubit": ("eta11", "bloch_z", "ou_x"),
}
MODEL_DEFAULTS = {
    "homodyne": {"scheme": "euler", "functional": "eta11", "t_final": 10.0, "realizations": 10_000},
    "oscillator": {"scheme": "platen", "functional": "mean_n", "t_final": 5.0, "realizations": 1_000},
    "ouqubit": {"scheme": "euler", "functional": "eta11", "t_final": 5.0, "realizations": 10_000},
}
THETAS = {"pi2": math.pi / 2, "0": 0.0}
# keys left out of CSV metadata because they cannot change the numbers
_NON_RESULT_KEYS = ("threads", "out")


@dataclass(frozen=True)
class ExperimentConfig:
    model: str = "homodyne"
    scheme: str = "euler"
    dt: float = 0.01
    t_final: float = 10.0
    realizations: int = 10_000
    seed: int = 20240601
    omega_r: float = 1.0
    gamma: float = 1.0
    omega0: float = math.sqrt(37.0) / 2.0
    k: float = 1.0
    n_max: int = 12
    n0: int = 9
    theta: str = "pi2"
    functional: str = "eta11"
    stride: int = 1
    threads: int = 1
    out: str = "."
    trajectories: tuple[int, ...] = (0,)
    dt_list: tuple[float, ...] = ()
    control_variate: bool = False


def _parse_bool(text: str) -> bool:
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_list(conv):
    def parse(text):
        if isinstance(text, (list, tuple)):
            return tuple(conv(v) for v in text)
        return tuple(conv(v) for v in str(text).replace(" ", "").split(",") if v)

    return parse


_PARSERS = {
    "model": str, "scheme": str, "theta": str, "functional": str, "out": str,
    "dt": float, "t_final": float, "omega_r": float, "gamma": float,
    "omega0": float, "k": float,
    "realizations": int, "seed": int, "n_max": int, "n0": int,
    "stride": int, "threads": int,
    "trajectories": _parse_list(int), "dt_list": _parse_list(float),
    "control_variate": _parse_bool,
}


def read_config_file(path: str) -> dict[str, str]:
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    values: dict[str, str] = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from exc
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("config", f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


def build_config(values: Mapping[str, object], command: str = "ensemble") -> ExperimentConfig:
    """Merge ``values`` over the per-model defaults and validate the result."""
    raw = {key.replace("-", "_"): v for key, v in values.items() if v is not None}
    unknown = sorted(set(raw) - set(_PARSERS))
    if unknown:
        raise ConfigError(unknown[0], "unknown configuration key")
    parsed: dict[str, object] = {}
    for key, value in raw.items():
        try:
            parsed[key] = _PARSERS[key](value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(key, f"cannot parse {value!r}") from exc
    model = parsed.get("model", ExperimentConfig.model)
    if model not in MODELS:
        raise ConfigError("model", f"must be one of {', '.join(MODELS)}")
    merged = {**MODEL_DEFAULTS[model], **parsed}
    cfg = ExperimentConfig(**merged)
    validate(cfg, command)
    return cfg


def _require(ok: bool, name: str, message: str) -> None:
    if not ok:
        raise ConfigError(name, message)


def validate(cfg: ExperimentConfig, command: str = "ensemble") -> None:
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, float):
            _require(math.isfinite(v), f.name, "must be finite")
    _require(cfg.scheme in SCHEMES, "scheme", f"must be one of {', '.join(SCHEMES)}")
    _require(cfg.theta in THETAS, "theta", "must be 'pi2' or '0'")
    _require(cfg.dt > 0.0, "dt", "must be positive")
    _require(cfg.t_final >= cfg.dt, "t_final", "must be at least dt")
    _require(cfg.realizations >= 1, "realizations", "must be >= 1")
    _require(0 <= cfg.seed < 2**64, "seed", "must be a 64-bit unsigned integer")
    _require(cfg.stride >= 1, "stride", "must be >= 1")
    _require(cfg.threads >= 1, "threads", "must be >= 1")
    _require(cfg.functional in FUNCTIONALS[cfg.model], "functional",
             f"model {cfg.model} supports {', '.join(FUNCTIONALS[cfg.model])}")
    _require(all(r >= 0 for r in cfg.trajectories), "trajectories", "indices must be >= 0")
    _require(cfg.gamma > 0.0, "gamma", "must be positive")
    if cfg.functional == "norm2":
        _require(cfg.scheme == "euler", "scheme", "norm2 runs the linear SSE, which only has an Euler stepper")
    if cfg.control_variate:
        _require(cfg.model == "oscillator" and cfg.functional == "mean_n", "control_variate",
                 "only available for the oscillator mean_n functional")
    if cfg.model == "ouqubit":
        _require(cfg.omega0 > cfg.gamma / 2.0, "omega0", "must exceed gamma/2")
        if command == "reference":
            _require(cfg.k >= 0.0, "k", "must be nonnegative")
        else:
            _require(cfg.k > 0.0, "k", "must be positive for stochastic runs (k = 0 has a reference only)")
    if cfg.model == "homodyne":
        _require(cfg.omega_r >= 0.0, "omega_r", "must be nonnegative")
    if cfg.model == "oscillator":
        _require(cfg.n_max >= 1, "n_max", "must be >= 1")
        _require(0 <= cfg.n0 <= cfg.n_max, "n0", "must lie in [0, n_max]")
    dts = cfg.dt_list if command == "convergence" else (cfg.dt,)
    if command == "convergence":
        _require(len(cfg.dt_list) >= 2, "dt_list", "need at least 2 step sizes")
    for dt in dts:
        _require(dt > 0.0 and math.isfinite(dt), "dt_list" if command == "convergence" else "dt",
                 "step sizes must be positive")
        try:
            sde.time_grid(cfg.t_final, dt)
        except InvalidParameter as exc:
            raise ConfigError("dt_list" if command == "convergence" else "dt", str(exc)) from exc


def build_model(cfg: ExperimentConfig) -> sde.DiffusionModel:
    try:
        if cfg.model == "homodyne":
            return models.homodyne_qubit(models.HomodyneParams(cfg.omega_r, cfg.gamma, THETAS[cfg.theta]))
        if cfg.model == "oscillator":
            return models.damped_oscillator(models.OscillatorParams(cfg.gamma, cfg.n_max, cfg.n0))
        return models.ou_qubit(models.OUQubitParams(cfg.omega0, cfg.gamma, cfg.k))
    except InvalidParameter as exc:
        raise ConfigError(cfg.model, str(exc)) from exc


# --------------------------------------------------------------------------
# reference curves


def reference_curve(cfg: ExperimentConfig, dt: float | None = None) -> tuple[np.ndarray, np.ndarray] | None:
    """Deterministic mean of the configured functional on ``t_n = n dt``.

    Returns ``None`` when no reference exists for the functional.
    Raises :class:`~sselab.errors.ParameterDomain` outside a closed form's domain.
    """
    dt = cfg.dt if dt is None else dt
    _, times = sde.time_grid(cfg.t_final, dt)
    f = cfg.functional
    if f == "norm2":
        return times, np.ones_like(times)
    if cfg.model == "homodyne":
        if f == "eta11":
            return times, reference.homodyne_eta11(times, cfg.omega_r, cfg.gamma)
        if f == "bloch_z":
            return times, 2.0 * reference.homodyne_eta11(times, cfg.omega_r, cfg.gamma) - 1.0
        if f == "output_B":
            if cfg.theta == "0":
                # the x quadrature has zero mean for a ground-state start
                return times, np.zeros_like(reference.homodyne_sigma_x(times, cfg.omega_r, cfg.gamma))
            return times, reference.homodyne_mean_output(times, cfg.omega_r, cfg.gamma)
    if cfg.model == "oscillator" and f == "mean_n":
        return reference.oscillator_mean_n(cfg.t_final, dt, cfg.gamma, cfg.n_max, cfg.n0)
    if cfg.model == "ouqubit" and f in ("eta11", "bloch_z"):
        path = reference.nonmarkov_bloch(cfg.t_final, dt, cfg.omega0, cfg.gamma, cfg.k)
        return path.times, (path.eta11 if f == "eta11" else path.z)
    return None


# --------------------------------------------------------------------------
# ensembles


@dataclass
class EnsembleResult:
    times: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    accepted: int
    aborted: int
    guard_hits: int
    diagnostics: dict[str, int] = field(default_factory=dict)


def _blocks(total: int) -> list[range]:
    return [range(lo, min(lo + BLOCK_SIZE, total)) for lo in range(0, total, BLOCK_SIZE)]


def _control(cfg: ExperimentConfig, m: sde.DiffusionModel):
    if not cfg.control_variate:
        return None, cfg.functional
    levels = np.diag(np.arange(m.dim, dtype=np.complex128))
    return sde.MartingaleControl("mean_n", levels, cfg.gamma), "mean_n_cv"


def _run_block(cfg: ExperimentConfig, m: sde.DiffusionModel, dt: float, streams: range):
    psi0 = models.initial_state(m)
    if cfg.functional == "norm2":
        H, Rs = m.linear_form
        times, norm2 = sde.integrate_linear_batch(H, Rs, psi0, cfg.t_final, dt, cfg.seed, streams)
        acc = EnsembleAccumulator(times, "norm2")
        for row in norm2:
            acc.add_values(row)
        return acc, 0
    control, key = _control(cfg, m)
    res = sde.integrate_batch(
        m, cfg.scheme, psi0, cfg.t_final, dt, cfg.seed, streams, (cfg.functional,), control
    )
    acc = EnsembleAccumulator(res.times, key)
    acc.add_batch(res)
    return acc, res.guard_hits


def run_ensemble_data(cfg: ExperimentConfig, dt: float | None = None) -> EnsembleResult:
    """Simulate ``cfg.realizations`` trajectories and reduce them in index order."""
    dt = cfg.dt if dt is None else dt
    m = build_model(cfg)
    blocks = _blocks(cfg.realizations)
    if cfg.threads == 1 or len(blocks) == 1:
        parts = [_run_block(cfg, m, dt, b) for b in blocks]
    else:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            parts = list(pool.map(lambda b: _run_block(cfg, m, dt, b), blocks))
    total = parts[0][0]
    for acc, _ in parts[1:]:
        total.merge(acc)
    guard_hits = sum(g for _, g in parts)
    if total.aborted > ABORT_LIMIT * cfg.realizations:
        raise AbortRateExceeded(total.aborted, cfg.realizations)
    mean, stderr = total.finalize()
    return EnsembleResult(
        times=total.times, mean=mean, stderr=stderr, accepted=total.count,
        aborted=total.aborted, guard_hits=guard_hits,
    )


# --------------------------------------------------------------------------
# CSV output


def _num(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x), ".17g")


def _metadata(cfg: ExperimentConfig, command: str, extra: Mapping[str, object] = ()) -> list[str]:
    lines = [f"# sselab {__version__}", f"# command = {command}"]
    for key, value in asdict(cfg).items():
        if key in _NON_RESULT_KEYS:
            continue
        if isinstance(value, (tuple, list)):
            value = ",".join(_num(v) for v in value)
        elif isinstance(value, float):
            value = _num(value)
        lines.append(f"# {key} = {value}")
    for key, value in dict(extra).items():
        lines.append(f"# {key} = {value}")
    return lines


def write_csv(path: str, meta: list[str], header: list[str], columns, stride: int = 1) -> None:
    cols = [np.asarray(c) for c in columns]
    n = len(cols[0])
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in meta:
            fh.write(line + "\n")
        fh.write(",".join(header) + "\n")
        for i in range(0, n, stride):
            fh.write(",".join(_num(c[i]) for c in cols) + "\n")


def _ensure_dir(path: str) -> None:
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise ConfigError("out", f"cannot create {path}: {exc.strerror}") from exc


def _write_reference(cfg: ExperimentConfig, command: str, required: bool) -> bool:
    try:
        curve = reference_curve(cfg)
    except InvalidParameter:
        if required:
            raise
        return False
    if curve is None:
        if required:
            raise ConfigError("functional", f"no reference curve for {cfg.model}/{cfg.functional}")
        return False
    times, values = curve
    write_csv(os.path.join(cfg.out, "reference.csv"), _metadata(cfg, command),
              ["t", "value"], [times, values], cfg.stride)
    return True


def run_ensemble(cfg: ExperimentConfig) -> EnsembleResult:
    """Write ``ensemble.csv``, ``reference.csv`` (if a reference exists) and
    ``trajectory_<r>.csv`` for every index in ``cfg.trajectories``."""
    _ensure_dir(cfg.out)
    res = run_ensemble_data(cfg)
    meta = _metadata(cfg, "ensemble", {
        "aborted": res.aborted, "truncation_guard_hits": res.guard_hits,
    })
    acc_col = np.full(res.times.size, res.accepted, dtype=np.int64)
    write_csv(os.path.join(cfg.out, "ensemble.csv"), meta, ["t", "mean", "stderr", "R_accepted"],
              [res.times, res.mean, res.stderr, acc_col], cfg.stride)
    _write_reference(cfg, "ensemble", required=False)
    _write_trajectories(cfg, "ensemble")
    return res


def run_reference(cfg: ExperimentConfig) -> None:
    _ensure_dir(cfg.out)
    _write_reference(cfg, "reference", required=True)


def trajectory_columns(cfg: ExperimentConfig, r: int) -> tuple[list[str], list[np.ndarray]]:
    """Columns ``t, value[, B]`` of realization ``r`` (stream ``r``)."""
    m = build_model(cfg)
    psi0 = models.initial_state(m)
    if cfg.functional == "norm2":
        H, Rs = m.linear_form
        times, norm2 = sde.integrate_linear_batch(H, Rs, psi0, cfg.t_final, cfg.dt, cfg.seed, [r])
        return ["t", "value"], [times, norm2[0]]
    rec = sde.simulate_trajectory(m, cfg.scheme, psi0, cfg.t_final, cfg.dt,
                                  NoiseStream(cfg.seed, r), (cfg.functional,))
    key = cfg.functional
    values = rec.output_path if key == "output_B" else rec.functional_samples[key]
    if rec.output_path is not None and key != "output_B":
        return ["t", "value", "B"], [rec.times, values, rec.output_path]
    return ["t", "value"], [rec.times, values]


def _write_trajectories(cfg: ExperimentConfig, command: str) -> None:
    for r in cfg.trajectories:
        header, cols = trajectory_columns(cfg, r)
        write_csv(os.path.join(cfg.out, f"trajectory_{r}.csv"),
                  _metadata(cfg, command, {"trajectory": r}), header, cols, cfg.stride)


def run_trajectory(cfg: ExperimentConfig) -> None:
    _ensure_dir(cfg.out)
    _write_trajectories(cfg, "trajectory")


@dataclass
class ConvergenceRow:
    dt: float
    error: float
    stderr: float
    accepted: int


def run_convergence_data(cfg: ExperimentConfig) -> list[ConvergenceRow]:
    """Time-averaged ``|mean - reference|`` over the grid for each step size.

    The reported stderr is the time average of the pointwise standard errors.
    """
    rows = []
    for dt in cfg.dt_list:
        curve = reference_curve(cfg, dt)
        if curve is None:
            raise ConfigError("functional", f"no reference curve for {cfg.model}/{cfg.functional}")
        res = run_ensemble_data(replace(cfg, dt=dt), dt)
        err = np.abs(res.mean - curve[1])
        rows.append(ConvergenceRow(dt, float(np.mean(err)), float(np.mean(res.stderr)), res.accepted))
    return rows


def run_convergence(cfg: ExperimentConfig) -> list[ConvergenceRow]:
    _ensure_dir(cfg.out)
    rows = run_convergence_data(cfg)
    write_csv(
        os.path.join(cfg.out, "convergence.csv"), _metadata(cfg, "convergence"),
        ["dt", "error", "stderr", "R_accepted"],
        [[r.dt for r in rows], [r.error for r in rows], [r.stderr for r in rows],
         np.array([r.accepted for r in rows], dtype=np.int64)],
    )
    return rows
