"""Monte-Carlo SER experiment runner: SNR sweeps, paired detector comparison,
Langevin ablations, reproducible seeding, and CSV emission.

Reproducibility contract: every random draw comes from a named stream
derived from the root seed as SeedSequence(seed, spawn_key=(snr_index,
trial_index, purpose[, vector])), so trials can run in any order on any
number of workers and still produce the identical SweepResult. Wall time is
the single sanctioned nondeterministic column.
"""

from __future__ import annotations

import hashlib
import struct
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import baselines
from .channel import (
    build_real_system,
    kronecker_channel,
    rayleigh_channel,
    real_embedding,
    sigma0_from_snr,
    transmit,
)
from .constellation import (
    ModulationPlan,
    make_qam,
    sample_symbols,
    symbol_error_rate,
)
from .errors import ConfigurationError
from .langevin import LangevinConfig, detect_system

CSV_HEADER = "snr_db,detector,params_digest,num_symbols,num_errors,ser,wall_time_seconds"

_CHANNEL_KINDS = ("rayleigh", "kronecker")
_DETECTOR_NAMES = tuple(kind.value for kind in baselines.DetectorKind)

# Stream purposes within one (snr_index, trial_index) cell.
_PURPOSE_CHANNEL = 0
_PURPOSE_SYMBOLS = 1
_PURPOSE_NOISE = 2
_PURPOSE_TRAJECTORY = 3

_ABLATION_AXES = {"levels": "levels", "trajectories": "trajectories", "tau": "tau"}


@dataclass(frozen=True)
class ExperimentConfig:
    """One benchmark description: system size, channel model, modulation,
    SNR grid, trial count, detector roster, and the root seed."""

    n_rx: int
    n_users: int
    snr_db: tuple[float, ...]
    trials: int
    channel: str = "rayleigh"
    rho: float = 0.0
    modulation: int | tuple[int, ...] = 16
    detectors: tuple[str, ...] = ("mmse", "langevin")
    langevin: LangevinConfig = field(default_factory=LangevinConfig)
    seed: int = 0
    output_path: str | None = None
    vectors_per_channel: int = 1

    def validate(self) -> None:
        if self.n_users < 1 or self.n_rx < self.n_users:
            raise ConfigurationError(
                f"n_rx/n_users: need n_rx >= n_users >= 1, got {self.n_rx}/{self.n_users}"
            )
        if self.channel not in _CHANNEL_KINDS:
            raise ConfigurationError(
                f"channel: unknown kind {self.channel!r}, expected one of {_CHANNEL_KINDS}"
            )
        if not 0.0 <= self.rho < 1.0:
            raise ConfigurationError(f"rho: must be in [0, 1), got {self.rho}")
        if len(self.snr_db) == 0:
            raise ConfigurationError("snr_db: must be nonempty")
        if any(np.isnan(v) for v in self.snr_db):
            raise ConfigurationError("snr_db: NaN entry")
        if self.trials < 1:
            raise ConfigurationError(f"trials: must be >= 1, got {self.trials}")
        if self.vectors_per_channel < 1:
            raise ConfigurationError(
                f"vectors_per_channel: must be >= 1, got {self.vectors_per_channel}"
            )
        if len(self.detectors) == 0:
            raise ConfigurationError("detectors: must be nonempty")
        for name in self.detectors:
            if name not in _DETECTOR_NAMES:
                raise ConfigurationError(
                    f"detectors: unknown detector {name!r}, expected one of {_DETECTOR_NAMES}"
                )
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ConfigurationError(f"seed: must be an unsigned 64-bit integer, got {self.seed!r}")
        plan = self.modulation_plan()  # raises on bad orders / length
        if "ml" in self.detectors and plan.product_alphabet_size() > baselines.ML_ENUMERATION_CAP:
            raise ConfigurationError(
                f"detectors: ml requires product alphabet <= {baselines.ML_ENUMERATION_CAP}, "
                f"got {plan.product_alphabet_size()}"
            )

    def modulation_plan(self) -> ModulationPlan:
        if isinstance(self.modulation, int):
            return ModulationPlan.uniform(make_qam(self.modulation), self.n_users)
        orders = tuple(self.modulation)
        if len(orders) != self.n_users:
            raise ConfigurationError(
                f"modulation: per-user list has length {len(orders)}, expected {self.n_users}"
            )
        return ModulationPlan(tuple(make_qam(order) for order in orders))


@dataclass(frozen=True)
class Row:
    """One (SNR point, detector) line of a sweep."""

    snr_db: float
    detector: str
    params_digest: str
    num_symbols: int
    num_errors: int
    ser: float
    wall_time_seconds: float


@dataclass(frozen=True)
class SweepResult:
    """All rows of one experiment plus a digest of the shared instances."""

    rows: tuple[Row, ...]
    instances_digest: str


def detector_digest(name: str, langevin_cfg: LangevinConfig | None = None) -> str:
    """Short stable digest of a detector's identity and parameters."""
    if name == "langevin":
        assert langevin_cfg is not None
        payload = name + repr(
            (
                langevin_cfg.levels,
                langevin_cfg.iters_per_level,
                langevin_cfg.epsilon,
                langevin_cfg.tau,
                langevin_cfg.trajectories,
                langevin_cfg.sigma_first,
                langevin_cfg.sigma_last,
                langevin_cfg.spacing,
            )
        )
    else:
        payload = name
    return hashlib.sha256(payload.encode()).hexdigest()[:12]


def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


def _draw_channel(cfg: ExperimentConfig, rng: np.random.Generator) -> np.ndarray:
    if cfg.channel == "kronecker":
        return kronecker_channel(cfg.n_rx, cfg.n_users, cfg.rho, rng)
    return rayleigh_channel(cfg.n_rx, cfg.n_users, rng)


def _run_one_detector(name, system, plan, langevin_cfg, traj_seed):
    if name == "zf":
        return baselines.zf_detect(
            system.y, system.H, plan, svd=(system.U, system.s, system.V)
        )
    if name == "mmse":
        return baselines.mmse_detect(system.y, system.H, system.sigma0, plan)
    if name == "ml":
        return baselines.ml_exhaustive(system.y, system.H, plan)
    if name == "langevin":
        return detect_system(system, langevin_cfg, plan, traj_seed).symbols
    raise ConfigurationError(f"detectors: unknown detector {name!r}")


def _trial_task(cfg: ExperimentConfig, snr_index: int, trial_index: int):
    """Evaluate every configured detector on the shared instances of one
    channel realization. Returns per-detector (errors, symbols, wall time)
    and a digest of the instances seen."""
    plan = cfg.modulation_plan()
    snr_db = cfg.snr_db[snr_index]
    sigma0 = sigma0_from_snr(10.0 ** (snr_db / 10.0), cfg.n_rx, cfg.n_users)
    hc = _draw_channel(cfg, _stream(cfg.seed, snr_index, trial_index, _PURPOSE_CHANNEL))

    tallies = {name: [0, 0, 0.0] for name in cfg.detectors}
    digest = hashlib.sha256()
    for v in range(cfg.vectors_per_channel):
        sent = sample_symbols(
            plan, _stream(cfg.seed, snr_index, trial_index, _PURPOSE_SYMBOLS, v)
        )
        rng_noise = _stream(cfg.seed, snr_index, trial_index, _PURPOSE_NOISE, v)
        # Paired evaluation: one (y, H, sigma0) per vector, shared verbatim.
        y = transmit(real_embedding(hc), sent, sigma0, rng_noise)
        system = build_real_system(hc, y, sigma0)
        digest.update(system.y.tobytes())
        digest.update(system.H.tobytes())
        digest.update(struct.pack("<d", sigma0))
        for name in cfg.detectors:
            traj_seed = np.random.SeedSequence(
                cfg.seed, spawn_key=(snr_index, trial_index, _PURPOSE_TRAJECTORY, v)
            )
            start = time.perf_counter()
            estimate = _run_one_detector(name, system, plan, cfg.langevin, traj_seed)
            elapsed = time.perf_counter() - start
            count = symbol_error_rate(estimate.per_user, sent.per_user)
            tallies[name][0] += count.num_errors
            tallies[name][1] += count.num_symbols
            tallies[name][2] += elapsed
    return snr_index, trial_index, tallies, digest.hexdigest()


def _trial_worker(args):
    return _trial_task(*args)


def run_sweep(cfg: ExperimentConfig, workers: int = 1) -> SweepResult:
    """Run the full (SNR x trials) grid and aggregate per-detector tallies.

    All detectors of one trial see bit-identical (y, H, sigma0). With
    workers > 1 the trials are distributed over worker processes; the
    aggregation is an order-independent reduction, so the result does not
    depend on the degree of parallelism.
    """
    cfg.validate()
    tasks = [
        (cfg, si, ti) for si in range(len(cfg.snr_db)) for ti in range(cfg.trials)
    ]
    if workers == 1:
        outcomes = [_trial_task(*task) for task in tasks]
    else:
        chunk = max(1, len(tasks) // (workers * 8))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_trial_worker, tasks, chunksize=chunk))

    merged: dict[tuple[int, str], list] = {}
    hashes: dict[tuple[int, int], str] = {}
    for snr_index, trial_index, tallies, trial_hash in outcomes:
        hashes[(snr_index, trial_index)] = trial_hash
        for name, (errors, symbols, wall) in tallies.items():
            cell = merged.setdefault((snr_index, name), [0, 0, 0.0])
            cell[0] += errors
            cell[1] += symbols
            cell[2] += wall

    rows = []
    for (snr_index, name), (errors, symbols, wall) in merged.items():
        rows.append(
            Row(
                snr_db=float(cfg.snr_db[snr_index]),
                detector=name,
                params_digest=detector_digest(name, cfg.langevin),
                num_symbols=symbols,
                num_errors=errors,
                ser=errors / symbols,
                wall_time_seconds=wall,
            )
        )
    digest = hashlib.sha256()
    for key in sorted(hashes):
        digest.update(hashes[key].encode())
    return SweepResult(rows=tuple(rows), instances_digest=digest.hexdigest())


def run_ablation(
    cfg: ExperimentConfig, axis: str, values, workers: int = 1
) -> SweepResult:
    """One sweep per axis value with every other parameter held at cfg.

    Axis is one of 'levels', 'trajectories', 'tau'. The Langevin rows of the
    individual sweeps are distinguished by params_digest. Baseline detectors
    do not depend on the axis, so they are evaluated in the first sweep only.
    """
    if axis not in _ABLATION_AXES:
        raise ConfigurationError(
            f"axis: unknown ablation axis {axis!r}, expected one of {sorted(_ABLATION_AXES)}"
        )
    values = list(values)
    if not values:
        raise ConfigurationError("values: ablation needs at least one value")
    if "langevin" not in cfg.detectors:
        raise ConfigurationError("detectors: ablation requires the langevin detector")

    rows: list[Row] = []
    digest = None
    for i, value in enumerate(values):
        langevin_cfg = cfg.langevin.with_overrides(**{_ABLATION_AXES[axis]: value})
        detectors = cfg.detectors if i == 0 else ("langevin",)
        sweep_cfg = replace(cfg, langevin=langevin_cfg, detectors=detectors)
        result = run_sweep(sweep_cfg, workers=workers)
        rows.extend(result.rows)
        if digest is None:
            digest = result.instances_digest
    assert digest is not None
    return SweepResult(rows=tuple(rows), instances_digest=digest)


def _format_float(x: float) -> str:
    return f"{x:.17g}"


def write_csv(result: SweepResult, path) -> None:
    """Write rows as CSV, sorted by (snr_db, detector, params_digest), floats
    at 17 significant digits, LF newlines."""
    ordered = sorted(
        result.rows, key=lambda r: (r.snr_db, r.detector, r.params_digest)
    )
    lines = [CSV_HEADER]
    for r in ordered:
        lines.append(
            ",".join(
                (
                    _format_float(r.snr_db),
                    r.detector,
                    r.params_digest,
                    str(r.num_symbols),
                    str(r.num_errors),
                    _format_float(r.ser),
                    _format_float(r.wall_time_seconds),
                )
            )
        )
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def read_csv(path) -> list[Row]:
    """Parse a CSV written by write_csv back into rows."""
    with open(path) as fh:
        lines = [line.rstrip("\n") for line in fh if line.strip()]
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError(f"{path}: missing or unexpected header")
    rows = []
    for line in lines[1:]:
        cells = line.split(",")
        if len(cells) != 7:
            raise ValueError(f"{path}: expected 7 columns, got {len(cells)}")
        rows.append(
            Row(
                snr_db=float(cells[0]),
                detector=cells[1],
                params_digest=cells[2],
                num_symbols=int(cells[3]),
                num_errors=int(cells[4]),
                ser=float(cells[5]),
                wall_time_seconds=float(cells[6]),
            )
        )
    return rows


_CONFIG_KEYS = {
    "n_rx": int,
    "n_users": int,
    "channel": str,
    "rho": float,
    "modulation": None,
    "snr_db": None,
    "trials": int,
    "detectors": None,
    "seed": int,
    "output_path": str,
    "vectors_per_channel": int,
    "langevin_levels": int,
    "langevin_iters_per_level": int,
    "langevin_epsilon": float,
    "langevin_tau": float,
    "langevin_trajectories": int,
    "langevin_sigma_first": float,
    "langevin_sigma_last": float,
    "langevin_spacing": str,
}

_REQUIRED_KEYS = ("n_rx", "n_users", "snr_db", "trials")


def load_config(path) -> ExperimentConfig:
    """Read a flat key=value (TOML) experiment file. Unknown keys are errors."""
    try:
        import tomllib  # Python >= 3.11
    except ModuleNotFoundError:  # pragma: no cover - version-dependent import
        import tomli as tomllib

    with open(path, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigurationError(f"{path}: {exc}") from exc

    for key in raw:
        if key not in _CONFIG_KEYS:
            raise ConfigurationError(f"{path}: unknown config key {key!r}")
    for key in _REQUIRED_KEYS:
        if key not in raw:
            raise ConfigurationError(f"{path}: missing required key {key!r}")

    def coerce(key, value, kind):
        if kind is float and isinstance(value, int):
            value = float(value)
        if kind is not None and not isinstance(value, kind):
            raise ConfigurationError(
                f"{path}: key {key!r} expects {kind.__name__}, got {type(value).__name__}"
            )
        return value

    kwargs = {}
    langevin_kwargs = {}
    for key, value in raw.items():
        kind = _CONFIG_KEYS[key]
        if key == "snr_db":
            seq = value if isinstance(value, list) else [value]
            kwargs["snr_db"] = tuple(float(v) for v in seq)
        elif key == "modulation":
            if isinstance(value, list):
                kwargs["modulation"] = tuple(int(v) for v in value)
            else:
                kwargs["modulation"] = coerce(key, value, int)
        elif key == "detectors":
            if not isinstance(value, list):
                raise ConfigurationError(f"{path}: key 'detectors' expects a list")
            kwargs["detectors"] = tuple(str(v) for v in value)
        elif key.startswith("langevin_"):
            langevin_kwargs[key.removeprefix("langevin_")] = coerce(key, value, kind)
        else:
            kwargs[key] = coerce(key, value, kind)

    kwargs["langevin"] = LangevinConfig(**langevin_kwargs)
    cfg = ExperimentConfig(**kwargs)
    cfg.validate()
    return cfg
