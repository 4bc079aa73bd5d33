"""Annealed Langevin symbol detector.

The sampler runs in the spectral domain chi = V^T x of the real-embedded
system y = Hx + z, H = U diag(s) V^T. Across a ladder of decreasing noise
levels sigma_1 > ... > sigma_L it follows the score of the smoothed posterior
with per-entry diagonal step sizes, then projects the final sample onto the
constellation. M independent trajectories feed a residual-argmin selection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .channel import RealSystem, build_real_system
from .constellation import (
    ModulationPlan,
    SymbolVector,
    conditional_mean,
    embed_complex,
    nearest_points,
)
from .errors import ConfigurationError, DetectorError, TrajectoryDivergenceError

# Entries of the spectral noise covariance |sigma0^2 - sigma_l^2 s_j^2| below
# this are treated as zero by the pseudo-inverse.
PINV_THRESHOLD = 1e-12

# A trajectory whose iterate exceeds this magnitude cannot recover (the
# constellation is bounded by ~1); it is aborted and dropped.
DIVERGENCE_LIMIT = 1e3


@dataclass(frozen=True, eq=False)
class NoiseSchedule:
    """Strictly decreasing annealing levels sigma_1 > ... > sigma_L > 0."""

    sigmas: np.ndarray

    def __post_init__(self):
        sig = np.asarray(self.sigmas, dtype=np.float64)
        if sig.ndim != 1 or sig.size == 0:
            raise ConfigurationError("schedule needs a 1-D nonempty sigma list")
        if not np.all(sig > 0):
            raise ConfigurationError("schedule sigmas must be positive")
        if sig.size > 1 and not np.all(np.diff(sig) < 0):
            raise ConfigurationError("schedule sigmas must be strictly decreasing")
        sig.setflags(write=False)
        object.__setattr__(self, "sigmas", sig)

    @property
    def levels(self) -> int:
        return int(self.sigmas.size)


def geometric_schedule(
    sigma_first: float, sigma_last: float, levels: int
) -> NoiseSchedule:
    """Geometric ladder sigma_l = sigma_1 (sigma_L/sigma_1)^((l-1)/(L-1)).

    Endpoints are reproduced exactly; the ratio of consecutive levels is
    constant.
    """
    if levels < 2:
        raise ConfigurationError(f"geometric schedule needs >= 2 levels, got {levels}")
    if not sigma_first > sigma_last > 0:
        raise ConfigurationError(
            f"need sigma_first > sigma_last > 0, got {sigma_first}, {sigma_last}"
        )
    exponents = np.arange(levels, dtype=np.float64) / (levels - 1)
    sig = sigma_first * (sigma_last / sigma_first) ** exponents
    sig[0] = sigma_first
    sig[-1] = sigma_last
    return NoiseSchedule(sig)


def linear_schedule(sigma_first: float, sigma_last: float, levels: int) -> NoiseSchedule:
    """Evenly spaced ladder between the same endpoints."""
    if levels < 2:
        raise ConfigurationError(f"linear schedule needs >= 2 levels, got {levels}")
    if not sigma_first > sigma_last > 0:
        raise ConfigurationError(
            f"need sigma_first > sigma_last > 0, got {sigma_first}, {sigma_last}"
        )
    return NoiseSchedule(np.linspace(sigma_first, sigma_last, levels))


@dataclass(frozen=True)
class LangevinConfig:
    """All detector knobs: ladder shape, inner iterations, step, temperature,
    trajectory count."""

    levels: int = 20
    iters_per_level: int = 70
    epsilon: float = 3e-5
    tau: float = 0.5
    trajectories: int = 20
    sigma_first: float = 1.0
    sigma_last: float = 0.01
    spacing: str = "geometric"

    def __post_init__(self):
        for field_name in ("levels", "iters_per_level", "trajectories"):
            if getattr(self, field_name) < 1:
                raise ConfigurationError(f"{field_name} must be >= 1")
        if self.epsilon <= 0:
            raise ConfigurationError("epsilon must be positive")
        # tau = 0 is allowed: it degenerates to deterministic drift ascent.
        if self.tau < 0:
            raise ConfigurationError("tau must be nonnegative")
        if not self.sigma_first > self.sigma_last > 0:
            raise ConfigurationError("need sigma_first > sigma_last > 0")
        if self.spacing not in ("geometric", "linear"):
            raise ConfigurationError(f"unknown schedule spacing {self.spacing!r}")

    def with_overrides(self, **kwargs) -> "LangevinConfig":
        return replace(self, **kwargs)


def make_schedule(config: LangevinConfig) -> NoiseSchedule:
    """Build the config's annealing ladder (single level degenerates to
    sigma_last)."""
    if config.levels == 1:
        return NoiseSchedule(np.asarray([config.sigma_last]))
    builder = geometric_schedule if config.spacing == "geometric" else linear_schedule
    return builder(config.sigma_first, config.sigma_last, config.levels)


def step_matrix(
    level_index: int,
    schedule: NoiseSchedule,
    s: np.ndarray,
    sigma0: float,
    epsilon: float,
) -> np.ndarray:
    """Diagonal of the per-level step matrix Lambda_l (0-based level index).

        [Lambda_l]_jj = (eps sig_l^2 / sig_L^2) (1 - sig_l^2 s_j^2 / sigma0^2)
                                                        if sig_l s_j <= sigma0
                        (eps / sig_L^2) (sig_l^2 - sigma0^2 / s_j^2)
                                                        otherwise.

    Both branches vanish at the crossover sig_l s_j = sigma0, and s_j = 0
    lands in the first branch with value eps sig_l^2 / sig_L^2. The result is
    clamped at 0 to absorb last-ulp rounding below the boundary.
    """
    s = np.asarray(s, dtype=np.float64)
    sig_l = float(schedule.sigmas[level_index])
    sig_last = float(schedule.sigmas[-1])
    base = epsilon / (sig_last * sig_last)
    sig_l2 = sig_l * sig_l
    sigma0_2 = sigma0 * sigma0
    with np.errstate(divide="ignore", invalid="ignore"):
        first = base * sig_l2 * (1.0 - sig_l2 * s * s / sigma0_2)
        second = base * (sig_l2 - sigma0_2 / (s * s))
    first = np.where(s == 0.0, base * sig_l2, first)
    lam = np.where(sig_l * s <= sigma0, first, second)
    return np.maximum(lam, 0.0)


def _likelihood_coef(s: np.ndarray, sigma0: float, sigma_l: float) -> np.ndarray:
    """Pseudo-inverse weighting s_j / |sigma0^2 - sigma_l^2 s_j^2| with
    degenerate entries zeroed."""
    denom = np.abs(sigma0 * sigma0 - sigma_l * sigma_l * s * s)
    ok = denom >= PINV_THRESHOLD
    return np.where(ok, s, 0.0) / np.where(ok, denom, 1.0)


def likelihood_score(
    chi: np.ndarray, system: RealSystem, sigma_l: float
) -> np.ndarray:
    """Score of the likelihood in the spectral domain.

    Elementwise s_j (eta_j - s_j chi_j) / |sigma0^2 - sigma_l^2 s_j^2|; the
    pseudo-inverse zeroes entries whose covariance magnitude falls below
    PINV_THRESHOLD. Accepts chi of shape (..., 2*N_u).
    """
    chi = np.asarray(chi, dtype=np.float64)
    coef = _likelihood_coef(system.s, system.sigma0, sigma_l)
    return coef * (system.eta - system.s * chi)


def _prior_mask(s: np.ndarray, sigma0: float, sigma_l: float) -> np.ndarray:
    """1.0 where the smoothed-prior term enters the posterior score."""
    return ((s == 0.0) | (sigma0 >= sigma_l * s)).astype(np.float64)


def posterior_score(
    chi: np.ndarray, system: RealSystem, sigma_l: float, plan: ModulationPlan
) -> np.ndarray:
    """Case-wise score of the smoothed posterior, per spectral entry j:

        sigma0 >= sigma_l s_j : likelihood + rotated prior score
        sigma0 <  sigma_l s_j : likelihood only (prior negligible)
        s_j = 0               : rotated prior only (eta_j uninformative)

    The prior score is evaluated in symbol space at x~ = V chi and rotated
    back by V^T. Accepts chi of shape (..., 2*N_u).
    """
    chi = np.asarray(chi, dtype=np.float64)
    lik = likelihood_score(chi, system, sigma_l)
    x_tilde = chi @ system.V.T
    cm = conditional_mean(x_tilde, sigma_l, plan)
    prior_sym = (cm - x_tilde) / (sigma_l * sigma_l)
    prior_spec = prior_sym @ system.V
    s = system.s
    with_prior = lik + prior_spec
    return np.where(
        s == 0.0, prior_spec, np.where(system.sigma0 >= sigma_l * s, with_prior, lik)
    )


def langevin_step(
    chi: np.ndarray, lam: np.ndarray, score: np.ndarray, tau: float, w: np.ndarray
) -> np.ndarray:
    """One update chi + Lambda score + sqrt(2 Lambda tau) w with the diagonal
    matrix square root applied elementwise.

    The noise term is evaluated as sqrt(tau) * (sqrt(2 Lambda) w), so a
    tau != 1 sequence is bit-for-bit the tau = 1 noise summand scaled by
    sqrt(tau) (the instrumented-replay temperature contract).
    """
    return chi + lam * score + math.sqrt(tau) * (np.sqrt(2.0 * lam) * w)


def _draw_init(rng: np.random.Generator, dim: int) -> np.ndarray:
    """Spectral-domain initialization, uniform on [-1, 1]^dim."""
    return rng.uniform(-1.0, 1.0, dim)


def _draw_noise(rng: np.random.Generator, steps: int, dim: int) -> np.ndarray:
    """All w_t draws of one trajectory, in iteration order."""
    return rng.standard_normal((steps, dim))


def _level_constants(
    system: RealSystem, config: LangevinConfig, schedule: NoiseSchedule
):
    """Per-level constants of the dynamic: step diagonal, its noise square
    root, likelihood coefficient, and prior-inclusion mask."""
    dim = 2 * system.n_users
    lam_levels = np.empty((config.levels, dim))
    sqrt2lam_levels = np.empty((config.levels, dim))
    lik_coef_levels = np.empty((config.levels, dim))
    prior_mask_levels = np.empty((config.levels, dim))
    for li in range(config.levels):
        sig = float(schedule.sigmas[li])
        lam = step_matrix(li, schedule, system.s, system.sigma0, config.epsilon)
        lam_levels[li] = lam
        sqrt2lam_levels[li] = np.sqrt(2.0 * lam)
        lik_coef_levels[li] = _likelihood_coef(system.s, system.sigma0, sig)
        prior_mask_levels[li] = _prior_mask(system.s, system.sigma0, sig)
    return lam_levels, sqrt2lam_levels, lik_coef_levels, prior_mask_levels


def _run_batch(
    system: RealSystem,
    config: LangevinConfig,
    plan: ModulationPlan,
    rngs: list[np.random.Generator],
):
    """Run len(rngs) trajectories in lockstep through the compiled kernel.

    Each trajectory consumes only its own stream (init uniforms, then one
    normal block per iteration) and its math is a serial per-row loop, so
    results are bit-identical to sequential single-trajectory runs.

    Returns (final chi (B, 2N_u), alive mask (B,), failures {b: (level, t)})
    with 1-based levels and 0-based iterations in the failure records.
    """
    from ._kernels import _anneal_batch, pack_plan

    if plan.n_users != system.n_users:
        raise ValueError(
            f"plan has {plan.n_users} users, system expects {system.n_users}"
        )
    schedule = make_schedule(config)
    dim = 2 * system.n_users
    steps = config.levels * config.iters_per_level
    chi = np.stack([_draw_init(rng, dim) for rng in rngs])
    noise = np.stack([_draw_noise(rng, steps, dim) for rng in rngs])
    batch = chi.shape[0]
    alive = np.ones(batch, dtype=bool)
    fail_level = np.full(batch, -1, dtype=np.int64)
    fail_iter = np.full(batch, -1, dtype=np.int64)

    lam_l, sqrt2lam_l, lik_coef_l, prior_mask_l = _level_constants(
        system, config, schedule
    )
    pts_re, pts_im, pts_k = pack_plan(plan)
    _anneal_batch(
        chi,
        noise,
        np.ascontiguousarray(system.V.T),
        np.ascontiguousarray(system.V),
        system.eta,
        system.s,
        lam_l,
        sqrt2lam_l,
        lik_coef_l,
        prior_mask_l,
        schedule.sigmas,
        config.iters_per_level,
        math.sqrt(config.tau),
        pts_re,
        pts_im,
        pts_k,
        DIVERGENCE_LIMIT,
        alive,
        fail_level,
        fail_iter,
    )
    failures = {
        int(b): (int(fail_level[b]), int(fail_iter[b]))
        for b in np.nonzero(~alive)[0]
    }
    return chi, alive, failures


def run_trajectory(
    system: RealSystem,
    config: LangevinConfig,
    plan: ModulationPlan,
    rng: np.random.Generator,
) -> SymbolVector:
    """One full annealed-Langevin pass, projected onto the constellation.

    Raises TrajectoryDivergenceError (with 1-based level, 0-based iteration)
    if the iterate leaves the recoverable region.
    """
    chi, alive, failures = _run_batch(system, config, plan, [rng])
    if not alive[0]:
        level, iteration = failures[0]
        raise TrajectoryDivergenceError(level, iteration)
    x_tilde = chi[0] @ system.V.T
    return SymbolVector(nearest_points(x_tilde, plan))


@dataclass(frozen=True, eq=False)
class DetectionResult:
    """Outcome of one detect call.

    `symbols` is the residual-argmin winner among the surviving trajectory
    candidates; `candidates`/`residuals` cover all M trajectories (diverged
    ones carry +inf residual and appear in `failures`).
    """

    symbols: SymbolVector
    residual: float
    best_index: int
    candidates: np.ndarray
    residuals: np.ndarray
    failures: dict[int, tuple[int, int]]


def detect_system(
    system: RealSystem,
    config: LangevinConfig,
    plan: ModulationPlan,
    seed,
) -> DetectionResult:
    """Run M independent trajectories on a prebuilt system and keep the
    candidate minimizing ||y - H x||^2 (ties: lowest trajectory index).

    `seed` is an int or numpy SeedSequence; trajectory m uses the m-th
    spawned child stream, so results do not depend on execution order.
    """
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    rngs = [np.random.default_rng(child) for child in ss.spawn(config.trajectories)]
    chi, alive, failures = _run_batch(system, config, plan, rngs)
    if not alive.any():
        raise DetectorError(
            f"all {config.trajectories} trajectories diverged; first failure "
            f"(level, iteration) = {failures[0]}"
        )
    candidates = nearest_points(chi @ system.V.T, plan)
    cand_real = embed_complex(candidates)
    diff = system.y - cand_real @ system.H.T
    residuals = np.einsum("ij,ij->i", diff, diff)
    residuals[~alive] = np.inf
    best = int(np.argmin(residuals))
    return DetectionResult(
        symbols=SymbolVector(candidates[best]),
        residual=float(residuals[best]),
        best_index=best,
        candidates=candidates,
        residuals=residuals,
        failures=failures,
    )


def detect(
    y: np.ndarray,
    hc: np.ndarray,
    sigma0: float,
    config: LangevinConfig,
    plan: ModulationPlan,
    seed,
) -> DetectionResult:
    """Full detector: build the real system (embedding + SVD) and run
    detect_system on it."""
    system = build_real_system(hc, y, sigma0)
    return detect_system(system, config, plan, seed)
