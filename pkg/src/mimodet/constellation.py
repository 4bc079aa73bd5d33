"""QAM alphabets, per-user modulation plans, symbol sampling, hard projection,
and the smoothed-prior score used by the annealed Langevin detector.

Real embeddings follow the [Re; Im] stacking convention: a complex vector of
n user symbols maps to a real vector of length 2n whose first half carries the
real parts and second half the imaginary parts. All mixture computations treat
each user's (Re, Im) pair as one joint 2-D point, which is what makes mixed
per-user alphabets work.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigurationError

SUPPORTED_QAM_ORDERS = (4, 16, 64)

# |mean power - 1| must stay below this for a valid alphabet.
POWER_TOLERANCE = 1e-12

# Softmax weights below this are flushed to zero (sigma=0.01 drives raw
# exponents to ~ -1e4, deep into subnormal territory).
_WEIGHT_FLOOR = 1e-300


@dataclass(frozen=True, eq=False)
class Constellation:
    """Finite complex alphabet with unit average power and distinct points."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.complex128)
        if pts.ndim != 1 or pts.size == 0:
            raise ConfigurationError("constellation needs a 1-D nonempty point list")
        power = float(np.mean(np.abs(pts) ** 2))
        if abs(power - 1.0) > POWER_TOLERANCE:
            raise ConfigurationError(
                f"constellation mean power is {power!r}, expected 1 within {POWER_TOLERANCE}"
            )
        if len(np.unique(pts)) != pts.size:
            raise ConfigurationError("constellation points must be distinct")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def order(self) -> int:
        return int(self.points.size)

    @classmethod
    def from_points(cls, points) -> "Constellation":
        """Build from an arbitrary point list, rescaling to unit average power."""
        pts = np.asarray(points, dtype=np.complex128)
        power = np.mean(np.abs(pts) ** 2)
        if power <= 0:
            raise ConfigurationError("cannot normalize an all-zero point list")
        return cls(pts / np.sqrt(power))


@lru_cache(maxsize=None)
def make_qam(order: int) -> Constellation:
    """Square QAM alphabet {±1, ±3, ...}² scaled to unit average power.

    Points are enumerated row-major over ascending (Re, Im) levels, which
    fixes the index order used by projection tie-breaks.
    """
    if order not in SUPPORTED_QAM_ORDERS:
        raise ConfigurationError(
            f"unsupported QAM order {order}; supported: {SUPPORTED_QAM_ORDERS}"
        )
    side = int(round(np.sqrt(order)))
    levels = np.arange(-(side - 1), side, 2, dtype=np.float64)
    re, im = np.meshgrid(levels, levels, indexing="ij")
    grid = (re + 1j * im).ravel()
    scale = np.sqrt(np.mean(np.abs(grid) ** 2))
    return Constellation(grid / scale)


@dataclass(frozen=True, eq=False)
class ModulationPlan:
    """Per-user constellation assignment for the N_u complex users."""

    per_user: tuple[Constellation, ...]

    def __post_init__(self):
        if len(self.per_user) == 0:
            raise ConfigurationError("modulation plan needs at least one user")
        object.__setattr__(self, "per_user", tuple(self.per_user))
        # Users sharing a Constellation instance are vectorized together.
        groups: list[tuple[Constellation, list[int]]] = []
        seen: dict[int, list[int]] = {}
        for j, const in enumerate(self.per_user):
            key = id(const)
            if key not in seen:
                seen[key] = []
                groups.append((const, seen[key]))
            seen[key].append(j)
        object.__setattr__(
            self,
            "_groups",
            tuple((c, np.asarray(idx, dtype=np.intp)) for c, idx in groups),
        )

    @property
    def n_users(self) -> int:
        return len(self.per_user)

    def groups(self) -> tuple[tuple[Constellation, np.ndarray], ...]:
        """(constellation, user-index array) pairs covering all users."""
        return self._groups

    def product_alphabet_size(self) -> int:
        size = 1
        for const in self.per_user:
            size *= const.order
        return size

    @classmethod
    def uniform(cls, constellation: Constellation, n_users: int) -> "ModulationPlan":
        return cls((constellation,) * n_users)


@dataclass(frozen=True, eq=False)
class SymbolVector:
    """Complex symbols for the N_u users plus their exact real embedding."""

    per_user: np.ndarray

    def __post_init__(self):
        sym = np.asarray(self.per_user, dtype=np.complex128)
        if sym.ndim != 1:
            raise ValueError("symbol vector must be 1-D")
        sym.setflags(write=False)
        object.__setattr__(self, "per_user", sym)

    @property
    def n_users(self) -> int:
        return int(self.per_user.size)

    @property
    def real(self) -> np.ndarray:
        """[Re(x); Im(x)] stacking, length 2*N_u."""
        return embed_complex(self.per_user)


def embed_complex(v: np.ndarray) -> np.ndarray:
    """Complex vector(s) (..., n) -> real embedding (..., 2n) as [Re; Im]."""
    v = np.asarray(v, dtype=np.complex128)
    return np.concatenate([v.real, v.imag], axis=-1)


def unembed_real(x: np.ndarray) -> np.ndarray:
    """Inverse of embed_complex: (..., 2n) real -> (..., n) complex."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] % 2 != 0:
        raise ValueError(f"real embedding length {x.shape[-1]} is odd")
    n = x.shape[-1] // 2
    return x[..., :n] + 1j * x[..., n:]


def sample_symbols(plan: ModulationPlan, rng: np.random.Generator) -> SymbolVector:
    """Draw one symbol per user, uniformly over that user's alphabet."""
    out = np.empty(plan.n_users, dtype=np.complex128)
    for j, const in enumerate(plan.per_user):
        out[j] = const.points[rng.integers(0, const.order)]
    return SymbolVector(out)


def nearest_points(x_cont: np.ndarray, plan: ModulationPlan) -> np.ndarray:
    """Per-user nearest constellation point of real-embedded input(s).

    Accepts (..., 2*N_u) and returns complex (..., N_u). Ties go to the
    lowest point index.
    """
    x = np.asarray(x_cont, dtype=np.float64)
    n = plan.n_users
    if x.shape[-1] != 2 * n:
        raise ValueError(
            f"expected real embedding of length {2 * n}, got {x.shape[-1]}"
        )
    out = np.empty(x.shape[:-1] + (n,), dtype=np.complex128)
    for const, idx in plan.groups():
        xr = x[..., idx, None]
        xi = x[..., idx + n, None]
        d2 = (xr - const.points.real) ** 2 + (xi - const.points.imag) ** 2
        out[..., idx] = const.points[np.argmin(d2, axis=-1)]
    return out


def project(x_cont: np.ndarray, plan: ModulationPlan) -> SymbolVector:
    """Hard projection of one real-embedded vector onto the plan's alphabet."""
    x = np.asarray(x_cont, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("project expects a single vector; see nearest_points")
    return SymbolVector(nearest_points(x, plan))


def conditional_mean(
    x_tilde: np.ndarray, sigma: float, plan: ModulationPlan
) -> np.ndarray:
    """Posterior-mean denoiser under the Gaussian-smoothed uniform prior.

    For each complex user j with observation x̃_j = (Re, Im),

        E_sigma[x_j | x̃_j] = (1/Z) * sum_k x_k * exp(-|x̃_j - x_k|^2 / (2 sigma^2))

    over the user's own alphabet. Weights are computed with max-log
    subtraction; anything below the representable floor is flushed to zero.
    Accepts (..., 2*N_u) and returns the matching real-embedded shape.
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    x = np.asarray(x_tilde, dtype=np.float64)
    n = plan.n_users
    if x.shape[-1] != 2 * n:
        raise ValueError(
            f"expected real embedding of length {2 * n}, got {x.shape[-1]}"
        )
    inv_two_var = 1.0 / (2.0 * sigma * sigma)
    out = np.empty_like(x)
    for const, idx in plan.groups():
        xr = x[..., idx, None]
        xi = x[..., idx + n, None]
        logw = -((xr - const.points.real) ** 2 + (xi - const.points.imag) ** 2)
        logw *= inv_two_var
        logw -= logw.max(axis=-1, keepdims=True)
        w = np.exp(logw)
        w[w < _WEIGHT_FLOOR] = 0.0
        z = w.sum(axis=-1)
        out[..., idx] = (w @ const.points.real) / z
        out[..., idx + n] = (w @ const.points.imag) / z
    return out


def prior_score(x_tilde: np.ndarray, sigma: float, plan: ModulationPlan) -> np.ndarray:
    """Score of the sigma-smoothed prior via the posterior-mean denoiser:
    (E_sigma[x | x̃] - x̃) / sigma^2."""
    x = np.asarray(x_tilde, dtype=np.float64)
    return (conditional_mean(x, sigma, plan) - x) / (sigma * sigma)


@dataclass(frozen=True)
class ErrorCount:
    """Symbol error tally: ser == num_errors / num_symbols exactly."""

    num_errors: int
    num_symbols: int

    @property
    def ser(self) -> float:
        return self.num_errors / self.num_symbols


def symbol_error_rate(est, truth) -> ErrorCount:
    """Fraction of complex user-symbols differing between two batches.

    Accepts arrays of complex symbols with matching shapes (any batch shape,
    last axis = users), or SymbolVector instances.
    """
    a = est.per_user if isinstance(est, SymbolVector) else np.asarray(est)
    b = truth.per_user if isinstance(truth, SymbolVector) else np.asarray(truth)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    errors = int(np.count_nonzero(a != b))
    return ErrorCount(num_errors=errors, num_symbols=int(a.size))
