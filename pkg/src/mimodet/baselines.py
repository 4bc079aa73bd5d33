"""Classical reference detectors: zero forcing, MMSE, and an exhaustive
maximum-likelihood oracle for small product alphabets."""

from __future__ import annotations

from enum import Enum

import numpy as np

from .constellation import ModulationPlan, SymbolVector, embed_complex, project
from .errors import DetectorError

# Exhaustive ML is only sane while the product alphabet stays enumerable;
# beyond this it exists only to waste time, not to validate anything.
ML_ENUMERATION_CAP = 1 << 20

_ML_CHUNK = 1 << 14

# Smallest singular value considered full rank for the ZF pseudo-inverse.
_RANK_TOLERANCE = 1e-10


class DetectorKind(str, Enum):
    ZF = "zf"
    MMSE = "mmse"
    ML_EXHAUSTIVE = "ml"
    LANGEVIN = "langevin"


def zf_detect(
    y: np.ndarray, h: np.ndarray, plan: ModulationPlan, svd=None
) -> SymbolVector:
    """Zero forcing: pseudo-inverse solve followed by hard projection.

    `svd` may carry an already-computed economy factorization (u, s, v) of h
    (v holding right singular vectors as columns) to avoid refactorizing.
    """
    y = np.asarray(y, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    if svd is None:
        u, s, vh = np.linalg.svd(h, full_matrices=False)
        v = vh.T
    else:
        u, s, v = svd
    if s[-1] <= _RANK_TOLERANCE:
        raise DetectorError(
            f"channel is rank deficient (smallest singular value {s[-1]:.3e})"
        )
    x = v @ ((u.T @ y) / s)
    return project(x, plan)


def mmse_detect(
    y: np.ndarray, h: np.ndarray, sigma0: float, plan: ModulationPlan
) -> SymbolVector:
    """Regularized least squares (H^T H + sigma0^2 I)^{-1} H^T y, projected."""
    if sigma0 < 0:
        raise ValueError(f"sigma0 must be nonnegative, got {sigma0}")
    y = np.asarray(y, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    gram = h.T @ h + (sigma0 * sigma0) * np.eye(h.shape[1])
    try:
        x = np.linalg.solve(gram, h.T @ y)
    except np.linalg.LinAlgError as exc:
        raise DetectorError(f"singular normal matrix: {exc}") from exc
    return project(x, plan)


def ml_exhaustive(y: np.ndarray, h: np.ndarray, plan: ModulationPlan) -> SymbolVector:
    """Exact argmin of ||y - Hx||^2 over the product alphabet by enumeration.

    Candidates are ordered lexicographically by per-user point index (user 0
    most significant); ties keep the first, i.e. lexicographically lowest,
    candidate.
    """
    y = np.asarray(y, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    total = plan.product_alphabet_size()
    if total > ML_ENUMERATION_CAP:
        raise DetectorError(
            f"product alphabet size {total} exceeds enumeration cap {ML_ENUMERATION_CAP}"
        )
    orders = np.asarray([const.order for const in plan.per_user])
    # strides[j] = product of orders after user j, so candidate c has
    # per-user index (c // strides[j]) % orders[j] in lexicographic order.
    strides = np.concatenate([np.cumprod(orders[::-1])[::-1][1:], [1]])
    points = [const.points for const in plan.per_user]

    best_value = np.inf
    best_candidate: np.ndarray | None = None
    for start in range(0, total, _ML_CHUNK):
        ids = np.arange(start, min(start + _ML_CHUNK, total))
        idx = (ids[:, None] // strides) % orders
        cand = np.empty(idx.shape, dtype=np.complex128)
        for j, pts in enumerate(points):
            cand[:, j] = pts[idx[:, j]]
        diff = y - embed_complex(cand) @ h.T
        values = np.einsum("ij,ij->i", diff, diff)
        k = int(np.argmin(values))
        if values[k] < best_value:
            best_value = float(values[k])
            best_candidate = cand[k]
    assert best_candidate is not None
    return SymbolVector(best_candidate)
