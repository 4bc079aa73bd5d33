"""Compiled inner loops for the annealed Langevin sampler.

The kernels process a batch of trajectories, but every trajectory's math is
a serial per-row loop: results are bit-identical whatever the batch
composition, which is what makes the batched detector equal to M sequential
single-trajectory runs. All per-level constants (step sizes, likelihood
coefficients, case masks, noise scales) are precomputed in numpy by the
public functions in langevin.py and passed in, so the kernels add no
formulas of their own beyond the mixture evaluation and the update line.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from .constellation import ModulationPlan


def pack_plan(plan: ModulationPlan) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-user point tables (re, im, count), padded to the largest order."""
    n = plan.n_users
    k_max = max(const.order for const in plan.per_user)
    pts_re = np.zeros((n, k_max))
    pts_im = np.zeros((n, k_max))
    pts_k = np.zeros(n, dtype=np.int64)
    for j, const in enumerate(plan.per_user):
        pts_re[j, : const.order] = const.points.real
        pts_im[j, : const.order] = const.points.imag
        pts_k[j] = const.order
    return pts_re, pts_im, pts_k


@njit(cache=True)
def _score_batch(
    chi, vt, v, eta, s_vals, lik_coef, prior_mask, sig, pts_re, pts_im, pts_k, scratch
):
    """Case-wise posterior score for a (B, 2n) batch at one noise level.

    Mirrors posterior_score(): likelihood coefficient and prior mask arrive
    precomputed; the smoothed-prior term is the elementwise Gaussian-mixture
    posterior mean with max-log subtraction, evaluated at x~ = V chi and
    rotated back by V^T.
    """
    b_size, n2 = chi.shape
    n = n2 // 2
    sig2 = sig * sig
    inv_two_var = 1.0 / (2.0 * sig2)
    xt = np.dot(chi, vt)
    prior_sym = np.empty_like(xt)
    for b in range(b_size):
        for j in range(n):
            xr = xt[b, j]
            xi = xt[b, j + n]
            count = pts_k[j]
            emax = -np.inf
            for k in range(count):
                dr = xr - pts_re[j, k]
                di = xi - pts_im[j, k]
                e = -(dr * dr + di * di) * inv_two_var
                scratch[k] = e
                if e > emax:
                    emax = e
            z = 0.0
            mr = 0.0
            mi = 0.0
            for k in range(count):
                d = scratch[k] - emax
                if d < -744.0:
                    # exp(d) underflows past the 1e-300 flush floor anyway;
                    # skipping keeps results identical and avoids subnormals.
                    continue
                w = math.exp(d)
                if w < 1e-300:
                    w = 0.0
                z += w
                mr += w * pts_re[j, k]
                mi += w * pts_im[j, k]
            prior_sym[b, j] = (mr / z - xr) / sig2
            prior_sym[b, j + n] = (mi / z - xi) / sig2
    prior_spec = np.dot(prior_sym, v)
    score = np.empty_like(chi)
    for b in range(b_size):
        for i in range(n2):
            lik = lik_coef[i] * (eta[i] - s_vals[i] * chi[b, i])
            score[b, i] = lik + prior_mask[i] * prior_spec[b, i]
    return score


@njit(cache=True)
def _anneal_batch(
    chi,
    noise,
    vt,
    v,
    eta,
    s_vals,
    lam_levels,
    sqrt2lam_levels,
    lik_coef_levels,
    prior_mask_levels,
    sigmas,
    iters_per_level,
    sqrt_tau,
    pts_re,
    pts_im,
    pts_k,
    limit,
    alive,
    fail_level,
    fail_iter,
):
    """Full annealing loop over all levels and iterations, in place.

    The update is chi + lam*score + sqrt_tau*(sqrt(2 lam)*w), the same
    evaluation order as langevin_step(). Rows whose iterate leaves
    [-limit, limit] are marked dead (recording 1-based level, 0-based
    iteration once) and reset to zero so their arithmetic stays finite; they
    keep consuming their pre-drawn noise but are never returned as
    candidates.
    """
    b_size, n2 = chi.shape
    levels = sigmas.shape[0]
    scratch = np.empty(pts_re.shape[1])
    step = 0
    for li in range(levels):
        sig = sigmas[li]
        lam = lam_levels[li]
        sqrt2lam = sqrt2lam_levels[li]
        lik_coef = lik_coef_levels[li]
        prior_mask = prior_mask_levels[li]
        for t in range(iters_per_level):
            score = _score_batch(
                chi, vt, v, eta, s_vals, lik_coef, prior_mask, sig,
                pts_re, pts_im, pts_k, scratch,
            )
            for b in range(b_size):
                bad = False
                for i in range(n2):
                    val = (
                        chi[b, i]
                        + lam[i] * score[b, i]
                        + sqrt_tau * (sqrt2lam[i] * noise[b, step, i])
                    )
                    chi[b, i] = val
                    if val > limit or val < -limit or val != val:
                        bad = True
                if bad:
                    if alive[b]:
                        alive[b] = False
                        fail_level[b] = li + 1
                        fail_iter[b] = t
                    for i in range(n2):
                        chi[b, i] = 0.0
            step += 1
