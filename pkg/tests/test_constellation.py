import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mimodet.constellation import (
    Constellation,
    ModulationPlan,
    SymbolVector,
    conditional_mean,
    embed_complex,
    make_qam,
    nearest_points,
    prior_score,
    project,
    sample_symbols,
    symbol_error_rate,
    unembed_real,
)
from mimodet.errors import ConfigurationError


def qam_plan(order, n_users):
    return ModulationPlan.uniform(make_qam(order), n_users)


# ---------------------------------------------------------------------------
# alphabets
# ---------------------------------------------------------------------------


def test_qpsk_points():
    c = make_qam(4)
    expected = {(-1 - 1j), (-1 + 1j), (1 - 1j), (1 + 1j)}
    got = set(np.round(c.points * np.sqrt(2)).astype(complex))
    assert got == expected
    assert np.allclose(np.abs(c.points.real), 1 / np.sqrt(2))
    assert np.allclose(np.abs(c.points.imag), 1 / np.sqrt(2))


def test_16qam_scale():
    # mean of {1, 9} per axis is 5, two axes -> power 10
    c = make_qam(16)
    grid = np.asarray(
        [a + 1j * b for a in (-3, -1, 1, 3) for b in (-3, -1, 1, 3)], dtype=complex
    )
    assert np.allclose(sorted(c.points, key=lambda z: (z.real, z.imag)),
                       sorted(grid / np.sqrt(10), key=lambda z: (z.real, z.imag)))


def test_64qam_scale_by_enumeration():
    # oracle: enumerate the odd-grid and compute its mean power directly
    levels = (-7, -5, -3, -1, 1, 3, 5, 7)
    oracle_power = np.mean([a * a + b * b for a in levels for b in levels])
    assert oracle_power == 42.0
    c = make_qam(64)
    grid = np.asarray([a + 1j * b for a in levels for b in levels], dtype=complex)
    assert np.allclose(sorted(c.points, key=lambda z: (z.real, z.imag)),
                       sorted(grid / np.sqrt(oracle_power),
                              key=lambda z: (z.real, z.imag)))


@pytest.mark.parametrize("order", [4, 16, 64])
def test_unit_power_invariant(order):
    c = make_qam(order)
    assert abs(np.mean(np.abs(c.points) ** 2) - 1.0) < 1e-12
    assert len(np.unique(c.points)) == order
    side = int(round(np.sqrt(order)))
    assert side * side == order


@pytest.mark.parametrize("order", [2, 8, 32, 128, 0, -4])
def test_unsupported_order(order):
    with pytest.raises(ConfigurationError):
        make_qam(order)


def test_unnormalized_points_rejected():
    with pytest.raises(ConfigurationError):
        Constellation(np.array([1 + 1j, -1 - 1j]))


def test_duplicate_points_rejected():
    p = (1 + 1j) / np.sqrt(2)
    with pytest.raises(ConfigurationError):
        Constellation(np.array([p, p]))


def test_from_points_normalizes():
    c = Constellation.from_points([3 + 0j, -3 + 0j, 0 + 3j, 0 - 3j])
    assert abs(np.mean(np.abs(c.points) ** 2) - 1.0) < 1e-12


# ---------------------------------------------------------------------------
# embedding, sampling
# ---------------------------------------------------------------------------


def test_embedding_round_trip():
    v = np.array([1 + 2j, -3 + 0.5j])
    x = embed_complex(v)
    assert np.array_equal(x, [1.0, -3.0, 2.0, 0.5])
    assert np.array_equal(unembed_real(x), v)


def test_symbol_vector_embedding_exact():
    sv = SymbolVector(np.array([0.3 - 0.7j, -1.1 + 0.2j]))
    assert np.array_equal(sv.real, [0.3, -1.1, -0.7, 0.2])


def test_sampling_uniform_frequencies():
    plan = qam_plan(4, 1)
    rng = np.random.default_rng(123)
    draws = np.array([sample_symbols(plan, rng).per_user[0] for _ in range(100_000)])
    for p in plan.per_user[0].points:
        freq = np.mean(draws == p)
        assert abs(freq - 0.25) < 0.01


def test_sampling_mixed_plan_membership():
    plan = ModulationPlan((make_qam(16), make_qam(64), make_qam(4)))
    rng = np.random.default_rng(5)
    for _ in range(200):
        sv = sample_symbols(plan, rng)
        for j, const in enumerate(plan.per_user):
            assert sv.per_user[j] in const.points


def test_sampling_deterministic():
    plan = qam_plan(16, 6)
    a = [sample_symbols(plan, np.random.default_rng(42)).per_user for _ in range(1)]
    b = [sample_symbols(plan, np.random.default_rng(42)).per_user for _ in range(1)]
    assert np.array_equal(a, b)


def test_empty_plan_rejected():
    with pytest.raises(ConfigurationError):
        ModulationPlan(())


# ---------------------------------------------------------------------------
# projection
# ---------------------------------------------------------------------------


def test_project_exact_point():
    plan = qam_plan(16, 3)
    rng = np.random.default_rng(0)
    sv = sample_symbols(plan, rng)
    assert np.array_equal(project(sv.real, plan).per_user, sv.per_user)


def test_project_nearest_quadrant():
    plan = qam_plan(4, 1)
    got = project(np.array([0.9 / np.sqrt(2), 0.6 / np.sqrt(2)]), plan)
    assert got.per_user[0] == (1 + 1j) / np.sqrt(2)


def test_project_tie_breaks_to_lowest_index():
    plan = qam_plan(16, 1)
    points = plan.per_user[0].points
    # midpoint between the first two points is equidistant from both
    mid = (points[0] + points[1]) / 2
    got = project(embed_complex(np.array([mid])), plan)
    assert got.per_user[0] == points[0]


def test_project_dimension_mismatch():
    plan = qam_plan(4, 2)
    with pytest.raises(ValueError):
        project(np.zeros(6), plan)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_project_idempotent_and_member(seed):
    plan = ModulationPlan((make_qam(4), make_qam(16), make_qam(64)))
    rng = np.random.default_rng(seed)
    x = rng.uniform(-2, 2, 2 * plan.n_users)
    once = project(x, plan)
    twice = project(once.real, plan)
    assert np.array_equal(once.per_user, twice.per_user)
    for j, const in enumerate(plan.per_user):
        assert once.per_user[j] in const.points


def test_nearest_points_batched_matches_single():
    plan = ModulationPlan((make_qam(16), make_qam(4)))
    rng = np.random.default_rng(9)
    batch = rng.uniform(-2, 2, (7, 4))
    got = nearest_points(batch, plan)
    for i in range(7):
        assert np.array_equal(got[i], project(batch[i], plan).per_user)


# ---------------------------------------------------------------------------
# denoiser and prior score
# ---------------------------------------------------------------------------


def test_conditional_mean_flat_limit():
    plan = qam_plan(16, 2)
    x = np.array([0.4, -0.2, 0.1, 0.9])
    out = conditional_mean(x, 1e6, plan)
    assert np.max(np.abs(out)) < 1e-6  # alphabet mean is 0


def test_conditional_mean_sharp_limit():
    plan = qam_plan(16, 1)
    p = plan.per_user[0].points[7]
    x = embed_complex(np.array([p])) + np.array([1e-6, -1e-6])
    out = conditional_mean(x, 1e-4, plan)
    assert np.max(np.abs(out - embed_complex(np.array([p])))) < 1e-8


def test_conditional_mean_qpsk_brute_force():
    # oracle: direct 4-term evaluation of the weighted mean
    plan = qam_plan(4, 1)
    pts = plan.per_user[0].points
    sigma = 0.5
    x = np.array([0.3, 0.1])
    w = np.array(
        [
            np.exp(-((0.3 - p.real) ** 2 + (0.1 - p.imag) ** 2) / (2 * sigma**2))
            for p in pts
        ]
    )
    expected = np.sum(w * pts) / np.sum(w)
    out = conditional_mean(x, sigma, plan)
    assert np.allclose(out, [expected.real, expected.imag], rtol=1e-12)


def test_conditional_mean_convex_hull():
    plan = ModulationPlan((make_qam(4), make_qam(64)))
    rng = np.random.default_rng(17)
    for sigma in (0.05, 0.3, 2.0):
        x = rng.uniform(-3, 3, 4)
        out = conditional_mean(x, sigma, plan)
        for j, const in enumerate(plan.per_user):
            assert const.points.real.min() - 1e-12 <= out[j] <= const.points.real.max() + 1e-12
            assert const.points.imag.min() - 1e-12 <= out[j + 2] <= const.points.imag.max() + 1e-12


def test_conditional_mean_monotone_sharpening():
    # inside a point's Voronoi cell the denoiser walks monotonically to it
    plan = qam_plan(16, 1)
    target = plan.per_user[0].points[5]
    x = embed_complex(np.array([target])) + np.array([0.05, -0.04])
    sigmas = np.geomspace(1.0, 0.01, 25)
    dists = []
    for sigma in sigmas:
        out = conditional_mean(x, sigma, plan)
        dists.append(np.linalg.norm(out - embed_complex(np.array([target]))))
    assert all(d2 <= d1 + 1e-12 for d1, d2 in zip(dists, dists[1:]))


def test_conditional_mean_rejects_bad_sigma():
    plan = qam_plan(4, 1)
    with pytest.raises(ValueError):
        conditional_mean(np.zeros(2), 0.0, plan)
    with pytest.raises(ValueError):
        conditional_mean(np.zeros(2), -1.0, plan)


def _mixture_logpdf(x, sigma, plan):
    """Analytic log-density of the sigma-smoothed uniform mixture (additive
    constants dropped); independent oracle for the prior score."""
    n = plan.n_users
    total = 0.0
    for j, const in enumerate(plan.per_user):
        d2 = (x[j] - const.points.real) ** 2 + (x[j + n] - const.points.imag) ** 2
        e = -d2 / (2 * sigma * sigma)
        m = np.max(e)
        total += m + np.log(np.sum(np.exp(e - m)))
    return total


def test_prior_score_zero_at_point():
    plan = qam_plan(16, 2)
    rng = np.random.default_rng(3)
    sv = sample_symbols(plan, rng)
    score = prior_score(sv.real, 0.02, plan)
    assert np.max(np.abs(score)) < 1e-9


def test_prior_score_matches_finite_differences():
    plan = ModulationPlan((make_qam(4), make_qam(16), make_qam(64)))
    rng = np.random.default_rng(2718)
    h = 1e-5
    worst = 0.0
    for _ in range(100):
        sigma = float(rng.uniform(0.01, 1.0))
        x = rng.uniform(-1.5, 1.5, 2 * plan.n_users)
        score = prior_score(x, sigma, plan)
        fd = np.empty_like(x)
        for i in range(x.size):
            xp = x.copy()
            xm = x.copy()
            xp[i] += h
            xm[i] -= h
            fd[i] = (
                _mixture_logpdf(xp, sigma, plan) - _mixture_logpdf(xm, sigma, plan)
            ) / (2 * h)
        rel = np.linalg.norm(fd - score) / np.linalg.norm(score)
        worst = max(worst, rel)
    assert worst < 1e-4, f"max relative FD error {worst}"


def test_prior_score_pure_function():
    plan = qam_plan(4, 3)
    x = np.random.default_rng(0).uniform(-1, 1, 6)
    a = prior_score(x, 0.3, plan)
    b = prior_score(x, 0.3, plan)
    assert np.array_equal(a, b)


# ---------------------------------------------------------------------------
# error counting
# ---------------------------------------------------------------------------


def test_ser_all_equal():
    a = np.array([[1 + 1j, -1 - 1j]])
    c = symbol_error_rate(a, a.copy())
    assert c.num_errors == 0 and c.ser == 0.0


def test_ser_all_differ():
    a = np.array([1 + 1j, -1 - 1j])
    c = symbol_error_rate(a, -a)
    assert c.num_errors == 2 and c.ser == 1.0


def test_ser_counts_exactly():
    truth = np.zeros((2, 16), dtype=complex)
    est = truth.copy()
    est[0, 3] = est[1, 7] = est[1, 9] = 1 + 1j
    c = symbol_error_rate(est, truth)
    assert (c.num_errors, c.num_symbols) == (3, 32)
    assert c.ser == 3 / 32


def test_ser_shape_mismatch():
    with pytest.raises(ValueError):
        symbol_error_rate(np.zeros(3, dtype=complex), np.zeros(4, dtype=complex))
