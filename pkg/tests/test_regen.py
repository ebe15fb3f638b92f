import math
from fractions import Fraction

import numpy as np
import pytest

from excursions import (
    CadlagPath, MCEstimate, RegenerativeSpec, SRWExcursionSampler, decompose, extract_big,
    height, hitting_time, length, synthesize,
)
from excursions.harness import EmpiricalLaw, ks_two_sample
from excursions.regen import (
    Accumulator, ExcursionSampler, _mc_small_cost, bm_cost, bm_laplace_g_height,
    bm_small_cost_height, check_h1, check_h2, check_h3, exact_laplace_g, g_epsilon_sample,
    g_samples, ito_spec, laplace_g_formula, laplace_g_geometric, laplace_g_limit, mc_laplace_g,
    overline_phi_bound, sandwich_check, srw_spec, stream, transfer_check,
)


# -- oracles ---------------------------------------------------------------------------


def ruin_by_backward_recursion(m: int) -> Fraction:
    """P(walk from 1 reaches m before 0), from h(x+1) = 2 h(x) - h(x-1) with exact rationals."""
    h = [Fraction(0), Fraction(1)]
    while len(h) <= m:
        h.append(2 * h[-1] - h[-2])
    return h[1] / h[m]


def absorbed_walk(K: int, s: float = 1.0, ceiling=None):
    """Start at 1, absorb at 0 (and above ``ceiling``): return (P(not absorbed by K), E[s^k; hit 0 first])."""
    size = K + 3 if ceiling is None else ceiling + 2
    p = np.zeros(size)
    p[1] = 1.0
    gen = 0.0
    for k in range(1, K + 1):
        q = np.zeros_like(p)
        q[1:] += 0.5 * p[:-1]
        q[:-1] += 0.5 * p[1:]
        gen += q[0] * s**k
        q[0] = 0.0
        if ceiling is not None:
            q[ceiling + 1:] = 0.0
        p = q
    return p.sum(), gen


class PointMass(ExcursionSampler):
    """Always the excursion ``{0 -> 1, 1 -> 0}``."""

    def draw(self, rng, max_length=math.inf):
        if max_length < 1:
            return CadlagPath([0.0], [[1.0]], horizon=max_length, killed_at=max_length)
        return CadlagPath([0.0, 1.0], [[1.0], [0.0]])


class ExpBump(ExcursionSampler):
    """Flat excursion with Exp(1) length and a random level in {1, 2, 3}."""

    def draw(self, rng, max_length=math.inf):
        L = float(rng.exponential())
        v = float(rng.integers(1, 4))
        if L > max_length:
            return CadlagPath([0.0], [[v]], horizon=max_length, killed_at=max_length)
        return CadlagPath([0.0, L], [[v], [0.0]])


# -- bookkeeping ---------------------------------------------------------------------------


def test_streams_reproducible_and_distinct():
    assert stream(3, 7).random() == stream(3, 7).random()
    assert stream(3, 7).random() != stream(3, 8).random()
    assert stream(3, 7).random() != stream(4, 7).random()


def test_accumulator_merge_is_associative():
    x = np.random.default_rng(0).normal(size=1000)
    whole = Accumulator().add(x).estimate()
    parts = Accumulator().add(x[:300]).merge(Accumulator().add(x[300:])).estimate()
    assert whole.value == pytest.approx(parts.value, rel=1e-12)
    assert whole.std_error == pytest.approx(parts.std_error, rel=1e-9)
    assert MCEstimate(1.0, 0.1, 10).covers(1.25) and not MCEstimate(1.0, 0.1, 10).covers(1.31)


def test_spec_validation():
    with pytest.raises(ValueError):
        RegenerativeSpec(0.0, PointMass())
    with pytest.raises(ValueError):
        RegenerativeSpec(1.0, PointMass(), drift=-1)
    with pytest.raises(ValueError):
        synthesize(RegenerativeSpec(1.0, PointMass()), 0.0, stream(0, 0))


# -- the scaled walk sampler ---------------------------------------------------------------


@pytest.mark.parametrize("n", [1, 4, 100, 10_000, 1_000_000])
@pytest.mark.parametrize("eps", [0.05, 0.3, 0.5, 1.0, 2.7])
def test_height_tail_matches_backward_recursion(n, eps):
    s = SRWExcursionSampler(n)
    m = s.level(eps)
    assert m / math.sqrt(n) > eps and (m == 1 or (m - 1) / math.sqrt(n) <= eps)
    if m <= 4000:
        assert Fraction(s.tail_mass(height, eps)).limit_denominator(10**7) == ruin_by_backward_recursion(m)


def test_height_tail_fixture_values():
    s = SRWExcursionSampler(10_000)
    assert s.tail_mass(height, 0.5) * 100 == pytest.approx(100 / 51)
    # the walk needs 50 steps up to reach height 0.5, one more to exceed it
    assert s.tail_mass(height, 0.499) * 100 == 2.0


def test_length_tail_matches_absorbed_walk():
    n = 16
    s = SRWExcursionSampler(n)
    for K in range(0, 120):
        alive, _ = absorbed_walk(K)
        assert s.tail_mass(length, (K + 0.5) / n) == pytest.approx(alive, rel=1e-10, abs=1e-15)


@pytest.mark.parametrize("lam", [0.25, 1.0, 4.0])
def test_costs_match_absorbed_walk(lam):
    n = 16
    s = SRWExcursionSampler(n)
    z = math.exp(-lam / n)
    _, gen = absorbed_walk(4000, z)
    assert s.small_cost(lam) == pytest.approx(1 - gen, rel=1e-10)
    for eps in (0.3, 0.6, 1.1):
        M = s.level(eps) - 1
        _, gen_c = absorbed_walk(4000, z, ceiling=M)
        # 1 - e^{-lam T} on {max <= M}: P(max <= M) - E[z^k; max <= M]
        assert s.small_cost(lam, height, eps) == pytest.approx((1 - 1 / (M + 1)) - gen_c, rel=1e-9)


def test_costs_match_monte_carlo():
    spec = srw_spec(25)
    for phi, eps in ((None, math.inf), (height, 0.5)):
        est = _mc_small_cost(spec, phi, eps, 1.0, 20000, 5, 200.0)
        exact = spec.mass_scale * spec.sampler.small_cost(1.0, phi, eps)
        assert est.covers(exact)


def test_conditioned_draws_are_big_and_unbiased():
    s = SRWExcursionSampler(36)
    rng = stream(2, 0)
    draws = [s.draw_big(height, 0.5, rng, 20.0) for _ in range(3000)]
    assert all(height(e) > 0.5 for e in draws)
    ref, rng = [], stream(2, 1)
    while len(ref) < 3000:
        e = s.draw(rng, 20.0)
        if height(e) > 0.5:
            ref.append(e)
    for stat in (lambda e: min(hitting_time(e), 20.0), height):
        d, thr = ks_two_sample(EmpiricalLaw([stat(e) for e in draws]),
                               EmpiricalLaw([stat(e) for e in ref]))
        assert d <= thr


def test_draw_respects_max_length():
    s = SRWExcursionSampler(10)
    rng = stream(3, 0)
    for _ in range(500):
        e = s.draw(rng, 0.35)
        T = hitting_time(e)
        assert T <= 0.35 or (math.isinf(T) and e.killed_at == 0.35 and e.times[-1] < 0.35)


# -- synthesis ----------------------------------------------------------------------------


def test_renewal_reward_count():
    b, horizon = 2.0, 150_000.0
    f = synthesize(RegenerativeSpec(b, PointMass()), horizon, stream(1, 0))
    count = len(decompose(f))
    mu, var = 1 / b + 1, 1 / b**2
    sd = math.sqrt(horizon * var / mu**3)
    assert abs(count - horizon * b / (1 + b)) <= 3 * sd + 1


def test_fast_holds_leave_little_anchor_time():
    f = synthesize(RegenerativeSpec(1e6, PointMass()), 2000.0, stream(1, 1))
    at = f.at_anchor()
    dt = np.diff(np.append(f.times, f.horizon))
    assert dt[at].sum() / f.horizon < 1e-5


def test_synthesis_deterministic_and_killed():
    spec = srw_spec(100)
    a = synthesize(spec, 1.0, stream(9, 3))
    assert a == synthesize(spec, 1.0, stream(9, 3))
    f = synthesize(RegenerativeSpec(1.0, PointMass()), 0.5, stream(0, 0))
    # the only excursion cannot finish before 0.5 unless the hold is short
    items = decompose(f)
    assert all(it.killed == (it.right == math.inf) for it in items)


def test_recovered_excursions_follow_sampler_law():
    spec = RegenerativeSpec(3.0, ExpBump())
    f = synthesize(spec, 3000.0, stream(4, 0))
    got = [it.length for it in decompose(f) if not it.killed]
    rng = stream(4, 1)
    ref = [hitting_time(ExpBump().draw(rng)) for _ in range(len(got))]
    d, thr = ks_two_sample(EmpiricalLaw(got), EmpiricalLaw(ref))
    assert d <= thr


def test_regeneration_after_return_time():
    # stopping rule: the first return to the anchor after t0
    n, t0, cap, horizon = 100, 0.5, 0.5, 3.0
    spec = srw_spec(n)
    post = []
    for i in range(2500):
        items = decompose(synthesize(spec, horizon, stream(6, i)))
        tau = t0
        straddle = [x for x in items if x.left <= t0 < x.right]
        if straddle:
            tau = straddle[0].right
        it = next((x for x in items if x.left >= tau and x.left > t0), None)
        if it is None or it.left > horizon - cap:
            continue
        post.append(min(it.length, cap))
    rng = stream(6, 10**6)
    ref = [min(hitting_time(spec.sampler.draw(rng, cap)), cap) for _ in range(len(post))]
    # lengths are multiples of 1/n up to rounding in d - g
    d, thr = ks_two_sample(EmpiricalLaw(np.rint(np.array(post) * n)),
                           EmpiricalLaw(np.rint(np.array(ref) * n)))
    assert len(post) > 1500 and d <= thr


def test_ito_spec_with_and_without_drift():
    s = SRWExcursionSampler(25)
    spec = ito_spec(s, height, 0.4, mass=5 * s.tail_mass(height, 0.4), drift=0.5)
    assert spec.holding_rate == pytest.approx(spec.mass_scale / 0.5)
    f = synthesize(spec, 3.0, stream(8, 0))
    assert all(it.size > 0.4 for it in decompose(f, height) if not it.killed)
    assert math.isinf(ito_spec(s, height, 0.4, mass=1.0).holding_rate)
    with pytest.raises(ValueError):
        ito_spec(s, height, 0.4, mass=0.0)


# -- H checks ------------------------------------------------------------------------------------


def test_h_checks_trivial_cases():
    specs = [(100, srw_spec(100))]
    tol = lambda *a: 0.0
    assert check_h2(specs, height, [0.5], [0.0], lambda l, e: 0.0, tol)[0].estimate == 0
    assert check_h2(specs, height, [0.0], [1.0], lambda l, e: 0.0, tol)[0].estimate == 0
    assert check_h3(specs, [0.0], lambda l: 0.0, tol)[0].estimate == 0
    # no excursion of a finite-horizon walk is higher than its length allows
    assert check_h1(specs, height, [1e9], lambda e: 0.0, tol)[0].estimate == pytest.approx(0, abs=1e-6)


def test_h_examples_at_n_1e4():
    (row,) = check_h1([(10_000, srw_spec(10_000))], height, [0.499], lambda e: 1 / e,
                      lambda n, e: 0.0)
    assert row.estimate == 2.0


def test_h3_monotone_in_lambda_and_sandwich():
    specs = [(n, srw_spec(n)) for n in (16, 400, 10_000)]
    rows = check_h3(specs, [0.5, 1, 2, 4], bm_cost, lambda n, l: 0.0)
    for n in (16, 400, 10_000):
        vals = [r.estimate for r in rows if r.n == n]
        assert vals == sorted(vals)
    assert all(r.ok for r in sandwich_check(specs, height, [0.2, 0.5, 1.0], [0.5, 1, 2]))
    mc = sandwich_check([(16, RegenerativeSpec(16.0, ExpBump(), 4.0))], height, [1.5], [1.0],
                        samples=5000)
    assert all(r.ok for r in mc)


def test_brownian_limits_against_fine_walk():
    n = 1_000_000
    s = SRWExcursionSampler(n)
    c = math.sqrt(n)
    for lam in (0.5, 1, 2):
        assert c * s.small_cost(lam) == pytest.approx(bm_cost(lam), rel=2 / c)
        for eps in (0.3, 0.5):
            assert c * s.small_cost(lam, height, eps) == pytest.approx(
                bm_small_cost_height(lam, eps), rel=3 / c)


# -- Laplace transform of g --------------------------------------------------------------------


def test_laplace_forms_agree():
    rng = np.random.default_rng(13)
    for _ in range(200):
        p, Q = rng.uniform(0.01, 0.9), rng.uniform(0, 0.5)
        Q = min(Q, 1 - p)
        lam, b = rng.uniform(0.1, 5), rng.uniform(0.1, 100)
        assert laplace_g_formula(p, Q, lam, b) == pytest.approx(laplace_g_geometric(p, Q, lam, b),
                                                                rel=1e-12)


def test_laplace_limit_and_small_lambda():
    p, Q = 0.7, 0.2
    assert abs(laplace_g_formula(p, Q, 1.0, 1e6) - laplace_g_limit(p, Q, 1.0)) < 1e-3
    spec = srw_spec(400)
    assert exact_laplace_g(spec, height, 0.5, 1e-9) == pytest.approx(1.0, abs=1e-6)


def test_laplace_monotone():
    spec = srw_spec(400)
    vals = [exact_laplace_g(spec, height, 0.5, lam) for lam in (0.25, 0.5, 1, 2, 4)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    h = 1e-6
    for lam in (0.5, 2.0):
        p, Q = 0.3, 0.1
        assert laplace_g_formula(p + h, Q, lam, 50.0) > laplace_g_formula(p, Q, lam, 50.0)


def test_laplace_brownian_limit():
    spec = srw_spec(1_000_000)
    for lam in (0.5, 1, 2):
        for eps in (0.3, 0.5):
            assert exact_laplace_g(spec, height, eps, lam) == pytest.approx(
                bm_laplace_g_height(lam, eps), abs=5e-3)


def test_g_sample_matches_full_synthesis():
    spec = srw_spec(64)
    for i in range(400):
        g = g_epsilon_sample(spec, height, 0.3, 2.0, stream(14, i))
        assert g == extract_big(synthesize(spec, 2.0, stream(14, i)), height, 0.3)[0]


def test_laplace_monte_carlo_small():
    spec = srw_spec(100)
    g = g_samples(spec, height, 0.5, 8000, seed=15)
    acc = mc_laplace_g(spec, height, 0.5, 1.0, 8000, seed=15)
    assert acc.estimate().value == pytest.approx(np.mean(np.exp(-g)), rel=1e-12)
    assert acc.estimate().covers(exact_laplace_g(spec, height, 0.5, 1.0))


# -- transfer and bounds -------------------------------------------------------------------------


def test_transfer_identical_functionals_has_zero_width():
    rows = transfer_check(height, height, srw_spec(100), 0.5, 0.5, 2000, 3)
    assert all(r.width == 0 and r.ok for r in rows)


def test_transfer_length_height():
    spec = srw_spec(100)
    widths = []
    for eps1 in (0.2, 0.05, 0.01):
        rows = transfer_check(length, height, spec, eps1, 0.5, 3000, 4)
        assert len(rows) == 5 and all(r.ok for r in rows)
        widths.append(rows[0].width)
    assert widths[0] >= widths[1] >= widths[2]


def test_overline_phi_bound():
    assert overline_phi_bound(1.0, 1.0, 1.0, 10.0, 100.0, 0.0, 0.5) > 0
    big = overline_phi_bound(1.0, 1.0, 1.0, 10.0, 100.0, 0.0, 0.5)
    more_cost = overline_phi_bound(1.0, 1.0, 1.0, 10.0, 100.0, 0.0, 0.9)
    assert more_cost < big
    with pytest.raises(ValueError):
        overline_phi_bound(0.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0)
