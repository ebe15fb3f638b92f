"""Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned below."""

import math
import time
from fractions import Fraction

import numpy as np
import pytest

from excursions import (
    CadlagPath, decompose, e_S, eval_path, extract_big, height, hitting_time, j1_distance,
    passage, phi_S, psi_S, scaled_srw, shift_to_passage, thin, truncate_big, truncate_small,
)
from excursions.harness import counterexample_demo, eq_cond_check
from excursions.regen import (
    SRWExcursionSampler, exact_laplace_g, g_samples, srw_spec, stream, synthesize,
)
from excursions.sizes import extract_all_big
from excursions.tightness import modulus_w_prime, tightness_probe, w_prime_brute_force

from conftest import ACCEPTANCE_LINES, random_step_path, random_subdivision

SEED = 20240611
Z_SE = 3.0              # standard errors allowed for Monte Carlo comparisons
KS_ALPHA = 0.01
GROWTH_FACTOR = 5.0


def report(num, ok, detail, elapsed, limit):
    ok = ok and elapsed < limit
    line = f"{'PASS' if ok else 'FAIL'} criterion {num}: {detail} [{elapsed:.1f}s < {limit:.0f}s]"
    print(line)
    ACCEPTANCE_LINES.append(line)
    return ok


# -- 1 ------------------------------------------------------------------------------------


def test_criterion_1_operator_identities():
    t0 = time.time()
    rng = np.random.default_rng(SEED)
    identity = 0
    for _ in range(1000):
        f = random_step_path(rng, 10)
        S = random_subdivision(rng)
        identity += psi_S(e_S(f, S), S, f.horizon).same_breakpoints(phi_S(f, S))
    thinned = 0
    spec = srw_spec(64)
    for i in range(500):
        f = synthesize(spec, 2.0, stream(SEED, i))
        base = extract_all_big(f, height, 0.05)
        a = [(it.left, it.right) for it in thin(base, 0.2)]
        b = [(it.left, it.right) for it in extract_all_big(f, height, 0.2)]
        thinned += a == b
    dichotomy = 0
    for i in range(500):
        f = random_step_path(rng, 12)
        eps = float(rng.choice([0.5, 1.5, 2.5]))
        small, big = truncate_small(f, height, eps), truncate_big(f, height, eps)
        good = True
        for t in f.times:
            v, a, b = eval_path(f, t), eval_path(small, t), eval_path(big, t)
            good &= bool((np.array_equal(v, a) and not b.any()) or (np.array_equal(v, b) and not a.any()))
        dichotomy += good
    ok = report(1, identity == 1000 and thinned == 500 and dichotomy == 500,
                f"identity {identity}/1000, thinning {thinned}/500, dichotomy {dichotomy}/500",
                time.time() - t0, 30)
    assert ok


# -- 2 ------------------------------------------------------------------------------------


def _random_excursion_path(rng):
    """Dyadic-time path made of a few excursions with continuous heights."""
    t, times, vals = 0.0, [0.0], [0.0]
    for _ in range(int(rng.integers(1, 5))):
        t += int(rng.integers(1, 4)) / 8
        for _ in range(int(rng.integers(1, 3))):
            times.append(t)
            vals.append(float(rng.choice([-1, 1]) * rng.uniform(0.01, 1.0)))
            t += int(rng.integers(1, 4)) / 8
        times.append(t)
        vals.append(0.0)
    return CadlagPath(times, np.array(vals).reshape(-1, 1))


def test_criterion_2_truncation_limit():
    t0 = time.time()
    rng = np.random.default_rng(SEED + 2)
    grid = [0.4, 0.2, 0.1, 0.05]
    m = 10.0
    mono = bounded = final_ok = final_cases = 0
    for _ in range(200):
        f = _random_excursion_path(rng)
        items = decompose(f, height)
        ups, ok_bound = [], True
        for eps in grid:
            up = j1_distance(truncate_small(f, height, eps), f, m).upper
            cap = max((it.size for it in items if it.size <= eps and it.left <= m), default=0.0)
            ok_bound &= up <= cap + 1e-12
            ups.append(up)
        mono += all(b <= a + 1e-12 for a, b in zip(ups, ups[1:]))
        bounded += ok_bound
        if not any(0 < it.size <= 0.05 for it in items):
            final_cases += 1
            final_ok += ups[-1] <= 0.05
    ok = report(2, mono == 200 and bounded == 200 and final_ok == final_cases,
                f"nonincreasing {mono}/200, bounded {bounded}/200, "
                f"final <= 0.05 on {final_ok}/{final_cases}", time.time() - t0, 30)
    assert ok


# -- 3 ------------------------------------------------------------------------------------

H1_N = [100, 10_000, 1_000_000]
H1_EPS = [0.3, 0.5, 1.0]


def _ruin(m: int) -> Fraction:
    # h(0) = 0, h(1) = 1 and h(x + 1) = 2 h(x) - h(x - 1); the probability is h(1) / h(m)
    h = [Fraction(0), Fraction(1)]
    while len(h) <= m:
        h.append(2 * h[-1] - h[-2])
    return h[1] / h[m]


def _h1_cells():
    cells = []
    for n in H1_N:
        s = SRWExcursionSampler(n)
        rn = math.sqrt(n)
        for eps in H1_EPS:
            computed = rn * s.tail_mass(height, eps)
            oracle = rn * float(_ruin(s.level(eps)))
            # exact rationals: the smallest integer m >= eps sqrt(n)
            ceil_level = math.ceil(Fraction(eps).limit_denominator(1000) * Fraction(math.isqrt(n)))
            literal = rn / ceil_level
            cells.append((n, eps, computed, oracle, literal))
    return cells


def test_criterion_3_oracle_and_rate():
    t0 = time.time()
    cells = _h1_cells()
    oracle_ok = all(c == o for _, _, c, o, _ in cells)
    rate_ok = all(abs(lit - 1 / e) <= 1 / (e * e * math.sqrt(n)) and
                  abs(c - 1 / e) <= 1 / (e * e * math.sqrt(n)) for n, e, c, _, lit in cells)
    assert oracle_ok and rate_ok and time.time() - t0 < 10


@pytest.mark.xfail(strict=True, reason="exceeding eps needs floor(eps sqrt n) + 1 steps, not "
                                       "ceil(eps sqrt n), whenever eps sqrt n is an integer")
def test_criterion_3_h1_exact_fixture():
    t0 = time.time()
    cells = _h1_cells()
    equal = sum(c == lit for _, _, c, _, lit in cells)
    oracle = sum(c == o for _, _, c, o, _ in cells)
    rate = sum(abs(lit - 1 / e) <= 1 / (e * e * math.sqrt(n)) for n, e, _, _, lit in cells)
    worst = max(abs(c - lit) for _, _, c, _, lit in cells)
    ok = report(3, equal == 9 and oracle == 9 and rate == 9,
                f"equal to sqrt(n)/ceil(eps sqrt n) {equal}/9 (max gap {worst:.4f}), "
                f"backward-recursion oracle {oracle}/9, rate bound {rate}/9",
                time.time() - t0, 10)
    assert ok


# -- 4 ------------------------------------------------------------------------------------


def test_criterion_4_laplace_transform():
    t0 = time.time()
    spec = srw_spec(100)
    good, worst, lines = 0, 0.0, []
    for i, eps in enumerate((0.3, 0.5)):
        g = g_samples(spec, height, eps, 100_000, SEED + 97 * i, horizon=4.0)
        for lam in (0.5, 1.0, 2.0):
            x = np.exp(-lam * g)
            est, se = x.mean(), x.std(ddof=1) / math.sqrt(len(x))
            exact = exact_laplace_g(spec, height, eps, lam)
            z = abs(est - exact) / se
            worst = max(worst, z)
            good += z <= Z_SE
    ok = report(4, good == 6, f"{good}/6 cells within {Z_SE:g} SE (worst {worst:.2f} SE)",
                time.time() - t0, 180)
    assert ok


# -- 5 ------------------------------------------------------------------------------------


def test_criterion_5_w_prime_exact():
    t0 = time.time()
    rng = np.random.default_rng(SEED + 5)
    same = 0
    for _ in range(2000):
        f = random_step_path(rng, 6, dyadic=bool(rng.random() < 0.5))
        m = float(f.times[-1]) + float(rng.uniform(0.05, 1.5))
        delta = float(rng.uniform(0.01, 1.5))
        same += modulus_w_prime(f, m, delta) == w_prime_brute_force(f, m, delta)
    ok = report(5, same == 2000, f"dynamic programme equals enumeration on {same}/2000 paths",
                time.time() - t0, 30)
    assert ok


# -- 6 ------------------------------------------------------------------------------------


def test_criterion_6_eq_cond():
    t0 = time.time()
    rep = eq_cond_check([400, 2500, 10_000], [0.3, 0.5], "height", samples=2000,
                        reference_n=250_000, alpha=KS_ALPHA, seed=SEED, workers=1)
    finals = [r for r in rep.rows if not r.informational and r.n == 10_000]
    trends = [v for k, v in rep.verdicts.items() if k.startswith("trend")]
    ks = ", ".join(f"{r.statistic}@{r.eps:g}={r.ks:.3f}/{r.threshold:.3f}" for r in finals)
    ok = report(6, rep.passed and all(r.passed for r in finals) and all(trends),
                f"final KS {ks}; trends {sum(trends)}/{len(trends)}; "
                f"independence {'ok' if all(v for k, v in rep.verdicts.items() if k.startswith('indep')) else 'FAIL'}",
                time.time() - t0, 900)
    assert ok


# -- 7 ------------------------------------------------------------------------------------


def test_criterion_7_tightness_inequality():
    t0 = time.time()
    specs = [(n, srw_spec(n)) for n in (64, 256, 1024)]
    # the probe raises if the small part reaches eta on any path with eps < eta
    rows = tightness_probe(specs, 1.0, 0.2, [0.4, 0.2, 0.1, 0.05], [0.05, 0.1, 0.15], height,
                           200, SEED)
    good = sum(r.ok for r in rows)
    ok = report(7, good == len(rows) == 36,
                f"lhs <= rhs + {Z_SE:g} SE on {good}/{len(rows)} grid points; "
                f"small part below eta on every path", time.time() - t0, 300)
    assert ok


# -- 8 ------------------------------------------------------------------------------------


def _counterexample():
    t0 = time.time()
    rows = counterexample_demo((100, 10_000), base_n=1_000_000, paths=40, eps=0.1, horizon=1.0,
                               seed=SEED)
    return rows, time.time() - t0


@pytest.fixture(scope="module")
def counterexample_rows():
    return _counterexample()


def test_criterion_8_divergence_and_lengths(counterexample_rows):
    rows, elapsed = counterexample_rows
    growth = rows[-1].mean_sup / rows[0].mean_sup
    assert growth >= GROWTH_FACTOR
    assert all(r.length_lists_equal == r.paths for r in rows)
    assert elapsed < 120


@pytest.mark.xfail(strict=True, reason="each triangle has height n, so it is itself a big "
                                       "height excursion and joins the list")
def test_criterion_8_counterexample(counterexample_rows):
    rows, elapsed = counterexample_rows
    growth = rows[-1].mean_sup / rows[0].mean_sup
    same_h = sum(r.height_lists_equal for r in rows)
    total = sum(r.paths for r in rows)
    ok = report(8, same_h == total and growth >= GROWTH_FACTOR,
                f"height lists equal on {same_h}/{total} paths "
                f"(length lists {sum(r.length_lists_equal for r in rows)}/{total}); "
                f"mean sup grows x{growth:.0f}", elapsed, 120)
    assert ok


# -- 9 ------------------------------------------------------------------------------------


def test_criterion_9_passage_variant():
    t0 = time.time()
    exact = over = complete = 0
    total = 10_000
    for i in range(total):
        n = (64, 256, 1024)[i % 3]
        eps = (0.3, 0.5)[(i // 3) % 2]
        f = scaled_srw(n, 16.0, stream(SEED + 9, i))
        g, e = extract_big(f, height, eps)
        if math.isinf(g):
            exact += 1
            over += 1
            continue
        t_up = passage(e, eps).t_up
        up = shift_to_passage(f, eps)
        T = hitting_time(e)
        complete += math.isfinite(T)
        exact += T == t_up + hitting_time(up)
        over += float(np.abs(up.values[0]).max()) - eps <= 1 / math.sqrt(n)
    ok = report(9, exact == total and over == total and complete > 0.8 * total,
                f"identity exact on {exact}/{total}, overshoot <= 1/sqrt(n) on {over}/{total} "
                f"({complete} completed excursions)", time.time() - t0, 60)
    assert ok
