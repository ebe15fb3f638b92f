"""Scaled random walks, empirical laws and the convergence checks built on them."""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .paths import CadlagPath, hitting_time
from .regen import RegenerativeSpec, SRWExcursionSampler, stream, synthesize
from .sizes import extract_all_big, height, length

# -- paths -------------------------------------------------------------------------


def srw_steps(rng, count: int) -> np.ndarray:
    """``count`` i.i.d. signs; one uniform per step, so chunking never changes the walk."""
    return np.where(rng.random(count) < 0.5, 1, -1).astype(np.int64)


def scaled_srw(n: int, horizon: float, rng, mode: str = "lazy-exact",
               holding_rate: Optional[float] = None) -> CadlagPath:
    """``t -> S_floor(nt) / sqrt(n)`` on ``[0, horizon]``.

    ``mode="exponential-holds"`` replaces each deterministic ``1/n`` sojourn at
    0 by an exponential one with rate ``holding_rate`` (default ``n``).
    """
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    if mode == "lazy-exact":
        k = int(math.floor(horizon * n))
        pos = np.concatenate(([0], np.cumsum(srw_steps(rng, k))))
        times = np.arange(k + 1) / n
        vals = (pos / math.sqrt(n)).reshape(-1, 1)
        return CadlagPath._trusted(times, vals, np.zeros(1), horizon)
    if mode == "exponential-holds":
        b = float(holding_rate or n)
        spec = RegenerativeSpec(b, SRWExcursionSampler(n), math.sqrt(n))
        return synthesize(spec, horizon, rng)
    raise ValueError(f"unknown mode {mode!r}")


# -- empirical laws ------------------------------------------------------------------


@dataclass
class EmpiricalLaw:
    values: np.ndarray
    provenance: Dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.sort(np.asarray(self.values, dtype=float).ravel())
        if np.isnan(v).any():
            raise ValueError("empirical law with NaN values")
        self.values = v

    def __len__(self):
        return len(self.values)

    def cdf(self, x) -> np.ndarray:
        return np.searchsorted(self.values, x, side="right") / len(self.values)


def ks_threshold(n1: int, n2: int, alpha: float) -> float:
    """Asymptotic two-sample critical value ``c(alpha) sqrt((n1 + n2) / (n1 n2))``."""
    return math.sqrt(-math.log(alpha / 2.0) / 2.0) * math.sqrt((n1 + n2) / (n1 * n2))


def ks_two_sample(a: EmpiricalLaw, b: EmpiricalLaw, alpha: float = 0.01):
    """``(sup |F_a - F_b|, critical value at alpha)``."""
    if len(a) == 0 or len(b) == 0:
        raise ValueError("KS needs two nonempty samples")
    grid = np.concatenate((a.values, b.values))
    stat = float(np.max(np.abs(a.cdf(grid) - b.cdf(grid))))
    return stat, ks_threshold(len(a), len(b), alpha)


# -- first big excursion of a lazy walk ---------------------------------------------------

SHAPE_TIMES = (0.01, 0.05, 0.1)
SHAPE_FRACTIONS = (0.25, 0.5, 0.75)
STATS = (["g", "T", "size", "censored"]
         + [f"frac_{u:g}" for u in SHAPE_FRACTIONS]
         + [f"value_{t:g}" for t in SHAPE_TIMES]
         + [f"runmax_{t:g}" for t in SHAPE_TIMES]
         + ["t_up", "e_up0", "T_up"]
         + [f"up_value_{t:g}" for t in SHAPE_TIMES])


def _is_big(kind: str, n: int, sqrt_n: float, eps: float, k0: int, k1: int, peak: int) -> bool:
    if kind == "height":
        return peak / sqrt_n > eps
    return k1 / n - k0 / n > eps


def first_big_srw(n: int, kind: str, eps: float, cap: float, rng,
                  max_steps: int = 10**10) -> np.ndarray:
    """Statistics of the first big excursion of the lazy scaled walk.

    Times after the start of the excursion are observed up to ``cap``; the
    length becomes ``min(T, cap)`` and sizes and shape values use the part of
    the excursion before ``cap``. Fraction values are NaN when censored, and
    the passage statistics are NaN for ``kind="length"``.
    """
    sqrt_n = math.sqrt(n)
    k = 0  # steps taken
    S = 0
    k0 = None  # step index of the first nonzero position of the open excursion
    parts: List[np.ndarray] = []
    chunk = max(256, int(n * 0.05))
    found = None
    while found is None:
        if k > max_steps:
            raise RuntimeError("no big excursion within the step budget")
        P = S + np.cumsum(srw_steps(rng, chunk))
        zeros = np.flatnonzero(P == 0)
        start = 0
        for z in list(zeros) + [None]:
            seg = P[start:] if z is None else P[start:z]
            if len(seg):
                if k0 is None:
                    k0 = k + 1 + start
                parts.append(seg)
            if z is None:
                break
            if k0 is not None:
                exc = np.concatenate(parts)
                peak = int(np.abs(exc).max())
                k1 = k + 1 + z
                if _is_big(kind, n, sqrt_n, eps, k0, k1, peak):
                    found = (k0, exc, k1)
                    break
            k0, parts = None, []
            start = z + 1
        k += chunk
        S = int(P[-1])
        if found is None and k0 is not None:
            exc = np.concatenate(parts)
            parts = [exc]
            peak = int(np.abs(exc).max())
            # the open excursion already exceeds eps: extend it to its end or to cap
            if _is_big(kind, n, sqrt_n, eps, k0, k + 1, peak):
                limit = int(math.floor(cap * n)) + 1 if math.isfinite(cap) else math.inf
                while len(exc) < limit:
                    Q = S + np.cumsum(srw_steps(rng, chunk))
                    z = np.flatnonzero(Q == 0)
                    if len(z):
                        exc = np.concatenate((exc, Q[: z[0]]))
                        found = (k0, exc, k0 + len(exc))
                        break
                    exc = np.concatenate((exc, Q))
                    S = int(Q[-1])
                    chunk = min(chunk * 2, 1 << 20)
                else:
                    found = (k0, exc, None)
        chunk = min(chunk * 2, 1 << 20)
    k0, exc, k1 = found
    return _stats(n, sqrt_n, kind, eps, cap, k0, exc, k1)


def _stats(n, sqrt_n, kind, eps, cap, k0, exc, k1) -> np.ndarray:
    g = k0 / n
    T = k1 / n - k0 / n if k1 is not None else math.inf
    censored = not T < cap
    times = np.arange(len(exc)) / n
    seen = np.abs(exc[times < cap]) / sqrt_n
    L = len(exc) if k1 is not None else math.inf
    out = [g, min(T, cap), 0.0, float(censored)]
    out[2] = float(seen.max()) if kind == "height" else min(T, cap)
    for u in SHAPE_FRACTIONS:
        out.append(math.nan if censored else float(abs(exc[int(math.floor(u * L))]) / sqrt_n))
    for t in SHAPE_TIMES:
        j = int(math.floor(t * n))
        out.append(float(abs(exc[j]) / sqrt_n) if j < len(exc) and j < L else 0.0)
    for t in SHAPE_TIMES:
        j = int(math.floor(t * n))
        out.append(float(seen[: j + 1].max()))
    if kind == "height":
        up = int(np.flatnonzero(np.abs(exc) / sqrt_n > eps)[0])
        t_up = up / n
        out += [t_up, float(abs(exc[up]) / sqrt_n), min(T - t_up, cap) if not censored else cap]
        for t in SHAPE_TIMES:
            j = up + int(math.floor(t * n))
            out.append(float(abs(exc[j]) / sqrt_n) if j < len(exc) else (math.nan if censored else 0.0))
    else:
        out += [math.nan] * (3 + len(SHAPE_TIMES))
    return np.asarray(out, dtype=float)


# -- parallel sampling -----------------------------------------------------------------


def default_workers() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


def _sample_block(args):
    n, kind, eps, cap, seed, cell, lo, hi = args
    return np.vstack([first_big_srw(n, kind, eps, cap, stream(seed, cell * 10**8 + i))
                      for i in range(lo, hi)])


def sample_first_big(n: int, kind: str, eps: float, cap: float, samples: int, seed: int,
                     cell: int, workers: int = 1, block: int = 100) -> np.ndarray:
    """``samples x len(STATS)`` array; sample ``i`` always uses stream ``(seed, cell, i)``."""
    tasks = [(n, kind, eps, cap, seed, cell, lo, min(lo + block, samples))
             for lo in range(0, samples, block)]
    if workers <= 1:
        parts = [_sample_block(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_sample_block, tasks))
    return np.vstack(parts)


# -- reports -------------------------------------------------------------------------


@dataclass
class KSRow:
    eps: float
    statistic: str
    n: int
    ks: float
    threshold: float
    passed: bool
    trend_ok: bool = True
    informational: bool = False


@dataclass
class ConvergenceReport:
    rows: List[KSRow] = field(default_factory=list)
    extras: Dict[str, float] = field(default_factory=dict)
    verdicts: Dict[str, bool] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())

    def table(self) -> List[dict]:
        return [dict(eps=r.eps, statistic=r.statistic, n=r.n, ks=r.ks, threshold=r.threshold,
                     passed=r.passed, trend_ok=r.trend_ok, informational=r.informational)
                for r in self.rows]


def nonincreasing_up_to(values: Sequence[float], inversions: int = 1) -> bool:
    return sum(1 for a, b in zip(values, values[1:]) if b > a) <= inversions


def _ks_cells(report, eps, name, col, samples_by_n, ref, alpha, trend_stats, informational=False):
    a_ref = ref[:, col]
    a_ref = a_ref[~np.isnan(a_ref)]
    rows = []
    for n, arr in samples_by_n:
        x = arr[:, col]
        x = x[~np.isnan(x)]
        if len(x) == 0 or len(a_ref) == 0:
            raise ValueError(f"empty sample for {name} at n={n}, eps={eps}")
        d, thr = ks_two_sample(EmpiricalLaw(x), EmpiricalLaw(a_ref), alpha)
        rows.append(KSRow(eps, name, n, d, thr, d <= thr, informational=informational))
    trend = nonincreasing_up_to([r.ks for r in rows]) if name in trend_stats else True
    for r in rows:
        r.trend_ok = trend
    report.rows += rows
    if informational:
        return
    report.verdicts[f"final_{name}_eps{eps:g}"] = rows[-1].passed
    if name in trend_stats:
        report.verdicts[f"trend_{name}_eps{eps:g}"] = trend


def eq_cond_check(n_grid: Sequence[int], eps_grid: Sequence[float], kind: str = "height",
                  samples: int = 2000, reference_n: int = 250_000, alpha: float = 0.01,
                  cap: float = 1.0, seed: int = 0, workers: int = 1,
                  shape: bool = True) -> ConvergenceReport:
    """KS comparison of ``(g, T, phi)`` of the first big excursion against a fine walk.

    Length and size are observed up to ``cap`` after the excursion starts. The
    excursion law itself is probed through values at fixed times and
    fractions of the length.
    """
    report = ConvergenceReport()
    cols = {s: i for i, s in enumerate(STATS)}
    shape_stats = [s for s in STATS if s.startswith(("frac_", "value_", "runmax_"))]
    for ie, eps in enumerate(eps_grid):
        ref = sample_first_big(reference_n, kind, eps, cap, samples, seed, 1000 + ie, workers)
        by_n = [(n, sample_first_big(n, kind, eps, cap, samples, seed, 10 * ie + j, workers))
                for j, n in enumerate(n_grid)]
        if kind == "height" and not np.all(by_n[-1][1][:, cols["size"]] > eps):
            raise AssertionError("big excursion with size not above eps")
        for name in ("g", "T", "size"):
            _ks_cells(report, eps, name, cols[name], by_n, ref, alpha, ("g", "T", "size"))
        if shape:
            # lattice-valued shape statistics converge slowly under KS; reported only
            for name in shape_stats:
                _ks_cells(report, eps, name, cols[name], by_n, ref, alpha, (), informational=True)
        last = by_n[-1][1]
        r = float(np.corrcoef(last[:, cols["g"]], last[:, cols["T"]])[0, 1])
        report.extras[f"corr_g_T_eps{eps:g}"] = r
        report.verdicts[f"independence_eps{eps:g}"] = abs(r) <= 3 / math.sqrt(samples)
    return report


def passage_variant_check(n_grid: Sequence[int], eps_grid: Sequence[float], samples: int = 2000,
                          reference_n: int = 250_000, alpha: float = 0.01, cap: float = 1.0,
                          seed: int = 0, workers: int = 1) -> ConvergenceReport:
    """Same comparison for the excursion restarted at its first passage above ``eps``."""
    report = ConvergenceReport()
    cols = {s: i for i, s in enumerate(STATS)}
    up_stats = ["t_up", "e_up0", "T_up"] + [f"up_value_{t:g}" for t in SHAPE_TIMES]
    for ie, eps in enumerate(eps_grid):
        ref = sample_first_big(reference_n, "height", eps, cap, samples, seed + 1, 1000 + ie, workers)
        by_n = [(n, sample_first_big(n, "height", eps, cap, samples, seed + 1, 10 * ie + j, workers))
                for j, n in enumerate(n_grid)]
        # the passage-shifted excursion has the same height as e_eps
        for name in ["g", "T_up", "size"] + [s for s in up_stats if s != "T_up"]:
            _ks_cells(report, eps, name, cols[name], by_n, ref, alpha, ("g", "T_up", "size"),
                      informational=name not in ("g", "T_up", "size"))
        for n, arr in by_n:
            sqrt_n = math.sqrt(n)
            start = arr[:, cols["e_up0"]]
            report.extras[f"max_overshoot_n{n}_eps{eps:g}"] = float((start - eps).max())
            # overshoot of at most one lattice step: the level below e_up(0) is not above eps
            below = (np.rint(start * sqrt_n) - 1) / sqrt_n
            report.verdicts[f"overshoot_n{n}_eps{eps:g}"] = bool(np.all(below <= eps))
    return report


def conditioning_consistency(n: int, eps: float, samples: int, seed: int, cap: float = 1.0,
                             alpha: float = 0.01) -> Dict[str, tuple]:
    """KS of path-extracted first big excursions against conditioned sampler draws."""
    arr = sample_first_big(n, "height", eps, cap, samples, seed, 5000)
    sampler = SRWExcursionSampler(n)
    rng = stream(seed, 10**9 + 5)
    T, H = [], []
    for _ in range(samples):
        e = sampler.draw_big(height, eps, rng, cap)
        T.append(min(hitting_time(e), cap))
        H.append(float(np.abs(e.values[e.times < cap]).max()))
    cols = {s: i for i, s in enumerate(STATS)}
    return {"T": ks_two_sample(EmpiricalLaw(arr[:, cols["T"]]), EmpiricalLaw(T), alpha),
            "size": ks_two_sample(EmpiricalLaw(arr[:, cols["size"]]), EmpiricalLaw(H), alpha)}


# -- counterexample --------------------------------------------------------------------


def triangle_walk(base_n: int, n: int, horizon: float, rng):
    """Fine walk and its copy with every excursion of length in ``[1/n, 2/n]`` made a triangle.

    The triangle has height ``n`` and keeps the excursion's support; on the
    fine grid it takes the value ``n (1 - |2u - 1|)`` at the midpoint ``u`` of
    each step.
    """
    base = scaled_srw(base_n, horizon, rng)
    vals = base.values[:, 0].copy()
    off = vals != 0
    edges = np.diff(np.concatenate(([0], off.astype(np.int8), [0])))
    starts, ends = np.flatnonzero(edges == 1), np.flatnonzero(edges == -1)
    replaced = 0
    for i, j in zip(starts, ends):
        if j >= len(vals):
            continue
        tau = base.times[j] - base.times[i]
        if 1.0 / n <= tau <= 2.0 / n:
            k = j - i
            u = (np.arange(k) + 0.5) / k
            vals[i:j] = n * (1.0 - np.abs(2.0 * u - 1.0))
            replaced += 1
    modified = CadlagPath(base.times, vals.reshape(-1, 1), base.anchor, base.horizon)
    return base, modified, replaced


@dataclass
class CounterexampleRow:
    n: int
    paths: int
    mean_sup: float
    frac_replaced: float
    length_lists_equal: int
    height_lists_equal: int


def _big_list(f, phi, eps):
    return [(it.left, it.right) for it in extract_all_big(f, phi, eps)]


def counterexample_demo(n_grid=(100, 10_000), base_n: int = 1_000_000, paths: int = 40,
                        eps: float = 0.1, horizon: float = 1.0, seed: int = 0) -> List[CounterexampleRow]:
    """Big excursions keep their place while the sup norm on ``[0, horizon]`` explodes."""
    rows = []
    for j, n in enumerate(n_grid):
        sups, rep, same_len, same_h = [], 0, 0, 0
        for i in range(paths):
            base, mod, k = triangle_walk(base_n, n, horizon, stream(seed, j * 10**6 + i))
            sups.append(float(np.abs(mod.values).max()))
            rep += k > 0
            same_len += _big_list(base, length, eps) == _big_list(mod, length, eps)
            same_h += _big_list(base, height, eps) == _big_list(mod, height, eps)
        rows.append(CounterexampleRow(n, paths, float(np.mean(sups)), rep / paths, same_len, same_h))
    return rows
