"""Moduli of continuity and Monte Carlo probes of the tightness inequalities."""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from .ops import truncate_big, truncate_small
from .paths import CadlagPath, sup_norm
from .regen import Accumulator, RegenerativeSpec, overline_phi_bound, stream, synthesize
from .sizes import SizeFunctional


class _RangeTable:
    """Sparse tables for range max and min of each coordinate."""

    def __init__(self, values: np.ndarray):
        self.hi = [values]
        self.lo = [values]
        k = 1
        while 2 * k <= len(values):
            self.hi.append(np.maximum(self.hi[-1][:-k], self.hi[-1][k:]))
            self.lo.append(np.minimum(self.lo[-1][:-k], self.lo[-1][k:]))
            k *= 2
        # scalar paths are queried through plain lists, which is much faster
        self.scalar = values.ndim == 2 and values.shape[1] == 1
        if self.scalar:
            self.hi = [h[:, 0].tolist() for h in self.hi]
            self.lo = [x[:, 0].tolist() for x in self.lo]

    def osc(self, a: int, b: int) -> float:
        """Max over coordinates of ``max - min`` on rows ``a..b-1``."""
        if b - a <= 1:
            return 0.0
        j = (b - a).bit_length() - 1
        c = b - (1 << j)
        if self.scalar:
            hi, lo = self.hi[j], self.lo[j]
            return max(hi[a], hi[c]) - min(lo[a], lo[c])
        hi = np.maximum(self.hi[j][a], self.hi[j][c])
        lo = np.minimum(self.lo[j][a], self.lo[j][c])
        return float(np.max(hi - lo))


def modulus_w(f: CadlagPath, m: float, delta: float) -> float:
    """``sup |f(t) - f(s)|`` over ``0 <= s, t <= m`` with ``|t - s| <= delta``.

    For breakpoints ``t_i < t_j`` the values ``f(t_i)`` and ``f(t_j)`` are
    within reach iff ``t_j - t_{i+1} < delta`` (or ``j = i + 1``).
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    keep = f.times <= m
    t, v = f.times[keep], f.values[keep]
    if len(t) < 2:
        return 0.0
    table = _RangeTable(v)
    first = np.searchsorted(t, t - delta, side="right") - 1
    best = 0.0
    for j in range(1, len(t)):
        best = max(best, table.osc(max(int(first[j]), 0), j + 1))
    return best


def _cut_states(t: np.ndarray, m: float):
    """Cut states in time order: ``(start_row, end_row, lo, hi, at_point)``.

    A cut at breakpoint ``j`` starts a block at row ``j`` and ends the previous
    one before row ``j``. A cut strictly inside ``(t_j, t_{j+1})`` puts row
    ``j`` in both blocks; its position ranges over that open interval.
    """
    K = len(t)
    states = []
    for j in range(K):
        nxt = float(t[j + 1]) if j + 1 < K else m
        if j > 0:
            states.append((j, j, float(t[j]), float(t[j]), True))
        states.append((j, j + 1, float(t[j]), nxt, False))
    return states


def _feasible(states, table: _RangeTable, K: int, delta: float, c: float) -> bool:
    """Is there an admissible partition with every block oscillation at most ``c``?

    Each state keeps its earliest reachable cut position; the window of
    predecessors whose block stays within ``c`` only moves right, so a
    monotone deque gives the minimum.
    """
    n = len(states)
    earliest = [math.inf] * n
    dq: deque = deque()
    pushed = 0
    left = 0
    # the start state (time 0) behaves like a cut at row 0 with position 0
    start_pos = 0.0
    for b in range(n):
        sb, eb, lo, hi, point = states[b]
        while pushed < b:
            s_a, _, _, _, _ = states[pushed]
            while dq and earliest[dq[-1]] >= earliest[pushed]:
                dq.pop()
            dq.append(pushed)
            pushed += 1
        while left < b and table.osc(states[left][0], eb) > c:
            left += 1
        while dq and dq[0] < left:
            dq.popleft()
        best = math.inf
        if table.osc(0, eb) <= c:
            best = start_pos
        if dq:
            best = min(best, earliest[dq[0]])
        if math.isinf(best):
            continue
        if point:
            if lo > best + delta:
                earliest[b] = lo
        else:
            pos = max(lo, best + delta)
            if pos < hi:
                earliest[b] = pos
    # the final block ends at m with no length condition
    if table.osc(0, K) <= c:
        return True
    return any(earliest[a] < math.inf and table.osc(states[a][0], K) <= c for a in range(n))


def _candidates(v: np.ndarray) -> np.ndarray:
    out = [np.zeros(1)]
    for k in range(v.shape[1]):
        u = np.unique(v[:, k])
        out.append((u[:, None] - u[None, :])[np.triu_indices(len(u), 0)].__abs__().ravel())
    return np.unique(np.concatenate(out))


def modulus_w_prime(f: CadlagPath, m: float, delta: float) -> float:
    """Smallest possible max oscillation over partitions of ``[0, m)``.

    Blocks ``[s, t)`` must have ``t - s > delta`` unless ``t = m``. The value
    is found by bisection over the candidate differences of path values with
    an exact feasibility test for each threshold.
    """
    if not m > 0 or not delta >= 0:
        raise ValueError("need m > 0 and delta >= 0")
    keep = f.times < m
    t, v = f.times[keep], f.values[keep]
    K = len(t)
    table = _RangeTable(v)
    if K == 1:
        return 0.0
    states = _cut_states(t, m)
    cands = _candidates(v)
    lo, hi = 0, len(cands) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if _feasible(states, table, K, delta, float(cands[mid])):
            hi = mid
        else:
            lo = mid + 1
    return float(cands[lo])


def w_prime_at_least(f: CadlagPath, m: float, delta: float, c: float) -> bool:
    """``modulus_w_prime(f, m, delta) >= c`` with a single feasibility test."""
    if not m > 0 or not delta >= 0:
        raise ValueError("need m > 0 and delta >= 0")
    keep = f.times < m
    t, v = f.times[keep], f.values[keep]
    K = len(t)
    table = _RangeTable(v)
    if table.osc(0, K) < c:
        return False
    cands = _candidates(v)
    below = cands[cands < c]
    if len(below) == 0:
        return True
    # the modulus is one of the candidates, so it is below c iff the largest one below c is feasible
    return not _feasible(_cut_states(t, m), table, K, delta, float(below[-1]))


def w_prime_brute_force(f: CadlagPath, m: float, delta: float) -> float:
    """Exhaustive search over ordered sets of cut states (small paths only)."""
    keep = f.times < m
    t, v = f.times[keep], f.values[keep]
    K = len(t)
    table = _RangeTable(v)
    states = _cut_states(t, m)
    best = math.inf
    for r in range(len(states) + 1):
        for combo in itertools.combinations(range(len(states)), r):
            pos, row, cost, ok = 0.0, 0, 0.0, True
            for i in combo:
                s, e, lo, hi, point = states[i]
                cost = max(cost, table.osc(row, e))
                nxt = max(lo, pos + delta)
                if point:
                    ok = lo > pos + delta
                else:
                    ok = nxt < hi
                if not ok:
                    break
                pos, row = (lo if point else nxt), s
            if ok:
                best = min(best, max(cost, table.osc(row, K)))
    return best


def w_prime_breakpoint_cuts(f: CadlagPath, m: float, delta: float) -> float:
    """The same infimum with cuts restricted to breakpoints of ``f``."""
    keep = f.times < m
    t, v = f.times[keep], f.values[keep]
    K = len(t)
    table = _RangeTable(v)
    best = [math.inf] * K
    best[0] = 0.0
    for k in range(1, K):
        for j in range(k):
            if t[k] - t[j] > delta:
                best[k] = min(best[k], max(best[j], table.osc(j, k)))
    return min(max(best[j], table.osc(j, K)) for j in range(K))


@dataclass
class ModulusReport:
    m: float
    kind: str
    grid: List[Tuple[float, float]] = field(default_factory=list)


def modulus_report(f: CadlagPath, m: float, deltas: Sequence[float], kind: str = "w") -> ModulusReport:
    fn = modulus_w if kind == "w" else modulus_w_prime
    return ModulusReport(m, kind, [(float(d), fn(f, m, d)) for d in deltas])


# -- probes ---------------------------------------------------------------------------


@dataclass
class ProbeRow:
    n: int
    delta: float
    eps: float
    eta: float
    lhs: float
    lhs_se: float
    rhs: float
    rhs_se: float
    ok: bool


def tightness_probe(specs: Sequence[Tuple[int, RegenerativeSpec]], m: float, eta: float,
                    deltas: Sequence[float], eps_grid: Sequence[float], phi: SizeFunctional,
                    samples: int, seed: int) -> List[ProbeRow]:
    """Estimate both sides of the oscillation bound on synthesized paths.

    ``lhs = P(w'_m(X, delta) >= 4 eta)`` and
    ``rhs = P(w'_m(Phi_eps X, delta) >= 2 eta) + P(v_m(bar Phi_eps X) >= eta)``.
    The inequality holds path by path, so a row fails only through a bug.
    """
    rows = []
    for n, spec in specs:
        paths = [synthesize(spec, m, stream(seed, i)) for i in range(samples)]
        big = {eps: [truncate_small(f, phi, eps) for f in paths] for eps in eps_grid}
        small_sup = {eps: np.array([sup_norm(truncate_big(f, phi, eps), m) for f in paths])
                     for eps in eps_grid}
        for delta in deltas:
            lhs_ind = np.array([w_prime_at_least(f, m, delta, 4 * eta) for f in paths], float)
            lhs = Accumulator().add(lhs_ind).estimate()
            for eps in eps_grid:
                a = np.array([w_prime_at_least(g, m, delta, 2 * eta) for g in big[eps]], float)
                b = (small_sup[eps] >= eta).astype(float)
                if phi.kind == "height" and eps < eta and b.any():
                    raise AssertionError("small part exceeds eta although eps < eta")
                # the sum of the two probabilities bounds the probability of the union
                est_a = Accumulator().add(a).estimate()
                est_b = Accumulator().add(b).estimate()
                rhs_val = est_a.value + est_b.value
                rhs_se = math.hypot(est_a.std_error, est_b.std_error)
                ok = bool(np.all(lhs_ind <= np.minimum(a + b, 1.0))) and \
                    lhs.value <= rhs_val + 3 * math.hypot(lhs.std_error, rhs_se)
                rows.append(ProbeRow(n, float(delta), float(eps), eta, lhs.value, lhs.std_error,
                                     rhs_val, rhs_se, ok))
    return rows


@dataclass
class BoundRow:
    n: int
    eps: float
    eta: float
    lhs: float
    lhs_se: float
    rhs: float
    alpha: float
    lam: float
    ok: bool


def small_part_bound_check(specs, m: float, eta: float, eps_grid, phi: SizeFunctional,
                           samples: int, seed: int, alphas=(0.25, 0.5, 1.0, 2.0, 4.0),
                           lams=(0.5, 1.0, 2.0, 4.0, 8.0), tail_samples: int = 20000,
                           cap: float = 50.0) -> List[BoundRow]:
    """Compare ``P(v_m(bar Phi_eps X_n) >= eta)`` with the bound minimized over ``(alpha, lam)``.

    The conditional tail ``N_n(v_inf >= eta | phi <= eps)`` is estimated from
    unconditioned draws; the cost ``N_n(1 - e^{-lam T})`` uses the sampler's
    exact value when it has one.
    """
    from .regen import _mc_small_cost
    from .sizes import height

    rows = []
    for n, spec in specs:
        paths = [synthesize(spec, m, stream(seed, i)) for i in range(samples)]
        sample_rng = stream(seed, 10**9 + 2)
        tail_draws = [spec.sampler.draw(sample_rng, cap) for _ in range(tail_samples)]
        heights = np.array([height(e) for e in tail_draws])
        sizes = np.array([phi(e) for e in tail_draws])
        for eps in eps_grid:
            ind = np.array([sup_norm(truncate_big(f, phi, eps), m) >= eta for f in paths], float)
            lhs = Accumulator().add(ind).estimate()
            sel = sizes <= eps
            small_tail = float(np.mean(heights[sel] >= eta)) if sel.any() else 0.0
            best = (math.inf, math.nan, math.nan)
            for lam in lams:
                cost = spec.sampler.small_cost(lam)
                if cost is None:
                    cost = _mc_small_cost(spec, None, math.inf, lam, tail_samples, seed, cap).value \
                        / spec.mass_scale
                for alpha in alphas:
                    r = overline_phi_bound(alpha, lam, m, spec.mass_scale, spec.holding_rate,
                                           small_tail, cost)
                    if r < best[0]:
                        best = (r, alpha, lam)
            ok = lhs.value <= best[0] + 3 * lhs.std_error
            rows.append(BoundRow(n, eps, eta, lhs.value, lhs.std_error, best[0], best[1], best[2], ok))
    return rows
