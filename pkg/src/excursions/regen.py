"""Excursion measures of regenerative step processes and their scaling checks.

A regenerative process here alternates holds at the anchor (exponential with
rate ``b``, or zero when ``b`` is infinite) with excursions drawn from a
probability law. Masses are reported after multiplying by ``mass_scale``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np
from scipy.linalg import solve_banded

from .paths import INF, CadlagPath, hitting_time
from .sizes import SizeFunctional, extract_big, height


def stream(seed: int, index: int) -> np.random.Generator:
    """Independent generator for sample ``index`` of run ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(index)])))


# -- Monte Carlo bookkeeping --------------------------------------------------


@dataclass(frozen=True)
class MCEstimate:
    value: float
    std_error: float
    n_samples: int
    seed: Optional[int] = None

    def covers(self, target: float, z: float = 3.0, atol: float = 0.0) -> bool:
        return abs(self.value - target) <= z * self.std_error + atol


@dataclass
class Accumulator:
    """Mergeable running sums; merging partial results gives the same estimate."""
    count: int = 0
    total: float = 0.0
    total_sq: float = 0.0

    def add(self, x) -> "Accumulator":
        x = np.asarray(x, dtype=float).ravel()
        self.count += x.size
        self.total += float(x.sum())
        self.total_sq += float((x * x).sum())
        return self

    def merge(self, other: "Accumulator") -> "Accumulator":
        return Accumulator(self.count + other.count, self.total + other.total,
                           self.total_sq + other.total_sq)

    def estimate(self, scale: float = 1.0, seed=None) -> MCEstimate:
        if self.count == 0:
            return MCEstimate(math.nan, math.nan, 0, seed)
        mean = self.total / self.count
        var = max(self.total_sq / self.count - mean * mean, 0.0)
        se = math.sqrt(var / max(self.count - 1, 1))
        return MCEstimate(scale * mean, scale * se, self.count, seed)


# -- excursion samplers ---------------------------------------------------------


class ExcursionSampler:
    """Probability law of one excursion; subclasses may know exact masses."""

    anchor = np.zeros(1)

    def draw(self, rng: np.random.Generator, max_length: float = INF) -> CadlagPath:
        raise NotImplementedError

    def draw_big(self, phi: SizeFunctional, eps: float, rng, max_length: float = INF,
                 max_tries: int = 10**7) -> CadlagPath:
        """Draw conditioned on ``phi(e) > eps`` (rejection by default)."""
        for _ in range(max_tries):
            e = self.draw(rng, max_length)
            if phi(e) > eps:
                return e
        raise RuntimeError("rejection sampler exhausted its budget")

    def tail_mass(self, phi: SizeFunctional, eps: float) -> Optional[float]:
        """Exact ``P(phi(e) > eps)`` when known."""
        return None

    def small_cost(self, lam: float, phi: Optional[SizeFunctional] = None,
                   eps: float = INF) -> Optional[float]:
        """Exact ``E[1 - exp(-lam T); phi(e) <= eps]`` when known (all of it if ``phi`` is None)."""
        return None


def _walk_to_zero(x0: int, rng, max_steps: int) -> np.ndarray:
    """Positions of a simple walk from ``x0 > 0`` up to its first zero, capped."""
    out = [np.array([x0], dtype=np.int64)]
    x, done, chunk = x0, 0, 64
    while done < max_steps:
        k = min(chunk, max_steps - done)
        steps = np.where(rng.random(k) < 0.5, 1, -1)
        pos = x + np.cumsum(steps)
        hit = np.flatnonzero(pos == 0)
        if len(hit):
            out.append(pos[: hit[0] + 1])
            return np.concatenate(out)
        out.append(pos)
        x = int(pos[-1])
        done += k
        chunk = min(chunk * 2, 1 << 16)
    return np.concatenate(out)


class SRWExcursionSampler(ExcursionSampler):
    """Excursions of the simple random walk scaled by ``1/n`` in time, ``1/sqrt(n)`` in space.

    An excursion starts at ``+-1`` and is the walk until its first return to 0;
    ``k`` steps give length ``k/n``.
    """

    def __init__(self, n: int):
        if n < 1:
            raise ValueError("n must be a positive integer")
        self.n = int(n)
        self.sqrt_n = math.sqrt(self.n)

    def __repr__(self):
        return f"SRWExcursionSampler(n={self.n})"

    def level(self, eps: float) -> int:
        """Smallest integer ``m >= 1`` with ``m / sqrt(n) > eps``."""
        m = max(int(math.floor(eps * self.sqrt_n)), 0)
        while m / self.sqrt_n > eps and m > 0:
            m -= 1
        while not m / self.sqrt_n > eps:
            m += 1
        return max(m, 1)

    def _max_steps(self, max_length: float) -> int:
        if math.isinf(max_length):
            return 1 << 62
        return max(int(math.floor(max_length * self.n)), 0) + 1

    def _to_path(self, pos: np.ndarray, sign: float, max_length: float) -> CadlagPath:
        times = np.arange(len(pos)) / self.n
        vals = (sign * pos / self.sqrt_n).reshape(-1, 1)
        # consecutive walk positions differ, so the breakpoints are canonical
        if pos[-1] == 0 and times[-1] <= max_length:
            return CadlagPath._trusted(times, vals, self.anchor.copy())
        keep = times < max_length
        return CadlagPath._trusted(times[keep], vals[keep], self.anchor.copy(), max_length,
                                   float(max_length))

    def draw(self, rng, max_length: float = INF) -> CadlagPath:
        sign = 1.0 if rng.random() < 0.5 else -1.0
        pos = _walk_to_zero(1, rng, self._max_steps(max_length))
        return self._to_path(pos, sign, max_length)

    def draw_big(self, phi, eps, rng, max_length: float = INF, max_tries: int = 10**7):
        if phi.kind != "height":
            return super().draw_big(phi, eps, rng, max_length, max_tries)
        m = self.level(eps)
        sign = 1.0 if rng.random() < 0.5 else -1.0
        # walk from 1 conditioned to reach m before 0: up with probability (x+1)/(2x)
        up = [1]
        x = 1
        while x < m:
            x = x + 1 if rng.random() < (x + 1) / (2 * x) else x - 1
            up.append(x)
        cap = self._max_steps(max_length)
        rest = _walk_to_zero(m, rng, max(cap - len(up) + 1, 0))
        pos = np.concatenate((np.asarray(up, dtype=np.int64), rest[1:]))
        if len(pos) > cap + 1:
            pos = pos[: cap + 1]
        return self._to_path(pos, sign, max_length)

    def tail_mass(self, phi, eps):
        if phi.kind == "height":
            return 1.0 / self.level(eps)
        if phi.kind == "length":
            # k > K where K is the largest step count with k/n <= eps
            K = int(math.floor(eps * self.n))
            while (K + 1) / self.n <= eps:
                K += 1
            while K >= 0 and K / self.n > eps:
                K -= 1
            if K < 0:
                return 1.0
            j = (K + 1) // 2
            return _central_ratio(j)
        return None

    def small_cost(self, lam, phi=None, eps=INF):
        a = lam / self.n
        s = math.exp(-a)
        if phi is None or math.isinf(eps):
            # generating function of the passage time from 1 to 0: (1 - sqrt(1 - s^2)) / s
            return (math.expm1(-a) + math.sqrt(-math.expm1(-2 * a))) / s
        if phi.kind != "height":
            return None
        M = self.level(eps) - 1
        if M < 1:
            return 0.0
        return _confined_cost(s, M) - 1.0 / (M + 1)


def _central_ratio(j: int) -> float:
    """``C(2j, j) / 4^j`` without overflow."""
    return math.exp(math.lgamma(2 * j + 1) - 2 * math.lgamma(j + 1) - 2 * j * math.log(2.0))


def _confined_cost(s: float, M: int) -> float:
    """``E_1[1 - s^k 1{walk stays below M + 1}]`` from a tridiagonal solve.

    ``u(x) = 1 - E_x[s^k; max <= M]`` solves ``u - s/2 (u(x+1) + u(x-1)) = 1 - s``
    with ``u(0) = 0`` and ``u(M + 1) = 1``.
    """
    ab = np.zeros((3, M))
    ab[0, 1:] = -s / 2
    ab[1, :] = 1.0
    ab[2, :-1] = -s / 2
    rhs = np.full(M, 1.0 - s)
    rhs[-1] += s / 2
    return float(solve_banded((1, 1), ab, rhs)[0])


# -- regenerative specification ---------------------------------------------------


@dataclass
class RegenerativeSpec:
    """Holds at the anchor with rate ``holding_rate`` alternate with excursions.

    ``mass_scale`` turns probabilities under the excursion law into masses.
    """
    holding_rate: float
    sampler: ExcursionSampler
    mass_scale: float = 1.0
    drift: float = 0.0
    anchor: np.ndarray = field(default_factory=lambda: np.zeros(1))

    def __post_init__(self):
        if not self.holding_rate > 0 or not self.mass_scale > 0 or self.drift < 0:
            raise ValueError("holding rate and mass scale must be positive, drift nonnegative")

    def hold(self, rng) -> float:
        if math.isinf(self.holding_rate):
            return 0.0
        return float(rng.exponential(1.0 / self.holding_rate))


def srw_spec(n: int) -> RegenerativeSpec:
    """The scaled walk with exponential holds: ``b_n = n``, ``c_n = sqrt(n)``."""
    return RegenerativeSpec(float(n), SRWExcursionSampler(n), math.sqrt(n))


def _motif_duration(e: CadlagPath) -> float:
    T = hitting_time(e)
    if math.isfinite(T):
        return T
    return e.killed_at if e.killed_at is not None else e.horizon


def iter_cycles(spec: RegenerativeSpec, horizon: float, rng):
    """Yield ``(start, motif)`` for each excursion starting before ``horizon``.

    The motif drawn last is cut at the horizon. ``synthesize`` is built on
    this iterator, so consumers that stop early see the same randomness.
    """
    t = 0.0
    while True:
        t += spec.hold(rng)
        if t >= horizon:
            return
        e = spec.sampler.draw(rng, max_length=horizon - t)
        dur = _motif_duration(e)
        if dur == 0:
            raise ValueError("sampler produced an empty excursion")
        yield t, e
        t += dur
        if t >= horizon:
            return


def synthesize(spec: RegenerativeSpec, horizon: float, rng) -> CadlagPath:
    """One path on ``[0, horizon]`` by concatenating holds and excursions."""
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    anchor = np.asarray(spec.anchor, float).reshape(-1)
    times, values = [np.zeros(1)], [anchor.reshape(1, -1)]
    killed = None
    for t, e in iter_cycles(spec, horizon, rng):
        dur = _motif_duration(e)
        keep = e.times < dur
        times.append(e.times[keep] + t)
        values.append(e.values[keep])
        if math.isfinite(hitting_time(e)) or e.killed_at < horizon - t:
            # motifs hand back to the anchor when they end
            times.append(np.array([t + dur]))
            values.append(anchor.reshape(1, -1))
        else:
            killed = horizon
    tt = np.concatenate(times)
    vv = np.vstack(values)
    inside = tt <= horizon
    tt, vv = tt[inside], vv[inside]
    last = np.append(tt[1:] != tt[:-1], True)
    return CadlagPath(tt[last], vv[last], anchor, horizon, killed)


class ConditionedSampler(ExcursionSampler):
    """``sampler`` conditioned on ``phi > floor``."""

    def __init__(self, sampler: ExcursionSampler, phi: SizeFunctional, floor: float):
        self.base, self.phi, self.floor = sampler, phi, floor
        self.anchor = sampler.anchor

    def draw(self, rng, max_length: float = INF):
        return self.base.draw_big(self.phi, self.floor, rng, max_length)


def ito_spec(sampler: ExcursionSampler, phi: SizeFunctional, floor: float,
             mass: float, drift: float = 0.0) -> RegenerativeSpec:
    """Poisson construction keeping only excursions with ``phi > floor``.

    ``mass`` is the measure of ``{phi > floor}``; local time at the anchor runs
    at unit rate, so holds are exponential with rate ``mass / drift`` and
    vanish when there is no drift.
    """
    if mass <= 0 or drift < 0:
        raise ValueError("need positive mass and nonnegative drift")
    rate = INF if drift == 0 else mass / drift
    return RegenerativeSpec(rate, ConditionedSampler(sampler, phi, floor), mass, drift,
                            sampler.anchor)


# -- Brownian limits ----------------------------------------------------------------
# normalized so that the excursion measure of {height > x} is 1/x


def bm_height_tail(eps: float) -> float:
    return 1.0 / eps


def bm_length_tail(t: float) -> float:
    return math.sqrt(2.0 / (math.pi * t))


def bm_cost(lam: float) -> float:
    """Measure of ``1 - exp(-lam T)``."""
    return math.sqrt(2.0 * lam)


def bm_small_cost_height(lam: float, eps: float) -> float:
    """Measure of ``1 - exp(-lam T)`` on ``{height <= eps}``."""
    th = math.sqrt(2.0 * lam)
    x = th * eps
    return th / math.tanh(x) - 1.0 / eps


def bm_laplace_g_height(lam: float, eps: float) -> float:
    """``E exp(-lam g_eps)`` for Brownian motion and the height functional."""
    x = math.sqrt(2.0 * lam) * eps
    return math.tanh(x) / x


def laplace_g_formula(p: float, Q: float, lam: float, b: float) -> float:
    """``E exp(-lam g_eps)`` from ``p = P(phi > eps)``, ``Q = E[1 - e^{-lam T}; phi <= eps]``.

    ``b`` is the holding rate. The expression is arranged as the limit-ready
    ratio with ``A`` and ``R``.
    """
    if math.isinf(b):
        return p / (p + Q)
    r = lam / b
    beta = b / (lam + b)
    A = r / ((r + 1.0) * p) + Q / p
    R = lam / (lam + b) * (1.0 + Q / p)
    return beta / (1.0 + A - R)


def laplace_g_geometric(p: float, Q: float, lam: float, b: float) -> float:
    """Same quantity summed as a geometric series over small cycles."""
    beta = 1.0 if math.isinf(b) else b / (lam + b)
    return p * beta / (1.0 - ((1.0 - p) - Q) * beta)


def laplace_g_limit(p: float, Q: float, lam: float, drift: float = 0.0) -> float:
    """Limit form with masses ``p``, ``Q`` and drift ``d``: ``1 / (1 + (lam d + Q) / p)``."""
    return 1.0 / (1.0 + (lam * drift + Q) / p)


# -- checks -----------------------------------------------------------------------------


@dataclass
class CheckRow:
    n: int
    eps: float
    lam: float
    estimate: float
    std_error: float
    limit: float
    tolerance: float
    ok: bool

    @property
    def error(self) -> float:
        return abs(self.estimate - self.limit)


def _mc_small_cost(spec, phi, eps, lam, samples, seed, cap) -> MCEstimate:
    acc = Accumulator()
    rng = stream(seed, 0)
    for _ in range(samples):
        e = spec.sampler.draw(rng, cap)
        T = hitting_time(e)
        small = phi is None or phi(e) <= eps
        acc.add(-math.expm1(-lam * T) if small else 0.0)
    return acc.estimate(spec.mass_scale, seed)


def _mc_tail(spec, phi, eps, samples, seed, cap) -> MCEstimate:
    acc = Accumulator()
    rng = stream(seed, 0)
    for _ in range(samples):
        acc.add(float(phi(spec.sampler.draw(rng, cap)) > eps))
    return acc.estimate(spec.mass_scale, seed)


def check_h1(specs: Sequence[tuple], phi: SizeFunctional, eps_grid, limit: Callable[[float], float],
             tolerance: Callable[[int, float], float], samples: int = 0, seed: int = 0,
             cap: float = 50.0) -> List[CheckRow]:
    """Scaled tail masses ``c_n N_n(phi > eps)`` against ``limit(eps)``.

    ``specs`` holds ``(n, RegenerativeSpec)`` pairs. Exact masses are used when
    the sampler provides them, Monte Carlo otherwise.
    """
    rows = []
    for n, spec in specs:
        for eps in eps_grid:
            exact = spec.sampler.tail_mass(phi, eps)
            if exact is not None:
                est = MCEstimate(spec.mass_scale * exact, 0.0, 0)
            else:
                est = _mc_tail(spec, phi, eps, samples, seed, cap)
            tol = tolerance(n, eps)
            rows.append(CheckRow(n, eps, math.nan, est.value, est.std_error, limit(eps), tol,
                                 est.covers(limit(eps), atol=tol)))
    return rows


def check_h2(specs, phi, eps_grid, lam_grid, limit: Callable[[float, float], float],
             tolerance: Callable[[int, float, float], float], samples: int = 0, seed: int = 0,
             cap: float = 50.0) -> List[CheckRow]:
    """Scaled small-excursion costs ``c_n N_n(1 - e^{-lam T}; phi <= eps)``."""
    rows = []
    for n, spec in specs:
        for eps in eps_grid:
            for lam in lam_grid:
                exact = spec.sampler.small_cost(lam, phi, eps)
                if exact is not None:
                    est = MCEstimate(spec.mass_scale * exact, 0.0, 0)
                else:
                    est = _mc_small_cost(spec, phi, eps, lam, samples, seed, cap)
                target = limit(lam, eps)
                tol = tolerance(n, eps, lam)
                rows.append(CheckRow(n, eps, lam, est.value, est.std_error, target, tol,
                                     est.covers(target, atol=tol)))
    return rows


def check_h3(specs, lam_grid, limit: Callable[[float], float],
             tolerance: Callable[[int, float], float], samples: int = 0, seed: int = 0,
             cap: float = 50.0) -> List[CheckRow]:
    """Scaled total costs ``c_n N_n(1 - e^{-lam T})``."""
    rows = []
    for n, spec in specs:
        for lam in lam_grid:
            exact = spec.sampler.small_cost(lam)
            if exact is not None:
                est = MCEstimate(spec.mass_scale * exact, 0.0, 0)
            else:
                est = _mc_small_cost(spec, None, INF, lam, samples, seed, cap)
            target = limit(lam)
            tol = tolerance(n, lam)
            rows.append(CheckRow(n, math.nan, lam, est.value, est.std_error, target, tol,
                                 est.covers(target, atol=tol)))
    return rows


@dataclass
class SandwichRow:
    n: int
    eps: float
    lam: float
    h2: float
    h3: float
    tail: float
    std_error: float
    ok: bool


def sandwich_check(specs, phi: SizeFunctional, eps_grid, lam_grid, samples: int = 0,
                   seed: int = 0, cap: float = 50.0) -> List[SandwichRow]:
    """``H2 <= H3 <= H2 + c_n N_n(phi > eps)`` on every ``(n, eps, lam)``.

    Without exact masses all three quantities come from one sample of draws.
    """
    rows = []
    for n, spec in specs:
        for eps in eps_grid:
            for lam in lam_grid:
                h2 = spec.sampler.small_cost(lam, phi, eps)
                h3 = spec.sampler.small_cost(lam)
                tail = spec.sampler.tail_mass(phi, eps)
                se = 0.0
                if h2 is None or h3 is None or tail is None:
                    rng = stream(seed, 0)
                    a2, a3, at = Accumulator(), Accumulator(), Accumulator()
                    for _ in range(samples):
                        e = spec.sampler.draw(rng, cap)
                        cost = -math.expm1(-lam * hitting_time(e))
                        big = phi(e) > eps
                        a2.add(0.0 if big else cost)
                        a3.add(cost)
                        at.add(float(big))
                    e2, e3, et = (a.estimate() for a in (a2, a3, at))
                    h2, h3, tail = e2.value, e3.value, et.value
                    se = spec.mass_scale * max(e2.std_error, e3.std_error, et.std_error)
                c = spec.mass_scale
                h2, h3, tail = c * h2, c * h3, c * tail
                ok = h2 <= h3 + 3 * se + 1e-12 and abs(h3 - h2) <= tail + 3 * se + 1e-12
                rows.append(SandwichRow(n, eps, lam, h2, h3, tail, se, ok))
    return rows


def trend_ok(errors: Sequence[float], slack: Sequence[float] = (), inversions: int = 1) -> bool:
    """Errors decrease along the grid, allowing ``inversions`` increases beyond ``slack``."""
    slack = list(slack) or [0.0] * len(errors)
    bad = sum(1 for i in range(1, len(errors)) if errors[i] > errors[i - 1] + slack[i] + slack[i - 1])
    return bad <= inversions


def exact_laplace_g(spec: RegenerativeSpec, phi: SizeFunctional, eps: float, lam: float) -> float:
    """``E exp(-lam g_eps)`` from the exact masses of the sampler."""
    p = spec.sampler.tail_mass(phi, eps)
    Q = spec.sampler.small_cost(lam, phi, eps)
    if p is None or Q is None:
        raise ValueError("sampler has no exact masses for this functional")
    return laplace_g_formula(p, Q, lam, spec.holding_rate)


def g_epsilon_sample(spec: RegenerativeSpec, phi: SizeFunctional, eps: float, horizon: float,
                     rng) -> float:
    """``g_eps`` of one synthesized path, +inf if no big excursion starts before ``horizon``.

    Equal to ``extract_big(synthesize(spec, horizon, rng), phi, eps)[0]`` but
    stops drawing at the first big excursion.
    """
    for t, e in iter_cycles(spec, horizon, rng):
        if phi(e) > eps:
            return t
    return INF


def g_samples(spec, phi, eps, samples: int, seed: int, horizon: float = 4.0,
              first: int = 0) -> np.ndarray:
    """``g_eps`` of synthesized paths ``first .. first+samples-1`` (+inf when censored)."""
    return np.array([g_epsilon_sample(spec, phi, eps, horizon, stream(seed, i))
                     for i in range(first, first + samples)])


def mc_laplace_g(spec, phi, eps, lam, samples: int, seed: int, horizon: float = 4.0,
                 first: int = 0) -> Accumulator:
    """Accumulated ``exp(-lam g_eps)``; a censored ``g`` contributes 0."""
    g = g_samples(spec, phi, eps, samples, seed, horizon, first)
    return Accumulator().add(np.exp(-lam * g))


# -- transfer between two size functionals ----------------------------------------------


def _value_at_fraction(e: CadlagPath, u: float) -> float:
    T = hitting_time(e)
    if not math.isfinite(T):
        T = _motif_duration(e)
    i = int(np.searchsorted(e.times, u * T, side="right")) - 1
    return float(np.abs(e.values[max(i, 0)]).max())


# bounded nonnegative test functions with their suprema
DEFAULT_TEST_FUNCTIONS = {
    "exp_length": (lambda e: math.exp(-min(hitting_time(e), 50.0)), 1.0),
    "atan_height": (lambda e: math.atan(height(e)), math.pi / 2),
    "mid_value": (lambda e: math.tanh(_value_at_fraction(e, 0.5)), 1.0),
    "quarter_value": (lambda e: math.tanh(_value_at_fraction(e, 0.25)), 1.0),
    "long": (lambda e: float(hitting_time(e) > 0.5), 1.0),
}


@dataclass
class TransferRow:
    name: str
    eps1: float
    eps2: float
    restricted: float
    unrestricted: float
    width: float
    restricted_se: float
    unrestricted_se: float
    width_se: float
    bayes: float
    bayes_se: float
    ok: bool


def transfer_check(phi1: SizeFunctional, phi2: SizeFunctional, spec: RegenerativeSpec,
                   eps1: float, eps2: float, samples: int, seed: int, test_functions=None,
                   cap: float = 50.0) -> List[TransferRow]:
    """Sandwich of ``N(f | phi2 > eps2)`` between restricted expectations.

    Under ``N(. | phi2 > eps2)`` the row reports the restricted mean
    ``N(f 1{phi1 > eps1} | .)``, the unrestricted mean and the width
    ``M N(phi1 <= eps1 | .)``. The restricted mean is also recomputed from
    draws under ``N(. | phi1 > eps1)`` through the ratio of tail masses, which
    is the identity that carries convergence from one functional to the other.
    """
    tfs = test_functions or DEFAULT_TEST_FUNCTIONS
    p1 = spec.sampler.tail_mass(phi1, eps1)
    p2 = spec.sampler.tail_mass(phi2, eps2)
    if p1 is None or p2 is None:
        p1 = _mc_tail(spec, phi1, eps1, samples, seed + 7, cap).value / spec.mass_scale
        p2 = _mc_tail(spec, phi2, eps2, samples, seed + 7, cap).value / spec.mass_scale
    rng_a, rng_b = stream(seed, 0), stream(seed, 1)
    under2 = [spec.sampler.draw_big(phi2, eps2, rng_a, cap) for _ in range(samples)]
    under1 = [spec.sampler.draw_big(phi1, eps1, rng_b, cap) for _ in range(samples)]
    keep1 = np.array([phi1(e) > eps1 for e in under2], float)
    keep2 = np.array([phi2(e) > eps2 for e in under1], float)
    rows = []
    for name, (F, M) in tfs.items():
        f2 = np.array([F(e) for e in under2])
        f1 = np.array([F(e) for e in under1])
        restricted = Accumulator().add(f2 * keep1).estimate()
        unrestricted = Accumulator().add(f2).estimate()
        width = Accumulator().add(M * (1.0 - keep1)).estimate()
        bayes = Accumulator().add(f1 * keep2).estimate(p1 / p2)
        z = 3.0
        ok = (restricted.value <= unrestricted.value + 1e-12
              and unrestricted.value <= restricted.value + width.value + 1e-12
              and abs(bayes.value - restricted.value)
              <= z * math.hypot(bayes.std_error, restricted.std_error))
        rows.append(TransferRow(name, eps1, eps2, restricted.value, unrestricted.value, width.value,
                                restricted.std_error, unrestricted.std_error, width.std_error,
                                bayes.value, bayes.std_error, ok))
    return rows


# -- bound on the oscillation of the small part ---------------------------------------------


def overline_phi_bound(alpha: float, lam: float, m: float, c_n: float, b_n: float,
                       small_tail: float, finite_cost: float, infinite_term: float = 0.0) -> float:
    """Right side of the bound on ``P(v_m(small part of X_n) >= eta)``.

    ``small_tail`` is ``N_n(v_inf >= eta | phi <= eps, T < inf)``,
    ``finite_cost`` is ``N_n(1 - exp(-lam T) | T < inf)`` and
    ``infinite_term`` is ``N_n(v_m >= eta, phi <= eps | T = inf)``, which is 0
    for samplers without infinite excursions.
    """
    if alpha <= 0 or lam <= 0:
        raise ValueError("alpha and lam must be positive")
    k = math.floor(alpha * c_n)
    return (alpha * c_n * small_tail
            + math.exp(lam * m - k * lam / (lam + b_n) - k * finite_cost)
            + infinite_term)
