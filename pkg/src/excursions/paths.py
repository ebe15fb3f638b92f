"""Piecewise-constant cadlag paths, time changes and J1 distance brackets.

A path is stored as a strictly increasing array of breakpoint times starting
at 0 and a ``(k, d)`` array of values; the value at ``t`` is the value of the
last breakpoint at or before ``t``.  All distances use the max-norm on R^d.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass
from pathlib import Path as FsPath
from typing import Optional, Sequence

import numpy as np

INF = math.inf


class PathFormatError(ValueError):
    """Raised when a serialized path cannot be parsed."""


class CadlagPath:
    """Immutable right-continuous step path with values in R^d."""

    __slots__ = ("times", "values", "anchor", "horizon", "killed_at")

    def __init__(self, times, values, anchor=None, horizon=None, killed_at=None):
        times = np.asarray(times, dtype=float).reshape(-1)
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values.reshape(-1, 1)
        if len(times) == 0 or len(times) != len(values):
            raise ValueError("need at least one breakpoint and one value per time")
        if times[0] != 0.0:
            raise ValueError("first breakpoint time must be 0")
        if np.any(np.diff(times) <= 0):
            raise ValueError("breakpoint times must be strictly increasing")
        d = values.shape[1]
        if anchor is None:
            anchor = np.zeros(d)
        anchor = np.asarray(anchor, dtype=float).reshape(-1)
        if anchor.shape != (d,):
            raise ValueError("anchor dimension does not match values")
        if horizon is None:
            horizon = INF
        horizon = float(horizon)
        if not horizon > 0:
            raise ValueError("horizon must be positive")
        if times[-1] > horizon:
            raise ValueError("breakpoint beyond horizon")
        if killed_at is not None:
            killed_at = float(killed_at)
            if killed_at > horizon:
                raise ValueError("killed_at must not exceed the horizon")
        # drop breakpoints that do not change the value
        keep = np.ones(len(times), dtype=bool)
        keep[1:] = np.any(values[1:] != values[:-1], axis=1)
        times, values = times[keep], values[keep]
        times.flags.writeable = False
        values.flags.writeable = False
        anchor.flags.writeable = False
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "anchor", anchor)
        object.__setattr__(self, "horizon", horizon)
        object.__setattr__(self, "killed_at", killed_at)

    def __setattr__(self, name, value):
        raise AttributeError("CadlagPath is immutable")

    @classmethod
    def _trusted(cls, times, values, anchor, horizon=INF, killed_at=None) -> "CadlagPath":
        """Skip validation for arrays already in canonical form."""
        self = object.__new__(cls)
        for arr in (times, values, anchor):
            arr.flags.writeable = False
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "anchor", anchor)
        object.__setattr__(self, "horizon", float(horizon))
        object.__setattr__(self, "killed_at", killed_at)
        return self

    @classmethod
    def constant(cls, value=0.0, anchor=None, horizon=None):
        value = np.atleast_1d(np.asarray(value, dtype=float))
        return cls([0.0], value.reshape(1, -1), anchor=anchor, horizon=horizon)

    @classmethod
    def zero(cls, dimension=1, horizon=None):
        """The trivial excursion: constantly at the anchor (the origin)."""
        return cls.constant(np.zeros(dimension), horizon=horizon)

    @classmethod
    def from_steps(cls, pairs, anchor=None, horizon=None, killed_at=None):
        """Build from ``[(t0, v0), (t1, v1), ...]`` with scalar or vector values."""
        times = [p[0] for p in pairs]
        values = [np.atleast_1d(np.asarray(p[1], dtype=float)) for p in pairs]
        return cls(times, np.vstack(values), anchor, horizon, killed_at)

    @property
    def dimension(self) -> int:
        return self.values.shape[1]

    def replace(self, **kw) -> "CadlagPath":
        args = dict(times=self.times, values=self.values, anchor=self.anchor,
                    horizon=self.horizon, killed_at=self.killed_at)
        args.update(kw)
        return CadlagPath(**args)

    def at_anchor(self) -> np.ndarray:
        """Boolean mask of breakpoints whose value equals the anchor exactly."""
        return np.all(self.values == self.anchor, axis=1)

    def norms(self) -> np.ndarray:
        """Max-norm distance to the anchor at every breakpoint."""
        return np.max(np.abs(self.values - self.anchor), axis=1)

    def __eq__(self, other):
        if not isinstance(other, CadlagPath):
            return NotImplemented
        return (np.array_equal(self.times, other.times)
                and np.array_equal(self.values, other.values)
                and np.array_equal(self.anchor, other.anchor)
                and self.horizon == other.horizon
                and self.killed_at == other.killed_at)

    def same_breakpoints(self, other: "CadlagPath") -> bool:
        return (np.array_equal(self.times, other.times)
                and np.array_equal(self.values, other.values))

    __hash__ = None

    def __repr__(self):
        pts = ", ".join(
            f"{t:g}->{v[0]:g}" if len(v) == 1 else f"{t:g}->{tuple(v)}"
            for t, v in zip(self.times[:6], self.values[:6]))
        more = "" if len(self.times) <= 6 else f", ... ({len(self.times)} breakpoints)"
        return f"CadlagPath({pts}{more}; horizon={self.horizon:g})"

    def __call__(self, t):
        return eval_path(self, t)


def eval_path(f: CadlagPath, t: float) -> np.ndarray:
    """Value of ``f`` at time ``t``; the last breakpoint value persists."""
    if t < 0:
        raise ValueError("time must be nonnegative")
    i = int(np.searchsorted(f.times, t, side="right")) - 1
    return f.values[i].copy()


def eval_many(f: CadlagPath, ts) -> np.ndarray:
    idx = np.searchsorted(f.times, np.asarray(ts, dtype=float), side="right") - 1
    return f.values[idx]


def hitting_time(f: CadlagPath) -> float:
    """First time ``t > 0`` with ``f(t) == anchor``; +inf if none is recorded."""
    hits = f.at_anchor()
    if hits[0]:
        return 0.0
    idx = np.flatnonzero(hits)
    if len(idx) == 0:
        return INF
    return float(f.times[idx[0]])


def shift(f: CadlagPath, t: float) -> CadlagPath:
    """The shifted path ``s -> f(t + s)``."""
    if t < 0 or t > f.horizon:
        raise ValueError(f"shift {t} outside [0, horizon={f.horizon}]")
    if t == 0:
        return f
    i = int(np.searchsorted(f.times, t, side="right")) - 1
    times = np.concatenate(([0.0], f.times[i + 1:] - t))
    killed = None if f.killed_at is None else max(f.killed_at - t, 0.0)
    return CadlagPath(times, f.values[i:], f.anchor, f.horizon - t, killed)


def concat(f: CadlagPath, t: float, h: CadlagPath) -> CadlagPath:
    """``f`` on ``[0, t)`` followed by ``h(. - t)`` on ``[t, inf)``."""
    if t < 0:
        raise ValueError("concatenation time must be nonnegative")
    _check_compatible(f, h)
    keep = f.times < t
    times = np.concatenate((f.times[keep], h.times + t))
    values = np.vstack((f.values[keep], h.values))
    killed = None if h.killed_at is None else h.killed_at + t
    return CadlagPath(times, values, f.anchor, t + h.horizon, killed)


def _check_compatible(f: CadlagPath, h: CadlagPath):
    if f.dimension != h.dimension:
        raise ValueError(f"dimension mismatch: {f.dimension} vs {h.dimension}")
    if not np.array_equal(f.anchor, h.anchor):
        raise ValueError("paths have different anchors")


def merged_grid(f: CadlagPath, h: CadlagPath, m: float) -> np.ndarray:
    grid = np.union1d(f.times, h.times)
    return grid[grid <= m]


def sup_distance(f: CadlagPath, h: CadlagPath, m: float) -> float:
    """Exact ``sup_{[0, m]} |f - h|`` computed on the merged breakpoint grid."""
    _check_compatible(f, h)
    grid = merged_grid(f, h, m)
    diff = np.abs(eval_many(f, grid) - eval_many(h, grid))
    return float(diff.max())


def sup_norm(f: CadlagPath, m: float = INF) -> float:
    """``v_m(f)``: sup over ``[0, m]`` of the distance to the anchor."""
    return float(f.norms()[f.times <= m].max())


# -- time changes ---------------------------------------------------------


class TimeChange:
    """Continuous increasing piecewise-linear bijection of [0, inf) with lam(0) = 0.

    Beyond the last knot the map continues with slope one.
    """

    def __init__(self, knots_x, knots_y):
        x = np.concatenate(([0.0], np.asarray(knots_x, dtype=float)))
        y = np.concatenate(([0.0], np.asarray(knots_y, dtype=float)))
        if np.any(np.diff(x) <= 0) or np.any(np.diff(y) <= 0):
            raise ValueError("time change must be strictly increasing")
        self.x, self.y = x, y

    @classmethod
    def identity(cls):
        return cls([], [])

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.interp(t, self.x, self.y)
        tail = t > self.x[-1]
        return np.where(tail, self.y[-1] + (t - self.x[-1]), out)

    def inverse(self, s):
        s = np.asarray(s, dtype=float)
        out = np.interp(s, self.y, self.x)
        tail = s > self.y[-1]
        return np.where(tail, self.x[-1] + (s - self.y[-1]), out)

    def distance_to_identity(self, m: float) -> float:
        """``sup_{[0, m]} |lam(t) - t|``; extremes sit on knots or at ``m``."""
        pts = np.append(self.x[self.x <= m], m)
        return float(np.max(np.abs(self(pts) - pts)))


def compose(f: CadlagPath, lam: TimeChange) -> CadlagPath:
    """The path ``t -> f(lam(t))``."""
    times = lam.inverse(f.times)
    times[0] = 0.0
    horizon = float(lam.inverse(f.horizon)) if math.isfinite(f.horizon) else INF
    return CadlagPath(times, f.values, f.anchor, max(horizon, times[-1]))


@dataclass(frozen=True)
class J1Bracket:
    lower: float
    upper: float
    witness: TimeChange

    def __post_init__(self):
        if self.lower > self.upper:
            raise ValueError("lower bound exceeds upper bound")


def jumps(f: CadlagPath, m: float):
    """Times in ``(0, m]`` where ``f`` jumps, with the jump vectors."""
    sel = (f.times > 0) & (f.times <= m)
    idx = np.flatnonzero(sel)
    return f.times[idx], f.values[idx] - f.values[idx - 1]


def _matched_cost(f, h, pairs, m):
    """Cost of the time change through ``(t_h, t_f)`` pairs (brute-force route)."""
    lam = TimeChange([p[0] for p in pairs], [p[1] for p in pairs])
    fl = compose(f, lam)
    return max(lam.distance_to_identity(m), sup_distance(fl, h, m)), lam


def _segment_cost(f, h, a, b, m):
    """Cost of mapping ``[a_h, b_h)`` linearly onto ``[a_f, b_f)``.

    ``b`` is ``None`` for the final slope-one segment, which is closed at ``m``.
    """
    ah, af = a
    closed = b is None
    if closed:
        bh = max(m, ah)
        bf = af + (bh - ah)
    else:
        bh, bf = b
    shift_cost = max(abs(af - ah), abs(bf - bh))
    f_idx = np.searchsorted(f.times, af, side="right") - 1
    if closed:
        sel = (f.times > af) & (f.times <= bf)
        hsel = (h.times > ah) & (h.times <= bh)
    else:
        sel = (f.times > af) & (f.times < bf)
        hsel = (h.times > ah) & (h.times < bh)
    if bf > af:
        pulled = ah + (f.times[sel] - af) * ((bh - ah) / (bf - af))
    else:
        pulled = np.empty(0)
    pulled_all = np.concatenate(([ah], pulled))
    fvals = np.vstack((f.values[f_idx:f_idx + 1], f.values[sel][:len(pulled)]))
    grid = np.union1d(pulled_all, h.times[hsel])
    grid = grid[grid <= m]
    if len(grid) == 0:
        return shift_cost
    fv = fvals[np.searchsorted(pulled_all, grid, side="right") - 1]
    hv = eval_many(h, grid)
    return max(shift_cost, float(np.max(np.abs(fv - hv))))


def _lower_bound(f, h, m):
    """Certified lower bound on the J1 distance over [0, m]."""
    lo = float(np.max(np.abs(f.values[0] - h.values[0])))
    # a jump of h at t <= m must meet a jump of f at lam(t), possibly past m
    for tx, ty, from_f in ((jumps(h, m), jumps(f, INF), False),
                           (jumps(f, m), jumps(h, m), True)):
        for t, j in zip(*tx):
            size = float(np.max(np.abs(j)))
            r = size / 2
            for s, k in zip(*ty):
                r = min(r, max(abs(s - t), float(np.max(np.abs(k - j))) / 2))
            if from_f:
                r = min(r, m - t)
            lo = max(lo, r)
    return lo


def j1_distance(f: CadlagPath, h: CadlagPath, m: float) -> J1Bracket:
    """Bracket the Skorokhod J1 distance between ``f`` and ``h`` on ``[0, m]``.

    The upper bound is the best piecewise-linear time change through an
    order-preserving matching of jumps of ``h`` to jumps of ``f``, found by
    dynamic programming over matched pairs.  The lower bound comes from
    jumps that cannot be matched within the candidate distance.
    """
    _check_compatible(f, h)
    th, _ = jumps(h, m)
    tf, _ = jumps(f, m)
    # the identity costs ``ident``; a pair moved by at least that much cannot help
    ident = _segment_cost(f, h, (0.0, 0.0), None, m)
    nodes, keys = [(0.0, 0.0)], [(0, 0)]
    for i, a in enumerate(th):
        for j, b in enumerate(tf):
            if abs(a - b) < ident:
                nodes.append((a, b))
                keys.append((i + 1, j + 1))
    best = [INF] * len(nodes)
    back = [None] * len(nodes)
    best[0] = 0.0
    for k in range(1, len(nodes)):
        ik, jk = keys[k]
        shift_k = abs(nodes[k][0] - nodes[k][1])
        for p in range(k):
            ip, jp = keys[p]
            if ip >= ik or jp >= jk or max(best[p], shift_k) >= best[k]:
                continue
            c = max(best[p], _segment_cost(f, h, nodes[p], nodes[k], m))
            if c < best[k]:
                best[k], back[k] = c, p
    total = [max(best[k], _segment_cost(f, h, nodes[k], None, m)) for k in range(len(nodes))]
    k = int(np.argmin(total))
    chain = []
    while k:
        chain.append(nodes[k])
        k = back[k]
    chain.reverse()
    lam = TimeChange([c[0] for c in chain], [c[1] for c in chain])
    upper = float(total[int(np.argmin(total))])
    lower = float(min(_lower_bound(f, h, m), upper))
    return J1Bracket(lower, upper, lam)


def j1_upper_brute_force(f: CadlagPath, h: CadlagPath, m: float) -> float:
    """Exhaustive search over all order-preserving jump matchings."""
    th, _ = jumps(h, m)
    tf, _ = jumps(f, m)
    best = INF
    for r in range(min(len(th), len(tf)) + 1):
        for hi in itertools.combinations(range(len(th)), r):
            for fi in itertools.combinations(range(len(tf)), r):
                pairs = [(th[a], tf[b]) for a, b in zip(hi, fi)]
                best = min(best, _matched_cost(f, h, pairs, m)[0])
    return best


# -- serialization ---------------------------------------------------------


def _fmt(x: float) -> str:
    return repr(float(x))


def sidecar_path(csv_path) -> FsPath:
    return FsPath(csv_path).with_suffix(".json")


def write_path(f: CadlagPath, csv_path) -> None:
    """Write breakpoints to ``csv_path`` and metadata to the ``.json`` sidecar."""
    csv_path = FsPath(csv_path)
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"v{i + 1}" for i in range(f.dimension)])
        for t, v in zip(f.times, f.values):
            w.writerow([_fmt(t)] + [_fmt(x) for x in v])
    meta = {
        "dimension": f.dimension,
        "anchor": [float(a) for a in f.anchor],
        "horizon": _fmt(f.horizon),
        "killed_at": None if f.killed_at is None else _fmt(f.killed_at),
    }
    sidecar_path(csv_path).write_text(json.dumps(meta, indent=2) + "\n")


def read_path(csv_path) -> CadlagPath:
    csv_path = FsPath(csv_path)
    meta = {}
    side = sidecar_path(csv_path)
    if side.exists():
        try:
            meta = json.loads(side.read_text())
        except json.JSONDecodeError as exc:
            raise PathFormatError(f"{side}: invalid JSON sidecar ({exc})") from exc
    times, values = [], []
    with open(csv_path, newline="") as fh:
        rows = csv.reader(fh)
        header = next(rows, None)
        if not header or header[0].strip() != "t" or len(header) < 2:
            raise PathFormatError(f"{csv_path}:1: expected header 't,v1,...,vd'")
        d = len(header) - 1
        for lineno, row in enumerate(rows, start=2):
            if not row:
                continue
            if len(row) != d + 1:
                raise PathFormatError(f"{csv_path}:{lineno}: expected {d + 1} fields, got {len(row)}")
            try:
                nums = [float(x) for x in row]
            except ValueError:
                raise PathFormatError(f"{csv_path}:{lineno}: non-numeric field in {row!r}") from None
            if times and nums[0] <= times[-1]:
                raise PathFormatError(f"{csv_path}:{lineno}: times must be strictly increasing")
            times.append(nums[0])
            values.append(nums[1:])
    if not times:
        raise PathFormatError(f"{csv_path}: no breakpoints")
    if times[0] != 0.0:
        raise PathFormatError(f"{csv_path}:2: first breakpoint time must be 0")
    if meta.get("dimension", d) != d:
        raise PathFormatError(f"{side}: dimension {meta['dimension']} does not match CSV ({d})")
    killed = meta.get("killed_at")
    horizon = meta.get("horizon")
    return CadlagPath(
        times, values,
        anchor=meta.get("anchor"),
        horizon=float(horizon) if horizon is not None else INF,
        killed_at=float(killed) if killed is not None else None,
    )
