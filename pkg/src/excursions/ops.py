"""Excursion decomposition, truncation, subdivision patching and thinning."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path as FsPath
from typing import Callable, List, Optional, Sequence

import numpy as np

from .paths import INF, CadlagPath, concat, eval_many, shift, write_path

__all__ = [
    "ExcursionItem", "Subdivision", "decompose", "truncate_small", "truncate_big",
    "phi_S", "e_S", "psi_S", "concat", "thin", "write_excursions",
]


@dataclass
class ExcursionItem:
    left: float
    right: float
    path: CadlagPath
    size: float = math.nan
    killed: bool = False

    @property
    def length(self) -> float:
        return self.right - self.left


class Subdivision:
    """Nondecreasing sequence ``0 = s_0 <= s_1 <= ...`` padded with +inf.

    Only the finite prefix is stored; ``entry(k)`` is +inf for ``k`` at or
    beyond the cardinality.
    """

    def __init__(self, entries: Sequence[float]):
        finite = []
        for x in entries:
            x = float(x)
            if math.isinf(x):
                break
            finite.append(x)
        if not finite or finite[0] != 0.0:
            raise ValueError("a subdivision starts at 0")
        if any(b < a for a, b in zip(finite, finite[1:])):
            raise ValueError("subdivision entries must be nondecreasing")
        self.entries = tuple(finite)

    @property
    def cardinality(self) -> int:
        return len(self.entries)

    @property
    def strict(self) -> bool:
        return all(b > a for a, b in zip(self.entries, self.entries[1:]))

    def entry(self, k: int) -> float:
        return self.entries[k] if k < len(self.entries) else INF

    def clipped(self, horizon: float) -> "Subdivision":
        """Entries at or beyond ``horizon`` replaced by +inf."""
        return Subdivision([x for x in self.entries if x < horizon])

    def even_intervals(self):
        """The kept intervals ``[s_{2k+1}, s_{2k+2})`` for ``k = 0, 1, ...``."""
        k = 1
        while k < len(self.entries):
            yield self.entries[k], self.entry(k + 1)
            k += 2

    def __eq__(self, other):
        return isinstance(other, Subdivision) and self.entries == other.entries

    def __repr__(self):
        return f"Subdivision({', '.join(f'{x:g}' for x in self.entries)}, inf, ...)"


def _runs(f: CadlagPath):
    """Index ranges ``[i, j)`` of maximal runs of off-anchor breakpoints."""
    off = ~f.at_anchor()
    edges = np.diff(np.concatenate(([0], off.astype(np.int8), [0])))
    return np.flatnonzero(edges == 1), np.flatnonzero(edges == -1)


def iter_excursions(f: CadlagPath):
    """Excursions of ``f`` in order, built on demand (sizes left unset)."""
    starts, ends = _runs(f)
    n = len(f.times)
    anchor_row = f.anchor.reshape(1, -1)
    for i, j in zip(starts, ends):
        g = float(f.times[i])
        if j < n:
            d = float(f.times[j])
            # a run of off-anchor values closed by the anchor is already canonical
            times = np.append(f.times[i:j] - g, d - g)
            values = np.vstack((f.values[i:j], anchor_row))
            yield ExcursionItem(g, d, CadlagPath._trusted(times, values, f.anchor.copy()))
        else:
            hz = f.horizon - g
            if not hz > 0:
                hz = max(f.times[-1] - g, 0.0) or math.ulp(g)
            e = CadlagPath(f.times[i:] - g, f.values[i:], f.anchor, hz, hz)
            yield ExcursionItem(g, INF, e, killed=True)


def decompose(f: CadlagPath, phi: Optional[Callable] = None) -> List[ExcursionItem]:
    """Excursions of ``f`` away from its anchor, in order of their left endpoints.

    An excursion still running at the last breakpoint is flagged ``killed``;
    its right endpoint is +inf and its path is cut at the horizon.
    """
    items = list(iter_excursions(f))
    if phi is not None:
        for it in items:
            it.size = float(phi(it.path))
    return items


def _truncate(f: CadlagPath, phi, eps: float, erase_big: bool) -> CadlagPath:
    starts, ends = _runs(f)
    if len(starts) == 0:
        return f
    values = f.values.copy()
    for it, i, j in zip(decompose(f, phi), starts, ends):
        big = it.size > eps
        if big == erase_big:
            values[i:j] = f.anchor
    return f.replace(values=values)


def truncate_small(f: CadlagPath, phi, eps: float) -> CadlagPath:
    """Erase every excursion with ``phi(e) <= eps`` to the anchor."""
    return _truncate(f, phi, eps, erase_big=False)


def truncate_big(f: CadlagPath, phi, eps: float) -> CadlagPath:
    """Erase every excursion with ``phi(e) > eps`` to the anchor."""
    return _truncate(f, phi, eps, erase_big=True)


def _kept_mask(S: Subdivision, ts: np.ndarray) -> np.ndarray:
    full = np.append(np.asarray(S.entries), INF)
    idx = np.searchsorted(full, ts, side="right") - 1
    return idx % 2 == 1


def phi_S(f: CadlagPath, S: Subdivision) -> CadlagPath:
    """``f`` on the intervals ``[s_{2k+1}, s_{2k+2})``, the anchor elsewhere.

    Entries at or beyond the horizon of ``f`` are treated as +inf.
    """
    S = S.clipped(f.horizon)
    grid = np.union1d(f.times, np.asarray(S.entries))
    vals = eval_many(f, grid).copy()
    vals[~_kept_mask(S, grid)] = f.anchor
    return CadlagPath(grid, vals, f.anchor, f.horizon)


def e_S(f: CadlagPath, S: Subdivision) -> List[CadlagPath]:
    """Pieces of ``f`` on the kept intervals, each shifted to start at 0.

    A piece is stopped at the anchor once its interval ends; the last piece of
    a subdivision with odd cardinality runs to the horizon.
    """
    S = S.clipped(f.horizon)
    pieces = []
    for a, b in S.even_intervals():
        if b == a:
            pieces.append(CadlagPath([0.0], f.anchor.reshape(1, -1), f.anchor))
            continue
        piece = shift(f, a)
        if math.isfinite(b):
            cut = b - a
            keep = piece.times < cut
            piece = CadlagPath(np.append(piece.times[keep], cut),
                               np.vstack((piece.values[keep], f.anchor)), f.anchor)
        pieces.append(piece)
    return pieces


def psi_S(paths: Sequence[CadlagPath], S: Subdivision, horizon: float = INF,
          anchor=None) -> CadlagPath:
    """Place ``paths[k]`` on the ``k``-th kept interval of ``S``; anchor elsewhere."""
    if anchor is None:
        anchor = paths[0].anchor if paths else np.zeros(1)
    anchor = np.asarray(anchor, dtype=float).reshape(-1)
    S = S.clipped(horizon)
    times, values = [np.zeros(1)], [anchor.reshape(1, -1)]
    for k, (a, b) in enumerate(S.even_intervals()):
        if k >= len(paths) or b == a:
            continue
        p = paths[k]
        keep = p.times < (b - a) if math.isfinite(b) else np.ones(len(p.times), bool)
        times.append(p.times[keep] + a)
        values.append(p.values[keep])
        if math.isfinite(b):
            times.append(np.array([b]))
            values.append(anchor.reshape(1, -1))
    t = np.concatenate(times)
    v = np.vstack(values)
    inside = t <= horizon
    t, v = t[inside], v[inside]
    # at equal times the later event wins
    last = np.append(t[1:] != t[:-1], True)
    return CadlagPath(t[last], v[last], anchor, horizon)


def thin(items: Sequence[ExcursionItem], eps1: float) -> List[ExcursionItem]:
    """Sub-list of items whose stored size exceeds ``eps1``."""
    return [it for it in items if it.size > eps1]


def write_excursions(items: Sequence[ExcursionItem], out_dir, stem="excursion",
                     with_paths=True) -> FsPath:
    """Write ``excursions.csv`` (``g,d,size,killed``) plus one path file per item."""
    out_dir = FsPath(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    target = out_dir / "excursions.csv"
    with open(target, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["g", "d", "size", "killed"])
        for it in items:
            w.writerow([repr(it.left), repr(it.right), repr(it.size), int(it.killed)])
    if with_paths:
        for k, it in enumerate(items):
            write_path(it.path, out_dir / f"{stem}_{k:04d}.csv")
    return target
