"""Size functionals on excursions, big-excursion extraction and passage times."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .ops import ExcursionItem, Subdivision, decompose, iter_excursions
from .paths import INF, CadlagPath, hitting_time, shift

KERNELS: Dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "one": lambda x: np.ones_like(x),
    "identity": lambda x: x,
    "square": lambda x: x * x,
    "reciprocal": lambda x: 1.0 / x,
}


class SizeFunctional:
    """A map ``phi`` from excursions to ``[0, inf]`` with ``phi(e) > 0`` iff ``e`` is nontrivial."""

    def __init__(self, kind: str, fn: Callable[[CadlagPath], float], name: Optional[str] = None,
                 kernel: Optional[Callable] = None):
        self.kind = kind
        self.name = name or kind
        self._fn = fn
        self.kernel = kernel

    def __call__(self, e: CadlagPath) -> float:
        return float(self._fn(e))

    def __repr__(self):
        return f"SizeFunctional({self.name})"

    def to_config(self) -> dict:
        if self.kind == "additive":
            return {"kind": "additive", "kernel": self.name.split(":", 1)[1]}
        return {"kind": self.kind}


def _length(e: CadlagPath) -> float:
    return hitting_time(e)


def _height(e: CadlagPath) -> float:
    T = hitting_time(e)
    norms = e.norms()
    return float(norms[e.times < T].max()) if T > 0 else 0.0


def _additive(kernel):
    def size(e: CadlagPath) -> float:
        T = hitting_time(e)
        if T == 0:
            return 0.0
        end = T if math.isfinite(T) else (e.killed_at if e.killed_at is not None else e.horizon)
        sel = e.times < end
        t = np.append(e.times[sel], end)
        x = e.norms()[sel]
        if np.any(x == 0):
            raise ValueError("excursion touches the anchor before its end")
        with np.errstate(divide="ignore", invalid="ignore"):
            k = kernel(x)
        if not np.all(np.isfinite(k)):
            raise ValueError("kernel is not finite on the excursion")
        return float(np.sum(k * np.diff(t)))
    return size


length = SizeFunctional("length", _length)
height = SizeFunctional("height", _height)


def additive(kernel, name: Optional[str] = None) -> SizeFunctional:
    """``e -> integral_0^T kernel(|e(u)|) du`` for a kernel positive off 0."""
    if isinstance(kernel, str):
        name = kernel
        kernel = KERNELS[kernel]
    probe = np.logspace(-6, 6, 121)
    with np.errstate(all="ignore"):
        vals = np.asarray(kernel(probe), dtype=float)
    if not np.all(vals > 0):
        raise ValueError("additive kernel must be strictly positive on (0, inf)")
    return SizeFunctional("additive", _additive(kernel), f"additive:{name or 'custom'}", kernel)


def custom(fn: Callable[[CadlagPath], float], name: str = "custom") -> SizeFunctional:
    return SizeFunctional("custom", fn, name)


def from_config(spec) -> SizeFunctional:
    """Resolve ``"height"``, ``{"kind": "additive", "kernel": "reciprocal"}`` and friends."""
    if isinstance(spec, SizeFunctional):
        return spec
    if isinstance(spec, str):
        spec = {"kind": spec}
    spec = dict(spec)
    kind = spec.pop("kind")
    if kind == "length":
        phi = length
    elif kind == "height":
        phi = height
    elif kind == "additive":
        phi = additive(spec.pop("kernel", "identity"))
    else:
        raise ValueError(f"unknown size functional {kind!r}")
    if spec:
        raise ValueError(f"unknown functional keys: {sorted(spec)}")
    return phi


def size(phi: SizeFunctional, e: CadlagPath) -> float:
    return phi(e)


# -- big excursions ----------------------------------------------------------


class ExcursionList(list):
    """Ordered big excursions; ``as_subdivision`` gives ``(0, g1, d1, g2, d2, ...)``."""

    def as_subdivision(self) -> Subdivision:
        entries = [0.0]
        for it in self:
            entries += [it.left, it.right]
            if math.isinf(it.right):
                break
        return Subdivision(entries)


def extract_all_big(f: CadlagPath, phi: SizeFunctional, eps: float) -> ExcursionList:
    """All excursions with ``phi(e) > eps``, in order."""
    return ExcursionList(it for it in decompose(f, phi) if it.size > eps)


def extract_big(f: CadlagPath, phi: SizeFunctional, eps: float) -> Tuple[float, CadlagPath]:
    """``(g_eps, e_eps)``: the first big excursion and its left endpoint, or ``(inf, zero)``."""
    for it in iter_excursions(f):
        if phi(it.path) > eps:
            return it.left, it.path
    return INF, CadlagPath([0.0], f.anchor.reshape(1, -1), f.anchor)


# -- passage above a level -------------------------------------------------------


@dataclass(frozen=True)
class PassageTimes:
    t_up: float
    t_up_tilde: float
    killed: bool = False


def passage(f: CadlagPath, eps: float) -> PassageTimes:
    """First times the norm exceeds ``eps`` strictly (``t_up``) or reaches it (``t_up_tilde``).

    For a step path the left limit at a breakpoint is the previous value, so
    the non-strict passage is the first breakpoint with norm at least ``eps``.
    """
    norms = f.norms()
    above = np.flatnonzero(norms > eps)
    reach = np.flatnonzero(norms >= eps)
    t_up = float(f.times[above[0]]) if len(above) else INF
    t_tilde = float(f.times[reach[0]]) if len(reach) else INF
    return PassageTimes(t_up, t_tilde, killed=not len(above))


def shift_to_passage(f: CadlagPath, eps: float, phi: SizeFunctional = height) -> CadlagPath:
    """The first ``eps``-big excursion (by height) restarted at its first passage above ``eps``."""
    if phi.kind != "height":
        raise ValueError("passage shifts are defined for the height functional only")
    g, e = extract_big(f, phi, eps)
    if math.isinf(g):
        raise ValueError(f"no excursion with height above {eps}")
    return shift(e, passage(e, eps).t_up)


def past_sup_inverse(f: CadlagPath, eps: float) -> Tuple[float, float, bool]:
    """Right- and left-continuous inverses of the running supremum at ``eps``."""
    running = np.maximum.accumulate(f.norms())
    i_right = int(np.searchsorted(running, eps, side="right"))
    i_left = int(np.searchsorted(running, eps, side="left"))
    right = float(f.times[i_right]) if i_right < len(running) else INF
    left = float(f.times[i_left]) if i_left < len(running) else INF
    return right, left, right == left
