"""Multi-index truncation sets and the index subsets used for Sobol extraction.

Sets are ordered graded-lexicographically: by total degree, then with the
lexicographically larger multi-index first, so ``(1, 0)`` precedes ``(0, 1)``.
Variable subsets are tuples of 1-based variable numbers, e.g. ``(1, 3)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

DEFAULT_CAP = 10**6

MultiIndex = tuple[int, ...]
Subset = tuple[int, ...]


class TruncationError(ValueError):
    pass


def _order_key(alpha: MultiIndex):
    return (sum(alpha), tuple(-a for a in alpha))


@dataclass(frozen=True)
class TruncationSet:
    """Ordered set of distinct multi-indices starting with zero."""

    indices: tuple[MultiIndex, ...]
    scheme: str = "explicit"
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        idx = tuple(tuple(int(a) for a in alpha) for alpha in self.indices)
        if not idx:
            raise TruncationError("empty truncation set")
        d = len(idx[0])
        if d < 1 or any(len(a) != d for a in idx):
            raise TruncationError("multi-indices must share one positive dimension")
        if any(a < 0 for alpha in idx for a in alpha):
            raise TruncationError("multi-index components must be nonnegative")
        if len(set(idx)) != len(idx):
            raise TruncationError("duplicate multi-indices")
        if idx[0] != (0,) * d:
            raise TruncationError("the zero multi-index must come first")
        object.__setattr__(self, "indices", idx)

    @classmethod
    def explicit(cls, indices: Iterable[Sequence[int]]) -> "TruncationSet":
        """Canonically ordered set from arbitrary multi-indices (zero is added)."""
        idx = {tuple(int(a) for a in alpha) for alpha in indices}
        if not idx:
            raise TruncationError("empty truncation set")
        d = len(next(iter(idx)))
        idx.add((0,) * d)
        return cls(tuple(sorted(idx, key=_order_key)), "explicit", {})

    @property
    def d(self) -> int:
        return len(self.indices[0])

    @property
    def N(self) -> int:
        return len(self.indices)

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __contains__(self, alpha) -> bool:
        return tuple(alpha) in self._positions

    @cached_property
    def _positions(self) -> dict:
        return {a: i for i, a in enumerate(self.indices)}

    def position(self, alpha: Sequence[int]) -> int:
        return self._positions[tuple(alpha)]

    @cached_property
    def array(self) -> np.ndarray:
        """Integer array of shape ``(N, d)``."""
        arr = np.array(self.indices, dtype=np.int64)
        arr.setflags(write=False)
        return arr

    @cached_property
    def support_masks(self) -> np.ndarray:
        """Bitmask of active variables per multi-index (bit ``i`` is variable ``i+1``)."""
        weights = 1 << np.arange(self.d, dtype=np.int64)
        masks = ((self.array > 0) * weights).sum(axis=1)
        masks.setflags(write=False)
        return masks

    def issubset(self, other: "TruncationSet") -> bool:
        return set(self.indices) <= set(other.indices)

    def to_text(self) -> str:
        """One multi-index per line, components separated by spaces."""
        return "".join(" ".join(str(a) for a in alpha) + "\n" for alpha in self.indices)

    @classmethod
    def from_text(cls, text: str) -> "TruncationSet":
        rows = [tuple(int(t) for t in line.split()) for line in text.splitlines() if line.strip()]
        return cls(tuple(rows), "explicit", {})

    def describe(self) -> dict:
        return {"scheme": self.scheme, **self.params, "d": self.d, "N": self.N}


def _check_size(count: int, cap: int) -> None:
    if count > cap:
        raise TruncationError(f"truncation set would hold {count} > cap {cap} multi-indices")


def build_max_degree(d: int, alpha_max: int, cap: int = DEFAULT_CAP) -> TruncationSet:
    """All multi-indices with ``max_i alpha_i <= alpha_max``; ``N = (alpha_max+1)^d``."""
    if d < 1 or alpha_max < 1:
        raise TruncationError("need d >= 1 and alpha_max >= 1")
    _check_size((alpha_max + 1) ** d, cap)
    idx = sorted(itertools.product(range(alpha_max + 1), repeat=d), key=_order_key)
    return TruncationSet(tuple(idx), "max_degree", {"alpha_max": int(alpha_max)})


def in_hyperbolic(alpha: Sequence[int], q: float, t: float) -> bool:
    # plain float64 quasi-norm vs t: this is what yields N=91 (d=2, q=0.5, t=20)
    # and N=815 (d=3, q=0.75, t=20); exact arithmetic cannot match both
    s = 0.0
    for a in alpha:
        if a:
            s += float(a) ** q
    return s ** (1.0 / q) <= t


def build_hyperbolic(d: int, q: float, t: int, cap: int = DEFAULT_CAP) -> TruncationSet:
    r"""Multi-indices with :math:`(\sum_i\alpha_i^q)^{1/q}\le t`."""
    if d < 1:
        raise TruncationError("need d >= 1")
    if not 0 < q <= 1:
        raise TruncationError(f"q must lie in (0, 1], got {q}")
    if t < 1 or int(t) != t:
        raise TruncationError(f"t must be a positive integer, got {t}")
    t = int(t)
    found: list[MultiIndex] = []

    def grow(prefix: list[int]):
        if len(prefix) == d:
            found.append(tuple(prefix))
            _check_size(len(found), cap)
            return
        for a in range(t + 1):
            cand = prefix + [a]
            # the remaining zeros leave the norm unchanged, so this prunes exactly
            if not in_hyperbolic(cand, q, t):
                break
            grow(cand)

    grow([])
    found.sort(key=_order_key)
    return TruncationSet(tuple(found), "hyperbolic", {"q": float(q), "t": t})


def subset_mask(u: Iterable[int], d: int) -> int:
    u = tuple(u)
    if not u:
        raise TruncationError("variable subset must be nonempty")
    if len(set(u)) != len(u) or any(not 1 <= i <= d for i in u):
        raise TruncationError(f"invalid variable subset {u} for d={d}")
    return sum(1 << (i - 1) for i in u)


def subset_L(trunc: TruncationSet, u: Iterable[int]) -> np.ndarray:
    """Positions of multi-indices whose nonzero components are exactly ``u``."""
    m = subset_mask(u, trunc.d)
    return np.flatnonzero(trunc.support_masks == m)


def subset_T(trunc: TruncationSet, u: Iterable[int]) -> np.ndarray:
    """Positions of multi-indices with at least one nonzero component in ``u``."""
    m = subset_mask(u, trunc.d)
    return np.flatnonzero(trunc.support_masks & m)


def all_subsets(d: int) -> list[Subset]:
    """Nonempty subsets of ``{1..d}`` ordered by size, then lexicographically."""
    return [
        c for k in range(1, d + 1) for c in itertools.combinations(range(1, d + 1), k)
    ]


def subset_label(u: Subset) -> str:
    return "|".join(str(i) for i in u)


def parse_subset(label: str) -> Subset:
    return tuple(int(t) for t in label.split("|"))
