"""Sobol and total-effect indices.

Indices of a metamodel follow in closed form from its coefficients: the
variance carried by multi-indices whose support is exactly ``u`` gives the
Sobol index of ``u``; the variance carried by multi-indices touching ``u``
gives its total effect. A zero-variance metamodel has undefined indices; by
convention every index is then reported as ``2**-d``.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from sobolrisk.measures import ProductMeasure, sample
from sobolrisk.truncation import Subset, all_subsets, subset_label, subset_mask

MAX_ENUM_D = 12


class IndexDefinitionError(ValueError):
    """Invalid subset collection or undefined index."""


@dataclass(frozen=True)
class IndexReport:
    """Sobol and total-effect indices for a list of variable subsets."""

    d: int
    subsets: tuple[Subset, ...]
    sobol: np.ndarray
    total: np.ndarray
    variance: float
    degenerate: bool = False
    _pos: dict = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "subsets", tuple(tuple(u) for u in self.subsets))
        object.__setattr__(self, "sobol", np.asarray(self.sobol, dtype=float))
        object.__setattr__(self, "total", np.asarray(self.total, dtype=float))
        object.__setattr__(self, "_pos", {u: i for i, u in enumerate(self.subsets)})

    def S(self, u: Iterable[int]) -> float:
        return float(self.sobol[self._pos[tuple(u)]])

    def T(self, u: Iterable[int]) -> float:
        return float(self.total[self._pos[tuple(u)]])

    def values(self, kind: str) -> np.ndarray:
        return self.sobol if kind == "sobol" else self.total

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# variance={self.variance!r},degenerate={int(self.degenerate)}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["subset", "sobol", "total"])
        for u, s, t in zip(self.subsets, self.sobol, self.total):
            w.writerow([subset_label(u), repr(float(s)), repr(float(t))])
        return buf.getvalue()


def _resolve_subsets(d: int, subsets) -> list[Subset]:
    if subsets is None:
        if d > MAX_ENUM_D:
            raise IndexDefinitionError(f"d={d} > {MAX_ENUM_D}: pass an explicit subset list")
        return all_subsets(d)
    out = [tuple(sorted(u)) for u in subsets]
    for u in out:
        subset_mask(u, d)
    return out


def indices_from_masses(d: int, masks: np.ndarray, weights: np.ndarray, subsets=None) -> IndexReport:
    """Indices from squared coefficients grouped by support bitmask.

    ``masks[k]`` is the support bitmask of coefficient ``k`` and ``weights[k]``
    its squared value. Zero-support (mean) entries must already be removed.
    """
    subs = _resolve_subsets(d, subsets)
    var = float(np.sum(weights))
    if var == 0.0:
        fill = np.full(len(subs), 2.0**-d)
        return IndexReport(d, tuple(subs), fill, fill.copy(), 0.0, True)
    umask = np.array([subset_mask(u, d) for u in subs], dtype=np.int64)
    exact = masks[None, :] == umask[:, None]
    touch = (masks[None, :] & umask[:, None]) != 0
    s = (exact * weights).sum(axis=1) / var
    t = (touch * weights).sum(axis=1) / var
    return IndexReport(d, tuple(subs), s, np.maximum(t, s), var, False)


def indices_from_coeffs(model, subsets=None) -> IndexReport:
    """Closed-form indices of a fitted metamodel."""
    c = model.coeffs
    masks = model.trunc.support_masks
    keep = masks != 0
    rep = indices_from_masses(model.trunc.d, masks[keep], c[keep] ** 2, subsets)
    if model.degenerate and not rep.degenerate:
        # singular OLS fits carry zero coefficients already; keep the flag in sync
        fill = np.full(len(rep.subsets), 2.0**-rep.d)
        return IndexReport(rep.d, rep.subsets, fill, fill.copy(), 0.0, True)
    return rep


def general_index(model_or_report, group: Sequence[Iterable[int]]) -> float:
    """Sum of Sobol indices over a collection of distinct subsets."""
    rep = model_or_report
    if not isinstance(rep, IndexReport):
        rep = indices_from_coeffs(rep)
    group = [tuple(sorted(u)) for u in group]
    if len(set(group)) != len(group):
        raise IndexDefinitionError("duplicate subsets in group")
    return float(sum(rep.S(u) for u in group))


def totals_from_sobol(d: int, subsets: Sequence[Subset], sobol: np.ndarray) -> np.ndarray:
    """Total effects by summing Sobol indices of intersecting subsets (needs all subsets)."""
    masks = np.array([subset_mask(u, d) for u in subsets], dtype=np.int64)
    touch = (masks[:, None] & masks[None, :]) != 0
    return touch @ sobol


def analytic_gfunction_indices(c: Sequence[float]) -> IndexReport:
    """Exact indices of the Sobol g-function with parameters ``c``."""
    c = np.asarray(c, dtype=float)
    if np.any(c < 0):
        raise IndexDefinitionError("g-function parameters must be nonnegative")
    d = c.size
    part = (1.0 / 3.0) / (c + 1.0) ** 2
    D = float(np.prod(1.0 + part) - 1.0)
    subs = all_subsets(d)
    s = np.array([np.prod(part[[i - 1 for i in u]]) / D for u in subs])
    t = totals_from_sobol(d, subs, s)
    return IndexReport(d, tuple(subs), s, t, D, False)


def gfunction_variance(c: Sequence[float]) -> float:
    c = np.asarray(c, dtype=float)
    return float(np.prod(1.0 + (1.0 / 3.0) / (c + 1.0) ** 2) - 1.0)


def ishigami_variance(a: float, b: float) -> float:
    pi4 = math.pi**4
    return a * a / 8.0 + b * pi4 / 5.0 + b * b * pi4 * pi4 / 18.0 + 0.5


def analytic_ishigami_indices(a: float = 7.0, b: float = 0.1) -> IndexReport:
    """Exact indices of the Ishigami function."""
    v = ishigami_variance(a, b)
    if v == 0.0:
        raise IndexDefinitionError("Ishigami parameters give zero variance")
    pi4 = math.pi**4
    pi8 = pi4 * pi4
    vals = {
        (1,): b * pi4 / (5 * v) + b * b * pi8 / (50 * v) + 1 / (2 * v),
        (2,): a * a / (8 * v),
        (1, 3): 8 * b * b * pi8 / (225 * v),
    }
    subs = all_subsets(3)
    s = np.array([vals.get(u, 0.0) for u in subs])
    t = totals_from_sobol(3, subs, s)
    return IndexReport(3, tuple(subs), s, t, v, False)


@dataclass(frozen=True)
class OracleEstimate:
    sobol: float
    sobol_se: float
    total: float
    total_se: float


def mc_oracle_indices(
    f: Callable[[np.ndarray], np.ndarray],
    measure: ProductMeasure,
    subsets: Iterable[Iterable[int]],
    n_mc: int,
    seed,
) -> dict[Subset, OracleEstimate]:
    """Pick-freeze Monte Carlo estimates of Sobol and total indices.

    Closed indices ``V[E(f | x_v)] / V`` use the Saltelli (2010) estimator for
    every ``v`` below ``u``; the Sobol index of ``u`` follows by Moebius
    inversion. Totals use the Jansen estimator. Standard errors come from the
    delta method applied to the ratio of sample means. Intended as an
    independent test oracle, not as a production estimator.
    """
    if n_mc < 1000:
        raise ValueError("n_mc must be at least 1000")
    subsets = [tuple(sorted(u)) for u in subsets]
    d = measure.d
    for u in subsets:
        subset_mask(u, d)
    rng = np.random.default_rng(seed)
    A = sample(measure, n_mc, rng)
    B = sample(measure, n_mc, rng)
    yA = np.asarray(f(A), dtype=float)
    yB = np.asarray(f(B), dtype=float)
    m = 0.5 * (yA.mean() + yB.mean())
    w = 0.5 * ((yA - m) ** 2 + (yB - m) ** 2)
    var = w.mean()
    if var <= 0.0:
        raise IndexDefinitionError("zero output variance: indices are undefined")

    cache: dict[Subset, np.ndarray] = {(): yB}

    def y_mix(v: Subset) -> np.ndarray:
        # B with the columns in v taken from A, so it shares x_v with A
        if v not in cache:
            C = B.copy()
            cols = [i - 1 for i in v]
            C[:, cols] = A[:, cols]
            cache[v] = np.asarray(f(C), dtype=float)
        return cache[v]

    def ratio(z: np.ndarray) -> tuple[float, float]:
        est = z.mean() / var
        lin = (z - est * w) / var
        return float(est), float(lin.std(ddof=1) / math.sqrt(n_mc))

    out = {}
    for u in subsets:
        z = np.zeros(n_mc)
        for k in range(1, len(u) + 1):
            sign = (-1.0) ** (len(u) - k)
            for v in itertools.combinations(u, k):
                z += sign * yA * (y_mix(v) - yB)
        s, s_se = ratio(z)
        cols = [i - 1 for i in u]
        D = A.copy()
        D[:, cols] = B[:, cols]
        zt = 0.5 * (yA - np.asarray(f(D), dtype=float)) ** 2
        t, t_se = ratio(zt)
        out[u] = OracleEstimate(s, s_se, t, t_se)
    return out

