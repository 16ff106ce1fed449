"""Benchmark functions with known Sobol indices.

Each function is evaluated on the box of the measure it is paired with and
mapped affinely onto its natural domain: ``[0, 1]^d`` for the g-function and
``[-pi, pi]^3`` for Ishigami. Fitting the g-function with a Legendre basis
therefore means evaluating it on ``[-1, 1]^d`` through that map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from sobolrisk.fitting import Metamodel
from sobolrisk.indices import (
    IndexReport,
    analytic_gfunction_indices,
    analytic_ishigami_indices,
    gfunction_variance,
    indices_from_coeffs,
    ishigami_variance,
)
from sobolrisk.measures import SUPPORT, ProductMeasure


class DomainError(ValueError):
    pass


def _to_natural(x, box, lo, hi):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    a, b = box
    if np.any(x < a) or np.any(x > b) or not np.all(np.isfinite(x)):
        raise DomainError(f"points outside the input box [{a}, {b}]")
    return lo + (x - a) * ((hi - lo) / (b - a))


@dataclass(frozen=True)
class GFunction:
    """Sobol g-function ``prod_i (|4 z_i - 2| + c_i) / (1 + c_i)`` on ``z in [0,1]^d``."""

    c: tuple[float, ...]
    box: tuple[float, float] = (0.0, 1.0)
    name: str = field(default="gfunction", init=False)

    def __post_init__(self):
        object.__setattr__(self, "c", tuple(float(v) for v in self.c))
        if any(v < 0 for v in self.c):
            raise ValueError("g-function parameters must be nonnegative")

    @property
    def d(self) -> int:
        return len(self.c)

    def __call__(self, x):
        z = _to_natural(x, self.box, 0.0, 1.0)
        c = np.asarray(self.c)
        out = np.prod((np.abs(4.0 * z - 2.0) + c) / (1.0 + c), axis=1)
        return out if np.ndim(x) > 1 else float(out[0])

    def sup_abs(self) -> float:
        # each factor peaks at z_i in {0, 1}
        return float(np.prod([(2.0 + v) / (1.0 + v) for v in self.c]))

    @property
    def variance(self) -> float:
        return gfunction_variance(self.c)

    def analytic_indices(self) -> IndexReport:
        return analytic_gfunction_indices(self.c)

    def params(self) -> dict:
        return {"c": list(self.c)}


@dataclass(frozen=True)
class Ishigami:
    """``sin z1 + a sin^2 z2 + b z3^4 sin z1`` on ``z in [-pi, pi]^3``."""

    a: float = 7.0
    b: float = 0.1
    box: tuple[float, float] = (-math.pi, math.pi)
    name: str = field(default="ishigami", init=False)

    d = 3

    def __call__(self, x):
        z = _to_natural(x, self.box, -math.pi, math.pi)
        s1 = np.sin(z[:, 0])
        out = s1 + self.a * np.sin(z[:, 1]) ** 2 + self.b * z[:, 2] ** 4 * s1
        return out if np.ndim(x) > 1 else float(out[0])

    def sup_abs(self) -> float:
        # multilinear in (sin z1, z3^4, sin^2 z2) over a box: extremes sit at vertices
        pi4 = math.pi**4
        return max(
            abs(s * (1.0 + self.b * w) + self.a * v)
            for s in (-1.0, 1.0)
            for w in (0.0, pi4)
            for v in (0.0, 1.0)
        )

    @property
    def variance(self) -> float:
        return ishigami_variance(self.a, self.b)

    def analytic_indices(self) -> IndexReport:
        return analytic_ishigami_indices(self.a, self.b)

    def params(self) -> dict:
        return {"a": self.a, "b": self.b}


@dataclass(frozen=True)
class SpanElement:
    """A finite expansion in the basis itself; its indices are exact by construction."""

    model: Metamodel
    name: str = field(default="span_element", init=False)

    @property
    def d(self) -> int:
        return self.model.basis.d

    @property
    def box(self):
        return None

    def __call__(self, x):
        out = self.model(x)
        return out if np.ndim(x) > 1 else float(out[0])

    def sup_abs(self, points: int | None = None) -> float:
        d = self.d
        if d > 3:
            raise DomainError("grid sup is limited to d <= 3")
        m = points or {1: 20001, 2: 1001, 3: 101}[d]
        axes = [np.linspace(*SUPPORT[k], m) for k in self.model.basis.measure.kinds]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
        return float(np.max(np.abs(self.model(mesh))))

    @property
    def variance(self) -> float:
        return self.model.variance

    def analytic_indices(self) -> IndexReport:
        return indices_from_coeffs(self.model)

    def params(self) -> dict:
        return {"coeffs": list(map(float, self.model.coeffs))}


def box_of(measure: ProductMeasure) -> tuple[float, float]:
    boxes = {SUPPORT[k] for k in measure.kinds}
    if len(boxes) != 1:
        raise DomainError("benchmark functions need the same box in every dimension")
    return boxes.pop()


def make_function(name: str, measure: ProductMeasure, **params):
    """Build a registered benchmark adapted to the box of ``measure``."""
    box = box_of(measure)
    if name == "gfunction":
        fn = GFunction(tuple(params.get("c", (0.0, 4.0))), box)
    elif name == "ishigami":
        fn = Ishigami(params.get("a", 7.0), params.get("b", 0.1), box)
    else:
        raise ValueError(f"unknown test function {name!r}")
    if fn.d != measure.d:
        raise DomainError(f"{name} has d={fn.d} but the measure has d={measure.d}")
    return fn


REGISTRY = ("gfunction", "ishigami")


@dataclass
class NoisyFunction:
    """Black box returning ``f(x) + eta`` with i.i.d. Gaussian ``eta``.

    The noise stream is owned by the instance; do not share one across threads.
    """

    fn: object
    sigma: float
    seed: object = None

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        self._rng = np.random.default_rng(self.seed)

    @property
    def d(self) -> int:
        return self.fn.d

    def __call__(self, x):
        y = self.fn(x)
        if self.sigma == 0:
            return y
        return y + self.sigma * self._rng.standard_normal(np.shape(y))


def with_noise(fn, sigma: float, seed=None) -> NoisyFunction:
    return NoisyFunction(fn, float(sigma), seed)
