r"""Product measures on boxes and their tensor-product orthonormal bases.

Three univariate pairs are supported, each orthonormal w.r.t. its measure:

==============  ===============  ==================================================
family          measure          :math:`\psi_\alpha`
==============  ===============  ==================================================
legendre        uniform[-1,1]    :math:`\sqrt{2\alpha+1}\,P_\alpha(x)`
chebyshev       arcsine[-1,1]    :math:`\sqrt{2}\cos(\alpha\arccos x)`, :math:`\alpha\ge1`
trigonometric   uniform[0,1]     :math:`\sqrt2\sin 2\pi kx` (odd), :math:`\sqrt2\cos 2\pi kx` (even)
==============  ===============  ==================================================

Multivariate regressors are products :math:`\Psi_\alpha(x)=\prod_i\psi_{\alpha_i}(x_i)`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

if TYPE_CHECKING:
    from sobolrisk.truncation import TruncationSet

UNIFORM_SYM = "uniform[-1,1]"
UNIFORM_UNIT = "uniform[0,1]"
ARCSINE = "arcsine[-1,1]"

MEASURE_KINDS = (UNIFORM_SYM, UNIFORM_UNIT, ARCSINE)

SUPPORT = {
    UNIFORM_SYM: (-1.0, 1.0),
    UNIFORM_UNIT: (0.0, 1.0),
    ARCSINE: (-1.0, 1.0),
}

FAMILY_MEASURE = {
    "legendre": UNIFORM_SYM,
    "chebyshev": ARCSINE,
    "trigonometric": UNIFORM_UNIT,
}

MAX_DEGREE = 60

# grid resolution for sup searches, keyed by dimension
GRID_POINTS = {1: 2001, 2: 2001, 3: 201}


class BasisError(ValueError):
    """Invalid basis, measure or evaluation point."""


@dataclass(frozen=True)
class ProductMeasure:
    """Tensor product of independent univariate measures."""

    kinds: tuple[str, ...]

    def __post_init__(self):
        kinds = tuple(self.kinds)
        if not kinds:
            raise BasisError("a product measure needs at least one component")
        for k in kinds:
            if k not in MEASURE_KINDS:
                raise BasisError(f"unknown measure kind {k!r}")
        object.__setattr__(self, "kinds", kinds)

    @classmethod
    def iid(cls, kind: str, d: int) -> "ProductMeasure":
        return cls((kind,) * d)

    @property
    def d(self) -> int:
        return len(self.kinds)

    @property
    def bounds(self) -> np.ndarray:
        """Array of shape ``(d, 2)`` with the support of each component."""
        return np.array([SUPPORT[k] for k in self.kinds])

    def contains(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        b = self.bounds
        return np.all((x >= b[:, 0]) & (x <= b[:, 1]), axis=1)


@dataclass(frozen=True)
class BasisSpec:
    """Per-dimension orthonormal families paired with their product measure."""

    families: tuple[str, ...]

    def __post_init__(self):
        fams = tuple(self.families)
        if not fams:
            raise BasisError("a basis needs at least one dimension")
        for f in fams:
            if f not in FAMILY_MEASURE:
                raise BasisError(f"unknown family {f!r}")
        object.__setattr__(self, "families", fams)

    @classmethod
    def iid(cls, family: str, d: int) -> "BasisSpec":
        return cls((family,) * d)

    @classmethod
    def for_measure(cls, families: Sequence[str], measure: ProductMeasure) -> "BasisSpec":
        """Build a basis and check it is orthonormal w.r.t. ``measure``."""
        basis = cls(tuple(families))
        if basis.measure != measure:
            raise BasisError(
                f"families {basis.families} are not orthonormal for measure {measure.kinds}"
            )
        return basis

    @property
    def d(self) -> int:
        return len(self.families)

    @property
    def measure(self) -> ProductMeasure:
        return ProductMeasure(tuple(FAMILY_MEASURE[f] for f in self.families))

    @property
    def name(self) -> str:
        if len(set(self.families)) == 1:
            return self.families[0]
        return "+".join(self.families)


def _check_support(family: str, x: np.ndarray) -> None:
    lo, hi = SUPPORT[FAMILY_MEASURE[family]]
    if np.any(~np.isfinite(x)) or np.any(x < lo) or np.any(x > hi):
        raise BasisError(f"points outside the {family} support [{lo}, {hi}]")


def univariate_table(family: str, max_degree: int, x) -> np.ndarray:
    """Evaluate ``psi_0 .. psi_max_degree`` of one family.

    Args:
        family: One of ``legendre``, ``chebyshev``, ``trigonometric``.
        max_degree: Highest degree to evaluate.
        x: Points in the family's support, any shape.

    Returns:
        Array of shape ``x.shape + (max_degree + 1,)``.
    """
    if family not in FAMILY_MEASURE:
        raise BasisError(f"unknown family {family!r}")
    if not 0 <= max_degree <= MAX_DEGREE:
        raise BasisError(f"degree must be in [0, {MAX_DEGREE}], got {max_degree}")
    x = np.asarray(x, dtype=float)
    _check_support(family, x)
    out = np.empty(x.shape + (max_degree + 1,))
    out[..., 0] = 1.0
    if max_degree == 0:
        return out

    if family == "legendre":
        out[..., 1] = x
        for k in range(1, max_degree):
            out[..., k + 1] = ((2 * k + 1) * x * out[..., k] - k * out[..., k - 1]) / (k + 1)
        out *= np.sqrt(2 * np.arange(max_degree + 1) + 1.0)
    elif family == "chebyshev":
        theta = np.arccos(x)
        k = np.arange(1, max_degree + 1)
        out[..., 1:] = np.sqrt(2.0) * np.cos(theta[..., None] * k)
    else:
        alpha = np.arange(1, max_degree + 1)
        freq = 2.0 * np.pi * ((alpha + 1) // 2)
        arg = x[..., None] * freq
        out[..., 1:] = np.sqrt(2.0) * np.where(alpha % 2 == 1, np.sin(arg), np.cos(arg))
    return out


def eval_univariate(family: str, alpha: int, x):
    """Normalized univariate basis function ``psi_alpha(x)``."""
    if alpha < 0:
        raise BasisError("degree must be nonnegative")
    vals = univariate_table(family, alpha, x)[..., alpha]
    return vals if np.ndim(x) else float(vals)


def eval_multivariate(basis: BasisSpec, alpha: Sequence[int], x):
    """Tensor-product regressor ``Psi_alpha`` at one point or a batch of points."""
    alpha = tuple(int(a) for a in alpha)
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if len(alpha) != basis.d or x.shape[1] != basis.d:
        raise BasisError(f"dimension mismatch: basis d={basis.d}, alpha {alpha}, x {x.shape}")
    val = np.ones(x.shape[0])
    for i, (fam, a) in enumerate(zip(basis.families, alpha)):
        if a:
            val = val * univariate_table(fam, a, x[:, i])[:, a]
        else:
            _check_support(fam, x[:, i])
    return float(val[0]) if single else val


def sample(measure: ProductMeasure, n: int, seed) -> np.ndarray:
    """Draw ``n`` i.i.d. points from ``measure``.

    ``seed`` may be an int, a ``SeedSequence`` or a ``Generator``. Arcsine
    components use ``cos(pi * U)`` with ``U`` uniform on (0, 1).
    """
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n}")
    rng = np.random.default_rng(seed)
    u = rng.random((int(n), measure.d))
    x = np.empty_like(u)
    for i, kind in enumerate(measure.kinds):
        if kind == UNIFORM_SYM:
            x[:, i] = 2.0 * u[:, i] - 1.0
        elif kind == UNIFORM_UNIT:
            x[:, i] = u[:, i]
        else:
            x[:, i] = np.cos(np.pi * u[:, i])
    return x


def _univariate_sup_closed(family: str, amax: int) -> float:
    # sup over x of sum_{a<=amax} psi_a(x)^2
    if family == "legendre":
        return float((amax + 1) ** 2)
    if family == "chebyshev":
        return float(2 * amax + 1)
    # sin/cos pairs sum to 2; a trailing unpaired sine peaks at 2
    return float(amax + 1 if amax % 2 == 0 else amax + 2)


def k_n(basis: BasisSpec, trunc: "TruncationSet", method: str = "auto") -> float:
    r"""Compute :math:`K_N=\sup_x\sum_{\alpha\in L_N}\Psi_\alpha^2(x)`.

    Maximum-degree sets use per-dimension closed forms (the sum factorizes).
    Other sets fall back to a dense grid search, available for ``d <= 3``.

    Args:
        basis: The tensor basis.
        trunc: Truncation set with the same dimension.
        method: ``"auto"``, ``"closed"`` or ``"grid"``.
    """
    if trunc.d != basis.d:
        raise BasisError(f"truncation d={trunc.d} does not match basis d={basis.d}")
    closed_ok = trunc.scheme == "max_degree"
    if method == "closed" or (method == "auto" and closed_ok):
        if not closed_ok:
            raise BasisError("closed-form K_N only exists for the max_degree scheme")
        amax = trunc.params["alpha_max"]
        return float(np.prod([_univariate_sup_closed(f, amax) for f in basis.families]))
    if method not in ("auto", "grid"):
        raise BasisError(f"unknown method {method!r}")
    return k_n_grid(basis, trunc)


def k_n_grid(basis: BasisSpec, trunc: "TruncationSet", points: int | None = None) -> float:
    """Grid-search sup of the summed squared regressors."""
    d = basis.d
    if d > 3:
        raise BasisError("grid search for K_N is limited to d <= 3")
    m = points or GRID_POINTS[d]
    idx = trunc.array
    degs = idx.max(axis=0)
    tables = []
    for i, fam in enumerate(basis.families):
        lo, hi = SUPPORT[FAMILY_MEASURE[fam]]
        tables.append(univariate_table(fam, int(degs[i]), np.linspace(lo, hi, m)) ** 2)
    # indicator tensor of the set; contracting with the squared tables sums over L_N
    mask = np.zeros(tuple(int(k) + 1 for k in degs))
    mask[tuple(idx.T)] = 1.0
    if d == 1:
        grid = tables[0] @ mask
    elif d == 2:
        grid = tables[0] @ mask @ tables[1].T
    else:
        grid = np.einsum("ai,bj,ck,ijk->abc", *tables, mask, optimize=True)
    return float(grid.max())
