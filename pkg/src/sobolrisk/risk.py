"""Risk bounds for index estimates under random design, and their empirical check.

Notation: ``V`` is the variance of the target function, ``e_N_sq`` the squared
error of its best approximation in the span of the regressors, ``L`` a bound on
``|f|``, ``sigma^2`` the noise variance and ``n`` the design size. The least
squares bound only applies under the stability condition
``K_N <= kappa_r * n / ln n`` for some ``r > 0``.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg

from sobolrisk.fitting import Metamodel, TrainingSample, design_matrix, fit
from sobolrisk.indices import IndexReport, indices_from_coeffs
from sobolrisk.measures import FAMILY_MEASURE, SUPPORT, ARCSINE, BasisSpec, sample, univariate_table
from sobolrisk.truncation import TruncationSet

KAPPA_NUM = 3.0 * math.log(1.5) - 1.0
SE_BOOTSTRAP = 200


def kappa_r(r: float) -> float:
    """``(3 ln(3/2) - 1) / (2 + 2r)``."""
    if r <= 0:
        raise ValueError("r must be positive")
    return KAPPA_NUM / (2.0 + 2.0 * r)


def r_from_sample(K_N: float, n: int) -> float:
    """Largest ``r`` for which the stability condition holds, clamped at zero."""
    if n < 2:
        raise ValueError("n must be at least 2")
    return max(0.0, KAPPA_NUM / 2.0 * n / (K_N * math.log(n)) - 1.0)


def stability_satisfied(K_N: float, n: int, r: float) -> bool:
    """``K_N <= kappa_r * n / ln n`` (equality counts as satisfied)."""
    if n < 2:
        raise ValueError("n must be at least 2")
    return K_N <= kappa_r(r) * n / math.log(n)


def min_n_positive_r(K_N: float, hi: int = 10**12) -> int:
    """Smallest ``n >= 3`` with ``r_from_sample(K_N, n) > 0``, by bisection.

    ``n / ln n`` increases for ``n >= 3``, so the predicate is monotone there.
    """
    lo = 3
    if r_from_sample(K_N, lo) > 0:
        return lo
    if r_from_sample(K_N, hi) <= 0:
        raise ValueError("no n below the search ceiling gives r > 0")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if r_from_sample(K_N, mid) > 0:
            hi = mid
        else:
            lo = mid
    return hi


@dataclass(frozen=True)
class RiskBoundInputs:
    e_N_sq: float
    variance: float
    L: float
    sigma_sq: float
    N: int
    n: int
    r: float = 0.0

    def __post_init__(self):
        if self.variance <= 0:
            raise ValueError("variance must be positive")
        for name in ("e_N_sq", "L", "sigma_sq", "r"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.N < 1 or self.n < 1:
            raise ValueError("N and n must be positive")

    def components(self) -> dict:
        """The four terms from which the bounds are assembled."""
        V, ratio = self.variance, self.N / self.n
        return {
            "e_N_sq_over_V": self.e_N_sq / V,
            "L2_sigma2_over_V_N_over_n": (self.L**2 + self.sigma_sq) / V * ratio,
            "sigma2_over_V_N_over_n": self.sigma_sq / V * ratio,
            "n_pow_minus_r": self.n ** (-self.r),
        }


@dataclass(frozen=True)
class RiskBound:
    """A bound on ``max_u E(S_u - Shat_u)^2`` and on ``E|S_u - Shat_u|`` as a function of ``S_u``."""

    mse_raw: float
    mae_fn_raw: Callable[[float], float] = field(repr=False)
    applicable: bool = True
    ris_sq: float = math.nan

    @property
    def mse(self) -> float:
        return min(self.mse_raw, 1.0)

    def mae(self, S: float) -> float:
        return min(self.mae_fn_raw(S), 1.0)


def _from_ris_sq(ris_sq: float, extra: float = 0.0, applicable: bool = True) -> RiskBound:
    ris = math.sqrt(ris_sq)
    return RiskBound(
        2.0 * ris_sq + extra,
        lambda S: 2.0 * ris * (ris + math.sqrt(S)) + extra,
        applicable,
        ris_sq,
    )


def risk_bound_general(err_sq: float, variance: float) -> RiskBound:
    """Bound for an arbitrary learning procedure from its mean squared L2 error."""
    if variance <= 0:
        raise ValueError("variance must be positive")
    return _from_ris_sq(err_sq / variance)


def risk_bound_projection(inp: RiskBoundInputs) -> RiskBound:
    c = inp.components()
    return _from_ris_sq(c["e_N_sq_over_V"] + c["L2_sigma2_over_V_N_over_n"])


def risk_bound_ols(inp: RiskBoundInputs, K_N: float | None = None) -> RiskBound:
    """Least-squares bound; flagged inapplicable when the stability condition fails.

    Without noise the constant 3 of the noiseless statement is used directly:
    ``3 e_N^2 / V + 2 n^-r`` and ``3 e_N^2/V + 3 sqrt(S) e_N/sqrt(V) + 2 n^-r``.
    """
    applicable = inp.r > 0 and inp.n >= 2
    if applicable and K_N is not None:
        applicable = stability_satisfied(K_N, inp.n, inp.r)
    tail = 2.0 * inp.n ** (-inp.r)
    if inp.sigma_sq == 0:
        a = inp.e_N_sq / inp.variance
        return RiskBound(
            3.0 * a + tail,
            lambda S: 3.0 * a + 3.0 * math.sqrt(S * a) + tail,
            applicable,
            1.2 * a,
        )
    ris_sq = 1.2 * inp.e_N_sq / inp.variance + 4.0 * inp.sigma_sq / inp.variance * inp.N / inp.n
    return _from_ris_sq(ris_sq, tail, applicable)


# --- reference quantities -------------------------------------------------


def _gauss_rule(kind: str, points: int, panels: int = 2) -> tuple[np.ndarray, np.ndarray]:
    # composite Gauss-Legendre on the unit interval; the panel edges include the
    # midpoint, where the g-function has its kink
    m = max(1, points // panels)
    t, w = np.polynomial.legendre.leggauss(m)
    edges = np.linspace(0.0, 1.0, panels + 1)
    u = np.concatenate([(a + b) / 2 + (b - a) / 2 * t for a, b in zip(edges[:-1], edges[1:])])
    wu = np.concatenate([(b - a) / 2 * w for a, b in zip(edges[:-1], edges[1:])])
    if kind == ARCSINE:
        # arcsine law is the image of uniform(0, 1) under cos(pi u)
        return np.cos(np.pi * u), wu
    lo, hi = SUPPORT[kind]
    return lo + (hi - lo) * u, wu


@dataclass(frozen=True)
class QuadratureReference:
    """Projection coefficients of ``f`` on a truncation set and its squared norm."""

    coeffs: np.ndarray
    norm_sq: float

    @property
    def e_N_sq(self) -> float:
        return max(self.norm_sq - float(np.sum(self.coeffs**2)), 0.0)

    def error_sq(self, c_hat: np.ndarray) -> float:
        """``||f - fhat||^2`` for an expansion over the same truncation set."""
        return self.e_N_sq + float(np.sum((self.coeffs - c_hat) ** 2))


def quadrature_reference(f, basis: BasisSpec, trunc: TruncationSet, points: int | None = None) -> QuadratureReference:
    """High-accuracy tensor quadrature of ``<f, Psi_alpha>`` and ``||f||^2`` (``d <= 3``)."""
    d = basis.d
    if d > 3:
        raise ValueError("tensor quadrature is limited to d <= 3")
    m = points or {1: 800, 2: 240, 3: 120}[d]
    rules = [_gauss_rule(FAMILY_MEASURE[fam], m) for fam in basis.families]
    mesh = np.stack(np.meshgrid(*[r[0] for r in rules], indexing="ij"), axis=-1)
    F = np.asarray(f(mesh.reshape(-1, d)), dtype=float).reshape(mesh.shape[:-1])
    W = rules[0][1]
    for r in rules[1:]:
        W = np.multiply.outer(W, r[1])
    norm_sq = float(np.sum(W * F * F))
    degs = trunc.array.max(axis=0)
    G = F * W
    for i, fam in enumerate(basis.families):
        tab = univariate_table(fam, int(degs[i]), rules[i][0])
        # contract axis 0 each time; the new degree axis goes to the back
        G = np.tensordot(G, tab, axes=([0], [0]))
    coeffs = G[tuple(trunc.array.T)]
    return QuadratureReference(np.asarray(coeffs, dtype=float), norm_sq)


def _ols_chunked(f, basis, trunc, n, rng, chunk=50_000):
    measure = basis.measure
    N = trunc.N
    gram = np.zeros((N, N))
    rhs = np.zeros(N)
    done = 0
    while done < n:
        k = min(chunk, n - done)
        x = sample(measure, k, rng)
        phi = design_matrix(basis, trunc, x)
        gram += phi.T @ phi
        rhs += phi.T @ np.asarray(f(x), dtype=float)
        done += k
    # with n >> N the normal matrix is close to n * I, so Cholesky is safe here
    c_fac = scipy.linalg.cho_factor(gram)
    return Metamodel(basis, trunc, scipy.linalg.cho_solve(c_fac, rhs), "ols")


def estimate_best_error(f, basis: BasisSpec, trunc: TruncationSet, n_big: int = 10**6, seed=0, chunk=50_000) -> float:
    """Squared holdout RMSE of a large-sample least-squares fit, estimating ``||e_N||^2``.

    Fits on ``n_big`` points and evaluates on ``n_big`` fresh points.
    """
    if n_big < 10 * trunc.N:
        raise ValueError("n_big must be much larger than N")
    rng = np.random.default_rng(seed)
    model = _ols_chunked(f, basis, trunc, n_big, rng, chunk)
    if model.variance == 0.0 and np.all(model.coeffs == 0):
        raise ValueError("degenerate reference fit")
    sse, done = 0.0, 0
    while done < n_big:
        k = min(chunk, n_big - done)
        x = sample(basis.measure, k, rng)
        sse += float(np.sum((np.asarray(f(x), dtype=float) - model(x)) ** 2))
        done += k
    return sse / n_big


def reference_indices(f, basis: BasisSpec, trunc: TruncationSet, n_big: int = 10**6, seed=0) -> IndexReport:
    """Indices of a large-sample least-squares fit, for functions without closed forms."""
    return indices_from_coeffs(_ols_chunked(f, basis, trunc, n_big, np.random.default_rng(seed)))


# --- empirical risk -----------------------------------------------------------


@dataclass(frozen=True)
class EmpiricalRisk:
    """Replicate averages of squared and absolute index errors."""

    subsets: tuple
    sobol_mse: np.ndarray
    total_mse: np.ndarray
    sobol_mae: np.ndarray
    total_mae: np.ndarray
    mse_max: float
    mae_max: float
    mse_max_se: float
    n_runs: int
    n_degenerate: int
    err_sq_mean: float = math.nan
    err_sq_se: float = math.nan


def _replicate(args):
    f, basis, trunc, method, n, sigma, seed, j, ref_s, ref_t, quad = args
    rng = np.random.default_rng([seed, j])
    x = sample(basis.measure, n, rng)
    y = np.asarray(f(x), dtype=float)
    if sigma > 0:
        y = y + sigma * rng.standard_normal(n)
    model = fit(basis, trunc, TrainingSample(x, y), method)
    rep = indices_from_coeffs(model)
    err = quad.error_sq(model.coeffs) if quad is not None else math.nan
    return rep.sobol - ref_s, rep.total - ref_t, rep.degenerate, err


@dataclass(frozen=True)
class ReplicateBlock:
    """Raw per-replicate index errors for replicates ``js``."""

    js: np.ndarray
    dS: np.ndarray
    dT: np.ndarray
    degenerate: np.ndarray
    err_sq: np.ndarray

    @staticmethod
    def concat(blocks: list["ReplicateBlock"]) -> "ReplicateBlock":
        blocks = sorted(blocks, key=lambda b: int(b.js[0]))
        return ReplicateBlock(*(np.concatenate([getattr(b, k) for b in blocks]) for k in ("js", "dS", "dT", "degenerate", "err_sq")))


def run_replicates(
    f,
    basis: BasisSpec,
    trunc: TruncationSet,
    method: str,
    n: int,
    sigma: float,
    seed: int,
    js,
    reference: IndexReport,
    quad: QuadratureReference | None = None,
    jobs: int = 1,
) -> ReplicateBlock:
    """Fit and score the replicates listed in ``js``; replicate ``j`` draws from ``default_rng([seed, j])``."""
    js = np.asarray(list(js), dtype=np.int64)
    args = [
        (f, basis, trunc, method, n, float(sigma), seed, int(j), reference.sobol, reference.total, quad)
        for j in js
    ]
    if jobs > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            out = list(ex.map(_replicate, args, chunksize=max(1, len(args) // (4 * jobs))))
    else:
        out = [_replicate(a) for a in args]
    return ReplicateBlock(
        js,
        np.array([o[0] for o in out]),
        np.array([o[1] for o in out]),
        np.array([o[2] for o in out], dtype=bool),
        np.array([o[3] for o in out], dtype=float),
    )


def summarize(block: ReplicateBlock, subsets, seed: int) -> EmpiricalRisk:
    """Replicate averages, in replicate order, with a bootstrap SE for the max quadratic risk."""
    n_runs = block.js.size
    if n_runs < 2:
        raise ValueError("n_runs must be at least 2")
    dS, dT = block.dS, block.dT
    sq = np.concatenate([dS**2, dT**2], axis=1)
    mse = sq.mean(axis=0)
    boot_rng = np.random.default_rng([seed, n_runs, 0x5E])
    picks = boot_rng.integers(0, n_runs, (SE_BOOTSTRAP, n_runs))
    boot_max = np.array([sq[p].mean(axis=0).max() for p in picks])
    k = dS.shape[1]
    mae_s, mae_t = np.abs(dS).mean(axis=0), np.abs(dT).mean(axis=0)
    return EmpiricalRisk(
        subsets=tuple(subsets),
        sobol_mse=mse[:k],
        total_mse=mse[k:],
        sobol_mae=mae_s,
        total_mae=mae_t,
        mse_max=float(mse.max()),
        mae_max=float(max(mae_s.max(), mae_t.max())),
        mse_max_se=float(boot_max.std(ddof=1)),
        n_runs=n_runs,
        n_degenerate=int(block.degenerate.sum()),
        err_sq_mean=float(block.err_sq.mean()),
        err_sq_se=float(block.err_sq.std(ddof=1) / math.sqrt(n_runs)),
    )


def empirical_risk(
    f,
    basis: BasisSpec,
    trunc: TruncationSet,
    method: str,
    n: int,
    sigma: float,
    n_runs: int,
    seed: int,
    reference: IndexReport | None = None,
    quad: QuadratureReference | None = None,
    jobs: int = 1,
) -> EmpiricalRisk:
    """Monte Carlo estimate of the quadratic and absolute index risk.

    Replicate ``j`` uses a generator seeded with ``(seed, j)`` for both its
    design and its noise. Degenerate fits stay in the averages through the
    ``2**-d`` convention. The standard error of the max-over-subsets quadratic
    risk is a replicate bootstrap. With ``quad`` the exact ``||f - fhat||^2``
    of each replicate is averaged too.
    """
    if n_runs < 2:
        raise ValueError("n_runs must be at least 2")
    if reference is None:
        reference = f.analytic_indices() if hasattr(f, "analytic_indices") else reference_indices(f, basis, trunc)
    block = run_replicates(f, basis, trunc, method, n, sigma, seed, range(n_runs), reference, quad, jobs)
    return summarize(block, reference.subsets, seed)
