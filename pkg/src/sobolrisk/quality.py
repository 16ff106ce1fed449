"""Error bounds on index estimates and sample-based quality control.

With ``eps = ||f - fhat|| / sqrt(V[f])`` every Sobol or total index obeys

* ``|S - Shat| <= (sqrt(S (1 - Shat)) + sqrt(Shat (1 - S))) * eps``
* ``|S - Shat| <= min(1, eps + 2 sqrt(S), eps + 2 sqrt(1 - S)) * eps``
* ``max_u |S_u - Shat_u| <= eps``

and, for Sobol indices only, ``sum_u |S_u - Shat_u| <= 2 eps`` and
``sum_u (S_u - Shat_u)^2 <= 2 eps^2``. Quality control plugs a holdout RMSE
and sample variances into the second form.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from sobolrisk.fitting import Metamodel, TrainingSample, fit, rmse_holdout
from sobolrisk.indices import IndexReport, indices_from_coeffs, indices_from_masses
from sobolrisk.measures import BasisSpec
from sobolrisk.truncation import TruncationSet, subset_label

DEFAULT_HOLDOUT = 0.15
BOOTSTRAP_MULTIPLIER = 3.0
QUALITY_COLUMNS = ["subset", "index", "estimate", "bound", "method", "n", "seed"]


def relative_error(c_true, c_approx) -> float:
    """``||f - fhat|| / sqrt(V[f])`` for two expansions over the same orthonormal set.

    Position 0 holds the mean coefficient; the mean offset counts toward the error.
    """
    c_true = np.asarray(c_true, dtype=float)
    c_approx = np.asarray(c_approx, dtype=float)
    var = float(np.sum(c_true[1:] ** 2))
    if var == 0.0:
        raise ValueError("reference function has zero variance")
    return float(np.sqrt(np.sum((c_true - c_approx) ** 2) / var))


def bound_per_index(eps: float, S) -> np.ndarray | float:
    """``min(1, eps + 2 sqrt(S), eps + 2 sqrt(1 - S)) * eps``, capped at 1."""
    if np.any(np.asarray(eps) < 0):
        raise ValueError("eps must be nonnegative")
    S = np.clip(np.asarray(S, dtype=float), 0.0, 1.0)
    b = np.minimum.reduce([np.ones_like(S), eps + 2 * np.sqrt(S), eps + 2 * np.sqrt(1 - S)]) * eps
    b = np.minimum(b, 1.0)
    return float(b) if b.ndim == 0 else b


def bound_symmetric(S, S_hat, eps: float) -> np.ndarray | float:
    """``(sqrt(S (1 - Shat)) + sqrt(Shat (1 - S))) * eps``."""
    S = np.clip(np.asarray(S, dtype=float), 0.0, 1.0)
    Sh = np.clip(np.asarray(S_hat, dtype=float), 0.0, 1.0)
    b = (np.sqrt(S * (1 - Sh)) + np.sqrt(Sh * (1 - S))) * eps
    return float(b) if b.ndim == 0 else b


def bound_sums(eps: float) -> tuple[float, float]:
    """Bounds on ``sum_u |S_u - Shat_u|`` and ``sum_u (S_u - Shat_u)^2``."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    return 2.0 * eps, 2.0 * eps * eps


def eps2(distance: float, var_f: float, var_fhat: float) -> float:
    """``distance * min(V[f]^-1/2, V[fhat]^-1/2)``; ``inf`` when both variances vanish."""
    v = max(var_f, var_fhat)
    if v <= 0.0:
        return math.inf
    return distance / math.sqrt(v)


@dataclass(frozen=True)
class QualityResult:
    report: IndexReport
    rmse: float
    var_test: float
    var_model: float
    eps2: float
    sobol_bound: np.ndarray
    total_bound: np.ndarray

    def bound(self, kind: str) -> np.ndarray:
        return self.sobol_bound if kind == "sobol" else self.total_bound


def quality_control(model: Metamodel, test: TrainingSample, report: IndexReport | None = None) -> QualityResult:
    """Sample-based per-index error bounds from a holdout sample.

    The holdout RMSE stands in for ``||f - fhat||``; ``V[f]`` is the unbiased
    sample variance of the test responses and ``V[fhat]`` comes from the
    coefficients. The estimated indices replace the true ones inside the bound.
    When both variances are zero the bound is reported as 1.
    """
    if test.n < 1:
        raise ValueError("empty test sample")
    rep = report or indices_from_coeffs(model)
    rmse = rmse_holdout(model, test)
    var_test = float(np.var(test.responses, ddof=1)) if test.n > 1 else 0.0
    e = eps2(rmse, var_test, model.variance)
    if math.isinf(e):
        ones = np.ones(len(rep.subsets))
        return QualityResult(rep, rmse, var_test, model.variance, e, ones, ones.copy())
    return QualityResult(
        rep,
        rmse,
        var_test,
        model.variance,
        e,
        np.atleast_1d(bound_per_index(e, rep.sobol)),
        np.atleast_1d(bound_per_index(e, rep.total)),
    )


@dataclass(frozen=True)
class BootstrapResult:
    subsets: tuple
    sobol_err: np.ndarray
    total_err: np.ndarray
    n_degenerate: int
    n_s: int

    @property
    def defined(self) -> bool:
        return bool(np.all(np.isfinite(self.sobol_err)))

    def bound(self, kind: str) -> np.ndarray:
        return self.sobol_err if kind == "sobol" else self.total_err


def bootstrap_bound(
    sample: TrainingSample,
    basis: BasisSpec,
    trunc: TruncationSet,
    n_s: int = 100,
    seed: int = 0,
    method: str = "ols",
    multiplier: float = BOOTSTRAP_MULTIPLIER,
) -> BootstrapResult:
    """Bootstrap spread of refitted indices, ``multiplier`` times the standard deviation.

    Resample ``j`` draws its indices from a generator seeded with ``(seed, j)``,
    so results do not depend on evaluation order. Degenerate refits have no
    genuine indices; they are counted and left out of the spread. With fewer
    than two usable refits the bound is undefined (NaN).
    """
    if n_s < 2:
        raise ValueError("bootstrap needs n_s >= 2")
    S_rows, T_rows, n_deg, subsets = [], [], 0, None
    for j in range(n_s):
        rng = np.random.default_rng([seed, j])
        pick = rng.integers(0, sample.n, sample.n)
        rep = indices_from_coeffs(
            fit(basis, trunc, TrainingSample(sample.design[pick], sample.responses[pick]), method)
        )
        subsets = rep.subsets
        if rep.degenerate:
            n_deg += 1
            continue
        S_rows.append(rep.sobol)
        T_rows.append(rep.total)
    if len(S_rows) < 2:
        nan = np.full(len(subsets), np.nan)
        return BootstrapResult(subsets, nan, nan.copy(), n_deg, n_s)
    # population standard deviation (1/n_s), as in the usual bootstrap error formula
    S = multiplier * np.std(np.array(S_rows), axis=0)
    T = multiplier * np.std(np.array(T_rows), axis=0)
    return BootstrapResult(subsets, S, T, n_deg, n_s)


def quality_rows(result, method: str, n: int, seed: int) -> list[dict]:
    """Flatten a quality-control or bootstrap result into CSV rows."""
    rows = []
    if isinstance(result, QualityResult):
        rep = result.report
        subsets = rep.subsets
    else:
        rep = None
        subsets = result.subsets
    for kind in ("sobol", "total"):
        bounds = result.bound(kind)
        for i, u in enumerate(subsets):
            b = bounds[i]
            rows.append(
                {
                    "subset": subset_label(u),
                    "index": kind,
                    "estimate": "" if rep is None else repr(float(rep.values(kind)[i])),
                    "bound": "undefined" if not np.isfinite(b) else repr(float(b)),
                    "method": method,
                    "n": n,
                    "seed": seed,
                }
            )
    return rows


def rows_to_csv(rows: list[dict], columns=QUALITY_COLUMNS) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


@dataclass(frozen=True)
class Witness:
    """Coefficient pair over ``{Psi_0, Psi_(1,0,..), Psi_(0,1,..)}`` (mean first)."""

    f: np.ndarray
    f_hat: np.ndarray
    delta2: float

    @property
    def trunc(self) -> TruncationSet:
        return TruncationSet(((0, 0), (1, 0), (0, 1)), "explicit", {})

    @property
    def eps(self) -> float:
        return relative_error(self.f, self.f_hat)

    def max_gap(self) -> float:
        masks = self.trunc.support_masks[1:]
        a = indices_from_masses(2, masks, self.f[1:] ** 2)
        b = indices_from_masses(2, masks, self.f_hat[1:] ** 2)
        return float(
            max(np.max(np.abs(a.sobol - b.sobol)), np.max(np.abs(a.total - b.total)))
        )


def tightness_witness(kind: str = "equality_pair", eps_target: float | None = None) -> Witness:
    """Function pairs that attain the index error bounds.

    ``equality_pair`` has ``S_1 = 1/4``, ``Shat_1 = 3/4`` and ``eps = 1/2`` with
    ``max_u |S_u - Shat_u| = eps``. ``epsilon_scaled`` shifts the mean of the
    approximation by ``delta2 = sqrt(1 - t^2) / (2 t)`` so that the largest
    index gap equals ``t * eps`` for ``t = eps_target``.
    """
    f = np.array([0.0, 0.5, math.sqrt(3) / 2])
    f_hat = np.array([0.0, 0.75, math.sqrt(3) / 4])
    if kind == "equality_pair":
        return Witness(f, f_hat, 0.0)
    if kind != "epsilon_scaled":
        raise ValueError(f"unknown witness kind {kind!r}")
    if eps_target is None or not 0 < eps_target <= 1:
        raise ValueError("eps_target must lie in (0, 1]")
    delta2 = 0.5 * math.sqrt(1 - eps_target**2) / eps_target
    f_hat[0] = delta2
    return Witness(f, f_hat, delta2)
