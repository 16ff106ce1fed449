"""Fast deterministic checks of the library's core identities.

Each check returns ``(name, passed, detail)``. The whole suite runs in well
under a minute on one core.
"""

from __future__ import annotations

import math
import time

import numpy as np

from sobolrisk.fitting import Metamodel, TrainingSample, fit_ols
from sobolrisk.indices import indices_from_coeffs, indices_from_masses
from sobolrisk.measures import BasisSpec, k_n, k_n_grid, sample, univariate_table
from sobolrisk.quality import bound_per_index, bound_symmetric, relative_error, tightness_witness
from sobolrisk.risk import KAPPA_NUM, min_n_positive_r
from sobolrisk.truncation import all_subsets, build_hyperbolic, build_max_degree

R_THRESHOLD = 2_102_432


def check_orthonormality(max_degree: int = 6, tol: float = 1e-8):
    t, w = np.polynomial.legendre.leggauss(64)
    worst = 0.0
    # uniform[-1,1]: Gauss-Legendre with weights normalized to a probability
    tab = univariate_table("legendre", max_degree, t)
    worst = max(worst, np.max(np.abs(tab.T @ (tab * (w / 2)[:, None]) - np.eye(max_degree + 1))))
    # arcsine: Gauss-Chebyshev nodes carry equal weights
    m = 64
    x = np.cos((2 * np.arange(1, m + 1) - 1) * np.pi / (2 * m))
    tab = univariate_table("chebyshev", max_degree, x)
    worst = max(worst, np.max(np.abs(tab.T @ tab / m - np.eye(max_degree + 1))))
    # uniform[0,1]: the rectangle rule is exact for low trigonometric degrees
    x = (np.arange(m) + 0.5) / m
    tab = univariate_table("trigonometric", max_degree, x)
    worst = max(worst, np.max(np.abs(tab.T @ tab / m - np.eye(max_degree + 1))))
    return "orthonormality", worst <= tol, f"max deviation {worst:.2e}"


def soundness_sweep(n_pairs: int = 10_000, seed: int = 0, tol: float = 1e-12):
    """Random coefficient pairs over a shared basis against every index error bound."""
    d = 3
    trunc = build_max_degree(d, 3)
    masks = trunc.support_masks[1:]
    rng = np.random.default_rng(seed)
    subsets = all_subsets(d)
    worst = -np.inf
    violations = 0
    for _ in range(n_pairs):
        c = rng.standard_normal(trunc.N) * rng.exponential(1.0, trunc.N)
        c[1:] *= rng.random(trunc.N - 1) < rng.uniform(0.1, 1.0)
        if not np.any(c[1:]):
            c[1] = 1.0
        scale = 10.0 ** rng.uniform(-4, 1)
        ch = c + scale * rng.standard_normal(trunc.N) * np.abs(c).max()
        a = indices_from_masses(d, masks, c[1:] ** 2, subsets)
        b = indices_from_masses(d, masks, ch[1:] ** 2, subsets)
        if b.degenerate:
            continue
        # the mean-free error is the tighter of the two variants
        eps = math.sqrt(np.sum((c[1:] - ch[1:]) ** 2) / np.sum(c[1:] ** 2))
        gaps = []
        for S, Sh in ((a.sobol, b.sobol), (a.total, b.total)):
            gap = np.abs(S - Sh)
            gaps.append(gap - np.minimum(bound_symmetric(S, Sh, eps), 1.0))
            gaps.append(gap - bound_per_index(eps, S))
            gaps.append(gap - eps)
        dS = np.abs(a.sobol - b.sobol)
        gaps.append(np.array([dS.sum() - 2 * eps, np.sum(dS**2) - 2 * eps * eps]))
        g = max(float(np.max(x)) for x in gaps)
        worst = max(worst, g)
        violations += g > tol
    return "bound soundness sweep", violations == 0, f"{violations} violations, worst excess {worst:.2e}"


def check_witnesses(tol: float = 1e-12):
    w = tightness_witness("equality_pair")
    ok = abs(w.eps - 0.5) <= tol and abs(w.max_gap() - 0.5) <= tol
    ws = tightness_witness("epsilon_scaled", 0.5)
    ok = ok and abs(ws.max_gap() - 0.5 * ws.eps) <= 1e-10
    return "tightness witnesses", ok, f"eps={w.eps:.12f} gap={w.max_gap():.12f}; scaled gap/eps={ws.max_gap() / ws.eps:.12f}"


def check_k_n(tol: float = 1e-6):
    worst = 0.0
    for fam in ("legendre", "chebyshev", "trigonometric"):
        for d in (1, 2):
            for amax in range(1, 5):
                basis = BasisSpec.iid(fam, d)
                tr = build_max_degree(d, amax)
                closed, grid = k_n(basis, tr), k_n_grid(basis, tr)
                worst = max(worst, abs(closed - grid) / grid)
    ok = worst <= tol
    rng = np.random.default_rng(3)
    for _ in range(20):
        d = int(rng.integers(1, 3))
        tr = build_hyperbolic(d, float(rng.uniform(0.3, 1.0)), int(rng.integers(1, 8)))
        fam = ("legendre", "chebyshev", "trigonometric")[int(rng.integers(3))]
        ok = ok and k_n(BasisSpec.iid(fam, d), tr) >= tr.N - 1e-9
    return "K_N closed forms", ok, f"max relative deviation {worst:.2e}"


def check_r_threshold(kappa_num: float = KAPPA_NUM):
    n = min_n_positive_r(15625.0) if kappa_num == KAPPA_NUM else _threshold_with(kappa_num)
    return "r-threshold", n == R_THRESHOLD, f"smallest n with r > 0 at K_N=15625: {n:,}"


def _threshold_with(kappa_num: float) -> int:
    # bisection with an altered constant, for mutation testing
    lo, hi = 3, 10**12
    ok = lambda n: kappa_num / 2.0 * n / (15625.0 * math.log(n)) - 1.0 > 0
    while hi - lo > 1:
        mid = (lo + hi) // 2
        lo, hi = (lo, mid) if ok(mid) else (mid, hi)
    return hi


def check_exact_recovery(tol: float = 1e-10):
    basis = BasisSpec(("legendre", "trigonometric"))
    tr = build_hyperbolic(2, 0.7, 5)
    truth = Metamodel(basis, tr, np.random.default_rng(5).standard_normal(tr.N))
    ref = indices_from_coeffs(truth)
    x = sample(basis.measure, 10 * tr.N, 11)
    rep = indices_from_coeffs(fit_ols(basis, tr, TrainingSample(x, truth(x))))
    err = max(np.max(np.abs(rep.sobol - ref.sobol)), np.max(np.abs(rep.total - ref.total)))
    return "exact recovery", err < tol, f"max index error {err:.2e}"


CHECKS = (
    check_orthonormality,
    check_witnesses,
    check_k_n,
    check_r_threshold,
    check_exact_recovery,
    soundness_sweep,
)


def run_all(log=print) -> bool:
    ok_all = True
    for check in CHECKS:
        t0 = time.perf_counter()
        name, ok, detail = check()
        ok_all &= bool(ok)
        log(f"{'PASS' if ok else 'FAIL'}  {name}: {detail} ({time.perf_counter() - t0:.1f}s)")
    return ok_all
