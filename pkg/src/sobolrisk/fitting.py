"""Coefficient estimation for tensor-basis metamodels.

Two estimators are provided. ``fit_projection`` replaces the inner products
``<f, Psi_alpha>`` by sample means; ``fit_ols`` solves the least-squares
problem through a QR factorization of the design matrix. A normal matrix
whose condition number exceeds ``SINGULAR_COND`` is treated as singular, in
which case every coefficient is set to zero and the model is flagged
degenerate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from sobolrisk.measures import BasisSpec, univariate_table
from sobolrisk.truncation import TruncationSet, build_hyperbolic, build_max_degree

SINGULAR_COND = 1e12
METAMODEL_FORMAT = "sobolrisk.metamodel/1"


@dataclass(frozen=True)
class TrainingSample:
    """Design points with (possibly noisy) responses."""

    design: np.ndarray
    responses: np.ndarray
    noise_sd: float | None = None

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.design, dtype=float))
        y = np.asarray(self.responses, dtype=float).ravel()
        if x.shape[0] != y.shape[0]:
            raise ValueError(f"{x.shape[0]} design points but {y.shape[0]} responses")
        if y.shape[0] < 1:
            raise ValueError("a training sample needs at least one point")
        object.__setattr__(self, "design", x)
        object.__setattr__(self, "responses", y)

    @property
    def n(self) -> int:
        return self.responses.shape[0]

    def split(self, holdout: float) -> tuple["TrainingSample", "TrainingSample"]:
        """Split off the last ``round(holdout * n)`` points as a test sample."""
        n_test = int(round(holdout * self.n))
        if not 0 < n_test < self.n:
            raise ValueError(f"holdout {holdout} leaves an empty train or test part")
        cut = self.n - n_test
        return (
            TrainingSample(self.design[:cut], self.responses[:cut], self.noise_sd),
            TrainingSample(self.design[cut:], self.responses[cut:], self.noise_sd),
        )


@dataclass(frozen=True)
class Metamodel:
    """Expansion ``sum_alpha c_alpha Psi_alpha`` over a truncation set."""

    basis: BasisSpec
    trunc: TruncationSet
    coeffs: np.ndarray
    method: str = "ols"
    degenerate: bool = False
    info: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float).ravel()
        if c.shape[0] != self.trunc.N:
            raise ValueError(f"{c.shape[0]} coefficients for N={self.trunc.N}")
        if self.trunc.d != self.basis.d:
            raise ValueError("truncation and basis dimensions differ")
        object.__setattr__(self, "coeffs", c)

    @property
    def mean(self) -> float:
        return float(self.coeffs[0])

    @property
    def variance(self) -> float:
        return float(np.sum(self.coeffs[1:] ** 2))

    def __call__(self, x) -> np.ndarray:
        return design_matrix(self.basis, self.trunc, x) @ self.coeffs

    def to_dict(self) -> dict:
        return {
            "format": METAMODEL_FORMAT,
            "basis": list(self.basis.families),
            "truncation": {
                "scheme": self.trunc.scheme,
                "params": self.trunc.params,
                "indices": [list(a) for a in self.trunc.indices],
            },
            "method": self.method,
            "degenerate": self.degenerate,
            # python floats serialize with repr, which round-trips exactly
            "coeffs": [float(c) for c in self.coeffs],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, data: dict) -> "Metamodel":
        if data.get("format") != METAMODEL_FORMAT:
            raise ValueError(f"unsupported metamodel format {data.get('format')!r}")
        tr = data["truncation"]
        indices = tuple(tuple(a) for a in tr["indices"])
        trunc = TruncationSet(indices, tr["scheme"], dict(tr["params"]))
        return cls(
            BasisSpec(tuple(data["basis"])),
            trunc,
            np.array(data["coeffs"], dtype=float),
            data["method"],
            bool(data["degenerate"]),
        )

    @classmethod
    def loads(cls, text: str) -> "Metamodel":
        return cls.from_dict(json.loads(text))


def rebuild_truncation(scheme: str, d: int, params: dict) -> TruncationSet:
    if scheme == "max_degree":
        return build_max_degree(d, params["alpha_max"])
    if scheme == "hyperbolic":
        return build_hyperbolic(d, params["q"], params["t"])
    raise ValueError(f"cannot rebuild truncation scheme {scheme!r}")


def design_matrix(basis: BasisSpec, trunc: TruncationSet, design) -> np.ndarray:
    """Matrix ``Phi[i, j] = Psi_{alpha_j}(x_i)`` of shape ``(n, N)``."""
    x = np.atleast_2d(np.asarray(design, dtype=float))
    if x.shape[1] != basis.d or trunc.d != basis.d:
        raise ValueError(
            f"dimension mismatch: design {x.shape}, basis d={basis.d}, truncation d={trunc.d}"
        )
    idx = trunc.array
    phi = np.ones((x.shape[0], trunc.N))
    for i, fam in enumerate(basis.families):
        col = idx[:, i]
        top = int(col.max())
        if top == 0:
            continue
        phi *= univariate_table(fam, top, x[:, i])[:, col]
    return phi


def fit_projection(basis: BasisSpec, trunc: TruncationSet, sample: TrainingSample) -> Metamodel:
    """Empirical inner products ``c = Phi^T Y / n``."""
    phi = design_matrix(basis, trunc, sample.design)
    c = phi.T @ sample.responses / sample.n
    degenerate = not np.any(c[1:] != 0.0)
    return Metamodel(basis, trunc, c, "projection", degenerate)


def fit_ols(basis: BasisSpec, trunc: TruncationSet, sample: TrainingSample) -> Metamodel:
    """Ordinary least squares via QR; singular designs give a zero, degenerate model."""
    phi = design_matrix(basis, trunc, sample.design)
    return _ols_from_matrix(basis, trunc, phi, sample.responses)


def _ols_from_matrix(basis, trunc, phi, y) -> Metamodel:
    n, N = phi.shape
    zero = Metamodel(basis, trunc, np.zeros(N), "ols", True, {"cond": np.inf})
    if n < N:
        return zero
    q, r = scipy.linalg.qr(phi, mode="economic", check_finite=False)
    s = scipy.linalg.svdvals(r, check_finite=False)
    if s[-1] == 0.0:
        return zero
    # cond(Phi^T Phi / n) = cond(R)^2
    cond = float((s[0] / s[-1]) ** 2)
    if not np.isfinite(cond) or cond > SINGULAR_COND:
        return Metamodel(basis, trunc, np.zeros(N), "ols", True, {"cond": cond})
    c = scipy.linalg.solve_triangular(r, q.T @ y, check_finite=False)
    degenerate = not np.any(c[1:] != 0.0)
    return Metamodel(basis, trunc, c, "ols", degenerate, {"cond": cond})


def fit(basis: BasisSpec, trunc: TruncationSet, sample: TrainingSample, method: str) -> Metamodel:
    if method == "projection":
        return fit_projection(basis, trunc, sample)
    if method == "ols":
        return fit_ols(basis, trunc, sample)
    raise ValueError(f"unknown method {method!r}")


def stability_gap(basis: BasisSpec, trunc: TruncationSet, design) -> float:
    """Spectral norm of ``Phi^T Phi / n - I``."""
    phi = design_matrix(basis, trunc, design)
    gram = phi.T @ phi / phi.shape[0]
    gram[np.diag_indices_from(gram)] -= 1.0
    return float(np.max(np.abs(np.linalg.eigvalsh(gram))))


def rmse_holdout(model: Metamodel, test: TrainingSample) -> float:
    """Root mean squared prediction error on a test sample.

    The test sample must not have been used for fitting; this is not checked.
    """
    if test.n < 1:
        raise ValueError("empty test sample")
    resid = test.responses - model(test.design)
    return float(np.sqrt(np.mean(resid**2)))
