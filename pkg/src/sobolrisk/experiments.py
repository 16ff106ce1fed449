"""Config-driven experiment runners behind the command-line interface.

Every CSV row carries the master seed, how replicate seeds are derived from
it and a hash of the validated config, so identical configs give identical
bytes. Long risk sweeps store per-block replicate results under
``<output>/checkpoints/<config hash>/`` and resume from them.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from sobolrisk.config import ExperimentConfig, ModelConfig, TruncationConfig
from sobolrisk.fitting import Metamodel, TrainingSample, fit
from sobolrisk.indices import IndexReport, indices_from_coeffs
from sobolrisk.measures import BasisSpec, k_n, sample
from sobolrisk.quality import bootstrap_bound, quality_control
from sobolrisk.risk import (
    ReplicateBlock,
    RiskBoundInputs,
    estimate_best_error,
    quadrature_reference,
    r_from_sample,
    risk_bound_general,
    risk_bound_ols,
    risk_bound_projection,
    run_replicates,
    summarize,
)
from sobolrisk.testfuncs import SpanElement, make_function
from sobolrisk.truncation import TruncationSet, build_hyperbolic, build_max_degree, subset_label

FIT_SCHEMA = "sobolrisk.fit/1"
QUALITY_SCHEMA = "sobolrisk.quality/1"
RISK_SCHEMA = "sobolrisk.risk/1"

FIT_COLUMNS = ["subset", "sobol", "total", "truth_sobol", "truth_total", "degenerate", "variance", "method", "n", "seed"]
QUALITY_COLUMNS = [
    "subset", "index", "estimate", "bound", "method", "n", "seed",
    "fit_method", "sigma", "replicate", "truth", "realized_error",
]
RISK_COLUMNS = [
    "method", "basis", "N", "K_N", "n", "sigma", "r", "e_N_sq", "bound_mse",
    "empirical_mse_max", "empirical_mae_max", "n_runs", "seed",
    "applicable", "variance", "L", "noise_spec",
    "e_N_sq_over_V", "L2_sigma2_over_V_N_over_n", "sigma2_over_V_N_over_n", "n_pow_minus_r",
    "bound_general_mse", "err_sq_mean", "empirical_mse_max_se", "n_degenerate",
]
META_COLUMNS = ["seed_derivation", "config_hash", "schema_version"]


class NumericalFailure(RuntimeError):
    """A computation produced no usable result."""


def build_truncation(d: int, cfg: TruncationConfig) -> TruncationSet:
    if cfg.scheme == "max_degree":
        return build_max_degree(d, cfg.alpha_max)
    return build_hyperbolic(d, cfg.q, cfg.t)


def _function_dim(cfg: ExperimentConfig) -> int:
    fn = cfg.function
    if fn.name == "gfunction":
        return len(fn.params.get("c", (0.0, 4.0)))
    if fn.name == "ishigami":
        return 3
    if isinstance(cfg.basis, list):
        return len(cfg.basis)
    if "d" in fn.params:
        return int(fn.params["d"])
    raise ValueError("span_element needs a per-dimension basis list or params.d")


def build_basis(mc: ModelConfig, d: int) -> BasisSpec:
    fams = mc.basis if isinstance(mc.basis, list) else [mc.basis] * d
    if len(fams) != d:
        raise ValueError(f"basis has {len(fams)} families but the function has d={d}")
    return BasisSpec(tuple(fams))


def build_function(cfg: ExperimentConfig, basis: BasisSpec, trunc: TruncationSet):
    """The configured benchmark, adapted to the box of ``basis``.

    ``span_element`` takes ``params.coeffs`` (one per regressor) or draws
    standard normal coefficients from ``params.coeff_seed``.
    """
    fn = cfg.function
    if fn.name != "span_element":
        return make_function(fn.name, basis.measure, **fn.params)
    if "coeffs" in fn.params:
        coeffs = np.asarray(fn.params["coeffs"], dtype=float)
    else:
        coeffs = np.random.default_rng(int(fn.params.get("coeff_seed", 0))).standard_normal(trunc.N)
    return SpanElement(Metamodel(basis, trunc, coeffs, "truth"))


@dataclass(frozen=True)
class Setup:
    """Objects for one (basis, truncation) entry of a config."""

    basis: BasisSpec
    trunc: TruncationSet
    fn: object
    truth: IndexReport
    L: float


def prepare(cfg: ExperimentConfig) -> list[Setup]:
    """Build and validate every model entry; raises ``ValueError`` on bad input."""
    d = _function_dim(cfg)
    out = []
    for mc in cfg.models():
        basis = build_basis(mc, d)
        trunc = build_truncation(d, mc.truncation)
        fn = build_function(cfg, basis, trunc)
        out.append(Setup(basis, trunc, fn, fn.analytic_indices(), float(fn.sup_abs())))
    return out


def _meta(cfg: ExperimentConfig, schema: str, derivation: str) -> dict:
    return {"seed_derivation": derivation, "config_hash": cfg.config_hash(), "schema_version": schema}


def _csv(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns + META_COLUMNS, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def _num(x) -> str:
    return repr(float(x))


def _observe(fn, basis: BasisSpec, n: int, sigma: float, rng: np.random.Generator) -> TrainingSample:
    x = sample(basis.measure, n, rng)
    y = np.asarray(fn(x), dtype=float)
    if sigma > 0:
        y = y + sigma * rng.standard_normal(n)
    return TrainingSample(x, y, sigma)


def _out_dir(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    return out


# --- fit ------------------------------------------------------------------------


def cmd_fit(cfg: ExperimentConfig) -> dict:
    """Fit the first model entry on ``sample_sizes[0]`` points; write metamodel and index CSV."""
    st = prepare(cfg)[0]
    n, method = cfg.sample_sizes[0], cfg.method[0]
    sigma = cfg.noise[0].sigma(st.L)
    rng = np.random.default_rng(cfg.seed)
    data = _observe(st.fn, st.basis, n, sigma, rng)
    model = fit(st.basis, st.trunc, data, method)
    rep = indices_from_coeffs(model)
    if not (np.all(np.isfinite(model.coeffs)) and np.all(np.isfinite(rep.sobol))):
        raise NumericalFailure("non-finite coefficients")
    meta = _meta(cfg, FIT_SCHEMA, "default_rng(seed): design then noise")
    rows = []
    for i, u in enumerate(rep.subsets):
        rows.append(
            {
                "subset": subset_label(u),
                "sobol": _num(rep.sobol[i]),
                "total": _num(rep.total[i]),
                "truth_sobol": _num(st.truth.S(u)),
                "truth_total": _num(st.truth.T(u)),
                "degenerate": int(rep.degenerate),
                "variance": _num(rep.variance),
                "method": method,
                "n": n,
                "seed": cfg.seed,
                **meta,
            }
        )
    out = _out_dir(cfg)
    (out / "metamodel.json").write_text(model.dumps() + "\n", encoding="utf-8")
    (out / "indices.csv").write_text(_csv(rows, FIT_COLUMNS), encoding="utf-8")
    return {
        "command": "fit",
        "N": st.trunc.N,
        "n": n,
        "method": method,
        "degenerate": rep.degenerate,
        "files": ["metamodel.json", "indices.csv"],
    }


# --- quality ----------------------------------------------------------------------


def quality_table(cfg: ExperimentConfig) -> list[dict]:
    """Rows of the proposed and bootstrap bounds for every sample size and replicate."""
    st = prepare(cfg)[0]
    meta = _meta(
        cfg,
        QUALITY_SCHEMA,
        "default_rng([seed, n, replicate]) for design and noise; bootstrap resample j uses "
        "default_rng([SeedSequence([seed, n, replicate]).generate_state(1)[0], j])",
    )
    rows = []
    for noise in cfg.noise:
        sigma = noise.sigma(st.L)
        for n in cfg.sample_sizes:
            for j in range(cfg.n_runs):
                rng = np.random.default_rng([cfg.seed, n, j])
                data = _observe(st.fn, st.basis, n, sigma, rng)
                train, test = data.split(cfg.holdout)
                boot_seed = int(np.random.SeedSequence([cfg.seed, n, j]).generate_state(1)[0])
                for fm in cfg.method:
                    model = fit(st.basis, st.trunc, train, fm)
                    qc = quality_control(model, test)
                    bs = bootstrap_bound(train, st.basis, st.trunc, cfg.bootstrap_ns, boot_seed, fm)
                    for kind in ("sobol", "total"):
                        est = qc.report.values(kind)
                        truth = st.truth.values(kind)
                        for label, bounds in (("proposed", qc.bound(kind)), ("bootstrap", bs.bound(kind))):
                            for i, u in enumerate(qc.report.subsets):
                                b = bounds[i]
                                rows.append(
                                    {
                                        "subset": subset_label(u),
                                        "index": kind,
                                        "estimate": _num(est[i]),
                                        "bound": _num(b) if np.isfinite(b) else "undefined",
                                        "method": label,
                                        "n": n,
                                        "seed": cfg.seed,
                                        "fit_method": fm,
                                        "sigma": _num(sigma),
                                        "replicate": j,
                                        "truth": _num(truth[i]),
                                        "realized_error": _num(abs(est[i] - truth[i])),
                                        **meta,
                                    }
                                )
    return rows


def cmd_quality(cfg: ExperimentConfig) -> dict:
    rows = quality_table(cfg)
    out = _out_dir(cfg)
    (out / "quality.csv").write_text(_csv(rows, QUALITY_COLUMNS), encoding="utf-8")
    return {"command": "quality", "rows": len(rows), "files": ["quality.csv"]}


# --- risk sweep -------------------------------------------------------------------


def best_error_sq(cfg: ExperimentConfig, st: Setup):
    """``(||e_N||^2, quadrature reference or None)`` for one model entry."""
    if cfg.best_error == "quadrature" and st.basis.d <= 3:
        quad = quadrature_reference(st.fn, st.basis, st.trunc)
        return quad.e_N_sq, quad
    seed = int(np.random.SeedSequence([cfg.seed, 0xBE]).generate_state(1)[0])
    return estimate_best_error(st.fn, st.basis, st.trunc, cfg.best_error_n, seed), None


def _load_block(path: Path) -> ReplicateBlock | None:
    if not path.exists():
        return None
    with np.load(path) as z:
        return ReplicateBlock(z["js"], z["dS"], z["dT"], z["degenerate"], z["err_sq"])


def _save_block(path: Path, block: ReplicateBlock) -> None:
    tmp = path.with_name(path.stem + ".tmp.npz")
    np.savez(tmp, js=block.js, dS=block.dS, dT=block.dT, degenerate=block.degenerate, err_sq=block.err_sq)
    tmp.replace(path)


def risk_rows(cfg: ExperimentConfig, jobs: int = 1, log=None) -> list[dict]:
    if cfg.n_runs < 2:
        raise ValueError("risk-sweep needs n_runs >= 2")
    meta = _meta(
        cfg,
        RISK_SCHEMA,
        "default_rng([seed, replicate]) per replicate for design and noise; shared across cells",
    )
    ckpt = Path(cfg.output) / "checkpoints" / cfg.config_hash()
    ckpt.mkdir(parents=True, exist_ok=True)
    rows = []
    for m_idx, st in enumerate(prepare(cfg)):
        V = st.truth.variance
        e_sq, quad = best_error_sq(cfg, st)
        K = k_n(st.basis, st.trunc)
        N = st.trunc.N
        for method in cfg.method:
            for z_idx, noise in enumerate(cfg.noise):
                sigma = noise.sigma(st.L)
                for n in cfg.sample_sizes:
                    blocks = []
                    for b0 in range(0, cfg.n_runs, cfg.checkpoint_block):
                        js = range(b0, min(b0 + cfg.checkpoint_block, cfg.n_runs))
                        path = ckpt / f"m{m_idx}_{method}_z{z_idx}_n{n}_b{b0}.npz"
                        block = _load_block(path)
                        if block is None:
                            block = run_replicates(
                                st.fn, st.basis, st.trunc, method, n, sigma, cfg.seed, js, st.truth, quad, jobs
                            )
                            _save_block(path, block)
                        blocks.append(block)
                    emp = summarize(ReplicateBlock.concat(blocks), st.truth.subsets, cfg.seed)
                    r = r_from_sample(K, n) if n >= 2 else 0.0
                    inp = RiskBoundInputs(e_sq, V, st.L, sigma**2, N, n, r)
                    if method == "projection":
                        bound = risk_bound_projection(inp)
                    else:
                        bound = risk_bound_ols(inp, K_N=K)
                    general = risk_bound_general(emp.err_sq_mean, V) if quad is not None else None
                    comps = inp.components()
                    rows.append(
                        {
                            "method": method,
                            "basis": st.basis.name,
                            "N": N,
                            "K_N": _num(K),
                            "n": n,
                            "sigma": _num(sigma),
                            "r": _num(r),
                            "e_N_sq": _num(e_sq),
                            "bound_mse": _num(bound.mse),
                            "empirical_mse_max": _num(emp.mse_max),
                            "empirical_mae_max": _num(emp.mae_max),
                            "n_runs": cfg.n_runs,
                            "seed": cfg.seed,
                            "applicable": int(bound.applicable),
                            "variance": _num(V),
                            "L": _num(st.L),
                            "noise_spec": noise.label(),
                            **{k: _num(v) for k, v in comps.items()},
                            "bound_general_mse": _num(general.mse) if general else "",
                            "err_sq_mean": _num(emp.err_sq_mean) if quad is not None else "",
                            "empirical_mse_max_se": _num(emp.mse_max_se),
                            "n_degenerate": emp.n_degenerate,
                            **meta,
                        }
                    )
                    if log:
                        log(f"{st.basis.name} N={N} {method} sigma={sigma:.4g} n={n}: "
                            f"mse_max={emp.mse_max:.3e} bound={bound.mse:.3e}")
    return rows


def cmd_risk_sweep(cfg: ExperimentConfig, jobs: int = 1, log=None) -> dict:
    rows = risk_rows(cfg, jobs, log)
    bad = [r for r in rows if not math.isfinite(float(r["empirical_mse_max"]))]
    if bad:
        raise NumericalFailure(f"{len(bad)} sweep cells gave non-finite risk")
    out = _out_dir(cfg)
    (out / "risk.csv").write_text(_csv(rows, RISK_COLUMNS), encoding="utf-8")
    return {"command": "risk-sweep", "rows": len(rows), "files": ["risk.csv"]}


def echo_config(cfg: ExperimentConfig) -> None:
    """Write the validated config next to the outputs."""
    out = _out_dir(cfg)
    data = {"config_hash": cfg.config_hash(), "config": cfg.canonical()}
    (out / "config.json").write_text(json.dumps(data, indent=1, sort_keys=True) + "\n", encoding="utf-8")
