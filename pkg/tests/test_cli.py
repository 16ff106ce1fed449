"""Tests for the configuration schema and the command-line runner."""

import csv
import json
from pathlib import Path

import numpy as np
import pytest
import yaml

from sobolrisk import cli, experiments
from sobolrisk.config import ConfigError, load_config


def write(tmp_path, cfg, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(cfg))
    return path


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


ISHIGAMI = {
    "function": {"name": "ishigami", "params": {"a": 7, "b": 0.1}},
    "basis": "trigonometric",
    "truncation": {"scheme": "max_degree", "alpha_max": 5},
    "method": "ols",
    "sample_sizes": [10000],
    "seed": 0,
}

SPAN = {
    "function": {"name": "span_element", "params": {"coeff_seed": 3}},
    "basis": ["legendre", "chebyshev"],
    "truncation": {"scheme": "hyperbolic", "q": 0.7, "t": 5},
    "method": "ols",
    "sample_sizes": [160],
    "seed": 1,
}


class TestConfig:
    """Schema validation."""

    def test_missing_basis(self, tmp_path):
        cfg = dict(ISHIGAMI)
        del cfg["basis"]
        with pytest.raises(ConfigError):
            load_config(write(tmp_path, cfg))

    def test_unknown_key(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(write(tmp_path, {**ISHIGAMI, "colour": "red"}))

    def test_noise_forms(self, tmp_path):
        cfg = load_config(write(tmp_path, {**ISHIGAMI, "noise": [0, {"times_L": 0.1}, {"absolute": 2}]}))
        assert [z.sigma(10.0) for z in cfg.noise] == [0.0, 1.0, 2.0]
        with pytest.raises(ConfigError):
            load_config(write(tmp_path, {**ISHIGAMI, "noise": [{"absolute": 1, "times_L": 1}]}))

    def test_truncation_params(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(write(tmp_path, {**ISHIGAMI, "truncation": {"scheme": "hyperbolic", "q": 0.5}}))

    def test_overrides_and_hash(self, tmp_path):
        p = write(tmp_path, ISHIGAMI)
        a, b = load_config(p), load_config(p, seed=5, output="elsewhere")
        assert b.seed == 5 and b.output == "elsewhere"
        assert a.config_hash() != b.config_hash()
        assert load_config(p, output="x").config_hash() == a.config_hash()

    def test_unreadable(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "missing.yaml")


class TestShippedConfigs:
    """The example configs in the repository."""

    @pytest.mark.parametrize("path", sorted((Path(__file__).parent.parent / "configs").glob("*.yaml")), ids=lambda p: p.stem)
    def test_valid(self, path):
        cfg = load_config(path)
        assert experiments.prepare(cfg)


class TestFit:
    """The fit command."""

    def test_ishigami(self, tmp_path, capsys):
        code, out, _ = run(capsys, "fit", "--config", write(tmp_path, ISHIGAMI), "--out", tmp_path / "o")
        assert code == 0
        assert json.loads(out)["N"] == 216
        first = rows(tmp_path / "o" / "indices.csv")[0]
        assert first["subset"] == "1"
        assert abs(float(first["sobol"]) - 0.3139) < 0.02
        assert first["seed"] == "0" and first["schema_version"] == experiments.FIT_SCHEMA

    def test_span_recovery(self, tmp_path, capsys):
        code, _, _ = run(capsys, "fit", "--config", write(tmp_path, SPAN), "--out", tmp_path / "o")
        assert code == 0
        for r in rows(tmp_path / "o" / "indices.csv"):
            assert abs(float(r["sobol"]) - float(r["truth_sobol"])) < 1e-10
            assert abs(float(r["total"]) - float(r["truth_total"])) < 1e-10
        meta = json.loads((tmp_path / "o" / "metamodel.json").read_text())
        assert meta["degenerate"] is False

    def test_degenerate_is_success(self, tmp_path, capsys):
        cfg = {**ISHIGAMI, "sample_sizes": [50]}
        code, out, _ = run(capsys, "fit", "--config", write(tmp_path, cfg), "--out", tmp_path / "o")
        assert code == 0 and json.loads(out)["degenerate"] is True
        assert {r["sobol"] for r in rows(tmp_path / "o" / "indices.csv")} == {repr(1 / 8)}

    def test_config_error_exit(self, tmp_path, capsys):
        cfg = dict(ISHIGAMI)
        del cfg["basis"]
        code, _, err = run(capsys, "fit", "--config", write(tmp_path, cfg))
        assert code == 2
        assert json.loads(err.strip().splitlines()[-1])["kind"] == "config"

    def test_dimension_error_exit(self, tmp_path, capsys):
        cfg = {**ISHIGAMI, "basis": ["legendre", "legendre"]}
        code, _, _ = run(capsys, "fit", "--config", write(tmp_path, cfg))
        assert code == 2

    def test_numerical_failure_exit(self, tmp_path, capsys, monkeypatch):
        def boom(*args, **kwargs):
            raise np.linalg.LinAlgError("factorization failed")

        monkeypatch.setattr(experiments, "fit", boom)
        code, _, err = run(capsys, "fit", "--config", write(tmp_path, ISHIGAMI), "--out", tmp_path / "o")
        assert code == 3
        assert json.loads(err.strip().splitlines()[-1])["kind"] == "numerical"

    def test_byte_identical(self, tmp_path, capsys):
        p = write(tmp_path, SPAN)
        run(capsys, "fit", "--config", p, "--out", tmp_path / "a")
        run(capsys, "fit", "--config", p, "--out", tmp_path / "b")
        assert (tmp_path / "a" / "indices.csv").read_bytes() == (tmp_path / "b" / "indices.csv").read_bytes()


class TestQuality:
    """The quality command."""

    GF = {
        "function": {"name": "gfunction", "params": {"c": [0, 4]}},
        "basis": "legendre",
        "truncation": {"scheme": "hyperbolic", "q": 0.5, "t": 20},
        "method": "ols",
        "sample_sizes": [300, 2000],
        "bootstrap_ns": 10,
        "seed": 2,
    }

    def test_structure(self, tmp_path, capsys):
        code, _, _ = run(capsys, "quality", "--config", write(tmp_path, self.GF), "--out", tmp_path / "o")
        assert code == 0
        table = rows(tmp_path / "o" / "quality.csv")
        assert len(table) == 2 * 2 * 2 * 3
        assert {r["method"] for r in table} == {"proposed", "bootstrap"}
        assert list(table[0])[:7] == ["subset", "index", "estimate", "bound", "method", "n", "seed"]
        for r in table:
            assert r["realized_error"] == repr(abs(float(r["estimate"]) - float(r["truth"])))

    def test_truth_model(self, tmp_path, capsys):
        cfg = {**SPAN, "sample_sizes": [400], "bootstrap_ns": 5}
        code, _, _ = run(capsys, "quality", "--config", write(tmp_path, cfg), "--out", tmp_path / "o")
        assert code == 0
        for r in rows(tmp_path / "o" / "quality.csv"):
            assert float(r["bound"]) < 1e-12 and float(r["realized_error"]) < 1e-12

    def test_undefined_bootstrap(self, tmp_path, capsys):
        cfg = {**self.GF, "sample_sizes": [60]}
        code, _, _ = run(capsys, "quality", "--config", write(tmp_path, cfg), "--out", tmp_path / "o")
        assert code == 0
        boot = [r for r in rows(tmp_path / "o" / "quality.csv") if r["method"] == "bootstrap"]
        assert {r["bound"] for r in boot} == {"undefined"}


class TestRiskSweep:
    """The risk-sweep command and its checkpoints."""

    GF = {
        "function": {"name": "gfunction", "params": {"c": [0, 4]}},
        "basis": "legendre",
        "truncation": {"scheme": "max_degree", "alpha_max": 3},
        "extra_models": [{"basis": "trigonometric", "truncation": {"scheme": "max_degree", "alpha_max": 3}}],
        "method": ["projection", "ols"],
        "sample_sizes": [200, 800],
        "noise": [0, {"times_L": 0.1}],
        "n_runs": 6,
        "checkpoint_block": 4,
        "seed": 3,
    }

    def test_columns_and_resume(self, tmp_path, capsys):
        p = write(tmp_path, self.GF)
        code, _, _ = run(capsys, "risk-sweep", "--config", p, "--out", tmp_path / "o")
        assert code == 0
        first = (tmp_path / "o" / "risk.csv").read_bytes()
        table = rows(tmp_path / "o" / "risk.csv")
        assert len(table) == 2 * 2 * 2 * 2
        assert list(table[0])[:13] == [
            "method", "basis", "N", "K_N", "n", "sigma", "r", "e_N_sq", "bound_mse",
            "empirical_mse_max", "empirical_mae_max", "n_runs", "seed",
        ]
        assert {r["basis"] for r in table} == {"legendre", "trigonometric"}
        ckpts = sorted((tmp_path / "o" / "checkpoints").rglob("*.npz"))
        assert len(ckpts) == 16 * 2
        # a resumed run reuses the checkpoints and reproduces the bytes
        ckpts[0].unlink()
        (tmp_path / "o" / "risk.csv").unlink()
        run(capsys, "risk-sweep", "--config", p, "--out", tmp_path / "o")
        assert (tmp_path / "o" / "risk.csv").read_bytes() == first

    def test_parallel_matches(self, tmp_path, capsys):
        p = write(tmp_path, {**self.GF, "extra_models": [], "noise": [0]})
        run(capsys, "risk-sweep", "--config", p, "--out", tmp_path / "a")
        run(capsys, "risk-sweep", "--config", p, "--out", tmp_path / "b", "--jobs", 2)
        assert (tmp_path / "a" / "risk.csv").read_bytes() == (tmp_path / "b" / "risk.csv").read_bytes()

    def test_span_exact(self, tmp_path, capsys):
        cfg = {**SPAN, "n_runs": 2, "sample_sizes": [200]}
        code, _, _ = run(capsys, "risk-sweep", "--config", write(tmp_path, cfg), "--out", tmp_path / "o")
        assert code == 0
        assert float(rows(tmp_path / "o" / "risk.csv")[0]["empirical_mse_max"]) < 1e-16

    def test_needs_two_runs(self, tmp_path, capsys):
        code, _, _ = run(capsys, "risk-sweep", "--config", write(tmp_path, {**self.GF, "n_runs": 1}))
        assert code == 2

    def test_seed_override(self, tmp_path, capsys):
        p = write(tmp_path, {**self.GF, "extra_models": [], "method": "ols", "noise": [0]})
        run(capsys, "risk-sweep", "--config", p, "--out", tmp_path / "a", "--seed", 11)
        table = rows(tmp_path / "a" / "risk.csv")
        assert {r["seed"] for r in table} == {"11"}


class TestSelfcheck:
    """The built-in invariant suite."""

    def test_passes(self, capsys):
        code, out, _ = run(capsys, "selfcheck")
        assert code == 0
        assert "2,102,432" in out
        assert out.count("PASS") == 6

    def test_mutation_detected(self):
        from sobolrisk.selfcheck import KAPPA_NUM, check_r_threshold

        assert not check_r_threshold(KAPPA_NUM * 1.01)[1]
