"""Tests for design matrices and coefficient estimation."""

import math

import numpy as np
import pytest

from sobolrisk.fitting import (
    Metamodel,
    TrainingSample,
    design_matrix,
    fit,
    fit_ols,
    fit_projection,
    rebuild_truncation,
    rmse_holdout,
    stability_gap,
)
from sobolrisk.measures import BasisSpec, sample
from sobolrisk.truncation import TruncationSet, build_hyperbolic, build_max_degree

LEG2 = BasisSpec.iid("legendre", 2)


def span_model(basis, trunc, seed=0):
    return Metamodel(basis, trunc, np.random.default_rng(seed).standard_normal(trunc.N))


class TestDesignMatrix:
    """The regressor matrix."""

    def test_mean_only(self):
        tr = TruncationSet(((0, 0),))
        assert np.array_equal(design_matrix(LEG2, tr, sample(LEG2.measure, 6, 0)), np.ones((6, 1)))

    def test_values(self):
        phi = design_matrix(BasisSpec.iid("legendre", 1), build_max_degree(1, 1), [[1.0]])
        np.testing.assert_allclose(phi, [[1.0, math.sqrt(3)]])

    def test_shape(self):
        assert design_matrix(LEG2, build_max_degree(2, 1), sample(LEG2.measure, 5, 1)).shape == (5, 4)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            design_matrix(LEG2, build_max_degree(2, 1), np.zeros((3, 3)))


class TestProjection:
    """Empirical inner products."""

    def test_constant(self):
        x = sample(LEG2.measure, 50, 3)
        m = fit_projection(LEG2, build_max_degree(2, 2), TrainingSample(x, np.full(50, 5.0)))
        assert m.coeffs[0] == 5.0

    def test_zero_response_degenerate(self):
        x = sample(LEG2.measure, 20, 3)
        m = fit_projection(LEG2, build_max_degree(2, 2), TrainingSample(x, np.zeros(20)))
        assert m.degenerate and np.all(m.coeffs == 0)

    def test_law_of_large_numbers(self):
        tr = build_max_degree(2, 1)
        x = sample(LEG2.measure, 10**5, 11)
        y = design_matrix(LEG2, tr, x)[:, 1]
        m = fit_projection(LEG2, tr, TrainingSample(x, y))
        assert abs(m.coeffs[1] - 1) < 0.02


class TestOLS:
    """Least squares via QR."""

    def test_exact_recovery(self):
        tr = build_hyperbolic(2, 0.7, 6)
        truth = span_model(LEG2, tr)
        x = sample(LEG2.measure, 3 * tr.N, 5)
        m = fit_ols(LEG2, tr, TrainingSample(x, truth(x)))
        np.testing.assert_allclose(m.coeffs, truth.coeffs, atol=1e-10)

    def test_matches_lstsq(self):
        tr = build_max_degree(2, 3)
        x = sample(LEG2.measure, 200, 2)
        y = np.sin(3 * x[:, 0]) * x[:, 1] ** 2
        m = fit_ols(LEG2, tr, TrainingSample(x, y))
        ref = np.linalg.lstsq(design_matrix(LEG2, tr, x), y, rcond=None)[0]
        np.testing.assert_allclose(m.coeffs, ref, atol=1e-10)

    def test_residual_orthogonality(self):
        tr = build_max_degree(2, 3)
        x = sample(LEG2.measure, 100, 4)
        y = np.exp(x[:, 0] - x[:, 1])
        m = fit_ols(LEG2, tr, TrainingSample(x, y))
        phi = design_matrix(LEG2, tr, x)
        assert np.max(np.abs(phi.T @ (y - phi @ m.coeffs))) < 1e-8

    def test_underdetermined(self):
        tr = build_max_degree(2, 3)
        x = sample(LEG2.measure, tr.N - 1, 4)
        m = fit_ols(LEG2, tr, TrainingSample(x, x[:, 0]))
        assert m.degenerate and np.all(m.coeffs == 0)

    def test_duplicate_points(self):
        tr = build_max_degree(2, 1)
        x = np.tile([[0.3, -0.2]], (30, 1))
        assert fit_ols(LEG2, tr, TrainingSample(x, np.arange(30.0))).degenerate

    def test_agrees_with_projection_when_N_is_one(self):
        tr = TruncationSet(((0, 0),))
        x = sample(LEG2.measure, 40, 8)
        s = TrainingSample(x, x[:, 0] ** 2)
        assert fit_ols(LEG2, tr, s).coeffs[0] == pytest.approx(fit_projection(LEG2, tr, s).coeffs[0], rel=1e-13)

    def test_deterministic(self):
        tr = build_max_degree(2, 3)
        x = sample(LEG2.measure, 100, 4)
        s = TrainingSample(x, np.cos(x.sum(axis=1)))
        assert np.array_equal(fit_ols(LEG2, tr, s).coeffs, fit_ols(LEG2, tr, s).coeffs)

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            fit(LEG2, build_max_degree(2, 1), TrainingSample(np.zeros((4, 2)), np.zeros(4)), "ridge")


class TestMetamodel:
    """Model summaries and serialization."""

    def test_variance_identity(self):
        m = span_model(LEG2, build_max_degree(2, 2), 9)
        y = m(sample(LEG2.measure, 10**6, 10))
        assert y.var() == pytest.approx(m.variance, rel=0.01)
        assert m.mean == m.coeffs[0]

    def test_roundtrip_exact(self):
        m = span_model(BasisSpec(("legendre", "trigonometric")), build_hyperbolic(2, 0.5, 7), 3)
        back = Metamodel.loads(m.dumps())
        assert np.array_equal(back.coeffs, m.coeffs)
        assert back.trunc.indices == m.trunc.indices and back.basis == m.basis

    def test_rebuild_truncation(self):
        assert rebuild_truncation("hyperbolic", 2, {"q": 0.5, "t": 20}).N == 91
        with pytest.raises(ValueError):
            rebuild_truncation("explicit", 2, {})

    def test_bad_format(self):
        with pytest.raises(ValueError):
            Metamodel.from_dict({"format": "other"})

    def test_coefficient_count(self):
        with pytest.raises(ValueError):
            Metamodel(LEG2, build_max_degree(2, 1), np.zeros(3))


class TestDiagnostics:
    """Stability gap and holdout error."""

    def test_gap_mean_only(self):
        assert stability_gap(LEG2, TruncationSet(((0, 0),)), sample(LEG2.measure, 7, 0)) == 0.0

    def test_gap_hand_computed(self):
        # [[1, r3], [r3, 3]] - I has eigenvalues 0 +- sqrt(1 + 3) ... largest |.| is 1 + 2 = 3
        gap = stability_gap(BasisSpec.iid("legendre", 1), build_max_degree(1, 1), [[1.0]])
        assert gap == pytest.approx(3.0)

    def test_rmse(self):
        tr = build_max_degree(2, 1)
        m = span_model(LEG2, tr, 1)
        x = sample(LEG2.measure, 100, 2)
        assert rmse_holdout(m, TrainingSample(x, m(x))) == pytest.approx(0.0, abs=1e-14)
        assert rmse_holdout(m, TrainingSample(x, m(x) + 1)) == pytest.approx(1.0)

    def test_rmse_unit_regressor(self):
        tr = build_max_degree(2, 1)
        x = sample(LEG2.measure, 10**5, 12)
        zero = Metamodel(LEG2, tr, np.zeros(tr.N))
        assert abs(rmse_holdout(zero, TrainingSample(x, design_matrix(LEG2, tr, x)[:, 1])) - 1) < 0.02

    def test_split(self):
        s = TrainingSample(np.arange(40.0).reshape(20, 2), np.arange(20.0))
        train, test = s.split(0.15)
        assert (train.n, test.n) == (17, 3)
        assert test.responses[0] == 17
        with pytest.raises(ValueError):
            s.split(0.01)

    def test_sample_shape_check(self):
        with pytest.raises(ValueError):
            TrainingSample(np.zeros((3, 2)), np.zeros(4))
