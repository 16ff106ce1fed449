"""Tests for the benchmark functions."""

import math

import numpy as np
import pytest

from sobolrisk.fitting import Metamodel
from sobolrisk.measures import ARCSINE, UNIFORM_SYM, UNIFORM_UNIT, BasisSpec, ProductMeasure, sample
from sobolrisk.testfuncs import DomainError, GFunction, Ishigami, SpanElement, make_function, with_noise
from sobolrisk.truncation import build_max_degree


class TestGFunction:
    """The Sobol g-function."""

    def test_center_value(self):
        assert GFunction((0, 4))((0.5, 0.5)) == 0.0

    def test_unit_factor(self):
        g = GFunction((3.0, 0.0))
        assert g((0.25, 0.9)) == pytest.approx(abs(4 * 0.9 - 2))

    def test_sup(self):
        g = GFunction((0, 4))
        assert g.sup_abs() == pytest.approx(2.4)
        grid = np.stack(np.meshgrid(*[np.linspace(0, 1, 401)] * 2), -1).reshape(-1, 2)
        assert np.max(g(grid)) == pytest.approx(2.4)

    def test_box_adapter(self):
        g = GFunction((0, 4), (-1, 1))
        assert g((0.0, 0.0)) == 0.0
        assert g((-1.0, 1.0)) == pytest.approx(2.4)

    def test_domain(self):
        with pytest.raises(DomainError):
            GFunction((0, 4))((1.2, 0.3))

    def test_variance_matches_sample(self):
        g = GFunction((0, 4))
        y = g(sample(ProductMeasure.iid(UNIFORM_UNIT, 2), 10**6, 0))
        assert y.var() == pytest.approx(g.variance, rel=0.01)


class TestIshigami:
    """The Ishigami function on adapted boxes."""

    def test_value(self):
        f = Ishigami(box=(-math.pi, math.pi))
        assert f((math.pi / 2, 0.0, 0.0)) == pytest.approx(1.0)
        # the same point seen from the unit box
        g = Ishigami(box=(0.0, 1.0))
        assert g((0.75, 0.5, 0.5)) == pytest.approx(1.0)

    def test_sup(self):
        f = Ishigami()
        assert f.sup_abs() == pytest.approx(1 + 7 + 0.1 * math.pi**4)
        assert f.sup_abs() == pytest.approx(17.741, abs=1e-3)
        z = np.linspace(-math.pi, math.pi, 101)
        grid = np.stack(np.meshgrid(z, z, z), -1).reshape(-1, 3)
        assert np.max(np.abs(f(grid))) == pytest.approx(f.sup_abs(), rel=0.005)

    def test_periodic(self):
        f = Ishigami()
        z = np.random.default_rng(0).uniform(-math.pi, -math.pi / 2, (50, 3))
        for i in (0, 1):
            w = z.copy()
            w[:, i] += 2 * math.pi
            np.testing.assert_allclose(_raw(w), f(z), atol=1e-12)
        # x3 enters through x3^4, so opposite faces of the box agree
        lo, hi = z.copy(), z.copy()
        lo[:, 2], hi[:, 2] = -math.pi, math.pi
        np.testing.assert_allclose(f(lo), f(hi), atol=1e-12)

    def test_variance_matches_sample(self):
        f = Ishigami(box=(-1, 1))
        y = f(sample(ProductMeasure.iid(UNIFORM_SYM, 3), 10**6, 1))
        assert y.var() == pytest.approx(f.variance, rel=0.01)


def _raw(z, a=7.0, b=0.1):
    return np.sin(z[:, 0]) + a * np.sin(z[:, 1]) ** 2 + b * z[:, 2] ** 4 * np.sin(z[:, 0])


class TestSpanAndRegistry:
    """Span elements, the name registry and noise."""

    def test_span_sup(self):
        basis = BasisSpec.iid("legendre", 2)
        tr = build_max_degree(2, 1)
        f = SpanElement(Metamodel(basis, tr, [0.0, 1.0, 0.0, 0.0]))
        assert f.sup_abs() == pytest.approx(math.sqrt(3))
        assert f.analytic_indices().S((1,)) == 1.0

    def test_make_function(self):
        f = make_function("ishigami", ProductMeasure.iid(UNIFORM_UNIT, 3))
        assert f.box == (0.0, 1.0)
        with pytest.raises(DomainError):
            make_function("gfunction", ProductMeasure.iid(UNIFORM_SYM, 3), c=[0, 1])
        with pytest.raises(DomainError):
            make_function("gfunction", ProductMeasure((UNIFORM_SYM, UNIFORM_UNIT)))
        with pytest.raises(ValueError):
            make_function("borehole", ProductMeasure.iid(UNIFORM_SYM, 3))
        assert make_function("gfunction", ProductMeasure.iid(ARCSINE, 2)).box == (-1.0, 1.0)

    def test_noise_free(self):
        g = GFunction((0, 4))
        x = sample(ProductMeasure.iid(UNIFORM_UNIT, 2), 10, 0)
        assert np.array_equal(with_noise(g, 0.0, 1)(x), g(x))

    def test_noise_level(self):
        g = GFunction((0, 4))
        sigma = g.sup_abs() / 10
        assert sigma == pytest.approx(0.24)
        noisy = with_noise(g, sigma, 5)
        y = noisy(np.full((10**5, 2), 0.3)) - g((0.3, 0.3))
        assert y.std() == pytest.approx(sigma, rel=0.01)

    def test_noise_stream(self):
        g = GFunction((0, 4))
        x = np.full((5, 2), 0.3)
        a, b = with_noise(g, 1.0, 3), with_noise(g, 1.0, 3)
        assert np.array_equal(a(x), b(x))
        with pytest.raises(ValueError):
            with_noise(g, -1.0)
