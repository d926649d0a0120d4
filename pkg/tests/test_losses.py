"""Loss models, dictionaries, Gram matrices and the phi-loss catalog."""

from __future__ import annotations

import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mirroravg.losses import (
    PHI_LOSSES,
    Dictionary,
    Evaluator,
    KLDensityLoss,
    L2DensityLoss,
    ParametricFamily,
    QuadraticGameLoss,
    SquaredRegressionLoss,
    gram_matrix,
    kl_density_vertex_losses,
    l2_density_vertex_losses,
    mixture_predict,
    parametric_kl_vertex_losses,
    phi_classification_vertex_losses,
    phi_loss,
    quadratic_game_vertex_losses,
    squared_regression_vertex_losses,
)


def hist(edges, heights):
    return Evaluator.histogram(edges, heights)


def reg_dict(*evaluators, **bounds):
    return Dictionary(evaluators, "regression-fn", bounds)


class TestEvaluatorsAndDictionary:
    def test_catalog_values(self):
        assert Evaluator.constant(2.0)(0.3) == 2.0
        assert Evaluator.affine(1.0, -2.0)(0.25) == 0.5
        assert hist([0, 0.5, 1], [0.4, 1.6])(0.7) == 1.6
        assert Evaluator.gaussian(0.0, 1.0)(0.0) == pytest.approx(1 / math.sqrt(2 * math.pi))

    def test_histogram_validation(self):
        with pytest.raises(ValueError):
            hist([0, 1], [1, 2])
        with pytest.raises(ValueError):
            hist([0, 0.5, 0.4], [1, 2])

    def test_unknown_evaluator(self):
        with pytest.raises(ValueError):
            Evaluator.from_dict({"type": "spline"})
        with pytest.raises(ValueError):
            Evaluator.from_dict({"type": "affine", "slope": 1})

    def test_json_round_trip(self):
        d = Dictionary([hist([0, 0.5, 1], [0.5, 1.5]), Evaluator.constant(1.0),
                        Evaluator.gaussian(0.5, 0.2)], "density")
        again = Dictionary.from_json(d.to_json())
        assert again == d
        x = np.linspace(0, 1, 11)
        np.testing.assert_array_equal(again(x), d(x))

    def test_bound_checked_on_grid(self):
        reg_dict(Evaluator.affine(0, 1), Evaluator.constant(-1), L=1.0)
        with pytest.raises(ValueError):
            reg_dict(Evaluator.affine(0, 2), Evaluator.constant(0), L=1.0)

    def test_needs_two_candidates(self):
        with pytest.raises(ValueError):
            reg_dict(Evaluator.constant(0))

    def test_shape(self):
        d = reg_dict(Evaluator.constant(0), Evaluator.constant(1), Evaluator.affine(0, 1))
        assert d(np.zeros((4, 5))).shape == (4, 5, 3)


class TestMixturePredict:
    d = reg_dict(Evaluator.constant(2.0), Evaluator.affine(0.0, 3.0), Evaluator.affine(1.0, -1.0))

    def test_vertex(self):
        for j in range(3):
            e = np.eye(3)[j]
            assert mixture_predict(e, self.d, 0.4) == self.d.evaluators[j](0.4)

    def test_uniform_two(self):
        d = reg_dict(Evaluator.constant(1.0), Evaluator.affine(0.0, 1.0))
        assert mixture_predict([0.5, 0.5], d, 0.3) == pytest.approx((1.0 + 0.3) / 2, abs=1e-16)

    @given(st.lists(st.floats(0.01, 1), min_size=3, max_size=3), st.floats(0, 1))
    def test_dot_oracle(self, w, x):
        theta = np.array(w) / sum(w)
        direct = math.fsum(t * f(x) for t, f in zip(theta, self.d.evaluators))
        assert mixture_predict(theta, self.d, x) == pytest.approx(direct, abs=1e-14)

    def test_size_mismatch(self):
        with pytest.raises(ValueError):
            mixture_predict([0.5, 0.5], self.d, 0.1)


class TestVertexLosses:
    def test_squared_regression(self):
        d = reg_dict(Evaluator.constant(0), Evaluator.constant(1))
        np.testing.assert_array_equal(squared_regression_vertex_losses((0.2, 1.0), d).values, [1.0, 0.0])
        np.testing.assert_array_equal(squared_regression_vertex_losses((0.2, 0.5), d).values, [0.25, 0.25])
        same = reg_dict(Evaluator.constant(0.7), Evaluator.constant(0.7))
        np.testing.assert_array_equal(squared_regression_vertex_losses((0.9, 0.7), same).values, [0, 0])

    def test_squared_regression_batch(self, rng):
        d = reg_dict(Evaluator.constant(0), Evaluator.affine(0, 1))
        x, y = rng.random(10), rng.normal(size=10)
        U = squared_regression_vertex_losses((x, y), d).values
        assert U.shape == (10, 2)
        np.testing.assert_allclose(U[:, 1], (y - x) ** 2)

    def test_quadratic_game(self):
        np.testing.assert_array_equal(quadratic_game_vertex_losses(np.zeros(4)).values, [0.5] * 4)
        np.testing.assert_array_equal(quadratic_game_vertex_losses(np.eye(4)[0]).values, [-0.5, 0.5, 0.5, 0.5])

    def test_quadratic_game_linearity_bridge(self, rng):
        model = QuadraticGameLoss(5)
        z = rng.normal(size=5)
        e = np.eye(5)
        for j in range(5):
            assert model.mixture_loss(z, e[j]) == pytest.approx(model.vertex_losses(z).values[j], abs=1e-15)
        theta = rng.dirichlet(np.ones(5))
        assert model.mixture_loss(z, theta) == pytest.approx(0.5 * theta @ theta - z @ theta, abs=1e-15)

    def test_phi(self):
        d = Dictionary([Evaluator.constant(1.0), Evaluator.constant(0.0)], "classifier-score")
        u = phi_classification_vertex_losses((0.3, 1.0), d, phi_loss("exp")).values
        assert u[0] == pytest.approx(math.exp(-1))
        # Q = phi(-y h): the squared catalog loss (1 - v)^2 vanishes where -y h = 1,
        # i.e. h = -y, and equals 4 at h = y.
        scores = Dictionary([Evaluator.constant(1.0), Evaluator.constant(-1.0)], "classifier-score")
        np.testing.assert_array_equal(
            phi_classification_vertex_losses((0.0, 1.0), scores, phi_loss("squared")).values, [4.0, 0.0])
        np.testing.assert_array_equal(
            phi_classification_vertex_losses((0.0, -1.0), scores, phi_loss("squared")).values, [0.0, 4.0])
        assert phi_classification_vertex_losses((0.3, 1.0), d, phi_loss("logit")).values[1] == pytest.approx(1.0, abs=1e-15)

    def test_phi_rejects_labels(self):
        d = Dictionary([Evaluator.constant(1.0), Evaluator.constant(0.0)], "classifier-score")
        with pytest.raises(ValueError):
            phi_classification_vertex_losses((0.3, 0.0), d, phi_loss("exp"))

    def test_unknown_phi(self):
        with pytest.raises(ValueError):
            phi_loss("hinge")

    def test_kl(self):
        d = Dictionary([hist([0, 1, 2], [0.5, 0.5]), Evaluator.constant(1.0)], "density", support=(0, 2))
        lv = kl_density_vertex_losses(0.5, d)
        assert lv.values[0] == pytest.approx(math.log(2))
        assert lv.values[1] == 0.0
        assert lv.finite_flag

    def test_kl_clamp(self):
        d = Dictionary([hist([0, 1, 2], [1.0, 0.0]), Evaluator.constant(0.5)], "density", support=(0, 2))
        lv = kl_density_vertex_losses(1.5, d, floor=1e-300)
        assert lv.values[0] == pytest.approx(690.7755278982137, rel=1e-14)
        assert lv.values[0] == pytest.approx(float(-mpmath.log(mpmath.mpf("1e-300"))), rel=1e-14)
        assert not lv.finite_flag
        assert lv.clamped

    def test_kl_clamp_monotone(self, rng):
        d = Dictionary([hist([0, 1, 2], [1.0, 0.0]), hist([0, 1, 2], [0.3, 0.7])], "density", support=(0, 2))
        x = rng.uniform(0, 2, 100)
        hi = kl_density_vertex_losses(x, d, floor=1e-10)
        lo = kl_density_vertex_losses(x, d, floor=1e-200)
        ok = ~hi.clamped
        assert np.all(lo.values[ok] <= hi.values[ok])

    def test_l2(self):
        d = Dictionary([Evaluator.constant(1.0), hist([0, 0.5, 1], [2.0, 0.0])], "density")
        g = gram_matrix(d)
        assert l2_density_vertex_losses(0.3, d, g).values[0] == pytest.approx(-1.0)
        # p_2 has G_22 = 2 and p_2(0.75) = 0 -> u = 2; at 0.25, p_2 = 2 -> u = -2
        np.testing.assert_allclose(l2_density_vertex_losses(np.array([0.25, 0.75]), d, g).values[:, 1], [-2.0, 2.0])
        half = Dictionary([Evaluator.constant(1.0), Evaluator.constant(0.5)], "density",
                          support=(0, 1))
        gh = gram_matrix(half)
        # p_1 = 1: G_11 = 1, p_1(x)=1 -> -1; constructed zero: c = G_jj, p_j = c/2
        u = l2_density_vertex_losses(0.1, half, gh).values
        assert u[1] == pytest.approx(0.25 - 1.0)

    def test_l2_linearity_bridge(self, rng):
        d = Dictionary([hist([0, 0.5, 1], [1.5, 0.5]), hist([0, 0.25, 1], [2.0, 2 / 3]),
                        Evaluator.constant(1.0)], "density")
        model = L2DensityLoss(d, gram_matrix(d))
        x = rng.random(20)
        for j, e in enumerate(np.eye(3)):
            np.testing.assert_allclose(model.mixture_loss(x, e), model.vertex_losses(x).values[:, j], atol=1e-15)

    def test_parametric(self):
        b = ParametricFamily("bernoulli")
        assert parametric_kl_vertex_losses(0.0, b, [0.5]).values[0] == pytest.approx(math.log(2))
        assert parametric_kl_vertex_losses(0.0, b, [0.2]).values[0] == pytest.approx(-math.log(0.2))
        p = ParametricFamily("poisson")
        assert parametric_kl_vertex_losses(0.0, p, [1.0]).values[0] == pytest.approx(1.0)
        g = ParametricFamily("gaussian", 1.0)
        assert parametric_kl_vertex_losses(0.0, g, [0.0]).values[0] == pytest.approx(0.5 * math.log(2 * math.pi))

    def test_parametric_domain(self):
        with pytest.raises(ValueError):
            parametric_kl_vertex_losses(0.0, ParametricFamily("bernoulli"), [1.2])
        with pytest.raises(ValueError):
            parametric_kl_vertex_losses(0.0, ParametricFamily("poisson"), [-1.0])

    @pytest.mark.parametrize("name,a_star,a", [("bernoulli", 0.3, 0.6), ("poisson", 1.5, 2.5), ("gaussian", 0.2, -0.4)])
    def test_parametric_kl_closed_form(self, name, a_star, a):
        fam = ParametricFamily(name, 0.7)
        if name == "gaussian":
            f = lambda x, m: mpmath.npdf(x, m, 0.7)  # noqa: E731
            kl = mpmath.quad(lambda x: f(x, a_star) * mpmath.log(f(x, a_star) / f(x, a)), [-mpmath.inf, mpmath.inf])
        elif name == "bernoulli":
            kl = a_star * mpmath.log(a_star / a) + (1 - a_star) * mpmath.log((1 - a_star) / (1 - a))
        else:
            pm = lambda k, m: mpmath.exp(-m) * mpmath.mpf(m) ** k / mpmath.factorial(k)  # noqa: E731
            kl = mpmath.nsum(lambda k: pm(k, a_star) * mpmath.log(pm(k, a_star) / pm(k, a)), [0, mpmath.inf])
        assert float(fam.kl(a_star, a)) == pytest.approx(float(kl), rel=1e-10)


class TestGram:
    def test_identical_uniform(self):
        d = Dictionary([Evaluator.constant(1.0), hist([0, 1], [1.0])], "density")
        np.testing.assert_allclose(gram_matrix(d).entries, [[1, 1], [1, 1]], atol=1e-15)

    def test_disjoint(self):
        d = Dictionary([hist([0, 0.5, 1], [2, 0]), hist([0, 0.5, 1], [0, 2])], "density")
        g = gram_matrix(d).entries
        assert g[0, 1] == 0.0 and g[1, 0] == 0.0

    def test_bin_sum_oracle(self, rng):
        # overlapping histograms on different bins vs a brute-force fine-bin sum
        e1 = [0, 0.3, 0.5, 1.0]
        e2 = [0, 0.1, 0.6, 0.9, 1.0]
        h1 = rng.uniform(0.1, 2, 3)
        h2 = rng.uniform(0.1, 2, 4)
        d = Dictionary([hist(e1, h1), hist(e2, h2)], "density")
        # every breakpoint is a multiple of 0.1, so 1000 equal bins refine both
        mids = (np.arange(1000) + 0.5) / 1000
        v = d(mids)
        oracle = np.array([[math.fsum(v[:, i] * v[:, j] / 1000) for j in range(2)] for i in range(2)])
        np.testing.assert_allclose(gram_matrix(d).entries, oracle, rtol=0, atol=1e-12)

    def test_symmetric_psd(self, rng):
        d = Dictionary([Evaluator.gaussian(m, 0.1) for m in (0.3, 0.5, 0.7)], "density")
        g = gram_matrix(d)
        assert g.quadrature_meta["method"] == "trapezoid"
        assert np.array_equal(g.entries, g.entries.T)
        assert np.linalg.eigvalsh(g.entries).min() > -1e-12
        # int N(m,s)^2 = 1 / (2 s sqrt(pi)) (tails outside [0,1] are tiny for m=0.5)
        assert g.entries[1, 1] == pytest.approx(1 / (2 * 0.1 * math.sqrt(math.pi)), rel=1e-5)

    def test_grid_must_cover_support(self):
        d = Dictionary([Evaluator.gaussian(0.5, 0.1), Evaluator.gaussian(0.4, 0.1)], "density")
        with pytest.raises(ValueError):
            gram_matrix(d, {"lo": 0.1, "hi": 1.0})

    def test_needs_density(self):
        with pytest.raises(ValueError):
            gram_matrix(reg_dict(Evaluator.constant(0), Evaluator.constant(1)))


class TestPhiCatalog:
    @pytest.mark.parametrize("name", sorted(PHI_LOSSES))
    def test_derivatives_match_mpmath(self, name):
        phi = PHI_LOSSES[name]
        mp_phi = {
            "exp": mpmath.exp,
            "logit": lambda v: mpmath.log(1 + mpmath.exp(v)) / mpmath.log(2),
            "squared": lambda v: (1 - v) ** 2,
            "soft-margin": lambda v: max(mpmath.mpf(0), 1 - v) ** 2,
        }[name]
        for v in (-0.9, -0.3, 0.2, 0.8):
            assert float(phi.phi(v)) == pytest.approx(float(mp_phi(v)), rel=1e-13)
            assert float(phi.phi_d1(v)) == pytest.approx(float(mpmath.diff(mp_phi, v)), rel=1e-10)
            assert float(phi.phi_d2(v)) == pytest.approx(float(mpmath.diff(mp_phi, v, 2)), rel=1e-8)

    def test_soft_margin_kink(self):
        assert float(PHI_LOSSES["soft-margin"].phi_d2(1.0)) == 2.0
        assert float(PHI_LOSSES["soft-margin"].phi_d2(1.5)) == 0.0


class TestConvexity:
    """Midpoint convexity of theta -> Q(z, theta) on random segments."""

    def _segments(self, rng, M, count=100):
        return rng.dirichlet(np.ones(M), size=count), rng.dirichlet(np.ones(M), size=count)

    def _check(self, q, rng, M):
        A, B = self._segments(rng, M)
        for a, b in zip(A, B):
            assert q(0.5 * (a + b)) <= 0.5 * (q(a) + q(b)) + 1e-10

    def test_regression(self, rng):
        d = reg_dict(Evaluator.constant(0), Evaluator.affine(0, 1), Evaluator.affine(1, -1))
        m = SquaredRegressionLoss(d)
        self._check(lambda t: float(m.mixture_loss((0.3, 0.8), t)), rng, 3)

    @pytest.mark.parametrize("name", sorted(PHI_LOSSES))
    def test_phi(self, rng, name):
        from mirroravg.losses import PhiClassificationLoss

        d = Dictionary([Evaluator.constant(0.9), Evaluator.affine(-1, 2), Evaluator.constant(-0.4)],
                       "classifier-score")
        m = PhiClassificationLoss(d, PHI_LOSSES[name])
        self._check(lambda t: float(m.mixture_loss((0.6, -1.0), t)), rng, 3)

    def test_kl(self, rng):
        d = Dictionary([hist([0, 0.5, 1], [1.5, 0.5]), Evaluator.constant(1.0), hist([0, 0.5, 1], [0.2, 1.8])],
                       "density")
        m = KLDensityLoss(d)
        self._check(lambda t: float(m.mixture_loss(0.7, t)), rng, 3)

    def test_l2(self, rng):
        d = Dictionary([hist([0, 0.5, 1], [1.5, 0.5]), Evaluator.constant(1.0)], "density")
        m = L2DensityLoss(d, gram_matrix(d))
        self._check(lambda t: float(m.mixture_loss(0.2, t)), rng, 2)
