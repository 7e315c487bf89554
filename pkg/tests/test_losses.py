import numpy as np
import pytest
import warnings
from hypothesis import given, settings, strategies as st

from embkit.losses import (AdaptiveBeta, BETA_MIN, DegeneratePairWarning,
                           LossConfig, PairTerm, TripletTerm, beta_gradient,
                           chain_to_embeddings, contrastive_loss, margin_loss,
                           regularized_beta_update, triplet_l2_loss,
                           triplet_l22_loss)

FD_STEP = 1e-6
KINK_CLEARANCE = 1e-3


def central_diff(f, x, h=FD_STEP):
    return (f(x + h) - f(x - h)) / (2 * h)


def pair(y, d):
    return PairTerm(0, 1, y, d)


class TestContrastive:
    def test_positive_pair(self):
        loss, grad = contrastive_loss(pair(+1, 0.5), alpha=1.0)
        assert loss == pytest.approx(0.25)
        assert grad == pytest.approx(1.0)

    def test_inactive_negative(self):
        loss, grad = contrastive_loss(pair(-1, 1.3), alpha=1.0)
        assert loss == 0.0 and grad == 0.0

    def test_active_negative(self):
        loss, grad = contrastive_loss(pair(-1, 0.4), alpha=1.0)
        assert loss == pytest.approx(0.36)
        assert grad == pytest.approx(-1.2)


class TestTripletL22:
    def test_active(self):
        loss, gap, gan = triplet_l22_loss(TripletTerm(0, 1, 2, 0.5, 0.6), 0.2)
        assert loss == pytest.approx(0.09)
        assert (gap, gan) == (pytest.approx(1.0), pytest.approx(-1.2))

    def test_inactive(self):
        loss, gap, gan = triplet_l22_loss(TripletTerm(0, 1, 2, 0.5, 1.5), 0.2)
        assert loss == gap == gan == 0.0

    def test_repulsion_vanishes_at_zero_negative_distance(self):
        # the collapse mechanism: -2 d_an -> 0 while the pull 2 d_ap persists
        for d_an in (0.1, 0.01, 0.001):
            _, _, gan = triplet_l22_loss(TripletTerm(0, 1, 2, 0.8, d_an), 0.2)
            assert abs(gan) == pytest.approx(2 * d_an)


class TestTripletL2:
    def test_values(self):
        loss, gap, gan = triplet_l2_loss(TripletTerm(0, 1, 2, 0.5, 0.6), 0.2)
        assert loss == pytest.approx(0.1)
        assert (gap, gan) == (1.0, -1.0)

    def test_inactive(self):
        loss, gap, gan = triplet_l2_loss(TripletTerm(0, 1, 2, 0.5, 0.71), 0.2)
        assert loss == gap == gan == 0.0

    @given(st.floats(0.0, 2.0), st.floats(0.0, 2.0),
           st.floats(0.05, 0.5))
    def test_active_gradients_have_unit_magnitude(self, d_ap, d_an, alpha):
        t = TripletTerm(0, 1, 2, d_ap, d_an)
        loss, gap, gan = triplet_l2_loss(t, alpha)
        if loss > 0:
            assert abs(gap) == 1.0 and abs(gan) == 1.0


class TestMargin:
    def test_boundary_case(self):
        loss, _ = margin_loss(pair(+1, 1.2), 0.2, beta_eff=1.2)
        assert loss == pytest.approx(0.2)

    def test_inactive_positive(self):
        # D=1.0 sits exactly on the kink beta - alpha; the loss is 0 up to
        # the rounding of 0.2 + (1.0 - 1.2)
        loss, _ = margin_loss(pair(+1, 1.0), 0.2, beta_eff=1.2)
        assert loss == pytest.approx(0.0, abs=1e-12)
        loss, grad = margin_loss(pair(+1, 0.9), 0.2, beta_eff=1.2)
        assert loss == 0.0 and grad == 0.0

    def test_active_negative(self):
        loss, grad = margin_loss(pair(-1, 1.1), 0.2, beta_eff=1.2)
        assert loss == pytest.approx(0.3)
        assert grad == -1.0

    def test_requires_positive_beta(self):
        with pytest.raises(ValueError):
            margin_loss(pair(+1, 1.0), 0.2, beta_eff=0.0)

    @given(st.sampled_from([-1, 1]), st.floats(0.0, 2.0),
           st.floats(0.05, 0.5), st.floats(0.2, 1.8))
    def test_shifted_contrastive_identity(self, y, d, alpha, beta):
        # y=-1 equals [(beta+alpha) - D]_+, y=+1 equals [D - (beta-alpha)]_+
        loss, _ = margin_loss(pair(y, d), alpha, beta)
        if y == -1:
            assert loss == pytest.approx(max(0.0, (beta + alpha) - d))
        else:
            assert loss == pytest.approx(max(0.0, d - (beta - alpha)))


class TestBetaGradient:
    @pytest.mark.parametrize("y,d,expected", [
        (+1, 1.3, -1.0),   # indicator active: 0.2 > -0.1
        (-1, 1.1, +1.0),
        (+1, 0.5, 0.0),
    ])
    def test_indicator(self, y, d, expected):
        assert beta_gradient(pair(y, d), 0.2, 1.2) == expected

    def test_matches_finite_differences_away_from_kinks(self, rng):
        for _ in range(100):
            y = int(rng.choice([-1, 1]))
            d = float(rng.uniform(0, 2))
            beta = float(rng.uniform(0.3, 1.8))
            alpha = 0.2
            if abs(alpha + y * (d - beta)) < KINK_CLEARANCE:
                continue
            g = beta_gradient(pair(y, d), alpha, beta)
            fd = central_diff(lambda b: margin_loss(pair(y, d), alpha, b)[0],
                              beta)
            assert g == pytest.approx(fd, abs=1e-6)


class TestDistanceGradientsAgainstFiniteDifferences:
    def test_all_losses(self, rng):
        checked = 0
        while checked < 100:
            d = float(rng.uniform(0.05, 1.95))
            alpha = float(rng.choice([0.1, 0.2, 0.5]))
            beta = float(rng.uniform(0.4, 1.6))
            y = int(rng.choice([-1, 1]))
            cases = [
                (lambda x: contrastive_loss(pair(y, x), alpha),
                 [alpha] if y == -1 else []),
                (lambda x: margin_loss(pair(y, x), alpha, beta),
                 [beta - y * alpha]),
            ]
            for f, kinks in cases:
                if any(abs(d - k) < KINK_CLEARANCE for k in kinks):
                    continue
                loss, grad = f(d)
                fd = central_diff(lambda x: f(x)[0], d)
                assert grad == pytest.approx(fd, rel=1e-5, abs=1e-7)
                checked += 1

    def test_triplet_distance_gradients(self, rng):
        checked = 0
        while checked < 100:
            d_ap = float(rng.uniform(0.05, 1.9))
            d_an = float(rng.uniform(0.05, 1.9))
            alpha = 0.2
            t = TripletTerm(0, 1, 2, d_ap, d_an)
            for fn, kink_val in ((triplet_l22_loss,
                                  d_ap ** 2 - d_an ** 2 + alpha),
                                 (triplet_l2_loss, d_ap - d_an + alpha)):
                if abs(kink_val) < KINK_CLEARANCE:
                    continue
                _, gap, gan = fn(t, alpha)
                fd_ap = central_diff(
                    lambda x: fn(TripletTerm(0, 1, 2, x, d_an), alpha)[0], d_ap)
                fd_an = central_diff(
                    lambda x: fn(TripletTerm(0, 1, 2, d_ap, x), alpha)[0], d_an)
                assert gap == pytest.approx(fd_ap, rel=1e-5, abs=1e-7)
                assert gan == pytest.approx(fd_an, rel=1e-5, abs=1e-7)
                checked += 1


class TestNonnegativity:
    @given(st.sampled_from([-1, 1]), st.floats(0.0, 2.0), st.floats(0.05, 1.0),
           st.floats(0.1, 1.9))
    @settings(max_examples=300)
    def test_all_losses_nonnegative(self, y, d, alpha, beta):
        assert contrastive_loss(pair(y, d), alpha)[0] >= 0.0
        assert margin_loss(pair(y, d), alpha, beta)[0] >= 0.0
        t = TripletTerm(0, 1, 2, d, 2.0 - d)
        assert triplet_l22_loss(t, alpha)[0] >= 0.0
        assert triplet_l2_loss(t, alpha)[0] >= 0.0


class TestChainToEmbeddings:
    def test_zero_gradient_passthrough(self, rng):
        f_i = rng.standard_normal(8)
        f_j = rng.standard_normal(8)
        g_i, g_j = chain_to_embeddings(0.0, f_i, f_j)
        assert np.all(g_i == 0) and np.all(g_j == 0)

    def test_antisymmetry(self, rng):
        for _ in range(20):
            f_i = rng.standard_normal(16)
            f_j = rng.standard_normal(16)
            g_i, g_j = chain_to_embeddings(1.7, f_i, f_j)
            np.testing.assert_allclose(g_i + g_j, 0.0)

    def test_matches_finite_differences(self, rng):
        alpha, beta = 0.2, 1.2
        for _ in range(25):
            f_i = rng.standard_normal(12)
            f_j = rng.standard_normal(12)
            d = np.linalg.norm(f_i - f_j)
            if abs(d - (beta + alpha)) < KINK_CLEARANCE:
                continue
            loss, dd = margin_loss(pair(-1, d), alpha, beta)
            g_i, _ = chain_to_embeddings(dd, f_i, f_j)
            for k in range(12):
                def probe(x):
                    fi = f_i.copy()
                    fi[k] = x
                    dist = np.linalg.norm(fi - f_j)
                    return margin_loss(pair(-1, dist), alpha, beta)[0]
                fd = central_diff(probe, f_i[k])
                assert g_i[k] == pytest.approx(fd, rel=1e-5, abs=1e-8)

    def test_degenerate_pair_warns_and_zeroes(self):
        f = np.ones(4)
        with pytest.warns(DegeneratePairWarning):
            g_i, g_j = chain_to_embeddings(1.0, f, f.copy())
        assert np.all(g_i == 0) and np.all(g_j == 0)


class TestAdaptiveBeta:
    def test_effective_composition(self):
        ab = AdaptiveBeta(beta0=1.2, beta_class={3: 0.1},
                          beta_img={7: -0.05}, use_img=True)
        assert ab.effective(3, 7) == pytest.approx(1.25)
        assert ab.effective(3) == pytest.approx(1.3)
        assert ab.effective() == pytest.approx(1.2)

    def test_no_active_terms_no_change(self):
        ab = AdaptiveBeta(beta0=1.2, nu=0.0)
        regularized_beta_update(ab, [pair(+1, 0.5)], 0.2, lr=0.1)
        assert ab.beta0 == pytest.approx(1.2)

    def test_active_negative_pulls_boundary_inward(self):
        # close negative: beta_gradient +1, descent lowers beta0 by lr
        ab = AdaptiveBeta(beta0=1.2, nu=0.0)
        regularized_beta_update(ab, [pair(-1, 1.1)], 0.2, lr=0.01)
        assert ab.beta0 == pytest.approx(1.19)

    def test_active_positive_pushes_boundary_outward(self):
        ab = AdaptiveBeta(beta0=1.2, nu=0.0)
        regularized_beta_update(ab, [pair(+1, 1.3)], 0.2, lr=0.01)
        assert ab.beta0 == pytest.approx(1.21)

    def test_nu_shrinks_beta_on_loss_free_data(self):
        ab = AdaptiveBeta(beta0=1.2, beta_class={0: 0.3}, nu=5.0)
        terms = [pair(+1, 1.0), pair(-1, 1.5)]  # both hinges inactive
        for _ in range(3):
            before0, before_c = ab.beta0, ab.beta_class[0]
            regularized_beta_update(ab, terms, 0.2, lr=0.001,
                                    anchor_classes=[0, 0])
            assert ab.beta0 < before0
            assert ab.beta_class[0] < before_c

    def test_positivity_clamp(self):
        ab = AdaptiveBeta(beta0=0.011, nu=0.0)
        for _ in range(10):
            regularized_beta_update(ab, [pair(-1, 0.005)], 0.2, lr=0.1)
        assert ab.beta0 >= BETA_MIN

    def test_class_component_receives_gradient(self):
        ab = AdaptiveBeta(beta0=1.2, nu=0.0)
        regularized_beta_update(ab, [pair(-1, 1.1)], 0.2, lr=0.01,
                                anchor_classes=[4])
        assert ab.beta_class[4] == pytest.approx(-0.01)

    def test_regularized_optimum_has_sign_change(self):
        # grid-search the nu-regularized objective over beta0; the one-sided
        # slope must change sign across the minimizer
        rng = np.random.default_rng(3)
        terms = [pair(+1, float(rng.uniform(0.2, 1.0))) for _ in range(6)] + \
                [pair(-1, float(rng.uniform(0.8, 1.9))) for _ in range(6)]
        nu, alpha = 0.3, 0.2

        def objective(b):
            return sum(margin_loss(t, alpha, b)[0] + nu * b for t in terms)

        grid = np.arange(0.05, 2.2, 1e-4)
        vals = np.array([objective(b) for b in grid])
        k = int(np.argmin(vals))
        assert 0 < k < len(grid) - 1
        left = vals[k] - vals[k - 1]
        right = vals[k + 1] - vals[k]
        assert left <= 0 <= right

    def test_rejects_negative_nu(self):
        with pytest.raises(ValueError):
            AdaptiveBeta(nu=-0.1)


class TestTermValidation:
    def test_pair_label_domain(self):
        with pytest.raises(ValueError):
            PairTerm(0, 1, 0, 0.5)

    def test_pair_distinct_members(self):
        with pytest.raises(ValueError):
            PairTerm(2, 2, 1, 0.5)

    def test_triplet_distinct(self):
        with pytest.raises(ValueError):
            TripletTerm(0, 0, 2, 0.5, 0.6)

    def test_loss_config(self):
        with pytest.raises(ValueError):
            LossConfig(alpha=0.0)
        with pytest.raises(ValueError):
            LossConfig(kind="npair")
