import math

import numpy as np
import pytest

import twoport as tp


def random_case(rng):
    params = tp.NetworkParams(*rng.uniform(-math.pi, math.pi, 3),
                              rng.uniform(0.05, math.pi / 2 - 0.05))
    settings = tp.HomodyneSettings(*rng.uniform(-math.pi, math.pi, 2))
    probe = tp.ProbeConfig(alpha=rng.uniform(0.1, 2.0), r=rng.uniform(0.1, 1.5))
    return params, settings, probe


def fd_derivatives(params, settings, probe, h=1e-6):
    dmean = np.empty((4, 2))
    dcov = np.empty((4, 2, 2))
    base = params.as_array()
    for i in range(4):
        step = np.zeros(4)
        step[i] = h
        plus = tp.closed_form_stats(tp.NetworkParams.from_array(base + step),
                                    settings, probe)
        minus = tp.closed_form_stats(tp.NetworkParams.from_array(base - step),
                                     settings, probe)
        dmean[i] = (plus.mean - minus.mean) / (2 * h)
        dcov[i] = (plus.covariance - minus.covariance) / (2 * h)
    return dmean, dcov


class TestStatsDerivatives:
    def test_matches_finite_differences(self):
        rng = np.random.default_rng(10)
        for _ in range(100):
            params, settings, probe = random_case(rng)
            d = tp.stats_derivatives(params, settings, probe)
            fd_mean, fd_cov = fd_derivatives(params, settings, probe)
            scale_m = 1.0 + np.abs(fd_mean)
            scale_c = 1.0 + np.abs(fd_cov)
            assert (np.abs(d.dmean - fd_mean) / scale_m).max() < 1e-6
            assert (np.abs(d.dcov - fd_cov) / scale_c).max() < 1e-6

    def test_phi1_covariance_slot_exactly_zero(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            params, settings, probe = random_case(rng)
            d = tp.stats_derivatives(params, settings, probe)
            assert np.abs(d.dcov[1]).max() == 0.0

    def test_arrays_are_read_only(self):
        rng = np.random.default_rng(12)
        d = tp.stats_derivatives(*random_case(rng))
        with pytest.raises(ValueError):
            d.dmean[0, 0] = 1.0


class TestFisherMatrix:
    def test_symmetric_positive_semidefinite_and_split(self):
        rng = np.random.default_rng(13)
        for _ in range(50):
            params, settings, probe = random_case(rng)
            split = tp.fisher_matrix(params, settings, probe)
            for mat in (split.f_total, split.f_sigma, split.f_mu):
                assert np.abs(mat - mat.T).max() == 0.0
                assert np.linalg.eigvalsh(mat).min() > -1e-10
            assert np.abs(split.f_total - split.f_sigma - split.f_mu).max() < 1e-12

    def test_phi1_information_is_signal_only(self):
        rng = np.random.default_rng(14)
        params, settings, probe = random_case(rng)
        split = tp.fisher_matrix(params, settings, probe)
        assert np.abs(split.f_sigma[1]).max() == 0.0
        assert np.abs(split.f_sigma[:, 1]).max() == 0.0

    def test_no_displacement_kills_phi1_row(self):
        rng = np.random.default_rng(15)
        params, settings, _ = random_case(rng)
        probe = tp.ProbeConfig(alpha=0.0, r=1.0)
        split = tp.fisher_matrix(params, settings, probe)
        assert np.abs(split.f_mu).max() == 0.0
        assert np.abs(split.f_total[1]).max() == 0.0
        assert np.abs(split.f_total[:, 1]).max() == 0.0

    def test_matches_gaussian_information_formula(self):
        rng = np.random.default_rng(16)
        params, settings, probe = random_case(rng)
        stats = tp.closed_form_stats(params, settings, probe)
        d = tp.stats_derivatives(params, settings, probe)
        inv = np.linalg.inv(stats.covariance)
        ref = np.empty((4, 4))
        for i in range(4):
            for j in range(4):
                ref[i, j] = (d.dmean[i] @ inv @ d.dmean[j]
                             + 0.5 * np.trace(inv @ d.dcov[i] @ inv @ d.dcov[j]))
        split = tp.fisher_matrix(params, settings, probe)
        assert np.abs(split.f_total - ref).max() < 1e-10 * (1 + np.abs(ref).max())


class TestCoefficients:
    def test_lambda_headline(self, headline_k):
        assert tp.lambda_value(headline_k) == 4.0

    def test_sigma_headline_matrix(self, headline_k):
        sig = tp.coefficient_sigma(headline_k)
        assert np.abs(sig.matrix - np.diag([4.0, 0.0, 1.0, 4.0])).max() < 1e-12

    def test_mu_headline_matrix(self, headline_k):
        mu = tp.coefficient_mu(headline_k, phi1=0.8)
        expected = np.zeros((4, 4))
        expected[1, 1] = 1.0
        assert np.abs(mu.matrix - expected).max() < 1e-12

    def test_mu_phi1_independent_at_symmetric_tuning(self, headline_k):
        vals = [tp.coefficient_mu(headline_k, phi1).d2
                for phi1 in (-2.0, 0.0, 1.3)]
        assert max(vals) - min(vals) < 1e-14

    def test_mu_depends_on_phi1_generically(self):
        k = tp.TuningConstants(0.7, 0.2, 0.1)
        d2a = tp.coefficient_mu(k, 0.0).d2
        d2b = tp.coefficient_mu(k, 1.0).d2
        assert abs(d2a - d2b) > 1e-3

    def test_total_headline_inverse_diagonal(self, headline_k):
        coeff = tp.coefficient_total(headline_k, beta=0.5, phi1=0.3)
        assert np.abs(coeff.f_total_coeff - np.diag([1.0, 0.25, 0.25, 1.0])).max() < 1e-12
        assert np.abs(coeff.inverse_diagonal - np.array([1.0, 4.0, 4.0, 1.0])).max() < 1e-12

    def test_total_composition(self):
        k = tp.TuningConstants(0.4, 0.9, 0.2)
        beta, phi1 = 0.3, 0.7
        coeff = tp.coefficient_total(k, beta, phi1)
        expected = (beta ** 2 * tp.coefficient_sigma(k).matrix
                    + beta * (1 - beta) * tp.coefficient_mu(k, phi1).matrix)
        assert np.abs(coeff.f_total_coeff - expected).max() < 1e-15
        assert np.abs(coeff.f_total_coeff - tp.coefficient_matrix(k, beta, phi1)).max() == 0.0

    def test_exact_fisher_converges_to_coefficients(self, headline_truth, headline_k):
        # N^2 * F^-1 must approach the inverse coefficient diagonal as N grows
        coeff = tp.coefficient_total(headline_k, beta=0.5, phi1=headline_truth.phi1)
        gaps = []
        for n in (1e3, 1e4):
            probe = tp.ResourceSplit(n_total=n, beta=0.5).to_probe()
            settings = tp.tuned_settings(headline_truth, headline_k, probe.n_squeeze)
            split = tp.fisher_matrix(headline_truth, settings, probe)
            diag = n ** 2 * np.diag(np.linalg.inv(split.f_total))
            gaps.append(np.abs(diag / coeff.inverse_diagonal - 1.0).max())
        assert gaps[0] < 0.2
        assert gaps[1] < 0.02
        assert gaps[1] < gaps[0]


class TestSingularity:
    def test_headline_det_factor(self, headline_k):
        report = tp.singularity_check(headline_k)
        assert report.det_factor == 65536.0
        assert report.classification is tp.SingularityClass.NONSINGULAR
        assert not report.classification.is_singular

    @pytest.mark.parametrize("k, expected", [
        ((0.5, -0.5, 0.3), tp.SingularityClass.ANTISYMMETRIC),
        ((1.0, 0.25, 0.5), tp.SingularityClass.QUADRIC),
        ((1.0, 0.25, -0.5), tp.SingularityClass.QUADRIC),
        ((0.0, 0.0, 0.0), tp.SingularityClass.BOTH),
        ((0.5, 0.5, 0.0), tp.SingularityClass.NONSINGULAR),
    ])
    def test_classification(self, k, expected):
        report = tp.singularity_check(tp.TuningConstants(*k))
        assert report.classification is expected
        if expected.is_singular:
            assert abs(report.det_factor) < 1e-12

    def test_det_factor_matches_numeric_subblock(self):
        rng = np.random.default_rng(17)
        idx = np.array([0, 2, 3])
        for _ in range(200):
            k = tp.TuningConstants(*rng.uniform(-2, 2, 3))
            sig = tp.coefficient_sigma(k)
            sub = (sig.lam ** 2 * sig.matrix)[np.ix_(idx, idx)]
            numeric = np.linalg.det(sub)
            closed = tp.singularity_check(k).det_factor
            assert abs(numeric - closed) <= 1e-9 * max(1.0, abs(closed))

    def test_eigenvalue_gap_off_loci(self):
        # off both loci the matrix stays strictly positive definite, but the
        # smallest eigenvalue decays toward the sampling cube's corners, so
        # the 1e-3 floor only holds for moderate tuning magnitudes
        import itertools

        axis = np.linspace(-2.0, 2.0, 13)
        smallest_all = math.inf
        smallest_moderate = math.inf
        for k1, k2, k3 in itertools.product(axis, axis, axis):
            if abs(k1 + k2) / math.sqrt(2) < 0.1 or abs(k1 * k2 - k3 * k3) < 0.1:
                continue
            m = tp.coefficient_matrix(tp.TuningConstants(k1, k2, k3), 0.5, 0.8)
            e = float(np.linalg.eigvalsh(m)[0])
            smallest_all = min(smallest_all, e)
            if max(abs(k1), abs(k2), abs(k3)) <= 1.0:
                smallest_moderate = min(smallest_moderate, e)
        assert smallest_all > 5e-5
        assert smallest_moderate > 1e-3

    def test_total_raises_on_singular_tuning(self):
        with pytest.raises(tp.SingularCoefficientError) as info:
            tp.coefficient_total(tp.TuningConstants(0.5, -0.5, 0.3), 0.5, 0.0)
        assert info.value.reason == "antisymmetric"
        with pytest.raises(tp.SingularCoefficientError) as info:
            tp.coefficient_total(tp.TuningConstants(1.0, 0.25, 0.5), 0.5, 0.0)
        assert info.value.reason == "quadric"

    @pytest.mark.parametrize("beta", [0.0, 1.0])
    def test_total_raises_on_resource_boundary(self, headline_k, beta):
        with pytest.raises(tp.SingularCoefficientError) as info:
            tp.coefficient_total(headline_k, beta, 0.0)
        assert info.value.reason == "resource-boundary"

    def test_total_rejects_fraction_outside_range(self, headline_k):
        with pytest.raises(ValueError, match="\\[0, 1\\]"):
            tp.coefficient_total(headline_k, 1.2, 0.0)


class TestCrb:
    def test_scaling_with_repetitions(self, headline_truth, headline_k, headline_split):
        probe = headline_split.to_probe()
        settings = tp.tuned_settings(headline_truth, headline_k, probe.n_squeeze)
        split = tp.fisher_matrix(headline_truth, settings, probe)
        one = tp.crb(split, 1)
        many = tp.crb(split, 250)
        assert np.abs(many.marginal_bounds - one.marginal_bounds / 250).max() < 1e-15
        assert math.isclose(many.trace_bound, one.trace_bound / 250, rel_tol=1e-15)
        assert many.repetitions == 250

    def test_rejects_bad_repetitions(self, headline_truth, headline_k, headline_split):
        probe = headline_split.to_probe()
        settings = tp.tuned_settings(headline_truth, headline_k, probe.n_squeeze)
        split = tp.fisher_matrix(headline_truth, settings, probe)
        with pytest.raises(ValueError, match=">= 1"):
            tp.crb(split, 0)

    def test_ill_conditioned_names_direction(self):
        f = np.diag([1.0, 1e-15, 1.0, 1.0])
        split = tp.FisherSplit(f_total=f, f_sigma=f, f_mu=np.zeros((4, 4)))
        with pytest.raises(tp.IllConditionedFisherError, match="phi1"):
            tp.crb(split, 1)

    def test_trace_bound_vs_beta_marks_singular_splits(self, headline_k):
        betas = np.array([0.0, 0.25, 0.5, 0.75, 1.0])
        out = tp.trace_bound_vs_beta(headline_k, 0.0, betas)
        assert np.isinf(out[0]) and np.isinf(out[-1])
        assert np.isfinite(out[1:4]).all()
        assert math.isclose(out[2], 10.0, rel_tol=1e-12)

    def test_trace_bound_minimum_above_half(self, headline_k):
        betas = np.linspace(0.05, 0.95, 181)
        out = tp.trace_bound_vs_beta(headline_k, 0.0, betas)
        best = betas[int(np.argmin(out))]
        assert best > 0.5
