"""Acceptance gate: one test per numbered release criterion.

Each test is marked ``@pytest.mark.criterion``; the terminal summary prints
one PASS/FAIL line per criterion. Tolerances and sample counts are part of
the contract and must not be loosened to force a pass.
"""

import math
import time

import numpy as np
import pytest
from scipy.spatial import cKDTree

import twoport as tp

HEADLINE_DIAG = np.array([1.0, 4.0, 4.0, 1.0])


def random_draw(rng):
    params = tp.NetworkParams(*rng.uniform(-math.pi, math.pi, 3),
                              rng.uniform(0.0, math.pi / 2))
    settings = tp.HomodyneSettings(*rng.uniform(-math.pi, math.pi, 2))
    probe = tp.ProbeConfig(alpha=rng.uniform(0.0, 2.0), r=rng.uniform(0.0, 1.5))
    return params, settings, probe


def pipeline_stats(params, settings, probe):
    state = tp.propagate(tp.probe_state(probe),
                         tp.symplectic_of(tp.build_unitary(params)))
    return tp.homodyne_stats(state, settings)


def tuned_case(truth, k, n_total, beta=0.5):
    probe = tp.ResourceSplit(n_total=n_total, beta=beta).to_probe()
    params = tp.tuned_network(truth, k, probe.n_squeeze)
    settings = tp.tuned_settings(params, k, probe.n_squeeze)
    return params, settings, probe


@pytest.mark.criterion(1, "closed-form statistics match the symplectic pipeline")
def test_closed_form_equals_pipeline():
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        params, settings, probe = random_draw(rng)
        a = pipeline_stats(params, settings, probe)
        b = tp.closed_form_stats(params, settings, probe)
        worst = max(worst,
                    float(np.abs(a.mean - b.mean).max()),
                    float(np.abs(a.covariance - b.covariance).max()))
    elapsed = time.perf_counter() - start
    assert worst < 1e-12, f"max-norm mismatch {worst:.3e}"
    assert elapsed < 1.0, f"took {elapsed:.2f}s"


@pytest.mark.criterion(2, "output covariance carries no phi1 dependence")
def test_covariance_independent_of_phi1():
    rng = np.random.default_rng(102)
    h = 1e-5
    start = time.perf_counter()
    worst_fd = 0.0
    for _ in range(1000):
        params, settings, probe = random_draw(rng)
        plus = pipeline_stats(params.shifted([0.0, h, 0.0, 0.0]),
                              settings, probe).covariance
        minus = pipeline_stats(params.shifted([0.0, -h, 0.0, 0.0]),
                               settings, probe).covariance
        worst_fd = max(worst_fd, float(np.abs(plus - minus).max()) / (2 * h))
        base = tp.closed_form_stats(params, settings, probe).covariance
        moved = tp.closed_form_stats(params.shifted([0.0, 0.7, 0.0, 0.0]),
                                     settings, probe).covariance
        assert np.abs(moved - base).max() == 0.0
    elapsed = time.perf_counter() - start
    assert worst_fd < 1e-9, f"finite-difference dCov/dphi1 = {worst_fd:.3e}"
    assert elapsed < 1.0, f"took {elapsed:.2f}s"


@pytest.mark.criterion(3, "headline tuning gives variance diagonal (1, 4, 4, 1)")
def test_headline_inverse_diagonal(headline_truth, headline_k):
    start = time.perf_counter()
    coeff = tp.coefficient_total(headline_k, beta=0.5, phi1=headline_truth.phi1)
    assert np.abs(coeff.inverse_diagonal - HEADLINE_DIAG).max() < 1e-9

    n = 1e4
    params, settings, probe = tuned_case(headline_truth, headline_k, n)
    fim = tp.fisher_matrix(params, settings, probe).f_total
    scaled = n ** 2 * np.diag(np.linalg.inv(fim))
    rel = np.abs(scaled / HEADLINE_DIAG - 1.0).max()
    elapsed = time.perf_counter() - start
    assert rel < 0.02, f"N^2 diag(F^-1) off by {rel:.3%}"
    assert elapsed < 1.0, f"took {elapsed:.2f}s"


@pytest.mark.criterion(4, "scaled bound trace plateaus at 10 with 1/N residual")
def test_trace_plateau(headline_truth, headline_k):
    config = tp.ExperimentConfig(
        experiment="fim-scan", truth=headline_truth,
        k_list=(headline_k,), beta=0.5, n_grid=(5e3, 1e4))
    table = tp.run_fim_scan(config)
    trace = dict(zip(table.column("n"), table.column("n2_trace_inv_fim")))
    assert table.column("plateau_trace_inv_coeff")[0] == pytest.approx(10.0)
    assert abs(trace[1e4] - 10.0) / 10.0 < 0.02
    residual_ratio = abs(trace[5e3] - 10.0) / abs(trace[1e4] - 10.0)
    assert 1.6 < residual_ratio < 2.4, f"residual ratio {residual_ratio:.3f}"


@pytest.mark.criterion(5, "noise information grows as N^2; no displacement, no phi1")
def test_scaling_exponents(headline_truth, headline_k):
    ns = np.logspace(2, 4, 9)
    leading = {0: [], 2: [], 3: []}
    for n in ns:
        _, settings, probe = tuned_case(headline_truth, headline_k, float(n))
        params = tp.tuned_network(headline_truth, headline_k, probe.n_squeeze)
        f_sigma = tp.fisher_matrix(params, settings, probe).f_sigma
        for i in leading:
            leading[i].append(f_sigma[i, i])
    for i, values in leading.items():
        slope = np.polyfit(np.log(ns), np.log(values), 1)[0]
        assert abs(slope - 2.0) < 0.05, f"entry ({i},{i}) slope {slope:.3f}"

    rng = np.random.default_rng(105)
    for _ in range(20):
        params, settings, _ = random_draw(rng)
        probe = tp.ProbeConfig(alpha=0.0, r=rng.uniform(0.2, 1.5))
        f = tp.fisher_matrix(params, settings, probe).f_total
        assert np.abs(f[1]).max() == 0.0
        assert np.abs(f[:, 1]).max() == 0.0


def _quadric_cloud():
    grid = np.linspace(-2.5, 2.5, 201)
    a, b = np.meshgrid(grid, grid)
    mask = a * b >= 0.0
    a, b = a[mask], b[mask]
    s = np.sqrt(a * b)
    upper = np.column_stack([a, b, s])
    lower = np.column_stack([a, b, -s])
    return np.vstack([upper, lower])


@pytest.mark.criterion(6, "coefficient matrix is singular exactly on the two tuning loci")
def test_singularity_loci(headline_truth):
    beta, phi1 = 0.5, headline_truth.phi1

    def min_eig(k1, k2, k3):
        m = tp.coefficient_matrix(tp.TuningConstants(k1, k2, k3), beta, phi1)
        return float(np.linalg.eigvalsh(m)[0])

    # exact collapse on sampled points of both loci
    locus = [(k1, -k1, k3)
             for k1 in np.linspace(-2.0, 2.0, 9)
             for k3 in np.linspace(-2.0, 2.0, 5)]
    magnitudes = (0.25, 0.5, 1.0, 1.5, 2.0)
    for sign in (1.0, -1.0):
        for a in magnitudes:
            for b in magnitudes:
                root = math.sqrt(a * b)
                if root <= 2.0:
                    locus.append((sign * a, sign * b, root))
                    locus.append((sign * a, sign * b, -root))
    worst_locus = max(abs(min_eig(*point)) for point in locus)
    assert worst_locus < 1e-10, f"on-locus eigenvalue {worst_locus:.3e}"

    # closed-form determinant factor against the numeric 3x3 determinant
    idx = np.array([0, 2, 3])
    rng = np.random.default_rng(106)
    checked = 0
    while checked < 1000:
        k1, k2, k3 = rng.uniform(-2.0, 2.0, 3)
        if abs(k1 + k2) / math.sqrt(2.0) < 0.1 or abs(k1 * k2 - k3 * k3) < 0.1:
            continue
        checked += 1
        k = tp.TuningConstants(k1, k2, k3)
        sig = tp.coefficient_sigma(k)
        numeric = np.linalg.det((sig.lam ** 2 * sig.matrix)[np.ix_(idx, idx)])
        closed = tp.singularity_check(k).det_factor
        assert abs(numeric - closed) <= 1e-9 * max(1.0, abs(closed))

    # eigenvalue floor at Euclidean distance >= 0.1 from both loci
    tree = cKDTree(_quadric_cloud())
    axis = np.linspace(-2.0, 2.0, 17)
    points = np.array([(k1, k2, k3)
                       for k1 in axis for k2 in axis for k3 in axis
                       if abs(k1 + k2) / math.sqrt(2.0) >= 0.1])
    quad_distance = tree.query(points)[0]
    # 0.12 cutoff absorbs the surface-cloud resolution so every kept point
    # is truly at distance >= 0.1 from the quadric locus
    kept = points[quad_distance >= 0.12]
    assert len(kept) > 3000
    eigs = np.array([min_eig(*point) for point in kept])
    bad = kept[eigs <= 1e-3]
    bad_eigs = eigs[eigs <= 1e-3]
    order = np.argsort(bad_eigs)
    witnesses = "; ".join(
        f"k=({p[0]:+.2f},{p[1]:+.2f},{p[2]:+.2f}) eig={e:.2e}"
        for p, e in zip(bad[order[:3]], bad_eigs[order[:3]]))
    assert len(bad) == 0, (
        f"floor violated: {len(bad)} of {len(kept)} lattice points at "
        f"distance >= 0.1 from both loci have smallest eigenvalue <= 1e-3 "
        f"(worst: {witnesses}). The matrix is singular only on the loci, "
        f"but its smallest eigenvalue decays below the floor at large |k|; "
        f"the exact Fisher matrix confirms these values to O(1/N), so the "
        f"floor constant is unattainable over the full [-2, 2]^3 domain.")


@pytest.mark.criterion(7, "analytic statistics derivatives match finite differences")
def test_derivative_oracle():
    rng = np.random.default_rng(107)
    h = 1e-6
    start = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        params, settings, probe = random_draw(rng)
        d = tp.stats_derivatives(params, settings, probe)
        base = params.as_array()
        for i in range(4):
            step = np.zeros(4)
            step[i] = h
            plus = tp.closed_form_stats(tp.NetworkParams.from_array(base + step),
                                        settings, probe)
            minus = tp.closed_form_stats(tp.NetworkParams.from_array(base - step),
                                         settings, probe)
            fd_mean = (plus.mean - minus.mean) / (2 * h)
            fd_cov = (plus.covariance - minus.covariance) / (2 * h)
            worst = max(
                worst,
                float((np.abs(d.dmean[i] - fd_mean) / (1.0 + np.abs(fd_mean))).max()),
                float((np.abs(d.dcov[i] - fd_cov) / (1.0 + np.abs(fd_cov))).max()))
    elapsed = time.perf_counter() - start
    assert worst < 1e-6, f"worst relative derivative error {worst:.3e}"
    assert elapsed < 5.0, f"took {elapsed:.2f}s"


@pytest.mark.criterion(8, "estimator spread saturates the bound as repetitions grow")
def test_crb_saturation_vs_m(headline_truth, headline_k, headline_split):
    deviation = {}
    for m, seed in ((10, 8101), (100, 8102), (1000, 8103)):
        summary = tp.monte_carlo(headline_truth, headline_k, headline_split,
                                 m, trials=500, master_seed=seed)
        assert not summary.invalid, f"M={m}: {summary.excluded} trials excluded"
        ratios = [p.normalized_ratio for p in summary.per_parameter]
        deviation[m] = max(abs(r - 1.0) for r in ratios)
        if m == 100:
            for p in summary.per_parameter:
                assert 0.9 <= p.normalized_ratio <= 1.3, (
                    f"{p.name}: ratio {p.normalized_ratio:.3f}")
                assert abs(p.bias_ratio - 1.0) <= 0.05, (
                    f"{p.name}: bias ratio {p.bias_ratio:.4f}")
    assert deviation[1000] < deviation[10], (
        f"ratio deviation did not shrink: {deviation}")


@pytest.mark.criterion(9, "bound saturation holds across photon budgets")
def test_crb_saturation_vs_n(headline_truth, headline_k):
    for n, seed in ((4.0, 9104), (10.0, 9110), (20.0, 9120)):
        split = tp.ResourceSplit(n_total=n, beta=0.5)
        summary = tp.monte_carlo(headline_truth, headline_k, split,
                                 200, trials=500, master_seed=seed)
        assert not summary.invalid, f"N={n}: {summary.excluded} trials excluded"
        for p in summary.per_parameter:
            assert 0.9 <= p.normalized_ratio <= 1.3, (
                f"N={n} {p.name}: ratio {p.normalized_ratio:.3f}")


@pytest.mark.criterion(10, "bound saturation is robust across truth values")
def test_crb_saturation_truth_sweep(headline_k, headline_split):
    truths = (tp.NetworkParams(0.3, 0.8, 0.5, math.pi / 4),
              tp.NetworkParams(1.1, 0.4, 1.6, math.pi / 4),
              tp.NetworkParams(0.7, 1.9, 2.4, math.pi / 4))
    for i, truth in enumerate(truths):
        summary = tp.monte_carlo(truth, headline_k, headline_split,
                                 200, trials=500, master_seed=10001 + i)
        assert not summary.invalid, (
            f"truth {i}: {summary.excluded} trials excluded")
        for p in summary.per_parameter:
            assert 0.9 <= p.normalized_ratio <= 1.3, (
                f"truth {i} {p.name}: ratio {p.normalized_ratio:.3f}")
            assert abs(p.bias_ratio - 1.0) <= 0.05, (
                f"truth {i} {p.name}: bias ratio {p.bias_ratio:.4f}")


@pytest.mark.criterion(11, "identical config and seed give byte-identical artifacts")
def test_determinism_across_parallelism(tmp_path, headline_truth, headline_k):
    mc_config = tp.ExperimentConfig(
        experiment="mle-vs-m", truth=headline_truth, k_list=(headline_k,),
        beta=0.5, n_total=10.0, m_grid=(20, 40), trials=6, master_seed=77)
    payloads = {}
    for tag, workers in (("serial", 1), ("parallel", 2), ("repeat", 2)):
        table = tp.run_experiment(mc_config, workers=workers)
        csv_path, svg_path = tp.emit_artifacts(table, tmp_path / tag)
        payloads[tag] = (open(csv_path, "rb").read(),
                         open(svg_path, "rb").read())
    assert payloads["serial"] == payloads["parallel"]
    assert payloads["parallel"] == payloads["repeat"]

    fim_config = tp.ExperimentConfig(
        experiment="fim-scan", truth=headline_truth, k_list=(headline_k,),
        beta=0.5, n_grid=(10.0, 100.0), master_seed=5)
    first, _ = tp.emit_artifacts(tp.run_experiment(fim_config, workers=1),
                                 tmp_path / "fim_a")
    second, _ = tp.emit_artifacts(tp.run_experiment(fim_config, workers=3),
                                  tmp_path / "fim_b")
    assert open(first, "rb").read() == open(second, "rb").read()
