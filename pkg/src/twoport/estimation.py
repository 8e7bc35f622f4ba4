"""Sampling, likelihood evaluation, maximum-likelihood fitting, Monte Carlo.

Synthetic homodyne data are drawn from the exact bivariate-normal outcome
model; the joint log-likelihood and its analytic score feed a two-stage
maximum-likelihood solver (derivative-free simplex search plus a scoring
polish); seeded Monte Carlo campaigns measure estimator spread and bias
against the Cramer-Rao bounds.

Determinism contract: every trial derives its own seed from
(master_seed, trial_index) through a splittable seed sequence, trials are
pure functions of their inputs, and aggregation runs in trial-index order, so
results are byte-identical at any parallelism level.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize, root

from .exceptions import DegenerateCovarianceError
from .fisher import crb, fisher_matrix, _derivative_scalars
from .model import (LOG_2PI, HomodyneSettings, NetworkParams, ProbeConfig,
                    ResourceSplit, TuningConstants, _inverse_2x2, _readonly,
                    _stats_scalars, closed_form_stats, tuned_settings)

SCORE_TOLERANCE = 1e-6        # converged when max|score| < SCORE_TOLERANCE * m
SIMPLEX_TOLERANCE = 1e-9      # simplex diameter and value-spread stop
DEFAULT_MAX_ITERATIONS = 10_000
INIT_PERTURBATION = 0.05      # cap on the per-coordinate init offset
INIT_BASIN_SCALE = 0.1        # offset shrinks as this over n_squeeze
EXCLUSION_LIMIT = 0.05        # campaign invalid above this non-convergence rate
LOCAL_STEP_CAP = 0.02         # max-norm cap on one scoring step, keeps it local
SIMPLEX_SEED_SIZE = 1e-3      # initial simplex edge around the scoring root

# Branch periods used when mapping an estimate next to a reference value:
# the three phases wrap at 2*pi, the mixing angle at pi/2.
BRANCH_PERIODS = (2.0 * math.pi, 2.0 * math.pi, 2.0 * math.pi, math.pi / 2.0)


@dataclass(frozen=True)
class SampleSet:
    """An i.i.d. batch of homodyne outcome pairs plus its provenance.

    Sufficient statistics (component sums and raw second moments) are
    precomputed once so likelihood and score evaluations cost O(1) in the
    sample size.
    """

    outcomes: np.ndarray
    seed: int
    generation_config: tuple | None = None

    def __post_init__(self):
        out = _readonly(self.outcomes)
        if out.ndim != 2 or out.shape[1] != 2 or out.shape[0] < 1:
            raise ValueError(f"outcomes must have shape (m, 2) with m >= 1, "
                             f"got {out.shape}")
        object.__setattr__(self, "outcomes", out)
        x, y = out[:, 0], out[:, 1]
        object.__setattr__(self, "_sums", (
            float(x.sum()), float(y.sum()),
            float(x @ x), float(x @ y), float(y @ y)))

    @property
    def size(self) -> int:
        return self.outcomes.shape[0]


def sample_outcomes(stats, m: int, seed: int,
                    generation_config: tuple | None = None) -> SampleSet:
    """Draw m i.i.d. outcome pairs from the bivariate normal model.

    The lower triangular factor of the covariance is applied to standard
    normal pairs from a freshly seeded generator, so identical (stats, m,
    seed) reproduce identical bytes.
    """
    if m < 1:
        raise ValueError(f"sample size must be >= 1, got {m}")
    m1, m2, s11, s12, s22 = stats.entries()
    _inverse_2x2(s11, s12, s22)  # raises when degenerate
    l11 = math.sqrt(s11)
    l21 = s12 / l11
    l22 = math.sqrt(s22 - l21 * l21)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))
    z = rng.standard_normal((m, 2))
    outcomes = np.empty((m, 2))
    outcomes[:, 0] = m1 + l11 * z[:, 0]
    outcomes[:, 1] = m2 + l21 * z[:, 0] + l22 * z[:, 1]
    return SampleSet(outcomes=outcomes, seed=int(seed),
                     generation_config=generation_config)


def _centered_moments(sums, n: float, m1: float, m2: float):
    """Residual sums and scatter about a candidate mean from raw sums."""
    sx, sy, sxx, sxy, syy = sums
    rx = sx - n * m1
    ry = sy - n * m2
    cxx = sxx - 2.0 * m1 * sx + n * m1 * m1
    cxy = sxy - m1 * sy - m2 * sx + n * m1 * m2
    cyy = syy - 2.0 * m2 * sy + n * m2 * m2
    return rx, ry, cxx, cxy, cyy


def log_likelihood(candidate: NetworkParams, data: SampleSet,
                   settings: HomodyneSettings, config: ProbeConfig) -> float:
    """Joint log-likelihood of the sample under candidate parameters."""
    m1, m2, s11, s12, s22 = _stats_scalars(
        candidate.phi0, candidate.phi1, candidate.phi2, candidate.phi3,
        settings.theta1, settings.theta2, config.alpha, config.r)
    i11, i12, i22, det = _inverse_2x2(s11, s12, s22)
    n = float(data.size)
    _, _, cxx, cxy, cyy = _centered_moments(data._sums, n, m1, m2)
    quad = i11 * cxx + 2.0 * i12 * cxy + i22 * cyy
    return -n * LOG_2PI - 0.5 * n * math.log(det) - 0.5 * quad


def score(candidate: NetworkParams, data: SampleSet,
          settings: HomodyneSettings, config: ProbeConfig) -> np.ndarray:
    """Gradient of the joint log-likelihood in the four parameters.

    Standard multivariate-Gaussian score assembled from the analytic mean and
    covariance derivatives and the sample's sufficient statistics.
    """
    m1, m2, s11, s12, s22 = _stats_scalars(
        candidate.phi0, candidate.phi1, candidate.phi2, candidate.phi3,
        settings.theta1, settings.theta2, config.alpha, config.r)
    i11, i12, i22, _ = _inverse_2x2(s11, s12, s22)
    n = float(data.size)
    rx, ry, cxx, cxy, cyy = _centered_moments(data._sums, n, m1, m2)
    px = i11 * rx + i12 * ry
    py = i12 * rx + i22 * ry
    # g = S^-1 C S^-1 with C the scatter about the candidate mean
    a11 = i11 * cxx + i12 * cxy
    a12 = i11 * cxy + i12 * cyy
    a21 = i12 * cxx + i22 * cxy
    a22 = i12 * cxy + i22 * cyy
    g11 = a11 * i11 + a12 * i12
    g12 = a11 * i12 + a12 * i22
    g22 = a21 * i12 + a22 * i22
    dmean, dcov = _derivative_scalars(
        candidate.phi0, candidate.phi1, candidate.phi2, candidate.phi3,
        settings.theta1, settings.theta2, config.alpha, config.r)
    out = np.empty(4)
    for i in range(4):
        du, dv = dmean[i]
        d11, d12, d22 = dcov[i]
        out[i] = (du * px + dv * py
                  + 0.5 * ((g11 - n * i11) * d11
                           + 2.0 * (g12 - n * i12) * d12
                           + (g22 - n * i22) * d22))
    return out


@dataclass(frozen=True)
class EstimationResult:
    """Outcome of one maximum-likelihood fit."""

    estimate: NetworkParams
    log_likelihood_at_optimum: float
    converged: bool
    iterations: int
    initial_point: NetworkParams


def _score_ascent(current: NetworkParams, ll_current: float, data: SampleSet,
                  settings: HomodyneSettings, config: ProbeConfig, indices,
                  n: float, target: float, max_rounds: int,
                  step_cap: float) -> tuple[NetworkParams, float, int]:
    """Fisher-scoring ascent: Newton steps on the analytic score with the
    analytic Fisher matrix as metric, a per-round step cap, and halving line
    search that never accepts a likelihood decrease."""
    rounds = 0
    for _ in range(max_rounds):
        s = score(current, data, settings, config)[indices]
        if np.abs(s).max() < target:
            break
        fim = fisher_matrix(current, settings, config).f_total * n
        fim = fim[np.ix_(indices, indices)]
        try:
            step = np.linalg.solve(fim, s)
        except np.linalg.LinAlgError:
            break
        length = float(np.abs(step).max())
        if length > step_cap:
            step = step * (step_cap / length)
        scale = 1.0
        accepted = False
        for _ in range(25):
            trial = current.as_array()
            trial[indices] = trial[indices] + scale * step
            candidate = NetworkParams.from_array(trial)
            try:
                ll_new = log_likelihood(candidate, data, settings, config)
            except DegenerateCovarianceError:
                scale /= 2.0
                continue
            if ll_new >= ll_current - 1e-12:
                current, ll_current, accepted = candidate, ll_new, True
                break
            scale /= 2.0
        rounds += 1
        if not accepted:
            break
    return current, ll_current, rounds


def mle_fit(data: SampleSet, settings: HomodyneSettings, config: ProbeConfig,
            init: NetworkParams, free=None,
            max_iterations: int = DEFAULT_MAX_ITERATIONS) -> EstimationResult:
    """Maximize the joint log-likelihood around a given starting point.

    The target is the local maximizer whose basin contains ``init``: the
    statistics map is not globally one-to-one (distinct parameter tuples can
    reproduce identical output statistics at fixed measurement angles), so
    the fit must not wander to a remote equivalent optimum. Three stages:

    1. Fisher-scoring ascent from ``init`` with a capped step, which settles
       onto the score root nearest the start;
    2. a derivative-free simplex search seeded there with a small initial
       simplex (stops when the simplex diameter and value spread fall below
       1e-9, capped at ``max_iterations``);
    3. a final scoring polish driving the score max-norm well below the
       convergence threshold.

    The fit is converged when the simplex stage succeeded and the score
    max-norm at the final point is below 1e-6 times the sample size.

    ``free`` optionally masks which of (phi0, phi1, phi2, phi3) are searched;
    masked-out parameters stay at their init values, so a single-phase fit
    reduces to the score equation for that phase alone.
    """
    free_mask = (True, True, True, True) if free is None else tuple(bool(f) for f in free)
    if len(free_mask) != 4 or not any(free_mask):
        raise ValueError("free must select at least one of the four parameters")
    indices = [i for i, f in enumerate(free_mask) if f]
    template = init.as_array()
    n = float(data.size)

    def unpack(x: np.ndarray) -> NetworkParams:
        full = template.copy()
        full[indices] = x
        return NetworkParams.from_array(full)

    def negative_ll(x: np.ndarray) -> float:
        try:
            return -log_likelihood(unpack(x), data, settings, config)
        except DegenerateCovarianceError:
            return math.inf

    polish_target = 0.01 * SCORE_TOLERANCE * n
    try:
        ll_init = log_likelihood(init, data, settings, config)
    except DegenerateCovarianceError:
        ll_init = -math.inf
    current, ll_current, rounds = _score_ascent(
        init, ll_init, data, settings, config, indices, n,
        target=polish_target, max_rounds=200, step_cap=LOCAL_STEP_CAP)

    start = current.as_array()[indices]
    simplex = np.tile(start, (len(indices) + 1, 1))
    for j in range(len(indices)):
        simplex[j + 1, j] += SIMPLEX_SEED_SIZE
    result = minimize(negative_ll, start, method="Nelder-Mead",
                      options={"xatol": SIMPLEX_TOLERANCE,
                               "fatol": SIMPLEX_TOLERANCE,
                               "maxiter": max_iterations,
                               "maxfev": max_iterations,
                               "initial_simplex": simplex})
    if -float(result.fun) >= ll_current:
        current = unpack(np.asarray(result.x, dtype=float))
        ll_current = -float(result.fun)
    iterations = rounds + int(result.nit)

    current, ll_current, rounds = _score_ascent(
        current, ll_current, data, settings, config, indices, n,
        target=polish_target, max_rounds=60, step_cap=LOCAL_STEP_CAP)
    iterations += rounds

    final_score = score(current, data, settings, config)[indices]
    if np.abs(final_score).max() >= polish_target:
        # Scoring steps use the expected information, which differs from the
        # observed curvature at small sample sizes and can stall just above
        # tolerance; finish with a local root solve of the score equation.
        def score_at(x: np.ndarray) -> np.ndarray:
            try:
                return score(unpack(x), data, settings, config)[indices]
            except DegenerateCovarianceError:
                return np.full(len(indices), 1e6)

        sol = root(score_at, current.as_array()[indices], method="hybr")
        refined = unpack(np.asarray(sol.x, dtype=float))
        moved = np.abs(refined.as_array() - current.as_array()).max()
        refined_score = score_at(np.asarray(sol.x, dtype=float))
        if (moved < LOCAL_STEP_CAP
                and np.abs(refined_score).max() < np.abs(final_score).max()):
            try:
                ll_ref = log_likelihood(refined, data, settings, config)
            except DegenerateCovarianceError:
                ll_ref = -math.inf
            if ll_ref >= ll_current - 1e-9 * max(1.0, abs(ll_current)):
                current, ll_current = refined, ll_ref
                final_score = refined_score
                iterations += int(sol.nfev)
    converged = bool(result.success) and bool(
        np.abs(final_score).max() < SCORE_TOLERANCE * n)
    return EstimationResult(estimate=current,
                            log_likelihood_at_optimum=ll_current,
                            converged=converged,
                            iterations=iterations,
                            initial_point=init)


def nearest_branch(value: float, reference: float, period: float) -> float:
    """Representative of `value` (mod period) closest to `reference`."""
    return value - period * round((value - reference) / period)


def align_to_reference(params: NetworkParams,
                       reference: NetworkParams) -> NetworkParams:
    """Map each coordinate to the branch nearest the reference value."""
    vals = [nearest_branch(v, ref, p) for v, ref, p in
            zip(params.as_array(), reference.as_array(), BRANCH_PERIODS)]
    return NetworkParams.from_array(vals)


def trial_seed(master_seed: int, index: int) -> int:
    """Derive the 64-bit seed of one trial from (master_seed, trial_index)."""
    ss = np.random.SeedSequence((int(master_seed), int(index)))
    return int(ss.generate_state(1, np.uint64)[0])


def _run_trial(job) -> tuple[bool, tuple, int]:
    """One Monte Carlo trial: sample a dataset at truth, fit it, report.

    Module-level and tuple-driven so process pools can pickle it.
    """
    (truth_coords, theta1, theta2, alpha, r, m, seed, init_coords, cap) = job
    truth = NetworkParams.from_array(truth_coords)
    settings = HomodyneSettings(theta1=theta1, theta2=theta2)
    config = ProbeConfig(alpha=alpha, r=r)
    stats = closed_form_stats(truth, settings, config)
    data = sample_outcomes(stats, m, seed)
    fit = mle_fit(data, settings, config,
                  init=NetworkParams.from_array(init_coords),
                  max_iterations=cap)
    est = fit.estimate.as_array()
    return bool(fit.converged), (float(est[0]), float(est[1]),
                                 float(est[2]), float(est[3])), fit.iterations


@dataclass(frozen=True)
class ParameterSummary:
    """Monte Carlo spread and bias of one parameter against its bound."""

    name: str
    truth: float
    std_dev: float
    crb_std: float
    normalized_ratio: float
    mean_estimate: float
    bias_ratio: float


@dataclass(frozen=True)
class MonteCarloSummary:
    """Aggregate of a seeded Monte Carlo estimation campaign.

    `invalid` is set when more than 5% of trials failed to converge (their
    results are excluded from the aggregates) or fewer than two trials
    converged.
    """

    trials: int
    converged_trials: int
    excluded: int
    invalid: bool
    per_parameter: tuple
    settings: dict
    master_seed: int


def monte_carlo(truth: NetworkParams, k: TuningConstants, split: ResourceSplit,
                m: int, trials: int, master_seed: int, workers: int = 1,
                trial_seeds=None,
                fit_max_iterations: int = DEFAULT_MAX_ITERATIONS) -> MonteCarloSummary:
    """Run a seeded Monte Carlo campaign of maximum-likelihood fits.

    Each trial samples m outcome pairs at the truth (LO phases tuned from the
    truth and the squeezing photon number), fits all four parameters starting
    from a fixed perturbed initialization, and the converged estimates are
    compared against the exact finite-resource Cramer-Rao bounds. Estimates
    are branch-aligned to the truth before aggregation. `trial_seeds`
    overrides the derived per-trial seeds (mainly for determinism tests).

    The per-coordinate initialization offset is min(0.05, 0.1/n_squeeze):
    the model admits exactly degenerate twin optima whose spacing shrinks
    like 1/n_squeeze, so the start must shrink proportionally to stay inside
    the basin of the local optimum consistent with the truth.
    """
    if trials < 2:
        raise ValueError(f"trials must be >= 2, got {trials}")
    probe = split.to_probe()
    settings = tuned_settings(truth, k, probe.n_squeeze)
    fim = fisher_matrix(truth, settings, probe)
    bounds = crb(fim, m)
    crb_std = np.sqrt(bounds.marginal_bounds)
    offset = min(INIT_PERTURBATION, INIT_BASIN_SCALE / probe.n_squeeze)
    init = truth.shifted([offset] * 4)

    if trial_seeds is None:
        seeds = [trial_seed(master_seed, i) for i in range(trials)]
    else:
        seeds = [int(s) for s in trial_seeds]
        if len(seeds) != trials:
            raise ValueError(f"trial_seeds must have length {trials}, "
                             f"got {len(seeds)}")

    truth_coords = tuple(float(v) for v in truth.as_array())
    init_coords = tuple(float(v) for v in init.as_array())
    jobs = [(truth_coords, settings.theta1, settings.theta2,
             probe.alpha, probe.r, int(m), seeds[i], init_coords,
             int(fit_max_iterations)) for i in range(trials)]

    if workers > 1:
        chunk = max(1, trials // (workers * 4))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_trial, jobs, chunksize=chunk))
    else:
        results = [_run_trial(job) for job in jobs]

    estimates = []
    for converged, est, _ in results:
        if converged:
            aligned = align_to_reference(NetworkParams.from_array(est), truth)
            estimates.append(aligned.as_array())
    converged_trials = len(estimates)
    excluded = trials - converged_trials
    invalid = excluded > EXCLUSION_LIMIT * trials or converged_trials < 2

    per_parameter = []
    table = np.array(estimates) if estimates else np.empty((0, 4))
    for i, name in enumerate(("phi0", "phi1", "phi2", "phi3")):
        truth_i = truth_coords[i]
        if converged_trials >= 2:
            std = float(np.std(table[:, i], ddof=1))
            mean = float(np.mean(table[:, i]))
        else:
            std = math.nan
            mean = math.nan
        ratio = std / float(crb_std[i])
        bias = mean / truth_i if truth_i != 0.0 else math.nan
        per_parameter.append(ParameterSummary(
            name=name, truth=truth_i, std_dev=std, crb_std=float(crb_std[i]),
            normalized_ratio=ratio, mean_estimate=mean, bias_ratio=bias))

    snapshot = {
        "n_total": split.n_total, "beta": split.beta, "m": int(m),
        "trials": int(trials), "k1": k.k1, "k2": k.k2, "k3": k.k3,
        "theta1": settings.theta1, "theta2": settings.theta2,
        "alpha": probe.alpha, "r": probe.r,
        "truth": truth_coords, "init": init_coords,
        "fit_max_iterations": int(fit_max_iterations),
    }
    return MonteCarloSummary(trials=int(trials),
                             converged_trials=converged_trials,
                             excluded=excluded, invalid=invalid,
                             per_parameter=tuple(per_parameter),
                             settings=snapshot, master_seed=int(master_seed))
