"""Experiment orchestration: configs, grid runners, and artifact emission.

Five experiments reproduce the library's headline behaviors at desk scale:

- ``fim-scan``: the scalar bound N^2 * tr(F^-1) versus photon number N,
  approaching its tuning-dependent asymptotic plateau.
- ``fim-diag``: per-parameter effective information 1/(N^2 [F^-1]_ii) versus
  N, with per-parameter plateaus.
- ``mle-vs-m``: Monte Carlo estimator spread and bias against the Cramer-Rao
  bounds as the sample size M grows.
- ``mle-vs-n``: the same versus total photon number N at fixed M, optionally
  sweeping several truth tuples (robustness mode).
- ``singularity-scan``: determinant factor and smallest eigenvalue of the
  leading-order coefficient matrix over a tuning-constant grid, classifying
  the two singular loci.

Every experiment emits a CSV (with ``#`` provenance comments, round-trip
float formatting, LF line endings) and an SVG line chart, both byte-stable
for identical configuration and seed at any parallelism level.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, replace

import numpy as np

from ._version import __version__
from .exceptions import ArtifactError, ConfigError, SingularCoefficientError
from .estimation import monte_carlo, trial_seed
from .fisher import (coefficient_matrix, coefficient_total, crb,
                     fisher_matrix, singularity_check)
from .model import (NetworkParams, ResourceSplit, TuningConstants,
                    tuned_network, tuned_settings)
from .plotting import render_table

EXPERIMENTS = ("fim-scan", "fim-diag", "mle-vs-m", "mle-vs-n",
               "singularity-scan")

DEFAULT_TRUTH = NetworkParams(phi0=0.3, phi1=0.8, phi2=0.5, phi3=math.pi / 4)


def _as_float(value, ctx: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{ctx} must be a number, got {value!r}")
    return float(value)


def _as_int(value, ctx: str) -> int:
    if isinstance(value, bool):
        raise ConfigError(f"{ctx} must be an integer, got {value!r}")
    if isinstance(value, int):
        return value
    if isinstance(value, float) and value.is_integer():
        return int(value)
    raise ConfigError(f"{ctx} must be an integer, got {value!r}")


def _parse_params(obj, ctx: str) -> NetworkParams:
    if not isinstance(obj, dict):
        raise ConfigError(f"{ctx} must be an object with phi0..phi3, got {obj!r}")
    missing = [f for f in ("phi0", "phi1", "phi2", "phi3") if f not in obj]
    if missing:
        raise ConfigError(f"{ctx} is missing fields: {', '.join(missing)}")
    extra = set(obj) - {"phi0", "phi1", "phi2", "phi3"}
    if extra:
        raise ConfigError(f"{ctx} has unknown fields: {', '.join(sorted(extra))}")
    params = NetworkParams(*(_as_float(obj[f], f"{ctx}.{f}")
                             for f in ("phi0", "phi1", "phi2", "phi3")))
    if not 0.0 <= params.phi3 <= math.pi / 2.0 + 1e-12:
        raise ConfigError(f"{ctx}.phi3 must lie in [0, pi/2], got {params.phi3}")
    return params


def _parse_k(obj, ctx: str) -> TuningConstants:
    if not isinstance(obj, dict):
        raise ConfigError(f"{ctx} must be an object with k1, k2, k3, got {obj!r}")
    missing = [f for f in ("k1", "k2", "k3") if f not in obj]
    if missing:
        raise ConfigError(f"{ctx} is missing fields: {', '.join(missing)}")
    extra = set(obj) - {"k1", "k2", "k3"}
    if extra:
        raise ConfigError(f"{ctx} has unknown fields: {', '.join(sorted(extra))}")
    return TuningConstants(*(_as_float(obj[f], f"{ctx}.{f}")
                             for f in ("k1", "k2", "k3")))


def _check_grid(grid, ctx: str, positive: bool = True, integral: bool = False):
    if len(grid) == 0:
        raise ConfigError(f"{ctx} must be a nonempty list")
    for v in grid:
        if positive and v <= 0:
            raise ConfigError(f"{ctx} entries must be positive, got {v}")
        if integral and not float(v).is_integer():
            raise ConfigError(f"{ctx} entries must be integers, got {v}")
    for lo, hi in zip(grid, grid[1:]):
        if not hi > lo:
            raise ConfigError(f"{ctx} must be strictly increasing")


@dataclass(frozen=True)
class ExperimentConfig:
    """Full description of one experiment run.

    Only the fields relevant to the chosen experiment are validated beyond
    type checks; the rest keep their defaults so one dataclass covers all
    five experiments. ``truth_sweep`` switches ``mle-vs-n`` into robustness
    mode (one curve per truth tuple).
    """

    experiment: str
    truth: NetworkParams = DEFAULT_TRUTH
    k_list: tuple = (TuningConstants(0.5, 0.5, 0.0),)
    beta: float = 0.5
    n_grid: tuple = ()
    m_grid: tuple = ()
    n_total: float = 10.0
    m_samples: int = 200
    trials: int = 500
    master_seed: int = 0
    output_dir: str = "out"
    truth_sweep: tuple = ()
    k1_grid: tuple = ()
    k2_grid: tuple = ()
    k3_values: tuple = ()
    fit_max_iterations: int = 10_000

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(
                f"unknown experiment {self.experiment!r}; expected one of "
                f"{', '.join(EXPERIMENTS)}")
        if not 0.0 < self.beta < 1.0:
            raise ConfigError(f"beta must be in (0, 1), got {self.beta}")
        if self.master_seed < 0:
            raise ConfigError(f"master_seed must be >= 0, got {self.master_seed}")
        if not self.k_list:
            raise ConfigError("k must provide at least one tuning tuple")
        if self.fit_max_iterations < 1:
            raise ConfigError("fit_max_iterations must be >= 1")
        if self.experiment in ("fim-scan", "fim-diag"):
            _check_grid(self.n_grid, "n_grid")
        elif self.experiment == "mle-vs-m":
            _check_grid(self.m_grid, "m_grid", integral=True)
            if self.n_total <= 0:
                raise ConfigError(f"n_total must be > 0, got {self.n_total}")
            self._check_mle_common()
        elif self.experiment == "mle-vs-n":
            _check_grid(self.n_grid, "n_grid")
            if self.m_samples < 1:
                raise ConfigError(f"m_samples must be >= 1, got {self.m_samples}")
            self._check_mle_common()
        elif self.experiment == "singularity-scan":
            _check_grid(self.k1_grid, "k1_grid", positive=False)
            _check_grid(self.k2_grid, "k2_grid", positive=False)
            _check_grid(self.k3_values, "k3_values", positive=False)

    def _check_mle_common(self):
        if self.trials < 2:
            raise ConfigError(f"trials must be >= 2, got {self.trials}")
        if len(self.k_list) != 1:
            raise ConfigError("estimation experiments take exactly one "
                              "tuning tuple")

    @property
    def k(self) -> TuningConstants:
        return self.k_list[0]

    @staticmethod
    def from_dict(raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError(f"configuration must be an object, got {raw!r}")
        known = {"experiment", "truth", "k", "beta", "n_grid", "m_grid",
                 "n_total", "m_samples", "trials", "master_seed",
                 "output_dir", "truth_sweep", "k1_grid", "k2_grid",
                 "k3_values", "fit_max_iterations"}
        extra = set(raw) - known
        if extra:
            raise ConfigError(f"unknown configuration fields: "
                              f"{', '.join(sorted(extra))}")
        if "experiment" not in raw:
            raise ConfigError("configuration must name an experiment")
        kwargs: dict = {"experiment": raw["experiment"]}
        if not isinstance(kwargs["experiment"], str):
            raise ConfigError("experiment must be a string")
        if "truth" in raw:
            kwargs["truth"] = _parse_params(raw["truth"], "truth")
        if "k" in raw:
            entries = raw["k"] if isinstance(raw["k"], list) else [raw["k"]]
            kwargs["k_list"] = tuple(_parse_k(e, f"k[{i}]")
                                     for i, e in enumerate(entries))
        if "beta" in raw:
            kwargs["beta"] = _as_float(raw["beta"], "beta")
        for grid_key, integral in (("n_grid", False), ("m_grid", True),
                                   ("k1_grid", False), ("k2_grid", False),
                                   ("k3_values", False)):
            if grid_key in raw:
                if not isinstance(raw[grid_key], list):
                    raise ConfigError(f"{grid_key} must be a list")
                vals = [_as_float(v, f"{grid_key}[{i}]")
                        for i, v in enumerate(raw[grid_key])]
                if integral:
                    kwargs[grid_key] = tuple(_as_int(v, f"{grid_key} entry")
                                             for v in vals)
                else:
                    kwargs[grid_key] = tuple(vals)
        if "n_total" in raw:
            kwargs["n_total"] = _as_float(raw["n_total"], "n_total")
        if "m_samples" in raw:
            kwargs["m_samples"] = _as_int(raw["m_samples"], "m_samples")
        if "trials" in raw:
            kwargs["trials"] = _as_int(raw["trials"], "trials")
        if "master_seed" in raw:
            kwargs["master_seed"] = _as_int(raw["master_seed"], "master_seed")
        if "output_dir" in raw:
            if not isinstance(raw["output_dir"], str):
                raise ConfigError("output_dir must be a string")
            kwargs["output_dir"] = raw["output_dir"]
        if "truth_sweep" in raw:
            if not isinstance(raw["truth_sweep"], list):
                raise ConfigError("truth_sweep must be a list")
            kwargs["truth_sweep"] = tuple(
                _parse_params(e, f"truth_sweep[{i}]")
                for i, e in enumerate(raw["truth_sweep"]))
        if "fit_max_iterations" in raw:
            kwargs["fit_max_iterations"] = _as_int(raw["fit_max_iterations"],
                                                   "fit_max_iterations")
        return ExperimentConfig(**kwargs)

    def to_dict(self) -> dict:
        def params_dict(p: NetworkParams) -> dict:
            return {"phi0": p.phi0, "phi1": p.phi1, "phi2": p.phi2,
                    "phi3": p.phi3}

        def k_dict(k: TuningConstants) -> dict:
            return {"k1": k.k1, "k2": k.k2, "k3": k.k3}

        out = {
            "experiment": self.experiment,
            "truth": params_dict(self.truth),
            "k": (k_dict(self.k_list[0]) if len(self.k_list) == 1
                  else [k_dict(k) for k in self.k_list]),
            "beta": self.beta,
            "n_total": self.n_total,
            "m_samples": self.m_samples,
            "trials": self.trials,
            "master_seed": self.master_seed,
            "output_dir": self.output_dir,
            "fit_max_iterations": self.fit_max_iterations,
        }
        for key in ("n_grid", "m_grid", "k1_grid", "k2_grid", "k3_values"):
            value = getattr(self, key)
            if value:
                out[key] = list(value)
        if self.truth_sweep:
            out["truth_sweep"] = [params_dict(p) for p in self.truth_sweep]
        return out

    def config_hash(self) -> str:
        """Hash of the result-determining fields (output_dir excluded)."""
        payload = self.to_dict()
        payload.pop("output_dir", None)
        canonical = json.dumps(payload, sort_keys=True,
                               separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def load_config(path) -> ExperimentConfig:
    """Parse an experiment configuration from a JSON file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read configuration {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"configuration {path} is not valid JSON: {exc}") from exc
    return ExperimentConfig.from_dict(raw)


def apply_overrides(config: ExperimentConfig, seed=None, out=None,
                    trials=None) -> ExperimentConfig:
    """Apply command-line overrides; flags win over file values."""
    changes = {}
    if seed is not None:
        changes["master_seed"] = int(seed)
    if out is not None:
        changes["output_dir"] = str(out)
    if trials is not None:
        changes["trials"] = int(trials)
    return replace(config, **changes) if changes else config


@dataclass(frozen=True)
class PlotSpec:
    """How to draw a ResultTable: x column, y columns, series grouping."""

    x: str
    ys: tuple
    group_by: tuple = ()


@dataclass(frozen=True)
class ResultTable:
    """Column-named numeric results of one experiment plus provenance."""

    experiment: str
    column_names: tuple
    rows: tuple
    provenance: dict
    plot: PlotSpec
    int_columns: frozenset = frozenset()

    def column(self, name: str) -> list:
        idx = self.column_names.index(name)
        return [row[idx] for row in self.rows]


def _provenance(config: ExperimentConfig) -> dict:
    return {"config": config.to_dict(), "version": __version__,
            "config_hash": config.config_hash(),
            "master_seed": config.master_seed}


def _reject_singular(config: ExperimentConfig):
    for i, k in enumerate(config.k_list):
        report = singularity_check(k)
        if report.classification.is_singular:
            raise SingularCoefficientError(
                f"k[{i}] = ({k.k1}, {k.k2}, {k.k3}) is "
                f"{report.classification.name.lower()}-singular; the "
                "leading-order coefficient matrix is not invertible there",
                classification=report.classification,
                reason=report.classification.name.lower())


def _fim_points(config: ExperimentConfig, k: TuningConstants):
    """Exact CRB report and squeezing photon number per grid N."""
    for n in config.n_grid:
        split = ResourceSplit(n_total=float(n), beta=config.beta)
        probe = split.to_probe()
        ns = probe.n_squeeze
        params = tuned_network(config.truth, k, ns)
        settings = tuned_settings(params, k, ns)
        report = crb(fisher_matrix(params, settings, probe), 1)
        yield float(n), report


def run_fim_scan(config: ExperimentConfig, workers: int = 1) -> ResultTable:
    """Scalar bound N^2 tr(F^-1) over the photon grid, one curve per k."""
    _reject_singular(config)
    rows = []
    for k in config.k_list:
        coeff = coefficient_total(k, config.beta, config.truth.phi1)
        plateau = float(np.sum(coeff.inverse_diagonal))
        for n, report in _fim_points(config, k):
            rows.append((k.k1, k.k2, k.k3, n,
                         n ** 2 * report.trace_bound, plateau))
    columns = ("k1", "k2", "k3", "n", "n2_trace_inv_fim",
               "plateau_trace_inv_coeff")
    return ResultTable(
        experiment=config.experiment, column_names=columns, rows=tuple(rows),
        provenance=_provenance(config),
        plot=PlotSpec(x="n", ys=("n2_trace_inv_fim", "plateau_trace_inv_coeff"),
                      group_by=("k1", "k2", "k3")))


def run_fim_diag(config: ExperimentConfig, workers: int = 1) -> ResultTable:
    """Per-parameter effective information 1/(N^2 [F^-1]_ii) over the grid."""
    _reject_singular(config)
    rows = []
    for k in config.k_list:
        coeff = coefficient_total(k, config.beta, config.truth.phi1)
        plateaus = [1.0 / v for v in coeff.inverse_diagonal]
        for n, report in _fim_points(config, k):
            effective = [1.0 / (n ** 2 * b) for b in report.marginal_bounds]
            rows.append((k.k1, k.k2, k.k3, n, *effective, *plateaus))
    columns = ("k1", "k2", "k3", "n",
               "inv_n2_var_phi0", "inv_n2_var_phi1",
               "inv_n2_var_phi2", "inv_n2_var_phi3",
               "plateau_phi0", "plateau_phi1", "plateau_phi2", "plateau_phi3")
    return ResultTable(
        experiment=config.experiment, column_names=columns, rows=tuple(rows),
        provenance=_provenance(config),
        plot=PlotSpec(x="n", ys=("inv_n2_var_phi0", "inv_n2_var_phi1",
                                 "inv_n2_var_phi2", "inv_n2_var_phi3"),
                      group_by=("k1", "k2", "k3")))


_RATIO_COLUMNS = ("ratio_phi0", "ratio_phi1", "ratio_phi2", "ratio_phi3")
_BIAS_COLUMNS = ("bias_ratio_phi0", "bias_ratio_phi1", "bias_ratio_phi2",
                 "bias_ratio_phi3")


def _summary_cells(summary) -> tuple:
    ratios = tuple(p.normalized_ratio for p in summary.per_parameter)
    biases = tuple(p.bias_ratio for p in summary.per_parameter)
    return (*ratios, *biases, float(summary.excluded),
            1.0 if summary.invalid else 0.0)


def run_mle_vs_m(config: ExperimentConfig, workers: int = 1) -> ResultTable:
    """Monte Carlo CRB-saturation campaign versus the sample size M."""
    _reject_singular(config)
    split = ResourceSplit(n_total=config.n_total, beta=config.beta)
    rows = []
    for index, m in enumerate(config.m_grid):
        summary = monte_carlo(config.truth, config.k, split, int(m),
                              config.trials,
                              master_seed=trial_seed(config.master_seed, index),
                              workers=workers,
                              fit_max_iterations=config.fit_max_iterations)
        rows.append((float(m), *_summary_cells(summary)))
    columns = ("m", *_RATIO_COLUMNS, *_BIAS_COLUMNS, "excluded_trials",
               "invalid")
    return ResultTable(
        experiment=config.experiment, column_names=columns, rows=tuple(rows),
        provenance=_provenance(config),
        plot=PlotSpec(x="m", ys=_RATIO_COLUMNS),
        int_columns=frozenset({"m", "excluded_trials", "invalid"}))


def run_mle_vs_n(config: ExperimentConfig, workers: int = 1) -> ResultTable:
    """Monte Carlo CRB-saturation campaign versus total photon number N.

    With a nonempty ``truth_sweep`` the campaign repeats per truth tuple
    (robustness mode); otherwise the single configured truth is used.
    """
    _reject_singular(config)
    truths = config.truth_sweep if config.truth_sweep else (config.truth,)
    rows = []
    index = 0
    for truth in truths:
        for n in config.n_grid:
            split = ResourceSplit(n_total=float(n), beta=config.beta)
            summary = monte_carlo(truth, config.k, split, config.m_samples,
                                  config.trials,
                                  master_seed=trial_seed(config.master_seed,
                                                         index),
                                  workers=workers,
                                  fit_max_iterations=config.fit_max_iterations)
            rows.append((truth.phi0, truth.phi1, truth.phi2, truth.phi3,
                         float(n), *_summary_cells(summary)))
            index += 1
    columns = ("truth_phi0", "truth_phi1", "truth_phi2", "truth_phi3", "n",
               *_RATIO_COLUMNS, *_BIAS_COLUMNS, "excluded_trials", "invalid")
    return ResultTable(
        experiment=config.experiment, column_names=columns, rows=tuple(rows),
        provenance=_provenance(config),
        plot=PlotSpec(x="n", ys=_RATIO_COLUMNS,
                      group_by=("truth_phi0", "truth_phi1", "truth_phi2")),
        int_columns=frozenset({"excluded_trials", "invalid"}))


def run_singularity_scan(config: ExperimentConfig,
                         workers: int = 1) -> ResultTable:
    """Determinant factor and smallest coefficient eigenvalue over a k grid."""
    rows = []
    for k3 in config.k3_values:
        for k2 in config.k2_grid:
            for k1 in config.k1_grid:
                k = TuningConstants(float(k1), float(k2), float(k3))
                report = singularity_check(k)
                matrix = coefficient_matrix(k, config.beta, config.truth.phi1)
                min_eig = float(np.linalg.eigvalsh(matrix)[0])
                rows.append((float(k1), float(k2), float(k3),
                             report.det_factor, min_eig,
                             math.log10(max(abs(min_eig), 1e-18)),
                             float(int(report.classification))))
    columns = ("k1", "k2", "k3", "det_factor", "min_eigenvalue",
               "log10_abs_min_eigenvalue", "classification")
    return ResultTable(
        experiment=config.experiment, column_names=columns, rows=tuple(rows),
        provenance=_provenance(config),
        plot=PlotSpec(x="k1", ys=("log10_abs_min_eigenvalue",),
                      group_by=("k2", "k3")),
        int_columns=frozenset({"classification"}))


_RUNNERS = {
    "fim-scan": run_fim_scan,
    "fim-diag": run_fim_diag,
    "mle-vs-m": run_mle_vs_m,
    "mle-vs-n": run_mle_vs_n,
    "singularity-scan": run_singularity_scan,
}


def run_experiment(config: ExperimentConfig, workers: int = 1) -> ResultTable:
    """Dispatch to the experiment named by the configuration."""
    return _RUNNERS[config.experiment](config, workers=workers)


def _format_cell(value: float, name: str, int_columns: frozenset) -> str:
    if name in int_columns:
        return str(int(value))
    return repr(float(value))


def emit_artifacts(table: ResultTable, output_dir) -> tuple[str, str]:
    """Write ``<experiment>.csv`` and ``<experiment>.svg`` into output_dir.

    The CSV carries ``#`` provenance comments (config hash, seed, version),
    a mandatory header row, and floats formatted to round-trip exactly.
    Partial files are removed on failure.
    """
    try:
        os.makedirs(output_dir, exist_ok=True)
    except OSError as exc:
        raise ArtifactError(f"cannot create output directory "
                            f"{output_dir}: {exc}") from exc
    base = os.path.join(str(output_dir), table.experiment)
    csv_path = base + ".csv"
    svg_path = base + ".svg"

    lines = [
        f"# experiment={table.experiment}",
        f"# version={table.provenance.get('version', __version__)}",
        f"# config_hash={table.provenance.get('config_hash', '')}",
        f"# master_seed={table.provenance.get('master_seed', '')}",
    ]
    if table.experiment == "singularity-scan":
        lines.append("# classification: 0=nonsingular 1=antisymmetric(k1=-k2) "
                     "2=quadric(k3^2=k1*k2) 3=both")
    lines.append(",".join(table.column_names))
    for row in table.rows:
        lines.append(",".join(_format_cell(v, n, table.int_columns)
                              for v, n in zip(row, table.column_names)))
    try:
        with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    except Exception as exc:
        if os.path.exists(csv_path):
            os.unlink(csv_path)
        raise ArtifactError(f"failed writing {csv_path}: {exc}") from exc

    try:
        render_table(table, svg_path)
    except Exception as exc:
        if os.path.exists(svg_path):
            os.unlink(svg_path)
        raise ArtifactError(f"failed writing {svg_path}: {exc}") from exc
    return csv_path, svg_path


def read_csv(path) -> tuple[tuple, list]:
    """Parse a CSV written by emit_artifacts back into (columns, rows)."""
    with open(path, "r", encoding="utf-8") as fh:
        content = [line.rstrip("\n") for line in fh
                   if line.strip() and not line.startswith("#")]
    columns = tuple(content[0].split(","))
    rows = [tuple(float(cell) for cell in line.split(","))
            for line in content[1:]]
    return columns, rows
