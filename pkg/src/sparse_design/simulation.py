"""Synthetic benchmark scenarios and the optimal-vs-random design benchmark.

The generator draws random curves from a ten-component cosine eigenbasis on
[0, 10] with a known quadratic-plus-trig mean, observes them either densely
(every grid point) or sparsely (4 to 8 uniformly located grid points per
subject), adds Gaussian measurement noise, and couples a scalar response to
the first four component scores.  Everything downstream of a seed is
deterministic.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .data import Design, Domain, Grid, ResponseVector, SparseSample, SubjectRecord, make_grid
from .errors import SearchError
from .model import EigenSystem, FitConfig, ModelFit, fit_model
from .predict import predict_responses, recover_trajectories
from .search import exhaustive_search, greedy_search, random_designs
from .validation import (
    ape_metric,
    are_metric,
    select_ridge_cv,
    select_ridge_modified_cv,
    values_at_times,
)

DEFAULT_EIGENVALUES: tuple[float, ...] = (
    30.0,
    20.0,
    12.0,
    8.0,
    30.0 / 25.0,
    30.0 / 36.0,
    30.0 / 49.0,
    30.0 / 64.0,
    30.0 / 81.0,
    30.0 / 100.0,
)
DEFAULT_RESPONSE_COEFFS: tuple[float, ...] = (1.0, -2.0, 1.0, -2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)


def default_mean(t: np.ndarray) -> np.ndarray:
    return 0.5 * t**2 + 2.0 * np.sin(t) + 3.0 * np.cos(2.0 * t)


def cosine_eigenfunctions(n_components: int, grid_points: np.ndarray, width: float) -> np.ndarray:
    """Rows are sqrt(2/T) cos(k pi t / T) for k = 1..n; trapezoid-orthonormal."""
    k = np.arange(1, n_components + 1)[:, None]
    return np.sqrt(2.0 / width) * np.cos(k * np.pi * grid_points[None, :] / width)


@dataclass(frozen=True)
class ScenarioSpec:
    """Data-generating configuration for one benchmark scenario."""

    kind: str  # "dense" | "sparse"
    n_train: int = 100
    n_test: int = 1000
    domain: Domain = Domain(0.0, 10.0)
    grid_size: int = 51
    eigenvalues: tuple[float, ...] = DEFAULT_EIGENVALUES
    response_coeffs: tuple[float, ...] = DEFAULT_RESPONSE_COEFFS
    noise_var: float = 0.25
    response_noise_var: float = 0.25
    m_min: int = 4
    m_max: int = 8
    seed: int = 0
    mean: Callable[[np.ndarray], np.ndarray] = default_mean

    def __post_init__(self) -> None:
        if self.kind not in ("dense", "sparse"):
            raise ValueError(f"kind must be 'dense' or 'sparse', got {self.kind!r}")
        ev = np.asarray(self.eigenvalues)
        if np.any(ev <= 0) or np.any(np.diff(ev) > 0):
            raise ValueError("eigenvalues must be positive and non-increasing")
        if len(self.response_coeffs) != len(self.eigenvalues):
            raise ValueError("response_coeffs must match eigenvalues in length")
        if not 1 <= self.m_min <= self.m_max <= self.grid_size:
            raise ValueError("need 1 <= m_min <= m_max <= grid_size")

    def grid(self) -> Grid:
        return make_grid(self.domain, self.grid_size)


@dataclass(frozen=True)
class SyntheticTruth:
    """Latent state behind a generated dataset, for oracle checks."""

    grid: Grid
    ids: tuple[str, ...]
    scores: np.ndarray         # (n, K)
    trajectories: np.ndarray   # (n, G), mean + scores @ psi exactly
    true_response: np.ndarray  # (n,), conditional response mean


def generate_dataset(
    spec: ScenarioSpec,
    n: int | None = None,
    rng: np.random.Generator | None = None,
) -> tuple[SparseSample, ResponseVector, SyntheticTruth]:
    """Draw one dataset; bit-identical for a fixed spec/seed.

    Scores are centered Gaussians with the spec eigenvalues as variances.
    Dense datasets observe every grid point; sparse ones observe a uniform
    random number of uniformly located grid points per subject, without
    replacement.  Responses are the coefficient combination of the scores
    plus Gaussian noise.
    """
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    n_subj = n if n is not None else spec.n_train
    grid = spec.grid()
    psi = cosine_eigenfunctions(len(spec.eigenvalues), grid.points, spec.domain.width)
    mu = spec.mean(grid.points)
    sd = np.sqrt(np.asarray(spec.eigenvalues))

    scores = rng.normal(size=(n_subj, len(spec.eigenvalues))) * sd[None, :]
    traj = mu[None, :] + scores @ psi
    ids = tuple(f"s{i + 1:05d}" for i in range(n_subj))

    noise_sd = math.sqrt(spec.noise_var)
    records = []
    if spec.kind == "dense":
        noise = rng.normal(scale=noise_sd, size=(n_subj, grid.size))
        for i in range(n_subj):
            records.append((ids[i], grid.points, traj[i] + noise[i]))
    else:
        m = rng.integers(spec.m_min, spec.m_max + 1, size=n_subj)
        for i in range(n_subj):
            idx = np.sort(rng.choice(grid.size, size=int(m[i]), replace=False))
            noise = rng.normal(scale=noise_sd, size=int(m[i]))
            records.append((ids[i], grid.points[idx], traj[i, idx] + noise))

    b = np.asarray(spec.response_coeffs)
    signal = scores @ b
    y = signal + rng.normal(scale=math.sqrt(spec.response_noise_var), size=n_subj)
    sample = SparseSample.from_records(records, domain=spec.domain)
    responses = ResponseVector({ids[i]: float(y[i]) for i in range(n_subj)})
    truth = SyntheticTruth(grid, ids, scores, traj, signal)
    return sample, responses, truth


def population_model(
    spec: ScenarioSpec,
    grid_size: int | None = None,
    ridge: float | None = None,
) -> ModelFit:
    """Exact model implied by the scenario, for oracles and population search.

    The ridge defaults to the true measurement-noise variance, so the ridged
    covariance is the true covariance of the noisy readings.
    """
    grid = make_grid(spec.domain, grid_size or spec.grid_size)
    psi = cosine_eigenfunctions(len(spec.eigenvalues), grid.points, spec.domain.width)
    rho = np.asarray(spec.eigenvalues, dtype=float)
    cov = (psi.T * rho) @ psi
    cov = (cov + cov.T) / 2.0
    b = np.asarray(spec.response_coeffs, dtype=float)
    sigma_k = b * rho
    cross = sigma_k @ psi
    var_y = float(b @ (rho * b) + spec.response_noise_var)
    ridge_val = spec.noise_var if ridge is None else float(ridge)
    w = grid.trapezoid_weights()
    return ModelFit(
        grid=grid,
        mean=spec.mean(grid.points),
        cov_psd=cov,
        cov_ridged=cov + ridge_val * np.eye(grid.size),
        sigma2=spec.noise_var,
        sigma2_new=ridge_val,
        eigen=EigenSystem(grid, rho.copy(), psi.copy()),
        var_x_integral=float(w @ np.diag(cov)),
        cross_cov=cross,
        mu_y=0.0,
        var_y=var_y,
        kernel_name="population",
    )


# ---------------------------------------------------------------------------
# benchmark harness


@dataclass
class BenchmarkReport:
    """Per run x p x method error metrics plus Table-style aggregates."""

    scenario: str
    runs: int
    p_list: tuple[int, ...]
    methods: tuple[str, ...]
    rows: list[dict] = field(default_factory=list)

    CSV_COLUMNS = ("run", "scenario", "p", "method", "are", "are_rel", "ape", "ape_rel", "latent_rmse")

    def aggregate(self, p: int, method: str, metric: str, how: str = "mean") -> float:
        vals = [
            row[metric]
            for row in self.rows
            if row["p"] == p and row["method"] == method and row.get(metric) is not None
        ]
        if not vals:
            return math.nan
        return float(np.mean(vals) if how == "mean" else np.median(vals))

    def to_csv_text(self) -> str:
        lines = [",".join(self.CSV_COLUMNS)]
        for row in self.rows:
            cells = []
            for col in self.CSV_COLUMNS:
                val = row.get(col)
                if val is None:
                    cells.append("")
                elif isinstance(val, float):
                    cells.append(repr(val))
                else:
                    cells.append(str(val))
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"

    def summary_dict(self) -> dict:
        table: dict = {}
        for p in self.p_list:
            per_p: dict = {}
            for method in self.methods_reported():
                per_p[method] = {
                    f"{metric}_{how}": self.aggregate(p, method, metric, how)
                    for metric in ("are", "are_rel", "ape", "ape_rel", "latent_rmse")
                    for how in ("mean", "median")
                }
            table[str(p)] = per_p
        return {
            "scenario": self.scenario,
            "runs": self.runs,
            "p_list": list(self.p_list),
            "table": table,
        }

    def methods_reported(self) -> list[str]:
        seen: list[str] = []
        for row in self.rows:
            if row["method"] not in seen:
                seen.append(row["method"])
        return seen

    def write(self, out_dir: str) -> None:
        import os

        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "benchmark.csv"), "w", encoding="utf-8") as fh:
            fh.write(self.to_csv_text())
        with open(os.path.join(out_dir, "summary.json"), "w", encoding="utf-8") as fh:
            json.dump(self.summary_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


_METHOD_ROWS = {"exhaustive": "optimal_exhaustive", "greedy": "optimal_greedy", "random": "random_median"}


def _design_u_matrix(
    spec: ScenarioSpec,
    test_sample: SparseSample,
    truth: SyntheticTruth,
    noise_matrix: np.ndarray,
    idx: np.ndarray,
    grid: Grid,
) -> np.ndarray:
    """Observed values of every test subject at the design grid indices."""
    if spec.kind == "dense":
        atol = 1e-9 * max(1.0, grid.domain.width)
        times = grid.points[idx]
        return np.stack([values_at_times(s, times, atol) for s in test_sample.subjects])
    # Sparse test subjects were not measured at the design times; take fresh
    # noisy readings of the latent curves there.
    return truth.trajectories[:, idx] + noise_matrix[:, idx]


def _trajectory_metrics(
    model: ModelFit,
    design: Design,
    u: np.ndarray,
    test_sample: SparseSample,
    truth: SyntheticTruth,
) -> tuple[float, float, float]:
    curves = recover_trajectories(model, design, u)
    recovered = {s.id: curves[i] for i, s in enumerate(test_sample.subjects)}
    are, are_rel = are_metric(test_sample, recovered, model.grid)
    w = model.grid.trapezoid_weights()
    latent = float(np.sqrt(np.mean(((truth.trajectories - curves) ** 2) @ w)))
    return are, are_rel, latent


def _response_metrics(
    model: ModelFit,
    design: Design,
    u: np.ndarray,
    test_sample: SparseSample,
    test_responses: ResponseVector,
) -> tuple[float, float]:
    preds = predict_responses(model, design, u)
    predicted = {s.id: float(preds[i]) for i, s in enumerate(test_sample.subjects)}
    return ape_metric(test_responses, predicted)


def run_benchmark(
    spec: ScenarioSpec,
    runs: int,
    p_list: Sequence[int],
    methods: Sequence[str] = ("exhaustive", "random"),
    grid_size: int | None = None,
    targets: Sequence[str] = ("trajectory", "response"),
    random_count: int = 100,
    ridge_p: int | None = None,
    threads: int | None = None,
) -> BenchmarkReport:
    """Repeat the scenario: fit on train, select designs, score on test.

    Per run a fresh train/test pair is generated from split seeds, the model
    is fitted with auto bandwidths, the ridge cross-validated per target (CV
    for dense pilots, modified CV for sparse), designs selected per p and
    method, and ARE/APE computed on the held-out test subjects.  The random
    baseline reports the design of median performance among ``random_count``
    uniform designs.
    """
    if runs < 1:
        raise ValueError(f"runs must be >= 1, got {runs}")
    p_list = tuple(int(p) for p in p_list)
    methods = tuple(methods)
    unknown = set(methods) - set(_METHOD_ROWS)
    if unknown:
        raise ValueError(f"unknown methods {sorted(unknown)}; choices: {sorted(_METHOD_ROWS)}")
    targets = tuple(targets)
    if spec.grid_size != (grid_size or spec.grid_size):
        spec = replace(spec, grid_size=grid_size)
    grid = spec.grid()
    rp = ridge_p if ridge_p is not None else sorted(p_list)[len(p_list) // 2]

    report = BenchmarkReport(spec.kind, runs, p_list, methods)
    run_seeds = np.random.SeedSequence(spec.seed).spawn(runs)
    for run in range(runs):
        ss_train, ss_test, ss_ridge, ss_random, ss_regen = run_seeds[run].spawn(5)
        train_sample, train_resp, _ = generate_dataset(
            spec, n=spec.n_train, rng=np.random.default_rng(ss_train)
        )
        test_sample, test_resp, test_truth = generate_dataset(
            spec, n=spec.n_test, rng=np.random.default_rng(ss_test)
        )
        noise_matrix = np.random.default_rng(ss_regen).normal(
            scale=math.sqrt(spec.noise_var), size=(spec.n_test, grid.size)
        )

        base = fit_model(train_sample, train_resp, FitConfig(grid_size=spec.grid_size))
        models: dict[str, ModelFit] = {}
        ridge_seed = int(ss_ridge.generate_state(1)[0])
        for target in targets:
            if spec.kind == "dense":
                sel = select_ridge_cv(
                    train_sample, train_resp, target=target, p=rp, base_model=base, threads=threads
                )
            else:
                sel = select_ridge_modified_cv(
                    train_sample,
                    train_resp,
                    target=target,
                    p=rp,
                    seed=ridge_seed,
                    base_model=base,
                )
            models[target] = base.with_ridge(sel.sigma2_new)

        rand_rng_seed = int(ss_random.generate_state(1)[0])
        for pi, p in enumerate(p_list):
            row_by_method = {
                _METHOD_ROWS[m]: {
                    "run": run,
                    "scenario": spec.kind,
                    "p": p,
                    "method": _METHOD_ROWS[m],
                    "are": None,
                    "are_rel": None,
                    "ape": None,
                    "ape_rel": None,
                    "latent_rmse": None,
                }
                for m in methods
            }
            rand = (
                random_designs(grid, p, random_count, seed=rand_rng_seed + pi)
                if "random" in methods
                else []
            )
            for target in targets:
                model = models[target]
                for m in methods:
                    if m == "random":
                        continue
                    searcher = exhaustive_search if m == "exhaustive" else greedy_search
                    result = searcher(model, p, target, threads=threads)
                    idx = model.design_indices(result.design)
                    u = _design_u_matrix(spec, test_sample, test_truth, noise_matrix, idx, grid)
                    row = row_by_method[_METHOD_ROWS[m]]
                    if target == "trajectory":
                        row["are"], row["are_rel"], row["latent_rmse"] = _trajectory_metrics(
                            model, result.design, u, test_sample, test_truth
                        )
                    else:
                        row["ape"], row["ape_rel"] = _response_metrics(
                            model, result.design, u, test_sample, test_resp
                        )
                if "random" in methods:
                    row = row_by_method["random_median"]
                    per_design = []
                    for design in rand:
                        idx = model.design_indices(design)
                        u = _design_u_matrix(spec, test_sample, test_truth, noise_matrix, idx, grid)
                        if target == "trajectory":
                            per_design.append(
                                _trajectory_metrics(model, design, u, test_sample, test_truth)
                            )
                        else:
                            per_design.append(
                                _response_metrics(model, design, u, test_sample, test_resp)
                            )
                    order = np.argsort([d[0] for d in per_design], kind="stable")
                    median_design = per_design[order[(len(per_design) - 1) // 2]]
                    if target == "trajectory":
                        row["are"], row["are_rel"], row["latent_rmse"] = median_design
                    else:
                        row["ape"], row["ape_rel"] = median_design
            for m in methods:
                report.rows.append(row_by_method[_METHOD_ROWS[m]])
    return report
