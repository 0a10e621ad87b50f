"""Empirical check that estimated optimal designs approach the population ones.

The check is a trend, not a rate: as the pilot sample grows, the sorted
max-coordinate distance between estimated and population optimal designs
should shrink in median.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .data import Design
from .model import FitConfig, fit_model
from .search import exhaustive_search
from .simulation import ScenarioSpec, generate_dataset, population_model


def design_distance(a: Design, b: Design) -> float:
    """Max over order statistics of absolute coordinate differences."""
    if a.p != b.p:
        raise ValueError(f"designs differ in size: {a.p} vs {b.p}")
    return float(np.max(np.abs(np.sort(a.times) - np.sort(b.times))))


@dataclass(frozen=True)
class ConvergenceReport:
    n_values: tuple[int, ...]
    p: int
    target: str
    population_design: tuple[float, ...]
    distances: dict[int, tuple[float, ...]]
    medians: dict[int, float]
    diagnostics: dict = field(default_factory=dict)

    def to_csv_text(self) -> str:
        lines = ["n,replicate,distance"]
        for n in self.n_values:
            for rep, dist in enumerate(self.distances[n]):
                lines.append(f"{n},{rep},{repr(dist)}")
        return "\n".join(lines) + "\n"

    def to_json_dict(self) -> dict:
        return {
            "n_values": list(self.n_values),
            "p": self.p,
            "target": self.target,
            "population_design": list(self.population_design),
            "medians": {str(n): self.medians[n] for n in self.n_values},
            "diagnostics": self.diagnostics,
        }

    def write(self, json_path: str, csv_path: str | None = None) -> None:
        with open(json_path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        if csv_path:
            with open(csv_path, "w", encoding="utf-8") as fh:
                fh.write(self.to_csv_text())


def _hessian_sign_diagnostic(model, design_idx: np.ndarray, target: str) -> list[int]:
    """Signs of discrete second differences of the criterion at the optimum.

    Logged only; local concavity of the criterion surface is an assumption
    the trend check does not try to verify.
    """
    from .criteria import DesignEvaluator

    evaluator = DesignEvaluator(model, target)
    base_raw, _ = evaluator.raw_batch(design_idx[None, :])
    signs = []
    g = model.grid.size
    for j in range(design_idx.size):
        lo = design_idx.copy()
        hi = design_idx.copy()
        lo[j] -= 1
        hi[j] += 1
        if lo[j] < 0 or hi[j] >= g or len(set(lo.tolist())) < lo.size or len(set(hi.tolist())) < hi.size:
            signs.append(0)  # boundary or collision: second difference undefined
            continue
        r_lo, _ = evaluator.raw_batch(np.sort(lo)[None, :])
        r_hi, _ = evaluator.raw_batch(np.sort(hi)[None, :])
        second = float(r_hi[0] + r_lo[0] - 2.0 * base_raw[0])
        signs.append(int(np.sign(second)))
    return signs


def convergence_study(
    spec: ScenarioSpec,
    n_values,
    replicates: int,
    p: int = 2,
    target: str = "trajectory",
    threads: int | None = None,
) -> ConvergenceReport:
    """Exhaustive population optimum versus refitted estimated optima.

    Per (n, replicate): generate a pilot of size n from a split seed, fit the
    model (auto bandwidths, ridge = estimated noise variance), search, and
    record the design distance to the population optimum.
    """
    n_values = tuple(int(n) for n in n_values)
    if replicates < 1:
        raise ValueError(f"replicates must be >= 1, got {replicates}")
    pop = population_model(spec)
    pop_result = exhaustive_search(pop, p, target, threads=threads)
    pop_idx = pop.design_indices(pop_result.design)

    distances: dict[int, tuple[float, ...]] = {}
    seeds = np.random.SeedSequence(spec.seed).spawn(len(n_values) * replicates)
    k = 0
    for n in n_values:
        vals = []
        for _ in range(replicates):
            rng = np.random.default_rng(seeds[k])
            k += 1
            sample, responses, _ = generate_dataset(spec, n=n, rng=rng)
            model = fit_model(sample, responses, FitConfig(grid_size=spec.grid_size))
            est = exhaustive_search(model, p, target, threads=threads)
            vals.append(design_distance(est.design, pop_result.design))
        distances[n] = tuple(vals)
    medians = {n: float(np.median(distances[n])) for n in n_values}
    return ConvergenceReport(
        n_values=n_values,
        p=p,
        target=target,
        population_design=tuple(pop_result.design.times.tolist()),
        distances=distances,
        medians=medians,
        diagnostics={
            "hessian_diag_signs": _hessian_sign_diagnostic(pop, pop_idx, target),
            "population_raw": pop_result.criterion.raw,
        },
    )
