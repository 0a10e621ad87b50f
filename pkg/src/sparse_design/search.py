"""Design optimization over the grid: exhaustive, greedy, random, earliest.

All searches share a deterministic tie-break: among designs with exactly
equal criterion values the lexicographically smallest sorted design wins.
Candidate subsets are enumerated in lexicographic order and evaluated in
fixed-size chunks, so results are identical for any worker count.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._parallel import chunked_map
from .criteria import CriterionResult, DesignEvaluator, FeasibilityPolicy
from .data import Design, Grid
from .errors import SearchError
from .model import ModelFit

# Refuse exhaustive enumerations above this many subsets unless overridden.
EXHAUSTIVE_CAP = 5_000_000
_CHUNK = 32768


@dataclass(frozen=True)
class SearchResult:
    design: Design
    criterion: CriterionResult
    method: str
    evaluated: int
    trace: tuple[dict, ...] | None = None
    seed: int | None = None


@dataclass(frozen=True)
class EarliestDesignResult:
    """Earliest-threshold design: first time admitting (1-alpha) of the full R^2."""

    t_alpha: float
    alpha: float
    design: Design
    criterion: CriterionResult
    r2_curve: tuple[tuple[float, float], ...]
    method: str
    evaluated: int


def _combination_chunks(indices: np.ndarray, p: int, chunk: int = _CHUNK):
    """Yield (chunk_size, p) arrays of index combinations in lexicographic order."""
    it = itertools.combinations(indices.tolist(), p)
    while True:
        block = list(itertools.islice(it, chunk))
        if not block:
            return
        yield np.asarray(block, dtype=int)


def _best_over_combinations(
    evaluator: DesignEvaluator,
    indices: np.ndarray,
    p: int,
    threads: int | None,
) -> tuple[np.ndarray, float, int]:
    """Scan all p-subsets of ``indices``; return (best subset, raw, count)."""
    best_raw = -np.inf
    best_idx: np.ndarray | None = None
    evaluated = 0
    chunks = list(_combination_chunks(indices, p))
    results = chunked_map(lambda block: evaluator.raw_batch(block)[0], chunks, threads)
    for block, raw in zip(chunks, results):
        evaluated += block.shape[0]
        pos = int(np.argmax(raw))
        # argmax picks the first maximum; blocks are in lexicographic order,
        # so strict improvement keeps the smallest sorted design on ties.
        if raw[pos] > best_raw:
            best_raw = float(raw[pos])
            best_idx = block[pos]
    if best_idx is None or not np.isfinite(best_raw):
        raise SearchError("no feasible design: every candidate fails the feasibility gate")
    return best_idx, best_raw, evaluated


def exhaustive_search(
    model: ModelFit,
    p: int,
    target: str,
    policy: FeasibilityPolicy | None = None,
    threads: int | None = None,
    allow_large: bool = False,
) -> SearchResult:
    """Evaluate every ascending p-subset of grid points and keep the best."""
    g = model.grid.size
    if not 1 <= p <= g:
        raise ValueError(f"p must be in [1, {g}] (grid size), got {p}")
    total = math.comb(g, p)
    if total > EXHAUSTIVE_CAP and not allow_large:
        raise ValueError(
            f"exhaustive search over C({g},{p}) = {total} subsets exceeds the cap "
            f"{EXHAUSTIVE_CAP}; pass allow_large=True to override"
        )
    evaluator = DesignEvaluator(model, target, policy)
    best_idx, _, evaluated = _best_over_combinations(
        evaluator, np.arange(g), p, threads
    )
    design = Design(model.grid.points[np.sort(best_idx)], target)
    return SearchResult(design, evaluator.evaluate(design), "exhaustive", evaluated)


def greedy_search(
    model: ModelFit,
    p: int,
    target: str,
    policy: FeasibilityPolicy | None = None,
    threads: int | None = None,
) -> SearchResult:
    """Exhaustive best pair, then one point at a time holding the rest fixed.

    For p = 1 this falls back to the (O(G)) exhaustive scan.  The trace
    records the point(s) added at each step together with the criterion value.
    """
    g = model.grid.size
    if not 1 <= p <= g:
        raise ValueError(f"p must be in [1, {g}] (grid size), got {p}")
    if p == 1:
        res = exhaustive_search(model, 1, target, policy, threads)
        return SearchResult(res.design, res.criterion, "greedy", res.evaluated, trace=None)

    evaluator = DesignEvaluator(model, target, policy)
    pts = model.grid.points
    current, raw, evaluated = _best_over_combinations(evaluator, np.arange(g), 2, threads)
    current = np.sort(current)
    trace: list[dict] = [
        {"step": 1, "added": pts[current].tolist(), "design": pts[current].tolist(), "raw": raw}
    ]
    while current.size < p:
        rest = np.setdiff1d(np.arange(g), current)
        if rest.size == 0:
            break
        candidates = np.sort(
            np.concatenate(
                [np.broadcast_to(current, (rest.size, current.size)), rest[:, None]], axis=1
            ),
            axis=1,
        )
        raw_all, _ = evaluator.raw_batch(candidates)
        evaluated += rest.size
        pos = int(np.argmax(raw_all))  # rest ascending -> smallest extension wins ties
        if not np.isfinite(raw_all[pos]):
            raise SearchError(
                f"greedy search: no feasible extension at step {current.size + 1}"
            )
        raw = float(raw_all[pos])
        added = rest[pos]
        current = candidates[pos]
        trace.append(
            {
                "step": len(trace) + 1,
                "added": [float(pts[added])],
                "design": pts[current].tolist(),
                "raw": raw,
            }
        )
    design = Design(pts[current], target)
    return SearchResult(design, evaluator.evaluate(design), "greedy", evaluated, trace=tuple(trace))


def random_designs(
    grid: Grid,
    p: int,
    count: int,
    seed: int,
    target: str = "trajectory",
) -> list[Design]:
    """Uniform p-subsets of grid points, deterministic under the seed."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    if p > grid.size:
        raise ValueError(f"p={p} exceeds the grid size {grid.size}")
    rng = np.random.default_rng(seed)
    designs = []
    for _ in range(count):
        idx = np.sort(rng.choice(grid.size, size=p, replace=False))
        designs.append(Design(grid.points[idx], target))
    return designs


def earliest_design(
    model: ModelFit,
    p: int,
    target: str,
    alpha: float,
    policy: FeasibilityPolicy | None = None,
    method: str = "greedy",
    threads: int | None = None,
) -> EarliestDesignResult:
    """Smallest t whose restricted-domain optimum reaches (1-alpha) R^2(T).

    Scans grid points left to right; at each t the best design over grid
    points <= t is found (greedy by default, exhaustive behind the flag) and
    its R^2 compared against the threshold.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    if method not in ("greedy", "exhaustive"):
        raise ValueError(f"method must be 'greedy' or 'exhaustive', got {method!r}")
    g = model.grid.size
    if not 1 <= p <= g:
        raise ValueError(f"p must be in [1, {g}] (grid size), got {p}")
    evaluator = DesignEvaluator(model, target, policy)
    pts = model.grid.points

    def best_upto(limit: int):
        allowed = np.arange(limit + 1)
        if method == "greedy" and p >= 2:
            return _greedy_indices(evaluator, allowed, p, threads)
        return _best_over_combinations(evaluator, allowed, p, threads)

    full_idx, full_raw, full_count = best_upto(g - 1)
    r2_full = full_raw / evaluator.normalizer if evaluator.normalizer > 0 else np.inf
    threshold = (1.0 - alpha) * r2_full

    evaluated = full_count
    curve: list[tuple[float, float]] = []
    for limit in range(p - 1, g):
        try:
            idx, raw, count = best_upto(limit)
        except SearchError:
            continue
        evaluated += count
        r2 = raw / evaluator.normalizer if evaluator.normalizer > 0 else np.inf
        curve.append((float(pts[limit]), float(r2)))
        if r2 >= threshold - 1e-12:
            design = Design(pts[np.sort(idx)], target)
            return EarliestDesignResult(
                float(pts[limit]),
                alpha,
                design,
                evaluator.evaluate(design),
                tuple(curve),
                method,
                evaluated,
            )
    # Mathematically unreachable (the full-domain scan meets its own threshold);
    # numerics could violate monotonicity, in which case fall back to t = T.
    warnings.warn("earliest_design threshold not reached during the scan; returning t = T")
    design = Design(pts[np.sort(full_idx)], target)
    return EarliestDesignResult(
        float(pts[-1]),
        alpha,
        design,
        evaluator.evaluate(design),
        tuple(curve),
        method,
        evaluated,
    )


def _greedy_indices(
    evaluator: DesignEvaluator,
    allowed: np.ndarray,
    p: int,
    threads: int | None,
) -> tuple[np.ndarray, float, int]:
    """Greedy over a restricted candidate index set; returns (idx, raw, count)."""
    if p == 1 or allowed.size < 2:
        return _best_over_combinations(evaluator, allowed, min(p, allowed.size), threads)
    current, raw, evaluated = _best_over_combinations(evaluator, allowed, 2, threads)
    current = np.sort(current)
    while current.size < p:
        rest = np.setdiff1d(allowed, current)
        if rest.size == 0:
            break
        candidates = np.sort(
            np.concatenate(
                [np.broadcast_to(current, (rest.size, current.size)), rest[:, None]], axis=1
            ),
            axis=1,
        )
        raw_all, _ = evaluator.raw_batch(candidates)
        evaluated += rest.size
        pos = int(np.argmax(raw_all))
        if not np.isfinite(raw_all[pos]):
            raise SearchError("no feasible greedy extension")
        raw = float(raw_all[pos])
        current = candidates[pos]
    return current, raw, evaluated


def search_result_json(result: SearchResult | EarliestDesignResult, seed: int | None = None) -> dict:
    """Design output document; r2 is clamped to 1 for reporting."""
    crit = result.criterion
    doc = {
        "target": result.design.target,
        "p": result.design.p,
        "method": result.method,
        "design_points": result.design.times.tolist(),
        "criterion_raw": crit.raw,
        "r2": min(crit.r2, 1.0),
        "normalizer": crit.normalizer,
        "evaluated": result.evaluated,
    }
    if seed is not None:
        doc["seed"] = seed
    if isinstance(result, EarliestDesignResult):
        doc["alpha"] = result.alpha
        doc["t_alpha"] = result.t_alpha
        doc["r2_curve"] = [[t, r] for t, r in result.r2_curve]
    elif result.trace is not None:
        doc["trace"] = list(result.trace)
    return doc
