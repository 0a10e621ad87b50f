"""Recovery/prediction error metrics and ridge-parameter cross-validation.

Two ridge selectors are provided: plain leave-one-out style CV for densely
observed pilot samples, and modified CV for sparse pilots, which repeatedly
splits the sample, picks the best design among the held-out subjects' own
time configurations, and scores the subjects whose observation times match
that design within a tolerance.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .criteria import DesignEvaluator
from .data import Design, Grid, ResponseVector, SparseSample
from .errors import RidgeSelectionError, SearchError
from .model import FitConfig, ModelFit, fit_model
from .predict import predict_responses, recover_trajectories
from .search import greedy_search

# Default ridge candidate ladder, as multiples of the estimated noise variance.
OMEGA_MULTIPLES = (0.1, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0)
# Cap on per-subject design enumerations inside modified CV.
MAX_SUBSETS_PER_SUBJECT = 200


@dataclass(frozen=True)
class MetricReport:
    are: float | None
    are_rel: float | None
    ape: float | None
    ape_rel: float | None
    n_used: int


@dataclass(frozen=True)
class RidgeSelection:
    """Chosen ridge plus the full candidate score curve for auditing."""

    sigma2_new: float
    method: str
    candidates: tuple[dict, ...]
    partition_scores: tuple[tuple[float, ...], ...] | None = None
    L: int | None = None
    split: float | None = None
    tau: float | None = None
    seed: int | None = None

    def to_json_dict(self) -> dict:
        doc: dict = {
            "method": self.method,
            "selected": self.sigma2_new,
            "candidates": [dict(c) for c in self.candidates],
        }
        if self.L is not None:
            doc["L"] = self.L
        if self.split is not None:
            doc["split"] = self.split
        if self.tau is not None:
            doc["tau"] = self.tau
        if self.seed is not None:
            doc["seed"] = self.seed
        return doc


# ---------------------------------------------------------------------------
# metrics


def _interp_on_grid(grid: Grid, curves: np.ndarray, rows: np.ndarray, times: np.ndarray) -> np.ndarray:
    """Linear interpolation of per-row grid curves at per-entry times."""
    pts = grid.points
    j = np.searchsorted(pts, times, side="right") - 1
    j = np.clip(j, 0, pts.size - 2)
    t0 = pts[j]
    t1 = pts[j + 1]
    frac = (times - t0) / (t1 - t0)
    return curves[rows, j] * (1.0 - frac) + curves[rows, j + 1] * frac


def are_metric(
    sample: SparseSample,
    recovered: Mapping[str, np.ndarray],
    grid: Grid,
) -> tuple[float, float]:
    """Average root mean squared recovery error and its relative form.

    Per subject: RMSE over that subject's own observations, with the
    recovered grid curve linearly interpolated at the observation times.
    The relative form divides the summed RMSEs by the summed observation
    root mean squares.
    """
    if sample.n == 0:
        raise ValueError("empty sample")
    curves = np.stack([np.asarray(recovered[s.id], dtype=float) for s in sample.subjects])
    times = np.concatenate([s.times for s in sample.subjects])
    values = np.concatenate([s.values for s in sample.subjects])
    rows = np.concatenate([np.full(s.m, i) for i, s in enumerate(sample.subjects)])
    fitted = _interp_on_grid(grid, curves, rows, times)
    sq = (values - fitted) ** 2
    counts = np.array([s.m for s in sample.subjects])
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    rmse = np.sqrt(np.add.reduceat(sq, starts) / counts)
    obs_norm = np.sqrt(np.add.reduceat(values**2, starts) / counts)
    are = float(np.mean(rmse))
    denom = float(np.sum(obs_norm))
    are_rel = float(np.sum(rmse) / denom) if denom > 0 else np.inf
    return are, are_rel


def ape_metric(
    responses: ResponseVector,
    predicted: Mapping[str, float],
) -> tuple[float, float]:
    """Average prediction error sqrt(mean (Y - Yhat)^2) and its relative form."""
    if len(responses) == 0:
        raise ValueError("empty response pairing")
    y = np.array([responses[sid] for sid in responses.values])
    yhat = np.array([predicted[sid] for sid in responses.values])
    se = (y - yhat) ** 2
    ape = float(np.sqrt(np.mean(se)))
    denom = float(np.sqrt(np.sum(y**2)))
    ape_rel = float(np.sqrt(np.sum(se)) / denom) if denom > 0 else np.inf
    return ape, ape_rel


# ---------------------------------------------------------------------------
# shared helpers


def is_dense_on(sample: SparseSample, grid: Grid) -> bool:
    """True when every subject is observed on (a superset of) the grid."""
    atol = 1e-9 * max(1.0, grid.domain.width)
    for s in sample.subjects:
        pos = np.searchsorted(s.times, grid.points)
        pos = np.clip(pos, 0, s.times.size - 1)
        left = np.clip(pos - 1, 0, s.times.size - 1)
        near = np.minimum(
            np.abs(s.times[pos] - grid.points), np.abs(s.times[left] - grid.points)
        )
        if np.any(near > atol):
            return False
    return True


def values_at_times(subject, times: np.ndarray, atol: float) -> np.ndarray:
    """Subject's observed values at the given times (exact matches required)."""
    out = np.empty(times.size)
    for i, t in enumerate(times):
        j = int(np.argmin(np.abs(subject.times - t)))
        if abs(subject.times[j] - t) > atol:
            raise ValueError(
                f"subject {subject.id!r} has no observation at time {t} (closest "
                f"is {subject.times[j]})"
            )
        out[i] = subject.values[j]
    return out


def default_omega(sigma2: float, scale_fallback: float = 1e-4) -> list[float]:
    """Candidate ladder: standard multiples of the noise variance estimate."""
    base = sigma2 if sigma2 > 0 else scale_fallback
    return [m * base for m in OMEGA_MULTIPLES]


# ---------------------------------------------------------------------------
# ridge selection, dense pilots


def select_ridge_cv(
    sample: SparseSample,
    responses: ResponseVector | None = None,
    target: str = "trajectory",
    omega: Sequence[float] | None = None,
    p: int = 3,
    base_model: ModelFit | None = None,
    config: FitConfig | None = None,
    threads: int | None = None,
) -> RidgeSelection:
    """Ridge selection for densely observed pilots.

    For each candidate the ridged model is re-assembled (smoothing reused),
    the design re-selected by greedy search, and every subject predicted at
    the design from its own readings; the candidate minimizing ARE (or APE
    for the response target) wins.  The design is re-selected per candidate
    but not per held-out subject.
    """
    base = base_model if base_model is not None else fit_model(sample, responses, config)
    if not is_dense_on(sample, base.grid):
        raise ValueError("select_ridge_cv requires every subject observed on the grid")
    if target == "response" and responses is None:
        raise ValueError("response-target CV requires responses")
    cand = sorted(omega) if omega is not None else default_omega(base.sigma2)
    if len(cand) == 0:
        raise ValueError("omega must contain at least one candidate")
    atol = 1e-9 * max(1.0, base.grid.domain.width)

    scores: list[float] = []
    for value in cand:
        m = base.with_ridge(value)
        try:
            sr = greedy_search(m, p, target, threads=threads)
        except SearchError:
            scores.append(np.inf)
            continue
        design = sr.design
        u = np.stack([values_at_times(s, design.times, atol) for s in sample.subjects])
        if target == "trajectory":
            curves = recover_trajectories(m, design, u)
            recovered = {s.id: curves[i] for i, s in enumerate(sample.subjects)}
            score, _ = are_metric(sample, recovered, base.grid)
        else:
            preds = predict_responses(m, design, u)
            predicted = {s.id: float(preds[i]) for i, s in enumerate(sample.subjects)}
            score, _ = ape_metric(responses, predicted)
        scores.append(float(score))

    scores_arr = np.asarray(scores)
    if not np.any(np.isfinite(scores_arr)):
        raise RidgeSelectionError("every ridge candidate led to an infeasible design")
    best = int(np.argmin(scores_arr))
    return RidgeSelection(
        sigma2_new=float(cand[best]),
        method="cv",
        candidates=tuple({"value": float(v), "score": float(s)} for v, s in zip(cand, scores)),
    )


# ---------------------------------------------------------------------------
# ridge selection, sparse pilots (modified CV)


def _subject_candidate_designs(subject, grid: Grid, p: int, cap: int) -> list[tuple[int, ...]]:
    """p-subsets of the subject's snapped-to-grid observation indices."""
    pos = np.clip(np.searchsorted(grid.points, subject.times), 0, grid.size - 1)
    left = np.clip(pos - 1, 0, grid.size - 1)
    use_left = np.abs(grid.points[left] - subject.times) < np.abs(grid.points[pos] - subject.times)
    snapped = np.unique(np.where(use_left, left, pos))
    if snapped.size < p:
        return []
    return list(itertools.islice(itertools.combinations(snapped.tolist(), p), cap))


def _match_design(subject, design_times: np.ndarray, tau: float) -> np.ndarray | None:
    """Indices of the nearest observation per design point, all within tau."""
    idx = np.empty(design_times.size, dtype=int)
    for i, t in enumerate(design_times):
        j = int(np.argmin(np.abs(subject.times - t)))
        if abs(subject.times[j] - t) > tau:
            return None
        idx[i] = j
    return idx


def select_ridge_modified_cv(
    sample: SparseSample,
    responses: ResponseVector | None = None,
    target: str = "trajectory",
    omega: Sequence[float] | None = None,
    p: int = 3,
    partitions: int = 10,
    split: float = 0.75,
    tau: float | None = None,
    seed: int = 0,
    base_model: ModelFit | None = None,
    config: FitConfig | None = None,
    max_subsets_per_subject: int = MAX_SUBSETS_PER_SUBJECT,
) -> RidgeSelection:
    """Ridge selection for sparse pilots via repeated random partitions.

    For each of ``partitions`` seeded splits the model is fitted on the
    training part; for each ridge candidate the best design over the held-out
    subjects' own (snapped-to-grid) time configurations is found and the
    held-out subjects matching that design within ``tau`` per point are
    scored.  Candidate scores are averaged over partitions and the minimizer
    returned.

    Deterministic under (seed, partitions, split, omega, tau).
    """
    if partitions < 1:
        raise ValueError(f"partitions must be >= 1, got {partitions}")
    if not 0.0 < split < 1.0:
        raise ValueError(f"split must be in (0, 1), got {split}")
    if target == "response" and responses is None:
        raise ValueError("response-target CV requires responses")
    base = base_model if base_model is not None else fit_model(sample, responses, config)
    grid = base.grid
    if tau is None:
        tau = float(np.max(grid.spacing))
    cand = sorted(omega) if omega is not None else default_omega(base.sigma2)
    if len(cand) == 0:
        raise ValueError("omega must contain at least one candidate")

    n = sample.n
    n_a = min(max(int(round(split * n)), 1), n - 1)
    rng = np.random.default_rng(seed)
    splits = [rng.permutation(n) for _ in range(partitions)]

    # Partition fits reuse the base model's bandwidths: the split only decides
    # which subjects train the smoother, not how smooth it is.
    fit_cfg = FitConfig(
        grid_size=grid.size,
        kernel=base.kernel_name,
        bandwidth_mean=base.bandwidths.mean if base.bandwidths else None,
        bandwidth_autocov=base.bandwidths.autocov if base.bandwidths else None,
        bandwidth_crosscov=base.bandwidths.crosscov if base.bandwidths else None,
        bandwidth_diag=base.bandwidths.diag if base.bandwidths else None,
        domain=grid.domain,
    )

    per_partition: list[list[float]] = [[] for _ in cand]  # candidate -> scores
    counts: list[int] = [0 for _ in cand]
    for perm in splits:
        train_ids = perm[:n_a]
        holdout_ids = perm[n_a:]
        train = SparseSample(tuple(sample.subjects[i] for i in sorted(train_ids)), sample.domain)
        holdout = [sample.subjects[i] for i in sorted(holdout_ids)]
        train_resp = None
        if responses is not None:
            train_resp = ResponseVector({s.id: responses[s.id] for s in train.subjects})
        fit_a = fit_model(train, train_resp, fit_cfg)

        design_pool = sorted(
            {
                combo
                for subj in holdout
                for combo in _subject_candidate_designs(subj, grid, p, max_subsets_per_subject)
            }
        )
        if not design_pool:
            continue
        pool_arr = np.asarray(design_pool, dtype=int)

        for ci, value in enumerate(cand):
            m = fit_a.with_ridge(value)
            evaluator = DesignEvaluator(m, target)
            raw, _ = evaluator.raw_batch(pool_arr)
            best = int(np.argmax(raw))
            if not np.isfinite(raw[best]):
                continue
            design = Design(grid.points[pool_arr[best]], target)
            matched = []
            for subj in holdout:
                obs_idx = _match_design(subj, design.times, tau)
                if obs_idx is not None:
                    matched.append((subj, obs_idx))
            if not matched:
                continue
            u = np.stack([subj.values[obs_idx] for subj, obs_idx in matched])
            if target == "trajectory":
                curves = recover_trajectories(m, design, u)
                sub_rmse = []
                for (subj, _), curve in zip(matched, curves):
                    fitted = np.interp(subj.times, grid.points, curve)
                    sub_rmse.append(float(np.sqrt(np.mean((subj.values - fitted) ** 2))))
                score = float(np.mean(sub_rmse))
            else:
                preds = predict_responses(m, design, u)
                se = [(responses[subj.id] - float(pred)) ** 2 for (subj, _), pred in zip(matched, preds)]
                score = float(np.sqrt(np.mean(se)))
            per_partition[ci].append(score)
            counts[ci] += len(matched)

    scores = np.array(
        [np.mean(sc) if sc else np.inf for sc in per_partition]
    )
    if not np.any(np.isfinite(scores)):
        raise RidgeSelectionError(
            "no held-out subject matched any selected design; increase tau or rescan omega"
        )
    best = int(np.argmin(scores))
    return RidgeSelection(
        sigma2_new=float(cand[best]),
        method="modified_cv",
        candidates=tuple(
            {"value": float(v), "score": float(s), "n_B": int(c)}
            for v, s, c in zip(cand, scores, counts)
        ),
        partition_scores=tuple(tuple(sc) for sc in per_partition),
        L=partitions,
        split=split,
        tau=tau,
        seed=seed,
    )
