"""Pooled local-linear kernel smoothers with GCV bandwidth selection.

Four estimators share the same machinery, all fit on scatterplots pooled
across subjects.  The moment scatters are centered at the estimated mean
before smoothing, which estimates the same population quantities as
smoothing raw products and subtracting mean terms afterwards, but without
the product-scale noise and curvature that make the raw form unusable when
the mean is large:

* mean curve: scatter ``(t_ij, U_ij)`` with subject weight ``1/m_i``,
* cross-covariance curve: scatter ``(t_ij, (U_ij - mean(t_ij)) (Y_i - Ybar))``,
  weight ``1/m_i``,
* raw auto-covariance surface: off-diagonal centered-product scatter
  ``((t_ij, t_ik), (U_ij - mean(t_ij)) (U_ik - mean(t_ik)))`` for ``j != k``,
  weight ``1/(m_i (m_i - 1))``,
* diagonal curve ``(t_ij, (U_ij - mean(t_ij))^2)`` whose smooth estimates
  pointwise variance plus noise, used for the noise variance.

Scatter points sharing the exact same predictor location are collapsed to
per-location sufficient statistics (sum of weights, weighted value sums),
which leaves every fitted value, residual sum and hat-trace bit-identical
while making dense pooled scatters cheap to smooth.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .data import Grid, ResponseVector, SparseSample
from .errors import SmoothingError

# Relative determinant floor below which a local system counts as rank-deficient.
_RANK_TOL = 1e-10
# Local bandwidth escalation: multiply by 1.5 at most 3 times before giving up.
_ESCALATION_FACTOR = 1.5
_MAX_ESCALATIONS = 3


@dataclass(frozen=True)
class Kernel:
    """Symmetric probability density supported on [-1, 1]."""

    name: str
    fn: Callable[[np.ndarray], np.ndarray]
    at_zero: float

    def __call__(self, u: np.ndarray) -> np.ndarray:
        return self.fn(u)


def _epanechnikov(u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    return np.where(np.abs(u) <= 1.0, 0.75 * (1.0 - u * u), 0.0)


def _uniform(u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    return np.where(np.abs(u) <= 1.0, 0.5, 0.0)


def _triangular(u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    return np.maximum(1.0 - np.abs(u), 0.0)


def _quartic(u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    inside = np.abs(u) <= 1.0
    return np.where(inside, (15.0 / 16.0) * (1.0 - u * u) ** 2, 0.0)


EPANECHNIKOV = Kernel("epanechnikov", _epanechnikov, 0.75)

KERNELS: dict[str, Kernel] = {
    "epanechnikov": EPANECHNIKOV,
    "uniform": Kernel("uniform", _uniform, 0.5),
    "triangular": Kernel("triangular", _triangular, 1.0),
    "quartic": Kernel("quartic", _quartic, 15.0 / 16.0),
}


@dataclass(frozen=True)
class Bandwidths:
    """Bandwidths for the four smoothing steps, in time units."""

    mean: float
    autocov: float
    crosscov: float | None = None
    diag: float | None = None

    def as_dict(self) -> dict:
        return {
            "mean": self.mean,
            "autocov": self.autocov,
            "crosscov": self.crosscov,
            "diag": self.diag,
        }


@dataclass(frozen=True)
class CurveEstimate:
    grid: Grid
    values: np.ndarray


@dataclass(frozen=True)
class SurfaceEstimate:
    grid: Grid
    values: np.ndarray


# ---------------------------------------------------------------------------
# collapsed scatter representations


@dataclass(frozen=True)
class _Scatter1D:
    q: np.ndarray    # distinct locations, ascending
    w: np.ndarray    # total weight per location
    wv: np.ndarray   # sum of weight * value
    wv2: np.ndarray  # sum of weight * value^2
    n_raw: int


@dataclass(frozen=True)
class _Scatter2D:
    q1: np.ndarray   # lexicographically sorted by (q1, q2)
    q2: np.ndarray
    w: np.ndarray
    wv: np.ndarray
    wv2: np.ndarray
    n_raw: int


def _collapse_1d(q: np.ndarray, v: np.ndarray, w: np.ndarray) -> _Scatter1D:
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    if q.size == 0:
        raise ValueError("empty scatter")
    order = np.argsort(q, kind="stable")
    qs, vs, ws = q[order], v[order], w[order]
    starts = np.flatnonzero(np.concatenate(([True], qs[1:] != qs[:-1])))
    return _Scatter1D(
        qs[starts],
        np.add.reduceat(ws, starts),
        np.add.reduceat(ws * vs, starts),
        np.add.reduceat(ws * vs * vs, starts),
        int(q.size),
    )


def _collapse_2d(q1: np.ndarray, q2: np.ndarray, v: np.ndarray, w: np.ndarray) -> _Scatter2D:
    q1 = np.asarray(q1, dtype=float)
    q2 = np.asarray(q2, dtype=float)
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    if q1.size == 0:
        raise ValueError("empty scatter")
    order = np.lexsort((q2, q1))
    a, b, vs, ws = q1[order], q2[order], v[order], w[order]
    new = np.concatenate(([True], (a[1:] != a[:-1]) | (b[1:] != b[:-1])))
    starts = np.flatnonzero(new)
    return _Scatter2D(
        a[starts],
        b[starts],
        np.add.reduceat(ws, starts),
        np.add.reduceat(ws * vs, starts),
        np.add.reduceat(ws * vs * vs, starts),
        int(q1.size),
    )


# ---------------------------------------------------------------------------
# local fits


def _fit1(scat: _Scatter1D, t: float, h: float, kernel: Kernel):
    """Local-linear fit at t: returns (a0, m00) or None when rank-deficient.

    m00 is the (0,0) entry of the inverse normal matrix in scaled
    coordinates, used for the hat-matrix trace.
    """
    lo = np.searchsorted(scat.q, t - h, side="left")
    hi = np.searchsorted(scat.q, t + h, side="right")
    if hi - lo < 2:
        return None
    x = (scat.q[lo:hi] - t) / h
    k = kernel(x)
    w = scat.w[lo:hi] * k
    s0 = float(w.sum())
    if s0 <= 0.0:
        return None
    s1 = float(w @ x)
    s2 = float(w @ (x * x))
    den = s0 * s2 - s1 * s1
    if not den > _RANK_TOL * s0 * s2:
        return None
    wv = scat.wv[lo:hi]
    t0 = float(k @ wv)
    t1 = float((k * x) @ wv)
    a0 = (s2 * t0 - s1 * t1) / den
    m00 = s2 / den
    return a0, m00


def _fit2(scat: _Scatter2D, s: float, t: float, h: float, kernel: Kernel):
    """Bilinear local fit at (s, t); returns (a0, m00) or None."""
    lo = np.searchsorted(scat.q1, s - h, side="left")
    hi = np.searchsorted(scat.q1, s + h, side="right")
    if hi - lo < 3:
        return None
    q2w = scat.q2[lo:hi]
    mask = (q2w >= t - h) & (q2w <= t + h)
    if int(mask.sum()) < 3:
        return None
    x1 = (scat.q1[lo:hi][mask] - s) / h
    x2 = (q2w[mask] - t) / h
    return _fit2_core(x1, x2, scat.w[lo:hi][mask], scat.wv[lo:hi][mask], kernel)


def _fit2_core(x1: np.ndarray, x2: np.ndarray, wloc: np.ndarray, wvloc: np.ndarray, kernel: Kernel):
    k = kernel(x1) * kernel(x2)
    w = wloc * k
    s00 = float(w.sum())
    if s00 <= 0.0:
        return None
    s10 = float(w @ x1)
    s01 = float(w @ x2)
    s20 = float(w @ (x1 * x1))
    s11 = float(w @ (x1 * x2))
    s02 = float(w @ (x2 * x2))
    c00 = s20 * s02 - s11 * s11
    det = s00 * c00 - s10 * (s10 * s02 - s11 * s01) + s01 * (s10 * s11 - s20 * s01)
    if not det > _RANK_TOL * s00 ** 3:
        return None
    t00 = float(k @ wvloc)
    t10 = float((k * x1) @ wvloc)
    t01 = float((k * x2) @ wvloc)
    num = (
        t00 * c00
        - s10 * (t10 * s02 - s11 * t01)
        + s01 * (t10 * s11 - s20 * t01)
    )
    return num / det, c00 / det


def _fit1_escalating(scat: _Scatter1D, t: float, h: float, kernel: Kernel) -> float:
    hh = h
    for _ in range(_MAX_ESCALATIONS + 1):
        out = _fit1(scat, t, hh, kernel)
        if out is not None:
            return out[0]
        hh *= _ESCALATION_FACTOR
    raise SmoothingError(
        f"local-linear system rank-deficient at grid point t={t} "
        f"even after bandwidth escalation (h={h})"
    )


def _fit2_escalating(scat: _Scatter2D, s: float, t: float, h: float, kernel: Kernel) -> float:
    hh = h
    for _ in range(_MAX_ESCALATIONS + 1):
        out = _fit2(scat, s, t, hh, kernel)
        if out is not None:
            return out[0]
        hh *= _ESCALATION_FACTOR
    raise SmoothingError(
        f"local-linear system rank-deficient at grid node (s={s}, t={t}) "
        f"even after bandwidth escalation (h={h})"
    )


def _fit2_grid(scat: _Scatter2D, grid: Grid, h: float, kernel: Kernel) -> np.ndarray:
    """Evaluate the bilinear fit on the full grid x grid lattice."""
    pts = grid.points
    g = pts.size
    out = np.empty((g, g))
    for a, s in enumerate(pts):
        lo = np.searchsorted(scat.q1, s - h, side="left")
        hi = np.searchsorted(scat.q1, s + h, side="right")
        # re-sort this q1-window by q2 so the inner loop can slice it
        q2w = scat.q2[lo:hi]
        order = np.argsort(q2w, kind="stable")
        q2w = q2w[order]
        q1w = scat.q1[lo:hi][order]
        ww = scat.w[lo:hi][order]
        wvw = scat.wv[lo:hi][order]
        for b, t in enumerate(pts):
            lo2 = np.searchsorted(q2w, t - h, side="left")
            hi2 = np.searchsorted(q2w, t + h, side="right")
            res = None
            if hi2 - lo2 >= 3:
                res = _fit2_core(
                    (q1w[lo2:hi2] - s) / h,
                    (q2w[lo2:hi2] - t) / h,
                    ww[lo2:hi2],
                    wvw[lo2:hi2],
                    kernel,
                )
            if res is None:
                out[a, b] = _fit2_escalating(scat, s, t, h, kernel)
            else:
                out[a, b] = res[0]
    return out


# ---------------------------------------------------------------------------
# public smoothers


def local_linear_1d(
    points: np.ndarray,
    values: np.ndarray,
    weights: np.ndarray,
    bandwidth: float,
    grid: Grid,
    kernel: Kernel = EPANECHNIKOV,
) -> CurveEstimate:
    """Weighted local-linear fit of a scatter, evaluated on the grid.

    At each grid point t the fit solves a weighted least-squares line in
    (q - t) with weights ``K((q - t)/h) * weight`` and returns the intercept.
    Rank-deficient local systems escalate the bandwidth by 1.5x up to three
    times before raising.
    """
    _check_bandwidth(bandwidth, grid)
    scat = _collapse_1d(points, values, weights)
    out = np.array([_fit1_escalating(scat, t, bandwidth, kernel) for t in grid.points])
    return CurveEstimate(grid, out)


def local_linear_2d(
    points_s: np.ndarray,
    points_t: np.ndarray,
    values: np.ndarray,
    weights: np.ndarray,
    bandwidth: float,
    grid: Grid,
    kernel: Kernel = EPANECHNIKOV,
    symmetrize: bool = True,
) -> SurfaceEstimate:
    """Bilinear local fit of a 2-d scatter on the grid lattice.

    Uses a product kernel with a common bandwidth in both coordinates.  With
    ``symmetrize=True`` (the default) the output is replaced by
    ``(M + M.T) / 2``.
    """
    _check_bandwidth(bandwidth, grid)
    scat = _collapse_2d(points_s, points_t, values, weights)
    surf = _fit2_grid(scat, grid, bandwidth, kernel)
    if symmetrize:
        surf = (surf + surf.T) / 2.0
    return SurfaceEstimate(grid, surf)


def _check_bandwidth(h: float, grid: Grid) -> None:
    if not h > 0:
        raise ValueError(f"bandwidth must be positive, got {h}")
    if h > grid.domain.width:
        raise ValueError(f"bandwidth {h} exceeds the domain width {grid.domain.width}")


# scatter assembly ----------------------------------------------------------


def _mean_scatter(sample: SparseSample):
    q = np.concatenate([s.times for s in sample.subjects])
    v = np.concatenate([s.values for s in sample.subjects])
    w = np.concatenate([np.full(s.m, 1.0 / s.m) for s in sample.subjects])
    return q, v, w


def _centered(subject, mean: CurveEstimate) -> np.ndarray:
    return subject.values - np.interp(subject.times, mean.grid.points, mean.values)


def _crosscov_scatter(sample: SparseSample, responses: ResponseVector, mean: CurveEstimate):
    ybar = responses.mu_y
    q = np.concatenate([s.times for s in sample.subjects])
    v = np.concatenate([_centered(s, mean) * (responses[s.id] - ybar) for s in sample.subjects])
    w = np.concatenate([np.full(s.m, 1.0 / s.m) for s in sample.subjects])
    return q, v, w


def _diag_scatter(sample: SparseSample, mean: CurveEstimate):
    q = np.concatenate([s.times for s in sample.subjects])
    v = np.concatenate([_centered(s, mean) ** 2 for s in sample.subjects])
    w = np.concatenate([np.full(s.m, 1.0 / s.m) for s in sample.subjects])
    return q, v, w


def _pair_scatter(sample: SparseSample, mean: CurveEstimate):
    """All ordered off-diagonal within-subject centered pairs (j != k)."""
    q1_parts, q2_parts, v_parts, w_parts = [], [], [], []
    for s in sample.subjects:
        m = s.m
        if m < 2:
            continue
        resid = _centered(s, mean)
        jj = np.repeat(np.arange(m), m)
        kk = np.tile(np.arange(m), m)
        off = jj != kk
        jj, kk = jj[off], kk[off]
        q1_parts.append(s.times[jj])
        q2_parts.append(s.times[kk])
        v_parts.append(resid[jj] * resid[kk])
        w_parts.append(np.full(jj.size, 1.0 / (m * (m - 1))))
    if not q1_parts:
        raise ValueError("auto-covariance needs at least one subject with m_i >= 2")
    return (
        np.concatenate(q1_parts),
        np.concatenate(q2_parts),
        np.concatenate(v_parts),
        np.concatenate(w_parts),
    )


def estimate_mean(
    sample: SparseSample,
    grid: Grid,
    bandwidth: float | None = None,
    kernel: Kernel = EPANECHNIKOV,
) -> CurveEstimate:
    """Pooled local-linear mean curve; observations weighted by 1/m_i."""
    q, v, w = _mean_scatter(sample)
    if bandwidth is None:
        bandwidth = select_bandwidth("mean", sample, grid, kernel=kernel)
    return local_linear_1d(q, v, w, bandwidth, grid, kernel)


def estimate_cross_cov(
    sample: SparseSample,
    responses: ResponseVector,
    mean: CurveEstimate,
    grid: Grid,
    bandwidth: float | None = None,
    kernel: Kernel = EPANECHNIKOV,
) -> CurveEstimate:
    """Cross-covariance curve: smooth of mean-centered U times centered Y."""
    q, v, w = _crosscov_scatter(sample, responses, mean)
    if bandwidth is None:
        bandwidth = select_bandwidth(
            "crosscov", sample, grid, responses=responses, kernel=kernel, mean=mean
        )
    return local_linear_1d(q, v, w, bandwidth, grid, kernel)


def estimate_auto_cov_raw(
    sample: SparseSample,
    mean: CurveEstimate,
    grid: Grid,
    bandwidth: float | None = None,
    kernel: Kernel = EPANECHNIKOV,
) -> SurfaceEstimate:
    """Raw (symmetrized, not yet PSD) auto-covariance surface.

    Only off-diagonal centered pairs contribute, each subject weighted by
    ``1/(m_i (m_i - 1))``; subjects with a single observation are skipped.
    """
    q1, q2, v, w = _pair_scatter(sample, mean)
    if bandwidth is None:
        bandwidth = select_bandwidth("autocov", sample, grid, kernel=kernel, mean=mean)
    _check_bandwidth(bandwidth, grid)
    scat = _collapse_2d(q1, q2, v, w)
    surf = _fit2_grid(scat, grid, bandwidth, kernel)
    return SurfaceEstimate(grid, (surf + surf.T) / 2.0)


def estimate_noise_variance(
    sample: SparseSample,
    mean: CurveEstimate,
    surface_raw: SurfaceEstimate,
    grid: Grid,
    bandwidth: float | None = None,
    boundary_cut: float = 0.25,
    kernel: Kernel = EPANECHNIKOV,
) -> float:
    """Measurement-error variance from the diagonal discrepancy.

    Smooths the squared centered observations into a pointwise
    variance-plus-noise curve V(t), subtracts the raw surface diagonal, and
    averages the difference over the interior of the domain (a
    ``boundary_cut`` fraction trimmed from each end), clamped at zero.
    """
    if not 0.0 <= boundary_cut < 0.5:
        raise ValueError(f"boundary_cut must be in [0, 0.5), got {boundary_cut}")
    q, v, w = _diag_scatter(sample, mean)
    if bandwidth is None:
        bandwidth = select_bandwidth("diag", sample, grid, kernel=kernel, mean=mean)
    vhat = local_linear_1d(q, v, w, bandwidth, grid, kernel).values
    diff = vhat - np.diag(surface_raw.values)
    lo = grid.domain.lo + boundary_cut * grid.domain.width
    hi = grid.domain.hi - boundary_cut * grid.domain.width
    inside = (grid.points >= lo) & (grid.points <= hi)
    if int(inside.sum()) < 2:
        inside = np.ones(grid.size, dtype=bool)  # grid too coarse to trim
    t_in = grid.points[inside]
    d_in = diff[inside]
    integral = float(np.trapezoid(d_in, t_in))
    return max(0.0, integral / (t_in[-1] - t_in[0]))


# ---------------------------------------------------------------------------
# bandwidth selection


def _auto_candidates_1d(scat: _Scatter1D, grid: Grid, count: int = 10) -> np.ndarray:
    """Geometric ladder from the smallest workable bandwidth to half the domain.

    The lower end is the smallest h for which every grid point has at least
    3 distinct scatter locations inside [t - h, t + h].
    """
    need = min(3, scat.q.size)
    h_min = 0.0
    for t in grid.points:
        d = np.abs(scat.q - t)
        h_min = max(h_min, float(np.partition(d, need - 1)[need - 1]))
    span = grid.domain.width
    h_min = max(h_min, 1e-6 * span)
    h_max = span / 2.0
    if h_min >= h_max:
        return np.array([min(h_min, span)])
    return np.geomspace(h_min, h_max, count)


def _auto_candidates_2d(scat: _Scatter2D, grid: Grid, count: int = 10) -> np.ndarray:
    """Same ladder for surfaces, with Chebyshev windows max(|dq1|,|dq2|) <= h."""
    need = min(3, scat.q1.size)
    h_min = 0.0
    for s in grid.points:
        d1 = np.abs(scat.q1 - s)
        for t in grid.points:
            d = np.maximum(d1, np.abs(scat.q2 - t))
            h_min = max(h_min, float(np.partition(d, need - 1)[need - 1]))
    span = grid.domain.width
    h_min = max(h_min, 1e-6 * span)
    h_max = span / 2.0
    if h_min >= h_max:
        return np.array([min(h_min, span)])
    return np.geomspace(h_min, h_max, count)


def _gcv_1d(scat: _Scatter1D, h: float, kernel: Kernel) -> float:
    """GCV score RSS / (1 - tr(H)/N)^2 on the pooled scatter; inf if infeasible."""
    rss = 0.0
    tr = 0.0
    for i in range(scat.q.size):
        res = _fit1(scat, float(scat.q[i]), h, kernel)
        if res is None:
            return np.inf
        a0, m00 = res
        rss += scat.wv2[i] - 2.0 * a0 * scat.wv[i] + a0 * a0 * scat.w[i]
        tr += scat.w[i] * m00
    tr *= kernel.at_zero
    denom = 1.0 - tr / scat.n_raw
    if denom <= 0.0:
        return np.inf
    return rss / (denom * denom)


def _gcv_2d(scat: _Scatter2D, h: float, kernel: Kernel) -> float:
    rss = 0.0
    tr = 0.0
    i = 0
    n_loc = scat.q1.size
    while i < n_loc:
        s = float(scat.q1[i])
        j = i
        while j < n_loc and scat.q1[j] == s:
            j += 1
        lo = np.searchsorted(scat.q1, s - h, side="left")
        hi = np.searchsorted(scat.q1, s + h, side="right")
        q2w = scat.q2[lo:hi]
        order = np.argsort(q2w, kind="stable")
        q2w = q2w[order]
        q1w = scat.q1[lo:hi][order]
        ww = scat.w[lo:hi][order]
        wvw = scat.wv[lo:hi][order]
        for idx in range(i, j):
            t = float(scat.q2[idx])
            lo2 = np.searchsorted(q2w, t - h, side="left")
            hi2 = np.searchsorted(q2w, t + h, side="right")
            if hi2 - lo2 < 3:
                return np.inf
            res = _fit2_core(
                (q1w[lo2:hi2] - s) / h,
                (q2w[lo2:hi2] - t) / h,
                ww[lo2:hi2],
                wvw[lo2:hi2],
                kernel,
            )
            if res is None:
                return np.inf
            a0, m00 = res
            rss += scat.wv2[idx] - 2.0 * a0 * scat.wv[idx] + a0 * a0 * scat.w[idx]
            tr += scat.w[idx] * m00
        i = j
    tr *= kernel.at_zero**2
    denom = 1.0 - tr / scat.n_raw
    if denom <= 0.0:
        return np.inf
    return rss / (denom * denom)


_PROBLEMS = ("mean", "crosscov", "autocov", "diag")


def select_bandwidth(
    problem: str,
    sample: SparseSample,
    grid: Grid,
    candidates: Sequence[float] | None = None,
    responses: ResponseVector | None = None,
    kernel: Kernel = EPANECHNIKOV,
    mean: CurveEstimate | None = None,
) -> float:
    """Pick the GCV-minimizing bandwidth for one of the smoothing problems.

    ``candidates=None`` uses 10 geometric steps from the smallest h that
    leaves every grid point with at least 3 in-window scatter locations up to
    half the domain width.  Ties go to the smallest candidate.  The moment
    problems center at ``mean`` (estimated on the fly when omitted).
    """
    if problem not in _PROBLEMS:
        raise ValueError(f"problem must be one of {_PROBLEMS}, got {problem!r}")
    if problem != "mean" and mean is None:
        mean = estimate_mean(sample, grid, kernel=kernel)
    if problem == "crosscov":
        if responses is None:
            raise ValueError("crosscov bandwidth selection needs responses")
        q, v, w = _crosscov_scatter(sample, responses, mean)
    elif problem == "mean":
        q, v, w = _mean_scatter(sample)
    elif problem == "diag":
        q, v, w = _diag_scatter(sample, mean)

    if problem == "autocov":
        q1, q2, v, w = _pair_scatter(sample, mean)
        scat2 = _collapse_2d(q1, q2, v, w)
        cand = np.asarray(candidates, dtype=float) if candidates is not None else _auto_candidates_2d(scat2, grid)
        if cand.size < 1:
            raise ValueError("need at least one bandwidth candidate")
        scores = np.array([_gcv_2d(scat2, float(h), kernel) for h in cand])
    else:
        scat1 = _collapse_1d(q, v, w)
        cand = np.asarray(candidates, dtype=float) if candidates is not None else _auto_candidates_1d(scat1, grid)
        if cand.size < 1:
            raise ValueError("need at least one bandwidth candidate")
        scores = np.array([_gcv_1d(scat1, float(h), kernel) for h in cand])

    if not np.any(np.isfinite(scores)):
        raise SmoothingError(f"no feasible bandwidth candidate for problem {problem!r}")
    return float(cand[int(np.argmin(scores))])


def check_bandwidth_ordering(bandwidths: Bandwidths, grid: Grid) -> None:
    """Warn when the mean/covariance bandwidths are wildly out of scale.

    The consistency theory wants h_autocov^2 <~ h_mean <~ h_autocov (up to
    constants); violations are logged, never enforced.
    """
    h_mu = bandwidths.mean
    h_r = bandwidths.autocov
    span = grid.domain.width
    if h_mu > h_r or h_mu < (h_r**2) / span:
        warnings.warn(
            f"bandwidth ordering h_autocov^2/T <= h_mean <= h_autocov violated "
            f"(h_mean={h_mu:.4g}, h_autocov={h_r:.4g}); estimates are still usable"
        )
