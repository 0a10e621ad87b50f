"""Covariance model assembly: eigenstructure, PSD projection, ridge, and fit.

All integrals and inner products use trapezoid quadrature on the model grid,
so eigenfunctions of the discretized covariance operator are orthonormal
under the trapezoid inner product.
"""

from __future__ import annotations

import datetime
import json
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from .data import Design, Domain, Grid, ResponseVector, SparseSample, make_grid
from .errors import DataFormatError
from .smoothing import (
    EPANECHNIKOV,
    KERNELS,
    Bandwidths,
    CurveEstimate,
    Kernel,
    SurfaceEstimate,
    check_bandwidth_ordering,
    estimate_auto_cov_raw,
    estimate_cross_cov,
    estimate_mean,
    estimate_noise_variance,
    select_bandwidth,
)

MODEL_FORMAT = "sparse-design-model/1"

# Eigenvalues above this fraction of the leading one count as positive.
_POSITIVE_EIG_REL = 1e-10
# First eigenfunction value larger than this (in absolute value) fixes the sign.
_SIGN_EPS = 1e-6


@dataclass(frozen=True)
class EigenSystem:
    """Descending eigenvalues with trapezoid-orthonormal eigenfunctions (rows)."""

    grid: Grid
    values: np.ndarray
    functions: np.ndarray  # shape (k, G)

    @property
    def n_positive(self) -> int:
        if self.values.size == 0:
            return 0
        cutoff = _POSITIVE_EIG_REL * max(float(self.values[0]), 0.0)
        return int(np.sum(self.values > cutoff))

    def positive(self) -> "EigenSystem":
        k = self.n_positive
        return EigenSystem(self.grid, self.values[:k].copy(), self.functions[:k].copy())


@dataclass(frozen=True)
class BetaCurve:
    """Functional regression coefficient expanded in the eigenbasis."""

    grid: Grid
    values: np.ndarray
    k_used: int
    fve: float


def eigendecompose(surface: SurfaceEstimate) -> EigenSystem:
    """Spectral decomposition of a symmetric surface under trapezoid weights.

    Solves the weighted problem ``W^(1/2) M W^(1/2)`` and rescales the
    eigenvectors by ``W^(-1/2)`` so that eigenfunctions are orthonormal in
    the trapezoid inner product.  Eigenvalues come back descending and each
    eigenfunction is signed so its first significantly nonzero grid value is
    positive.
    """
    m = np.asarray(surface.values, dtype=float)
    scale = float(np.abs(m).max()) if m.size else 0.0
    if scale > 0 and float(np.abs(m - m.T).max()) > 1e-8 * scale:
        raise ValueError("eigendecompose requires a symmetric surface")
    grid = surface.grid
    w = grid.trapezoid_weights()
    sw = np.sqrt(w)
    a = sw[:, None] * m * sw[None, :]
    a = (a + a.T) / 2.0
    eigvals, eigvecs = np.linalg.eigh(a)
    order = np.argsort(eigvals, kind="stable")[::-1]
    eigvals = eigvals[order]
    funcs = (eigvecs[:, order] / sw[:, None]).T  # rows are eigenfunctions
    for k in range(funcs.shape[0]):
        nz = np.flatnonzero(np.abs(funcs[k]) > _SIGN_EPS)
        if nz.size and funcs[k, nz[0]] < 0:
            funcs[k] = -funcs[k]
    return EigenSystem(grid, eigvals, funcs)


def project_psd(surface: SurfaceEstimate, eigen: EigenSystem) -> SurfaceEstimate:
    """Nearest PSD surface in the trapezoid-weighted Frobenius geometry.

    Keeps only the positive part of the spectrum: ``sum_k rho_k psi_k psi_k^T``
    over eigenvalues above ``1e-10 * rho_1``.
    """
    pos = eigen.positive()
    if pos.values.size == 0:
        return SurfaceEstimate(surface.grid, np.zeros_like(surface.values))
    rebuilt = (pos.functions.T * pos.values) @ pos.functions
    rebuilt = (rebuilt + rebuilt.T) / 2.0
    return SurfaceEstimate(surface.grid, rebuilt)


def apply_ridge(surface_psd: SurfaceEstimate | np.ndarray, sigma2_new: float) -> np.ndarray:
    """Add a ridge to the diagonal: every eigenvalue shifts by sigma2_new."""
    if sigma2_new < 0:
        raise ValueError(f"ridge must be >= 0, got {sigma2_new}")
    values = surface_psd.values if isinstance(surface_psd, SurfaceEstimate) else surface_psd
    return np.asarray(values, dtype=float) + sigma2_new * np.eye(values.shape[0])


def estimate_beta(
    eigen: EigenSystem,
    cross_cov: CurveEstimate,
    fve_threshold: float = 0.95,
) -> BetaCurve:
    """Regression coefficient curve from eigen projections of the cross-covariance.

    Projects C onto each positive eigenfunction, keeps the smallest leading
    set explaining at least ``fve_threshold`` of the variance, and returns
    ``sum_k (sigma_k / rho_k) psi_k``.
    """
    if not 0.0 < fve_threshold <= 1.0:
        raise ValueError(f"fve_threshold must be in (0, 1], got {fve_threshold}")
    pos = eigen.positive()
    if pos.values.size == 0:
        raise ValueError("estimate_beta requires at least one positive eigenvalue")
    w = eigen.grid.trapezoid_weights()
    sigma_k = pos.functions @ (w * cross_cov.values)
    frac = np.cumsum(pos.values) / np.sum(pos.values)
    k_used = int(np.searchsorted(frac, fve_threshold - 1e-12) + 1)
    k_used = min(k_used, pos.values.size)
    beta = (sigma_k[:k_used] / pos.values[:k_used]) @ pos.functions[:k_used]
    return BetaCurve(eigen.grid, beta, k_used, fve_threshold)


@dataclass(frozen=True)
class FitConfig:
    """Knobs for fit_model; None bandwidths mean GCV auto-selection."""

    grid_size: int = 51
    kernel: str = "epanechnikov"
    bandwidth_mean: float | None = None
    bandwidth_autocov: float | None = None
    bandwidth_crosscov: float | None = None
    bandwidth_diag: float | None = None
    ridge: float | str | None = None  # None -> estimated noise variance; "auto" -> CV
    fve: float = 0.95
    boundary_cut: float = 0.25
    domain: Domain | None = None
    # used only when ridge == "auto"
    ridge_target: str = "trajectory"
    ridge_p: int = 3
    ridge_method: str | None = None  # None -> cv for dense pilots, modified_cv otherwise
    ridge_omega: tuple[float, ...] | None = None
    ridge_partitions: int = 10
    ridge_split: float = 0.75
    ridge_tau: float | None = None
    seed: int = 0


@dataclass(frozen=True)
class ModelFit:
    """Everything design search and prediction need, on one shared grid."""

    grid: Grid
    mean: np.ndarray
    cov_psd: np.ndarray
    cov_ridged: np.ndarray
    sigma2: float
    sigma2_new: float
    eigen: EigenSystem
    var_x_integral: float
    cross_cov: np.ndarray | None = None
    mu_y: float | None = None
    var_y: float | None = None
    beta: BetaCurve | None = None
    bandwidths: Bandwidths | None = None
    kernel_name: str = "epanechnikov"
    created: str | None = None

    @property
    def has_response(self) -> bool:
        return self.cross_cov is not None and self.mu_y is not None

    def with_ridge(self, sigma2_new: float) -> "ModelFit":
        """Cheap copy with a different ridge; smoothing is untouched."""
        return replace(
            self,
            sigma2_new=float(sigma2_new),
            cov_ridged=apply_ridge(self.cov_psd, float(sigma2_new)),
        )

    def design_indices(self, design: Design) -> np.ndarray:
        return self.grid.indices_of(design.times)

    # -- serialization ------------------------------------------------------

    def to_json_dict(self) -> dict:
        doc = {
            "format": MODEL_FORMAT,
            "grid": {
                "lo": float(self.grid.domain.lo),
                "hi": float(self.grid.domain.hi),
                "points": self.grid.points.tolist(),
            },
            "mean": self.mean.tolist(),
            "cov_psd": self.cov_psd.tolist(),
            "sigma2": float(self.sigma2),
            "sigma2_new": float(self.sigma2_new),
            "eigenvalues": self.eigen.values.tolist(),
            "eigenfunctions": self.eigen.functions.tolist(),
            "fve": float(self.beta.fve) if self.beta is not None else None,
            "meta": {
                "bandwidths": self.bandwidths.as_dict() if self.bandwidths else None,
                "kernel": self.kernel_name,
                "created": self.created,
            },
        }
        if self.cross_cov is not None:
            doc["cross_cov"] = self.cross_cov.tolist()
        if self.mu_y is not None:
            doc["mu_Y"] = float(self.mu_y)
        if self.var_y is not None:
            doc["var_Y"] = float(self.var_y)
        if self.beta is not None:
            doc["beta"] = self.beta.values.tolist()
        return doc

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_json_dict(cls, doc: Mapping) -> "ModelFit":
        if doc.get("format") != MODEL_FORMAT:
            raise DataFormatError(
                f"unsupported model format {doc.get('format')!r}, expected {MODEL_FORMAT!r}"
            )
        grid = Grid(
            Domain(float(doc["grid"]["lo"]), float(doc["grid"]["hi"])),
            np.asarray(doc["grid"]["points"], dtype=float),
        )
        cov_psd = np.asarray(doc["cov_psd"], dtype=float)
        sigma2_new = float(doc["sigma2_new"])
        eigen = EigenSystem(
            grid,
            np.asarray(doc["eigenvalues"], dtype=float),
            np.asarray(doc["eigenfunctions"], dtype=float),
        )
        beta = None
        if doc.get("beta") is not None:
            beta = BetaCurve(
                grid,
                np.asarray(doc["beta"], dtype=float),
                k_used=0,
                fve=float(doc.get("fve") or 0.0),
            )
        meta = doc.get("meta") or {}
        bw = meta.get("bandwidths")
        return cls(
            grid=grid,
            mean=np.asarray(doc["mean"], dtype=float),
            cov_psd=cov_psd,
            cov_ridged=apply_ridge(cov_psd, sigma2_new),
            sigma2=float(doc["sigma2"]),
            sigma2_new=sigma2_new,
            eigen=eigen,
            var_x_integral=float(grid.trapezoid_weights() @ np.diag(cov_psd)),
            cross_cov=(
                np.asarray(doc["cross_cov"], dtype=float) if doc.get("cross_cov") is not None else None
            ),
            mu_y=float(doc["mu_Y"]) if doc.get("mu_Y") is not None else None,
            var_y=float(doc["var_Y"]) if doc.get("var_Y") is not None else None,
            beta=beta,
            bandwidths=Bandwidths(**bw) if bw else None,
            kernel_name=meta.get("kernel", "epanechnikov"),
            created=meta.get("created"),
        )

    @classmethod
    def load(cls, path: str) -> "ModelFit":
        with open(path, encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise DataFormatError(f"{path}: not valid JSON ({exc})") from None
        return cls.from_json_dict(doc)


def fit_model(
    sample: SparseSample,
    responses: ResponseVector | None = None,
    config: FitConfig | None = None,
) -> ModelFit:
    """Run the whole estimation pipeline and package the result.

    Stages: mean smooth, raw covariance smooth, eigendecomposition, PSD
    projection, noise variance, optional cross-covariance and regression
    curve, then ridge resolution (fixed value, the estimated noise variance,
    or cross-validated when ``config.ridge == "auto"``).
    """
    cfg = config or FitConfig()
    if cfg.kernel not in KERNELS:
        raise ValueError(f"unknown kernel {cfg.kernel!r}; choices: {sorted(KERNELS)}")
    kernel = KERNELS[cfg.kernel]
    domain = cfg.domain or sample.domain
    grid = make_grid(domain, cfg.grid_size)

    if cfg.ridge == "auto" and cfg.ridge_target == "response" and responses is None:
        raise ValueError("ridge=auto requires responses for response-target CV")

    h_mu = cfg.bandwidth_mean or select_bandwidth("mean", sample, grid, kernel=kernel)
    mean = estimate_mean(sample, grid, h_mu, kernel)

    h_r = cfg.bandwidth_autocov or select_bandwidth("autocov", sample, grid, kernel=kernel, mean=mean)
    raw = estimate_auto_cov_raw(sample, mean, grid, h_r, kernel)

    eigen = eigendecompose(raw)
    cov_psd = project_psd(raw, eigen)

    h_v = cfg.bandwidth_diag or select_bandwidth("diag", sample, grid, kernel=kernel, mean=mean)
    sigma2 = estimate_noise_variance(sample, mean, raw, grid, h_v, cfg.boundary_cut, kernel)

    h_s = None
    cross = None
    mu_y = None
    var_y = None
    beta = None
    if responses is not None:
        h_s = cfg.bandwidth_crosscov or select_bandwidth(
            "crosscov", sample, grid, responses=responses, kernel=kernel, mean=mean
        )
        cross = estimate_cross_cov(sample, responses, mean, grid, h_s, kernel)
        mu_y = responses.mu_y
        var_y = responses.var_y
        beta = estimate_beta(eigen, cross, cfg.fve)

    bandwidths = Bandwidths(mean=h_mu, autocov=h_r, crosscov=h_s, diag=h_v)
    check_bandwidth_ordering(bandwidths, grid)

    base_ridge = sigma2 if cfg.ridge is None or cfg.ridge == "auto" else float(cfg.ridge)
    model = ModelFit(
        grid=grid,
        mean=mean.values,
        cov_psd=cov_psd.values,
        cov_ridged=apply_ridge(cov_psd, base_ridge),
        sigma2=sigma2,
        sigma2_new=base_ridge,
        eigen=eigen.positive(),
        var_x_integral=float(grid.trapezoid_weights() @ np.diag(cov_psd.values)),
        cross_cov=cross.values if cross is not None else None,
        mu_y=mu_y,
        var_y=var_y,
        beta=beta,
        bandwidths=bandwidths,
        kernel_name=cfg.kernel,
        created=datetime.datetime.now(datetime.timezone.utc).isoformat(),
    )

    if cfg.ridge == "auto":
        from . import validation  # deferred; validation depends on this module

        method = cfg.ridge_method or (
            "cv" if validation.is_dense_on(sample, grid) else "modified_cv"
        )
        omega = list(cfg.ridge_omega) if cfg.ridge_omega is not None else None
        if method == "cv":
            selection = validation.select_ridge_cv(
                sample,
                responses,
                target=cfg.ridge_target,
                omega=omega,
                p=cfg.ridge_p,
                base_model=model,
            )
        elif method == "modified_cv":
            selection = validation.select_ridge_modified_cv(
                sample,
                responses,
                target=cfg.ridge_target,
                omega=omega,
                p=cfg.ridge_p,
                partitions=cfg.ridge_partitions,
                split=cfg.ridge_split,
                tau=cfg.ridge_tau,
                seed=cfg.seed,
                base_model=model,
            )
        else:
            raise ValueError(f"unknown ridge method {method!r}")
        model = model.with_ridge(selection.sigma2_new)
    return model
