"""Best linear predictors given a fitted model, a design, and observed values.

Trajectory recovery and response prediction share the same p x p solve of the
ridged covariance restricted to the design; covariances with the rest of the
grid come from the PSD (un-ridged) covariance, which carries no noise term.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve

from .criteria import submatrix_cholesky
from .data import Design, Grid
from .model import ModelFit


@dataclass(frozen=True)
class ObservedDesignValues:
    """Noisy measurements taken at the design times."""

    design: Design
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if v.shape != (self.design.p,):
            raise ValueError(
                f"expected {self.design.p} observed values, got shape {v.shape}"
            )


@dataclass(frozen=True)
class RecoveredTrajectory:
    grid: Grid
    values: np.ndarray


def recover_trajectories(model: ModelFit, design: Design, u: np.ndarray) -> np.ndarray:
    """Vectorized trajectory recovery for many subjects at once.

    ``u`` has shape (n, p); the result is (n, G) with one recovered curve per
    row: ``mean + Gamma[grid, t]^T A^{-1} (u - mean[t])``.
    """
    u = np.atleast_2d(np.asarray(u, dtype=float))
    idx = model.design_indices(design)
    if u.shape[1] != idx.size:
        raise ValueError(f"u has {u.shape[1]} columns but the design has {idx.size} points")
    factor = submatrix_cholesky(model, idx)
    gamma = model.cov_psd[idx, :]                      # (p, G)
    coef = cho_solve(factor, gamma)                    # A^{-1} gamma, (p, G)
    centered = u - model.mean[idx][None, :]
    return model.mean[None, :] + centered @ coef


def recover_trajectory(model: ModelFit, obs: ObservedDesignValues) -> RecoveredTrajectory:
    """Best linear predictor of the latent curve from one subject's readings."""
    curve = recover_trajectories(model, obs.design, obs.values[None, :])[0]
    return RecoveredTrajectory(model.grid, curve)


def predict_responses(model: ModelFit, design: Design, u: np.ndarray) -> np.ndarray:
    """Vectorized scalar-response prediction; u has shape (n, p)."""
    if not model.has_response:
        raise ValueError("model has no cross-covariance / response mean; fit with responses")
    u = np.atleast_2d(np.asarray(u, dtype=float))
    idx = model.design_indices(design)
    if u.shape[1] != idx.size:
        raise ValueError(f"u has {u.shape[1]} columns but the design has {idx.size} points")
    factor = submatrix_cholesky(model, idx)
    coef = cho_solve(factor, model.cross_cov[idx])     # A^{-1} C, (p,)
    centered = u - model.mean[idx][None, :]
    return model.mu_y + centered @ coef


def predict_response(model: ModelFit, obs: ObservedDesignValues) -> float:
    """Best linear predictor of the scalar response from one subject's readings."""
    return float(predict_responses(model, obs.design, obs.values[None, :])[0])
