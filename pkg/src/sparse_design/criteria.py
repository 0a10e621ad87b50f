"""Design criteria, their normalized R^2 forms, and the feasibility gate.

The trajectory criterion integrates the explained pointwise variance
``gamma(t)^T A^{-1} gamma(t)`` over the grid (trapezoid rule), where A is the
ridged covariance restricted to the design and gamma comes from the PSD
covariance.  The response criterion is the single quadratic form
``C^T A^{-1} C`` of the cross-covariance at the design points.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .data import Design
from .errors import ConditioningError
from .model import ModelFit

# delta0 default scale: 1e-8 of the mean ridged diagonal.
_DELTA0_REL = 1e-8

TARGETS = ("trajectory", "response")


@dataclass(frozen=True)
class FeasibilityPolicy:
    """Absolute floor on the smallest eigenvalue of design submatrices."""

    delta0: float

    def __post_init__(self) -> None:
        if not self.delta0 > 0:
            raise ValueError(f"delta0 must be positive, got {self.delta0}")


def default_delta0(model: ModelFit) -> float:
    return _DELTA0_REL * float(np.trace(model.cov_ridged)) / model.grid.size


def default_policy(model: ModelFit) -> FeasibilityPolicy:
    return FeasibilityPolicy(default_delta0(model))


@dataclass(frozen=True)
class CriterionResult:
    """Raw criterion value plus its normalized coefficient of determination.

    Infeasible designs carry ``raw = r2 = -inf`` so they order strictly below
    every feasible design.  Estimated inputs can push raw/normalizer above 1;
    the stored r2 is clamped to 1 (with a warning) while raw is preserved.
    """

    target: str
    raw: float
    r2: float
    normalizer: float
    feasible: bool
    min_eig: float


class Feasibility(NamedTuple):
    feasible: bool
    min_eig: float


class DesignEvaluator:
    """Precomputed state for evaluating many designs against one model.

    Pure and reentrant: criterion evaluations for different designs may run
    concurrently.
    """

    def __init__(self, model: ModelFit, target: str, policy: FeasibilityPolicy | None = None):
        if target not in TARGETS:
            raise ValueError(f"target must be one of {TARGETS}, got {target!r}")
        if target == "response" and model.cross_cov is None:
            raise ValueError("response criterion needs a model with a cross-covariance")
        self.model = model
        self.target = target
        self.policy = policy or default_policy(model)
        self._ridged = model.cov_ridged
        w = model.grid.trapezoid_weights()
        if target == "trajectory":
            # raw(t-set) = tr(A^{-1} Q[t-set, t-set]) with Q = Gamma W Gamma.
            self._q = (model.cov_psd * w[None, :]) @ model.cov_psd
            self.normalizer = model.var_x_integral
        else:
            self._c = model.cross_cov
            if model.var_y is None:
                raise ValueError("response criterion needs var_Y on the model")
            self.normalizer = float(model.var_y)
        # With a PSD covariance the submatrix spectrum is bounded below by the
        # ridge, so the gate can be decided once for every design.
        self._always_feasible = model.sigma2_new >= self.policy.delta0

    # -- batched evaluation ---------------------------------------------------

    def raw_batch(self, idx: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Raw criterion values for an (M, p) index array; -inf if infeasible."""
        idx = np.asarray(idx, dtype=int)
        if idx.ndim == 1:
            idx = idx[None, :]
        m, p = idx.shape
        a = self._ridged[idx[:, :, None], idx[:, None, :]]
        if self._always_feasible:
            feasible = np.ones(m, dtype=bool)
        else:
            min_eig = np.linalg.eigvalsh(a)[:, 0]
            feasible = min_eig >= self.policy.delta0
        raw = np.full(m, -np.inf)
        ok = np.flatnonzero(feasible)
        if ok.size:
            if self.target == "trajectory":
                qs = self._q[idx[ok, :, None], idx[ok, None, :]]
                solved = np.linalg.solve(a[ok], qs)
                raw[ok] = np.einsum("mii->m", solved)
            else:
                c = self._c[idx[ok]]
                solved = np.linalg.solve(a[ok], c[:, :, None])[:, :, 0]
                raw[ok] = np.einsum("mi,mi->m", c, solved)
        return raw, feasible

    # -- single-design evaluation ----------------------------------------------

    def feasibility(self, design: Design) -> Feasibility:
        idx = self.model.design_indices(design)
        a = self._ridged[np.ix_(idx, idx)]
        min_eig = float(np.linalg.eigvalsh(a)[0])
        return Feasibility(min_eig >= self.policy.delta0, min_eig)

    def evaluate(self, design: Design) -> CriterionResult:
        idx = np.sort(self.model.design_indices(design))
        a = self._ridged[np.ix_(idx, idx)]
        min_eig = float(np.linalg.eigvalsh(a)[0])
        if min_eig < self.policy.delta0:
            return CriterionResult(self.target, -np.inf, -np.inf, self.normalizer, False, min_eig)
        if self.target == "trajectory":
            qs = self._q[np.ix_(idx, idx)]
            raw = float(np.trace(np.linalg.solve(a, qs)))
        else:
            c = self._c[idx]
            raw = float(c @ np.linalg.solve(a, c))
        r2 = raw / self.normalizer if self.normalizer > 0 else np.inf
        if r2 > 1.0 + 1e-10:
            warnings.warn(
                f"{self.target} R^2 = {r2:.6g} exceeds 1 under estimated inputs; "
                "reporting it clamped to 1 (raw value preserved)"
            )
        return CriterionResult(self.target, raw, min(r2, 1.0), self.normalizer, True, min_eig)


def criterion_trajectory(
    model: ModelFit, design: Design, policy: FeasibilityPolicy | None = None
) -> CriterionResult:
    """Integrated explained-variance criterion for trajectory recovery."""
    return DesignEvaluator(model, "trajectory", policy).evaluate(design)


def criterion_response(
    model: ModelFit, design: Design, policy: FeasibilityPolicy | None = None
) -> CriterionResult:
    """Explained response variance criterion for scalar prediction."""
    return DesignEvaluator(model, "response", policy).evaluate(design)


def feasibility(
    model: ModelFit, design: Design, policy: FeasibilityPolicy | None = None
) -> Feasibility:
    """Smallest eigenvalue of the ridged design submatrix versus delta0."""
    policy = policy or default_policy(model)
    idx = model.design_indices(design)
    a = model.cov_ridged[np.ix_(idx, idx)]
    min_eig = float(np.linalg.eigvalsh(a)[0])
    return Feasibility(min_eig >= policy.delta0, min_eig)


def submatrix_cholesky(model: ModelFit, idx: np.ndarray, delta0: float | None = None):
    """Cholesky factor of the ridged submatrix, gated on conditioning.

    Shared by the predictors; raises ConditioningError instead of silently
    regularizing.
    """
    from scipy.linalg import cho_factor

    a = model.cov_ridged[np.ix_(idx, idx)]
    floor = default_delta0(model) if delta0 is None else delta0
    min_eig = float(np.linalg.eigvalsh(a)[0])
    if min_eig < floor:
        raise ConditioningError(
            f"design submatrix is near-singular (min eigenvalue {min_eig:.3e} < {floor:.3e}); "
            "increase the ridge or change the design"
        )
    try:
        return cho_factor(a, lower=True)
    except np.linalg.LinAlgError as exc:
        raise ConditioningError(f"design submatrix factorization failed: {exc}") from None
