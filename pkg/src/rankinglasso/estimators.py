"""The five estimators compared throughout the package.

``MLE`` is plain maximum likelihood.  The four lasso variants share one
adaptive regularization path: ``LASSO_*`` report the penalized estimate at
the point selected by AIC or BIC, ``HYBRID_*`` the constrained MLE on that
point's grouping.  Selection evaluates the criterion at the constrained
refit of each grouping on the path (``selection="hybrid"``); the older
behaviour of scoring the shrunken lasso fit is ``selection="lasso"``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .lasso import LassoConfig, LassoFit, RankingPath, compute_path, hybrid_fit, select
from .mle import ADAPTIVE_EPS, DivergenceError, MleFit, adaptive_weights, fit_mle
from .model import ModelParams, Tournament


class Estimator(str, enum.Enum):
    MLE = "MLE"
    LASSO_AIC = "LASSO_AIC"
    LASSO_BIC = "LASSO_BIC"
    HYBRID_AIC = "HYBRID_AIC"
    HYBRID_BIC = "HYBRID_BIC"

    @classmethod
    def parse(cls, name) -> "Estimator":
        if isinstance(name, cls):
            return name
        key = str(name).strip().upper().replace("-", "_")
        aliases = {"AIC": "LASSO_AIC", "BIC": "LASSO_BIC",
                   "H_AIC": "HYBRID_AIC", "H_BIC": "HYBRID_BIC"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            valid = ", ".join(e.value for e in cls)
            raise ValueError(f"unknown estimator {name!r} (choose from {valid})") from None

    @property
    def criterion(self) -> str | None:
        return None if self is Estimator.MLE else self.value.split("_")[1].lower()

    @property
    def hybrid(self) -> bool:
        return self.value.startswith("HYBRID")


ALL_ESTIMATORS = tuple(Estimator)


@dataclass
class EstimatorFits:
    """Everything computed for one tournament, keyed by estimator."""

    params: dict[Estimator, ModelParams]
    mle: MleFit | None = None
    path: RankingPath | None = None
    selected: dict[Estimator, LassoFit] | None = None
    fallbacks: int = 0  # MLE fits that needed the ridge


def robust_mle(t: Tournament, fallback_eps: float = ADAPTIVE_EPS) -> tuple[MleFit, bool]:
    """MLE, or the ridge fit when the likelihood has no finite maximum.

    Returns the fit and whether the fallback was used.
    """
    try:
        return fit_mle(t), False
    except DivergenceError:
        return fit_mle(t, ridge_eps=fallback_eps), True


def fit_estimators(t: Tournament, estimators=ALL_ESTIMATORS, cfg: LassoConfig | None = None,
                   selection: str = "hybrid") -> EstimatorFits:
    """Fit the requested estimators, computing the path at most once."""
    ests = [Estimator.parse(e) for e in estimators]
    if selection not in ("hybrid", "lasso"):
        raise ValueError("selection must be 'hybrid' or 'lasso'")
    out = EstimatorFits(params={})
    if Estimator.MLE in ests:
        out.mle, used = robust_mle(t)
        out.fallbacks += used
        out.params[Estimator.MLE] = out.mle.params
    lasso_ests = [e for e in ests if e is not Estimator.MLE]
    if not lasso_ests:
        return out
    w = adaptive_weights(t)
    out.path = compute_path(t, w, cfg)
    out.selected = {}
    for crit in sorted({e.criterion for e in lasso_ests}):
        if selection == "hybrid":
            lasso_fit, refit = select(out.path, crit, hybrid=True, t=t)
        else:
            lasso_fit, _ = select(out.path, crit)
            refit = hybrid_fit(t, lasso_fit) if any(
                e.hybrid and e.criterion == crit for e in lasso_ests) else None
        for e in lasso_ests:
            if e.criterion == crit:
                out.selected[e] = lasso_fit
                out.params[e] = refit.params if e.hybrid else lasso_fit.params
    return out
