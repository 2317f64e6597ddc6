"""Estimator-style wrappers around the probe optimizer.

``OptimalPrecisionModel`` follows the fit/predict protocol: ``fit`` runs the
direct optimization over a range of photon numbers and fits the large-N
extrapolation, ``predict`` returns the optimal phase uncertainty for any
photon number.  Optimizer results can be routed through a cache file.
"""
from __future__ import annotations

import logging
from dataclasses import replace

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, column_or_1d

from .optimize import (
    ExtrapolationFit,
    OptimizationResult,
    OptimizerOptions,
    fit_extrapolation,
    optimal_phase_uncertainty,
    optimize_state,
    precision_ratio,
)
from .store import CacheRecord, FitRecord, cache_get, cache_put, fit_get, fit_put

logger = logging.getLogger(__name__)


def make_solver(options=None, cache_path=None):
    """``solve(n, eta)`` that consults and fills the cache at ``cache_path``."""
    opts = options or OptimizerOptions()
    fingerprint = opts.fingerprint()

    def solve(n, eta):
        if cache_path is not None:
            rec = cache_get(n, eta, fingerprint, cache_path)
            if rec is not None:
                return OptimizationResult(
                    n=rec.n, eta=rec.eta, coeffs=np.array(rec.coeffs), qfi=rec.qfi,
                    delta_phi=1.0 / np.sqrt(rec.qfi), iterations=0, restarts_used=0,
                    converged=rec.converged,
                )
        result = optimize_state(n, eta, opts)
        if cache_path is not None:
            cache_put(
                CacheRecord(result.n, eta, tuple(result.coeffs), result.qfi, result.converged, fingerprint),
                cache_path,
            )
        return result

    return solve


def _photon_numbers(X):
    X = check_array(X, ensure_2d=False, dtype=float)
    return column_or_1d(X) if X.ndim == 2 else X


class ExtrapolationRegressor(RegressorMixin, BaseEstimator):
    """Fit ``dphi(N)`` with the large-N loss model; X holds photon numbers."""

    def __init__(self, eta=0.62):
        self.eta = eta

    def fit(self, X, y):
        n = _photon_numbers(X)
        y = column_or_1d(check_array(y, ensure_2d=False, dtype=float))
        if n.shape != y.shape:
            raise ValueError("X and y have inconsistent lengths")
        self.fit_ = fit_extrapolation(np.column_stack([n, y]), self.eta)
        self.a_, self.b_, self.c_ = self.fit_.a, self.fit_.b, self.fit_.c
        self.max_relative_residual_ = self.fit_.max_relative_residual
        return self

    def predict(self, X):
        check_is_fitted(self, "fit_")
        return self.fit_.predict(_photon_numbers(X))


class OptimalPrecisionModel(BaseEstimator):
    """Optimal N-photon phase uncertainty under symmetric loss.

    Parameters
    ----------
    eta : float
        Power transmission of both arms, in (0, 1).
    direct_cap : int
        Photon numbers up to this value are optimized directly; larger ones
        use the extrapolation.
    fit_range : (int, int) or None
        Inclusive range of photon numbers used by ``fit`` when ``X`` is not
        given; defaults to ``(direct_cap // 2, direct_cap)``.
    cache_path : path or None
        JSON-lines cache for optimizer results and fits.
    """

    def __init__(
        self, eta=0.62, direct_cap=60, fit_range=None, restarts=8, tolerance=1e-9,
        max_evaluations=100_000, race_iterations=60, seed=0, cache_path=None,
    ):
        self.eta = eta
        self.direct_cap = direct_cap
        self.fit_range = fit_range
        self.restarts = restarts
        self.tolerance = tolerance
        self.max_evaluations = max_evaluations
        self.race_iterations = race_iterations
        self.seed = seed
        self.cache_path = cache_path

    def _options(self):
        return OptimizerOptions(
            restarts=self.restarts, tolerance=self.tolerance, max_evaluations=self.max_evaluations,
            race_iterations=self.race_iterations, seed=self.seed,
        )

    def _check_params(self):
        if not 0.0 < self.eta < 1.0:
            raise ValueError(f"eta must lie in (0, 1), got {self.eta!r}")
        if int(self.direct_cap) != self.direct_cap or self.direct_cap < 3:
            raise ValueError("direct_cap must be an integer >= 3")

    def fit(self, X=None, y=None):
        """Optimize at the photon numbers in ``X`` (or ``fit_range``) and fit the tail model."""
        self._check_params()
        options = self._options()
        self.solver_ = make_solver(options, self.cache_path)
        if X is None:
            lo, hi = self.fit_range or (self.direct_cap // 2, self.direct_cap)
            ns = np.arange(int(lo), int(hi) + 1)
        else:
            ns = _photon_numbers(X)
            if np.any(ns != np.round(ns)):
                raise ValueError("fit photon numbers must be integers")
            ns = ns.astype(int)
        lo, hi = int(ns.min()), int(ns.max())
        fingerprint = options.fingerprint()
        cached = None
        if self.cache_path is not None and X is None:
            cached = fit_get(self.eta, lo, hi, fingerprint, self.cache_path)
        self.results_ = {}
        if cached is not None:
            self.extrapolation_ = ExtrapolationFit(
                cached.a, cached.b, cached.c, float(self.eta), (lo, hi), cached.max_relative_residual
            )
            return self
        for n in ns:
            self.results_[int(n)] = self.solver_(int(n), self.eta)
        points = [(n, self.results_[int(n)].delta_phi) for n in ns]
        self.extrapolation_ = fit_extrapolation(points, self.eta)
        logger.info(
            "extrapolation eta=%.6f N=%d..%d a=%.6g b=%.6g c=%.6g max_rel_residual=%.3g",
            self.eta, lo, hi, self.extrapolation_.a, self.extrapolation_.b, self.extrapolation_.c,
            self.extrapolation_.max_relative_residual,
        )
        if self.cache_path is not None and X is None:
            f = self.extrapolation_
            fit_put(
                FitRecord(self.eta, lo, hi, f.a, f.b, f.c, f.max_relative_residual, fingerprint),
                self.cache_path, overwrite=True,
            )
        return self

    def predict_with_path(self, X):
        check_is_fitted(self, "extrapolation_")
        return [
            optimal_phase_uncertainty(
                float(n), self.eta, self.extrapolation_, self.direct_cap, solver=self.solver_
            )
            for n in _photon_numbers(X)
        ]

    def predict(self, X):
        return np.array([p.delta_phi for p in self.predict_with_path(X)])

    def ratio(self, n_mean):
        """Optimal-to-CSV precision ratio at mean photon number ``n_mean``."""
        check_is_fitted(self, "extrapolation_")
        return precision_ratio(
            n_mean, self.eta, self.extrapolation_, self.direct_cap, solver=self.solver_
        )


def ratio_grid(n_values, loss_values, options=None, direct_cap=60, fit_range=None, cache_path=None):
    """Precision ratios on the product grid; rows ordered by (n index, loss index)."""
    n_values = [float(n) for n in np.atleast_1d(n_values)]
    loss_values = [float(x) for x in np.atleast_1d(loss_values)]
    if not n_values or not loss_values:
        raise ValueError("grids must be non-empty")
    if any(not 0.0 < x < 1.0 for x in loss_values):
        raise ValueError("losses must lie in (0, 1)")
    opts = options or OptimizerOptions()
    by_loss = []
    for loss in loss_values:
        model = OptimalPrecisionModel(
            eta=1.0 - loss, direct_cap=direct_cap, fit_range=fit_range, restarts=opts.restarts,
            tolerance=opts.tolerance, max_evaluations=opts.max_evaluations,
            race_iterations=opts.race_iterations, seed=opts.seed, cache_path=cache_path,
        ).fit()
        by_loss.append([replace(model.ratio(n), loss=loss) for n in n_values])
    return [by_loss[j][i] for i in range(len(n_values)) for j in range(len(loss_values))]
