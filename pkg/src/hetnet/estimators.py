"""scikit-learn style wrappers around the core routines.

The functional API in :mod:`hetnet.local`, :mod:`hetnet.stability` and
:mod:`hetnet.glv` is the primary interface. These classes expose the same
computations through ``fit``/``transform``/``predict`` so they compose with
pipelines and ``get_params``/``set_params``. None of them learns anything
from data: ``fit`` validates parameters and records shapes.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import glv, local, stability
from .network import EquilibriumSpec, NetworkSpec, principal_sequence
from .validation import check_in_section, check_points, check_rates


class FlightTimeTransformer(TransformerMixin, BaseEstimator):
    """Map expanding coordinates to ``[T, tau_1, ..., tau_u]``.

    Parameters
    ----------
    lambdas : sequence of float
        Expanding rates, strictly descending.

    Examples
    --------
    >>> FlightTimeTransformer([2.0]).fit_transform([[0.1]]).round(6).tolist()
    [[1.151293, 1.0]]
    """

    def __init__(self, lambdas=(1.0,)):
        self.lambdas = lambdas

    def fit(self, X=None, y=None):
        self.lambdas_ = check_rates(self.lambdas)
        self.n_features_in_ = self.lambdas_.size
        return self

    def transform(self, X):
        check_is_fitted(self, "lambdas_")
        X = check_points(X, self.n_features_in_)
        T = local.flight_time_batch(X, self.lambdas_)
        return np.column_stack([T, local.tau_batch(X, self.lambdas_, T)])


class LocalMapTransformer(TransformerMixin, BaseEstimator):
    """Local passage past one saddle: rows ``[x, y]`` become ``[phi, y_out]``.

    ``y_out = exp(-lambda_c T) y`` are the contracted stable coordinates at
    the exit time.
    """

    def __init__(self, expanding=(1.0,), contracting=(1.0,)):
        self.expanding = expanding
        self.contracting = contracting

    def fit(self, X=None, y=None):
        self.expanding_ = check_rates(self.expanding, "expanding")
        self.contracting_ = check_rates(self.contracting[::-1], "contracting")[::-1]
        self.n_features_in_ = self.expanding_.size + self.contracting_.size
        return self

    def transform(self, X):
        check_is_fitted(self, "expanding_")
        x, y = check_in_section(X, self.expanding_.size, self.contracting_.size)
        T = local.flight_time_batch(x, self.expanding_)
        phi = local.tau_batch(x, self.expanding_, T)
        return np.column_stack([phi, y * np.exp(-np.outer(T, self.contracting_))])


class ReturnMapTransformer(TransformerMixin, BaseEstimator):
    """Apply the return map ``n_loops`` times to in-section points at ``p1``.

    Parameters
    ----------
    network : NetworkSpec
    maps : dict of TransitionMapSpec, optional
        Keyed by source label; defaults to generic constant maps.
    n_loops : int
    """

    def __init__(self, network: NetworkSpec | None = None, maps=None, n_loops: int = 1):
        self.network = network
        self.maps = maps
        self.n_loops = n_loops

    def fit(self, X=None, y=None):
        if self.network is None:
            raise ValueError("network is required")
        if self.n_loops < 1:
            raise ValueError("n_loops must be at least 1")
        self.sequence_ = principal_sequence(self.network)
        self.maps_ = self.maps if self.maps is not None else local.default_transition_maps(self.network)
        first = self.network.equilibrium(self.sequence_[0])
        self.u_, self.s_ = first.u, first.s
        self.n_features_in_ = first.n
        return self

    def transform(self, X):
        check_is_fitted(self, "maps_")
        x, y = check_in_section(X, self.u_, self.s_)
        out = np.empty((x.shape[0], self.n_features_in_))
        for i, (xi, yi) in enumerate(zip(x, y)):
            p = local.InSectionPoint(self.sequence_[0], xi, yi)
            for _ in range(self.n_loops):
                p = local.return_map(p, self.network, self.maps_, sequence=self.sequence_)
            out[i] = np.concatenate([p.x, p.y])
        return out


class WedgeClassifier(BaseEstimator):
    """Predict whether expanding coordinates lie in the ``eps``-wedge.

    Also estimates the wedge-complement ratio of a ``delta``-disc by Monte
    Carlo in :meth:`fit` when ``delta`` is given.
    """

    def __init__(self, lambdas=(2.0, 1.0), eps: float = 0.5, delta: float | None = None,
                 n_samples: int = stability.DEFAULT_SAMPLES, seed: int = 0, n_jobs: int | None = 1):
        self.lambdas = lambdas
        self.eps = eps
        self.delta = delta
        self.n_samples = n_samples
        self.seed = seed
        self.n_jobs = n_jobs

    def fit(self, X=None, y=None):
        self.lambdas_ = check_rates(self.lambdas)
        if not 0.0 < self.eps < 1.0:
            raise ValueError("eps must lie in (0, 1)")
        self.n_features_in_ = self.lambdas_.size
        self.classes_ = np.array([False, True])
        self.estimate_ = None
        if self.delta is not None:
            self.estimate_ = stability.estimate_wedge_complement_ratio(
                self.lambdas_, self.eps, self.delta, self.n_samples, self.seed, n_jobs=self.n_jobs
            )
        return self

    def predict(self, X):
        check_is_fitted(self, "lambdas_")
        X = check_points(X, self.n_features_in_)
        if self.lambdas_.size == 1:
            return np.any(X != 0, axis=1)
        defect = local.wedge_defect_batch(X, self.lambdas_)
        return defect < self.eps**2


class GLVChannelClassifier(BaseEstimator):
    """Label initial conditions of a GLV system as following the principal
    cycle (``1``) or not (``0``).

    Parameters mirror :func:`hetnet.glv.channel_experiment`. ``fit`` derives
    the network and the tube geometry; :meth:`predict` integrates each row.
    """

    def __init__(self, growth=None, interaction=None, labels=None, eps: float = 0.2, delta: float = 0.1,
                 t_max: float = 2000.0, rel_tol: float = 1e-9, abs_tol: float = 1e-12, max_step: float = 1.0):
        self.growth = growth
        self.interaction = interaction
        self.labels = labels
        self.eps = eps
        self.delta = delta
        self.t_max = t_max
        self.rel_tol = rel_tol
        self.abs_tol = abs_tol
        self.max_step = max_step

    def fit(self, X=None, y=None):
        self.system_ = glv.GLVSystem(self.growth, self.interaction)
        self.network_ = glv.network_from_glv(self.system_, self.labels)
        self.geometry_ = glv.channel_geometry(self.system_, self.network_, self.eps, self.delta, self.labels)
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = self.system_.dim
        return self

    def outcomes(self, X) -> list[str]:
        check_is_fitted(self, "geometry_")
        X = check_points(X, self.n_features_in_)
        return glv._classify_many(self.system_, self.geometry_, X, self.t_max, self.rel_tol, self.abs_tol,
                                  self.max_step)

    def predict(self, X):
        return np.array([int(o == "following") for o in self.outcomes(X)])

    def score(self, X, y=None) -> float:
        """Accuracy against ``y``, or the following fraction when ``y`` is omitted."""
        pred = self.predict(X)
        if y is None:
            return float(pred.mean())
        return float(np.mean(pred == np.asarray(y)))


def equilibrium_from_estimator(est: LocalMapTransformer, label: str = "node") -> EquilibriumSpec:
    check_is_fitted(est, "expanding_")
    return EquilibriumSpec(label, tuple(est.expanding_), tuple(est.contracting_))


__all__ = [
    "FlightTimeTransformer",
    "LocalMapTransformer",
    "ReturnMapTransformer",
    "WedgeClassifier",
    "GLVChannelClassifier",
    "equilibrium_from_estimator",
]
