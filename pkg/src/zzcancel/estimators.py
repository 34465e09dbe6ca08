"""Estimator-style wrappers (fit / transform / predict, get_params).

The "data" here is a circuit plus a noise model rather than a feature
matrix, so these follow the scikit-learn parameter conventions without
pretending to be pipeline-compatible on arrays, except for
:class:`ReadoutFilter` which does work on distribution rows.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import compensator as comp
from . import tracer
from .circuit import Circuit
from .mitigation import COND_LIMIT, apply_filter, calibration_matrix
from .simulator import NoiseSpec
from .validation import check_circuit, check_distributions, check_noise, check_seed, check_shots


class ReadoutFilter(TransformerMixin, BaseEstimator):
    """Linear readout filter ``v = B^-1 e`` built from per-qubit flip rates.

    ``fit`` takes a sequence of ``(P(1|0), P(0|1))`` pairs, or reads them
    from ``readout_flip`` when called without arguments.  ``transform``
    mitigates each row of a distribution matrix.
    """

    def __init__(self, readout_flip=None, cond_limit: float = COND_LIMIT):
        self.readout_flip = readout_flip
        self.cond_limit = cond_limit

    def fit(self, X=None, y=None):
        flips = X if X is not None else self.readout_flip
        if flips is None:
            raise ValueError("no readout flip rates given")
        self.confusion_ = calibration_matrix(flips)
        self.n_qubits_ = self.confusion_.n
        return self

    def transform(self, X):
        check_is_fitted(self, "confusion_")
        X = check_distributions(X, self.n_qubits_)
        return np.vstack([apply_filter(self.confusion_, row, self.cond_limit).v for row in X])

    def inverse_transform(self, X):
        """Forward model: what a readout of ``X`` looks like through ``B``."""
        check_is_fitted(self, "confusion_")
        X = check_distributions(X, self.n_qubits_)
        return X @ self.confusion_.matrix.T


class _CompensatorBase(BaseEstimator):
    method = "rz"

    def _search(self, c: Circuit, ns: NoiseSpec) -> comp.CompensationPlan:
        raise NotImplementedError

    def fit(self, X: Circuit, y=None):
        """Search a compensation plan for circuit ``X`` under noise ``y``."""
        self.circuit_ = check_circuit(X)
        self.noise_ = check_noise(y)
        check_shots(self.shots)
        check_seed(self.seed)
        self.plan_ = self._search(self.circuit_, self.noise_)
        return self

    def transform(self, X: Circuit | None = None) -> Circuit:
        """Return the circuit with the fitted plan spliced in."""
        check_is_fitted(self, "plan_")
        return comp.insert(self.circuit_ if X is None else check_circuit(X), self.plan_)

    def predict(self, X: Circuit | None = None) -> float:
        """Phase-flip probability of the compensated circuit (exact, unitary noise)."""
        check_is_fitted(self, "plan_")
        return comp._exact_pz(self.transform(X), self.noise_)

    def score(self, X=None, y=None) -> float:
        check_is_fitted(self, "plan_")
        return self.plan_.reduction


class RzCompensator(_CompensatorBase):
    def __init__(self, theta_grid=None, max_insertions: int = 1, shots=None, seed: int = 0):
        self.theta_grid = theta_grid
        self.max_insertions = max_insertions
        self.shots = shots
        self.seed = seed

    def _search(self, c, ns):
        return comp.search_rz(c, ns, self.theta_grid, self.max_insertions, self.shots, self.seed)


class HCNOTCompensator(_CompensatorBase):
    method = "hcnot"

    def __init__(self, companion_rotations=None, max_insertions: int = 1, topology=None, shots=None, seed: int = 0):
        self.companion_rotations = companion_rotations
        self.max_insertions = max_insertions
        self.topology = topology
        self.shots = shots
        self.seed = seed

    def _search(self, c, ns):
        return comp.search_hcnot(
            c, ns, self.companion_rotations, self.max_insertions, self.topology, self.shots, self.seed
        )


class PhaseTracer(BaseEstimator):
    """Trace the phase-fidelity curve and locate a coherent-error valley."""

    def __init__(self, shots=None, seed: int = 0):
        self.shots = shots
        self.seed = seed

    def fit(self, X: Circuit, y=None):
        c, ns = check_circuit(X), check_noise(y)
        shots, seed = check_shots(self.shots), check_seed(self.seed)
        self.curve_ = tracer.trace_curve(c, ns, shots, seed)
        self.reference_ = tracer.reference_curve(c, ns, shots, seed)
        self.valley_ = tracer.detect_valley(self.curve_, self.reference_)
        return self

    def transform(self, X=None) -> np.ndarray:
        """Observed curve values, one per indexed gate."""
        check_is_fitted(self, "curve_")
        return self.curve_.values

    def predict(self, X=None) -> int | None:
        """Valley gate index, or None when no valley clears the threshold."""
        check_is_fitted(self, "curve_")
        return None if self.valley_ is None else self.valley_.valley_index
