"""
Spline Basis Module
Cubic B-spline bases with zero-mean centering and first-difference penalties
"""
import logging
from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import BSpline

from nplcm.middleware.error_handler import ConfigurationError, DataValidationError

logger = logging.getLogger(__name__)

DEGREE = 3


def difference_penalty(n_basis: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    First-order difference operator and its Gram penalty

    Args:
        n_basis: Number of coefficients C (>= 2)

    Returns:
        (delta1 of shape (C-1, C), K_pen = delta1^T delta1)
    """
    if n_basis < 2:
        raise ConfigurationError(f"difference penalty needs C >= 2, got {n_basis}")
    delta1 = np.diff(np.eye(n_basis), axis=0)
    return delta1, delta1.T @ delta1


@dataclass(frozen=True)
class SplineBasis:
    """
    Frozen cubic B-spline basis

    knots holds kappa_0 < ... < kappa_{M+1} (boundary knots included);
    column_means are the centering constants computed on the fitting points.
    shift/scale standardize raw covariate values before evaluation.
    """
    knots: np.ndarray
    column_means: np.ndarray
    shift: float = 0.0
    scale: float = 1.0

    @property
    def n_basis(self) -> int:
        return len(self.knots) + DEGREE - 1

    @property
    def n_interior(self) -> int:
        return len(self.knots) - 2

    @property
    def augmented_knots(self) -> np.ndarray:
        lo, hi = self.knots[0], self.knots[-1]
        return np.concatenate([[lo] * DEGREE, self.knots, [hi] * DEGREE])

    @property
    def penalty(self) -> np.ndarray:
        return difference_penalty(self.n_basis)[1]

    @property
    def delta1(self) -> np.ndarray:
        return difference_penalty(self.n_basis)[0]

    def standardize(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.shift) / self.scale

    def raw(self, z) -> np.ndarray:
        """Uncentered basis rows at standardized points; out-of-range points are clamped"""
        z = np.atleast_1d(np.asarray(z, dtype=float))
        lo, hi = self.knots[0], self.knots[-1]
        outside = (z < lo) | (z > hi)
        if outside.any():
            logger.warning(
                f"{int(outside.sum())} prediction point(s) outside [{lo:.4g}, {hi:.4g}] clamped to the boundary"
            )
            z = np.clip(z, lo, hi)
        return BSpline.design_matrix(z, self.augmented_knots, DEGREE).toarray()

    def evaluate(self, x) -> np.ndarray:
        """Centered basis rows for raw covariate values"""
        return self.raw(self.standardize(x)) - self.column_means

    def to_dict(self) -> Dict[str, Any]:
        return {
            'knots': self.knots.tolist(),
            'column_means': self.column_means.tolist(),
            'shift': self.shift,
            'scale': self.scale,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'SplineBasis':
        return cls(
            knots=np.asarray(data['knots'], dtype=float),
            column_means=np.asarray(data['column_means'], dtype=float),
            shift=float(data['shift']),
            scale=float(data['scale']),
        )


def build_basis(x, df: int, shift: float = 0.0, scale: float = 1.0) -> SplineBasis:
    """
    Build a centered cubic B-spline basis with df = C columns

    Interior knots (C - 4 of them) are equally spaced between the observed
    minimum and maximum of the standardized values.

    Args:
        x: Raw covariate values of the fitting points
        df: Number of basis functions C (>= 4)
        shift: Standardization location applied before evaluation
        scale: Standardization scale applied before evaluation
    """
    if df < 4:
        raise ConfigurationError(f"cubic B-spline basis needs df >= 4, got {df}")
    z = (np.asarray(x, dtype=float) - shift) / scale
    if z.size < 2 or np.unique(z).size < 2:
        raise DataValidationError("degenerate covariate range for spline basis")
    knots = np.linspace(z.min(), z.max(), df - 2)
    basis = SplineBasis(knots=knots, column_means=np.zeros(df), shift=shift, scale=scale)
    means = basis.raw(z).mean(axis=0)
    return SplineBasis(knots=knots, column_means=means, shift=shift, scale=scale)


def evaluate_additive(basis_list: Sequence[np.ndarray],
                      linear_columns: Optional[np.ndarray],
                      coeffs: Tuple[Sequence[np.ndarray], Optional[np.ndarray]]) -> np.ndarray:
    """
    Additive predictor sum_j B_j beta_j + x^T gamma

    Args:
        basis_list: Evaluated (n x C_j) basis matrices
        linear_columns: (n x p) linear design or None
        coeffs: (spline coefficient vectors, linear coefficient vector)
    """
    spline_coefs, linear_coefs = coeffs
    if len(spline_coefs) != len(basis_list):
        raise ConfigurationError(
            f"{len(basis_list)} spline terms but {len(spline_coefs)} coefficient blocks"
        )
    n_rows = None
    for matrix in basis_list:
        n_rows = matrix.shape[0]
    if linear_columns is not None and linear_columns.size:
        n_rows = linear_columns.shape[0]
    if n_rows is None:
        raise ConfigurationError("additive predictor has no terms")

    total = np.zeros(n_rows)
    for matrix, beta in zip(basis_list, spline_coefs):
        beta = np.asarray(beta, dtype=float)
        if matrix.shape != (n_rows, beta.size):
            raise ConfigurationError(
                f"basis of shape {matrix.shape} does not conform to {beta.size} coefficients"
            )
        total += matrix @ beta
    if linear_columns is not None and linear_columns.size:
        gamma = np.atleast_1d(np.asarray(linear_coefs, dtype=float))
        if linear_columns.shape[1] != gamma.size:
            raise ConfigurationError(
                f"{linear_columns.shape[1]} linear columns but {gamma.size} coefficients"
            )
        total += linear_columns @ gamma
    return total
