"""
Parameter Containers
Rates, regression coefficients, smoothing state and latent allocations
"""
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

ETIOLOGY = 'etiology'
CONTROL = 'control'
CASE = 'case'
SIDES = (CONTROL, CASE)
FAMILIES = (ETIOLOGY, CONTROL, CASE)


@dataclass
class RateParams:
    """TPR matrix theta (J x K), FPR matrix psi (J x K), SS TPRs theta_ss (J_ss,)"""
    theta: np.ndarray
    psi: np.ndarray
    theta_ss: np.ndarray = field(default_factory=lambda: np.empty(0))

    def copy(self) -> 'RateParams':
        return RateParams(self.theta.copy(), self.psi.copy(), self.theta_ss.copy())


@dataclass
class RegressionParams:
    """
    Etiology and subclass-weight regression coefficients

    etiology is L x P_x (multinomial logit); in Dirichlet mode etiology_table
    holds one PEF row per case stratum instead. control and case are
    (K-1) x P_w; the subclass intercepts mu = u @ mu_star are shared by both
    sides.
    """
    etiology: np.ndarray
    control: np.ndarray
    case: np.ndarray
    mu_star: np.ndarray
    tau0: np.ndarray
    u: np.ndarray
    etiology_table: Optional[np.ndarray] = None
    etiology_strata: Optional[np.ndarray] = None

    @property
    def mu(self) -> np.ndarray:
        return self.u @ self.mu_star

    @property
    def n_subclasses(self) -> int:
        return self.mu_star.shape[0] + 1

    def side(self, side: str) -> np.ndarray:
        return self.control if side == CONTROL else self.case

    def copy(self) -> 'RegressionParams':
        return RegressionParams(
            etiology=self.etiology.copy(), control=self.control.copy(), case=self.case.copy(),
            mu_star=self.mu_star.copy(), tau0=self.tau0.copy(), u=self.u.copy(),
            etiology_table=None if self.etiology_table is None else self.etiology_table.copy(),
            etiology_strata=self.etiology_strata,
        )


@dataclass
class SmoothingState:
    """
    Smoothing precisions tau and indicators xi per family, shape
    (components, spline terms); rho holds the inclusion probability per block
    family ('etiology' and 'subclass').
    """
    tau: Dict[str, np.ndarray]
    xi: Dict[str, np.ndarray]
    rho: Dict[str, float]

    def copy(self) -> 'SmoothingState':
        return SmoothingState(
            tau={k: v.copy() for k, v in self.tau.items()},
            xi={k: v.copy() for k, v in self.xi.items()},
            rho=dict(self.rho),
        )


@dataclass
class ParamState:
    rates: RateParams
    regression: RegressionParams
    smoothing: Optional[SmoothingState] = None

    def copy(self) -> 'ParamState':
        return ParamState(
            self.rates.copy(), self.regression.copy(),
            None if self.smoothing is None else self.smoothing.copy(),
        )


@dataclass
class LatentState:
    """
    Latent allocations, stored 0-based

    case_class and case_subclass follow the case rows of the dataset,
    control_subclass the control rows.
    """
    case_class: np.ndarray
    case_subclass: np.ndarray
    control_subclass: np.ndarray

    def disease_class(self, y: np.ndarray) -> np.ndarray:
        """Full-length I: 0 for controls, 1..L for cases"""
        out = np.zeros(len(y), dtype=int)
        out[y == 1] = self.case_class + 1
        return out

    def subclass(self, y: np.ndarray) -> np.ndarray:
        """Full-length Z in 1..K"""
        out = np.zeros(len(y), dtype=int)
        out[y == 1] = self.case_subclass + 1
        out[y == 0] = self.control_subclass + 1
        return out

    def copy(self) -> 'LatentState':
        return LatentState(self.case_class.copy(), self.case_subclass.copy(),
                           self.control_subclass.copy())
