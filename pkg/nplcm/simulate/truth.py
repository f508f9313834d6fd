"""
Truth Configuration
JSON-serializable data-generating mechanisms built from additive effect terms
"""
import logging
from typing import Any, Dict, List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.special import expit, softmax

from nplcm.data.schemas import CauseSpec, VersionedModel
from nplcm.middleware.error_handler import ConfigurationError
from nplcm.models.likelihood import stick_break

logger = logging.getLogger(__name__)

SEASONAL_FREQUENCY = 8.0 * np.pi / 7.0
SEASONAL_SHIFT = 0.5

RateSpec = Union[float, List[float], List[List[float]]]


class EffectTerm(BaseModel):
    """
    One additive term of a true linear predictor

    constant: coefficient
    indicator: coefficient * 1{stratum == level}
    sine: coefficient * sin(frequency * (t - shift))
    logistic_ramp: coefficient * expit(rate * t) + offset
    """
    model_config = ConfigDict(extra='forbid')

    kind: Literal['constant', 'indicator', 'sine', 'logistic_ramp']
    coefficient: float = 1.0
    level: Optional[int] = Field(None, ge=1)
    frequency: float = SEASONAL_FREQUENCY
    shift: float = SEASONAL_SHIFT
    rate: float = 3.0
    offset: float = 0.0

    @model_validator(mode='after')
    def _check_level(self):
        if self.kind == 'indicator' and self.level is None:
            raise ValueError("indicator term requires a stratum level")
        return self

    def evaluate(self, stratum: np.ndarray, t: np.ndarray) -> np.ndarray:
        if self.kind == 'constant':
            return np.full(stratum.shape, self.coefficient, dtype=float)
        if self.kind == 'indicator':
            return self.coefficient * (stratum == self.level).astype(float)
        if self.kind == 'sine':
            return self.coefficient * np.sin(self.frequency * (t - self.shift))
        return self.coefficient * expit(self.rate * t) + self.offset


class LinkTruth(BaseModel):
    """
    True class probabilities as functions of (stratum, t)

    stick_breaking: n_classes - 1 logit predictors, logistic link, stick-breaking
    softmax: n_classes predictors
    table: one probability row per stratum level
    """
    model_config = ConfigDict(extra='forbid')

    link: Literal['stick_breaking', 'softmax', 'table']
    predictors: List[List[EffectTerm]] = Field(default_factory=list)
    table: Optional[List[List[float]]] = None

    @model_validator(mode='after')
    def _check_table(self):
        if self.link == 'table':
            if not self.table:
                raise ValueError("table link requires a probability table")
            for row in self.table:
                if min(row) < 0 or abs(sum(row) - 1.0) > 1e-9:
                    raise ValueError("each table row must be a probability vector")
        return self

    def n_classes(self) -> int:
        if self.link == 'table':
            return len(self.table[0])
        if self.link == 'softmax':
            return len(self.predictors)
        return len(self.predictors) + 1

    def linear_predictors(self, stratum: np.ndarray, t: np.ndarray) -> np.ndarray:
        out = np.zeros((stratum.size, len(self.predictors)))
        for c, terms in enumerate(self.predictors):
            for term in terms:
                out[:, c] += term.evaluate(stratum, t)
        return out

    def probabilities(self, stratum, t) -> np.ndarray:
        """(n, n_classes) probabilities; stratum levels are 1-based"""
        stratum = np.atleast_1d(np.asarray(stratum, dtype=int))
        t = np.broadcast_to(np.asarray(t, dtype=float), stratum.shape)
        if self.link == 'table':
            table = np.asarray(self.table, dtype=float)
            if stratum.min() < 1 or stratum.max() > table.shape[0]:
                raise ConfigurationError("stratum level outside the truth table")
            return table[stratum - 1]
        eta = self.linear_predictors(stratum, t)
        if self.link == 'softmax':
            return softmax(eta, axis=1)
        if eta.shape[1] == 0:
            return np.ones((stratum.size, 1))
        return stick_break(expit(eta))


class CovariateRule(BaseModel):
    """
    Subjects per stratum and the enrollment-date rule

    Dates are uniform integers on [0, window_days), standardized over all
    subjects; strata emit dummy columns for levels >= 2.
    """
    model_config = ConfigDict(extra='forbid')

    n_strata: int = Field(1, ge=1)
    cases_per_stratum: int = Field(..., ge=1)
    controls_per_stratum: int = Field(..., ge=1)
    dates: bool = False
    window_days: int = Field(300, ge=2)


class TruthConfig(VersionedModel):
    """Complete data-generating mechanism for one simulated study"""
    name: str = 'custom'
    pathogens: List[str]
    causes: CauseSpec
    k_subclasses: int = Field(1, ge=1)
    covariates: CovariateRule
    etiology: LinkTruth
    control_subclass: LinkTruth = Field(default_factory=lambda: LinkTruth(link='stick_breaking'))
    case_subclass: LinkTruth = Field(default_factory=lambda: LinkTruth(link='stick_breaking'))
    theta: RateSpec
    psi: RateSpec
    ss_pathogens: List[str] = Field(default_factory=list)
    theta_ss: Union[float, List[float]] = 0.1
    seed: int = Field(0, ge=0)
    metadata: Dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode='after')
    def _check_shapes(self):
        L, K = self.causes.n_causes, self.k_subclasses
        if self.etiology.n_classes() != L:
            raise ValueError(f"etiology truth has {self.etiology.n_classes()} classes, causes list {L}")
        if self.etiology.link == 'table' and len(self.etiology.table) != self.covariates.n_strata:
            raise ValueError("etiology table needs one row per stratum")
        for side in (self.control_subclass, self.case_subclass):
            if side.link != 'stick_breaking' or side.n_classes() != K:
                raise ValueError(f"subclass truths need K-1 = {K - 1} stick-breaking predictors")
        unknown = set(self.ss_pathogens) - set(self.pathogens)
        if unknown:
            raise ValueError(f"silver-standard pathogens not measured: {sorted(unknown)}")
        for name in ('theta', 'psi'):
            self.rate_matrix(name)
        return self

    def rate_matrix(self, name: str) -> np.ndarray:
        """theta or psi as a J x K matrix; scalars and per-subclass rows broadcast"""
        J, K = len(self.pathogens), self.k_subclasses
        value = np.asarray(getattr(self, name), dtype=float)
        if value.ndim == 0:
            value = np.full((J, K), float(value))
        elif value.ndim == 1:
            if value.size != K:
                raise ValueError(f"{name} row must have K = {K} entries")
            value = np.tile(value, (J, 1))
        if value.shape != (J, K) or np.any((value < 0) | (value > 1)):
            raise ValueError(f"{name} must be a J x K matrix of probabilities")
        return value

    def theta_ss_vector(self) -> np.ndarray:
        value = np.asarray(self.theta_ss, dtype=float)
        if value.ndim == 0:
            return np.full(len(self.ss_pathogens), float(value))
        if value.size != len(self.ss_pathogens):
            raise ConfigurationError("theta_ss needs one entry per silver-standard pathogen")
        return value

    @property
    def cause_labels(self) -> List[str]:
        return self.causes.labels(self.pathogens)

    def pef(self, stratum, t=0.0) -> np.ndarray:
        """True etiology fractions pi0 at (stratum, standardized t)"""
        return self.etiology.probabilities(stratum, t)
