"""
Configuration Schemas
Pydantic documents for data layout, model, priors and chains
"""
import logging
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple, Type, TypeVar, Union

import numpy as np
from pydantic import (
    BaseModel, ConfigDict, Field, PositiveFloat, ValidationError,
    field_validator, model_validator,
)

from nplcm import SCHEMA_VERSION
from nplcm.middleware.error_handler import ConfigurationError
from nplcm.utils.file_utils import read_json

logger = logging.getLogger(__name__)

BetaPair = Tuple[PositiveFloat, PositiveFloat]
ColumnRef = Union[int, str]
NOS_LABEL = "NoS"


class VersionedModel(BaseModel):
    """Base document carrying a schema_version with a major-version check"""
    model_config = ConfigDict(extra='forbid')

    schema_version: str = SCHEMA_VERSION

    @field_validator('schema_version')
    @classmethod
    def _check_major(cls, value: str) -> str:
        if value.split('.')[0] != SCHEMA_VERSION.split('.')[0]:
            raise ValueError(
                f"schema_version {value} is incompatible with {SCHEMA_VERSION}"
            )
        return value


class DataSchema(VersionedModel):
    """Column naming for dataset tables"""
    case_column: str = 'y'
    brs_prefix: str = 'brs_'
    ss_prefix: str = 'ss_'
    x_prefix: str = 'x_'
    w_prefix: str = 'w_'


class TermSpec(BaseModel):
    """One additive term of a regression formula"""
    model_config = ConfigDict(extra='forbid')

    kind: Literal['linear', 'spline', 'intercept']
    column: Optional[ColumnRef] = None
    df: Optional[int] = None

    @model_validator(mode='after')
    def _check_fields(self):
        if self.kind == 'intercept':
            if self.column is not None or self.df is not None:
                raise ValueError("intercept terms take no column or df")
        elif self.column is None:
            raise ValueError(f"{self.kind} term requires a column")
        if self.kind == 'spline':
            if self.df is None or self.df < 4:
                raise ValueError("spline terms require df >= 4 (cubic basis minimum)")
        elif self.df is not None:
            raise ValueError("df is only valid for spline terms")
        return self

    @property
    def label(self) -> str:
        if self.kind == 'intercept':
            return '(Intercept)'
        if self.kind == 'spline':
            return f"s({self.column})"
        return str(self.column)


class CauseSpec(BaseModel):
    """
    Ordered list of causes, each a set of pathogens

    Pathogens may be given by name or by 1-based index; the empty set is the
    Not-Specified (NoS) cause.
    """
    model_config = ConfigDict(extra='forbid')

    causes: List[List[ColumnRef]]

    @field_validator('causes')
    @classmethod
    def _check_causes(cls, value):
        if len(value) < 2:
            raise ValueError("at least two causes are required")
        keys = [frozenset(c) for c in value]
        if len(set(keys)) != len(keys):
            raise ValueError("causes must be distinct pathogen subsets")
        for cause in value:
            if len(set(cause)) != len(cause):
                raise ValueError(f"duplicate pathogen in cause {cause}")
        return value

    @property
    def n_causes(self) -> int:
        return len(self.causes)

    def resolve(self, pathogens: List[str]) -> Tuple[Tuple[int, ...], ...]:
        """Map every cause to sorted 0-based pathogen indices"""
        index = {name: j for j, name in enumerate(pathogens)}
        resolved = []
        for cause in self.causes:
            members = []
            for ref in cause:
                if isinstance(ref, str):
                    if ref not in index:
                        raise ConfigurationError(f"Unknown pathogen '{ref}' in cause spec")
                    members.append(index[ref])
                else:
                    if not 1 <= ref <= len(pathogens):
                        raise ConfigurationError(
                            f"Pathogen index {ref} outside 1..{len(pathogens)}"
                        )
                    members.append(ref - 1)
            resolved.append(tuple(sorted(set(members))))
        if len(set(resolved)) != len(resolved):
            raise ConfigurationError("causes resolve to duplicate pathogen subsets")
        return tuple(resolved)

    def labels(self, pathogens: List[str]) -> List[str]:
        return [
            '+'.join(pathogens[j] for j in cause) if cause else NOS_LABEL
            for cause in self.resolve(pathogens)
        ]

    @classmethod
    def singletons(cls, pathogens: List[str], nos: bool = False) -> 'CauseSpec':
        causes = [[name] for name in pathogens]
        if nos:
            causes.append([])
        return cls(causes=causes)


class ModelSpec(VersionedModel):
    """Model structure: causes, subclasses and regression formulas"""
    cause_spec: CauseSpec
    k_subclasses: int = Field(1, ge=1)
    etiology_formula: List[TermSpec] = Field(default_factory=list)
    subclass_formula: List[TermSpec] = Field(default_factory=list)
    etiology_intercept: bool = True
    etiology_prior: Literal['logit', 'dirichlet'] = 'logit'
    ss_enabled: bool = True

    @model_validator(mode='after')
    def _check_formulas(self):
        if self.etiology_prior == 'dirichlet':
            if any(t.kind == 'spline' for t in self.etiology_formula):
                raise ValueError("Dirichlet etiology requires discrete (linear) covariates only")
        for formula in (self.etiology_formula, self.subclass_formula):
            labels = [t.label for t in formula]
            if len(set(labels)) != len(labels):
                raise ValueError(f"duplicate formula terms: {labels}")
        return self


class PriorConfig(VersionedModel):
    """Prior hyperparameters; defaults follow the selective-stopping/P-spline setup"""
    tpr_brs: Union[BetaPair, Dict[str, BetaPair]] = (1.0, 1.0)
    tpr_brs_quantiles: Optional[Tuple[float, float]] = None
    tpr_ss: Union[BetaPair, Dict[str, BetaPair]] = (1.0, 1.0)
    tpr_ss_quantiles: Optional[Tuple[float, float]] = None
    fpr: BetaPair = (1.0, 1.0)
    intercept_df: PositiveFloat = 1.0
    intercept_scale: PositiveFloat = 10.0
    k_beta: PositiveFloat = 4.0
    tau_gamma: BetaPair = (3.0, 2.0)
    tau_invpareto: BetaPair = (1.5, 400.0)
    rho_etiology: BetaPair = (1.0, 0.5)
    rho_subclass: BetaPair = (0.5, 1.0)
    linear_sd: PositiveFloat = 3.0
    dirichlet_alpha: PositiveFloat = 1.0

    @field_validator('tpr_brs_quantiles', 'tpr_ss_quantiles')
    @classmethod
    def _check_quantiles(cls, value):
        if value is not None and not 0.0 < value[0] < value[1] < 1.0:
            raise ValueError("quantile range must satisfy 0 < lo < hi < 1")
        return value

    @staticmethod
    def _pairs(spec, quantiles, names: List[str], kind: str) -> np.ndarray:
        from nplcm.priors.distributions import beta_from_quantiles

        if quantiles is not None:
            return np.tile(np.array(beta_from_quantiles(*quantiles)), (len(names), 1))
        if isinstance(spec, dict):
            unknown = set(spec) - set(names) - {'default'}
            if unknown:
                raise ConfigurationError(f"{kind} prior names unknown pathogens {sorted(unknown)}")
            default = spec.get('default', (1.0, 1.0))
            return np.array([spec.get(name, default) for name in names], dtype=float)
        return np.tile(np.asarray(spec, dtype=float), (len(names), 1))

    def tpr_brs_pairs(self, pathogens: List[str]) -> np.ndarray:
        """(J, 2) Beta parameters for bronze-standard TPRs"""
        return self._pairs(self.tpr_brs, self.tpr_brs_quantiles, pathogens, 'tpr_brs')

    def tpr_ss_pairs(self, ss_pathogens: List[str]) -> np.ndarray:
        """(J_ss, 2) Beta parameters for silver-standard TPRs"""
        return self._pairs(self.tpr_ss, self.tpr_ss_quantiles, ss_pathogens, 'tpr_ss')

    @property
    def intercept_hyper(self) -> Tuple[float, float]:
        """Gamma (shape, rate) of the intercept precision: (nu/2, nu s0^2 / 2)"""
        nu, s0 = self.intercept_df, self.intercept_scale
        return nu / 2.0, nu * s0 ** 2 / 2.0


class ChainConfig(VersionedModel):
    """MCMC run configuration"""
    n_chains: int = Field(3, ge=1)
    n_burnin: int = Field(10000, ge=0)
    n_keep: int = Field(10000, ge=1)
    thin: int = Field(1, ge=1)
    seed: int = Field(0, ge=0)
    initial_scale: PositiveFloat = 0.1
    adaptation_exponent: float = Field(0.6, gt=0.5, le=1.0)
    target_acceptance_1d: float = Field(0.44, gt=0.0, lt=1.0)
    target_acceptance: float = Field(0.234, gt=0.0, lt=1.0)
    checkpoint_every: int = Field(0, ge=0)
    n_workers: int = Field(1, ge=1)

    @property
    def n_draws(self) -> int:
        return self.n_keep // self.thin

    @model_validator(mode='after')
    def _check_thin(self):
        if self.n_keep // self.thin < 1:
            raise ValueError("n_keep / thin must leave at least one stored draw")
        return self


ConfigT = TypeVar('ConfigT', bound=BaseModel)


def parse_config(model: Type[ConfigT], payload) -> ConfigT:
    """Validate a configuration payload, mapping failures to ConfigurationError"""
    try:
        return model.model_validate(payload)
    except ValidationError as e:
        raise ConfigurationError(f"Invalid {model.__name__}: {e}")


def load_config(model: Type[ConfigT], path: Union[str, Path]) -> ConfigT:
    """Load and validate a JSON configuration document"""
    config = parse_config(model, read_json(path))
    logger.info(f"Loaded {model.__name__} from {path}")
    return config
