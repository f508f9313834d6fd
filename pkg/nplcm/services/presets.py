"""
Model Presets
Default fitting models for the simulated scenarios
"""
import logging
from typing import List, Tuple

from nplcm.data.schemas import ModelSpec, PriorConfig, TermSpec
from nplcm.middleware.error_handler import ConfigurationError
from nplcm.simulate.generator import covariate_columns
from nplcm.simulate.truth import TruthConfig

logger = logging.getLogger(__name__)

MODELS = ('regression', 'nocov')

# Beta(7.13, 1.32): TPRs between 0.55 and 0.99 with 95% prior probability
DEFAULT_TPR = (7.13, 1.32)
SITE_TPR = (6.0, 2.0)
# 95% prior range for the TPR of the weak-signal sites, about Beta(835.95, 683.79)
INFORMATIVE_SITE_TPR_RANGE = (0.525, 0.575)
WORKING_SUBCLASSES = {'sim1': 7, 'sim2': 3, 'seven_sites': 1, 'nocov_validity': 3}
ETIOLOGY_SPLINE_DF = 7
SUBCLASS_SPLINE_DF = 5


def _family(truth: TruthConfig) -> str:
    for prefix in ('sim1', 'sim2', 'seven_sites', 'nocov_validity'):
        if truth.name.startswith(prefix):
            return prefix
    return 'custom'


def _formula(columns: List[str], spline_df: int) -> List[TermSpec]:
    terms = []
    for name in columns:
        if name == 't':
            terms.append(TermSpec(kind='spline', column=name, df=spline_df))
        else:
            terms.append(TermSpec(kind='linear', column=name))
    return terms


def preset_model(truth: TruthConfig, model: str = 'regression') -> Tuple[ModelSpec, PriorConfig]:
    """
    Model and prior documents used to fit data simulated from a scenario

    Args:
        truth: Scenario the data came from
        model: 'regression' fits every simulated covariate; 'nocov' drops
            them from both formulas

    Returns:
        (ModelSpec, PriorConfig)
    """
    if model not in MODELS:
        raise ConfigurationError(f"Unknown model '{model}'; choose from {list(MODELS)}")
    family = _family(truth)
    columns = covariate_columns(truth)
    k = WORKING_SUBCLASSES.get(family, truth.k_subclasses)

    if family == 'seven_sites':
        etiology = _formula(columns, ETIOLOGY_SPLINE_DF) if model == 'regression' else []
        spec = ModelSpec(cause_spec=truth.causes, k_subclasses=k, etiology_formula=etiology,
                         etiology_prior='dirichlet')
        if truth.metadata.get('informative_tpr_prior'):
            priors = PriorConfig(tpr_brs_quantiles=INFORMATIVE_SITE_TPR_RANGE)
        else:
            priors = PriorConfig(tpr_brs=SITE_TPR)
    else:
        regression = model == 'regression'
        spec = ModelSpec(
            cause_spec=truth.causes,
            k_subclasses=k,
            etiology_formula=_formula(columns, ETIOLOGY_SPLINE_DF) if regression else [],
            subclass_formula=_formula(columns, SUBCLASS_SPLINE_DF) if regression else [],
        )
        priors = PriorConfig(tpr_brs=DEFAULT_TPR)
    logger.info(f"Preset '{model}' for {truth.name}: K={k}, "
                f"etiology terms {[t.label for t in spec.etiology_formula]}")
    return spec, priors
