"""
Simulation Scenarios
Truth configurations for the seasonal, grid, seven-site and validity studies
"""
import logging
import string
from itertools import product
from typing import Dict, List

import numpy as np

from nplcm.data.schemas import CauseSpec
from nplcm.middleware.error_handler import ConfigurationError
from nplcm.simulate.truth import CovariateRule, EffectTerm, LinkTruth, TruthConfig

logger = logging.getLogger(__name__)

PSI_COLUMNS = (0.5, 0.05)

# Simulation II
GRID_CAUSES = (3, 6, 9)
GRID_SIZES = (250, 500)
GRID_COEFFICIENTS = {
    'i': ((0, 0, 0, 0, 0, 0), (-1.5, 0, -1.5, -1.5, 0, -1.5)),
    'ii': ((1, 0, 1, 1, 0, 1), (-1.5, 1, -1.5, -1.5, 1, -1.5)),
}
GRID_THETA = (0.95, 0.8)
GRID_PSI = ((0.5, 0.05), (0.5, 0.15))
CONTROL_GAMMA = (-0.5, 1.5)
CASE_GAMMA = (1.0, -1.5)

SEVEN_SITE_PEF = (
    (0.5, 0.2, 0.15, 0.05, 0.05, 0.05),
    (0.2, 0.5, 0.15, 0.05, 0.05, 0.05),
    (0.2, 0.15, 0.5, 0.05, 0.05, 0.05),
    (0.2, 0.15, 0.05, 0.5, 0.05, 0.05),
    (0.2, 0.15, 0.05, 0.05, 0.5, 0.05),
    (0.2, 0.15, 0.05, 0.05, 0.05, 0.5),
    (0.05, 0.2, 0.15, 0.5, 0.05, 0.05),
)
SIGNALS = {'strong': (0.99, 0.01), 'weak': (0.55, 0.45)}


def _pathogens(n: int) -> List[str]:
    return list(string.ascii_uppercase[:n])


def _ramp(rate: float) -> EffectTerm:
    """4 e^{rt} / (1 + e^{rt}) - 0.5"""
    return EffectTerm(kind='logistic_ramp', coefficient=4.0, rate=rate, offset=-0.5)


def scenario_simulation_I(gamma_nu1: float = 0.1, beta: float = 0.1, seed: int = 0) -> TruthConfig:
    """
    Seasonal PEF curves over a two-level stratum and enrollment dates

    Nine singleton causes by stick-breaking: segment 1 carries a sine wave,
    segment 2 an increasing logistic ramp, segments 3..8 only the stratum
    effect; K=2 with eta(s, t) = nu(s, -t).
    """
    pathogens = _pathogens(9)
    indicator = EffectTerm(kind='indicator', coefficient=beta, level=1)
    segments = [[indicator, EffectTerm(kind='sine')], [indicator, _ramp(3.0)]]
    segments += [[indicator] for _ in range(6)]
    control_terms = [EffectTerm(kind='indicator', coefficient=gamma_nu1, level=1), _ramp(3.0)]
    case_terms = [EffectTerm(kind='indicator', coefficient=gamma_nu1, level=1), _ramp(-3.0)]
    return TruthConfig(
        name='sim1',
        pathogens=pathogens,
        causes=CauseSpec.singletons(pathogens),
        k_subclasses=2,
        covariates=CovariateRule(n_strata=2, cases_per_stratum=500, controls_per_stratum=500,
                                 dates=True, window_days=300),
        etiology=LinkTruth(link='stick_breaking', predictors=segments),
        control_subclass=LinkTruth(link='stick_breaking', predictors=[control_terms]),
        case_subclass=LinkTruth(link='stick_breaking', predictors=[case_terms]),
        theta=0.95,
        psi=list(PSI_COLUMNS),
        seed=seed,
        metadata={'gamma_nu1': gamma_nu1, 'beta': beta},
    )


def simulation_II_grid() -> List[Dict]:
    """All 48 grid points, 1-based, ordered L x N x coefficient set x theta x psi pair"""
    points = []
    for index, (L, n, coef, theta, psi) in enumerate(
            product(GRID_CAUSES, GRID_SIZES, GRID_COEFFICIENTS, GRID_THETA, GRID_PSI), start=1):
        points.append({'grid_point': index, 'L': L, 'n_per_side': n, 'coefficients': coef,
                       'theta': theta, 'psi': list(psi)})
    return points


def _tile(values, n: int) -> List[float]:
    """Repeat a coefficient vector cyclically and truncate to n entries"""
    return [float(values[i % len(values)]) for i in range(n)]


def _subclass_truth(gamma) -> LinkTruth:
    g0, g1 = gamma
    return LinkTruth(link='stick_breaking', predictors=[[
        EffectTerm(kind='constant', coefficient=g0),
        EffectTerm(kind='indicator', coefficient=g1, level=2),
    ]])


def scenario_simulation_II(grid_point: int, seed: int = 0,
                           case_gamma=CASE_GAMMA) -> TruthConfig:
    """
    One point of the 48-point grid

    X = W is a two-level stratum; n_per_side subjects are split evenly across
    the levels. phi_l(X) = beta0_l + beta1_l 1{X=2} under a softmax link.
    """
    grid = simulation_II_grid()
    if not 1 <= grid_point <= len(grid):
        raise ConfigurationError(f"grid point {grid_point} outside 1..{len(grid)}")
    point = grid[grid_point - 1]
    L = point['L']
    beta0, beta1 = (_tile(v, L) for v in GRID_COEFFICIENTS[point['coefficients']])
    predictors = [[EffectTerm(kind='constant', coefficient=b0),
                   EffectTerm(kind='indicator', coefficient=b1, level=2)]
                  for b0, b1 in zip(beta0, beta1)]
    pathogens = _pathogens(L)
    per_level = point['n_per_side'] // 2
    return TruthConfig(
        name=f"sim2_grid{grid_point}",
        pathogens=pathogens,
        causes=CauseSpec.singletons(pathogens),
        k_subclasses=2,
        covariates=CovariateRule(n_strata=2, cases_per_stratum=per_level,
                                 controls_per_stratum=per_level),
        etiology=LinkTruth(link='softmax', predictors=predictors),
        control_subclass=_subclass_truth(CONTROL_GAMMA),
        case_subclass=_subclass_truth(case_gamma),
        theta=point['theta'],
        psi=point['psi'],
        seed=seed,
        metadata={**point, 'beta0': beta0, 'beta1': beta1,
                  'control_gamma': list(CONTROL_GAMMA), 'case_gamma': list(case_gamma)},
    )


def scenario_seven_sites(signal: str = 'strong', seed: int = 0, informative: bool = False) -> TruthConfig:
    """
    Site-specific PEF table, K=1, 500 cases and 500 controls per site

    informative marks the design for fitting with a TPR prior concentrated
    on the true TPR (95% prior range 0.525 to 0.575).
    """
    if signal not in SIGNALS:
        raise ConfigurationError(f"signal must be one of {sorted(SIGNALS)}")
    theta, psi = SIGNALS[signal]
    pathogens = _pathogens(6)
    return TruthConfig(
        name=f"seven_sites_{signal}" + ('_informative' if informative else ''),
        pathogens=pathogens,
        causes=CauseSpec.singletons(pathogens),
        k_subclasses=1,
        covariates=CovariateRule(n_strata=7, cases_per_stratum=500, controls_per_stratum=500),
        etiology=LinkTruth(link='table', table=[list(row) for row in SEVEN_SITE_PEF]),
        theta=theta,
        psi=psi,
        seed=seed,
        metadata={'signal': signal, 'informative_tpr_prior': informative},
    )


def scenario_no_covariate_validity(grid_point: int = 1, seed: int = 0) -> TruthConfig:
    """Simulation II with case subclass weights constant in W (gamma_20 = gamma_21 = 0)"""
    truth = scenario_simulation_II(grid_point, seed=seed, case_gamma=(0.0, 0.0))
    return truth.model_copy(update={'name': f"nocov_validity_grid{grid_point}"})


SCENARIOS = {
    'sim1': lambda grid, seed: scenario_simulation_I(seed=seed),
    'sim2': lambda grid, seed: scenario_simulation_II(grid or 1, seed=seed),
    'seven_sites_strong': lambda grid, seed: scenario_seven_sites('strong', seed=seed),
    'seven_sites_weak': lambda grid, seed: scenario_seven_sites('weak', seed=seed),
    'seven_sites_weak_informative': lambda grid, seed: scenario_seven_sites('weak', seed=seed, informative=True),
    'nocov_validity': lambda grid, seed: scenario_no_covariate_validity(grid or 1, seed=seed),
}


def get_scenario(name: str, grid_point=None, seed: int = 0) -> TruthConfig:
    if name not in SCENARIOS:
        raise ConfigurationError(f"Unknown scenario '{name}'; choose from {sorted(SCENARIOS)}")
    truth = SCENARIOS[name](grid_point, seed)
    logger.info(f"Scenario {truth.name} (seed {seed})")
    return truth
