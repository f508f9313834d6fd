"""
Replication Metrics
Frequentist scoring of posterior PEFs across simulated replications
"""
import logging
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy.stats import binomtest

from nplcm.evaluation.summaries import CRI_LEVELS
from nplcm.middleware.error_handler import ModelError

logger = logging.getLogger(__name__)


@dataclass
class ReplicationFit:
    """Posterior draws (B x L) of one replication and the matching truth (L,)"""
    samples: np.ndarray
    truth: np.ndarray
    stratum: Optional[int] = None


@dataclass
class CauseMetrics:
    """Replication metrics for one cause (and optionally one stratum)"""
    cause: str
    n_replications: int
    truth_mean: float
    posterior_mean: float
    posterior_sd: float
    relative_bias_pct: float
    coverage: float
    coverage_lo: float
    coverage_hi: float
    pmse: float
    stratum: Optional[int] = None


class ReplicationEvaluator:
    """
    Percent relative bias, 95% CrI coverage and PMSE

    Coverage carries an exact binomial confidence interval; PMSE is the
    posterior mean of the squared error, averaged over replications.
    """

    def __init__(self, labels: Sequence[str], confidence_level: float = 0.95):
        self.labels = list(labels)
        self.confidence_level = confidence_level
        logger.info(f"Replication evaluator initialized for {len(self.labels)} causes")

    def score(self, fit: ReplicationFit) -> Dict[str, np.ndarray]:
        """Per-cause scores of one replication"""
        samples = np.atleast_2d(np.asarray(fit.samples, dtype=float))
        truth = np.asarray(fit.truth, dtype=float)
        if samples.shape[1] != len(self.labels) or truth.shape != (len(self.labels),):
            raise ModelError(
                f"inconsistent cause counts: expected {len(self.labels)}, got "
                f"samples {samples.shape[1]} and truth {truth.size}"
            )
        mean = samples.mean(axis=0)
        lo, hi = np.quantile(samples, CRI_LEVELS, axis=0)
        with np.errstate(divide='ignore', invalid='ignore'):
            relative_bias = np.where(truth > 0, 100.0 * (mean - truth) / truth, np.nan)
        return {
            'mean': mean,
            'sd': samples.std(axis=0, ddof=1) if samples.shape[0] > 1 else np.zeros_like(mean),
            'covered': (lo <= truth) & (truth <= hi),
            'relative_bias': relative_bias,
            'squared_error': np.mean((samples - truth) ** 2, axis=0),
            'truth': truth,
        }

    def _coverage_interval(self, hits: int, n: int):
        ci = binomtest(hits, n).proportion_ci(confidence_level=self.confidence_level)
        return float(ci.low), float(ci.high)

    def evaluate(self, fits: List[ReplicationFit], stratum: Optional[int] = None) -> List[CauseMetrics]:
        if not fits:
            raise ModelError("no replications to evaluate")
        scores = [self.score(fit) for fit in fits]
        R = len(scores)
        stacked = {key: np.stack([s[key] for s in scores]) for key in scores[0]}
        results = []
        for l, label in enumerate(self.labels):
            hits = int(stacked['covered'][:, l].sum())
            lo, hi = self._coverage_interval(hits, R)
            results.append(CauseMetrics(
                cause=label,
                n_replications=R,
                truth_mean=float(stacked['truth'][:, l].mean()),
                posterior_mean=float(stacked['mean'][:, l].mean()),
                posterior_sd=float(stacked['sd'][:, l].mean()),
                relative_bias_pct=float(np.nanmean(stacked['relative_bias'][:, l])),
                coverage=hits / R,
                coverage_lo=lo,
                coverage_hi=hi,
                pmse=float(stacked['squared_error'][:, l].mean()),
                stratum=stratum,
            ))
        return results

    def evaluate_strata(self, fits: List[ReplicationFit]) -> List[CauseMetrics]:
        """Stratum-level metrics for discrete-covariate designs; fits carry their stratum"""
        strata = sorted({fit.stratum for fit in fits})
        if None in strata:
            raise ModelError("stratum-level evaluation needs a stratum on every fit")
        results = []
        for s in strata:
            results.extend(self.evaluate([f for f in fits if f.stratum == s], stratum=s))
        return results


def metrics_frame(metrics: List[CauseMetrics]) -> pd.DataFrame:
    return pd.DataFrame([asdict(m) for m in metrics])


def replication_metrics(fits: List[ReplicationFit], labels: Sequence[str]) -> pd.DataFrame:
    """Bias/coverage/PMSE table across replications, one row per cause"""
    return metrics_frame(ReplicationEvaluator(labels).evaluate(fits))
