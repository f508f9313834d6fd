"""
Prometheus Monitoring Integration
Sampler and replication metrics, exported as a textfile for batch runs
"""
import logging
from pathlib import Path
from typing import Dict, Union

from prometheus_client import (
    Counter, Histogram, Info,
    CollectorRegistry, write_to_textfile
)

from nplcm import __version__
from config import Config

logger = logging.getLogger(__name__)

# Create registry
registry = CollectorRegistry()

# Sampler metrics
SWEEP_COUNT = Counter(
    'nplcm_sweeps_total',
    'Total Gibbs sweeps',
    registry=registry
)

SWEEP_DURATION = Histogram(
    'nplcm_sweep_duration_seconds',
    'Gibbs sweep duration in seconds',
    registry=registry
)

PROPOSAL_COUNT = Counter(
    'nplcm_proposals_total',
    'Metropolis proposals by block family',
    ['family'],
    registry=registry
)

ACCEPTANCE_SUM = Counter(
    'nplcm_acceptance_probability_total',
    'Summed Metropolis acceptance probabilities by block family',
    ['family'],
    registry=registry
)

CHAIN_COUNT = Counter(
    'nplcm_chains_total',
    'Completed or aborted chains',
    ['status'],
    registry=registry
)

# Replication metrics
REPLICATION_COUNT = Counter(
    'nplcm_replications_total',
    'Replications by status',
    ['model', 'status'],
    registry=registry
)

# Application info
APP_INFO = Info(
    'nplcm',
    'npLCM engine information',
    registry=registry
)

APP_INFO.info({
    'version': __version__,
    'environment': Config.NPLCM_ENV
})


def _family(block_name: str) -> str:
    """'etiology[2].s(t)' -> 'etiology'"""
    return block_name.split('[', 1)[0]


class MetricsManager:
    """Centralized metrics management"""

    @staticmethod
    def record_acceptance(ledger: Dict[str, list]):
        """Fold a chain's acceptance ledger {block: [sum, count]} into the counters"""
        for name, (total, count) in ledger.items():
            family = _family(name)
            PROPOSAL_COUNT.labels(family=family).inc(count)
            ACCEPTANCE_SUM.labels(family=family).inc(total)

    @staticmethod
    def track_chain(status: str):
        CHAIN_COUNT.labels(status=status).inc()

    @staticmethod
    def record_chain(result):
        """Fold a finished ChainResult into the sampler metrics"""
        for duration in result.sweep_seconds:
            SWEEP_DURATION.observe(duration)
        for ledger in result.ledger.values():
            MetricsManager.record_acceptance(ledger)
        SWEEP_COUNT.inc(len(result.sweep_seconds))
        CHAIN_COUNT.labels(status='finished').inc()

    @staticmethod
    def track_replication(model: str, status: str):
        REPLICATION_COUNT.labels(model=model, status=status).inc()

    @staticmethod
    def write(out_dir: Union[str, Path]) -> Path:
        """Write metrics.prom next to the run artifacts"""
        path = Path(out_dir) / 'metrics.prom'
        write_to_textfile(str(path), registry)
        logger.info(f"Metrics written to {path}")
        return path
