"""
Celery Configuration and Tasks
Distributed execution of chains and replications
"""
import logging
from typing import Any, Dict

from celery import Celery, Task

from config import Config

logger = logging.getLogger(__name__)

# Initialize Celery
celery_app = Celery(
    'nplcm',
    broker=Config.CELERY_BROKER_URL,
    backend=Config.CELERY_RESULT_BACKEND
)

# Celery Configuration
celery_app.conf.update(
    task_serializer='json',
    accept_content=['json'],
    result_serializer='json',
    timezone='UTC',
    enable_utc=True,
    task_track_started=True,
    task_time_limit=Config.CELERY_TASK_TIME_LIMIT,
    worker_prefetch_multiplier=1,
    worker_max_tasks_per_child=10,
    broker_connection_retry_on_startup=True
)


class CallbackTask(Task):
    """Base task with callbacks"""

    def on_success(self, retval, task_id, args, kwargs):
        """Success callback"""
        logger.info(f"Task {task_id} completed successfully")

    def on_failure(self, exc, task_id, args, kwargs, einfo):
        """Failure callback"""
        logger.error(f"Task {task_id} failed: {exc}")


@celery_app.task(base=CallbackTask, bind=True, name='tasks.run_chain')
def run_chain_task(self, run_dir: str, chain: int, resume: bool = False) -> str:
    """
    Run one chain of a prepared fit directory

    Args:
        self: Task instance
        run_dir: Fit directory holding data.csv and the config documents
        chain: Chain index
        resume: Continue from the chain's checkpoint

    Returns:
        Path of the pickled ChainResult
    """
    self.update_state(state='PROCESSING', meta={'status': f'Running chain {chain}', 'chain': chain})

    # Import services here to avoid circular imports
    from nplcm.services.fit_service import run_chain_in_dir

    return str(run_chain_in_dir(run_dir, chain, resume))


@celery_app.task(base=CallbackTask, bind=True, name='tasks.run_replication')
def run_replication_task(self, payload: Dict[str, Any]) -> Dict[str, Any]:
    """
    Simulate and fit one replication of a study

    Args:
        self: Task instance
        payload: Keyword arguments of run_replication

    Returns:
        JSON-serializable replication outcome
    """
    self.update_state(
        state='PROCESSING',
        meta={'status': f"Replication {payload.get('replication')}", 'scenario': payload.get('scenario')}
    )

    from nplcm.services.replication_service import run_replication

    return run_replication(**payload)

