"""
Fit Service
Runs the sampler on a dataset and persists every artifact of a fit
"""
import logging
import pickle
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Union

from config import Config
from nplcm.data.dataset import Dataset, load_dataset, store_dataset
from nplcm.data.schemas import ChainConfig, ModelSpec, PriorConfig, load_config
from nplcm.mcmc.chains import ChainResult, GibbsSampler, run_chains, store_metadata
from nplcm.mcmc.draws import DrawsStore, assemble_store, build_address_book
from nplcm.middleware.error_handler import ArtifactError, ConfigurationError, SamplerError
from nplcm.models.design import ModelContext, build_context
from nplcm.monitoring.prometheus_metrics import MetricsManager
from nplcm.utils.file_utils import ensure_dir, write_json

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

DATA_FILE = 'data.csv'
MODEL_FILE = 'model.json'
PRIORS_FILE = 'priors.json'
CHAIN_FILE = 'chain.json'
DESIGN_FILE = 'design.json'
DRAWS_DIR = 'draws'
CHECKPOINT_DIR = 'checkpoints'
RESULTS_DIR = 'chain_results'


@dataclass
class FitResult:
    """A finished (or reloaded) fit"""
    context: ModelContext
    draws: DrawsStore
    priors: PriorConfig
    chain_config: ChainConfig
    run_dir: Optional[Path] = None


def write_inputs(run_dir: Path, dataset: Dataset, spec: ModelSpec, priors: PriorConfig,
                 chain_config: ChainConfig, context: ModelContext) -> None:
    """Copy the inputs and the frozen design into the run directory"""
    store_dataset(dataset, run_dir / DATA_FILE)
    write_json(run_dir / MODEL_FILE, spec.model_dump(mode='json'))
    write_json(run_dir / PRIORS_FILE, priors.model_dump(mode='json'))
    write_json(run_dir / CHAIN_FILE, chain_config.model_dump(mode='json'))
    write_json(run_dir / DESIGN_FILE, context.design_summary())


def _run_chains_celery(run_dir: Path, context: ModelContext, priors: PriorConfig,
                       chain_config: ChainConfig, resume: bool,
                       on_result: Optional[Callable[[ChainResult], None]]) -> DrawsStore:
    """Dispatch one tasks.run_chain per chain and assemble by chain index"""
    from celery_worker import run_chain_task

    pending = [
        run_chain_task.delay(str(run_dir), chain, resume)
        for chain in range(chain_config.n_chains)
    ]
    logger.info(f"Dispatched {len(pending)} chain task(s) to Celery")
    results = []
    for task in pending:
        path = Path(task.get(timeout=Config.CELERY_TASK_TIME_LIMIT))
        try:
            with open(path, 'rb') as f:
                results.append(pickle.load(f))
        except (OSError, pickle.UnpicklingError) as e:
            raise ArtifactError(f"Cannot read chain result {path}: {e}")
    if on_result is not None:
        for result in sorted(results, key=lambda r: r.chain):
            on_result(result)
    book = build_address_book(context)
    return assemble_store(book, results, store_metadata(context, priors, chain_config))


def run_chain_in_dir(run_dir: PathLike, chain: int, resume: bool = False) -> Path:
    """
    Run one chain of a prepared run directory and pickle its ChainResult

    Used by Celery workers, which only share the filesystem with the caller.
    """
    run_dir = Path(run_dir)
    context = build_context(load_dataset(run_dir / DATA_FILE), load_config(ModelSpec, run_dir / MODEL_FILE))
    priors = load_config(PriorConfig, run_dir / PRIORS_FILE)
    chain_config = load_config(ChainConfig, run_dir / CHAIN_FILE)

    result = GibbsSampler(context, priors, chain_config).run_chain(
        chain, checkpoint_dir=run_dir / CHECKPOINT_DIR, resume=resume)
    path = ensure_dir(run_dir / RESULTS_DIR) / f"chain_{chain}.pkl"
    with open(path, 'wb') as f:
        pickle.dump(result, f, protocol=pickle.HIGHEST_PROTOCOL)
    return path


def fit_model(dataset: Dataset, spec: ModelSpec, priors: PriorConfig, chain_config: ChainConfig,
              run_dir: Optional[PathLike] = None, resume: bool = False,
              backend: Optional[str] = None, show_progress: bool = False) -> FitResult:
    """
    Fit the model and, when run_dir is given, write inputs, draws and metrics

    Args:
        dataset: Validated data
        spec: Model structure
        priors: Prior hyperparameters
        chain_config: Chain count, iteration counts, seed and checkpoint cadence
        run_dir: Output directory (required for the celery backend)
        resume: Continue chains from their checkpoints
        backend: 'local' or 'celery'; defaults to Config.EXECUTOR_BACKEND
        show_progress: Show tqdm progress bars

    Returns:
        FitResult
    """
    backend = backend or Config.EXECUTOR_BACKEND
    if backend not in ('local', 'celery'):
        raise ConfigurationError(f"Unknown executor backend '{backend}'")
    if backend == 'celery' and run_dir is None:
        raise ConfigurationError("the celery backend needs an output directory shared with workers")

    context = build_context(dataset, spec)
    checkpoint_dir = None
    if run_dir is not None:
        run_dir = ensure_dir(run_dir)
        write_inputs(run_dir, dataset, spec, priors, chain_config, context)
        checkpoint_dir = run_dir / CHECKPOINT_DIR if chain_config.checkpoint_every else None

    on_result = MetricsManager.record_chain if Config.METRICS_ENABLED else None
    try:
        if backend == 'celery':
            draws = _run_chains_celery(run_dir, context, priors, chain_config, resume, on_result)
        else:
            draws = run_chains(context, priors, chain_config, checkpoint_dir=checkpoint_dir,
                               resume=resume, show_progress=show_progress, on_result=on_result)
    except SamplerError:
        if Config.METRICS_ENABLED:
            MetricsManager.track_chain('aborted')
        raise

    if run_dir is not None:
        draws.to_dir(run_dir / DRAWS_DIR)
        if Config.METRICS_ENABLED:
            MetricsManager.write(run_dir)
    logger.info(f"Fit complete: {draws.n_chains} chain(s) x {draws.n_draws} draws, "
                f"{len(draws.names)} parameters")
    return FitResult(context=context, draws=draws, priors=priors, chain_config=chain_config,
                     run_dir=run_dir)


def resolve_draws_dir(path: PathLike) -> Path:
    """Accept either a run directory or its draws/ subdirectory"""
    path = Path(path)
    if (path / DRAWS_DIR).is_dir():
        return path / DRAWS_DIR
    return path


def load_fit(path: PathLike) -> FitResult:
    """
    Reload a fit from its run directory

    The model context is rebuilt from the copied data and model documents,
    which reproduces the fitted design exactly.
    """
    draws_dir = resolve_draws_dir(path)
    run_dir = draws_dir.parent if draws_dir.name == DRAWS_DIR else draws_dir
    if not (run_dir / DATA_FILE).exists():
        raise ArtifactError(f"{run_dir} is not a fit directory (no {DATA_FILE})")
    draws = DrawsStore.from_dir(draws_dir)
    spec = load_config(ModelSpec, run_dir / MODEL_FILE)
    context = build_context(load_dataset(run_dir / DATA_FILE), spec)
    if list(context.cause_labels) != list(draws.book.cause_labels):
        raise ArtifactError("draws and model documents disagree on the cause list")
    return FitResult(
        context=context,
        draws=draws,
        priors=load_config(PriorConfig, run_dir / PRIORS_FILE),
        chain_config=load_config(ChainConfig, run_dir / CHAIN_FILE),
        run_dir=run_dir,
    )
