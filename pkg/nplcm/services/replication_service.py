"""
Replication Service
Seeded simulate -> fit -> score loops for frequentist evaluation of the estimators
"""
import logging
import multiprocessing as mp
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from tqdm.auto import tqdm

from config import Config
from nplcm.data.schemas import ChainConfig, parse_config
from nplcm.evaluation.replication_metrics import ReplicationEvaluator, ReplicationFit, metrics_frame
from nplcm.evaluation.summaries import overall_pef_draws
from nplcm.middleware.error_handler import ArtifactError, ConfigurationError, NplcmError
from nplcm.models.manifest import ManifestRegistry, RunManifest
from nplcm.monitoring.prometheus_metrics import MetricsManager
from nplcm.services.fit_service import fit_model
from nplcm.services.presets import MODELS, preset_model
from nplcm.simulate.generator import generate, true_overall_pef, true_stratum_pef
from nplcm.simulate.scenarios import get_scenario
from nplcm.utils.file_utils import ensure_dir, write_frame, write_json
from nplcm.utils.response_formatter import success_response

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

SAMPLES_FILE = 'overall_pef_draws.csv'
METRICS_JSON = 'replication_metrics.json'
METRICS_CSV = 'replication_metrics.csv'


def replication_seeds(seed: int, replication: int) -> Dict[str, int]:
    """Data and chain seeds of one replication, derived from the study seed"""
    data_seed, chain_seed = np.random.SeedSequence(seed, spawn_key=(replication,)).generate_state(2)
    return {'data': int(data_seed), 'chains': int(chain_seed)}


def replication_dir(out_dir: PathLike, replication: int) -> Path:
    return Path(out_dir) / f"rep_{replication:03d}"


def _write_samples(path: Path, samples: np.ndarray, labels: Sequence[str]) -> str:
    write_frame(path, pd.DataFrame(samples, columns=list(labels)))
    return str(path)


def run_replication(scenario: str, grid_point: Optional[int], seed: int, replication: int,
                    models: Sequence[str], chain: Dict[str, Any], out_dir: str) -> Dict[str, Any]:
    """
    Simulate one dataset and fit every requested model to it

    Arguments and return value are JSON-serializable so the same function
    backs the process pool and the Celery task.

    Returns:
        {'replication', 'seeds', 'fits': [{'model', 'samples', 'truth', 'strata'}]}
    """
    seeds = replication_seeds(seed, replication)
    truth = get_scenario(scenario, grid_point, seed=seed)
    dataset, record = generate(truth, seed=seeds['data'])
    labels = truth.cause_labels
    rep_dir = ensure_dir(replication_dir(out_dir, replication))
    write_frame(rep_dir / 'truth.csv', record)

    case_strata = record.loc[record['y'] == 1, 'stratum'].to_numpy()
    stratified = not truth.covariates.dates and truth.covariates.n_strata > 1
    stratum_truth = true_stratum_pef(truth) if stratified else None
    chain_config = parse_config(ChainConfig, {**chain, 'seed': seeds['chains'], 'n_workers': 1})

    fits = []
    for model in models:
        spec, priors = preset_model(truth, model)
        model_dir = rep_dir / model
        fit = fit_model(dataset, spec, priors, chain_config, run_dir=model_dir, backend='local')
        case_rows = fit.context.cases.x_rows
        samples = overall_pef_draws(fit.draws, case_rows)
        entry = {
            'model': model,
            'samples': _write_samples(model_dir / SAMPLES_FILE, samples, labels),
            'truth': true_overall_pef(record, labels).tolist(),
            'strata': [],
        }
        if stratified:
            for level in range(1, truth.covariates.n_strata + 1):
                rows = case_rows[case_strata == level]
                if rows.shape[0] == 0:
                    continue
                path = model_dir / f"stratum_{level}_pef_draws.csv"
                entry['strata'].append({
                    'stratum': level,
                    'samples': _write_samples(path, overall_pef_draws(fit.draws, rows), labels),
                    'truth': stratum_truth[level - 1].tolist(),
                })
        manifest = RunManifest(
            command='replicate',
            arguments={'scenario': scenario, 'grid': grid_point, 'replication': replication,
                       'model': model},
            seeds={'study': seed, **seeds},
            config={'model': spec.model_dump(mode='json'), 'priors': priors.model_dump(mode='json'),
                    'chain': chain_config.model_dump(mode='json')},
        )
        ManifestRegistry(model_dir).save(manifest)
        fits.append(entry)

    logger.info(f"Replication {replication} of {truth.name} done ({', '.join(models)})")
    return {'replication': replication, 'seeds': seeds, 'fits': fits}


def _run_replication_task(payload: Dict[str, Any]) -> Dict[str, Any]:
    return run_replication(**payload)


def _read_samples(path: str) -> np.ndarray:
    try:
        return pd.read_csv(path, float_precision='round_trip').to_numpy(dtype=float)
    except OSError as e:
        raise ArtifactError(f"Cannot read replication draws {path}: {e}")


def aggregate(outcomes: List[Dict[str, Any]], labels: Sequence[str],
              models: Sequence[str]) -> pd.DataFrame:
    """Replication metrics per model, cause and (when available) stratum"""
    evaluator = ReplicationEvaluator(labels)
    frames = []
    for model in models:
        overall, strata = [], []
        for outcome in outcomes:
            for fit in outcome['fits']:
                if fit['model'] != model:
                    continue
                overall.append(ReplicationFit(_read_samples(fit['samples']), np.asarray(fit['truth'])))
                for entry in fit['strata']:
                    strata.append(ReplicationFit(_read_samples(entry['samples']),
                                                 np.asarray(entry['truth']), stratum=entry['stratum']))
        if not overall:
            continue
        metrics = evaluator.evaluate(overall)
        if strata:
            metrics += evaluator.evaluate_strata(strata)
        frame = metrics_frame(metrics)
        frame.insert(0, 'model', model)
        frames.append(frame)
    return pd.concat(frames, ignore_index=True)


def run_study(scenario: str, n_replications: int, out_dir: PathLike, chain: Dict[str, Any],
              grid_point: Optional[int] = None, seed: int = 0,
              models: Sequence[str] = MODELS, parallel: int = 1,
              backend: Optional[str] = None, show_progress: bool = False) -> pd.DataFrame:
    """
    Run R seeded replications and write replication_metrics.{json,csv}

    Replications run in a spawn-context process pool bounded by parallel,
    or as Celery tasks; results are assembled by replication index.
    """
    if n_replications < 1:
        raise ConfigurationError("at least one replication is required")
    unknown = set(models) - set(MODELS)
    if unknown or not models:
        raise ConfigurationError(f"models must be drawn from {list(MODELS)}")
    parse_config(ChainConfig, chain)
    backend = backend or Config.EXECUTOR_BACKEND
    out_dir = ensure_dir(out_dir)
    truth = get_scenario(scenario, grid_point, seed=seed)
    payloads = [
        {'scenario': scenario, 'grid_point': grid_point, 'seed': seed, 'replication': r,
         'models': list(models), 'chain': chain, 'out_dir': str(out_dir)}
        for r in range(n_replications)
    ]

    logger.info(f"Replication study {truth.name}: R={n_replications}, models {list(models)}, "
                f"backend {backend}, parallel {parallel}")
    if backend == 'celery':
        from celery_worker import run_replication_task

        pending = [run_replication_task.delay(p) for p in payloads]
        outcomes = [task.get(timeout=Config.CELERY_TASK_TIME_LIMIT) for task in pending]
    elif parallel > 1:
        ctx = mp.get_context("spawn")
        with ProcessPoolExecutor(max_workers=parallel, mp_context=ctx) as pool:
            outcomes = list(tqdm(pool.map(_run_replication_task, payloads), total=len(payloads),
                                 desc="replications", disable=not show_progress))
    else:
        outcomes = []
        for payload in tqdm(payloads, desc="replications", disable=not show_progress):
            try:
                outcomes.append(run_replication(**payload))
            except NplcmError:
                for model in models:
                    MetricsManager.track_replication(model, 'failed')
                raise
    outcomes.sort(key=lambda o: o['replication'])
    for outcome in outcomes:
        for fit in outcome['fits']:
            MetricsManager.track_replication(fit['model'], 'finished')

    table = aggregate(outcomes, truth.cause_labels, models)
    write_frame(out_dir / METRICS_CSV, table)
    write_json(out_dir / METRICS_JSON, success_response(
        data=table.astype(object).where(table.notna(), None).to_dict(orient='records'),
        timestamp=False,
        scenario=truth.name,
        n_replications=n_replications,
        seeds=[o['seeds'] for o in outcomes],
    ))
    if Config.METRICS_ENABLED:
        MetricsManager.write(out_dir)
    return table


def coverage_summary(table: pd.DataFrame) -> Dict[str, Dict[str, float]]:
    """Mean coverage and median relative bias per model over the overall rows"""
    overall = table[table['stratum'].isna()]
    return {
        model: {'mean_coverage': float(rows['coverage'].mean()),
                'median_relative_bias_pct': float(rows['relative_bias_pct'].median())}
        for model, rows in overall.groupby('model')
    }
