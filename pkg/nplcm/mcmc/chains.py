"""
Chain Runner
Metropolis-within-Gibbs sweeps, checkpointed chains and multi-chain assembly
"""
import logging
import multiprocessing as mp
import pickle
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import numpy as np
from tqdm.auto import tqdm

from nplcm.data.schemas import ChainConfig, PriorConfig
from nplcm.middleware.error_handler import ArtifactError, ModelError, SamplerError
from nplcm.models.design import ModelContext
from nplcm.models.likelihood import total_loglik
from nplcm.models.params import LatentState, ParamState
from nplcm.mcmc.draws import DrawsStore, assemble_store, build_address_book
from nplcm.mcmc.state import PriorArrays, chain_seed, init_state
from nplcm.mcmc.updates import (
    AdaptiveScales, update_etiology_blocks, update_etiology_dirichlet, update_intercepts,
    update_latents, update_rates, update_smoothing, update_subclass_blocks,
)
from nplcm.utils.file_utils import ensure_dir

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1
PROGRESS_EVERY = 100
PathLike = Union[str, Path]
ProgressCallback = Callable[[int, int, int], None]


@dataclass
class ChainResult:
    """Kept draws and bookkeeping of one chain"""
    chain: int
    draws: np.ndarray
    loglik: np.ndarray
    class_counts: np.ndarray
    acceptance: Dict[str, float]
    sweep_seconds: List[float] = field(default_factory=list)
    ledger: Dict[str, Any] = field(default_factory=dict)


def checkpoint_path(directory: PathLike, chain: int) -> Path:
    return Path(directory) / f"chain_{chain}.ckpt"


class GibbsSampler:
    """
    One sweep: latents -> rates -> regression blocks -> smoothing states -> rho

    Each chain draws every random number from its own Generator, seeded by
    SeedSequence(base_seed, spawn_key=(chain,)).
    """

    def __init__(self, context: ModelContext, priors: PriorConfig, config: ChainConfig):
        self.context = context
        self.priors = priors
        self.config = config
        self.arrays = PriorArrays.resolve(context, priors)
        self.book = build_address_book(context)

    def sweep(self, params: ParamState, latents: LatentState, rng: np.random.Generator,
              scales: AdaptiveScales, adapt: bool) -> LatentState:
        context, priors = self.context, self.priors
        latents = update_latents(context, params, rng)
        params.rates = update_rates(context, latents, self.arrays, rng)
        if context.dirichlet:
            update_etiology_dirichlet(context, params, latents, priors, rng)
        else:
            update_etiology_blocks(context, params, latents, priors, scales, rng, adapt)
        update_subclass_blocks(context, params, latents, priors, scales, rng, adapt)
        update_intercepts(context, params, latents, priors, scales, rng, adapt)
        update_smoothing(context, params, priors, rng)
        return latents

    def _fingerprint(self) -> Dict[str, Any]:
        c = self.config
        return {'seed': c.seed, 'n_burnin': c.n_burnin, 'n_keep': c.n_keep, 'thin': c.thin,
                'groups': self.book.to_dict()['groups']}

    def _save_checkpoint(self, path: Path, snapshot: Dict[str, Any]) -> None:
        tmp = path.with_suffix('.tmp')
        with open(tmp, 'wb') as f:
            pickle.dump(snapshot, f, protocol=pickle.HIGHEST_PROTOCOL)
        tmp.replace(path)
        logger.debug(f"Checkpoint written: {path} (iteration {snapshot['iteration']})")

    def _load_checkpoint(self, path: Path, chain: int) -> Dict[str, Any]:
        try:
            with open(path, 'rb') as f:
                snapshot = pickle.load(f)
        except (OSError, pickle.UnpicklingError, EOFError) as e:
            raise ArtifactError(f"Cannot read checkpoint {path}: {e}")
        if snapshot.get('version') != CHECKPOINT_VERSION:
            raise ArtifactError(
                f"Checkpoint version {snapshot.get('version')} != {CHECKPOINT_VERSION}"
            )
        if snapshot['chain'] != chain or snapshot['fingerprint'] != self._fingerprint():
            raise ArtifactError(f"Checkpoint {path} was written for a different run configuration")
        return snapshot

    def _dump_failure(self, directory: Optional[PathLike], chain: int, iteration: int,
                      params: ParamState, latents: LatentState) -> Optional[Path]:
        if directory is None:
            return None
        path = ensure_dir(directory) / f"failure_chain_{chain}.pkl"
        with open(path, 'wb') as f:
            pickle.dump({'chain': chain, 'iteration': iteration,
                         'params': params, 'latents': latents}, f)
        logger.error(f"Chain {chain} state at iteration {iteration} dumped to {path}")
        return path

    def run_chain(self, chain: int, checkpoint_dir: Optional[PathLike] = None,
                  resume: bool = False, progress: Optional[ProgressCallback] = None) -> ChainResult:
        """
        Run one chain to completion

        Args:
            chain: Chain index
            checkpoint_dir: Where checkpoints and failure dumps go
            resume: Continue from the chain's checkpoint when one exists
            progress: Called as progress(chain, iteration, total) every 100 iterations

        Raises:
            SamplerError: non-finite log-likelihood or an impossible state
        """
        config, context = self.config, self.context
        total = config.n_burnin + config.n_keep
        n_draws = config.n_draws
        ckpt = checkpoint_path(checkpoint_dir, chain) if checkpoint_dir is not None else None

        if resume and ckpt is not None and ckpt.exists():
            snapshot = self._load_checkpoint(ckpt, chain)
            params, latents = snapshot['params'], snapshot['latents']
            rng = np.random.default_rng()
            rng.bit_generator.state = snapshot['rng_state']
            scales = AdaptiveScales(config)
            scales.load_state_dict(snapshot['scales'])
            draws, loglik = snapshot['draws'], snapshot['loglik']
            class_counts = snapshot['class_counts']
            sweep_seconds = list(snapshot['sweep_seconds'])
            start = snapshot['iteration']
            logger.info(f"Chain {chain} resumed at iteration {start}/{total}")
        else:
            rng = np.random.default_rng(chain_seed(config.seed, chain))
            params, latents = init_state(context, self.priors, rng)
            scales = AdaptiveScales(config)
            draws = np.empty((n_draws, self.book.size))
            loglik = np.empty(n_draws)
            class_counts = np.zeros((context.cases.n, context.n_causes))
            sweep_seconds = []
            start = 0
            logger.info(f"Chain {chain} started: {config.n_burnin} burn-in, "
                        f"{config.n_keep} kept, thin {config.thin}")

        case_rows = np.arange(context.cases.n)
        for iteration in range(start, total):
            adapt = iteration < config.n_burnin
            t0 = time.perf_counter()
            try:
                latents = self.sweep(params, latents, rng, scales, adapt)
            except (ModelError, SamplerError) as e:
                self._dump_failure(checkpoint_dir, chain, iteration, params, latents)
                raise SamplerError(f"Chain {chain} aborted at iteration {iteration}: {e.message}",
                                   payload={'chain': chain, 'iteration': iteration})
            sweep_seconds.append(time.perf_counter() - t0)

            kept = iteration + 1 - config.n_burnin
            if kept > 0 and kept % config.thin == 0 and kept // config.thin <= n_draws:
                index = kept // config.thin - 1
                value = total_loglik(context, params)
                if not np.isfinite(value):
                    self._dump_failure(checkpoint_dir, chain, iteration, params, latents)
                    raise SamplerError(f"Chain {chain}: non-finite log-likelihood at iteration {iteration}",
                                       payload={'chain': chain, 'iteration': iteration})
                draws[index] = self.book.flatten(params)
                loglik[index] = value
                class_counts[case_rows, latents.case_class] += 1

            done = iteration + 1
            if ckpt is not None and config.checkpoint_every and done % config.checkpoint_every == 0:
                self._save_checkpoint(ckpt, {
                    'version': CHECKPOINT_VERSION, 'chain': chain, 'iteration': done,
                    'fingerprint': self._fingerprint(), 'params': params, 'latents': latents,
                    'rng_state': rng.bit_generator.state, 'scales': scales.state_dict(),
                    'draws': draws, 'loglik': loglik, 'class_counts': class_counts,
                    'sweep_seconds': sweep_seconds,
                })
            if progress is not None and done % PROGRESS_EVERY == 0:
                progress(chain, done, total)

        acceptance = scales.acceptance_rates('sampling')
        if acceptance:
            logger.info(f"Chain {chain} finished; mean acceptance "
                        f"{np.mean(list(acceptance.values())):.3f} over {len(acceptance)} blocks")
        else:
            logger.info(f"Chain {chain} finished")
        return ChainResult(chain=chain, draws=draws, loglik=loglik, class_counts=class_counts,
                           acceptance=acceptance, sweep_seconds=sweep_seconds,
                           ledger=scales.state_dict()['ledger'])


def store_metadata(context: ModelContext, priors: PriorConfig, config: ChainConfig) -> Dict[str, Any]:
    """Configuration documents recorded next to the draws"""
    return {'chain_config': config.model_dump(mode='json'),
            'prior_config': priors.model_dump(mode='json'),
            'model_spec': context.spec.model_dump(mode='json')}


def _run_chain_task(payload: Tuple) -> ChainResult:
    context, priors, config, chain, checkpoint_dir, resume = payload
    return GibbsSampler(context, priors, config).run_chain(chain, checkpoint_dir, resume)


def run_chains(context: ModelContext, priors: PriorConfig, config: ChainConfig,
               checkpoint_dir: Optional[PathLike] = None, resume: bool = False,
               progress: Optional[ProgressCallback] = None,
               show_progress: bool = False,
               on_result: Optional[Callable[[ChainResult], None]] = None) -> DrawsStore:
    """
    Run config.n_chains independent chains and assemble them by chain index

    Chains run in a spawn-context process pool when n_workers > 1, otherwise
    sequentially in this process. progress gets (chain, iteration, total) every
    100 iterations when sequential and (chain, total, total) per finished chain
    when pooled. on_result sees every finished ChainResult in the calling process.
    """
    sampler = GibbsSampler(context, priors, config)
    chains = list(range(config.n_chains))
    n_workers = min(config.n_workers, config.n_chains)

    if n_workers > 1:
        logger.info(f"Running {config.n_chains} chains on {n_workers} workers")
        payloads = [(context, priors, config, c, checkpoint_dir, resume) for c in chains]
        ctx = mp.get_context("spawn")
        total = config.n_burnin + config.n_keep
        results = []
        with ProcessPoolExecutor(max_workers=n_workers, mp_context=ctx) as pool:
            futures = [pool.submit(_run_chain_task, payload) for payload in payloads]
            # pooled chains report once, when they finish
            for future in tqdm(as_completed(futures), total=len(futures),
                               desc="chains", disable=not show_progress):
                result = future.result()
                results.append(result)
                if progress is not None:
                    progress(result.chain, total, total)
    else:
        results = []
        for c in chains:
            bar = tqdm(total=config.n_burnin + config.n_keep, desc=f"chain {c}",
                       disable=not show_progress)

            def report(chain, done, total, bar=bar):
                bar.update(done - bar.n)
                if progress is not None:
                    progress(chain, done, total)

            try:
                results.append(sampler.run_chain(c, checkpoint_dir, resume, report))
            finally:
                bar.close()

    if on_result is not None:
        for result in sorted(results, key=lambda r: r.chain):
            on_result(result)
    return assemble_store(sampler.book, results, store_metadata(context, priors, config))
