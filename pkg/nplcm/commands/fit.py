"""
fit: run the sampler and write draws, checkpoints and a manifest
"""
import logging
from pathlib import Path

from config import Config
from nplcm.commands.common import emit, save_manifest
from nplcm.data.dataset import load_dataset
from nplcm.data.schemas import ChainConfig, ModelSpec, PriorConfig, load_config, parse_config
from nplcm.services.fit_service import fit_model
from nplcm.utils.decorators import log_command, timing_decorator
from nplcm.utils.response_formatter import success_response

logger = logging.getLogger(__name__)


def register(subparsers):
    parser = subparsers.add_parser('fit', help='Fit the regression npLCM by MCMC')
    parser.add_argument('--data', type=Path, required=True, help='Dataset CSV')
    parser.add_argument('--model', type=Path, required=True, help='ModelSpec JSON')
    parser.add_argument('--priors', type=Path, default=None, help='PriorConfig JSON (defaults if omitted)')
    parser.add_argument('--chains', type=int, default=Config.DEFAULT_CHAINS)
    parser.add_argument('--burnin', type=int, default=Config.DEFAULT_BURNIN)
    parser.add_argument('--keep', type=int, default=Config.DEFAULT_KEEP)
    parser.add_argument('--thin', type=int, default=Config.DEFAULT_THIN)
    parser.add_argument('--seed', type=int, default=0)
    parser.add_argument('--out', type=Path, required=True, help='Run directory')
    parser.add_argument('--parallel', type=int, default=1, help='Chains run concurrently')
    parser.add_argument('--checkpoint-every', type=int, default=Config.CHECKPOINT_EVERY)
    parser.add_argument('--resume', action='store_true', help='Resume chains from checkpoints')
    parser.add_argument('--backend', choices=('local', 'celery'), default=None)
    parser.add_argument('--progress', action='store_true', help='Show progress bars')
    parser.set_defaults(handler=run)
    return parser


@log_command('fit')
@timing_decorator
def run(args):
    dataset = load_dataset(args.data)
    spec = load_config(ModelSpec, args.model)
    priors = load_config(PriorConfig, args.priors) if args.priors else PriorConfig()
    chain_config = parse_config(ChainConfig, {
        'n_chains': args.chains, 'n_burnin': args.burnin, 'n_keep': args.keep,
        'thin': args.thin, 'seed': args.seed, 'checkpoint_every': args.checkpoint_every,
        'n_workers': min(args.parallel, Config.MAX_WORKERS),
    })

    result = fit_model(dataset, spec, priors, chain_config, run_dir=args.out, resume=args.resume,
                       backend=args.backend, show_progress=args.progress)
    save_manifest(result.run_dir, 'fit', args, seeds={'base': args.seed},
                  config={'model': spec.model_dump(mode='json'),
                          'priors': priors.model_dump(mode='json'),
                          'chain': chain_config.model_dump(mode='json')},
                  inputs={'data': args.data, 'model': args.model, 'priors': args.priors})

    emit(success_response(
        data={'run_dir': str(result.run_dir), 'n_chains': result.draws.n_chains,
              'n_draws': result.draws.n_draws, 'n_parameters': len(result.draws.names),
              'acceptance': result.draws.acceptance},
        timestamp=False,
    ))
    return 0
