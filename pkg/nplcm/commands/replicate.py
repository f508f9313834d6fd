"""
replicate: seeded replication study with bias/coverage/PMSE aggregation
"""
import logging
from pathlib import Path

from config import Config
from nplcm.commands.common import emit, save_manifest
from nplcm.services.presets import MODELS
from nplcm.services.replication_service import METRICS_CSV, coverage_summary, run_study
from nplcm.simulate.scenarios import SCENARIOS
from nplcm.utils.decorators import log_command, timing_decorator
from nplcm.utils.response_formatter import success_response

logger = logging.getLogger(__name__)


def register(subparsers):
    parser = subparsers.add_parser('replicate', help='Replication study over a scenario')
    parser.add_argument('--scenario', choices=sorted(SCENARIOS), required=True)
    parser.add_argument('--grid', type=int, default=None, help='Simulation II grid point (1..48)')
    parser.add_argument('--reps', type=int, required=True, help='Number of replications R')
    parser.add_argument('--models', default=','.join(MODELS),
                        help='Comma-separated subset of regression,nocov')
    parser.add_argument('--chains', type=int, default=Config.DEFAULT_CHAINS)
    parser.add_argument('--burnin', type=int, default=Config.DEFAULT_BURNIN)
    parser.add_argument('--keep', type=int, default=Config.DEFAULT_KEEP)
    parser.add_argument('--thin', type=int, default=Config.DEFAULT_THIN)
    parser.add_argument('--seed', type=int, default=0)
    parser.add_argument('--parallel', type=int, default=1, help='Replications run concurrently')
    parser.add_argument('--backend', choices=('local', 'celery'), default=None)
    parser.add_argument('--out', type=Path, required=True)
    parser.add_argument('--progress', action='store_true')
    parser.set_defaults(handler=run)
    return parser


@log_command('replicate')
@timing_decorator
def run(args):
    models = [m.strip() for m in args.models.split(',') if m.strip()]
    chain = {'n_chains': args.chains, 'n_burnin': args.burnin, 'n_keep': args.keep, 'thin': args.thin}
    table = run_study(args.scenario, args.reps, args.out, chain, grid_point=args.grid,
                      seed=args.seed, models=models,
                      parallel=min(args.parallel, Config.MAX_WORKERS),
                      backend=args.backend, show_progress=args.progress)
    save_manifest(args.out, 'replicate', args, seeds={'study': args.seed}, config={'chain': chain})
    emit(success_response(data=coverage_summary(table), timestamp=False,
                          metrics=str(Path(args.out) / METRICS_CSV)))
    return 0
