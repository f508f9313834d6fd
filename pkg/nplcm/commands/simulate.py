"""
simulate: draw a dataset and its truth record from a scenario or truth file
"""
import logging
from pathlib import Path

from nplcm.commands.common import emit, save_manifest
from nplcm.data.dataset import store_dataset
from nplcm.data.schemas import load_config
from nplcm.simulate.generator import generate
from nplcm.simulate.scenarios import SCENARIOS, get_scenario
from nplcm.simulate.truth import TruthConfig
from nplcm.utils.decorators import log_command, timing_decorator
from nplcm.utils.file_utils import ensure_dir, write_frame, write_json
from nplcm.utils.response_formatter import success_response

logger = logging.getLogger(__name__)


def register(subparsers):
    parser = subparsers.add_parser('simulate', help='Simulate a case-control dataset')
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument('--scenario', choices=sorted(SCENARIOS), help='Built-in scenario')
    source.add_argument('--truth', type=Path, help='TruthConfig JSON file')
    parser.add_argument('--grid', type=int, default=None, help='Simulation II grid point (1..48)')
    parser.add_argument('--seed', type=int, default=0)
    parser.add_argument('--out', type=Path, required=True, help='Output directory')
    parser.set_defaults(handler=run)
    return parser


@log_command('simulate')
@timing_decorator
def run(args):
    if args.scenario:
        truth = get_scenario(args.scenario, args.grid, seed=args.seed)
    else:
        truth = load_config(TruthConfig, args.truth)
        truth = truth.model_copy(update={'seed': args.seed})

    dataset, record = generate(truth)
    out = ensure_dir(args.out)
    store_dataset(dataset, out / 'data.csv')
    write_frame(out / 'truth.csv', record)
    write_json(out / 'truth.json', truth.model_dump(mode='json'))
    save_manifest(out, 'simulate', args, seeds={'data': truth.seed},
                  config={'truth': truth.model_dump(mode='json')},
                  inputs={'truth': args.truth})

    emit(success_response(data=dataset.summary(), message=f"Simulated {truth.name} into {out}",
                          timestamp=False))
    return 0
