"""
diagnose: Gelman-Rubin, Geweke and ESS over a fit's draws
"""
import logging
from pathlib import Path

from nplcm.commands.common import emit, save_manifest
from nplcm.diagnostics.convergence import diagnostics_report, render_table
from nplcm.mcmc.draws import DrawsStore
from nplcm.services.fit_service import DRAWS_DIR, resolve_draws_dir
from nplcm.utils.decorators import log_command, timing_decorator
from nplcm.utils.file_utils import write_json
from nplcm.utils.response_formatter import success_response

logger = logging.getLogger(__name__)

REPORT_FILE = 'diagnostics.json'


def register(subparsers):
    parser = subparsers.add_parser('diagnose', help='Convergence diagnostics')
    parser.add_argument('--draws', type=Path, required=True, help='Run or draws directory')
    parser.add_argument('--filter', default=None,
                        help="Comma-separated glob patterns, e.g. 'theta[*,1],etiology*'")
    parser.add_argument('--geweke-first', type=float, default=0.10)
    parser.add_argument('--geweke-last', type=float, default=0.50)
    parser.add_argument('--out', type=Path, default=None, help='Report directory (default: run directory)')
    parser.add_argument('--json', action='store_true', help='Print the JSON report instead of the table')
    parser.set_defaults(handler=run)
    return parser


@log_command('diagnose')
@timing_decorator
def run(args):
    draws_dir = resolve_draws_dir(args.draws)
    draws = DrawsStore.from_dir(draws_dir)
    rows = diagnostics_report(draws, args.filter, args.geweke_first, args.geweke_last)

    out = args.out or (draws_dir.parent if draws_dir.name == DRAWS_DIR else draws_dir)
    report = success_response(data=rows, timestamp=False, n_chains=draws.n_chains,
                              n_draws=draws.n_draws,
                              n_flagged=sum(r['flagged'] for r in rows))
    write_json(Path(out) / REPORT_FILE, report)
    save_manifest(Path(out), 'diagnose', args, filename='manifest_diagnose.json')

    if args.json:
        emit(report)
    else:
        print(render_table(rows))
    return 0
