"""
summarize: tidy CSV summaries of a fit
"""
import logging
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from nplcm.commands.common import emit, save_manifest
from nplcm.data.schemas import DataSchema
from nplcm.evaluation.summaries import (
    etiology_log_odds_contrast, fitted_positive_rate_curves, ief_summary, overall_pef,
    pef_curve, rate_summary, subclass_weight_curves,
)
from nplcm.middleware.error_handler import ConfigurationError, DataValidationError
from nplcm.services.fit_service import load_fit
from nplcm.utils.decorators import log_command, timing_decorator
from nplcm.utils.file_utils import write_frame
from nplcm.utils.response_formatter import success_response

logger = logging.getLogger(__name__)

SUMMARIES = ('pef', 'overall', 'rates', 'ief', 'positive_rates', 'subclass_weights', 'contrast')
NEEDS_GRID = ('pef', 'positive_rates', 'subclass_weights', 'contrast')


def register(subparsers):
    parser = subparsers.add_parser('summarize', help='Posterior summaries as tidy CSV')
    parser.add_argument('--draws', type=Path, required=True, help='Run directory of a fit')
    parser.add_argument('--what', choices=SUMMARIES, required=True)
    parser.add_argument('--grid', type=Path, default=None,
                        help='CSV of covariate profiles with x_/w_ prefixed columns')
    parser.add_argument('--cases', default=None, help='Comma-separated 1-based case numbers (ief)')
    parser.add_argument('--cause', default=None, help='Cause label (contrast)')
    parser.add_argument('--reference', default=None,
                        help='Reference cause label for the contrast odds, e.g. NoS (default: all other causes)')
    parser.add_argument('--out', type=Path, default=None, help='Output CSV')
    parser.set_defaults(handler=run)
    return parser


def read_grid(path: Path, prefix: str, columns: Sequence[str]) -> np.ndarray:
    """Raw covariate rows for the named source columns, in design order"""
    try:
        frame = pd.read_csv(path, float_precision='round_trip')
    except (OSError, pd.errors.ParserError) as e:
        raise DataValidationError(f"Cannot read grid {path}: {e}")
    wanted = [f"{prefix}{name}" for name in columns]
    missing = [c for c in wanted if c not in frame.columns]
    if missing:
        raise DataValidationError(f"Grid {path} lacks columns {missing}")
    if frame.empty:
        raise DataValidationError(f"Grid {path} has no rows")
    return frame[wanted].to_numpy(dtype=float) if wanted else np.zeros((len(frame), 0))


def _parse_cases(text):
    if text is None:
        return None
    try:
        return [int(part) - 1 for part in text.split(',') if part.strip()]
    except ValueError:
        raise ConfigurationError(f"--cases must be comma-separated integers, got '{text}'")


@log_command('summarize')
@timing_decorator
def run(args):
    if args.what in NEEDS_GRID and args.grid is None:
        raise ConfigurationError(f"--what {args.what} needs --grid")
    fit = load_fit(args.draws)
    draws, context = fit.draws, fit.context
    schema = DataSchema()

    def grid(prefix, columns):
        return read_grid(args.grid, prefix, columns)

    if args.what == 'pef':
        table = pef_curve(draws, context.etiology_design, grid(schema.x_prefix, context.dataset.x_columns))
    elif args.what == 'overall':
        table = overall_pef(draws, context.cases.x_rows)
    elif args.what == 'rates':
        table = rate_summary(draws)
    elif args.what == 'ief':
        table = ief_summary(draws, context, _parse_cases(args.cases))
    elif args.what == 'positive_rates':
        table = fitted_positive_rate_curves(
            draws, context,
            grid(schema.x_prefix, context.dataset.x_columns),
            grid(schema.w_prefix, context.dataset.w_columns),
        )
    elif args.what == 'subclass_weights':
        table = subclass_weight_curves(draws, context, grid(schema.w_prefix, context.dataset.w_columns))
    else:
        labels = list(context.cause_labels)
        if args.cause not in labels:
            raise ConfigurationError(f"--cause must be one of {labels}")
        profiles = grid(schema.x_prefix, context.dataset.x_columns)
        if profiles.shape[0] != 2:
            raise DataValidationError("contrast needs a grid with exactly two profiles")
        reference = None
        if args.reference is not None:
            if args.reference not in labels or args.reference == args.cause:
                raise ConfigurationError(f"--reference must be one of {labels} other than --cause")
            reference = labels.index(args.reference)
        table = pd.DataFrame([etiology_log_odds_contrast(
            draws, context.etiology_design, profiles[0], profiles[1], labels.index(args.cause),
            reference=reference)])

    out = args.out or fit.run_dir / f"summary_{args.what}.csv"
    write_frame(out, table)
    save_manifest(Path(out).parent, 'summarize', args, filename=f"manifest_summarize_{args.what}.json",
                  inputs={'grid': args.grid})
    emit(success_response(data={'path': str(out), 'rows': len(table)}, timestamp=False))
    return 0
