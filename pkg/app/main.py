import argparse
import logging
import sys

import env

# Import database setup lazily to avoid initialization errors
# This allows runs to continue with CSV output if the database is not available
try:
    from db.init_db import init_db
    DB_AVAILABLE = True
except Exception as e:
    logging.warning(f"Database setup not available: {e}. Results will be written to CSV only.")
    DB_AVAILABLE = False
    init_db = None

from modules.datagen.config import get_dataset_config
from modules.experiments.index import DATASET_BALANCED, DATASET_KINDS
from shared.constants.command_register import (
    COMMAND_ANALYZE_GHOSTS,
    COMMAND_EVALUATE,
    COMMAND_EXP_EXACT,
    COMMAND_EXP_NOISE,
    COMMAND_GENERATE,
    COMMAND_RECONSTRUCT,
    DIMRED_PRESETS,
    METHODS,
)
from shared.constants.defaults import DATASET_COUNT
from shared.routers.command_router import route_command

logging.basicConfig(
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    level=getattr(logging, env.LOG_LEVEL, logging.INFO)
)


def _list_of(kind):
    def parse(text: str):
        return tuple(kind(part.strip()) for part in text.split(",") if part.strip())
    return parse


def _experiment_options() -> argparse.ArgumentParser:
    """Flags shared by the reconstruction commands; unset flags keep config-file values"""
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument('--config', help="key=value experiment config file")
    parser.add_argument('--dataset', help="dataset file (JSON lines)")
    parser.add_argument('--method', choices=METHODS)
    parser.add_argument('--methods', type=_list_of(str), help="comma-separated methods (exp-exact)")
    parser.add_argument('-M', '--grid-size', dest='M', type=int)
    parser.add_argument('--preset', choices=sorted(DIMRED_PRESETS))
    parser.add_argument('--directions', dest='n_directions', type=int)
    parser.add_argument('--extra-times', dest='n_extra', type=int)
    parser.add_argument('-K', dest='K', type=int, help="measurement times {k/K : k = -K..K}")
    parser.add_argument('--ks', type=_list_of(int), help="comma-separated K values (exp-exact)")
    parser.add_argument('--cutoff', type=int)
    parser.add_argument('--alpha', type=float)
    parser.add_argument('--c-alpha', dest='c_alpha', type=float)
    parser.add_argument('--tau', type=float)
    parser.add_argument('--deltas', type=_list_of(float), help="comma-separated noise levels")
    parser.add_argument('--w-min', dest='w_min', type=float)
    parser.add_argument('--match-radius', dest='match_radius', type=float)
    parser.add_argument('--uw-radius', dest='uw_radius', type=float)
    parser.add_argument('--max-iters', dest='max_iters', type=int)
    parser.add_argument('--feas-tol', dest='feas_tol', type=float)
    parser.add_argument('--obj-tol', dest='obj_tol', type=float)
    parser.add_argument('--seed', type=int)
    parser.add_argument('--count', type=int, help="configurations per generated dataset")
    parser.add_argument('--keep-per-level', dest='keep_per_level', type=int)
    parser.add_argument('--fit-min', dest='fit_min', type=float)
    parser.add_argument('--fit-max', dest='fit_max', type=float)
    parser.add_argument('--filter-correct', dest='filter_correct', action='store_true', default=None)
    parser.add_argument('--bin-width', dest='bin_width', type=float)
    parser.add_argument('--sep-max', dest='sep_max', type=float)
    parser.add_argument('--output-dir', dest='output_dir')
    parser.add_argument('--workers', type=int)
    parser.add_argument('--resume', action='store_true', default=None)
    parser.add_argument('--full-scale', dest='full_scale', action='store_true', default=None)
    return parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Reconstruction of moving particles from Fourier snapshots")
    commands = parser.add_subparsers(dest='command', required=True)
    options = _experiment_options()

    generate = commands.add_parser(COMMAND_GENERATE, help="sample a dataset of particle configurations")
    generate.add_argument('--kind', choices=DATASET_KINDS, default=DATASET_BALANCED)
    generate.add_argument('-K', dest='K', type=int, default=1)
    generate.add_argument('--count', type=int, default=DATASET_COUNT)
    generate.add_argument('--seed', type=int, default=0)
    generate.add_argument('--n-min', dest='n_min', type=int, default=get_dataset_config()["n_min"])
    generate.add_argument('--n-max', dest='n_max', type=int, default=get_dataset_config()["n_max"])
    generate.add_argument('--output', help="dataset path")

    commands.add_parser(COMMAND_RECONSTRUCT, parents=[options], help="reconstruct every instance of a dataset")

    evaluate = commands.add_parser(COMMAND_EVALUATE, help="summarize a results file")
    evaluate.add_argument('results', help="results CSV")

    commands.add_parser(COMMAND_EXP_EXACT, parents=[options], help="exact recovery by dynamic separation")
    commands.add_parser(COMMAND_EXP_NOISE, parents=[options], help="reconstruction error by noise level")

    ghosts = commands.add_parser(COMMAND_ANALYZE_GHOSTS, help="coincidences and ghost particles per configuration")
    ghosts.add_argument('dataset', help="dataset file (JSON lines)")
    ghosts.add_argument('-K', dest='K', type=int, help="override the dataset's measurement times")
    ghosts.add_argument('--directions', dest='n_directions', type=int, help="also analyze the t=0 snapshot")
    ghosts.add_argument('--delta', type=float, help="coincidence distance")
    ghosts.add_argument('--output', help="report path (JSON lines)")
    return parser


def main(argv=None) -> int:
    """Parse arguments and run one subcommand"""
    logger = logging.getLogger(__name__)
    args = build_parser().parse_args(argv)

    # Initialize database
    if DB_AVAILABLE:
        try:
            init_db()
            logger.info("Database initialized successfully")
        except Exception as e:
            logger.warning(f"Failed to initialize database: {e}. Continuing with CSV output only.")

    try:
        result = route_command(args.command, args)
    except (ValueError, RuntimeError) as e:
        logger.error(f"{args.command} failed: {e}", exc_info=True)
        return 1
    except Exception as e:
        logger.error(f"Unexpected error in {args.command}: {e}", exc_info=True)
        return 1
    if result is not None:
        logger.info(f"{args.command} finished: {result if not isinstance(result, (dict, list)) else 'ok'}")
    return 0


if __name__ == '__main__':
    sys.exit(main())
