from shared.constants.command_register import (
    COMMAND_GENERATE,
    COMMAND_RECONSTRUCT,
    COMMAND_EVALUATE,
    COMMAND_EXP_EXACT,
    COMMAND_EXP_NOISE,
    COMMAND_ANALYZE_GHOSTS,
)
from modules.experiments.index import (
    cmd_generate,
    cmd_reconstruct,
    cmd_evaluate,
    cmd_experiment_exact,
    cmd_experiment_noise,
    cmd_analyze_ghosts,
)

# Router mapping subcommand names to handlers
COMMAND_ROUTER = {
    COMMAND_GENERATE: cmd_generate,
    COMMAND_RECONSTRUCT: cmd_reconstruct,
    COMMAND_EVALUATE: cmd_evaluate,
    COMMAND_EXP_EXACT: cmd_experiment_exact,
    COMMAND_EXP_NOISE: cmd_experiment_noise,
    COMMAND_ANALYZE_GHOSTS: cmd_analyze_ghosts,
}


def route_command(command: str, args):
    """Centralized router for subcommands"""
    handler = COMMAND_ROUTER.get(command)
    if handler is None:
        raise ValueError(f"unknown command {command!r}, expected one of {sorted(COMMAND_ROUTER)}")
    return handler(args)
