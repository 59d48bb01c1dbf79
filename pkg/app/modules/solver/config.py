"""
Configuration for the primal-dual solver
"""

# Iteration cap; reaching it marks the report as not converged
MAX_ITERS = 50000

# Relative objective change below which the run counts as stagnated
OBJ_TOL = 1e-7

# Window (iterations) over which the objective change is measured
OBJ_WINDOW = 50

# Optional relative duality gap at which a feasible iterate is accepted (None = off)
GAP_TOL = None

# Feasibility slack per sqrt(row); the total slack is FEAS_TOL_SCALE * sqrt(rows)
FEAS_TOL_SCALE = 1e-5

# Ratio of primal to dual step sizes
STEP_RATIO = 1.0

# Power iteration for operator norms
POWER_ITERS = 100
POWER_TOL = 1e-6
NORM_SAFETY = 1.01

# Progress logging interval (iterations, 0 = off)
LOG_EVERY = 5000


def get_solver_config():
    """Get solver options"""
    return {
        "max_iters": MAX_ITERS,
        "obj_tol": OBJ_TOL,
        "obj_window": OBJ_WINDOW,
        "gap_tol": GAP_TOL,
        "feas_tol": None,
        "step_ratio": STEP_RATIO,
        "log_every": LOG_EVERY,
    }
