"""
Configuration for the ADCG baseline
"""

# Outer loop iterations
MAX_OUTER = 100

# Coordinate descent sweeps for the weight refit
MAX_COORD_DESCENT = 200

# Candidate search grid per axis, used for positions and for velocities
INIT_GRID = 20

# Termination thresholds
MIN_GAP = 1e-5
MIN_PROGRESS = 1e-4

# Local descent (candidate refinement and joint descent)
MAX_LOCAL_STEPS = 100
LOCAL_TOL = 1e-10
ARMIJO = 1e-4
BACKTRACK = 0.5
MAX_BACKTRACKS = 40


def get_adcg_config():
    """Get ADCG parameters"""
    return {
        "max_outer": MAX_OUTER,
        "max_coord_descent": MAX_COORD_DESCENT,
        "init_grid": INIT_GRID,
        "min_gap": MIN_GAP,
        "min_progress": MIN_PROGRESS,
        "max_local_steps": MAX_LOCAL_STEPS,
    }
