"""
Configuration for benchmark dataset generation
"""

# Particle count range (inclusive), drawn uniformly
N_MIN = 4
N_MAX = 20

# Mass range, drawn uniformly
MASS_MIN = 0.9
MASS_MAX = 1.1

# Dynamic separation target: uniform on [0, SEPARATION_MAX] over SEPARATION_BINS bins
SEPARATION_MAX = 0.1
SEPARATION_BINS = 20

# A balanced candidate is kept only if its bin holds at most BALANCE_SLACK more
# configurations than the emptiest bin
BALANCE_SLACK = 2

# Rejection loop gives up after BUDGET_FACTOR * count candidates
BUDGET_FACTOR = 10 ** 4

# Second noise dataset: two particles at least this far apart at all times
FAR_PAIR_SEPARATION = 0.4


def get_dataset_config():
    """Get dataset generation defaults"""
    return {
        "n_min": N_MIN,
        "n_max": N_MAX,
        "mass_min": MASS_MIN,
        "mass_max": MASS_MAX,
        "sep_max": SEPARATION_MAX,
        "bins": SEPARATION_BINS,
        "balance_slack": BALANCE_SLACK,
        "budget_factor": BUDGET_FACTOR,
    }
