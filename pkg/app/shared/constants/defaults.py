"""
Numerical defaults shared across modules.
"""

# Observation domain is the unit cube [0,1]^d
SPACE_DIM = 2

# Truncated Fourier cutoff
FREQUENCY_CUTOFF = 2

# Atom merging tolerance for pushforwards (absolute, per coordinate)
MERGE_TOL = 1e-12

# Tolerance for membership tests against computed domains
DOMAIN_TOL = 1e-12

# Noise-free regularization and the alpha = C_alpha * sqrt(delta) rule
ALPHA_NOISEFREE = 0.005
C_ALPHA = 0.2

# Consistency slack of the reduced problem
TAU = 0.001

# Cluster extraction threshold and match radius at t = 0
W_MIN = 0.1
MATCH_RADIUS = 0.01

# Transport radius of the unbalanced Wasserstein error measure
UW_RADIUS = 0.05

# Desk-scale grid size and dataset size
GRID_SIZE = 50
DATASET_COUNT = 100

# Full-scale thresholds that trigger a runtime warning
FULL_GRID_SIZE = 100
FULL_DATASET_COUNT = 2000

# Dynamic separation binning used by the exact-recovery experiment
SEPARATION_MAX = 0.1
SEPARATION_BIN_WIDTH = 0.01
