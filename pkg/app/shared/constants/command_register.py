# Subcommands
COMMAND_GENERATE = "generate"
COMMAND_RECONSTRUCT = "reconstruct"
COMMAND_EVALUATE = "evaluate"
COMMAND_EXP_EXACT = "exp-exact"
COMMAND_EXP_NOISE = "exp-noise"
COMMAND_ANALYZE_GHOSTS = "analyze-ghosts"

# Reconstruction methods
METHOD_STATIC = "static"
METHOD_REDUCED = "reduced"
METHOD_ADCG = "adcg"
METHODS = (METHOD_STATIC, METHOD_REDUCED, METHOD_ADCG)

# Dimension-reduced presets: (number of directions, number of extra times)
PRESET_LOW = "low"
PRESET_MID = "mid"
PRESET_HIGH = "high"
DIMRED_PRESETS = {
    PRESET_LOW: (3, 0),
    PRESET_MID: (5, 3),
    PRESET_HIGH: (10, 7),
}

# Row status values
STATUS_OK = "ok"
STATUS_FAILED = "failed"

# Result CSV columns, in file order
RESULT_COLUMNS = [
    "instance_id",
    "method",
    "delta",
    "alpha",
    "uw",
    "matched",
    "runtime_ms",
    "n_particles",
    "n_detected",
    "dynamic_separation",
    "converged",
    "status",
    "config_hash",
]
