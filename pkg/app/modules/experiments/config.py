"""
Experiment configuration: defaults, config files and the run hash.

Config files are key=value text (read with python-dotenv); keys are the
ExperimentConfig field names in upper case, lists are comma-separated.
Precedence: command-line flag > config file > defaults.
"""
from dataclasses import asdict, dataclass, field, fields
from typing import Optional
import hashlib
import json
import logging
import math

from dotenv import dotenv_values

from shared.constants.command_register import DIMRED_PRESETS, METHOD_REDUCED, METHOD_STATIC, METHODS, PRESET_MID
from shared.constants.defaults import (
    ALPHA_NOISEFREE, C_ALPHA, DATASET_COUNT, FREQUENCY_CUTOFF, FULL_DATASET_COUNT, FULL_GRID_SIZE, GRID_SIZE,
    MATCH_RADIUS, SEPARATION_BIN_WIDTH, SEPARATION_MAX, TAU, UW_RADIUS, W_MIN,
)

logger = logging.getLogger(__name__)

# Noise experiment: deltas and the range used for the slope fit
NOISE_DELTAS = (1.0, 3.0, 10.0, 30.0, 100.0)
NOISE_FIT_MIN = 1.0
NOISE_FIT_MAX = 100.0

# Exact-recovery experiment: measurement-time counts K to compare
EXACT_KS = (1, 2)

# Fields that do not change result rows and stay out of the hash
UNHASHED_FIELDS = ("output_dir", "workers", "resume", "dataset", "full_scale")


@dataclass
class ExperimentConfig:
    method: str = METHOD_REDUCED
    M: int = GRID_SIZE
    preset: Optional[str] = PRESET_MID
    n_directions: Optional[int] = None
    n_extra: Optional[int] = None
    K: int = 1
    cutoff: int = FREQUENCY_CUTOFF
    alpha: Optional[float] = None
    c_alpha: float = C_ALPHA
    tau: float = TAU
    deltas: tuple = (0.0,)
    w_min: float = W_MIN
    match_radius: float = MATCH_RADIUS
    uw_radius: float = UW_RADIUS
    max_iters: Optional[int] = None
    feas_tol: Optional[float] = None
    obj_tol: Optional[float] = None
    seed: int = 0
    count: int = DATASET_COUNT
    keep_per_level: Optional[int] = None
    fit_min: float = NOISE_FIT_MIN
    fit_max: float = NOISE_FIT_MAX
    ks: tuple = EXACT_KS
    methods: tuple = (METHOD_STATIC, METHOD_REDUCED)
    filter_correct: bool = False
    bin_width: float = SEPARATION_BIN_WIDTH
    sep_max: float = SEPARATION_MAX
    dataset: Optional[str] = None
    output_dir: Optional[str] = None
    workers: Optional[int] = None
    resume: bool = False
    full_scale: bool = False

    def __post_init__(self):
        self.deltas = tuple(float(d) for d in self.deltas)
        self.ks = tuple(int(k) for k in self.ks)
        self.methods = tuple(self.methods)
        for method in (self.method,) + self.methods:
            if method not in METHODS:
                raise ValueError(f"unknown method {method!r}, expected one of {METHODS}")
        if self.preset is not None and self.preset not in DIMRED_PRESETS:
            raise ValueError(f"unknown preset {self.preset!r}, expected one of {tuple(DIMRED_PRESETS)}")
        if self.M < 1 or self.K < 1 or self.cutoff < 0:
            raise ValueError(f"invalid discretization M={self.M}, K={self.K}, cutoff={self.cutoff}")
        if self.alpha is not None and self.alpha <= 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.tau < 0:
            raise ValueError(f"tau must be nonnegative, got {self.tau}")
        if any(d < 0 for d in self.deltas):
            raise ValueError(f"noise levels must be nonnegative, got {self.deltas}")
        if self.count < 1:
            raise ValueError(f"count must be at least 1, got {self.count}")
        if self.M >= FULL_GRID_SIZE or self.count >= FULL_DATASET_COUNT:
            if not self.full_scale:
                raise ValueError(
                    f"M={self.M} / count={self.count} are full-scale settings; pass --full-scale to run them"
                )
            logger.warning(f"Running at full scale (M={self.M}, count={self.count}); expect long runtimes")

    @property
    def directions_count(self) -> int:
        if self.n_directions is not None:
            return self.n_directions
        return DIMRED_PRESETS[self.preset or PRESET_MID][0]

    @property
    def extra_count(self) -> int:
        if self.n_extra is not None:
            return self.n_extra
        return DIMRED_PRESETS[self.preset or PRESET_MID][1]

    def alpha_for(self, delta: float) -> float:
        """Fixed alpha if given, else 0.005 without noise and C_alpha sqrt(delta) with noise"""
        if self.alpha is not None:
            return self.alpha
        if delta == 0:
            return ALPHA_NOISEFREE
        return self.c_alpha * math.sqrt(delta)

    def solver_options(self) -> dict:
        options = {}
        if self.max_iters is not None:
            options["max_iters"] = self.max_iters
        if self.feas_tol is not None:
            options["feas_tol"] = self.feas_tol
        if self.obj_tol is not None:
            options["obj_tol"] = self.obj_tol
        return options

    def to_dict(self) -> dict:
        data = asdict(self)
        for key in ("deltas", "ks", "methods"):
            data[key] = list(data[key])
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in known})


def config_hash(config: ExperimentConfig, dataset_digest: str = "") -> str:
    """sha256 over every result-relevant field plus the dataset content digest"""
    payload = {k: v for k, v in config.to_dict().items() if k not in UNHASHED_FIELDS}
    payload["dataset_digest"] = dataset_digest
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


def _parse(value: str, kind):
    value = value.strip()
    if kind is bool:
        if value.lower() in ("1", "true", "yes", "on"):
            return True
        if value.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"cannot read {value!r} as a boolean")
    if value.lower() in ("", "none"):
        return None
    return kind(value)


# Element types of the tuple fields
_TUPLE_KINDS = {"deltas": float, "ks": int, "methods": str}
_SCALAR_KINDS = {
    "method": str, "M": int, "preset": str, "n_directions": int, "n_extra": int, "K": int, "cutoff": int,
    "alpha": float, "c_alpha": float, "tau": float, "w_min": float, "match_radius": float,
    "uw_radius": float, "max_iters": int, "feas_tol": float, "obj_tol": float, "seed": int, "count": int,
    "keep_per_level": int, "fit_min": float, "fit_max": float, "filter_correct": bool, "bin_width": float,
    "sep_max": float, "dataset": str, "output_dir": str, "workers": int, "resume": bool, "full_scale": bool,
}


def parse_values(raw: dict) -> dict:
    """Typed values from a {field: text} mapping; unknown keys are rejected"""
    values = {}
    for key, text in raw.items():
        name = next((f for f in list(_SCALAR_KINDS) + list(_TUPLE_KINDS) if f.lower() == key.lower()), None)
        if name is None:
            raise ValueError(f"unknown configuration key {key!r}")
        if text is None:
            continue
        if name in _TUPLE_KINDS:
            values[name] = tuple(_parse(part, _TUPLE_KINDS[name]) for part in str(text).split(",") if part.strip())
        else:
            values[name] = _parse(str(text), _SCALAR_KINDS[name])
    return values


def load_config_file(path) -> dict:
    """Typed field values from a key=value config file"""
    return parse_values(dotenv_values(path))


def build_config(file_values: Optional[dict] = None, flag_values: Optional[dict] = None) -> ExperimentConfig:
    """Defaults, overridden by file values, overridden by flags (None flags are ignored)"""
    values = dict(file_values or {})
    values.update({k: v for k, v in (flag_values or {}).items() if v is not None})
    return ExperimentConfig(**values)
