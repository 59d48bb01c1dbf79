"""
Dataset files: JSON lines, a header record with the DatasetSpec first, then one
particle configuration per line.
"""
from pathlib import Path
from typing import List, Tuple
import json
import logging

from modules.datagen.index import DatasetSpec
from modules.measures.index import ParticleConfig

logger = logging.getLogger(__name__)


def save_dataset(path, spec: DatasetSpec, configs: List[ParticleConfig]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w') as fh:
        fh.write(json.dumps({"header": spec.to_dict()}, sort_keys=True) + "\n")
        for config in configs:
            fh.write(json.dumps(config.to_dict()) + "\n")
    logger.info(f"Wrote {len(configs)} configurations to {path}")
    return path


def load_dataset(path) -> Tuple[DatasetSpec, List[ParticleConfig]]:
    path = Path(path)
    with open(path) as fh:
        lines = [line for line in fh if line.strip()]
    if not lines:
        raise ValueError(f"dataset file {path} is empty")
    first = json.loads(lines[0])
    if "header" not in first:
        raise ValueError(f"dataset file {path} has no header record")
    spec = DatasetSpec.from_dict(first["header"])
    configs = [ParticleConfig.from_json(line) for line in lines[1:]]
    return spec, configs
