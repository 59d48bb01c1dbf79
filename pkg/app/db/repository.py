from sqlalchemy.orm import Session
from typing import List, Optional, Set
import math
from db.models import ExperimentRun, ReconstructionRecord
from shared.constants.command_register import STATUS_OK
import logging

logger = logging.getLogger(__name__)


def _nullable(value):
    """Database columns store non-finite floats as NULL"""
    if value is None:
        return None
    value = float(value)
    return value if math.isfinite(value) else None


def get_or_create_run(db: Session, config_hash: str, command: str, config_json: str) -> ExperimentRun:
    """Get the run for a configuration hash or register a new one"""
    run = db.query(ExperimentRun).filter(ExperimentRun.config_hash == config_hash).first()
    if run:
        return run

    run = ExperimentRun(config_hash=config_hash, command=command, config_json=config_json)
    db.add(run)
    db.commit()
    db.refresh(run)
    logger.info(f"Registered experiment run: config_hash={config_hash[:12]} command={command}")
    return run


def record_reconstruction(db: Session, row: dict) -> ReconstructionRecord:
    """Store one result row; an existing row for the same key is replaced"""
    existing = db.query(ReconstructionRecord).filter(
        ReconstructionRecord.config_hash == row["config_hash"],
        ReconstructionRecord.instance_id == int(row["instance_id"]),
        ReconstructionRecord.method == row["method"],
        ReconstructionRecord.delta == float(row["delta"]),
    ).first()
    record = existing or ReconstructionRecord(
        config_hash=row["config_hash"],
        instance_id=int(row["instance_id"]),
        method=row["method"],
        delta=float(row["delta"]),
    )
    record.alpha = float(row["alpha"])
    record.uw = _nullable(row.get("uw"))
    record.matched = bool(row.get("matched", False))
    record.runtime_ms = float(row.get("runtime_ms", 0.0))
    record.n_particles = int(row.get("n_particles", 0))
    record.n_detected = int(row.get("n_detected", 0))
    record.dynamic_separation = _nullable(row.get("dynamic_separation"))
    record.converged = bool(row.get("converged", False))
    record.status = row["status"]
    if existing is None:
        db.add(record)
    db.commit()
    db.refresh(record)
    return record


def get_completed_instance_ids(db: Session, config_hash: str, method: Optional[str] = None,
                               delta: Optional[float] = None) -> Set[int]:
    """Instance ids with a successful stored row for this configuration"""
    query = db.query(ReconstructionRecord.instance_id).filter(
        ReconstructionRecord.config_hash == config_hash,
        ReconstructionRecord.status == STATUS_OK,
    )
    if method is not None:
        query = query.filter(ReconstructionRecord.method == method)
    if delta is not None:
        query = query.filter(ReconstructionRecord.delta == float(delta))
    return {instance_id for (instance_id,) in query.all()}


def get_reconstructions(db: Session, config_hash: Optional[str] = None) -> List[ReconstructionRecord]:
    """Stored rows ordered by instance, optionally for one configuration"""
    query = db.query(ReconstructionRecord)
    if config_hash is not None:
        query = query.filter(ReconstructionRecord.config_hash == config_hash)
    return query.order_by(ReconstructionRecord.instance_id, ReconstructionRecord.method,
                          ReconstructionRecord.delta).all()
