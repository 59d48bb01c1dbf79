from sqlalchemy import Column, Integer, String, Boolean, DateTime, Float, Text, UniqueConstraint
from sqlalchemy.sql import func
from db.base import Base


class ExperimentRun(Base):
    """Experiment run - one row per distinct configuration hash"""
    __tablename__ = "experiment_runs"

    id = Column(Integer, primary_key=True, index=True)
    config_hash = Column(String(64), unique=True, index=True, nullable=False)
    command = Column(String(50), nullable=False)
    config_json = Column(Text, nullable=False)
    created_at = Column(DateTime(timezone=True), server_default=func.now(), nullable=False)


class ReconstructionRecord(Base):
    """Reconstruction result - one row per (configuration, instance, method, noise level)"""
    __tablename__ = "reconstructions"
    __table_args__ = (
        UniqueConstraint("config_hash", "instance_id", "method", "delta", name="uq_reconstruction"),
    )

    id = Column(Integer, primary_key=True, index=True)
    config_hash = Column(String(64), index=True, nullable=False)
    instance_id = Column(Integer, nullable=False, index=True)
    method = Column(String(20), nullable=False)
    delta = Column(Float, nullable=False)
    alpha = Column(Float, nullable=False)
    uw = Column(Float, nullable=True)  # None for failed instances
    matched = Column(Boolean, default=False, nullable=False)
    runtime_ms = Column(Float, nullable=False)
    n_particles = Column(Integer, nullable=False)
    n_detected = Column(Integer, nullable=False)
    dynamic_separation = Column(Float, nullable=True)  # None for single particles
    converged = Column(Boolean, default=False, nullable=False)
    status = Column(String(20), nullable=False)
    created_at = Column(DateTime(timezone=True), server_default=func.now(), nullable=False)
