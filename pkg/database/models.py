from sqlalchemy import Column, Integer, String, DateTime, Text, ForeignKey, Enum, Float
from sqlalchemy.orm import relationship
from sqlalchemy.sql import func
import enum
from database.database import Base


class RunStatus(enum.Enum):
    RUNNING = "running"
    SUCCEEDED = "succeeded"
    FAILED = "failed"


class RunRecord(Base):
    __tablename__ = "runs"

    id = Column(Integer, primary_key=True, index=True)
    command = Column(String(50), nullable=False, index=True)
    status = Column(Enum(RunStatus), default=RunStatus.RUNNING, nullable=False)
    exit_code = Column(Integer)
    seed = Column(Integer)
    config_json = Column(Text)
    manifest_path = Column(String(500))
    error_message = Column(Text)
    duration_seconds = Column(Float)
    started_at = Column(DateTime(timezone=True), server_default=func.now())
    finished_at = Column(DateTime(timezone=True))

    artifacts = relationship("ArtifactRecord", back_populates="run", cascade="all, delete-orphan")


class ArtifactRecord(Base):
    __tablename__ = "artifacts"

    id = Column(Integer, primary_key=True, index=True)
    run_id = Column(Integer, ForeignKey("runs.id"), nullable=False, index=True)
    path = Column(String(500), nullable=False)
    sha256 = Column(String(64), nullable=False)
    size_bytes = Column(Integer)
    created_at = Column(DateTime(timezone=True), server_default=func.now())

    run = relationship("RunRecord", back_populates="artifacts")
