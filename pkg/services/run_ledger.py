"""
Run Ledger
Per-run JSON manifest (inputs, config, versions, timings, artifacts) mirrored
into the SQLAlchemy run database
"""

import hashlib
import json
import logging
import platform
import time
from contextlib import contextmanager
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Union

from sqlalchemy.exc import SQLAlchemyError

from app_settings import settings

logger = logging.getLogger(__name__)

MANIFEST_NAME = "run_manifest.json"
TRACKED_PACKAGES = ("numpy", "scipy", "pandas", "scikit-learn", "pydantic", "SQLAlchemy", "Jinja2")


def sha256_of(path: Union[str, Path]) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for block in iter(lambda: handle.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def package_versions() -> Dict[str, str]:
    versions = {"python": platform.python_version(), "malspread": settings.VERSION}
    for name in TRACKED_PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "unknown"
    return versions


class RunLedger:
    """Collects what one CLI command read, produced and how long each stage took"""

    def __init__(self, command: str, config: Dict[str, Any], output_dir: Union[str, Path],
                 inputs: Iterable[Union[str, Path]] = (), record_database: bool = True):
        self.command = command
        self.config = config
        self.output_dir = Path(output_dir)
        self.inputs = [Path(p) for p in inputs]
        self.record_database = record_database
        self.artifacts: List[Path] = []
        self.counters: Dict[str, Any] = {}
        self.stages: Dict[str, float] = {}
        self._started = time.perf_counter()

    @contextmanager
    def stage(self, name: str):
        start = time.perf_counter()
        try:
            yield
        finally:
            self.stages[name] = round(time.perf_counter() - start, 6)

    def add_artifacts(self, paths: Iterable[Union[str, Path]]) -> None:
        self.artifacts.extend(Path(p) for p in paths)

    def note(self, key: str, value: Any) -> None:
        self.counters[key] = value

    def _describe(self, path: Path) -> Dict[str, Any]:
        try:
            name = str(path.relative_to(self.output_dir))
        except ValueError:
            name = str(path)
        return {"path": name, "sha256": sha256_of(path), "size_bytes": path.stat().st_size}

    def manifest(self, exit_code: int, error: Optional[str] = None) -> Dict[str, Any]:
        """Everything except `run_timing` is reproducible for identical inputs and config"""
        return {
            "command": self.command,
            "config": self.config,
            "inputs": [{"path": str(p), "sha256": sha256_of(p)} for p in self.inputs if p.is_file()],
            "artifacts": [self._describe(p) for p in self.artifacts if p.exists()],
            "counters": self.counters,
            "versions": package_versions(),
            "exit_code": exit_code,
            "error": error,
            "run_timing": {
                "finished_at": datetime.now(timezone.utc).isoformat(),
                "total_seconds": round(time.perf_counter() - self._started, 6),
                "stages": self.stages,
            },
        }

    def finish(self, exit_code: int = 0, error: Optional[str] = None) -> Path:
        self.output_dir.mkdir(parents=True, exist_ok=True)
        manifest = self.manifest(exit_code, error)
        path = self.output_dir / MANIFEST_NAME
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")
        if self.record_database:
            self._record(manifest, path)
        return path

    def _record(self, manifest: Dict[str, Any], manifest_path: Path) -> None:
        # imported lazily so the engine is only created for commands that record runs
        from database.database import get_db
        from database.init_db import create_tables
        from database.models import ArtifactRecord, RunRecord, RunStatus

        try:
            create_tables()
            with next(get_db()) as db:
                run = RunRecord(
                    command=self.command,
                    status=RunStatus.SUCCEEDED if manifest["exit_code"] == 0 else RunStatus.FAILED,
                    exit_code=manifest["exit_code"],
                    seed=self.config.get("seed"),
                    config_json=json.dumps(self.config, sort_keys=True, default=str),
                    manifest_path=str(manifest_path),
                    error_message=manifest["error"],
                    duration_seconds=manifest["run_timing"]["total_seconds"],
                    finished_at=datetime.now(timezone.utc),
                )
                for artifact in manifest["artifacts"]:
                    run.artifacts.append(ArtifactRecord(path=artifact["path"], sha256=artifact["sha256"],
                                                        size_bytes=artifact["size_bytes"]))
                db.add(run)
                db.commit()
                logger.debug(f"Recorded run {run.id} ({self.command}) in the ledger")
        except SQLAlchemyError as e:
            logger.warning(f"⚠️ Could not record run in ledger: {e}")
