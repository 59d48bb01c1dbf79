"""
Result rows: CSV file (one fsync per row) mirrored into the results
database when it is available.
"""
from pathlib import Path
from typing import Dict, List, Optional, Set, Tuple
import csv
import logging
import math
import os

from shared.constants.command_register import RESULT_COLUMNS, STATUS_OK

logger = logging.getLogger(__name__)

# Column types used when reading rows back
_FLOAT_COLUMNS = ("delta", "alpha", "uw", "runtime_ms", "dynamic_separation")
_INT_COLUMNS = ("instance_id", "n_particles", "n_detected")
_BOOL_COLUMNS = ("matched", "converged")


def _format(value):
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return "" if math.isnan(value) else repr(value)
    return "" if value is None else str(value)


def _parse_row(raw: dict) -> dict:
    row = dict(raw)
    for key in _FLOAT_COLUMNS:
        row[key] = float(row[key]) if row.get(key) not in (None, "") else math.nan
    for key in _INT_COLUMNS:
        row[key] = int(row[key])
    for key in _BOOL_COLUMNS:
        row[key] = row.get(key) == "1"
    return row


def row_key(row: dict) -> Tuple[int, str, float]:
    return int(row["instance_id"]), row["method"], float(row["delta"])


def read_results(path) -> List[dict]:
    """Typed rows of a results CSV; a later row for the same key replaces an earlier one"""
    path = Path(path)
    if not path.exists():
        raise ValueError(f"results file {path} does not exist")
    rows: Dict[Tuple[int, str, float], dict] = {}
    with open(path, newline='') as fh:
        for raw in csv.DictReader(fh):
            row = _parse_row(raw)
            rows[row_key(row)] = row
    return list(rows.values())


class ResultWriter:
    """
    Single writer for one results file. Rows are appended and synced one by
    one so that an interrupted sweep loses at most the row in flight.
    """

    def __init__(self, path, config_hash: str, use_db: bool = True):
        self.path = Path(path)
        self.config_hash = config_hash
        self.path.parent.mkdir(parents=True, exist_ok=True)
        if not self.path.exists() or self.path.stat().st_size == 0:
            with open(self.path, 'w', newline='') as fh:
                csv.DictWriter(fh, fieldnames=RESULT_COLUMNS).writeheader()
        self._db = self._open_db() if use_db else None
        self.written = 0

    def _open_db(self):
        try:
            from db.init_db import init_db
            from db.session import get_db_session
            init_db()
            return get_db_session()
        except Exception as e:
            logger.warning(f"Results database not available: {e}. Writing CSV only.")
            return None

    def register_run(self, command: str, config_json: str) -> None:
        if self._db is None:
            return
        try:
            from db.repository import get_or_create_run
            get_or_create_run(self._db, self.config_hash, command, config_json)
        except Exception as e:
            logger.warning(f"Could not register run {self.config_hash[:12]}: {e}")
            self._db.rollback()

    def completed(self, method: str, delta: float) -> Set[int]:
        """Instance ids already reconstructed successfully for (method, delta)"""
        if self._db is not None:
            try:
                from db.repository import get_completed_instance_ids
                return get_completed_instance_ids(self._db, self.config_hash, method, delta)
            except Exception as e:
                logger.warning(f"Could not read completed instances from the database: {e}. Using the CSV.")
                self._db.rollback()
        if not self.path.exists():
            return set()
        return {
            row["instance_id"] for row in read_results(self.path)
            if row["config_hash"] == self.config_hash and row["method"] == method
            and row["delta"] == float(delta) and row["status"] == STATUS_OK
        }

    def write(self, row: dict) -> None:
        with open(self.path, 'a', newline='') as fh:
            writer = csv.DictWriter(fh, fieldnames=RESULT_COLUMNS, extrasaction='ignore')
            writer.writerow({key: _format(row.get(key)) for key in RESULT_COLUMNS})
            fh.flush()
            os.fsync(fh.fileno())
        self.written += 1
        if self._db is not None:
            try:
                from db.repository import record_reconstruction
                record_reconstruction(self._db, row)
            except Exception as e:
                logger.error(f"Failed to store row for instance {row.get('instance_id')}: {e}", exc_info=True)
                self._db.rollback()

    def close(self) -> None:
        if self._db is not None:
            try:
                self._db.close()
            except Exception as close_error:
                logger.warning(f"Error closing database session: {close_error}")
            self._db = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False
