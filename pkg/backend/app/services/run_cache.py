import json
import logging
import sqlite3
from pathlib import Path
from typing import Dict, List, Optional

from .scenario import LandingReport

logger = logging.getLogger(__name__)


class RunCache:
    """SQLite store of landing reports keyed by the run's config digest.

    Landing runs are deterministic, so a digest seen before is served from
    here instead of being flown again.
    """

    def __init__(self, db_path: str = "data/runs.sqlite3"):
        self.db_path = Path(db_path)
        self.db_path.parent.mkdir(parents=True, exist_ok=True)
        self._init_database()

    def _init_database(self):
        with sqlite3.connect(self.db_path) as conn:
            cursor = conn.cursor()
            cursor.execute("""
                CREATE TABLE IF NOT EXISTS landing_runs (
                    run_id TEXT PRIMARY KEY,
                    seed INTEGER NOT NULL,
                    config TEXT NOT NULL,  -- canonical JSON
                    report TEXT NOT NULL,  -- LandingReport JSON
                    trace_dir TEXT,
                    created_at TIMESTAMP DEFAULT CURRENT_TIMESTAMP
                )
            """)
            cursor.execute("""
                CREATE INDEX IF NOT EXISTS idx_landing_runs_created
                ON landing_runs(created_at)
            """)
            conn.commit()

    def save_run(
        self,
        run_id: str,
        config: Dict,
        report: LandingReport,
        trace_dir: Optional[str] = None,
    ) -> bool:
        try:
            with sqlite3.connect(self.db_path) as conn:
                conn.execute(
                    """
                    INSERT OR REPLACE INTO landing_runs (run_id, seed, config, report, trace_dir)
                    VALUES (?, ?, ?, ?, ?)
                    """,
                    (
                        run_id,
                        report.seed,
                        json.dumps(config, sort_keys=True),
                        report.model_dump_json(),
                        trace_dir,
                    ),
                )
                conn.commit()
                logger.info(f"Cached run {run_id[:12]} (success={report.success})")
                return True
        except Exception as e:
            logger.error(f"Error caching run {run_id}: {e}")
            return False

    def get_report(self, run_id: str) -> Optional[LandingReport]:
        try:
            with sqlite3.connect(self.db_path) as conn:
                row = conn.execute(
                    "SELECT report FROM landing_runs WHERE run_id = ?", (run_id,)
                ).fetchone()
        except Exception as e:
            logger.error(f"Error reading run {run_id}: {e}")
            return None
        if row is None:
            return None
        return LandingReport.model_validate_json(row[0])

    def get_trace_dir(self, run_id: str) -> Optional[Path]:
        try:
            with sqlite3.connect(self.db_path) as conn:
                row = conn.execute(
                    "SELECT trace_dir FROM landing_runs WHERE run_id = ?", (run_id,)
                ).fetchone()
        except Exception as e:
            logger.error(f"Error reading trace location for {run_id}: {e}")
            return None
        if row is None or row[0] is None:
            return None
        return Path(row[0])

    def clear_trace_dir(self, run_id: str) -> None:
        """Forget the trace location once its files are gone; the report stays."""
        try:
            with sqlite3.connect(self.db_path) as conn:
                conn.execute("UPDATE landing_runs SET trace_dir = NULL WHERE run_id = ?", (run_id,))
                conn.commit()
        except Exception as e:
            logger.error(f"Error clearing trace location for {run_id}: {e}")

    def list_runs(self, limit: int = 50) -> List[Dict]:
        try:
            with sqlite3.connect(self.db_path) as conn:
                conn.row_factory = sqlite3.Row
                rows = conn.execute(
                    """
                    SELECT run_id, seed, report, trace_dir, created_at FROM landing_runs
                    ORDER BY created_at DESC, run_id LIMIT ?
                    """,
                    (limit,),
                ).fetchall()
        except Exception as e:
            logger.error(f"Error listing runs: {e}")
            return []
        return [
            {
                "run_id": row["run_id"],
                "seed": row["seed"],
                "report": json.loads(row["report"]),
                "has_trace": row["trace_dir"] is not None,
                "created_at": row["created_at"],
            }
            for row in rows
        ]

    def count(self) -> int:
        try:
            with sqlite3.connect(self.db_path) as conn:
                return conn.execute("SELECT COUNT(*) FROM landing_runs").fetchone()[0]
        except Exception as e:
            logger.error(f"Error counting runs: {e}")
            return 0
