import asyncio
import logging
import shutil
from datetime import datetime, timedelta
from pathlib import Path
from typing import Optional, Set

from .run_cache import RunCache

logger = logging.getLogger(__name__)


class CleanupService:
    """
    Periodic cleanup of landing-run trace directories.

    Each run writes its CSV files into ``<runs_dir>/<run_id>/``. Directories
    older than the retention period are removed unless the run is still being
    written; the cached report survives, only the trace location is cleared.
    """

    def __init__(
        self,
        runs_dir: str = "data/runs",
        cleanup_interval_minutes: int = 10,
        run_max_age_minutes: int = 60,
        run_cache: Optional[RunCache] = None,
    ):
        """
        Args:
            runs_dir (str): Directory holding one sub-directory per run
            cleanup_interval_minutes (int): How often to run cleanup
            run_max_age_minutes (int): Age after which a run directory is removed
            run_cache (RunCache): Cache whose trace locations are cleared on removal
        """
        self.runs_dir = Path(runs_dir)
        self.cleanup_interval = timedelta(minutes=cleanup_interval_minutes)
        self.run_max_age = timedelta(minutes=run_max_age_minutes)
        self.run_cache = run_cache

        self.active_runs: Set[str] = set()
        self.cleanup_task = None
        self.running = False

        logger.info(
            f"Cleanup service initialized - interval: {cleanup_interval_minutes}min, max age: {run_max_age_minutes}min"
        )

    def add_active_run(self, run_id: str):
        self.active_runs.add(run_id)
        logger.debug(f"Added active run: {run_id}")

    def remove_active_run(self, run_id: str):
        self.active_runs.discard(run_id)
        logger.debug(f"Removed active run: {run_id}")

    def cleanup_runs(self, now: Optional[datetime] = None) -> int:
        """
        Remove expired run directories.

        Args:
            now (datetime): Reference time, defaults to the current time

        Returns:
            int: Number of run directories deleted
        """
        if not self.runs_dir.exists():
            return 0

        now = now or datetime.now()
        deleted_count = 0
        for run_dir in sorted(self.runs_dir.iterdir()):
            if not run_dir.is_dir():
                continue
            if run_dir.name in self.active_runs:
                logger.debug(f"Skipping active run: {run_dir.name}")
                continue
            try:
                age = now - datetime.fromtimestamp(run_dir.stat().st_mtime)
                if age <= self.run_max_age:
                    continue
                shutil.rmtree(run_dir)
                deleted_count += 1
                logger.info(f"Deleted old run directory: {run_dir.name} (age: {age})")
                if self.run_cache is not None:
                    self.run_cache.clear_trace_dir(run_dir.name)
            except (OSError, ValueError) as e:
                logger.error(f"Error processing run directory {run_dir}: {e}")
        return deleted_count

    async def run_cleanup_cycle(self) -> int:
        start_time = datetime.now()
        deleted = self.cleanup_runs()
        duration = datetime.now() - start_time
        if deleted:
            logger.info(f"Cleanup cycle completed: {deleted} run directories deleted in {duration}")
        else:
            logger.debug(f"Cleanup cycle completed: nothing deleted in {duration}")
        return deleted

    async def start(self):
        if self.running:
            logger.warning("Cleanup service is already running")
            return

        self.running = True
        logger.info(f"Starting cleanup service with {self.cleanup_interval} interval")
        try:
            while self.running:
                await self.run_cleanup_cycle()
                await asyncio.sleep(self.cleanup_interval.total_seconds())
        except asyncio.CancelledError:
            logger.info("Cleanup service cancelled")
        except Exception as e:
            logger.error(f"Cleanup service error: {e}")
        finally:
            self.running = False
            logger.info("Cleanup service stopped")

    async def stop(self):
        if not self.running and not self.cleanup_task:
            return

        logger.info("Stopping cleanup service")
        self.running = False
        if self.cleanup_task and not self.cleanup_task.done():
            self.cleanup_task.cancel()
            try:
                await self.cleanup_task
            except asyncio.CancelledError:
                pass

    def start_background_task(self):
        """
        Start the cleanup loop as a background task.

        Returns:
            asyncio.Task: The background cleanup task
        """
        if self.cleanup_task and not self.cleanup_task.done():
            logger.warning("Cleanup task already running")
            return self.cleanup_task

        self.cleanup_task = asyncio.create_task(self.start())
        return self.cleanup_task

    def get_status(self) -> dict:
        return {
            "running": self.running,
            "cleanup_interval_minutes": self.cleanup_interval.total_seconds() / 60,
            "run_max_age_minutes": self.run_max_age.total_seconds() / 60,
            "active_runs": sorted(self.active_runs),
            "runs_dir": str(self.runs_dir),
            "runs_dir_exists": self.runs_dir.exists(),
        }
