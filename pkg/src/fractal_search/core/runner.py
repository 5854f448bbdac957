"""
Bounded worker pool for independent sweep stages.
"""
import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import Callable, Dict, List, Sequence, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")


class StageRunner:
    """
    Runs one job per stage on a thread pool. Jobs must not share mutable state.
    """

    def __init__(self, max_workers: int = 1):
        if max_workers < 1:
            raise ValueError(f"max_workers must be >= 1, got {max_workers}")
        self.max_workers = max_workers

    def run(
        self,
        stages: Sequence[int],
        job: Callable[[int], T],
        on_error: Callable[[int, Exception], T],
    ) -> List[T]:
        """
        Run ``job(stage)`` for every stage and return results in stage order.

        A job that raises is logged and replaced by ``on_error(stage, exc)``;
        the remaining stages keep running.
        """
        if self.max_workers == 1 or len(stages) <= 1:
            return [self._safe_run(stage, job, on_error) for stage in stages]

        results: Dict[int, T] = {}
        with ThreadPoolExecutor(max_workers=min(self.max_workers, len(stages))) as executor:
            futures = {executor.submit(job, stage): stage for stage in stages}
            for future in as_completed(futures):
                stage = futures[future]
                try:
                    results[stage] = future.result()
                except Exception as e:
                    logger.error(f"Stage {stage} failed: {e}", exc_info=True)
                    results[stage] = on_error(stage, e)
        return [results[stage] for stage in stages]

    def _safe_run(self, stage: int, job: Callable[[int], T], on_error: Callable[[int, Exception], T]) -> T:
        try:
            return job(stage)
        except Exception as e:
            logger.error(f"Stage {stage} failed: {e}", exc_info=True)
            return on_error(stage, e)
