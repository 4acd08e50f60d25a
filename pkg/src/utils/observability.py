"""
Observability Module

Logging, metrics, and stage tracing utilities for monitoring solver runs.
"""

from typing import Any, Callable, Dict, Optional
from functools import wraps
import logging
import time
import structlog
from prometheus_client import Counter, Histogram

from src.utils.errors import StageError


logger = structlog.get_logger(__name__)


# Prometheus Metrics
LINEAR_SOLVES = Counter(
    "wavepp_linear_solves_total",
    "Total L_h inverse solves",
    ["space", "mode"]
)

CG_ITERATIONS = Counter(
    "wavepp_cg_iterations_total",
    "Total preconditioned CG iterations",
    ["space"]
)

TIME_STEPS = Counter(
    "wavepp_time_steps_total",
    "Total explicit time steps taken"
)

STAGE_LATENCY = Histogram(
    "wavepp_stage_latency_seconds",
    "Pipeline stage execution latency",
    ["stage"],
    buckets=[0.01, 0.1, 0.5, 1.0, 5.0, 30.0, 120.0, 600.0]
)


def configure_logging(level: str = "INFO", json_logs: bool = False) -> None:
    """Configure structlog processors once per process."""
    renderer = (
        structlog.processors.JSONRenderer()
        if json_logs
        else structlog.dev.ConsoleRenderer()
    )
    structlog.configure(
        processors=[
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            renderer,
        ],
        wrapper_class=structlog.make_filtering_bound_logger(
            logging.getLevelName(level.upper())
        ),
        cache_logger_on_first_use=True,
    )
    logger.debug("logging_configured", level=level, json_logs=json_logs)


def trace_stage(stage: str) -> Callable:
    """Decorator to time a pipeline stage and tag failures with its name."""
    def decorator(func: Callable) -> Callable:
        @wraps(func)
        def wrapper(*args, **kwargs):
            start_time = time.perf_counter()

            try:
                result = func(*args, **kwargs)
            except StageError:
                raise
            except Exception as e:
                logger.error("stage_failed", stage=stage, error=str(e))
                raise StageError(stage, e) from e

            duration = time.perf_counter() - start_time
            STAGE_LATENCY.labels(stage=stage).observe(duration)
            logger.debug("stage_completed", stage=stage, duration=duration)
            return result

        return wrapper

    return decorator


class SolverStats:
    """Collect linear-solve counts and CG iterations for one run."""

    LADDERS = ("pre_u", "pre_v", "post_u", "post_v", "diagnostic")

    def __init__(self, run_name: str = "run"):
        self.run_name = run_name
        self.solves: Dict[str, Dict[str, int]] = {
            ladder: {"solves": 0, "iterations": 0} for ladder in self.LADDERS
        }

    def record_solve(
        self,
        ladder: str,
        iterations: int,
        space: str = "low",
        mode: Optional[str] = None
    ) -> None:
        """Record one L_h inverse solve."""
        LINEAR_SOLVES.labels(space=space, mode=mode or "unknown").inc()
        CG_ITERATIONS.labels(space=space).inc(iterations)

        if ladder not in self.solves:
            self.solves[ladder] = {"solves": 0, "iterations": 0}
        self.solves[ladder]["solves"] += 1
        self.solves[ladder]["iterations"] += iterations

    @property
    def total_solves(self) -> int:
        return sum(entry["solves"] for entry in self.solves.values())

    def get_stats(self) -> Dict[str, Any]:
        """Get collected statistics."""
        return {
            "run_name": self.run_name,
            "total_solves": self.total_solves,
            "ladders": {k: dict(v) for k, v in self.solves.items()},
        }
