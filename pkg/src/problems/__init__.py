# wavepp - Benchmark Problems Package
from src.problems.catalog import ProblemId, ProblemSpec, get_problem, with_final_time

__all__ = [
    "ProblemId",
    "ProblemSpec",
    "get_problem",
    "with_final_time",
]
