# wavepp - Pre/Post-Processing Package
from src.processing.ladders import (
    InitialData,
    exact_derivative_ladder_check,
    postprocess_final,
    preprocess_initial,
    processing_counts_table,
)

__all__ = [
    "InitialData",
    "preprocess_initial",
    "postprocess_final",
    "processing_counts_table",
    "exact_derivative_ladder_check",
]
