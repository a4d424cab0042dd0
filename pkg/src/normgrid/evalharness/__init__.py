"""Scoring, experiment runs, statistics and reports."""
from .metrics import (ClassMetrics, interpretation_accuracy, per_class_prf,
                      plan_atoms, predicted_atoms, score_options, score_task)
from .report import MetricsReport, render_text, summarize, write_report
from .runner import (BadRatingValue, RunRecord, ingest_ratings, load_records,
                     run_experiment, save_records)
from .stats import DegenerateSample, StatsResult, paired_stats, paired_stats_from_diffs

__all__ = [
    "BadRatingValue", "ClassMetrics", "DegenerateSample", "MetricsReport",
    "RunRecord", "StatsResult", "ingest_ratings", "interpretation_accuracy",
    "load_records", "paired_stats", "paired_stats_from_diffs", "per_class_prf",
    "plan_atoms", "predicted_atoms", "render_text", "run_experiment",
    "save_records", "score_options", "score_task", "summarize", "write_report",
]
