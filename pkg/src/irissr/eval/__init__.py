"""Verification protocol: pairing, EER/ROC, histograms, quality and reports."""

from .quality import PSNR_SENTINEL, QualitySummary, pair_quality, quality_report
from .report import (REPORT_COLUMNS, ReportRow, histogram_svg, read_report_csv, roc_svg,
                     write_report_csv, write_scores_csv)
from .scores import (Histogram, ScoreSet, brute_force_eer, compute_eer, enumerate_pairs,
                     histogram, pair_counts, pair_scores, roc_curve)

__all__ = [
    "PSNR_SENTINEL", "QualitySummary", "pair_quality", "quality_report", "REPORT_COLUMNS",
    "ReportRow", "histogram_svg", "read_report_csv", "roc_svg", "write_report_csv",
    "write_scores_csv", "Histogram", "ScoreSet", "brute_force_eer", "compute_eer",
    "enumerate_pairs", "histogram", "pair_counts", "pair_scores", "roc_curve",
]
