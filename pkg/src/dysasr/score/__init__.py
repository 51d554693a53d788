"""
Dysasr Score Module

WER, oracle WER, severity/seen breakdowns, significance tests and reports.
"""

from dysasr.score.breakdown import (
    ScoredUtterance,
    compare_systems,
    group_breakdown,
    mapsswe_test,
    oracle_counts,
    oracle_wer,
    paired_sign_test,
    segment_errors,
)
from dysasr.score.render import (
    ReportTemplate,
    read_report_json,
    render_summary,
    write_report_json,
    write_report_tsv,
)
from dysasr.score.wer import EditCounts, edit_distance_wer, tokenize_chars, tokenize_words

__all__ = [
    "EditCounts",
    "ReportTemplate",
    "ScoredUtterance",
    "compare_systems",
    "edit_distance_wer",
    "group_breakdown",
    "mapsswe_test",
    "oracle_counts",
    "oracle_wer",
    "paired_sign_test",
    "read_report_json",
    "render_summary",
    "segment_errors",
    "tokenize_chars",
    "tokenize_words",
    "write_report_json",
    "write_report_tsv",
]
