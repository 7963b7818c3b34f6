"""Artifact writers, text reports and figure renderers."""

from app.adapters.exporters import read_csv, write_csv, write_json, write_text
from app.adapters.reports import render_hypothesis_report, render_performance, render_scorecard, render_variance

__all__ = [
    'read_csv',
    'write_csv',
    'write_json',
    'write_text',
    'render_hypothesis_report',
    'render_performance',
    'render_scorecard',
    'render_variance',
]
