"""
Dysasr CLI Module

Command-line entry point and the stage pipeline it drives.
"""

from dysasr.cli.main import main, run_cli
from dysasr.cli.pipeline import STAGES, Pipeline

__all__ = ["STAGES", "Pipeline", "main", "run_cli"]
