"""Report generators for ellipsoidpack."""

from ellipsoidpack.reporters.base import BaseReporter
from ellipsoidpack.reporters.json_reporter import JSONReporter
from ellipsoidpack.reporters.trajectory_reporter import TrajectoryReporter
from ellipsoidpack.reporters.html_reporter import HTMLReporter
from ellipsoidpack.reporters.csv_reporter import CSVReporter
from ellipsoidpack.reporters.markdown_reporter import MarkdownReporter

__all__ = [
    "BaseReporter",
    "JSONReporter",
    "TrajectoryReporter",
    "HTMLReporter",
    "CSVReporter",
    "MarkdownReporter",
]
