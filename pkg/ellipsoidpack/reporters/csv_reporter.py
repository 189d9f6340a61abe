"""CSV report generator for ellipsoidpack."""

import csv
import logging
from pathlib import Path

from ellipsoidpack.reporters.base import BaseReporter
from ellipsoidpack.models import EnsembleSummary


logger = logging.getLogger("ellipsoidpack")


class CSVReporter(BaseReporter):
    """Generate ensemble curve CSVs."""

    HEADER = ["t", "mean_logdet", "se_logdet", "mean_contacts", "mean_dimF"]

    def generate_report(self, summary: EnsembleSummary, filename: str = "ensemble") -> Path:
        """
        Generate CSV report.

        Args:
            summary: Ensemble summary
            filename: Output filename (without extension)

        Returns:
            Path to generated CSV file
        """
        output_path = self.path_for(filename)

        with open(output_path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(self.HEADER)
            for row in summary.rows():
                writer.writerow([repr(value) for value in row])

        logger.info(f"Generated CSV report: {output_path}")
        return output_path

    def get_extension(self) -> str:
        """Get file extension."""
        return ".csv"
