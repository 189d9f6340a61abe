"""Markdown report generator for ellipsoidpack."""

import logging
from pathlib import Path

from ellipsoidpack.reporters.base import BaseReporter
from ellipsoidpack.models import Status, VerificationSummary


logger = logging.getLogger("ellipsoidpack")


class MarkdownReporter(BaseReporter):
    """Generate Markdown verification reports."""

    STATUS_EMOJI = {
        Status.PASS: "✅",
        Status.FAIL: "❌",
        Status.ERROR: "💥",
        Status.SKIP: "⏭️",
    }

    def generate_report(
        self, summary: VerificationSummary, filename: str = "verification"
    ) -> Path:
        """
        Generate Markdown report.

        Args:
            summary: Verification summary
            filename: Output filename (without extension)

        Returns:
            Path to generated Markdown file
        """
        output_path = self.path_for(filename)
        counts = summary.get_status_counts()

        with open(output_path, "w", encoding="utf-8") as f:
            f.write(f"# Verification: `{summary.suite}`\n\n")
            f.write(f"**Result:** {'PASS' if summary.passed else 'FAIL'}\n\n")

            f.write("| Status | Count |\n")
            f.write("|--------|-------|\n")
            for status in Status:
                f.write(f"| {self.STATUS_EMOJI[status]} {status.value} | {counts[status.value]} |\n")
            f.write("\n")

            f.write("## Checks\n\n")
            f.write("| Check | Status | Message |\n")
            f.write("|-------|--------|---------|\n")
            for check in summary.checks:
                message = check.message.replace("|", "\\|").replace("\n", " ")
                f.write(
                    f"| {check.name} | {self.STATUS_EMOJI[check.status]} "
                    f"{check.status.value} | {message} |\n"
                )
            f.write("\n")

            failure = summary.first_failure
            if failure is not None:
                f.write("## First failure\n\n")
                f.write(f"**{failure.name}**: {failure.message}\n")
                if failure.details:
                    f.write("\n```\n")
                    for key, value in failure.details.items():
                        f.write(f"{key}: {value}\n")
                    f.write("```\n")

        logger.info(f"Generated Markdown report: {output_path}")
        return output_path

    def get_extension(self) -> str:
        """Get file extension."""
        return ".md"
