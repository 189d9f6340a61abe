"""HTML report generator for ellipsoidpack."""

import logging
from pathlib import Path
from datetime import datetime, timezone
from typing import Any, Dict, Optional

from jinja2 import Environment, FileSystemLoader, select_autoescape

from ellipsoidpack.reporters.base import BaseReporter
from ellipsoidpack.models import EnsembleSummary


logger = logging.getLogger("ellipsoidpack")


class HTMLReporter(BaseReporter):
    """Generate HTML ensemble summaries."""

    TABLE_ROWS = 33

    def __init__(self, output_dir):
        """Initialize HTML reporter."""
        super().__init__(output_dir)

        template_dir = Path(__file__).parent.parent / "templates"
        self.env = Environment(
            loader=FileSystemLoader(str(template_dir)),
            autoescape=select_autoescape(["html", "xml"]),
        )

    def generate_report(
        self,
        summary: EnsembleSummary,
        filename: str = "report",
        config: Optional[Dict[str, Any]] = None,
    ) -> Path:
        """
        Generate HTML report.

        Args:
            summary: Ensemble summary
            filename: Output filename (without extension)
            config: Run configuration echoed into the page

        Returns:
            Path to generated HTML file
        """
        output_path = self.path_for(filename)

        rows = summary.rows()
        stride = max(1, (len(rows) - 1) // (self.TABLE_ROWS - 1)) if rows else 1
        sampled = rows[::stride]
        if rows and sampled[-1] != rows[-1]:
            sampled.append(rows[-1])

        template_data = {
            "stats": summary.to_dict(),
            "rows": sampled,
            "config": config or {},
            "generated_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        }

        template = self.env.get_template("ensemble_report.html")
        html_content = template.render(**template_data)

        with open(output_path, "w", encoding="utf-8") as f:
            f.write(html_content)

        logger.info(f"Generated HTML report: {output_path}")
        return output_path

    def get_extension(self) -> str:
        """Get file extension."""
        return ".html"
