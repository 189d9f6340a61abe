"""JSON report generator for ellipsoidpack."""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional

from ellipsoidpack.reporters.base import BaseReporter


logger = logging.getLogger("ellipsoidpack")


def _as_dict(data: Any) -> Dict[str, Any]:
    if hasattr(data, "to_dict"):
        return data.to_dict()
    if isinstance(data, dict):
        return data
    raise TypeError(f"Cannot serialize {type(data).__name__} to a JSON report")


class JSONReporter(BaseReporter):
    """Generate JSON reports (density reports, summaries, run manifests)."""

    SCHEMA_VERSION = "1.0.0"

    def generate_report(
        self, data: Any, filename: str = "report", report_type: Optional[str] = None
    ) -> Path:
        """
        Generate JSON report.

        Args:
            data: Dictionary or object with ``to_dict()``
            filename: Output filename (without extension)
            report_type: Tag written next to the schema version

        Returns:
            Path to generated JSON file
        """
        output_path = self.path_for(filename)

        report_data: Dict[str, Any] = {
            "schema_version": self.SCHEMA_VERSION,
            "tool": "ellipsoidpack",
            "report_type": report_type or filename,
        }
        report_data.update(_as_dict(data))

        with open(output_path, "w", encoding="utf-8") as f:
            json.dump(report_data, f, indent=2, ensure_ascii=False)
            f.write("\n")

        logger.info(f"Generated JSON report: {output_path}")
        return output_path

    def get_extension(self) -> str:
        """Get file extension."""
        return ".json"
