"""JSON Lines writer for trajectories."""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Tuple, Union

from ellipsoidpack.reporters.base import BaseReporter


logger = logging.getLogger("ellipsoidpack")


class TrajectoryReporter(BaseReporter):
    """One JSON object per recorded step, then a ``{"final": ...}`` line."""

    def generate_report(self, trajectory, filename: str = "trajectory") -> Path:
        """
        Write a trajectory as JSON Lines.

        Args:
            trajectory: Trajectory from ``evolve.run``
            filename: Output filename (without extension)

        Returns:
            Path to generated JSONL file
        """
        output_path = self.path_for(filename)

        with open(output_path, "w", encoding="utf-8") as f:
            for record in trajectory.records:
                f.write(json.dumps(record.to_dict()) + "\n")
            f.write(json.dumps({"final": trajectory.final_block()}) + "\n")

        logger.debug(f"Wrote {len(trajectory.records)} records to {output_path}")
        return output_path

    def get_extension(self) -> str:
        """Get file extension."""
        return ".jsonl"

    @staticmethod
    def load(path: Union[str, Path]) -> Tuple[List[Dict[str, Any]], Dict[str, Any]]:
        """
        Read a JSONL trajectory back.

        Returns:
            (step records, final-state block)

        Raises:
            ValueError: If the file has no final block
        """
        records: List[Dict[str, Any]] = []
        final: Dict[str, Any] = {}
        with open(path, "r", encoding="utf-8") as f:
            for line in f:
                if not line.strip():
                    continue
                entry = json.loads(line)
                if "final" in entry:
                    final = entry["final"]
                else:
                    records.append(entry)
        if not final:
            raise ValueError(f"Trajectory file {path} has no final block")
        return records, final
