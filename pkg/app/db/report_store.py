# ------------------------------------------
# Report storage for scenario runs
# - One JSON report per task: <scenario>__<task>.json
# - One CSV per trace kind: <scenario>__<kind>.csv
# - The output directory comes from SYMPLECTIC_OUTPUT_DIR unless given
# ------------------------------------------

import csv
import logging
import re
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

from app.core.config import OUTPUT_DIR
from app.schemas.report import TaskReport, normalized

logger = logging.getLogger(__name__)


def _stem(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", text).strip("_") or "scenario"


class ReportStore:
    def __init__(self, output_dir: Optional[Union[str, Path]] = None):
        self.output_dir = Path(output_dir or OUTPUT_DIR)
        self.output_dir.mkdir(parents=True, exist_ok=True)

    def report_path(self, scenario: str, task: str) -> Path:
        return self.output_dir / f"{_stem(scenario)}__{_stem(task)}.json"

    def trace_path(self, scenario: str, kind: str) -> Path:
        return self.output_dir / f"{_stem(scenario)}__{_stem(kind)}.csv"

    def write_report(self, report: TaskReport) -> Path:
        path = self.report_path(report.scenario, report.task)
        path.write_text(report.to_json(), encoding="utf-8")
        logger.debug(f"Wrote report {path}")
        return path

    def write_trace(self, scenario: str, kind: str, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
        path = self.trace_path(scenario, kind)
        with path.open("w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(list(header))
            for row in rows:
                writer.writerow(normalized(list(row)))
        logger.debug(f"Wrote trace {path}")
        return path
