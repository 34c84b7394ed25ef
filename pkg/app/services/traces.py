# --------------------------------------------------
# Plot-data traces of completed computations
#
# detV / sigma_min   <- crossing scan of a maslov task
# detBint            <- B-integral of a reduce task
# eigenflow          <- mesh records of an index-verify task
# --------------------------------------------------

import logging
import math
from typing import Dict, List, Sequence, Tuple

import numpy as np

from app.core.errors import SymplecticError
from app.models.fe import IndexTheoremReport
from app.models.focal import MaslovReport
from app.models.reduction import BIntegralPath

logger = logging.getLogger(__name__)

TRACE_SOURCES = {
    "detV": "maslov",
    "sigma_min": "maslov",
    "detBint": "bintegral",
    "eigenflow": "index",
}


class TraceError(SymplecticError):
    pass


def _thinned(rows: List[list], resolution: int) -> List[list]:
    if len(rows) <= resolution:
        return rows
    stride = math.ceil(len(rows) / resolution)
    picked = rows[::stride]
    if picked[-1] is not rows[-1]:
        picked.append(rows[-1])
    return picked


def _scan_rows(report: MaslovReport, column: int) -> List[list]:
    return [[t, values[column]] for t, *values in report.trace]


def _bint_rows(path: BIntegralPath) -> List[list]:
    return [[t, float(np.linalg.det(value))] for t, value in zip(path.times, path.values)]


def _eigenflow_rows(report: IndexTheoremReport) -> Tuple[List[str], List[list]]:
    width = max((len(record.smallest) for record in report.eigenflow), default=0)
    header = ["N", "n_minus", "n_plus", "degeneracy"] + [f"smallest_{i + 1}" for i in range(width)]
    rows = []
    for record in report.eigenflow:
        padded = list(record.smallest) + [float("nan")] * (width - len(record.smallest))
        rows.append([record.N, record.n_minus, record.n_plus, record.degeneracy] + padded)
    return header, rows


def emit_trace(kind: str, artifacts: Dict[str, object], resolution: int = 400) -> Tuple[Sequence[str], List[list]]:
    """(header, rows) of a trace; `artifacts` holds the results of the tasks already run."""
    if kind not in TRACE_SOURCES:
        raise TraceError(f"unknown trace kind {kind!r}; known kinds are {sorted(TRACE_SOURCES)}")
    source = artifacts.get(TRACE_SOURCES[kind])
    if source is None:
        raise TraceError(f"trace {kind} needs a completed {TRACE_SOURCES[kind]} computation")

    if kind == "eigenflow":
        header, rows = _eigenflow_rows(source)
        return header, rows
    if kind == "detBint":
        header, rows = ["t", "det_bint"], _bint_rows(source)
    elif kind == "detV":
        header, rows = ["t", "det_v"], _scan_rows(source, 0)
    else:
        header, rows = ["t", "sigma_min"], _scan_rows(source, 1)
    rows = _thinned(rows, resolution)
    logger.debug(f"Trace {kind}: {len(rows)} row(s)")
    return header, rows
