"""
File formats: CSV tables with a provenance comment line, JSON reports and
the JSON sidecar carrying histogram acquisition metadata.
"""
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, TextIO, Union

import numpy as np

from . import __version__
from .emitter import CavityFilter, EmitterParams
from .errors import DataError
from .experiment import CoincidenceHistogram, FringeContrast
from .tempfit import VisibilityDataset

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

HISTOGRAM_COLUMNS = ("delay_ns", "counts")
FRINGE_COLUMNS = ("delay_ps", "contrast", "sigma")
DATASET_COLUMNS = ("temperature_K", "visibility", "sigma")


def provenance(params: Dict[str, Any], seed: Optional[int] = None) -> Dict[str, Any]:
    """Record identifying the tool version, resolved parameters and seed."""
    return {"tool": "qdphonon", "version": __version__, "params": params, "seed": seed}


def _json_default(obj: Any) -> Any:
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"Object of type {type(obj).__name__} is not JSON serializable")


def dumps(record: Dict[str, Any]) -> str:
    return json.dumps(record, indent=2, sort_keys=True, default=_json_default)


#
# Tables
#
def read_table(path: PathLike, columns: Sequence[str]) -> Dict[str, np.ndarray]:
    """Read the named columns of a comma-separated table.

    Lines starting with ``#`` are skipped; the first remaining line is the
    header.

    Raises:
        DataError: on a missing file, missing columns or unparsable rows
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"File not found: {path}")
    lines = [ln for ln in path.read_text().splitlines() if ln.strip() and not ln.startswith("#")]
    if not lines:
        raise DataError(f"{path} is empty")
    header = [h.strip() for h in lines[0].split(",")]
    missing = [c for c in columns if c not in header]
    if missing:
        raise DataError(f"{path} lacks columns {missing}; header is {header}")
    if len(lines) < 2:
        raise DataError(f"{path} has a header but no rows")
    try:
        values = np.loadtxt(lines[1:], delimiter=",", ndmin=2)
    except ValueError as e:
        raise DataError(f"Cannot parse {path}: {e}")
    if values.shape[1] != len(header):
        raise DataError(f"{path}: rows have {values.shape[1]} fields, header has {len(header)}")
    return {c: values[:, header.index(c)] for c in columns}


def write_table(target: Union[PathLike, TextIO], columns: Sequence[str], rows: np.ndarray,
                meta: Optional[Dict[str, Any]] = None) -> None:
    """Write a CSV table; ``meta`` goes into a leading ``#`` comment as JSON."""
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    lines: List[str] = []
    if meta is not None:
        lines.append("# " + json.dumps(meta, sort_keys=True, default=_json_default))
    lines.append(",".join(columns))
    lines.extend(",".join(f"{v:.10g}" for v in row) for row in rows)
    text = "\n".join(lines) + "\n"
    if isinstance(target, (str, Path)):
        Path(target).write_text(text)
        logger.info("Wrote %d rows to %s", rows.shape[0], target)
    else:
        target.write(text)


def read_table_meta(path: PathLike) -> Optional[Dict[str, Any]]:
    """Provenance record from the leading comment of a table, if any."""
    first = Path(path).read_text().splitlines()[:1]
    if not first or not first[0].startswith("#"):
        return None
    try:
        return json.loads(first[0][1:])
    except json.JSONDecodeError:
        return None


def write_json(target: Union[PathLike, TextIO, None], record: Dict[str, Any]) -> None:
    """Write a JSON report to a path, a stream, or stdout when ``target`` is None."""
    text = dumps(record) + "\n"
    if target is None:
        sys.stdout.write(text)
    elif isinstance(target, (str, Path)):
        Path(target).write_text(text)
        logger.info("Wrote report to %s", target)
    else:
        target.write(text)


def read_json(path: PathLike) -> Dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"File not found: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise DataError(f"Invalid JSON in {path}: {e}")


#
# Histograms
#
def sidecar_path(csv_path: PathLike) -> Path:
    return Path(csv_path).with_suffix(".json")


def read_histogram(path: PathLike, meta_path: Optional[PathLike] = None) -> CoincidenceHistogram:
    """Histogram CSV ``delay_ns,counts`` plus its JSON sidecar."""
    table = read_table(path, HISTOGRAM_COLUMNS)
    meta = read_json(meta_path or sidecar_path(path))
    try:
        return CoincidenceHistogram(
            delays=table["delay_ns"],
            counts=np.rint(table["counts"]).astype(np.int64),
            acquisition_time=float(meta["acquisition_time_s"]),
            rep_period=float(meta.get("rep_period_ns", 12.2)),
            pair_separation=float(meta.get("pair_separation_ns", 3.0)),
        )
    except KeyError as e:
        raise DataError(f"Histogram sidecar lacks {e}")


def write_histogram(path: PathLike, hist: CoincidenceHistogram,
                    meta: Optional[Dict[str, Any]] = None) -> None:
    write_table(path, HISTOGRAM_COLUMNS, np.column_stack([hist.delays, hist.counts]), meta)
    sidecar = dict(hist.metadata())
    if meta is not None:
        sidecar["provenance"] = meta
    write_json(sidecar_path(path), sidecar)


#
# Fringe traces and visibility datasets
#
def read_fringe(path: PathLike) -> FringeContrast:
    t = read_table(path, FRINGE_COLUMNS)
    return FringeContrast(t["delay_ps"], t["contrast"], t["sigma"])


def write_fringe(path: PathLike, data: FringeContrast, meta: Optional[Dict[str, Any]] = None) -> None:
    write_table(path, FRINGE_COLUMNS, np.column_stack([data.delays, data.contrast, data.sigma]),
                meta)


def read_dataset(path: PathLike, emitter: EmitterParams, filter: CavityFilter) -> VisibilityDataset:
    t = read_table(path, DATASET_COLUMNS)
    order = np.argsort(t["temperature_K"], kind="stable")
    return VisibilityDataset(t["temperature_K"][order], t["visibility"][order], t["sigma"][order],
                             emitter, filter)


def write_dataset(path: PathLike, data: VisibilityDataset,
                  meta: Optional[Dict[str, Any]] = None) -> None:
    write_table(path, DATASET_COLUMNS,
                np.column_stack([data.temperatures, data.visibility, data.sigma]), meta)
