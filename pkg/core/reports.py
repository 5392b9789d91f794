"""
Reports
CSV curves and key-value / JSON reports written by the command-line tool
"""
import csv
import json
import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from .errors import CurveFormatError
from .hom import ProbabilityCurve
from .montecarlo import CurvePoint, DipCurve

DIP_HEADER = ["delay_ps", "coincidences", "starts"]
PROBABILITY_HEADER = ["delay_ps", "probability"]

PathLike = Union[str, Path]


def format_number(value: Any) -> str:
    """Shortest round-trip text for a number; integral counts print without a decimal point"""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    value = float(value)
    if math.isfinite(value) and value.is_integer() and abs(value) < 2 ** 53:
        return str(int(value))
    return repr(value)


def _ensure_parent(path: Path):
    path.parent.mkdir(parents=True, exist_ok=True)


def write_dip_curve_csv(curve: DipCurve, path: PathLike) -> Path:
    path = Path(path)
    _ensure_parent(path)
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(DIP_HEADER)
        for point in curve.points:
            writer.writerow([format_number(point.delay), format_number(point.coincidences), format_number(point.starts)])
    return path


def write_probability_csv(curve: ProbabilityCurve, path: PathLike) -> Path:
    path = Path(path)
    _ensure_parent(path)
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(PROBABILITY_HEADER)
        for delay, probability in zip(*curve.as_arrays()):
            writer.writerow([format_number(delay), format_number(probability)])
    return path


def write_rows_csv(header: Sequence[str], rows: Sequence[Sequence[Any]], path: PathLike) -> Path:
    path = Path(path)
    _ensure_parent(path)
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_number(v) if isinstance(v, (int, float, np.number)) else v for v in row])
    return path


def _parse_float(text: str, row: int, column: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise CurveFormatError(f"row {row}: {column} {text!r} is not a number", row=row)
    if not math.isfinite(value):
        raise CurveFormatError(f"row {row}: {column} must be finite", row=row)
    return value


def read_curve_csv(path: PathLike) -> Union[DipCurve, ProbabilityCurve]:
    """
    Read a curve written by write_dip_curve_csv or write_probability_csv

    Row numbers in errors count the header as row 1.
    """
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as f:
            rows = list(csv.reader(f))
    except OSError as e:
        raise CurveFormatError(f"cannot read {path}: {e}")
    if not rows:
        raise CurveFormatError(f"{path} is empty", row=1)
    header = [cell.strip() for cell in rows[0]]
    if header not in (DIP_HEADER, PROBABILITY_HEADER):
        raise CurveFormatError(
            f"row 1: header must be {','.join(DIP_HEADER)} or {','.join(PROBABILITY_HEADER)}", row=1)

    parsed: List[List[float]] = []
    previous = -math.inf
    for number, row in enumerate(rows[1:], start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise CurveFormatError(f"row {number}: expected {len(header)} columns, got {len(row)}", row=number)
        values = [_parse_float(cell, number, name) for cell, name in zip(row, header)]
        if values[0] <= previous:
            raise CurveFormatError(f"row {number}: delays must be strictly increasing", row=number)
        if values[1] < 0:
            raise CurveFormatError(f"row {number}: {header[1]} must be non-negative", row=number)
        if header == DIP_HEADER and (values[2] <= 0 or not values[2].is_integer()):
            raise CurveFormatError(f"row {number}: starts must be a positive integer", row=number)
        previous = values[0]
        parsed.append(values)
    if not parsed:
        raise CurveFormatError(f"{path} has no data rows", row=2)

    if header == PROBABILITY_HEADER:
        data = np.array(parsed)
        return ProbabilityCurve(delays=data[:, 0], probabilities=data[:, 1], generator="file",
                                metadata={"source": str(path)})
    points = [CurvePoint(delay=v[0], coincidences=int(v[1]) if v[1].is_integer() else v[1], starts=int(v[2]))
              for v in parsed]
    return DipCurve(points, {"source": str(path)})


def write_report(prefix: PathLike, data: Dict[str, Any], text: Optional[str] = None) -> List[Path]:
    """Write <prefix>.json (machine-readable) and <prefix>.txt (key-value or given text)"""
    prefix = Path(prefix)
    _ensure_parent(prefix)
    json_path = prefix.with_name(prefix.name + ".json")
    text_path = prefix.with_name(prefix.name + ".txt")
    json_path.write_text(json.dumps(_plain(data), indent=2, sort_keys=True, allow_nan=False) + "\n", encoding="utf-8")
    if text is None:
        text = "\n".join(f"{key} = {_text_value(value)}" for key, value in sorted(data.items()))
    text_path.write_text(text + "\n", encoding="utf-8")
    return [json_path, text_path]


def _text_value(value: Any) -> str:
    if isinstance(value, (int, float, np.number)) and not isinstance(value, bool):
        return format_number(value)
    return json.dumps(_plain(value))


def _plain(value: Any) -> Any:
    """Convert numpy containers and scalars into JSON-ready Python objects"""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        # JSON has no infinity or NaN; degenerate fit errors are written as "inf"
        return value if math.isfinite(value) else format_number(value)
    return value
