"""CSV serialization of measurement logs.

One row per shutter setting, header mandatory, floats written with 17
significant digits so a write/read round trip is lossless.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path

from .errors import DataError
from .forward import CONFIG_LABELS, MeasurementLog, MeasurementRecord, ShutterConfig

LOG_COLUMNS = (
    "cycle",
    "config",
    "mean_power_w",
    "std_power_w",
    "n_samples",
    "housing_temp_c",
    "input_power_w",
    "timestamp_s",
)


def _fmt(value: float) -> str:
    return format(value, ".17g")


def dump_log(log: MeasurementLog) -> str:
    """Serialize a log to CSV text."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(LOG_COLUMNS)
    for rec in log.records:
        writer.writerow(
            [
                rec.cycle_index,
                rec.config.label,
                _fmt(rec.mean_power),
                _fmt(rec.std_power),
                rec.n_samples,
                _fmt(rec.housing_temp),
                _fmt(rec.input_power),
                _fmt(rec.timestamp),
            ]
        )
    return buffer.getvalue()


def write_log(log: MeasurementLog, path: str | Path) -> None:
    Path(path).write_text(dump_log(log), encoding="utf-8")


def parse_log(text: str, origin: str = "<string>") -> MeasurementLog:
    """Parse CSV text into a log, reporting malformed rows with line numbers."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise DataError(f"{origin}: empty log file")
    if tuple(header) != LOG_COLUMNS:
        raise DataError(
            f"{origin}: line 1: expected header {','.join(LOG_COLUMNS)}, "
            f"got {','.join(header)}"
        )
    records: list[MeasurementRecord] = []
    seen: set[tuple[int, str]] = set()
    for line_no, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(LOG_COLUMNS):
            raise DataError(
                f"{origin}: line {line_no}: expected {len(LOG_COLUMNS)} fields, got {len(row)}"
            )
        try:
            cycle = int(row[0])
            label = row[1]
            mean_power = float(row[2])
            std_power = float(row[3])
            n_samples = int(row[4])
            housing_temp = float(row[5])
            input_power = float(row[6])
            timestamp = float(row[7])
        except ValueError as exc:
            raise DataError(f"{origin}: line {line_no}: non-numeric field ({exc})")
        if label not in CONFIG_LABELS:
            raise DataError(f"{origin}: line {line_no}: unknown config {label!r}")
        key = (cycle, label)
        if key in seen:
            raise DataError(
                f"{origin}: line {line_no}: duplicate (cycle={cycle}, config={label})"
            )
        seen.add(key)
        records.append(
            MeasurementRecord(
                cycle_index=cycle,
                config=ShutterConfig.from_label(label),
                mean_power=mean_power,
                std_power=std_power,
                n_samples=n_samples,
                housing_temp=housing_temp,
                input_power=input_power,
                timestamp=timestamp,
            )
        )
    if not records:
        raise DataError(f"{origin}: log contains no records")
    return MeasurementLog(records=tuple(records))


def read_log(path: str | Path) -> MeasurementLog:
    path = Path(path)
    return parse_log(path.read_text(encoding="utf-8"), origin=str(path))
