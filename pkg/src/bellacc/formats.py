"""Readers and writers for the on-disk formats.

Every file starts with a ``# format=1`` line.

counts.csv::

    # format=1
    setting,coincidences,accidentals,singlesA,singlesB
    phi:22.5,87,23,,
    z,126,46,,
    Z,248,90,,

Stream files are tab separated ``timestamp_ns`` and ``truth_tag`` columns,
where the tag is the emission id, ``noise``, or ``-`` when unknown.

Config documents are INI files with ``[source]``, ``[detectorA]``,
``[detectorB]`` and ``[run]`` sections. Angles are in degrees (or
``absent``), times in nanoseconds, rates in counts per second.
"""

from __future__ import annotations

import configparser
import csv
import io
import math
from dataclasses import fields
from pathlib import Path

import numpy as np

from .analytic import ABSENT, Polarizer
from .errors import BellAccError, ConfigError
from .simulator import NOISE, NS, DetectionStream, DetectorConfig, RunConfig, SourceConfig
from .tables import CountsTable

FORMAT_LINE = "# format=1"
COUNTS_HEADER = ["setting", "coincidences", "accidentals", "singlesA", "singlesB"]
STREAM_HEADER = "timestamp_ns\ttruth_tag"


class FormatError(BellAccError):
    """Malformed input file; ``line`` is 1-based."""

    def __init__(self, line, message):
        self.line = line
        super().__init__(f"line {line}: {message}")


def fmt_number(v: float) -> str:
    """Shortest text that reads back to the same float."""
    v = float(v)
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


# ---------------------------------------------------------------- counts.csv

def dumps_counts(table: CountsTable) -> str:
    buf = io.StringIO()
    buf.write(FORMAT_LINE + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COUNTS_HEADER)

    def side(m, key):
        return "" if m is None or key not in m else fmt_number(m[key])

    for key, value in table.items():
        label = key if key in ("z", "Z") else "phi:" + fmt_number(key)
        w.writerow([label, fmt_number(value), side(table.accidentals, key),
                    side(table.singlesA, key), side(table.singlesB, key)])
    return buf.getvalue()


def write_counts(path, table: CountsTable) -> None:
    Path(path).write_text(dumps_counts(table))


def _number(text, line, column):
    try:
        v = float(text)
    except ValueError:
        raise FormatError(line, f"{column}: not a number: {text!r}") from None
    if math.isnan(v) or v < 0:
        raise FormatError(line, f"{column}: must be >= 0, got {text!r}")
    return v


def loads_counts(text: str) -> CountsTable:
    lines = text.splitlines()
    if not lines or lines[0].strip() != FORMAT_LINE:
        raise FormatError(1, f"expected {FORMAT_LINE!r}")
    if len(lines) < 2 or [c.strip() for c in lines[1].split(",")] != COUNTS_HEADER:
        raise FormatError(2, "expected header " + ",".join(COUNTS_HEADER))

    entries, z, Z = {}, None, None
    side = {"accidentals": {}, "singlesA": {}, "singlesB": {}}
    seen = set()
    for lineno, row in enumerate(csv.reader(lines[2:]), start=3):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if row[0].startswith("#"):
            continue
        if len(row) != len(COUNTS_HEADER):
            raise FormatError(lineno, f"expected {len(COUNTS_HEADER)} fields, got {len(row)}")
        label = row[0].strip()
        if label in ("z", "Z"):
            key = label
        elif label.startswith("phi:"):
            try:
                key = float(label[4:])
            except ValueError:
                raise FormatError(lineno, f"bad angle in {label!r}") from None
            if not math.isfinite(key):
                raise FormatError(lineno, f"bad angle in {label!r}")
        else:
            raise FormatError(lineno, f"unknown setting {label!r}")
        if key in seen:
            raise FormatError(lineno, f"duplicate setting {label!r}")
        seen.add(key)

        value = _number(row[1].strip(), lineno, "coincidences")
        if key == "z":
            z = value
        elif key == "Z":
            Z = value
        else:
            entries[key] = value
        for name, cell in zip(("accidentals", "singlesA", "singlesB"), row[2:]):
            if cell.strip():
                side[name][key] = _number(cell.strip(), lineno, name)

    return CountsTable(entries=entries, z=z, Z=Z,
                       accidentals=side["accidentals"] or None,
                       singlesA=side["singlesA"] or None,
                       singlesB=side["singlesB"] or None)


def read_counts(path) -> CountsTable:
    return loads_counts(Path(path).read_text())


# --------------------------------------------------------------- stream .tsv

def dumps_stream(stream: DetectionStream) -> str:
    out = [FORMAT_LINE, STREAM_HEADER]
    ids = stream.emission_id
    for i, t in enumerate(stream.timestamps.tolist()):
        if ids is None:
            tag = "-"
        elif ids[i] == NOISE:
            tag = "noise"
        else:
            tag = str(int(ids[i]))
        out.append(f"{fmt_number(t / NS)}\t{tag}")
    return "\n".join(out) + "\n"


def write_stream(path, stream: DetectionStream) -> None:
    Path(path).write_text(dumps_stream(stream))


def loads_stream(text: str) -> DetectionStream:
    lines = text.splitlines()
    if not lines or lines[0].strip() != FORMAT_LINE:
        raise FormatError(1, f"expected {FORMAT_LINE!r}")
    if len(lines) < 2 or lines[1].strip().split() != STREAM_HEADER.split():
        raise FormatError(2, "expected header timestamp_ns<TAB>truth_tag")
    times, tags, linenos = [], [], []
    for lineno, line in enumerate(lines[2:], start=3):
        if not line.strip() or line.startswith("#"):
            continue
        linenos.append(lineno)
        parts = line.split()
        if len(parts) != 2:
            raise FormatError(lineno, "expected two columns")
        try:
            times.append(float(parts[0]) * NS)
        except ValueError:
            raise FormatError(lineno, f"bad timestamp {parts[0]!r}") from None
        tag = parts[1]
        if tag == "noise":
            tags.append(NOISE)
        elif tag == "-":
            tags.append(None)
        else:
            try:
                tags.append(int(tag))
            except ValueError:
                raise FormatError(lineno, f"bad truth tag {tag!r}") from None
    t = np.asarray(times, dtype=float)
    if t.size > 1 and np.any(np.diff(t) < 0):
        bad = int(np.flatnonzero(np.diff(t) < 0)[0]) + 1
        raise FormatError(linenos[bad], "timestamps out of order")
    ids = None
    if tags and all(tag is not None for tag in tags):
        ids = np.asarray(tags, dtype=np.int64)
    return DetectionStream(t, ids)


def read_stream(path) -> DetectionStream:
    return loads_stream(Path(path).read_text())


# ----------------------------------------------------------- config document

# fields given in nanoseconds in the document and in seconds in the configs
_NS_FIELDS = {"pulse_lifetime", "min_gap", "jitter_sigma", "duration",
              "window_lo", "window_hi", "accidental_delay"}
_ANGLE_FIELDS = {"armA", "armB"}
_INT_FIELDS = {"master_seed", "run_index"}

SECTIONS = {
    "source": SourceConfig,
    "detectorA": DetectorConfig,
    "detectorB": DetectorConfig,
    "run": RunConfig,
}


def _parse_value(section, key, text):
    text = text.strip()
    try:
        if key in _ANGLE_FIELDS:
            return ABSENT if text.lower() == "absent" else Polarizer.at_degrees(float(text))
        if key in _INT_FIELDS:
            return int(text)
        if key == "lambda_distribution":
            if text != "uniform":
                raise ValueError("only 'uniform' can be given in a file")
            return text
        v = float(text)
    except ValueError as exc:
        raise ConfigError(f"{section}.{key}", str(exc)) from None
    return v * NS if key in _NS_FIELDS else v


def loads_config(text: str):
    """Parse a config document into ``(source, detA, detB, run)``."""
    cp = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("document", str(exc).splitlines()[0]) from None

    for section in cp.sections():
        if section not in SECTIONS:
            raise ConfigError(section, "unknown section")
    out = []
    for section, cls in SECTIONS.items():
        known = {f.name for f in fields(cls)}
        kwargs = {}
        if cp.has_section(section):
            for key, text in cp.items(section):
                if key not in known:
                    raise ConfigError(f"{section}.{key}", "unknown key")
                kwargs[key] = _parse_value(section, key, text)
        try:
            out.append(cls(**kwargs))
        except ConfigError as exc:
            raise ConfigError(f"{section}.{exc.key}", str(exc).split(": ", 1)[1]) from None
    return tuple(out)


def read_config(path):
    return loads_config(Path(path).read_text())


def _render_value(key, value):
    if key in _ANGLE_FIELDS:
        return "absent" if value is ABSENT else fmt_number(round(math.degrees(value.axis), 9))
    if key in _NS_FIELDS:
        return fmt_number(round(value / NS, 6))
    if key == "lambda_distribution":
        if value != "uniform":
            raise ConfigError("source.lambda_distribution", "only 'uniform' can be written to a file")
        return value
    return fmt_number(value) if isinstance(value, float) else str(value)


def dumps_config(source: SourceConfig, detA: DetectorConfig, detB: DetectorConfig,
                 run: RunConfig) -> str:
    lines = [FORMAT_LINE]
    for (section, _), obj in zip(SECTIONS.items(), (source, detA, detB, run)):
        lines.append(f"[{section}]")
        for f in fields(obj):
            lines.append(f"{f.name} = {_render_value(f.name, getattr(obj, f.name))}")
        lines.append("")
    return "\n".join(lines)


def write_config(path, source, detA, detB, run) -> None:
    Path(path).write_text(dumps_config(source, detA, detB, run))

