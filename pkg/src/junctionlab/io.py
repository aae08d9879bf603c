"""CSV ingestion and emission, run configuration and JSON reports."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import tempfile
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .constants import CODATA
from .exceptions import ParseError
from .fits import WaferResistancePoint
from .tunneling import SampledTrace

# kind -> (required columns, optional trailing columns, x unit, y unit)
SCHEMAS = {
    "iv": (("voltage_mV", "current_nA"), ("temperature_K",), "mV", "nA"),
    "didv": (("voltage_mV", "conductance_per_kohm"), (), "mV", "1/kOhm"),
    "decay": (("delay_us", "population"), (), "us", "population"),
    "prober": (("die_x", "die_y", "d_nm", "resistance_ohm"), (), "nm", "Ohm"),
    "trend": (("d_nm", "frequency_GHz"), ("chip",), "nm", "GHz"),
}


def _quantity(column):
    return column.rsplit("_", 1)[0] if "_" in column else column


def _check_header(header, kind, path):
    required, optional, *_ = SCHEMAS[kind]
    header = [h.strip() for h in header]
    allowed = [required + optional[:k] for k in range(len(optional) + 1)]
    if header in [list(a) for a in allowed]:
        return header
    for i, expected in enumerate(required):
        if i >= len(header):
            raise ParseError(f"missing column {expected!r} (header {header})", path, 1)
        got = header[i]
        if got != expected:
            if _quantity(got) == _quantity(expected):
                raise ParseError(
                    f"unit mismatch in column {i + 1}: expected {expected!r}, got {got!r}", path, 1
                )
            raise ParseError(f"column {i + 1} should be {expected!r}, got {got!r}", path, 1)
    raise ParseError(
        f"unexpected columns {header[len(required):]}; allowed optional columns: {list(optional)}",
        path,
        1,
    )


def _read_rows(path, kind):
    path = Path(path)
    if kind not in SCHEMAS:
        raise ParseError(f"unknown CSV kind {kind!r}; choose from {sorted(SCHEMAS)}", path)
    try:
        handle = path.open(newline="")
    except OSError as exc:
        raise ParseError(f"cannot open: {exc.strerror}", path) from exc
    with handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("file is empty", path, 1) from None
        header = _check_header(header, kind, path)
        rows = []
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(row)}", path, line)
            rows.append((line, [c.strip() for c in row]))
    if not rows:
        raise ParseError("no data rows", path, 2)
    return header, rows


def _number(text, column, path, line):
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"{column}: {text!r} is not a number", path, line) from None
    if not math.isfinite(value):
        raise ParseError(f"{column}: non-finite value {text!r}", path, line)
    return value


def load_trace_csv(path, kind):
    """Read a CSV of the given ``kind`` (``iv``, ``didv``, ``decay``, ``prober``, ``trend``).

    Trace kinds return a :class:`SampledTrace`; ``prober`` returns a list of
    :class:`WaferResistancePoint`; ``trend`` returns ``(d, f, chips_or_None)``.
    Decay rows out of time order are sorted with a warning; voltage columns
    must already increase strictly. Problems raise :class:`ParseError`
    pointing at the offending line.
    """
    header, rows = _read_rows(path, kind)
    if kind == "prober":
        points = []
        for line, row in rows:
            values = dict(zip(header, row))
            try:
                die_x, die_y = int(values["die_x"]), int(values["die_y"])
            except ValueError:
                raise ParseError("die coordinates must be integers", path, line) from None
            d = _number(values["d_nm"], "d_nm", path, line)
            R = _number(values["resistance_ohm"], "resistance_ohm", path, line)
            if d <= 0 or R <= 0:
                raise ParseError("d_nm and resistance_ohm must be positive", path, line)
            points.append(WaferResistancePoint(d, R, die_x, die_y))
        return points
    if kind == "trend":
        d = np.array([_number(r[0], header[0], path, ln) for ln, r in rows])
        f = np.array([_number(r[1], header[1], path, ln) for ln, r in rows])
        chips = [r[2] for _, r in rows] if len(header) == 3 else None
        return d, f, chips

    lines = np.array([ln for ln, _ in rows])
    x = np.array([_number(r[0], header[0], path, ln) for ln, r in rows])
    y = np.array([_number(r[1], header[1], path, ln) for ln, r in rows])
    temperature = None
    if len(header) == 3:
        temps = {_number(r[2], header[2], path, ln) for ln, r in rows}
        if len(temps) != 1:
            raise ParseError("temperature_K must be constant within one trace", path, int(lines[0]))
        temperature = temps.pop()
        if temperature <= 0:
            raise ParseError("temperature_K must be positive", path, int(lines[0]))

    steps = np.diff(x)
    if np.any(steps <= 0):
        if kind == "decay":
            order = np.argsort(x, kind="stable")
            x, y, lines = x[order], y[order], lines[order]
            dup = np.flatnonzero(np.diff(x) == 0)
            if dup.size:
                raise ParseError(f"duplicate delay {x[dup[0]]!r}", path, int(lines[dup[0] + 1]))
            warnings.warn(f"{path}: rows were not in time order and have been sorted", UserWarning,
                          stacklevel=2)
        else:
            bad = int(np.flatnonzero(steps <= 0)[0]) + 1
            raise ParseError(
                f"{header[0]} must increase strictly; {x[bad]!r} follows {x[bad - 1]!r}",
                path,
                int(lines[bad]),
            )
    _, _, x_unit, y_unit = SCHEMAS[kind]
    try:
        return SampledTrace(x, y, x_unit, y_unit, temperature=temperature,
                            meta={"source": str(path)})
    except ValueError as exc:
        raise ParseError(str(exc), path) from exc


def _fmt(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def atomic_write_text(path, text):
    """Write ``text`` to ``path`` through a temporary file and an atomic rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, header, rows):
    """Write rows with shortest round-trip float formatting."""
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_trace_csv(path, trace: SampledTrace, kind):
    required, optional, *_ = SCHEMAS[kind]
    if kind == "iv" and trace.temperature is not None:
        header = required + optional
        rows = [(a, b, trace.temperature) for a, b in zip(trace.x, trace.y)]
    else:
        header = required
        rows = list(zip(trace.x, trace.y))
    write_csv(path, header, rows)


def file_digest(paths):
    """SHA-256 over the bytes of the given files, in the order given."""
    h = hashlib.sha256()
    for p in paths:
        h.update(Path(p).read_bytes())
    return h.hexdigest()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        if math.isfinite(value):
            return value
        return "nan" if math.isnan(value) else ("inf" if value > 0 else "-inf")
    return obj


@dataclass
class Report:
    command: str
    parameters: dict
    results: dict
    warnings: list = field(default_factory=list)
    input_digest: str | None = None
    tool_version: str = __version__

    def to_json(self) -> str:
        return json.dumps(_jsonable(asdict(self)), sort_keys=True, indent=2) + "\n"

    def write(self, path):
        atomic_write_text(path, self.to_json())


CONFIG_ENV = "JUNCTIONLAB_CONFIG"


@dataclass(frozen=True)
class RunConfig:
    """Effective settings for one CLI run.

    The constants block is echoed into each report. The library computes with
    CODATA values, so a config may restate them but not change them.
    """

    constants: dict = field(default_factory=lambda: dict(CODATA))
    n_max: int = 15
    convergence_tol_hz: float = 1e3
    grid_resolution: int = 3
    fit_max_iter: int = 200
    output_dir: str = "."

    def __post_init__(self):
        for name, value in self.constants.items():
            if name not in CODATA:
                raise ParseError(f"unknown constant {name!r}")
            if not value > 0:
                raise ParseError(f"constant {name} must be positive")
            if not math.isclose(value, CODATA[name], rel_tol=1e-12):
                raise ParseError(
                    f"constant {name}={value!r} differs from CODATA {CODATA[name]!r}; "
                    "overriding physical constants is not supported"
                )
        if self.n_max < 1:
            raise ParseError("n_max must be >= 1")
        if self.fit_max_iter < 1:
            raise ParseError("fit_max_iter must be >= 1")

    @classmethod
    def load(cls, path=None, env=None):
        """Config from ``path``, else from ``$JUNCTIONLAB_CONFIG``, else defaults."""
        env = os.environ if env is None else env
        path = path or env.get(CONFIG_ENV)
        if not path:
            return cls()
        try:
            data = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ParseError(f"cannot read config: {exc.strerror}", path) from exc
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", path, exc.lineno) from exc
        if not isinstance(data, dict):
            raise ParseError("config must be a JSON object", path, 1)
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ParseError(f"unknown config keys {sorted(unknown)}", path)
        constants = dict(CODATA)
        constants.update(data.pop("constants", {}))
        try:
            return cls(constants=constants, **data)
        except TypeError as exc:
            raise ParseError(str(exc), path) from exc

    def to_dict(self):
        return asdict(self)
