"""Text file formats for maps, spectra, dataset manifests and reports.

All formats share one layout: a header of ``key: value`` lines, one blank
line, then a body.  The first header line is always
``format: ghostspec-<kind> <version>``.  Floats are written with 17
significant digits, so every double survives a round trip unchanged.
Files are written to a temporary name in the target directory and renamed
into place.  See ``docs/formats.md`` for the byte-level description.
"""

from __future__ import annotations

import os
import re
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .analysis.spectra import SpectrumVector
from .detection import LambdaYMap

__all__ = [
    "FormatError",
    "save_map",
    "load_map",
    "dumps_map",
    "loads_map",
    "save_spectrum",
    "load_spectrum",
    "dumps_spectrum",
    "loads_spectrum",
    "RunEntry",
    "SpectrumEntry",
    "DatasetManifest",
    "save_manifest",
    "load_manifest",
    "Table",
    "Report",
    "save_report",
    "load_report",
    "dumps_report",
    "loads_report",
    "write_table_tsv",
    "atomic_write",
]

MAP_VERSION = 1
SPECTRUM_VERSION = 1
MANIFEST_VERSION = 1
REPORT_VERSION = 1

_KEY = re.compile(r"^[A-Za-z0-9_.\-]+$")
_TOKEN = re.compile(r"^\S+$")

PathLike = Union[str, Path]


class FormatError(ValueError):
    """Malformed or inconsistent file; the message carries ``path:line``."""


def fmt_float(x: float) -> str:
    return format(float(x), ".17g")


def atomic_write(path: PathLike, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _check_value(key: str, value: str) -> str:
    if not _KEY.match(key):
        raise ValueError(f"header key {key!r} must match {_KEY.pattern}")
    value = str(value)
    if "\n" in value or "\r" in value or value != value.strip() or not value:
        raise ValueError(f"header value for {key!r} must be a non-empty single line without "
                         "surrounding whitespace")
    return value


def _header(items) -> str:
    return "".join(f"{k}: {_check_value(k, v)}\n" for k, v in items) + "\n"


class _Reader:
    """Splits a file into header dict and body lines, tracking line numbers."""

    def __init__(self, text: str, name: str, kind: str, version: int):
        self.name = name
        self.lines = text.split("\n")
        if self.lines and self.lines[-1] == "":
            self.lines.pop()
        self.header: dict = {}
        self.header_line: dict = {}
        i = 0
        while i < len(self.lines) and self.lines[i] != "":
            line = self.lines[i]
            key, sep, value = line.partition(": ")
            if not sep or not _KEY.match(key):
                self.fail(i + 1, f"expected 'key: value', got {line[:60]!r}")
            if key in self.header:
                self.fail(i + 1, f"duplicate header key {key!r}")
            self.header[key] = value
            self.header_line[key] = i + 1
            i += 1
        if i >= len(self.lines):
            self.fail(i, "missing blank line after header")
        self.body_start = i + 1  # 0-based index of first body line
        self.body = self.lines[i + 1:]
        fmt = self.header.get("format", "")
        expected = f"ghostspec-{kind}"
        parts = fmt.split()
        if len(parts) != 2 or parts[0] != expected:
            self.fail(1, f"not a {expected} file (format: {fmt!r})")
        if parts[1] != str(version):
            self.fail(1, f"unsupported {expected} version {parts[1]!r} (expected {version})")

    def fail(self, lineno: int, msg: str):
        raise FormatError(f"{self.name}:{lineno}: {msg}")

    def get(self, key: str, conv=str, default=...):
        if key not in self.header:
            if default is not ...:
                return default
            self.fail(len(self.header) + 1, f"missing header key {key!r}")
        try:
            return conv(self.header[key])
        except ValueError:
            self.fail(self.header_line[key], f"bad value for {key!r}: {self.header[key][:60]!r}")

    def floats(self, key: str, n: int) -> np.ndarray:
        arr = self.get(key, lambda v: np.array([float(t) for t in v.split()]))
        if len(arr) != n:
            self.fail(self.header_line[key], f"{key} has {len(arr)} values, expected {n}")
        return arr

    def meta(self) -> dict:
        return {k[5:]: v for k, v in self.header.items() if k.startswith("meta.")}

    def body_lineno(self, i: int) -> int:
        return self.body_start + i + 1


def _int(v: str) -> int:
    return int(v)


def _opt_int(v: str):
    return None if v == "none" else int(v)


def _meta_items(meta: dict):
    return [(f"meta.{k}", v) for k, v in sorted(meta.items())]


# ---------------------------------------------------------------- maps


def dumps_map(m: LambdaYMap) -> str:
    ny, nl = m.counts.shape
    head = _header(
        [
            ("format", f"ghostspec-map {MAP_VERSION}"),
            ("n_spatial", ny),
            ("n_spectral", nl),
            ("acquisition_time_s", fmt_float(m.acquisition_time)),
            ("seed", "none" if m.seed is None else int(m.seed)),
            ("config_digest", m.config_digest or "none"),
            ("lambda_centers_nm", " ".join(fmt_float(v) for v in m.lambda_centers)),
            ("y_centers_mm", " ".join(fmt_float(v) for v in m.y_centers)),
        ]
        + _meta_items(m.metadata)
    )
    rows = "".join(" ".join(map(str, row)) + "\n" for row in m.counts.tolist())
    return head + rows


def loads_map(text: str, name: str = "<map>") -> LambdaYMap:
    r = _Reader(text, name, "map", MAP_VERSION)
    ny, nl = r.get("n_spatial", _int), r.get("n_spectral", _int)
    if ny < 1 or nl < 1:
        r.fail(r.header_line["n_spatial"], "dimensions must be positive")
    lam = r.floats("lambda_centers_nm", nl)
    ys = r.floats("y_centers_mm", ny)
    if len(r.body) != ny:
        r.fail(r.body_lineno(min(len(r.body), ny)), f"expected {ny} count rows, found {len(r.body)}")
    counts = np.empty((ny, nl), dtype=np.int64)
    for i, line in enumerate(r.body):
        tokens = line.split(" ")
        if len(tokens) != nl:
            r.fail(r.body_lineno(i), f"expected {nl} counts, found {len(tokens)}")
        try:
            counts[i] = [int(t) for t in tokens]
        except (ValueError, OverflowError):
            r.fail(r.body_lineno(i), "counts must be integers")
        if np.any(counts[i] < 0):
            r.fail(r.body_lineno(i), "counts must be non-negative")
    digest = r.get("config_digest")
    duration, seed = r.get("acquisition_time_s", float), r.get("seed", _opt_int)
    try:
        return LambdaYMap(counts, lam, ys, duration, seed=seed,
                          config_digest="" if digest == "none" else digest, metadata=r.meta())
    except ValueError as exc:
        raise FormatError(f"{name}: {exc}") from exc


def save_map(m: LambdaYMap, path: PathLike) -> None:
    atomic_write(path, dumps_map(m))


def load_map(path: PathLike) -> LambdaYMap:
    return loads_map(Path(path).read_text(encoding="utf-8"), str(path))


# ------------------------------------------------------------- spectra


def dumps_spectrum(s: SpectrumVector) -> str:
    items = [("format", f"ghostspec-spectrum {SPECTRUM_VERSION}"), ("n_bins", len(s))]
    if s.label is not None:
        items.append(("label", s.label))
    head = _header(items + _meta_items(s.metadata))
    body = "".join(f"{fmt_float(l)} {fmt_float(v)}\n" for l, v in zip(s.wavelengths, s.values))
    return head + body


def loads_spectrum(text: str, name: str = "<spectrum>") -> SpectrumVector:
    r = _Reader(text, name, "spectrum", SPECTRUM_VERSION)
    n = r.get("n_bins", _int)
    if len(r.body) != n:
        r.fail(r.body_lineno(min(len(r.body), n)), f"expected {n} rows, found {len(r.body)}")
    data = np.empty((n, 2))
    for i, line in enumerate(r.body):
        tokens = line.split(" ")
        if len(tokens) != 2:
            r.fail(r.body_lineno(i), "expected 'wavelength value'")
        try:
            data[i] = [float(tokens[0]), float(tokens[1])]
        except ValueError:
            r.fail(r.body_lineno(i), "values must be numbers")
    try:
        return SpectrumVector(data[:, 1], data[:, 0], r.get("label", str, None), r.meta())
    except ValueError as exc:
        raise FormatError(f"{name}: {exc}") from exc


def save_spectrum(s: SpectrumVector, path: PathLike) -> None:
    atomic_write(path, dumps_spectrum(s))


def load_spectrum(path: PathLike) -> SpectrumVector:
    return loads_spectrum(Path(path).read_text(encoding="utf-8"), str(path))


# ------------------------------------------------------------ manifest


@dataclass(frozen=True)
class RunEntry:
    name: str
    scene: str
    duration_s: float
    seed: int
    map_path: str  # relative to the manifest's directory
    label: str


@dataclass(frozen=True)
class SpectrumEntry:
    name: str
    path: str
    run: str
    row_start: int
    row_stop: int
    label: str
    role: str  # "reference" or "region"


@dataclass
class DatasetManifest:
    runs: list
    spectra: list
    config_digest: str
    analysis: dict = field(default_factory=dict)  # analysis.* settings as strings
    version: int = MANIFEST_VERSION

    def __post_init__(self):
        paths = [r.map_path for r in self.runs] + [s.path for s in self.spectra]
        if len(set(paths)) != len(paths):
            raise ValueError("manifest file paths must be unique")
        names = [r.name for r in self.runs]
        if len(set(names)) != len(names):
            raise ValueError("run names must be unique")
        known = set(names)
        for s in self.spectra:
            if s.run not in known:
                raise ValueError(f"spectrum {s.name!r} refers to unknown run {s.run!r}")


def _tokens(*values) -> str:
    out = []
    for v in values:
        v = fmt_float(v) if isinstance(v, float) else str(v)
        if not _TOKEN.match(v):
            raise ValueError(f"manifest field {v!r} must be a single non-empty token")
        out.append(v)
    return " ".join(out)


def save_manifest(man: DatasetManifest, path: PathLike) -> None:
    items = [("format", f"ghostspec-manifest {man.version}"), ("config_digest", man.config_digest)]
    items += [(f"analysis.{k}", v) for k, v in sorted(man.analysis.items())]
    body = "".join(
        "run " + _tokens(r.name, r.scene, float(r.duration_s), int(r.seed), r.map_path, r.label) + "\n"
        for r in man.runs
    )
    body += "".join(
        "spectrum " + _tokens(s.name, s.path, s.run, int(s.row_start), int(s.row_stop), s.label, s.role)
        + "\n"
        for s in man.spectra
    )
    atomic_write(path, _header(items) + body)


def load_manifest(path: PathLike) -> DatasetManifest:
    r = _Reader(Path(path).read_text(encoding="utf-8"), str(path), "manifest", MANIFEST_VERSION)
    runs, spectra = [], []
    for i, line in enumerate(r.body):
        t = line.split(" ")
        try:
            if t[0] == "run" and len(t) == 7:
                runs.append(RunEntry(t[1], t[2], float(t[3]), int(t[4]), t[5], t[6]))
            elif t[0] == "spectrum" and len(t) == 8:
                spectra.append(SpectrumEntry(t[1], t[2], t[3], int(t[4]), int(t[5]), t[6], t[7]))
            else:
                r.fail(r.body_lineno(i), f"unrecognised entry {line[:60]!r}")
        except ValueError as exc:
            if isinstance(exc, FormatError):
                raise
            r.fail(r.body_lineno(i), f"bad field: {exc}")
    analysis = {k[9:]: v for k, v in r.header.items() if k.startswith("analysis.")}
    try:
        return DatasetManifest(runs, spectra, r.get("config_digest"), analysis)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc


# -------------------------------------------------------------- reports

_TYPES = {"int": int, "float": float, "str": str}


@dataclass
class Table:
    """Named columns, each typed ``int``, ``float`` or ``str``."""

    columns: list  # [(name, type_name)]
    rows: list  # list of tuples

    def column(self, name: str) -> list:
        idx = [c for c, _ in self.columns].index(name)
        return [row[idx] for row in self.rows]

    def __post_init__(self):
        self.columns = [(str(c), str(t)) for c, t in self.columns]
        for c, t in self.columns:
            if t not in _TYPES or not _TOKEN.match(c):
                raise ValueError(f"bad column spec {c}:{t}")
        rows = []
        for row in self.rows:
            if len(row) != len(self.columns):
                raise ValueError("row length does not match columns")
            rows.append(tuple(_TYPES[t](v) for v, (_, t) in zip(row, self.columns)))
        self.rows = rows


@dataclass
class Report:
    method: str
    tables: dict  # name -> Table, written in insertion order
    summary: list = field(default_factory=list)  # human-readable lines

    def __eq__(self, other):
        if not isinstance(other, Report):
            return NotImplemented
        return (self.method == other.method and list(self.tables) == list(other.tables)
                and all(self.tables[k] == other.tables[k] for k in self.tables)
                and self.summary == other.summary)


def _cell(v, t: str) -> str:
    if t == "float":
        return fmt_float(v)
    s = str(v)
    if t == "str" and (not s or "\t" in s or "\n" in s or s != s.strip()):
        raise ValueError(f"string cell {s!r} must be non-empty, without tabs or newlines")
    return s


def _table_text(table: Table) -> str:
    head = "\t".join(f"{c}:{t}" for c, t in table.columns) + "\n"
    return head + "".join(
        "\t".join(_cell(v, t) for v, (_, t) in zip(row, table.columns)) + "\n" for row in table.rows
    )


def dumps_report(rep: Report) -> str:
    items = [("format", f"ghostspec-report {REPORT_VERSION}"), ("method", rep.method),
             ("tables", " ".join(rep.tables) if rep.tables else "none")]
    out = [_header(items)]
    for name, table in rep.tables.items():
        out.append(f"[table {name} rows={len(table.rows)}]\n")
        out.append(_table_text(table))
    out.append(f"[summary lines={len(rep.summary)}]\n")
    for line in rep.summary:
        if "\n" in line:
            raise ValueError("summary lines must not contain newlines")
        out.append(line + "\n")
    return "".join(out)


_SECTION = re.compile(r"^\[(table (\S+)|summary) (rows|lines)=(\d+)\]$")


def loads_report(text: str, name: str = "<report>") -> Report:
    r = _Reader(text, name, "report", REPORT_VERSION)
    expected = r.get("tables").split()
    if expected == ["none"]:
        expected = []
    tables, summary = {}, None
    i = 0
    body = r.body
    while i < len(body):
        m = _SECTION.match(body[i])
        if not m:
            r.fail(r.body_lineno(i), f"expected a section marker, got {body[i][:60]!r}")
        n = int(m.group(4))
        if m.group(1) == "summary":
            summary = body[i + 1:i + 1 + n]
            if len(summary) != n:
                r.fail(r.body_lineno(i), "summary truncated")
            i += 1 + n
            continue
        tname = m.group(2)
        if i + 1 >= len(body):
            r.fail(r.body_lineno(i), "table header missing")
        cols = []
        for spec in body[i + 1].split("\t"):
            c, _, t = spec.rpartition(":")
            cols.append((c, t))
        rows = []
        for j in range(n):
            k = i + 2 + j
            if k >= len(body):
                r.fail(r.body_lineno(k), f"table {tname} truncated")
            cells = body[k].split("\t")
            if len(cells) != len(cols):
                r.fail(r.body_lineno(k), f"expected {len(cols)} cells")
            rows.append(cells)
        try:
            tables[tname] = Table(cols, rows)
        except ValueError as exc:
            r.fail(r.body_lineno(i + 1), f"table {tname}: {exc}")
        i += 2 + n
    if list(tables) != expected:
        r.fail(r.header_line["tables"], "table list does not match the body")
    if summary is None:
        r.fail(len(r.lines), "missing summary section")
    return Report(r.get("method"), tables, summary)


def save_report(rep: Report, path: PathLike) -> None:
    atomic_write(path, dumps_report(rep))


def load_report(path: PathLike) -> Report:
    return loads_report(Path(path).read_text(encoding="utf-8"), str(path))


def write_table_tsv(table: Table, path: PathLike) -> None:
    atomic_write(path, _table_text(table))
