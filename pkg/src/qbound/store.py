"""Optimizer cache, measured-spectrum input and table output."""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SPECTRUM_SCHEMA = ("frequency_hz", "delta_h_per_sqrt_hz", "curve")
RATIO_SCHEMA = ("mean_photons", "loss", "ratio")
RESIDUAL_SCHEMA = ("n", "delta_phi", "delta_phi_fit", "relative_residual")


class CacheError(Exception):
    pass


class CacheConflict(CacheError):
    pass


def canonical_eta(eta):
    return round(float(eta), 6)


@dataclass(frozen=True)
class CacheRecord:
    n: int
    eta: float
    coeffs: tuple
    qfi: float
    converged: bool
    settings_fingerprint: str

    def __post_init__(self):
        object.__setattr__(self, "eta", canonical_eta(self.eta))
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        if self.n < 0 or len(self.coeffs) != self.n + 1:
            raise ValueError(f"record for n={self.n} needs {self.n + 1} coefficients")

    @property
    def key(self):
        return ("state", self.n, self.eta, self.settings_fingerprint)

    def to_json(self):
        return {
            "kind": "state",
            "n": self.n,
            "eta": self.eta,
            "coeffs": list(self.coeffs),
            "qfi": self.qfi,
            "converged": self.converged,
            "settings_fingerprint": self.settings_fingerprint,
        }

    @classmethod
    def from_json(cls, d):
        return cls(
            int(d["n"]), float(d["eta"]), tuple(d["coeffs"]), float(d["qfi"]),
            bool(d["converged"]), str(d["settings_fingerprint"]),
        )


@dataclass(frozen=True)
class FitRecord:
    eta: float
    n_lo: int
    n_hi: int
    a: float
    b: float
    c: float
    max_relative_residual: float
    settings_fingerprint: str

    def __post_init__(self):
        object.__setattr__(self, "eta", canonical_eta(self.eta))

    @property
    def key(self):
        return ("fit", self.n_lo, self.n_hi, self.eta, self.settings_fingerprint)

    def to_json(self):
        return {"kind": "fit", **{k: getattr(self, k) for k in self.__dataclass_fields__}}

    @classmethod
    def from_json(cls, d):
        return cls(
            float(d["eta"]), int(d["n_lo"]), int(d["n_hi"]), float(d["a"]), float(d["b"]),
            float(d["c"]), float(d["max_relative_residual"]), str(d["settings_fingerprint"]),
        )


_KINDS = {"state": CacheRecord, "fit": FitRecord}


def _read_records(path):
    path = Path(path)
    if not path.exists():
        return {}
    records = {}
    with open(path, encoding="utf-8") as fh:
        for index, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
                rec = _KINDS[d["kind"]].from_json(d)
            except (ValueError, KeyError, TypeError) as exc:
                raise CacheError(f"{path}: corrupt cache record {index}: {exc}") from exc
            records[rec.key] = rec
    return records


def _atomic_write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _put(record, path, overwrite):
    records = _read_records(path)
    old = records.get(record.key)
    if old is not None and old != record and not overwrite:
        raise CacheConflict(f"cache key {record.key} already holds a different payload")
    if old == record:
        return
    records[record.key] = record
    lines = [json.dumps(r.to_json(), sort_keys=True) for _, r in sorted(records.items(), key=lambda kv: repr(kv[0]))]
    _atomic_write(path, "\n".join(lines) + "\n")


def cache_put(record, path, overwrite=False):
    """Insert or (with ``overwrite``) replace a record; rewrites the file atomically."""
    _put(record, path, overwrite)


def cache_get(n, eta, fingerprint, path):
    return _read_records(path).get(("state", int(n), canonical_eta(eta), fingerprint))


def fit_put(record, path, overwrite=False):
    _put(record, path, overwrite)


def fit_get(eta, n_lo, n_hi, fingerprint, path):
    return _read_records(path).get(("fit", int(n_lo), int(n_hi), canonical_eta(eta), fingerprint))


@dataclass(frozen=True)
class MeasuredSpectrum:
    points: tuple
    label: str = "measured"

    def __post_init__(self):
        pts = tuple((float(f), float(h)) for f, h in self.points)
        freqs = np.array([p[0] for p in pts])
        if np.any(np.diff(freqs) <= 0):
            raise ValueError("frequencies must be strictly increasing")
        if any(f <= 0 or h <= 0 for f, h in pts):
            raise ValueError("frequencies and strain values must be positive")
        object.__setattr__(self, "points", pts)


def load_measured_spectrum(path, label="measured"):
    """Read two numeric columns (Hz, strain/sqrt(Hz)); a header line is skipped."""
    points = []
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    dialect = "excel" if "," in text else "excel-tab"
    rows = [r for r in csv.reader(io.StringIO(text), dialect) if r and any(c.strip() for c in r)]
    for i, row in enumerate(rows, start=1):
        cells = row if len(row) > 1 else row[0].split()
        try:
            f, h = (float(c) for c in cells[:2])
        except ValueError:
            if i == 1:
                continue
            raise ValueError(f"{path}: row {i} is not numeric: {row!r}") from None
        if len(cells) < 2:
            raise ValueError(f"{path}: row {i} needs two columns")
        points.append((f, h))
    return MeasuredSpectrum(tuple(points), label)


def _format(value):
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.9e}"


def format_table(rows, schema):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(schema)
    for row in rows:
        if len(row) != len(schema):
            raise ValueError(f"row {row!r} does not match schema {schema}")
        writer.writerow([_format(v) for v in row])
    return buf.getvalue()


def write_table(rows, schema, path):
    """Comma-separated table, header row, 10 significant digits, LF endings."""
    _atomic_write(path, format_table(rows, schema))
