import json
import os
import subprocess
import sys
import textwrap

import pytest

from qbound.store import (
    RATIO_SCHEMA,
    SPECTRUM_SCHEMA,
    CacheConflict,
    CacheError,
    CacheRecord,
    FitRecord,
    MeasuredSpectrum,
    cache_get,
    cache_put,
    fit_get,
    fit_put,
    format_table,
    load_measured_spectrum,
    write_table,
)


def _record(**kw):
    base = dict(n=2, eta=0.62, coeffs=(0.5, 0.5, 0.70710678), qfi=1.23456789012345, converged=True,
                settings_fingerprint="abc123")
    base.update(kw)
    return CacheRecord(**base)


def test_roundtrip(tmp_path):
    path = tmp_path / "c.jsonl"
    rec = _record()
    cache_put(rec, path)
    assert cache_get(2, 0.62, "abc123", path) == rec


def test_identical_put_is_idempotent(tmp_path):
    path = tmp_path / "c.jsonl"
    cache_put(_record(), path)
    before = path.read_bytes()
    cache_put(_record(), path)
    assert path.read_bytes() == before


def test_conflicting_put(tmp_path):
    path = tmp_path / "c.jsonl"
    cache_put(_record(), path)
    with pytest.raises(CacheConflict):
        cache_put(_record(qfi=2.0), path)
    cache_put(_record(qfi=2.0), path, overwrite=True)
    assert cache_get(2, 0.62, "abc123", path).qfi == 2.0


def test_missing_key_and_missing_file(tmp_path):
    path = tmp_path / "c.jsonl"
    assert cache_get(2, 0.62, "abc123", path) is None
    cache_put(_record(), path)
    assert cache_get(3, 0.62, "abc123", path) is None
    assert cache_get(2, 0.62, "other", path) is None


def test_eta_canonicalization(tmp_path):
    path = tmp_path / "c.jsonl"
    cache_put(_record(eta=0.6200004), path)
    assert cache_get(2, 0.62, "abc123", path) is not None
    assert _record(eta=0.6200004).eta == 0.62


def test_corrupt_record_is_named(tmp_path):
    path = tmp_path / "c.jsonl"
    cache_put(_record(), path)
    cache_put(_record(n=1, coeffs=(1.0, 0.0)), path)
    lines = path.read_text().splitlines()
    lines[1] = lines[1][:20]
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(CacheError, match="record 2"):
        cache_get(2, 0.62, "abc123", path)


def test_record_validation():
    with pytest.raises(ValueError):
        _record(coeffs=(1.0,))


def test_fit_records(tmp_path):
    path = tmp_path / "c.jsonl"
    fit = FitRecord(0.7, 30, 60, 2.9, -8.9, 59.0, 1.7e-5, "abc123")
    fit_put(fit, path)
    cache_put(_record(), path)
    assert fit_get(0.7, 30, 60, "abc123", path) == fit
    assert fit_get(0.7, 30, 61, "abc123", path) is None
    assert all(json.loads(line)["kind"] in ("fit", "state") for line in path.read_text().splitlines())


def test_interrupted_write_leaves_previous_file(tmp_path):
    path = tmp_path / "c.jsonl"
    cache_put(_record(), path)
    before = path.read_bytes()
    script = textwrap.dedent(
        f"""
        import os
        import qbound.store as store
        real_fsync = os.fsync
        def die(fd):
            real_fsync(fd)
            os._exit(9)
        os.fsync = die
        store.cache_put(store.CacheRecord(5, 0.5, (0.0,) * 6, 1.0, True, "x"), {str(path)!r})
        """
    )
    proc = subprocess.run([sys.executable, "-c", script])
    assert proc.returncode == 9
    assert path.read_bytes() == before
    assert cache_get(2, 0.62, "abc123", path) == _record()


def test_failed_write_cleans_temp_file(tmp_path, monkeypatch):
    path = tmp_path / "c.jsonl"
    cache_put(_record(), path)

    def boom(*args):
        raise OSError("disk full")

    monkeypatch.setattr(os, "replace", boom)
    with pytest.raises(OSError):
        cache_put(_record(n=1, coeffs=(1.0, 0.0)), path)
    assert sorted(p.name for p in tmp_path.iterdir()) == ["c.jsonl"]


def test_measured_spectrum_formats(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("frequency_hz,strain\n100,3e-22\n200,2.5e-22\n")
    spec = load_measured_spectrum(p)
    assert spec.points == ((100.0, 3e-22), (200.0, 2.5e-22))
    q = tmp_path / "m.txt"
    q.write_text("100 3e-22\n200\t2.5e-22\n")
    assert load_measured_spectrum(q).points == spec.points


def test_measured_spectrum_errors(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("200,3e-22\n100,2e-22\n")
    with pytest.raises(ValueError, match="increasing"):
        load_measured_spectrum(p)
    p.write_text("100,3e-22\nfoo,bar\n")
    with pytest.raises(ValueError, match="row 2"):
        load_measured_spectrum(p)
    with pytest.raises(ValueError):
        MeasuredSpectrum(((100.0, -1.0),))


def test_table_headers():
    assert format_table([], SPECTRUM_SCHEMA) == "frequency_hz,delta_h_per_sqrt_hz,curve\n"
    assert format_table([], RATIO_SCHEMA) == "mean_photons,loss,ratio\n"


def test_table_number_format():
    text = format_table([(1000.0, 2.2128e-22, "csv_10dB")], SPECTRUM_SCHEMA)
    assert text.splitlines()[1] == "1.000000000e+03,2.212800000e-22,csv_10dB"
    assert "\r" not in text
    with pytest.raises(ValueError):
        format_table([(1.0, 2.0)], SPECTRUM_SCHEMA)


def test_table_bytes_are_stable(tmp_path):
    rows = [(1.0, 0.3, 0.98765432123), (2e9, 0.3, 0.99999)]
    write_table(rows, RATIO_SCHEMA, tmp_path / "a.csv")
    write_table(rows, RATIO_SCHEMA, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
