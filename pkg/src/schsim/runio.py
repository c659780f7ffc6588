"""Run-directory I/O: snapshots, CSV tables and checksummed manifests.

A run directory is the on-disk contract between the simulator and any
downstream tooling:

* ``fields/NNNN.snap`` -- binary coefficient snapshots (format below),
* ``ledger.csv`` -- time series of conserved/monitored quantities,
* ``stats.csv`` and friends -- small summary tables,
* ``manifest.json`` -- written last, atomically, with a sha256 per data
  file, so its presence certifies a complete run.

Snapshot format: magic ``SCHS``, then two little-endian u32 words (format
version, truncation j_max), then ``2*j_max + 1`` little-endian float64
coefficients.  CSV cells carry 17 significant digits so float64 values
round-trip exactly.  The manifest records wall-clock metadata and is the
only file excluded from bitwise reproducibility checks.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import struct
from datetime import datetime, timezone

import numpy as np

SNAPSHOT_MAGIC = b"SCHS"
SNAPSHOT_VERSION = 1
MANIFEST_VERSION = 1
MANIFEST_NAME = "manifest.json"

__all__ = [
    "SNAPSHOT_MAGIC",
    "SNAPSHOT_VERSION",
    "MANIFEST_VERSION",
    "MANIFEST_NAME",
    "SnapshotError",
    "ManifestError",
    "ChecksumMismatchError",
    "ensure_run_dir",
    "snapshot_path",
    "write_snapshot",
    "read_snapshot",
    "format_cell",
    "write_rows",
    "read_rows",
    "read_columns",
    "file_sha256",
    "write_manifest",
    "load_manifest",
    "verify_manifest",
]


class SnapshotError(RuntimeError):
    """Snapshot file is malformed or inconsistent with its header."""


class ManifestError(RuntimeError):
    """Manifest is missing, unreadable or structurally invalid."""


class ChecksumMismatchError(ManifestError):
    """A data file listed in the manifest is missing or has changed."""


# -- layout -------------------------------------------------------------------


def ensure_run_dir(path: str) -> str:
    os.makedirs(os.path.join(path, "fields"), exist_ok=True)
    return path


def snapshot_path(run_dir: str, index: int) -> str:
    return os.path.join(run_dir, "fields", f"{index:04d}.snap")


# -- snapshots ----------------------------------------------------------------


def write_snapshot(path: str, coeffs: np.ndarray, truncation: int) -> None:
    c = np.ascontiguousarray(coeffs, dtype="<f8")
    if c.ndim != 1 or c.size != 2 * truncation + 1:
        raise SnapshotError(
            f"coefficient vector of length {c.size} does not match "
            f"truncation {truncation} (need {2 * truncation + 1})"
        )
    with open(path, "wb") as fh:
        fh.write(SNAPSHOT_MAGIC)
        fh.write(struct.pack("<II", SNAPSHOT_VERSION, truncation))
        fh.write(c.tobytes())


def read_snapshot(path: str) -> tuple[np.ndarray, int]:
    """Return (coefficients, truncation) from a snapshot file."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != SNAPSHOT_MAGIC:
        raise SnapshotError(f"{path}: bad magic {blob[:4]!r}")
    if len(blob) < 12:
        raise SnapshotError(f"{path}: truncated header")
    version, truncation = struct.unpack("<II", blob[4:12])
    if version != SNAPSHOT_VERSION:
        raise SnapshotError(f"{path}: unsupported snapshot version {version}")
    n = 2 * truncation + 1
    payload = blob[12:]
    if len(payload) != 8 * n:
        raise SnapshotError(
            f"{path}: payload holds {len(payload)} bytes, "
            f"expected {8 * n} for truncation {truncation}"
        )
    coeffs = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    return coeffs, truncation


# -- CSV tables ---------------------------------------------------------------


def format_cell(value) -> str:
    if isinstance(value, bool):
        raise TypeError("boolean cells are not part of the table format")
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def write_rows(path: str, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(header))
        for row in rows:
            writer.writerow([format_cell(v) for v in row])


def read_rows(path: str) -> tuple[list[str], list[list[str]]]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty CSV") from None
        return header, [row for row in reader]


def read_columns(path: str) -> dict[str, np.ndarray]:
    """Read a fully numeric CSV into named float64 columns."""
    header, rows = read_rows(path)
    if any(len(row) != len(header) for row in rows):
        raise ValueError(f"{path}: ragged rows")
    data = np.array([[float(cell) for cell in row] for row in rows],
                    dtype=np.float64)
    if rows == []:
        data = np.empty((0, len(header)))
    return {name: data[:, k] for k, name in enumerate(header)}


# -- manifest -----------------------------------------------------------------


def file_sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(run_dir: str, command: str, config: dict,
                   files, extra: dict | None = None) -> dict:
    """Hash the listed data files and atomically write manifest.json.

    ``files`` holds paths relative to ``run_dir``.  The manifest must be
    written only after every data file is complete; the atomic rename
    guarantees a reader never observes a half-written manifest.
    """
    entries = {}
    for rel in sorted(files):
        full = os.path.join(run_dir, rel)
        entries[rel] = {
            "sha256": file_sha256(full),
            "bytes": os.path.getsize(full),
        }
    manifest = {
        "manifest_version": MANIFEST_VERSION,
        "command": command,
        "config": config,
        "files": entries,
        "created_at": datetime.now(timezone.utc).isoformat(),
    }
    if extra:
        manifest.update(extra)
    target = os.path.join(run_dir, MANIFEST_NAME)
    tmp = target + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, target)
    return manifest


def load_manifest(run_dir: str) -> dict:
    target = os.path.join(run_dir, MANIFEST_NAME)
    try:
        with open(target, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
    except OSError as exc:
        raise ManifestError(f"no readable manifest in {run_dir}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{target}: not valid JSON ({exc.msg})") from exc
    if not isinstance(manifest, dict) or "files" not in manifest:
        raise ManifestError(f"{target}: missing 'files' table")
    if manifest.get("manifest_version") != MANIFEST_VERSION:
        raise ManifestError(
            f"{target}: unsupported manifest version "
            f"{manifest.get('manifest_version')!r}"
        )
    return manifest


def verify_manifest(run_dir: str) -> dict:
    """Re-hash every listed file; raise ChecksumMismatchError on any drift."""
    manifest = load_manifest(run_dir)
    problems = []
    for rel, entry in sorted(manifest["files"].items()):
        full = os.path.join(run_dir, rel)
        if not os.path.isfile(full):
            problems.append(f"{rel}: listed in manifest but missing")
            continue
        actual = file_sha256(full)
        if actual != entry.get("sha256"):
            problems.append(
                f"{rel}: sha256 {actual[:12]}... != recorded "
                f"{str(entry.get('sha256'))[:12]}..."
            )
    if problems:
        raise ChecksumMismatchError("; ".join(problems))
    return manifest
