"""Shared on-disk format: complex matrices as raw float64 blobs with JSON sidecars.

A matrix named ``base`` is stored as ``base.bin`` (little-endian IEEE float64,
interleaved re/im, column-major) plus ``base.json`` holding
{"rows", "cols", "dtype": "c128", "layout": "col-major"} and any extra header
fields (data cubes add "n_snapshots"; estimates ship a separate summary).
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .scenario import DataCube
from .shrinkage import CovarianceEstimate

SIDECAR_REQUIRED = ("rows", "cols", "dtype", "layout")


def save_matrix(base, matrix: np.ndarray, extra: dict | None = None) -> tuple[Path, Path]:
    """Write a complex matrix blob and its sidecar; returns (bin_path, json_path)."""
    base = Path(base)
    m = np.asarray(matrix, dtype=np.complex128)
    if m.ndim != 2:
        raise ValueError("only 2-d matrices are serializable")
    rows, cols = m.shape
    flat = m.ravel(order="F")
    blob = np.empty(2 * flat.size, dtype="<f8")
    blob[0::2] = flat.real
    blob[1::2] = flat.imag
    bin_path = base.with_suffix(".bin")
    json_path = base.with_suffix(".json")
    bin_path.write_bytes(blob.tobytes())
    header = {"rows": rows, "cols": cols, "dtype": "c128", "layout": "col-major"}
    if extra:
        header.update(extra)
    json_path.write_text(json.dumps(header, indent=2) + "\n")
    return bin_path, json_path


def load_matrix(base) -> tuple[np.ndarray, dict]:
    """Read a matrix blob and its sidecar; returns (matrix, header)."""
    base = Path(base)
    header = json.loads(base.with_suffix(".json").read_text())
    for key in SIDECAR_REQUIRED:
        if key not in header:
            raise ValueError(f"sidecar missing field {key!r}")
    if header["dtype"] != "c128" or header["layout"] != "col-major":
        raise ValueError("unsupported matrix encoding")
    rows, cols = int(header["rows"]), int(header["cols"])
    blob = np.frombuffer(base.with_suffix(".bin").read_bytes(), dtype="<f8")
    if blob.size != 2 * rows * cols:
        raise ValueError("blob size does not match sidecar dimensions")
    m = (blob[0::2] + 1j * blob[1::2]).reshape((rows, cols), order="F")
    return m, header


def save_cube(base, cube: DataCube) -> tuple[Path, Path]:
    """Serialize a data cube; the sidecar carries n_snapshots and test_index."""
    extra = {"n_snapshots": cube.n_snapshots}
    if cube.test_index is not None:
        extra["test_index"] = cube.test_index
    return save_matrix(base, cube.snapshots, extra=extra)


def load_cube(base) -> DataCube:
    m, header = load_matrix(base)
    return DataCube(snapshots=m, test_index=header.get("test_index"))


def save_estimate(base, estimate: CovarianceEstimate) -> list[Path]:
    """Serialize an estimate: dense matrix blob + sidecar + summary JSON."""
    base = Path(base)
    paths = list(save_matrix(base, estimate.matrix()))
    summary_path = base.with_suffix(".summary.json")
    summary_path.write_text(json.dumps(estimate.summary(), indent=2) + "\n")
    paths.append(summary_path)
    return paths
