"""Header + raw file formats and small CSV sidecars.

Every grid format is a JSON header describing geometry plus a sibling
``.raw`` payload of little-endian values in x-fastest, then y, then z order:

* volumes:  dtype ``i16`` (HU)
* masks:    dtype ``u8`` (strictly 0 or 1)
* probability maps: dtype ``f32`` (values in [0, 1])

The header is written canonically (sorted keys, fixed indentation), so
reading a file and writing it back is byte-identical.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .errors import HeaderMismatch, InputFormatError, ValueOutOfRange
from .volume import BinaryMask3D, CtVolume, ProbabilityMap3D

_DTYPES = {"i16": "<i2", "u8": "u1", "f32": "<f4"}


def raw_path_for(header_path) -> Path:
    return Path(header_path).with_suffix(".raw")


def _write_pair(header_path, header: dict, payload: np.ndarray) -> None:
    header_path = Path(header_path)
    text = json.dumps(header, indent=2, sort_keys=True) + "\n"
    header_path.write_text(text)
    raw_path_for(header_path).write_bytes(np.ascontiguousarray(payload).tobytes())


def _read_pair(header_path, expect_dtype: str) -> tuple[dict, np.ndarray]:
    header_path = Path(header_path)
    try:
        header = json.loads(header_path.read_text())
    except json.JSONDecodeError as exc:
        raise InputFormatError(f"{header_path}: malformed header JSON: {exc}") from exc
    for key in ("dims", "spacing", "byte_order", "dtype"):
        if key not in header:
            raise InputFormatError(f"{header_path}: header missing key {key!r}")
    if header["byte_order"] != "LE":
        raise InputFormatError(f"{header_path}: byte_order must be 'LE'")
    if header["dtype"] != expect_dtype:
        raise InputFormatError(
            f"{header_path}: dtype {header['dtype']!r}, expected {expect_dtype!r}")
    nx, ny, nz = (int(d) for d in header["dims"])
    payload = raw_path_for(header_path).read_bytes()
    dtype = np.dtype(_DTYPES[expect_dtype])
    expected = nx * ny * nz * dtype.itemsize
    if len(payload) != expected:
        raise HeaderMismatch(
            f"{header_path}: payload is {len(payload)} bytes, "
            f"header declares {nx}x{ny}x{nz} = {expected}")
    arr = np.frombuffer(payload, dtype=dtype).reshape(nz, ny, nx)
    return header, arr


def write_internal(volume: CtVolume, path) -> None:
    nx, ny, nz = volume.dims
    header = {
        "dims": [nx, ny, nz],
        "spacing": list(volume.spacing),
        "case_id": volume.case_id,
        "byte_order": "LE",
        "dtype": "i16",
    }
    _write_pair(path, header, volume.voxels.astype("<i2"))


def read_internal(path) -> CtVolume:
    header, arr = _read_pair(path, "i16")
    return CtVolume(
        voxels=arr.astype(np.int16),
        spacing=tuple(float(s) for s in header["spacing"]),
        case_id=str(header.get("case_id", "")),
    )


def write_mask(mask: BinaryMask3D, path, case_id: str = "") -> None:
    nx, ny, nz = mask.dims
    header = {
        "dims": [nx, ny, nz],
        "spacing": list(mask.spacing),
        "case_id": case_id,
        "byte_order": "LE",
        "dtype": "u8",
    }
    _write_pair(path, header, mask.bits.astype("u1"))


def read_mask(path) -> BinaryMask3D:
    header, arr = _read_pair(path, "u8")
    bad = arr > 1
    if bad.any():
        zi, yi, xi = (int(i[0]) for i in np.nonzero(bad))
        raise ValueOutOfRange((xi, yi, zi), int(arr[zi, yi, xi]), "{0, 1}")
    return BinaryMask3D(arr.astype(bool), tuple(float(s) for s in header["spacing"]))


def write_probmap(pmap: ProbabilityMap3D, path) -> None:
    nx, ny, nz = pmap.dims
    header = {
        "dims": [nx, ny, nz],
        "spacing": list(pmap.spacing),
        "byte_order": "LE",
        "dtype": "f32",
    }
    _write_pair(path, header, pmap.values.astype("<f4"))


def load_probmaps(path) -> ProbabilityMap3D:
    """Read an externally produced probability map, validating values into [0, 1]."""
    header, arr = _read_pair(path, "f32")
    values = arr.astype(np.float32)
    # ProbabilityMap3D re-checks the range and raises ValueOutOfRange with the voxel.
    return ProbabilityMap3D(values, tuple(float(s) for s in header["spacing"]))


def write_histogram_csv(hist, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_lo", "bin_hi", "count"])
        for lo, hi, count in zip(hist.bin_edges[:-1], hist.bin_edges[1:], hist.counts):
            writer.writerow([repr(float(lo)), repr(float(hi)), int(count)])


def read_region_scores(path) -> dict[int, float]:
    """Sidecar CSV ``region_id,score`` -> {region_id: score}."""
    scores: dict[int, float] = {}
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().lower() == "region_id":
                continue
            rid, score = int(row[0]), float(row[1])
            if not 0.0 <= score <= 1.0:
                raise InputFormatError(f"{path}: score {score} for region {rid} outside [0, 1]")
            scores[rid] = score
    return scores


def write_region_scores(scores: dict[int, float], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["region_id", "score"])
        for rid in sorted(scores):
            writer.writerow([rid, repr(float(scores[rid]))])
