"""Minimal DICOM series reader and writer.

Supported subset, by design: single-frame axial CT slices, uncompressed
little-endian pixel data, explicit or implicit VR. Anything else (compressed
syntaxes, big endian, sequences, undefined lengths) is a hard error rather
than a best-effort decode, which keeps ingestion bit-exact.

Slices are ordered by the z component of Image Position (Patient); when that
tag is absent the reader falls back to Instance Number. Stored values are
rescaled to HU per slice (HU = stored * slope + intercept, rounded half away
from zero into int16).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    InconsistentSeries,
    InputFormatError,
    MissingTag,
    UnsupportedTransferSyntax,
)
from .volume import CtVolume, SliceMeta, round_half_away_from_zero

IMPLICIT_VR_LE = "1.2.840.10008.1.2"
EXPLICIT_VR_LE = "1.2.840.10008.1.2.1"

TAG_TRANSFER_SYNTAX = (0x0002, 0x0010)
TAG_SLICE_THICKNESS = (0x0018, 0x0050)
TAG_INSTANCE_NUMBER = (0x0020, 0x0013)
TAG_IMAGE_POSITION = (0x0020, 0x0032)
TAG_ROWS = (0x0028, 0x0010)
TAG_COLUMNS = (0x0028, 0x0011)
TAG_PIXEL_SPACING = (0x0028, 0x0030)
TAG_BITS_ALLOCATED = (0x0028, 0x0100)
TAG_BITS_STORED = (0x0028, 0x0101)
TAG_HIGH_BIT = (0x0028, 0x0102)
TAG_PIXEL_REPRESENTATION = (0x0028, 0x0103)
TAG_RESCALE_INTERCEPT = (0x0028, 0x1052)
TAG_RESCALE_SLOPE = (0x0028, 0x1053)
TAG_PIXEL_DATA = (0x7FE0, 0x0010)

# VR assumed per tag when the dataset is implicit VR.
_TAG_VR = {
    TAG_TRANSFER_SYNTAX: "UI",
    TAG_SLICE_THICKNESS: "DS",
    TAG_INSTANCE_NUMBER: "IS",
    TAG_IMAGE_POSITION: "DS",
    TAG_ROWS: "US",
    TAG_COLUMNS: "US",
    TAG_PIXEL_SPACING: "DS",
    TAG_BITS_ALLOCATED: "US",
    TAG_BITS_STORED: "US",
    TAG_HIGH_BIT: "US",
    TAG_PIXEL_REPRESENTATION: "US",
    TAG_RESCALE_INTERCEPT: "DS",
    TAG_RESCALE_SLOPE: "DS",
    TAG_PIXEL_DATA: "OW",
}

_LONG_VRS = {"OB", "OW", "OF", "SQ", "UT", "UN"}


def _tag_str(tag) -> str:
    return f"({tag[0]:04X},{tag[1]:04X})"


def _parse_elements(data: bytes, pos: int, explicit: bool, stop_group=None):
    """Yield (tag, vr, value_bytes) from ``pos``; stops before ``stop_group`` boundary."""
    n = len(data)
    while pos + 8 <= n:
        group, elem = struct.unpack_from("<HH", data, pos)
        if stop_group is not None and group != stop_group:
            return
        tag = (group, elem)
        if group == 0xFFFE:
            raise InputFormatError("sequence item tags are not supported")
        if explicit:
            vr = data[pos + 4:pos + 6].decode("ascii", "replace")
            if vr in _LONG_VRS:
                (length,) = struct.unpack_from("<I", data, pos + 8)
                value_at = pos + 12
            else:
                (length,) = struct.unpack_from("<H", data, pos + 6)
                value_at = pos + 8
        else:
            vr = _TAG_VR.get(tag, "UN")
            (length,) = struct.unpack_from("<I", data, pos + 4)
            value_at = pos + 8
        if length == 0xFFFFFFFF:
            raise InputFormatError(f"undefined length on {_tag_str(tag)} is not supported")
        if value_at + length > n:
            raise InputFormatError(f"element {_tag_str(tag)} overruns the file")
        yield tag, vr, data[value_at:value_at + length]
        pos = value_at + length


def _text(value: bytes) -> str:
    return value.decode("ascii", "replace").rstrip("\x00 ").strip()


def _decode(vr: str, value: bytes):
    if vr == "US":
        return struct.unpack("<H", value[:2])[0]
    if vr == "UL":
        return struct.unpack("<I", value[:4])[0]
    if vr == "DS":
        text = _text(value)
        parts = [float(p) for p in text.split("\\")] if text else []
        return parts
    if vr == "IS":
        text = _text(value)
        return int(text) if text else None
    if vr == "UI":
        return _text(value)
    return value


@dataclass
class _RawSlice:
    path: Path
    rows: int
    cols: int
    pixel_spacing: tuple[float, float]     # (row, col) mm as stored
    slice_thickness: float
    z_position: float | None
    instance_number: int | None
    slope: float
    intercept: float
    stored: np.ndarray                     # (rows, cols) raw stored values


def _require(elements: dict, tag, path: Path):
    if tag not in elements:
        raise MissingTag(_tag_str(tag), str(path))
    return elements[tag]


def _parse_file(path: Path) -> _RawSlice | None:
    data = path.read_bytes()
    if len(data) < 132 or data[128:132] != b"DICM":
        return None

    meta: dict = {}
    pos = 132
    consumed = 0
    for tag, vr, value in _parse_elements(data, pos, explicit=True, stop_group=0x0002):
        meta[tag] = _decode(vr, value)
        consumed += (12 if vr in _LONG_VRS else 8) + len(value)
    pos += consumed

    syntax = meta.get(TAG_TRANSFER_SYNTAX, IMPLICIT_VR_LE)
    if syntax == EXPLICIT_VR_LE:
        explicit = True
    elif syntax == IMPLICIT_VR_LE:
        explicit = False
    else:
        raise UnsupportedTransferSyntax(syntax)

    elements: dict = {}
    for tag, vr, value in _parse_elements(data, pos, explicit=explicit):
        if tag in _TAG_VR:
            elements[tag] = _decode(_TAG_VR[tag], value) if not explicit else _decode(vr, value)
        if tag == TAG_PIXEL_DATA:
            elements[tag] = value
            break

    rows = _require(elements, TAG_ROWS, path)
    cols = _require(elements, TAG_COLUMNS, path)
    spacing = _require(elements, TAG_PIXEL_SPACING, path)
    thickness = _require(elements, TAG_SLICE_THICKNESS, path)
    intercept = _require(elements, TAG_RESCALE_INTERCEPT, path)
    slope = _require(elements, TAG_RESCALE_SLOPE, path)
    bits = _require(elements, TAG_BITS_ALLOCATED, path)
    representation = _require(elements, TAG_PIXEL_REPRESENTATION, path)
    pixel_data = _require(elements, TAG_PIXEL_DATA, path)

    position = elements.get(TAG_IMAGE_POSITION)
    instance = elements.get(TAG_INSTANCE_NUMBER)
    if position is None and instance is None:
        raise MissingTag(_tag_str(TAG_IMAGE_POSITION), str(path))

    if bits != 16:
        raise InputFormatError(f"{path}: BitsAllocated must be 16, got {bits}")
    if len(spacing) != 2 or spacing[0] <= 0 or spacing[1] <= 0:
        raise InputFormatError(f"{path}: malformed Pixel Spacing {spacing}")
    if not slope or not slope[0]:
        raise InputFormatError(f"{path}: Rescale Slope must be nonzero")
    if len(pixel_data) != rows * cols * 2:
        raise InputFormatError(
            f"{path}: pixel data is {len(pixel_data)} bytes, expected {rows * cols * 2}")

    dtype = "<i2" if representation == 1 else "<u2"
    stored = np.frombuffer(pixel_data, dtype=dtype).reshape(rows, cols)
    return _RawSlice(
        path=path,
        rows=rows,
        cols=cols,
        pixel_spacing=(spacing[0], spacing[1]),
        slice_thickness=thickness[0],
        z_position=position[2] if position and len(position) == 3 else None,
        instance_number=instance,
        slope=slope[0],
        intercept=intercept[0],
        stored=stored,
    )


def read_dicom_series_with_meta(directory) -> tuple[CtVolume, list[SliceMeta]]:
    directory = Path(directory)
    slices = []
    for path in sorted(p for p in directory.iterdir() if p.is_file()):
        parsed = _parse_file(path)
        if parsed is not None:
            slices.append(parsed)
    if not slices:
        raise InputFormatError(f"no DICOM files (DICM magic) found in {directory}")

    first = slices[0]
    for s in slices[1:]:
        if (s.rows, s.cols) != (first.rows, first.cols):
            raise InconsistentSeries(
                f"{s.path}: {s.rows}x{s.cols} differs from {first.rows}x{first.cols}")
        if s.pixel_spacing != first.pixel_spacing:
            raise InconsistentSeries(
                f"{s.path}: pixel spacing {s.pixel_spacing} differs from {first.pixel_spacing}")

    if all(s.z_position is not None for s in slices):
        slices.sort(key=lambda s: s.z_position)
        zs = [s.z_position for s in slices]
    else:
        if any(s.instance_number is None for s in slices):
            raise MissingTag(_tag_str(TAG_IMAGE_POSITION), str(directory))
        slices.sort(key=lambda s: s.instance_number)
        zs = None

    if len(slices) > 1 and zs is not None:
        steps = np.diff(zs)
        mean_step = float(np.mean(steps))
        if mean_step <= 0:
            raise InconsistentSeries(f"duplicate or non-increasing z positions in {directory}")
        if np.any(np.abs(steps - mean_step) > 0.01 * mean_step):
            raise InconsistentSeries(
                f"slice spacing varies by more than 1% in {directory}: steps {steps.tolist()}")
        sz = mean_step
    else:
        sz = first.slice_thickness

    row_mm, col_mm = first.pixel_spacing
    hu = np.empty((len(slices), first.rows, first.cols), dtype=np.int16)
    metas = []
    for i, s in enumerate(slices):
        values = s.stored.astype(np.float64) * s.slope + s.intercept
        hu[i] = np.clip(round_half_away_from_zero(values), -32768, 32767).astype(np.int16)
        metas.append(SliceMeta(
            index=i,
            z_position_mm=s.z_position if s.z_position is not None else float(i) * sz,
            rescale_slope=s.slope,
            rescale_intercept=s.intercept,
        ))
    volume = CtVolume(hu, spacing=(col_mm, row_mm, sz), case_id=directory.name)
    return volume, metas


def read_dicom_series(directory) -> CtVolume:
    """Read one uncompressed little-endian series into an ordered HU volume."""
    volume, _ = read_dicom_series_with_meta(directory)
    return volume


# --- writing ---------------------------------------------------------------

def _encode_element(tag, vr: str, value: bytes, explicit: bool) -> bytes:
    if len(value) % 2:
        value += b"\x00" if vr in ("UI", "OB") else b" "
    head = struct.pack("<HH", tag[0], tag[1])
    if explicit:
        if vr in _LONG_VRS:
            return head + vr.encode() + b"\x00\x00" + struct.pack("<I", len(value)) + value
        return head + vr.encode() + struct.pack("<H", len(value)) + value
    return head + struct.pack("<I", len(value)) + value


def _ds(*values) -> bytes:
    return "\\".join(f"{v:.10g}" for v in values).encode("ascii")


def write_dicom_series(
    volume: CtVolume,
    directory,
    slope: float = 1.0,
    intercept: float = 0.0,
    origin_z_mm: float = 0.0,
    implicit_vr: bool = False,
) -> list[Path]:
    """Write one file per slice; HU is encoded as stored = (HU - intercept) / slope.

    Slope/intercept must make the stored values exact 16-bit integers, so the
    reader round-trips the HU grid bit for bit.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    nx, ny, nz = volume.dims
    sx, sy, sz = volume.spacing

    stored_f = (volume.voxels.astype(np.float64) - intercept) / slope
    stored = np.round(stored_f)
    if not np.array_equal(stored * slope + intercept, volume.voxels.astype(np.float64)):
        raise ValueError("slope/intercept do not encode this volume exactly")
    if stored.min() >= 0 and stored.max() <= 65535:
        representation, dtype = 0, "<u2"
    elif stored.min() >= -32768 and stored.max() <= 32767:
        representation, dtype = 1, "<i2"
    else:
        raise ValueError("stored values exceed 16-bit range")
    stored = stored.astype(dtype)

    syntax = IMPLICIT_VR_LE if implicit_vr else EXPLICIT_VR_LE
    meta_body = _encode_element(TAG_TRANSFER_SYNTAX, "UI", syntax.encode(), explicit=True)
    meta = _encode_element((0x0002, 0x0000), "UL", struct.pack("<I", len(meta_body)),
                           explicit=True) + meta_body

    paths = []
    for z in range(nz):
        body = b"".join([
            _encode_element(TAG_SLICE_THICKNESS, "DS", _ds(sz), not implicit_vr),
            _encode_element(TAG_INSTANCE_NUMBER, "IS", str(z + 1).encode(), not implicit_vr),
            _encode_element(TAG_IMAGE_POSITION, "DS",
                            _ds(0.0, 0.0, origin_z_mm + z * sz), not implicit_vr),
            _encode_element(TAG_ROWS, "US", struct.pack("<H", ny), not implicit_vr),
            _encode_element(TAG_COLUMNS, "US", struct.pack("<H", nx), not implicit_vr),
            _encode_element(TAG_PIXEL_SPACING, "DS", _ds(sy, sx), not implicit_vr),
            _encode_element(TAG_BITS_ALLOCATED, "US", struct.pack("<H", 16), not implicit_vr),
            _encode_element(TAG_BITS_STORED, "US", struct.pack("<H", 16), not implicit_vr),
            _encode_element(TAG_HIGH_BIT, "US", struct.pack("<H", 15), not implicit_vr),
            _encode_element(TAG_PIXEL_REPRESENTATION, "US",
                            struct.pack("<H", representation), not implicit_vr),
            _encode_element(TAG_RESCALE_INTERCEPT, "DS", _ds(intercept), not implicit_vr),
            _encode_element(TAG_RESCALE_SLOPE, "DS", _ds(slope), not implicit_vr),
            _encode_element(TAG_PIXEL_DATA, "OW", stored[z].tobytes(), not implicit_vr),
        ])
        path = directory / f"slice_{z:04d}.dcm"
        path.write_bytes(b"\x00" * 128 + b"DICM" + meta + body)
        paths.append(path)
    return paths
