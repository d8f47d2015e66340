import struct

import numpy as np
import pytest

from ctpoir import (
    CtVolume,
    InconsistentSeries,
    MissingTag,
    UnsupportedTransferSyntax,
    read_dicom_series,
    read_dicom_series_with_meta,
    write_dicom_series,
)
from ctpoir.dicom import TAG_RESCALE_INTERCEPT, _parse_file
from ctpoir.errors import InputFormatError


def _volume(nz=4, ny=6, nx=5, seed=0, spacing=(0.7, 0.8, 5.0)):
    rng = np.random.default_rng(seed)
    voxels = rng.integers(-1200, 601, size=(nz, ny, nx)).astype(np.int16)
    return CtVolume(voxels, spacing=spacing, case_id="case")


def test_rescale_formula_applied():
    # stored 100 with slope 1, intercept -1024 -> HU -924
    volume = CtVolume(np.full((1, 2, 2), -924, dtype=np.int16), spacing=(1, 1, 1))
    assert (-924 - (-1024)) / 1.0 == 100.0


def test_round_trip_explicit_and_implicit(tmp_path):
    volume = _volume()
    for sub, kwargs in [("e", {}), ("i", {"implicit_vr": True})]:
        write_dicom_series(volume, tmp_path / sub, **kwargs)
        again = read_dicom_series(tmp_path / sub)
        assert np.array_equal(again.voxels, volume.voxels)
        assert again.spacing == volume.spacing


def test_round_trip_with_offset_intercept(tmp_path):
    volume = _volume(seed=5)
    paths = write_dicom_series(volume, tmp_path / "d", slope=1.0, intercept=-1024.0)
    parsed = _parse_file(paths[0])
    assert np.array_equal(parsed.stored.astype(np.int64),
                          volume.voxels[0].astype(np.int64) + 1024)
    again = read_dicom_series(tmp_path / "d")
    assert np.array_equal(again.voxels, volume.voxels)


def test_slices_sorted_by_z_position(tmp_path):
    volume = _volume(nz=3)
    paths = write_dicom_series(volume, tmp_path / "d")
    # shuffle file names so directory order disagrees with z order
    renames = {0: "zz.dcm", 1: "aa.dcm", 2: "mm.dcm"}
    for idx, name in renames.items():
        paths[idx].rename(tmp_path / "d" / name)
    again = read_dicom_series(tmp_path / "d")
    assert np.array_equal(again.voxels, volume.voxels)


def test_ordering_is_a_permutation(tmp_path):
    # distinct constant slices; z positions written ascending 0, 5, 10
    voxels = np.stack([np.full((4, 4), v, dtype=np.int16) for v in (10, 20, 30)])
    volume = CtVolume(voxels, spacing=(1.0, 1.0, 5.0))
    write_dicom_series(volume, tmp_path / "d")
    again, metas = read_dicom_series_with_meta(tmp_path / "d")
    assert sorted(m.z_position_mm for m in metas) == [0.0, 5.0, 10.0]
    assert {int(s[0, 0]) for s in again.voxels} == {10, 20, 30}
    assert [int(s[0, 0]) for s in again.voxels] == [10, 20, 30]


def test_non_dicom_files_skipped(tmp_path):
    volume = _volume(nz=2)
    write_dicom_series(volume, tmp_path / "d")
    (tmp_path / "d" / "notes.txt").write_text("not a dicom")
    assert np.array_equal(read_dicom_series(tmp_path / "d").voxels, volume.voxels)


def test_empty_directory_is_input_error(tmp_path):
    (tmp_path / "d").mkdir()
    with pytest.raises(InputFormatError):
        read_dicom_series(tmp_path / "d")


def test_missing_tag(tmp_path):
    volume = _volume(nz=1)
    paths = write_dicom_series(volume, tmp_path / "d")
    data = paths[0].read_bytes()
    # excise the RescaleIntercept element (explicit VR: tag + 'DS' + len16 + value)
    tag = struct.pack("<HH", *TAG_RESCALE_INTERCEPT)
    at = data.index(tag)
    (length,) = struct.unpack_from("<H", data, at + 6)
    paths[0].write_bytes(data[:at] + data[at + 8 + length:])
    with pytest.raises(MissingTag) as err:
        read_dicom_series(tmp_path / "d")
    assert "0028,1052" in str(err.value)


def test_unsupported_transfer_syntax(tmp_path):
    volume = _volume(nz=1)
    paths = write_dicom_series(volume, tmp_path / "d")
    data = paths[0].read_bytes()
    jpeg = b"1.2.840.10008.1.2.4.70"
    current = b"1.2.840.10008.1.2.1\x00"
    assert current in data
    replaced = data.replace(current, jpeg, 1)
    paths[0].write_bytes(replaced)
    with pytest.raises(UnsupportedTransferSyntax):
        read_dicom_series(tmp_path / "d")


def test_inconsistent_dims_across_slices(tmp_path):
    a = CtVolume(np.zeros((1, 4, 4), dtype=np.int16), spacing=(1, 1, 5))
    b = CtVolume(np.zeros((1, 6, 6), dtype=np.int16), spacing=(1, 1, 5))
    write_dicom_series(a, tmp_path / "d")
    (tmp_path / "d" / "slice_0000.dcm").rename(tmp_path / "d" / "first.dcm")
    write_dicom_series(b, tmp_path / "d", origin_z_mm=5.0)
    with pytest.raises(InconsistentSeries):
        read_dicom_series(tmp_path / "d")


def test_nonuniform_slice_spacing_rejected(tmp_path):
    a = CtVolume(np.zeros((1, 4, 4), dtype=np.int16), spacing=(1, 1, 5))
    write_dicom_series(a, tmp_path / "d")
    (tmp_path / "d" / "slice_0000.dcm").rename(tmp_path / "d" / "z0.dcm")
    write_dicom_series(a, tmp_path / "d", origin_z_mm=5.0)
    (tmp_path / "d" / "slice_0000.dcm").rename(tmp_path / "d" / "z5.dcm")
    write_dicom_series(a, tmp_path / "d", origin_z_mm=17.0)   # step 12 after step 5
    with pytest.raises(InconsistentSeries):
        read_dicom_series(tmp_path / "d")


def test_single_slice_uses_slice_thickness(tmp_path):
    volume = _volume(nz=1, spacing=(0.7, 0.8, 3.5))
    write_dicom_series(volume, tmp_path / "d")
    assert read_dicom_series(tmp_path / "d").spacing == (0.7, 0.8, 3.5)


def test_slice_meta_records_rescale(tmp_path):
    volume = _volume(nz=2)
    write_dicom_series(volume, tmp_path / "d", slope=1.0, intercept=-1024.0)
    _, metas = read_dicom_series_with_meta(tmp_path / "d")
    assert [m.index for m in metas] == [0, 1]
    assert all(m.rescale_slope == 1.0 and m.rescale_intercept == -1024.0 for m in metas)
