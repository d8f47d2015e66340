import json

import numpy as np
import pytest

from ctpoir import (
    BinaryMask3D,
    CtVolume,
    HeaderMismatch,
    ProbabilityMap3D,
    ValueOutOfRange,
    load_probmaps,
    read_internal,
    read_mask,
    write_internal,
    write_mask,
    write_probmap,
)
from ctpoir.io import read_region_scores, write_region_scores


def test_internal_round_trip_exact(tmp_path):
    voxels = np.array([[[-1000, -500], [0, 600]]], dtype=np.int16)
    volume = CtVolume(voxels, spacing=(0.7, 0.7, 5.0), case_id="rt")
    write_internal(volume, tmp_path / "v.json")
    again = read_internal(tmp_path / "v.json")
    assert again == volume
    assert (tmp_path / "v.raw").read_bytes() == voxels.astype("<i2").tobytes()
    assert len((tmp_path / "v.raw").read_bytes()) == 8


def test_internal_write_read_write_byte_identical(tmp_path):
    rng = np.random.default_rng(11)
    voxels = rng.integers(-1200, 601, size=(4, 5, 6)).astype(np.int16)
    volume = CtVolume(voxels, spacing=(0.5, 0.6, 2.0), case_id="bytes")
    write_internal(volume, tmp_path / "a.json")
    write_internal(read_internal(tmp_path / "a.json"), tmp_path / "b.json")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    assert (tmp_path / "a.raw").read_bytes() == (tmp_path / "b.raw").read_bytes()


def test_header_mismatch_on_truncated_payload(tmp_path):
    header = {"dims": [3, 3, 3], "spacing": [1, 1, 1], "case_id": "x",
              "byte_order": "LE", "dtype": "i16"}
    (tmp_path / "v.json").write_text(json.dumps(header))
    (tmp_path / "v.raw").write_bytes(b"\x00" * 10)
    with pytest.raises(HeaderMismatch):
        read_internal(tmp_path / "v.json")


def test_spacing_recorded_verbatim(tmp_path):
    volume = CtVolume(np.zeros((1, 2, 2), dtype=np.int16), spacing=(0.7, 0.7, 5.0))
    write_internal(volume, tmp_path / "v.json")
    header = json.loads((tmp_path / "v.json").read_text())
    assert header["spacing"] == [0.7, 0.7, 5.0]
    assert read_internal(tmp_path / "v.json").spacing == (0.7, 0.7, 5.0)


def test_mask_round_trip_and_value_check(tmp_path):
    bits = np.zeros((2, 3, 4), dtype=bool)
    bits[1, 2, 3] = True
    mask = BinaryMask3D(bits, spacing=(1.0, 1.0, 1.0))
    write_mask(mask, tmp_path / "m.json", case_id="c")
    assert read_mask(tmp_path / "m.json") == mask

    raw = bytearray((tmp_path / "m.raw").read_bytes())
    raw[0] = 2
    (tmp_path / "m.raw").write_bytes(bytes(raw))
    with pytest.raises(ValueOutOfRange):
        read_mask(tmp_path / "m.json")


def test_probmap_round_trip_exact(tmp_path):
    values = np.linspace(0.0, 1.0, 24, dtype=np.float32).reshape(2, 3, 4)
    pmap = ProbabilityMap3D(values, spacing=(1.0, 1.0, 1.0))
    write_probmap(pmap, tmp_path / "p.json")
    assert load_probmaps(tmp_path / "p.json") == pmap


def test_probmap_value_out_of_range(tmp_path):
    values = np.zeros((1, 2, 2), dtype=np.float32)
    pmap = ProbabilityMap3D(values, spacing=(1.0, 1.0, 1.0))
    write_probmap(pmap, tmp_path / "p.json")
    bad = np.array([1.5, 0.0, 0.0, 0.0], dtype="<f4")
    (tmp_path / "p.raw").write_bytes(bad.tobytes())
    with pytest.raises(ValueOutOfRange) as err:
        load_probmaps(tmp_path / "p.json")
    assert err.value.voxel == (0, 0, 0)


def test_probmap_rejects_nan(tmp_path):
    values = np.zeros((1, 1, 2), dtype=np.float32)
    pmap = ProbabilityMap3D(values, spacing=(1.0, 1.0, 1.0))
    write_probmap(pmap, tmp_path / "p.json")
    (tmp_path / "p.raw").write_bytes(np.array([np.nan, 0.0], dtype="<f4").tobytes())
    with pytest.raises(ValueOutOfRange):
        load_probmaps(tmp_path / "p.json")


def test_region_scores_round_trip(tmp_path):
    scores = {0: 0.3, 1: 0.9, 5: 0.45}
    write_region_scores(scores, tmp_path / "s.csv")
    assert read_region_scores(tmp_path / "s.csv") == scores


def test_volume_constructor_invariants():
    with pytest.raises(ValueError):
        CtVolume(np.zeros((2, 2, 2), dtype=np.float32), spacing=(1, 1, 1))
    with pytest.raises(ValueError):
        CtVolume(np.zeros((2, 2, 2), dtype=np.int16), spacing=(1, 0, 1))
    volume = CtVolume(np.zeros((2, 2, 2), dtype=np.int16), spacing=(1, 1, 1))
    with pytest.raises(ValueError):
        volume.voxels[0, 0, 0] = 5   # frozen payload
