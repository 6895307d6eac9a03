import json

import numpy as np
import pytest

from stochws.exceptions import DataError
from stochws.raster import (
    MultispectralImage,
    downsample_average,
    export_artifact,
    import_artifact,
    load_multispectral,
    read_pfm,
    read_pgm,
    rgb_composite,
    save_multispectral,
    write_pgm,
)


def _manifest(tmp_path, planes, width=None, height=None):
    chans = []
    for k, p in enumerate(planes):
        path = tmp_path / f"c{k}.pgm"
        write_pgm(path, p)
        chans.append({"name": f"c{k}", "path": path.name})
    h, w = planes[0].shape if planes else (0, 0)
    doc = {"width": width or w, "height": height or h, "channels": chans}
    (tmp_path / "m.json").write_text(json.dumps(doc))
    return tmp_path / "m.json"


def test_load_in_manifest_order(tmp_path):
    rng = np.random.default_rng(0)
    planes = [rng.integers(0, 1000, (7, 5)) for _ in range(3)]
    img = load_multispectral(_manifest(tmp_path, planes))
    assert img.n_channels == 3 and img.shape == (7, 5) and img.n_pixels == 35
    for k in range(3):
        np.testing.assert_array_equal(img.data[k], planes[k])
    assert img.channel_names == ("c0", "c1", "c2")


def test_empty_manifest(tmp_path):
    (tmp_path / "m.json").write_text(json.dumps({"width": 1, "height": 1, "channels": []}))
    with pytest.raises(DataError, match="empty manifest"):
        load_multispectral(tmp_path / "m.json")


def test_dimension_mismatch(tmp_path):
    with pytest.raises(DataError, match="dimension mismatch"):
        load_multispectral(_manifest(tmp_path, [np.zeros((10, 10), int), np.zeros((10, 9), int)]))


def test_missing_channel_file(tmp_path):
    doc = {"width": 2, "height": 2, "channels": [{"name": "a", "path": "nope.pgm"}]}
    (tmp_path / "m.json").write_text(json.dumps(doc))
    with pytest.raises(DataError):
        load_multispectral(tmp_path / "m.json")


def test_negative_samples_rejected():
    with pytest.raises(DataError):
        MultispectralImage(np.array([[[-1.0]]]))


def test_downsample_examples():
    img = MultispectralImage(np.full((1, 4, 4), 8.0))
    assert downsample_average(img, 4).data.tolist() == [[[8.0]]]
    img = MultispectralImage(np.array([[[0.0, 2.0], [4.0, 6.0]]]))
    assert downsample_average(img, 2).data.tolist() == [[[3.0]]]


def test_downsample_shape_and_mean():
    rng = np.random.default_rng(1)
    img = MultispectralImage(rng.random((2, 12, 8)))
    out = downsample_average(img, 4)
    assert out.shape == (3, 2)
    np.testing.assert_allclose(out.data.mean(axis=(1, 2)), img.data.mean(axis=(1, 2)), rtol=1e-12)
    with pytest.raises(DataError):
        downsample_average(img, 5)


def test_pgm_16bit_is_big_endian(tmp_path):
    write_pgm(tmp_path / "a.pgm", np.array([[258]]))
    raw = (tmp_path / "a.pgm").read_bytes()
    assert raw.endswith(b"\x01\x02")
    assert read_pgm(tmp_path / "a.pgm").tolist() == [[258]]


def test_pfm_layout(tmp_path):
    a = np.arange(6, dtype=np.float32).reshape(2, 3)
    export_artifact(a, tmp_path / "a.pfm")
    raw = (tmp_path / "a.pfm").read_bytes()
    assert raw.startswith(b"Pf\n3 2\n-1.0\n")
    # bottom row is stored first
    assert np.frombuffer(raw[-24:-12], "<f4").tolist() == [3.0, 4.0, 5.0]
    np.testing.assert_array_equal(read_pfm(tmp_path / "a.pfm"), a)


def test_label_map_roundtrip_with_legend(tmp_path):
    labels = np.arange(142).reshape(2, 71)
    export_artifact(labels, tmp_path / "l.pgm", legend={"n": 141})
    back = import_artifact(tmp_path / "l.pgm")
    np.testing.assert_array_equal(back, labels)
    assert json.loads((tmp_path / "l.pgm.json").read_text()) == {"n": 141}
    assert read_pgm(tmp_path / "l.pgm").dtype == np.uint16


def test_pdf_roundtrip_exact_and_quantized(tmp_path):
    rng = np.random.default_rng(2)
    pdf = rng.random((9, 11)).astype(np.float32)
    export_artifact(pdf, tmp_path / "p.pfm")
    np.testing.assert_array_equal(import_artifact(tmp_path / "p.pfm"), pdf)
    export_artifact(pdf, tmp_path / "p.pgm", format="pgm8", quantize=True)
    err = np.abs(import_artifact(tmp_path / "p.pgm", kind="quantized") - pdf)
    assert err.max() <= 1 / 255


def test_export_errors(tmp_path):
    with pytest.raises(DataError):
        export_artifact(np.array([[0.5]]), tmp_path / "x.pgm", format="pgm8")
    with pytest.raises(DataError):
        export_artifact(np.array([[300]]), tmp_path / "x.pgm", format="pgm8")
    with pytest.raises(DataError):
        export_artifact(np.zeros((2, 2)), tmp_path / "missing" / "x.pfm")


def test_mask_roundtrip(tmp_path):
    m = np.eye(4, dtype=bool)
    export_artifact(m, tmp_path / "m.pgm")
    np.testing.assert_array_equal(import_artifact(tmp_path / "m.pgm", kind="mask"), m)


def test_save_load_identity(tmp_path):
    rng = np.random.default_rng(3)
    img = MultispectralImage(rng.integers(0, 4000, (3, 6, 4)).astype(float), ("a", "b", "c"))
    back = load_multispectral(save_multispectral(img, tmp_path))
    np.testing.assert_array_equal(back.data, img.data)
    assert back.channel_names == img.channel_names
    img = MultispectralImage(rng.random((2, 3, 3)))
    back = load_multispectral(save_multispectral(img, tmp_path / "f"))
    np.testing.assert_allclose(back.data, img.data, rtol=1e-7)


def test_rgb_composite_stretch():
    data = np.stack([np.full((2, 2), 5.0), np.array([[0.0, 1.0], [2.0, 4.0]]), np.zeros((2, 2))])
    rgb = rgb_composite(MultispectralImage(data), channels=(1, 0, 2))
    assert rgb.dtype == np.uint8 and rgb.shape == (2, 2, 3)
    assert rgb[..., 0].tolist() == [[0, 64], [128, 255]]
    assert rgb[..., 1].max() == 0


def test_unreadable_inputs_raise_data_error(tmp_path):
    with pytest.raises(DataError, match="cannot read"):
        read_pgm(tmp_path / "absent.pgm")
    with pytest.raises(DataError, match="cannot read"):
        read_pfm(tmp_path / "absent.pfm")
    bad = tmp_path / "bad.pgm"
    bad.write_bytes(b"P5\nx 2\n255\n")
    with pytest.raises(DataError, match="malformed"):
        read_pgm(bad)
    m = tmp_path / "m.json"
    m.write_text(json.dumps({"channels": ["a.pgm"]}))
    with pytest.raises(DataError, match="'path'"):
        load_multispectral(m)
    m.write_text("[1, 2]")
    with pytest.raises(DataError, match="JSON object"):
        load_multispectral(m)
