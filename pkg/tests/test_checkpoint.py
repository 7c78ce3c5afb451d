import numpy as np
import pytest

from spadesynth.checkpoint import load_arrays, save_arrays
from spadesynth.errors import ParseError


def _sample_arrays():
    rng = np.random.default_rng(5)
    return {
        "gen.w": rng.normal(size=(4, 3, 3, 3)).astype(np.float32),
        "gen.b": rng.normal(size=4),
        "opt.t": np.array([17], dtype=np.uint64),
        "counter": np.array([-3, 9], dtype=np.int64),
        "scalar": np.float64(2.5) * np.ones(()),
    }


def test_round_trip_bit_exact(tmp_path):
    path = str(tmp_path / "run.ckpt")
    arrays = _sample_arrays()
    save_arrays(path, "train.epochs = 2\n", arrays)
    text, back = load_arrays(path)
    assert text == "train.epochs = 2\n"
    assert set(back) == set(arrays)
    for k in arrays:
        assert back[k].dtype == np.asarray(arrays[k]).dtype
        assert back[k].shape == np.asarray(arrays[k]).shape
        assert back[k].tobytes() == np.asarray(arrays[k]).tobytes()


def test_save_is_deterministic(tmp_path):
    pa, pb = str(tmp_path / "a.ckpt"), str(tmp_path / "b.ckpt")
    arrays = _sample_arrays()
    save_arrays(pa, "cfg", arrays)
    save_arrays(pb, "cfg", arrays)
    assert open(pa, "rb").read() == open(pb, "rb").read()


def test_unsupported_dtype_coerced_or_rejected(tmp_path):
    path = str(tmp_path / "odd.ckpt")
    save_arrays(path, "", {"half": np.ones(3, dtype=np.float16)})
    _, back = load_arrays(path)
    assert back["half"].dtype == np.float32  # widened, values preserved
    assert np.array_equal(back["half"], np.ones(3, np.float32))
    with pytest.raises(ParseError, match="dtype"):
        save_arrays(path, "", {"c": np.ones(2, dtype=np.complex128)})


def test_bad_magic(tmp_path):
    path = tmp_path / "x.ckpt"
    path.write_bytes(b"JUNK" + bytes(32))
    with pytest.raises(ParseError, match="magic"):
        load_arrays(str(path))


def test_unsupported_version(tmp_path):
    path = tmp_path / "x.ckpt"
    path.write_bytes(b"SPDE" + (99).to_bytes(4, "little") + bytes(8))
    with pytest.raises(ParseError, match="version 99"):
        load_arrays(str(path))


def test_truncation_reports_offset(tmp_path):
    path = str(tmp_path / "full.ckpt")
    save_arrays(path, "cfg text", _sample_arrays())
    blob = open(path, "rb").read()
    cut = len(blob) - 5
    short = tmp_path / "cut.ckpt"
    short.write_bytes(blob[:cut])
    with pytest.raises(ParseError, match="truncated at byte"):
        load_arrays(str(short))


def test_trailing_bytes_rejected(tmp_path):
    path = str(tmp_path / "full.ckpt")
    save_arrays(path, "", {"a": np.zeros(2, np.float32)})
    blob = open(path, "rb").read()
    padded = tmp_path / "padded.ckpt"
    padded.write_bytes(blob + b"\x00\x00")
    with pytest.raises(ParseError, match="trailing"):
        load_arrays(str(padded))


def test_empty_array_dict(tmp_path):
    path = str(tmp_path / "empty.ckpt")
    save_arrays(path, "only config", {})
    text, arrays = load_arrays(path)
    assert text == "only config" and arrays == {}
