import json

import numpy as np
import pytest

from bnrobust.exceptions import FormatError
from bnrobust.network import build_cnn, build_mlp, make_blobs
from bnrobust.network.training import SgdConfig, train
from bnrobust.serialization import MAGIC, load_model, save_model
from bnrobust.tensor import SeededRng


@pytest.mark.parametrize("norm", ["l2", "l1", "topk:4", None])
def test_mlp_roundtrip(tmp_path, norm):
    model = build_mlp(2, [6, 5], 3, norm, seed=1)
    train(model, make_blobs(SeededRng(0), 60, 3, 0.4), SgdConfig(epochs=2))
    save_model(model, tmp_path / "m.json", metadata={"note": "x"})
    loaded, meta = load_model(tmp_path / "m.json")
    assert meta == {"note": "x"}
    x = np.random.default_rng(0).normal(size=(7, 2))
    assert loaded.predict_logits(x).tobytes() == model.predict_logits(x).tobytes()
    for (pa, a), (pb, b) in zip(model.parameters().items(), loaded.parameters().items()):
        assert pa == pb and a.tobytes() == b.tobytes()
    assert [str(bn.kind) for bn in loaded.norm_layers()] == [str(bn.kind) for bn in model.norm_layers()]


def test_cnn_roundtrip(tmp_path):
    model = build_cnn((1, 8, 8), channels=(2, 3), hidden=5, num_classes=4, norm="topk:3", seed=2)
    save_model(model, tmp_path / "c.json")
    loaded, _ = load_model(tmp_path / "c.json")
    x = np.random.default_rng(1).normal(size=(2, 1, 8, 8))
    np.testing.assert_array_equal(loaded.predict_logits(x), model.predict_logits(x))


def test_save_is_deterministic(tmp_path):
    for name in ("a", "b"):
        save_model(build_mlp(2, [4], 2, "l1", seed=3), tmp_path / name)
    assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()


def test_header(tmp_path):
    save_model(build_mlp(2, [4], 2, "l1"), tmp_path / "m.json")
    doc = json.loads((tmp_path / "m.json").read_text())
    assert doc["magic"] == MAGIC and doc["version"] == 1


@pytest.mark.parametrize("doc", [{"magic": "nope", "version": 1}, {"magic": MAGIC, "version": 99}])
def test_rejects_foreign_files(tmp_path, doc):
    (tmp_path / "m.json").write_text(json.dumps(doc))
    with pytest.raises(FormatError):
        load_model(tmp_path / "m.json")


def test_rejects_invalid_json(tmp_path):
    (tmp_path / "m.json").write_text("{not json")
    with pytest.raises(FormatError):
        load_model(tmp_path / "m.json")
