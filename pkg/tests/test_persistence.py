import json

import numpy as np
import pytest

from ordinal_atd.network import forward, init_network
from ordinal_atd.persistence import (
    CorruptModelError,
    ModelArtifact,
    UnsupportedVersionError,
    dumps_model,
    load_model,
    loads_model,
    save_model,
)


def artifact(seed=0, final="identity"):
    params = init_network(6, np.random.default_rng(seed), hidden=(16, 8), embedding_dim=10,
                          final_activation=final)
    return ModelArtifact(params, n_categories=4, seed=seed, config={"train": {"epochs": 3}},
                         provenance="unit-test", class_names=["a", "b", "c", "d"])


@pytest.mark.parametrize("final", ["identity", "relu"])
def test_round_trip_bitwise(tmp_path, final):
    a = artifact(3, final)
    save_model(a, tmp_path / "m.json")
    b = load_model(tmp_path / "m.json")
    assert all(np.array_equal(x, y) for x, y in zip(a.params.arrays(), b.params.arrays()))
    assert [l.activation for l in b.params.layers] == [l.activation for l in a.params.layers]
    assert (b.n_categories, b.seed, b.config, b.provenance) == (4, 3, a.config, "unit-test")


def test_embeddings_identical_after_round_trip(rng):
    a = artifact(5)
    b = loads_model(dumps_model(a))
    x = rng.random((20, 6))
    assert np.array_equal(forward(a.params, x)[0], forward(b.params, x)[0])


def test_truncated_file(tmp_path):
    text = dumps_model(artifact())
    (tmp_path / "m.json").write_text(text[: len(text) // 3])
    with pytest.raises(CorruptModelError):
        load_model(tmp_path / "m.json")


def test_flipped_digit_fails_checksum():
    doc = json.loads(dumps_model(artifact()))
    doc["payload"]["parameters"][0][0] += 1e-9
    with pytest.raises(CorruptModelError, match="checksum"):
        loads_model(json.dumps(doc))


def test_unknown_version():
    doc = json.loads(dumps_model(artifact()))
    doc["version"] = 99
    with pytest.raises(UnsupportedVersionError):
        loads_model(json.dumps(doc))


def test_shape_mismatch_detected():
    import hashlib

    doc = json.loads(dumps_model(artifact()))
    doc["payload"]["parameters"][0] = doc["payload"]["parameters"][0][:-1]
    canon = json.dumps(doc["payload"], sort_keys=True, separators=(",", ":")).encode()
    doc["checksum"] = hashlib.sha256(canon).hexdigest()
    with pytest.raises(CorruptModelError, match="layer 0"):
        loads_model(json.dumps(doc))


def test_not_a_model():
    with pytest.raises(CorruptModelError):
        loads_model('{"hello": 1}')


def test_non_finite_refused():
    a = artifact()
    a.params.layers[0].weight[0, 0] = np.nan
    with pytest.raises(ValueError):
        dumps_model(a)


def test_serialization_is_stable():
    assert dumps_model(artifact(2)) == dumps_model(artifact(2))
