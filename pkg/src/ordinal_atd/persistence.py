"""Model files: a versioned JSON container with shape metadata and a SHA-256 checksum.

Layout::

    {
      "format": "ordinal-atd-model",
      "version": 1,
      "checksum": "<sha256 of the canonical payload>",
      "payload": {
        "architecture": {"normalize": true,
                         "layers": [{"in": 6, "out": 64, "activation": "relu"}, ...]},
        "parameters": [[W0 row-major...], [b0...], ...],
        "n_categories": 4, "feature_dim": 6, "seed": 0,
        "config": {...}, "provenance": "...", "class_names": [...]
      }
    }

Floats are written with ``repr`` precision by the json module, so a save/load
round-trip reproduces every parameter bit for bit.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .network import Layer, NetworkParameters

FORMAT_NAME = "ordinal-atd-model"
FORMAT_VERSION = 1
SUPPORTED_VERSIONS = (1,)


class UnsupportedVersionError(ValueError):
    def __init__(self, version):
        super().__init__(f"unsupported model format version {version!r}")
        self.version = version


class CorruptModelError(ValueError):
    pass


@dataclass
class ModelArtifact:
    params: NetworkParameters
    n_categories: int
    seed: int = 0
    config: dict[str, Any] = field(default_factory=dict)
    provenance: str = ""
    class_names: list[str] = field(default_factory=list)
    feature_names: list[str] = field(default_factory=list)
    version: int = FORMAT_VERSION

    @property
    def feature_dim(self) -> int:
        return self.params.input_dim


def _canonical(payload: dict) -> bytes:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), allow_nan=False).encode()


def _payload(artifact: ModelArtifact) -> dict:
    p = artifact.params
    return {
        "architecture": {
            "normalize": p.normalize,
            "layers": [
                {"in": layer.shape[1], "out": layer.shape[0], "activation": layer.activation}
                for layer in p.layers
            ],
        },
        "parameters": [a.ravel().tolist() for a in p.arrays()],
        "n_categories": artifact.n_categories,
        "feature_dim": artifact.feature_dim,
        "seed": artifact.seed,
        "config": artifact.config,
        "provenance": artifact.provenance,
        "class_names": list(artifact.class_names),
        "feature_names": list(artifact.feature_names),
    }


def dumps_model(artifact: ModelArtifact) -> str:
    if not artifact.params.all_finite():
        raise ValueError("refusing to save non-finite parameters")
    payload = _payload(artifact)
    doc = {
        "format": FORMAT_NAME,
        "version": artifact.version,
        "checksum": hashlib.sha256(_canonical(payload)).hexdigest(),
        "payload": payload,
    }
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def save_model(artifact: ModelArtifact, path) -> None:
    """Write atomically: a partial write never replaces an existing model."""
    text = dumps_model(artifact)
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _rebuild(payload: dict) -> NetworkParameters:
    arch = payload["architecture"]
    arrays = payload["parameters"]
    specs = arch["layers"]
    if len(arrays) != 2 * len(specs):
        raise CorruptModelError("parameter array count does not match the layer list")
    layers = []
    for k, spec in enumerate(specs):
        n_in, n_out = int(spec["in"]), int(spec["out"])
        w = np.asarray(arrays[2 * k], dtype=np.float64)
        b = np.asarray(arrays[2 * k + 1], dtype=np.float64)
        if w.size != n_in * n_out or b.size != n_out:
            raise CorruptModelError(f"layer {k}: parameter sizes do not match shape ({n_out}, {n_in})")
        layers.append(Layer(w.reshape(n_out, n_in), b, spec["activation"]))
    return NetworkParameters(layers, bool(arch["normalize"]))


def loads_model(text: str) -> ModelArtifact:
    """Parse and verify a model document.

    Raises:
        CorruptModelError: malformed JSON, missing fields, checksum mismatch
            or inconsistent shapes.
        UnsupportedVersionError: the format version is not recognized.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise CorruptModelError(f"not a readable model file ({err.msg})") from err
    if not isinstance(doc, dict) or doc.get("format") != FORMAT_NAME:
        raise CorruptModelError("missing or wrong format marker")
    if doc.get("version") not in SUPPORTED_VERSIONS:
        raise UnsupportedVersionError(doc.get("version"))
    payload = doc.get("payload")
    if not isinstance(payload, dict):
        raise CorruptModelError("missing payload")
    if hashlib.sha256(_canonical(payload)).hexdigest() != doc.get("checksum"):
        raise CorruptModelError("checksum mismatch")
    try:
        params = _rebuild(payload)
        if params.input_dim != payload["feature_dim"]:
            raise CorruptModelError("feature_dim disagrees with the first layer")
        return ModelArtifact(
            params=params,
            n_categories=int(payload["n_categories"]),
            seed=int(payload["seed"]),
            config=dict(payload["config"]),
            provenance=str(payload["provenance"]),
            class_names=list(payload["class_names"]),
            feature_names=list(payload["feature_names"]),
            version=int(doc["version"]),
        )
    except (KeyError, TypeError, ValueError) as err:
        if isinstance(err, CorruptModelError):
            raise
        raise CorruptModelError(f"malformed payload: {err}") from err


def load_model(path) -> ModelArtifact:
    with open(path) as fh:
        return loads_model(fh.read())
