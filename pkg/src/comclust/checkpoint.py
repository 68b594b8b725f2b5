"""Checkpoint serialization: a versioned JSON document holding the encoder
configuration, parameter arrays (row-major), prototypes, and the training
seed/config echo. JSON float repr round-trips exactly, so a load(save(x))
cycle reproduces inference outputs bit-for-bit."""

from __future__ import annotations

import json

import numpy as np

from .dataio import _jsonable
from .encoder import EncoderConfig, ParamStore
from .errors import ParseError
from .prototypes import Prototypes
from .training import ClassifierModel

FORMAT_VERSION = 1

KIND_CLUSTERING = "clustering"
KIND_CLASSIFIER = "classifier"


def _encoder_dict(config: EncoderConfig) -> dict:
    return {"input_dim": config.input_dim,
            "hidden": list(config.hidden),
            "embedding_dim": config.embedding_dim,
            "dropout_rate": config.dropout_rate}


def _encoder_from(d: dict) -> EncoderConfig:
    return EncoderConfig(d["input_dim"], tuple(d["hidden"]),
                         d["embedding_dim"], d["dropout_rate"])


def save_checkpoint(path, kind: str, params: ParamStore,
                    encoder_config: EncoderConfig,
                    prototypes: Prototypes | None,
                    seed: int, config_echo: dict) -> None:
    doc = {
        "version": FORMAT_VERSION,
        "kind": kind,
        "encoder": _encoder_dict(encoder_config),
        "params": [{"shape": list(a.shape), "data": a.ravel().tolist()}
                   for a in params.arrays],
        "seed": seed,
        "config": config_echo,
    }
    if prototypes is not None:
        doc["prototypes"] = {
            "cl_min": prototypes.cl_min.tolist(),
            "cl_maj": prototypes.cl_maj.tolist(),
            "separation": prototypes.separation,
            "feature_mask": prototypes.feature_mask.astype(int).tolist(),
        }
    with open(path, "w") as fh:
        json.dump(_jsonable(doc), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_checkpoint(path) -> dict:
    """Returns {kind, encoder_config, params, prototypes?, seed, config}."""
    with open(path) as fh:
        doc = json.load(fh)
    if "version" not in doc:
        raise ParseError(f"{path}: missing version field")
    if doc["version"] != FORMAT_VERSION:
        raise ParseError(f"{path}: unsupported version {doc['version']}")
    arrays = []
    for entry in doc["params"]:
        arr = np.array(entry["data"], dtype=np.float64).reshape(entry["shape"])
        arrays.append(arr)
    out = {
        "kind": doc["kind"],
        "encoder_config": _encoder_from(doc["encoder"]),
        "params": ParamStore(arrays),
        "seed": doc["seed"],
        "config": doc.get("config", {}),
        "prototypes": None,
    }
    if "prototypes" in doc:
        p = doc["prototypes"]
        out["prototypes"] = Prototypes(
            np.array(p["cl_min"], dtype=np.float64),
            np.array(p["cl_maj"], dtype=np.float64),
            float(p["separation"]),
            np.array(p["feature_mask"], dtype=bool))
    return out


def classifier_from_checkpoint(doc: dict) -> ClassifierModel:
    return ClassifierModel(doc["params"], doc["encoder_config"])
