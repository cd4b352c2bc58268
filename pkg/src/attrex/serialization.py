"""Versioned text (JSON) persistence for every trained model kind.

The container is self-describing: format version, model kind, attribute,
label alphabet, and the kind-specific parameters. Loading a file written by
a different format version fails loudly, naming both versions.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .baselines import DictModel, KnnModel, Lexicon, TfIdfIndex
from .corpus import LabelAlphabet
from .decode import LinearModel
from .features import TEMPLATES, FeatureIndex, FeatureSet
from .hmm import HmmModel

FORMAT_VERSION = 1

Model = LinearModel | HmmModel | DictModel | KnnModel


def _linear_payload(model: LinearModel) -> dict:
    unknown = [name for name in model.feature_set.names if name not in TEMPLATES]
    if unknown:
        raise ValueError(f"cannot serialize custom feature templates: {unknown}")
    return {
        "kind": model.kind,
        "attribute": model.alphabet.attribute_name,
        "labels": list(model.alphabet.labels),
        "templates": list(model.feature_set.names),
        "feature_names": list(model.index.names),
        "weights": model.weights.tolist(),
    }


def _hmm_payload(model: HmmModel) -> dict:
    return {
        "kind": "hmm",
        "attribute": model.alphabet.attribute_name,
        "labels": list(model.alphabet.labels),
        "smoothing_k": model.smoothing_k,
        "min_count": model.min_count,
        "vocabulary": sorted(model.vocabulary),
        "transition": [
            {"context": list(context), "probs": dict(sorted(row.items()))}
            for context, row in sorted(model.transition.items())
        ],
        "emission": {
            label: dict(sorted(row.items()))
            for label, row in sorted(model.emission.items())
        },
    }


def _dict_payload(model: DictModel) -> dict:
    return {
        "kind": "dict",
        "attribute": model.attribute,
        "strategy": model.strategy,
        "lexicon": sorted(list(entry) for entry in model.lexicon.entries),
    }


def _knn_payload(model: KnnModel) -> dict:
    return {
        "kind": "knn",
        "attribute": model.attribute,
        "k": model.k,
        "n_docs": model.index.n_docs,
        "doc_freq": dict(sorted(model.index.doc_freq.items())),
        "docs": [
            {"vector": dict(sorted(vec.items())), "label": label}
            for vec, label in zip(model.index.vectors, model.index.labels)
        ],
    }


def save_model(model: Model, path: str | Path) -> None:
    if isinstance(model, LinearModel):
        payload = _linear_payload(model)
    elif isinstance(model, HmmModel):
        payload = _hmm_payload(model)
    elif isinstance(model, DictModel):
        payload = _dict_payload(model)
    elif isinstance(model, KnnModel):
        payload = _knn_payload(model)
    else:
        raise TypeError(f"cannot serialize model type {type(model).__name__}")
    payload["format_version"] = FORMAT_VERSION
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, sort_keys=True, ensure_ascii=False, indent=1)
        handle.write("\n")


def load_model(path: str | Path) -> Model:
    try:
        with open(path, encoding="utf-8") as handle:
            payload = json.load(handle)
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: corrupted model file: {exc}") from exc
    if not isinstance(payload, dict):
        raise ValueError(f"{path}: corrupted model file: not a JSON object")
    version = payload.get("format_version")
    if version != FORMAT_VERSION:
        raise ValueError(
            f"{path}: model format version {version!r} is not supported; "
            f"this toolkit reads version {FORMAT_VERSION}"
        )
    kind = payload.get("kind")
    try:
        if kind in ("perceptron", "crf"):
            return _load_linear(payload)
        if kind == "hmm":
            return _load_hmm(payload)
        if kind == "dict":
            return _load_dict(payload)
        if kind == "knn":
            return _load_knn(payload)
    except KeyError as exc:
        raise ValueError(f"{path}: corrupted model file: missing field {exc}") from exc
    raise ValueError(f"{path}: unknown model kind {kind!r}")


def _load_linear(payload: dict) -> LinearModel:
    alphabet = LabelAlphabet(payload["attribute"], tuple(payload["labels"]))
    return LinearModel(
        weights=np.asarray(payload["weights"], dtype=np.float64),
        index=FeatureIndex(payload["feature_names"]),
        alphabet=alphabet,
        feature_set=FeatureSet.standard(payload["templates"]),
        kind=payload["kind"],
    )


def _load_hmm(payload: dict) -> HmmModel:
    alphabet = LabelAlphabet(payload["attribute"], tuple(payload["labels"]))
    transition = {
        (row["context"][0], row["context"][1]): dict(row["probs"])
        for row in payload["transition"]
    }
    return HmmModel(
        alphabet=alphabet,
        smoothing_k=payload["smoothing_k"],
        min_count=payload["min_count"],
        vocabulary=frozenset(payload["vocabulary"]),
        transition=transition,
        emission={label: dict(row) for label, row in payload["emission"].items()},
    )


def _load_dict(payload: dict) -> DictModel:
    lexicon = Lexicon(frozenset(tuple(entry) for entry in payload["lexicon"]))
    return DictModel(lexicon, payload["strategy"], payload["attribute"])


def _load_knn(payload: dict) -> KnnModel:
    index = TfIdfIndex(
        doc_freq=dict(payload["doc_freq"]),
        n_docs=payload["n_docs"],
        vectors=tuple(dict(doc["vector"]) for doc in payload["docs"]),
        labels=tuple(doc["label"] for doc in payload["docs"]),
    )
    return KnnModel(index, payload["k"], payload["attribute"])
