"""JSON checkpoints: model spec, parameters in canonical order, complex fingerprint."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import FingerprintMismatch, ParseError
from .model import SanModel

FORMAT = "sanet-checkpoint"
VERSION = 1


def checkpoint_dict(model: SanModel, fingerprint: str, meta: dict | None = None) -> dict:
    return {
        "format": FORMAT,
        "version": VERSION,
        "complex_fingerprint": fingerprint,
        "model": model.spec(),
        "meta": meta or {},
        "parameters": [
            {"name": p.name, "shape": list(p.shape), "values": p.value.reshape(-1).tolist()}
            for p in model.parameters()
        ],
    }


def save_checkpoint(path, model: SanModel, fingerprint: str, meta: dict | None = None) -> None:
    Path(path).write_text(json.dumps(checkpoint_dict(model, fingerprint, meta), indent=1) + "\n")


def load_checkpoint(path, expected_fingerprint: str | None = None) -> tuple[SanModel, dict]:
    blob = json.loads(Path(path).read_text())
    if blob.get("format") != FORMAT:
        raise ParseError(f"{path} is not a checkpoint")
    if blob.get("version") != VERSION:
        raise ParseError(f"unsupported checkpoint version {blob.get('version')}")
    if expected_fingerprint is not None and blob["complex_fingerprint"] != expected_fingerprint:
        raise FingerprintMismatch(
            f"checkpoint trained on complex {blob['complex_fingerprint'][:12]}..., "
            f"dataset complex is {expected_fingerprint[:12]}..."
        )
    model = SanModel.from_spec(blob["model"])
    params = model.parameters()
    stored = blob["parameters"]
    if len(stored) != len(params):
        raise ParseError("parameter count does not match the model spec")
    for p, s in zip(params, stored):
        if list(p.shape) != s["shape"]:
            raise ParseError(f"shape mismatch for {s['name']}")
        p.value = np.asarray(s["values"], dtype=np.float64).reshape(p.shape)
    return model, blob
