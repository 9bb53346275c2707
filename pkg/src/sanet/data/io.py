"""Text formats for complexes, trajectories and imputation instances.

complex:      ``k v0 v1 ... vk`` per line, ascending vertex ids, ``#`` comments
trajectories: ``label e_idx:sign e_idx:sign ...`` per line
mdi:          header ``k n_simplices`` then ``simplex_idx value known_flag`` lines
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..complex import SimplicialComplex, build_complex
from ..errors import DimensionMismatch, EmptyInput, ParseError


@dataclass
class TrajectoryInstance:
    edge_signal: np.ndarray
    label: int
    orientation: np.ndarray | None = None


@dataclass
class MdiInstance:
    order: int
    values: np.ndarray
    known_mask: np.ndarray
    input_features: np.ndarray

    @property
    def missing_mask(self) -> np.ndarray:
        return ~self.known_mask


def _content_lines(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line and not line.startswith("#"):
            yield lineno, line


# -- complexes ------------------------------------------------------------------------

def dumps_complex(X: SimplicialComplex) -> str:
    lines = [f"{len(s) - 1} " + " ".join(map(str, s)) for s in X.top_simplices()]
    return "\n".join(lines) + "\n"


def loads_complex(text: str) -> SimplicialComplex:
    tops = []
    for lineno, line in _content_lines(text):
        try:
            nums = [int(tok) for tok in line.split()]
        except ValueError as exc:
            raise ParseError(f"non-integer token in {line!r}", lineno) from exc
        k, verts = nums[0], nums[1:]
        if k < 0 or len(verts) != k + 1:
            raise ParseError(f"order {k} needs {k + 1} vertices, got {len(verts)}", lineno)
        if any(v < 0 for v in verts):
            raise ParseError("negative vertex id", lineno)
        if any(a >= b for a, b in zip(verts, verts[1:])):
            raise ParseError("vertices must be strictly ascending", lineno)
        tops.append(verts)
    if not tops:
        raise EmptyInput("complex file lists no simplices")
    return build_complex(tops)


def save_complex(path, X: SimplicialComplex) -> None:
    Path(path).write_text(dumps_complex(X), encoding="utf-8")


def load_complex(path) -> SimplicialComplex:
    return loads_complex(Path(path).read_text(encoding="utf-8"))


# -- trajectories ----------------------------------------------------------------------

def dumps_trajectories(instances) -> str:
    lines = []
    for inst in instances:
        idx = np.flatnonzero(inst.edge_signal)
        toks = [f"{i}:{'+' if inst.edge_signal[i] > 0 else '-'}1" for i in idx]
        lines.append(" ".join([str(int(inst.label)), *toks]))
    return "\n".join(lines) + "\n"


def loads_trajectories(text: str, n_edges: int) -> list[TrajectoryInstance]:
    out = []
    for lineno, line in _content_lines(text):
        toks = line.split()
        try:
            label = int(toks[0])
        except ValueError as exc:
            raise ParseError(f"bad label {toks[0]!r}", lineno) from exc
        x = np.zeros(n_edges)
        for tok in toks[1:]:
            try:
                idx_s, sign_s = tok.split(":")
                idx, sign = int(idx_s), int(sign_s)
            except ValueError as exc:
                raise ParseError(f"bad entry {tok!r}", lineno) from exc
            if sign not in (-1, 1):
                raise ParseError(f"sign must be +1 or -1 in {tok!r}", lineno)
            if not 0 <= idx < n_edges:
                raise DimensionMismatch(f"line {lineno}: edge {idx} outside complex with {n_edges} edges")
            x[idx] = sign
        out.append(TrajectoryInstance(x, label))
    return out


def save_trajectories(path, instances) -> None:
    Path(path).write_text(dumps_trajectories(instances), encoding="utf-8")


def load_trajectories(path, X: SimplicialComplex) -> list[TrajectoryInstance]:
    return loads_trajectories(Path(path).read_text(encoding="utf-8"), X.n(1))


# -- imputation instances -------------------------------------------------------------

def dumps_mdi(inst: MdiInstance) -> str:
    lines = [f"{inst.order} {len(inst.values)}"]
    for i, (v, k) in enumerate(zip(inst.values, inst.known_mask)):
        lines.append(f"{i} {float(v)!r} {int(k)}")
    return "\n".join(lines) + "\n"


def loads_mdi(text: str, X: SimplicialComplex | None = None) -> MdiInstance:
    from .mdi import make_instance

    lines = list(_content_lines(text))
    if not lines:
        raise EmptyInput("empty imputation file")
    lineno, header = lines[0]
    try:
        k, n = (int(t) for t in header.split())
    except ValueError as exc:
        raise ParseError(f"bad header {header!r}", lineno) from exc
    if X is not None and X.n(k) != n:
        raise DimensionMismatch(f"file declares {n} simplices of order {k}, complex has {X.n(k)}")
    values = np.full(n, np.nan)
    known = np.zeros(n, dtype=bool)
    seen = np.zeros(n, dtype=bool)
    for lineno, line in lines[1:]:
        toks = line.split()
        try:
            idx, val, flag = int(toks[0]), float(toks[1]), int(toks[2])
        except (ValueError, IndexError) as exc:
            raise ParseError(f"bad row {line!r}", lineno) from exc
        if not 0 <= idx < n:
            raise DimensionMismatch(f"line {lineno}: index {idx} outside [0, {n})")
        values[idx], known[idx], seen[idx] = val, bool(flag), True
    if not seen.all():
        raise DimensionMismatch(f"{int((~seen).sum())} simplices have no row")
    return make_instance(k, values, known)


def save_mdi(path, inst: MdiInstance) -> None:
    Path(path).write_text(dumps_mdi(inst), encoding="utf-8")


def load_mdi(path, X: SimplicialComplex | None = None) -> MdiInstance:
    return loads_mdi(Path(path).read_text(encoding="utf-8"), X)


# -- signals (one real value per simplex) ----------------------------------------------

def save_signals(path, values) -> None:
    Path(path).write_text("\n".join(repr(float(v)) for v in values) + "\n", encoding="utf-8")


def load_signals(path, X: SimplicialComplex | None = None, k: int = 1) -> np.ndarray:
    vals = []
    for lineno, line in _content_lines(Path(path).read_text(encoding="utf-8")):
        try:
            vals.append(float(line))
        except ValueError as exc:
            raise ParseError(f"bad value {line!r}", lineno) from exc
    if not vals:
        raise EmptyInput("signal file has no values")
    if X is not None and len(vals) != X.n(k):
        raise DimensionMismatch(f"{len(vals)} values for {X.n(k)} simplices of order {k}")
    return np.asarray(vals)


def write_manifest(path, params: dict) -> None:
    Path(path).write_text(json.dumps(params, indent=2, sort_keys=True) + "\n", encoding="utf-8")
