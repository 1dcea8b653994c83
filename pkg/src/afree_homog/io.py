"""File formats: operator specs, binary fields, microstructures, configs, CSV and manifests."""
from __future__ import annotations

import csv
import hashlib
import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from . import catalog
from .fields import Microstructure, PeriodicField
from .integrands import Integrand, SoftFamily
from .operators import DifferentialOperator

FIELD_MAGIC = b"AFIELD "
OUTPUT_DIR_ENV = "AFREE_OUTPUT_DIR"


# ---------------------------------------------------------------- operators

def operator_to_dict(op: DifferentialOperator) -> dict:
    return {"dim": op.dim, "order": op.order, "in_dim": op.in_dim, "out_dim": op.out_dim,
            "name": op.name, "rank": op.declared_rank,
            "terms": [{"multi_index": list(k), "matrix": m.tolist()} for k, m in op.coeffs.items()]}


def operator_from_dict(d: dict) -> DifferentialOperator:
    if "catalog" in d:
        return catalog.get(d["catalog"])
    try:
        coeffs = {}
        for term in d["terms"]:
            key = tuple(int(i) for i in term["multi_index"])
            mat = np.asarray(term["matrix"], float).reshape(int(d["out_dim"]), int(d["in_dim"]))
            coeffs[key] = coeffs.get(key, 0) + mat
        return DifferentialOperator(int(d["dim"]), int(d["order"]), int(d["in_dim"]), int(d["out_dim"]),
                                    coeffs, d.get("rank"), d.get("name"))
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed operator spec: {exc}") from exc


def load_operator(ref: str | dict) -> DifferentialOperator:
    """A catalog name, a JSON file path, or an already parsed dict."""
    if isinstance(ref, dict):
        return operator_from_dict(ref)
    path = Path(ref)
    if path.suffix == ".json" or path.exists():
        with open(path, encoding="utf-8") as fh:
            try:
                return operator_from_dict(json.load(fh))
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}: not valid JSON ({exc})") from exc
    return catalog.get(ref)


# ------------------------------------------------------------------- fields

def write_field(path, u: PeriodicField) -> None:
    header = {"d": u.dim, "n": u.n, "N": u.n_comp, "dtype": "<f8", "layout": "row-major"}
    with open(path, "wb") as fh:
        fh.write(FIELD_MAGIC + json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(np.ascontiguousarray(u.values, dtype="<f8").tobytes())


def read_field(path) -> PeriodicField:
    with open(path, "rb") as fh:
        line = fh.readline()
        if not line.startswith(FIELD_MAGIC):
            raise ValueError(f"{path}: missing field header")
        try:
            header = json.loads(line[len(FIELD_MAGIC):])
            d, n, N = int(header["d"]), int(header["n"]), int(header["N"])
        except (ValueError, KeyError) as exc:
            raise ValueError(f"{path}: malformed field header") from exc
        if header.get("dtype", "<f8") != "<f8" or header.get("layout", "row-major") != "row-major":
            raise ValueError(f"{path}: unsupported dtype or layout")
        data = np.frombuffer(fh.read(), dtype="<f8")
    shape = (n,) * d + (N,)
    if data.size != int(np.prod(shape)):
        raise ValueError(f"{path}: payload has {data.size} values, header promises {int(np.prod(shape))}")
    return PeriodicField(data.reshape(shape).astype(float))


# ----------------------------------------------------------- microstructure

def microstructure_from_dict(d: dict) -> Microstructure:
    kind = d.get("kind", "box")
    n, dim, margin = int(d["n"]), int(d["dim"]), int(d.get("margin", 1))
    if kind == "box":
        return Microstructure.box(n, dim, float(d["half_width"]), margin)
    if kind == "ball":
        return Microstructure.ball(n, dim, float(d["radius"]), margin)
    if kind == "empty":
        return Microstructure.empty(n, dim, margin)
    if kind == "rle":
        flat = np.concatenate([np.full(int(c), bool(v)) for v, c in d["runs"]]) if d["runs"] else np.array([])
        if flat.size != n ** dim:
            raise ValueError(f"run lengths cover {flat.size} cells, expected {n ** dim}")
        return Microstructure(flat.reshape((n,) * dim), margin)
    raise ValueError(f"unknown microstructure kind {kind!r}")


def microstructure_to_dict(ms: Microstructure) -> dict:
    flat = ms.chi0.reshape(-1).astype(int)
    runs, start = [], 0
    for j in range(1, flat.size + 1):
        if j == flat.size or flat[j] != flat[start]:
            runs.append([int(flat[start]), j - start])
            start = j
    return {"kind": "rle", "n": ms.n, "dim": ms.dim, "margin": ms.margin, "runs": runs}


def soft_family_from_dict(d: dict) -> SoftFamily:
    if "base" in d:
        pert = d.get("perturbation")
        return SoftFamily(Integrand.from_dict(d["base"]), Integrand.from_dict(pert) if pert else None)
    return SoftFamily(Integrand.from_dict(d))


# ------------------------------------------------------------------ configs

def load_config(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(cfg, dict):
        raise ValueError(f"{path}: config must be a JSON object")
    return cfg


def output_path(name: str | os.PathLike) -> Path:
    """Relative output paths land in $AFREE_OUTPUT_DIR when it is set."""
    path = Path(name)
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not path.is_absolute():
        path = Path(base) / path
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def format_cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def append_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    """Append rows, writing the header first if the file is new or empty."""
    path = Path(path)
    new = not path.exists() or path.stat().st_size == 0
    with open(path, "a", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if new:
            w.writerow(header)
        for row in rows:
            w.writerow([format_cell(v) for v in row])


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: int
    version: str
    wall_time: float = 0.0
    outputs: dict = field(default_factory=dict)  # path -> sha256

    def add_output(self, path) -> None:
        self.outputs[str(path)] = sha256_file(path)

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True, default=_json_default)
            fh.write("\n")


def _json_default(o: Any):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"cannot serialise {type(o).__name__}")
