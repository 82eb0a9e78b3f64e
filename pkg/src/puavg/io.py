"""File formats: domain CSVs, the fit manifest, and the model directory.

Domain files are CSV with a header row.  Feature columns come first, label
columns last: binary files carry ``y``, PU files carry ``z``, semi files
carry ``z`` and ``y`` with ``y`` left empty on the z=0 rows.  The manifest
and all result files are JSON; floats are serialized with Python's shortest
round-trip representation, so written coefficients reproduce predictions
exactly.  Every output file records the config hash and seed.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .data import DomainDataset
from .errors import DataError

LABEL_COLUMNS = ("y", "z")
MODEL_FILE = "model.json"
MODEL_FORMAT = "puavg-model-v1"


def config_hash(payload) -> str:
    """Hex digest of the canonical JSON form of a configuration object."""
    canon = json.dumps(payload, sort_keys=True, separators=(",", ":"),
                       default=str)
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _clean_nan(obj):
    if isinstance(obj, float):
        return None if math.isnan(obj) else obj
    if isinstance(obj, dict):
        return {k: _clean_nan(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean_nan(v) for v in obj]
    return obj


def write_json(path: str, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_clean_nan(obj), fh, sort_keys=True, indent=2)
        fh.write("\n")


def read_json(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from exc
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror}") from exc


# -- manifest ----------------------------------------------------------------

@dataclass(frozen=True)
class ManifestDomain:
    domain_id: str
    role: str
    scheme: str
    path: str
    pi1: Optional[float] = None
    p_l: Optional[float] = None


@dataclass(frozen=True)
class Manifest:
    domains: tuple[ManifestDomain, ...]
    k: int = 5
    seed: int = 0
    threshold: float = 0.5
    intercept: bool = False
    standardize: bool = False
    l1_enabled: bool = False
    l1_grid_size: int = 20
    l1_min_ratio: float = 1e-3
    l1_cv_folds: int = 5
    base_dir: str = "."

    @property
    def target(self) -> ManifestDomain:
        return next(d for d in self.domains if d.role == "target")

    @property
    def sources(self) -> tuple[ManifestDomain, ...]:
        return tuple(d for d in self.domains if d.role != "target")


def read_manifest(path: str) -> Manifest:
    raw = read_json(path)
    if not isinstance(raw, dict) or "domains" not in raw:
        raise DataError(f"{path}: manifest must be an object with a 'domains' list")
    domains = []
    for i, entry in enumerate(raw["domains"]):
        try:
            domains.append(ManifestDomain(
                domain_id=str(entry["id"]),
                role=str(entry["role"]),
                scheme=str(entry["scheme"]),
                path=str(entry["path"]),
                pi1=None if entry.get("pi1") is None else float(entry["pi1"]),
                p_l=None if entry.get("p_l") is None else float(entry["p_l"]),
            ))
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{path}: domain entry {i}: {exc}") from exc
    targets = [d for d in domains if d.role == "target"]
    if len(targets) != 1:
        raise DataError(f"{path}: manifest needs exactly one target domain, "
                        f"found {len(targets)}")
    if targets[0].scheme != "pu":
        raise DataError(f"{path}: the target domain must have scheme 'pu'")
    for d in domains:
        if d.role not in ("target", "source"):
            raise DataError(f"{path}: domain {d.domain_id!r}: role must be "
                            "'target' or 'source'")
        if d.scheme in ("pu", "semi") and d.pi1 is None:
            raise DataError(f"{path}: domain {d.domain_id!r}: scheme "
                            f"{d.scheme!r} requires pi1")
    opts = raw.get("options", {})
    l1 = opts.get("l1", {}) or {}
    try:
        return Manifest(
            domains=tuple(domains),
            k=int(opts.get("K", 5)),
            seed=int(opts.get("seed", 0)),
            threshold=float(opts.get("threshold", 0.5)),
            intercept=bool(opts.get("intercept", False)),
            standardize=bool(opts.get("standardize", False)),
            l1_enabled=bool(l1.get("enabled", False)),
            l1_grid_size=int(l1.get("grid_size", 20)),
            l1_min_ratio=float(l1.get("min_ratio", 1e-3)),
            l1_cv_folds=int(l1.get("cv_folds", 5)),
            base_dir=os.path.dirname(os.path.abspath(path)),
        )
    except (TypeError, ValueError) as exc:
        raise DataError(f"{path}: bad options block: {exc}") from exc


# -- domain CSVs ----------------------------------------------------------------

def read_table(path: str) -> tuple[list[str], list[list[str]]]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            rows = [(i, row) for i, row in enumerate(reader, start=1)
                    if row and not row[0].startswith("#")]
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror}") from exc
    if not rows:
        raise DataError(f"{path}:1: empty file")
    header = [c.strip() for c in rows[0][1]]
    body = []
    width = len(header)
    for lineno, row in rows[1:]:
        if len(row) != width:
            raise DataError(f"{path}:{lineno}: expected {width} columns, "
                            f"got {len(row)}")
        body.append((lineno, [c.strip() for c in row]))
    return header, body


def _parse_float(path, lineno, name, text) -> float:
    try:
        return float(text)
    except ValueError:
        raise DataError(f"{path}:{lineno}: column {name!r}: "
                        f"not a number: {text!r}") from None


def _parse_indicator(path, lineno, name, text) -> float:
    v = _parse_float(path, lineno, name, text)
    if v not in (0.0, 1.0):
        raise DataError(f"{path}:{lineno}: column {name!r}: must be 0 or 1, "
                        f"got {text!r}")
    return v


def read_domain_csv(path: str, scheme: str):
    """Parse one domain file. Returns (feature_names, x, y, z); y and z are
    None when the scheme does not carry them."""
    header, body = read_table(path)
    feature_names = [c for c in header if c not in LABEL_COLUMNS]
    required = {"binary": {"y"}, "pu": {"z"}, "semi": {"z", "y"}}.get(scheme)
    if required is None:
        raise DataError(f"{path}: unknown scheme {scheme!r}")
    present = set(header) & set(LABEL_COLUMNS)
    if present != required:
        raise DataError(f"{path}:1: scheme {scheme!r} needs label columns "
                        f"{sorted(required)}, found {sorted(present)}")
    if not feature_names:
        raise DataError(f"{path}:1: no feature columns")
    col = {name: header.index(name) for name in header}
    x = np.empty((len(body), len(feature_names)))
    y = np.empty(len(body)) if "y" in required else None
    z = np.empty(len(body)) if "z" in required else None
    for r, (lineno, row) in enumerate(body):
        for j, name in enumerate(feature_names):
            x[r, j] = _parse_float(path, lineno, name, row[col[name]])
        if z is not None:
            z[r] = _parse_indicator(path, lineno, "z", row[col["z"]])
        if y is not None:
            text = row[col["y"]]
            if scheme == "semi" and text == "":
                y[r] = np.nan
                if z[r] == 1:
                    raise DataError(f"{path}:{lineno}: y missing on a z=1 row")
                continue
            if scheme == "semi" and z[r] == 0:
                raise DataError(f"{path}:{lineno}: y present on a z=0 row")
            y[r] = _parse_indicator(path, lineno, "y", text)
    return feature_names, x, y, z


def load_domain(entry: ManifestDomain, base_dir: str) -> tuple[list[str], DomainDataset]:
    path = entry.path if os.path.isabs(entry.path) else \
        os.path.join(base_dir, entry.path)
    names, x, y, z = read_domain_csv(path, entry.scheme)
    if entry.scheme == "binary":
        ds = DomainDataset.binary(x, y, pi1=entry.pi1, domain_id=entry.domain_id)
    elif entry.scheme == "pu":
        ds = DomainDataset.pu(x, z, pi1=entry.pi1, domain_id=entry.domain_id)
    else:
        ds = DomainDataset.semi(x, z, y, pi1=entry.pi1, domain_id=entry.domain_id)
    return names, ds


def read_feature_csv(path: str, feature_names: list[str]) -> np.ndarray:
    """Read only the feature columns (label columns, if present, ignored)."""
    header, body = read_table(path)
    missing = [n for n in feature_names if n not in header]
    if missing:
        raise DataError(f"{path}:1: missing feature columns {missing}")
    col = {name: header.index(name) for name in feature_names}
    x = np.empty((len(body), len(feature_names)))
    for r, (lineno, row) in enumerate(body):
        for j, name in enumerate(feature_names):
            x[r, j] = _parse_float(path, lineno, name, row[col[name]])
    return x


# -- model directory ----------------------------------------------------------

def write_model(model_dir: str, model: dict) -> None:
    os.makedirs(model_dir, exist_ok=True)
    write_json(os.path.join(model_dir, MODEL_FILE), model)


def read_model(model_dir: str) -> dict:
    model = read_json(os.path.join(model_dir, MODEL_FILE))
    if model.get("format") != MODEL_FORMAT:
        raise DataError(f"{model_dir}: not a model directory "
                        f"(format={model.get('format')!r})")
    return model


def write_predictions(path: str, probs: np.ndarray, hash_: str, seed: int) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# config_hash={hash_} seed={seed}\n")
        fh.write("prob\n")
        for p in probs:
            fh.write(f"{float(p)!r}\n")


def write_metric_rows(path: str, header: list[str], rows: list[list],
                      hash_: str, seed: int) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# config_hash={hash_} seed={seed}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_cell(v) for v in row) + "\n")


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)
