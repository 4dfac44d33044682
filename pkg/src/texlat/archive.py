"""Feature archive files and class-folder dataset handling.

An archive stores one statistic vector per image as fixed-size records
behind a small header, so it can be scanned or memory-mapped without
parsing. Datasets follow the one-directory-per-class convention; an
optional JSON manifest can override the root, the class list, the
per-class train/eval split counts and the preprocessing settings.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .pss import PssLayout, PssParams, PssVector, pss_dim

ARCHIVE_MAGIC = b"PSSA"
ARCHIVE_VERSION = 1
_ID_BYTES = 96

_IMAGE_SUFFIXES = (".pgm", ".png")


@dataclass
class Preprocess:
    size: int = 128        # resize target (0 keeps the source size)
    mean: float = 127.0
    std: float = 40.0


@dataclass
class DatasetManifest:
    root: Path
    classes: list[str]
    train_count: int = 0   # 0 means "all available"
    eval_count: int = 0
    preprocess: Preprocess = field(default_factory=Preprocess)

    def images(self, cls: str) -> list[Path]:
        files = sorted(p for p in (self.root / cls).iterdir()
                       if p.suffix.lower() in _IMAGE_SUFFIXES)
        return files

    def split(self, cls: str, which: str) -> list[Path]:
        """Deterministic split: the first train_count files train, the
        next eval_count evaluate."""
        files = self.images(cls)
        train_n = self.train_count or len(files)
        if which == "train":
            return files[:train_n]
        if which == "eval":
            eval_n = self.eval_count or max(len(files) - train_n, 0)
            return files[train_n:train_n + eval_n]
        if which == "all":
            return files
        raise ValueError(f"unknown split {which!r}")


def discover_dataset(root, manifest_path=None, preprocess: Preprocess | None = None,
                     train_count: int = 0, eval_count: int = 0) -> DatasetManifest:
    """Build a manifest by scanning class folders, or from a JSON file."""
    if manifest_path is not None:
        spec = json.loads(Path(manifest_path).read_text())
        pp = spec.get("preprocess", {})
        return DatasetManifest(
            root=Path(spec.get("root", root)),
            classes=list(spec["classes"]),
            train_count=int(spec.get("train_count", train_count)),
            eval_count=int(spec.get("eval_count", eval_count)),
            preprocess=Preprocess(int(pp.get("size", 128)),
                                  float(pp.get("mean", 127.0)),
                                  float(pp.get("std", 40.0))))
    rootp = Path(root)
    if not rootp.is_dir():
        raise FileNotFoundError(f"dataset root {rootp} is not a directory")
    classes = sorted(p.name for p in rootp.iterdir() if p.is_dir())
    if not classes:
        raise ValueError(f"dataset root {rootp} contains no class directories")
    return DatasetManifest(rootp, classes, train_count, eval_count,
                           preprocess or Preprocess())


@dataclass
class FeatureArchive:
    params: PssParams
    classes: list[str]
    labels: np.ndarray      # (n,) int32 indices into classes
    ids: list[str]
    features: np.ndarray    # (n, D)

    @property
    def layout(self) -> PssLayout:
        return PssLayout.from_params(self.params)

    def vector(self, i: int) -> PssVector:
        return PssVector(self.features[i].copy(), self.layout)


def save_archive(arch: FeatureArchive, path) -> None:
    p = arch.params
    n, dim = arch.features.shape
    if dim != pss_dim(p):
        raise ValueError(f"feature width {dim} does not match parameters")
    head = [ARCHIVE_MAGIC,
            struct.pack("<IIIIII", ARCHIVE_VERSION, p.n_scales, p.n_orientations,
                        p.neighborhood, dim, n),
            struct.pack("<I", len(arch.classes))]
    for name in arch.classes:
        enc = name.encode("utf-8")
        head.append(struct.pack("<H", len(enc)) + enc)
    recs = []
    for i in range(n):
        ident = arch.ids[i].encode("utf-8")[:_ID_BYTES].ljust(_ID_BYTES, b"\0")
        recs.append(struct.pack("<I", int(arch.labels[i])) + ident
                    + arch.features[i].astype("<f8").tobytes())
    Path(path).write_bytes(b"".join(head) + b"".join(recs))


def load_archive(path) -> FeatureArchive:
    buf = Path(path).read_bytes()
    if buf[:4] != ARCHIVE_MAGIC:
        raise ValueError(f"corrupt container: {path} is not a feature archive")
    ver, nsc, nor, m, dim, count = struct.unpack_from("<IIIIII", buf, 4)
    if ver != ARCHIVE_VERSION:
        raise ValueError(
            f"version mismatch: file has {ver}, this build reads {ARCHIVE_VERSION}")
    params = PssParams(nsc, nor, m)
    if dim != pss_dim(params):
        raise ValueError("corrupt container: dimension header mismatch")
    pos = 28
    (n_classes,) = struct.unpack_from("<I", buf, pos)
    pos += 4
    classes = []
    for _ in range(n_classes):
        (ln,) = struct.unpack_from("<H", buf, pos)
        pos += 2
        classes.append(buf[pos:pos + ln].decode("utf-8"))
        pos += ln
    rec = 4 + _ID_BYTES + 8 * dim
    if len(buf) != pos + rec * count:
        raise ValueError(f"corrupt container: expected {count} records")
    labels = np.empty(count, dtype=np.int32)
    ids = []
    features = np.empty((count, dim))
    for i in range(count):
        (labels[i],) = struct.unpack_from("<I", buf, pos)
        ids.append(buf[pos + 4:pos + 4 + _ID_BYTES].rstrip(b"\0").decode("utf-8"))
        features[i] = np.frombuffer(buf, "<f8", dim, pos + 4 + _ID_BYTES)
        pos += rec
    if labels.size and (labels.min() < 0 or labels.max() >= len(classes)):
        raise ValueError("corrupt container: label out of range")
    return FeatureArchive(params, classes, labels, ids, features)
