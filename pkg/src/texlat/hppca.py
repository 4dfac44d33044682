"""Two-stage grouped PPCA over statistic vectors.

Stage one fits an independent PPCA per statistic group, with each
latent dimension picked from that group's own eigenvalue spectrum by a
shared cumulative-contribution threshold. The group latents are
concatenated into an intermediate vector; stage two fits one more PPCA
on those intermediates to produce the final low-dimensional code.

Groups with no variance keep a single always-zero latent so the
intermediate layout stays static across refits and serialization.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import ppca
from .ppca import PpcaModel
from .pss import PssLayout, PssParams, PssVector

MODEL_MAGIC = b"HPCA"
MODEL_VERSION = 1


@dataclass
class HppcaModel:
    group_models: list[PpcaModel]  # one per statistic group, in order
    final_model: PpcaModel         # over the concatenated group latents
    layout: PssLayout
    intermediate_threshold: float

    @property
    def params(self) -> PssParams | None:
        return self.layout.params

    @property
    def pss_dim(self) -> int:
        return self.layout.dim

    @property
    def intermediate_dim(self) -> int:
        return self.final_model.dim

    @property
    def output_dim(self) -> int:
        return self.final_model.q

    @property
    def group_dims(self) -> tuple[int, ...]:
        return tuple(m.q for m in self.group_models)


def _as_matrix(dataset, layout: PssLayout | None):
    if isinstance(dataset, np.ndarray):
        if layout is None:
            raise ValueError("a matrix dataset needs an explicit layout")
        x = np.asarray(dataset, dtype=np.float64)
    else:
        vectors = list(dataset)
        if not vectors:
            raise ValueError("empty dataset")
        layout = vectors[0].layout
        if any(v.layout != layout for v in vectors):
            raise ValueError("dataset vectors have inconsistent layouts")
        x = np.stack([v.values for v in vectors])
    if x.ndim != 2 or x.shape[1] != layout.dim:
        raise ValueError(f"data shape {x.shape} does not match layout dim {layout.dim}")
    if x.shape[0] < 2:
        raise ValueError(f"need at least 2 samples, got {x.shape[0]}")
    return x, layout


def fit_hierarchy(dataset, threshold: float, output_dim: int,
                  layout: PssLayout | None = None) -> HppcaModel:
    """Fit the grouped stage and the final stage.

    `dataset` is a sequence of PssVector (or an n x D matrix plus an
    explicit layout), `threshold` the cumulative-contribution ratio
    used for every group, `output_dim` the final code length. An
    output_dim above the achieved intermediate dimension is an error.
    """
    x, layout = _as_matrix(dataset, layout)
    if not 0 < threshold <= 1:
        raise ValueError(f"threshold must be in (0, 1], got {threshold}")
    if output_dim < 1:
        raise ValueError(f"output dimension must be >= 1, got {output_dim}")

    groups, latents = [], []
    for gi in range(1, 11):
        block = x[:, layout.group_slice(gi)]
        mu, eigvals, vecs = ppca._sample_eig(block)
        if eigvals.sum() <= 0:
            q = 1  # degenerate group: one latent that is always zero
        else:
            q = ppca.choose_dim(eigvals, threshold)
        model = ppca._model_from_eig(mu, eigvals, vecs, q)
        groups.append(model)
        latents.append(ppca.encode(model, block))

    intermediate = np.hstack(latents)
    if output_dim > intermediate.shape[1]:
        raise ValueError(
            f"output dimension {output_dim} exceeds the {intermediate.shape[1]}"
            f"-dimensional intermediate representation")
    final = ppca.fit(intermediate, output_dim)
    return HppcaModel(groups, final, layout, threshold)


def _check_layout(model: HppcaModel, layout: PssLayout) -> None:
    if layout.sizes != model.layout.sizes or layout.params != model.layout.params:
        raise ValueError("vector layout does not match the model")


def encode_batch(model: HppcaModel, matrix: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    latents = [ppca.encode(g, x[:, model.layout.group_slice(i + 1)])
               for i, g in enumerate(model.group_models)]
    return ppca.encode(model.final_model, np.hstack(latents))


def decode_batch(model: HppcaModel, codes: np.ndarray) -> np.ndarray:
    z = np.atleast_2d(np.asarray(codes, dtype=np.float64))
    inter = ppca.decode(model.final_model, z)
    parts, pos = [], 0
    for g in model.group_models:
        parts.append(ppca.decode(g, inter[:, pos:pos + g.q]))
        pos += g.q
    return np.hstack(parts)


def encode(model: HppcaModel, v: PssVector) -> np.ndarray:
    """Group-wise encode, concatenate, final encode."""
    _check_layout(model, v.layout)
    return encode_batch(model, v.values[None, :])[0]


def decode(model: HppcaModel, code) -> PssVector:
    """Final decode, split by group widths, group decodes, concatenate."""
    z = np.asarray(code, dtype=np.float64)
    if z.shape != (model.output_dim,):
        raise ValueError(f"code length {z.shape} != model output {model.output_dim}")
    return PssVector(decode_batch(model, z[None, :])[0], model.layout)


def reduction_rate(model: HppcaModel) -> float:
    """Fraction of statistic dimensions removed by the final code."""
    return 1.0 - model.output_dim / model.pss_dim


# --------------------------------------------------------------------------
# container serialization

def _pack_block(m: PpcaModel) -> bytes:
    head = struct.pack("<IId", m.dim, m.q, m.noise_var)
    return (head + m.mean.astype("<f8").tobytes()
            + np.ascontiguousarray(m.loadings).astype("<f8").tobytes()
            + m.eigenvalues.astype("<f8").tobytes())


def _unpack_block(buf: bytes, pos: int) -> tuple[PpcaModel, int]:
    if pos + 16 > len(buf):
        raise ValueError("corrupt container: truncated model block")
    dim, q, sigma2 = struct.unpack_from("<IId", buf, pos)
    pos += 16
    need = 8 * (dim + dim * q + dim)
    if pos + need > len(buf):
        raise ValueError("corrupt container: truncated model block")
    mean = np.frombuffer(buf, "<f8", dim, pos).astype(np.float64)
    pos += 8 * dim
    w = np.frombuffer(buf, "<f8", dim * q, pos).astype(np.float64).reshape(dim, q)
    pos += 8 * dim * q
    lam = np.frombuffer(buf, "<f8", dim, pos).astype(np.float64)
    pos += 8 * dim
    return PpcaModel(mean, w, float(sigma2), lam, int(q)), pos


def save_model(model: HppcaModel, path) -> None:
    """Write the full two-stage model; load_model restores it bit-exactly."""
    p = model.params
    if p is None:
        raise ValueError("only parameter-derived layouts are serializable")
    head = MODEL_MAGIC + struct.pack(
        "<IIIIdII", MODEL_VERSION, p.n_scales, p.n_orientations, p.neighborhood,
        model.intermediate_threshold, model.output_dim, model.pss_dim)
    blocks = b"".join(_pack_block(m) for m in model.group_models)
    Path(path).write_bytes(head + blocks + _pack_block(model.final_model))


def load_model(path) -> HppcaModel:
    buf = Path(path).read_bytes()
    if buf[:4] != MODEL_MAGIC:
        raise ValueError(f"corrupt container: {path} is not a model file")
    ver, n, k, m, thr, d, dim = struct.unpack_from("<IIIIdII", buf, 4)
    if ver != MODEL_VERSION:
        raise ValueError(
            f"version mismatch: file has {ver}, this build reads {MODEL_VERSION}")
    layout = PssLayout.from_params(PssParams(n, k, m))
    if layout.dim != dim:
        raise ValueError("corrupt container: dimension header mismatch")
    pos = 4 + struct.calcsize("<IIIIdII")
    groups = []
    for size in layout.sizes:
        block, pos = _unpack_block(buf, pos)
        if block.dim != size:
            raise ValueError("corrupt container: group block size mismatch")
        groups.append(block)
    final, pos = _unpack_block(buf, pos)
    if pos != len(buf):
        raise ValueError("corrupt container: trailing bytes")
    if final.dim != sum(g.q for g in groups) or final.q != d:
        raise ValueError("corrupt container: final block inconsistent")
    return HppcaModel(groups, final, layout, float(thr))
