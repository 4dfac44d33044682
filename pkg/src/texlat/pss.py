"""The pyramid texture statistic: ten groups flattened into one vector.

Group contents (N scales, K orientations, M-neighborhood, population
moment conventions throughout):

    C1   mean, variance, skewness, kurtosis, min, max of the input    (6)
    C2   skewness + kurtosis of per-scale reconstructions and of the
         low-pass reconstruction                                 (2(N+1))
    C3   MxM circular autocorrelation of every oriented band
         reconstruction                                         (N K M^2)
    C4   the same autocorrelation of per-scale reconstructions and the
         low-pass reconstruction                               (M^2(N+1))
    C5   correlations of band coefficient magnitudes within a scale
                                                                  (N K^2)
    C6   correlations of oriented reconstructions within each scale,
         plus an oriented split of the low-pass reconstruction (K^2(N+1))
    C7   correlations of oriented reconstructions across every
         (scale, level) pair, low-pass level included        (K^2 N(N+1))
    C8   magnitude correlations across all scale pairs, coarser grids
         interpolated onto the finer grid                       (N^2 K^2)
    C9   means of band reconstructions, then of the low-pass and
         high-pass reconstructions                                (NK+2)
    C10  variance of the high-pass reconstruction                     (1)

At the default parameters (4, 4, 7) the vector has 1784 entries.

Every statistic is a smooth function of images that depend linearly on
the input (plus min/max and magnitudes), so the module also provides the
exact reverse-mode derivative of any weighting of the statistics with
respect to the input pixels; `_forward` returns the cache `_backward`
consumes.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import pyramid
from .pyramid import PyramidParams

VAR_EPS = 1e-12  # below this population variance, normalized stats are 0

_GROUPS = ("C1", "C2", "C3", "C4", "C5", "C6", "C7", "C8", "C9", "C10")


class NumericError(ArithmeticError):
    """Raised when a statistic or gradient turns out non-finite."""


@dataclass(frozen=True)
class PssParams:
    """Decomposition depth, orientation count and autocorrelation window."""

    n_scales: int = 4
    n_orientations: int = 4
    neighborhood: int = 7

    def __post_init__(self):
        PyramidParams(self.n_scales, self.n_orientations)
        m = self.neighborhood
        if m < 3 or m % 2 == 0:
            raise ValueError(f"neighborhood must be odd and >= 3, got {m}")

    @property
    def pyramid(self) -> PyramidParams:
        return PyramidParams(self.n_scales, self.n_orientations)


def group_sizes(params: PssParams) -> tuple[int, ...]:
    n, k, m = params.n_scales, params.n_orientations, params.neighborhood
    return (6, 2 * (n + 1), n * k * m * m, m * m * (n + 1), n * k * k,
            k * k * (n + 1), k * k * n * (n + 1), n * n * k * k, n * k + 2, 1)


@dataclass(frozen=True)
class PssLayout:
    """Index map of the ten contiguous group slices in the flat vector."""

    sizes: tuple[int, ...]
    params: PssParams | None = None

    def __post_init__(self):
        if len(self.sizes) != 10 or any(s < 1 for s in self.sizes):
            raise ValueError("layout needs 10 positive group sizes")
        if self.params is not None and group_sizes(self.params) != self.sizes:
            raise ValueError("group sizes do not match the parameters")

    @classmethod
    def from_params(cls, params: PssParams) -> "PssLayout":
        return cls(group_sizes(params), params)

    @property
    def dim(self) -> int:
        return sum(self.sizes)

    def group_slice(self, group: int) -> slice:
        """Slice for group 1..10."""
        if not 1 <= group <= 10:
            raise IndexError(f"group index {group} out of range 1..10")
        start = sum(self.sizes[:group - 1])
        return slice(start, start + self.sizes[group - 1])


@dataclass
class PssVector:
    """A statistic vector together with its layout."""

    values: np.ndarray
    layout: PssLayout

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (self.layout.dim,):
            raise ValueError(
                f"values have length {self.values.size}, layout says {self.layout.dim}")

    @property
    def params(self) -> PssParams | None:
        return self.layout.params

    def group(self, group: int) -> np.ndarray:
        return self.values[self.layout.group_slice(group)]


def pss_dim(params: PssParams) -> int:
    """Total statistic dimension for the given parameters."""
    return sum(group_sizes(params))


def group_view(v: PssVector, group: int) -> np.ndarray:
    """Contiguous slice of the vector belonging to group 1..10."""
    return v.group(group)


def _level_tag(level: int, n_scales: int) -> str:
    return f"s{level}" if level <= n_scales else "lr"


def column_names(layout: PssLayout) -> list[str]:
    """Stable per-coordinate names, e.g. C3.s2.o1.dy-3.dx2."""
    p = layout.params
    if p is None:
        raise ValueError("column names need a parameter-derived layout")
    n, k, m = p.n_scales, p.n_orientations, p.neighborhood
    h = (m - 1) // 2
    lags = [(dy, dx) for dy in range(-h, h + 1) for dx in range(-h, h + 1)]
    names = ["C1.mean", "C1.var", "C1.skew", "C1.kurt", "C1.min", "C1.max"]
    for lev in range(1, n + 2):
        tag = _level_tag(lev, n)
        names += [f"C2.{tag}.skew", f"C2.{tag}.kurt"]
    for sc in range(1, n + 1):
        for o in range(k):
            names += [f"C3.s{sc}.o{o}.dy{dy}.dx{dx}" for dy, dx in lags]
    for lev in range(1, n + 2):
        tag = _level_tag(lev, n)
        names += [f"C4.{tag}.dy{dy}.dx{dx}" for dy, dx in lags]
    for sc in range(1, n + 1):
        names += [f"C5.s{sc}.o{a}.o{b}" for a in range(k) for b in range(k)]
    for lev in range(1, n + 2):
        tag = _level_tag(lev, n)
        names += [f"C6.{tag}.o{a}.o{b}" for a in range(k) for b in range(k)]
    for sc in range(1, n + 1):
        for lev in range(1, n + 2):
            tag = _level_tag(lev, n)
            names += [f"C7.s{sc}.{tag}.o{a}.o{b}" for a in range(k) for b in range(k)]
    for sa in range(1, n + 1):
        for sb in range(1, n + 1):
            names += [f"C8.s{sa}.s{sb}.o{a}.o{b}" for a in range(k) for b in range(k)]
    for sc in range(1, n + 1):
        names += [f"C9.s{sc}.o{o}" for o in range(k)]
    names += ["C9.lr", "C9.hr", "C10.hr.var"]
    return names


# --------------------------------------------------------------------------
# statistic primitives (population conventions, variance-guarded)

def _skew_kurt(img):
    """(skewness, kurtosis, aux) of one image; zero when degenerate."""
    c = img - img.mean()
    var = np.mean(c * c)
    if var < VAR_EPS:
        return 0.0, 0.0, (c, var, 0.0, 0.0)
    m3 = np.mean(c ** 3)
    m4 = np.mean(c ** 4)
    return m3 / var ** 1.5, m4 / var ** 2, (c, var, m3, m4)


def _skew_kurt_backward(aux, g_skew, g_kurt):
    c, var, m3, m4 = aux
    if var < VAR_EPS:
        return np.zeros_like(c)
    n = c.size
    skew = m3 / var ** 1.5
    kurt = m4 / var ** 2
    cot = g_skew * (3.0 / n) * ((c * c - var) / var ** 1.5 - skew * c / var)
    cot += g_kurt * (4.0 / n) * ((c ** 3 - m3) / var ** 2 - kurt * c / var)
    return cot


def _acorr(img, m):
    """Normalized circular autocorrelation on the centered MxM lag window."""
    s = img.shape[0]
    c = img - img.mean()
    spec = np.fft.fft2(c)
    cmap = np.fft.ifft2(spec * np.conj(spec)).real  # sum_p c[p] c[p+d]
    c0 = cmap[0, 0]
    h = (m - 1) // 2
    out = np.empty((m, m))
    if c0 / c.size < VAR_EPS:
        out[:] = 0.0
        return out, (c, 0.0)
    for i, dy in enumerate(range(-h, h + 1)):
        for j, dx in enumerate(range(-h, h + 1)):
            out[i, j] = cmap[dy % s, dx % s] / c0
    return out, (c, c0)


def _acorr_backward(aux, g, values):
    c, c0 = aux
    if c0 == 0.0:
        return np.zeros_like(c)
    s = c.shape[0]
    m = g.shape[0]
    h = (m - 1) // 2
    kernel = np.zeros_like(c)
    for i, dy in enumerate(range(-h, h + 1)):
        for j, dx in enumerate(range(-h, h + 1)):
            kernel[dy % s, dx % s] += g[i, j]
    kf = np.fft.fft2(kernel)
    cf = np.fft.fft2(c)
    # sum_d g_d (c[p+d] + c[p-d]): cross-correlation plus convolution
    both = np.fft.ifft2(cf * (np.conj(kf) + kf)).real
    return (both - 2.0 * float((g * values).sum()) * c) / c0


def _center_stack(images):
    """Stack images as centered rows; returns (Z, var, ok)."""
    z = np.stack([im.ravel() for im in images]).astype(np.float64)
    z -= z.mean(axis=1, keepdims=True)
    var = np.mean(z * z, axis=1)
    return z, var, var >= VAR_EPS


def _corr_matrix(za, vara, oka, zb=None, varb=None, okb=None):
    """Pearson matrix between two stacks (or one with itself), guarded."""
    if zb is None:
        zb, varb, okb = za, vara, oka
    n = za.shape[1]
    denom = np.sqrt(np.outer(np.where(oka, vara, 1.0), np.where(okb, varb, 1.0)))
    rho = (za @ zb.T) / (n * denom)
    rho[~oka, :] = 0.0
    rho[:, ~okb] = 0.0
    return rho


def _corr_block_backward(z, var, ok, rho, g):
    """Cotangents for all-pairs correlations of one stack, rows as images."""
    n = z.shape[1]
    s = g + g.T
    sig = np.sqrt(np.where(ok, var, 1.0))
    w = s / np.outer(sig, sig)
    w[~ok, :] = 0.0
    w[:, ~ok] = 0.0
    ridge = (s * rho).sum(axis=1) / np.where(ok, var, 1.0)
    cot = (w @ z - ridge[:, None] * z) / n
    cot[~ok] = 0.0
    return cot


def _corr_cross_backward(za, vara, oka, zb, varb, okb, rho, g):
    """Cotangents for correlations between two stacks; g aligns with rho."""
    n = za.shape[1]
    siga = np.sqrt(np.where(oka, vara, 1.0))
    sigb = np.sqrt(np.where(okb, varb, 1.0))
    w = g / np.outer(siga, sigb)
    w[~oka, :] = 0.0
    w[:, ~okb] = 0.0
    cota = (w @ zb - ((g * rho).sum(axis=1) / np.where(oka, vara, 1.0))[:, None] * za) / n
    cotb = (w.T @ za - ((g * rho).sum(axis=0) / np.where(okb, varb, 1.0))[:, None] * zb) / n
    cota[~oka] = 0.0
    cotb[~okb] = 0.0
    return cota, cotb


# --------------------------------------------------------------------------
# forward pass

class _Cache:
    """Everything the backward pass needs from one forward evaluation."""

    __slots__ = ("params", "size", "stack", "img", "recons", "scales", "low",
                 "high", "oriented", "bands", "mags", "upmags", "aux3", "aux4",
                 "stack20", "rho20", "mag_stats", "rho5", "cross", "values")


def _forward(img, params: PssParams):
    a = np.asarray(img, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"statistic input must be square, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise NumericError("statistic input contains non-finite pixels")
    size = a.shape[0]
    n_sc, n_or, m = params.n_scales, params.n_orientations, params.neighborhood
    if m > size:
        raise ValueError(f"neighborhood {m} exceeds image side {size}")
    stack = pyramid.transfer_stack(size, n_sc, n_or)

    cc = _Cache()
    cc.params, cc.size, cc.stack, cc.img = params, size, stack, a
    spec = np.fft.fftshift(np.fft.fft2(a))
    filt = lambda t: np.fft.ifft2(np.fft.ifftshift(t * spec)).real
    cc.recons = [[filt(stack.band_recon[n][k]) for k in range(n_or)]
                 for n in range(n_sc)]
    cc.scales = [filt(stack.scale_recon[n]) for n in range(n_sc)]
    cc.low = filt(stack.low_recon)
    cc.high = filt(stack.high_recon)
    cc.oriented = [filt(t) for t in stack.oriented_low_recon]
    cc.bands = [[stack.band_grid(spec, n + 1, k) for k in range(n_or)]
                for n in range(n_sc)]
    cc.mags = [[np.abs(b) for b in level] for level in cc.bands]
    # coarser-scale magnitudes interpolated onto each finer grid (C8)
    cc.upmags = {}
    for coarse in range(2, n_sc + 1):
        for fine in range(1, coarse):
            target = size >> (fine - 1)
            cc.upmags[coarse, fine] = [pyramid.upsample_to(mg, target)
                                       for mg in cc.mags[coarse - 1]]

    values = []

    skew, kurt, (_, var, _, _) = _skew_kurt(a)
    values += [a.mean(), var, skew, kurt, a.min(), a.max()]

    sk_aux = []
    level_imgs = cc.scales + [cc.low]
    for im in level_imgs:
        s, k, aux = _skew_kurt(im)
        values += [s, k]
        sk_aux.append(aux)

    cc.aux3 = []
    for level in cc.recons:
        row = []
        for im in level:
            ac, aux = _acorr(im, m)
            values += ac.ravel().tolist()
            row.append((ac, aux))
        cc.aux3.append(row)

    acorr4 = []
    for im in level_imgs:
        ac, aux = _acorr(im, m)
        values += ac.ravel().tolist()
        acorr4.append((ac, aux))
    cc.aux4 = list(zip(sk_aux, acorr4))  # C2 and C4 share the level images

    cc.mag_stats = [_center_stack(level) for level in cc.mags]
    cc.rho5 = [_corr_matrix(*st) for st in cc.mag_stats]
    for rho in cc.rho5:
        values += rho.ravel().tolist()

    flat = [im for level in cc.recons for im in level] + cc.oriented
    cc.stack20 = _center_stack(flat)
    cc.rho20 = _corr_matrix(*cc.stack20)
    idx = lambda lev, k: (lev - 1) * n_or + k if lev <= n_sc else n_sc * n_or + k
    for lev in range(1, n_sc + 2):
        for ka in range(n_or):
            for kb in range(n_or):
                values.append(cc.rho20[idx(lev, ka), idx(lev, kb)])
    for sc in range(1, n_sc + 1):
        for lev in range(1, n_sc + 2):
            for ka in range(n_or):
                for kb in range(n_or):
                    values.append(cc.rho20[idx(sc, ka), idx(lev, kb)])

    cc.cross = {}
    for coarse in range(2, n_sc + 1):
        for fine in range(1, coarse):
            zb, varb, okb = _center_stack(cc.upmags[coarse, fine])
            fa = cc.mag_stats[fine - 1]
            rho = _corr_matrix(fa[0], fa[1], fa[2], zb, varb, okb)
            cc.cross[coarse, fine] = (rho, (zb, varb, okb))
    for sa in range(1, n_sc + 1):
        for sb in range(1, n_sc + 1):
            if sa == sb:
                values += cc.rho5[sa - 1].ravel().tolist()
            elif sa < sb:
                values += cc.cross[sb, sa][0].ravel().tolist()
            else:
                values += cc.cross[sa, sb][0].T.ravel().tolist()

    for level in cc.recons:
        values += [im.mean() for im in level]
    values += [cc.low.mean(), cc.high.mean()]

    ch = cc.high - cc.high.mean()
    values.append(np.mean(ch * ch))

    out = np.asarray(values, dtype=np.float64)
    if not np.isfinite(out).all():
        bad = int(np.flatnonzero(~np.isfinite(out))[0])
        raise NumericError(f"non-finite statistic at flat index {bad}")
    cc.values = out
    return out, cc


def extract_pss(img, params: PssParams = PssParams()) -> PssVector:
    """Compute the full statistic vector of one image."""
    values, _ = _forward(img, params)
    return PssVector(values, PssLayout.from_params(params))


# --------------------------------------------------------------------------
# backward pass

def _backward(cc: _Cache, dvalues: np.ndarray) -> np.ndarray:
    """Gradient w.r.t. input pixels of sum(dvalues * statistics)."""
    params, size = cc.params, cc.size
    n_sc, n_or, m = params.n_scales, params.n_orientations, params.neighborhood
    layout = PssLayout.from_params(params)
    g = [dvalues[layout.group_slice(i)] for i in range(1, 11)]
    stack = cc.stack
    npix = size * size

    grad = np.zeros((size, size))
    spec_cot = np.zeros((size, size), dtype=np.complex128)
    cot_recon = [[np.zeros((size, size)) for _ in range(n_or)] for _ in range(n_sc)]
    cot_scale = [np.zeros((size, size)) for _ in range(n_sc)]
    cot_low = np.zeros((size, size))
    cot_high = np.zeros((size, size))
    cot_oriented = [np.zeros((size, size)) for _ in range(n_or)]
    cot_mag = [[np.zeros_like(mg) for mg in level] for level in cc.mags]

    # C1: raw-pixel moments and extrema
    a = cc.img
    c = a - a.mean()
    var = np.mean(c * c)
    grad += g[0][0] / npix
    grad += g[0][1] * (2.0 / npix) * c
    if var >= VAR_EPS:
        m3, m4 = np.mean(c ** 3), np.mean(c ** 4)
        sk, ku = m3 / var ** 1.5, m4 / var ** 2
        grad += g[0][2] * (3.0 / npix) * ((c * c - var) / var ** 1.5 - sk * c / var)
        grad += g[0][3] * (4.0 / npix) * ((c ** 3 - m3) / var ** 2 - ku * c / var)
    flat = grad.ravel()
    flat[np.argmin(a)] += g[0][4]
    flat[np.argmax(a)] += g[0][5]

    # C2 + C4 share the per-level images
    cot_levels = [cot_scale[i] for i in range(n_sc)] + [cot_low]
    g2 = g[1].reshape(n_sc + 1, 2)
    g4 = g[3].reshape(n_sc + 1, m, m)
    for lev in range(n_sc + 1):
        aux_sk, (ac_vals, aux_ac) = cc.aux4[lev]
        cot_levels[lev] += _skew_kurt_backward(aux_sk, g2[lev, 0], g2[lev, 1])
        cot_levels[lev] += _acorr_backward(aux_ac, g4[lev], ac_vals)

    # C3
    g3 = g[2].reshape(n_sc, n_or, m, m)
    for n in range(n_sc):
        for k in range(n_or):
            ac_vals, aux = cc.aux3[n][k]
            cot_recon[n][k] += _acorr_backward(aux, g3[n, k], ac_vals)

    # C5 + same-scale C8 entries share per-scale magnitude blocks
    g5 = g[4].reshape(n_sc, n_or, n_or)
    g8 = g[7].reshape(n_sc, n_sc, n_or, n_or)
    for n in range(n_sc):
        gm = g5[n] + g8[n, n]
        z, v, ok = cc.mag_stats[n]
        cot = _corr_block_backward(z, v, ok, cc.rho5[n], gm)
        for k in range(n_or):
            cot_mag[n][k] += cot[k].reshape(cc.mags[n][k].shape)

    # cross-scale C8 entries
    for coarse in range(2, n_sc + 1):
        for fine in range(1, coarse):
            gc = g8[fine - 1, coarse - 1] + g8[coarse - 1, fine - 1].T
            rho, (zb, varb, okb) = cc.cross[coarse, fine]
            za, vara, oka = cc.mag_stats[fine - 1]
            cota, cotb = _corr_cross_backward(za, vara, oka, zb, varb, okb, rho, gc)
            side = size >> (fine - 1)
            small = size >> (coarse - 1)
            for k in range(n_or):
                cot_mag[fine - 1][k] += cota[k].reshape(side, side)
                cot_mag[coarse - 1][k] += pyramid.upsample_to_adjoint(
                    cotb[k].reshape(side, side), small)

    # C6 + C7 share the unified reconstruction stack
    idx = lambda lev, k: (lev - 1) * n_or + k if lev <= n_sc else n_sc * n_or + k
    g20 = np.zeros_like(cc.rho20)
    g6 = g[5].reshape(n_sc + 1, n_or, n_or)
    for lev in range(1, n_sc + 2):
        for ka in range(n_or):
            for kb in range(n_or):
                g20[idx(lev, ka), idx(lev, kb)] += g6[lev - 1, ka, kb]
    g7 = g[6].reshape(n_sc, n_sc + 1, n_or, n_or)
    for sc in range(1, n_sc + 1):
        for lev in range(1, n_sc + 2):
            for ka in range(n_or):
                for kb in range(n_or):
                    g20[idx(sc, ka), idx(lev, kb)] += g7[sc - 1, lev - 1, ka, kb]
    z, v, ok = cc.stack20
    cot20 = _corr_block_backward(z, v, ok, cc.rho20, g20)
    for n in range(n_sc):
        for k in range(n_or):
            cot_recon[n][k] += cot20[idx(n + 1, k)].reshape(size, size)
    for k in range(n_or):
        cot_oriented[k] += cot20[idx(n_sc + 1, k)].reshape(size, size)

    # C9 means, C10 high-pass variance
    g9 = g[8]
    for n in range(n_sc):
        for k in range(n_or):
            cot_recon[n][k] += g9[n * n_or + k] / npix
    cot_low += g9[n_sc * n_or] / npix
    cot_high += g9[n_sc * n_or + 1] / npix
    cot_high += g[9][0] * (2.0 / npix) * (cc.high - cc.high.mean())

    # push cotangents through the self-adjoint reconstruction filters
    fft = lambda u: np.fft.fftshift(np.fft.fft2(u))
    for n in range(n_sc):
        for k in range(n_or):
            spec_cot += stack.band_recon[n][k] * fft(cot_recon[n][k])
        spec_cot += stack.scale_recon[n] * fft(cot_scale[n])
    spec_cot += stack.low_recon * fft(cot_low)
    spec_cot += stack.high_recon * fft(cot_high)
    for k in range(n_or):
        spec_cot += stack.oriented_low_recon[k] * fft(cot_oriented[k])
    grad += np.fft.ifft2(np.fft.ifftshift(spec_cot)).real

    # magnitude cotangents -> complex band cotangents -> analysis adjoint
    for n in range(n_sc):
        for k in range(n_or):
            mg = cc.mags[n][k]
            unit = np.where(mg > VAR_EPS, 1.0 / np.maximum(mg, VAR_EPS), 0.0)
            w = cot_mag[n][k] * unit * cc.bands[n][k]
            grad += stack.band_grid_adjoint(w, n + 1, k)

    if not np.isfinite(grad).all():
        raise NumericError("non-finite statistic gradient")
    return grad


# --------------------------------------------------------------------------
# single-vector serialization

_VECTOR_MAGIC = b"PSSV"
_VECTOR_VERSION = 1


def save_vector(v: PssVector, path) -> None:
    """Write one vector as a small self-describing binary file."""
    if v.params is None:
        raise ValueError("only parameter-derived layouts are serializable")
    p = v.params
    head = _VECTOR_MAGIC + struct.pack(
        "<IIIII", _VECTOR_VERSION, p.n_scales, p.n_orientations,
        p.neighborhood, v.values.size)
    Path(path).write_bytes(head + v.values.astype("<f8").tobytes())


def load_vector(path) -> PssVector:
    buf = Path(path).read_bytes()
    if buf[:4] != _VECTOR_MAGIC:
        raise ValueError(f"corrupt container: {path} is not a statistic vector file")
    ver, n, k, m, dim = struct.unpack_from("<IIIII", buf, 4)
    if ver != _VECTOR_VERSION:
        raise ValueError(
            f"version mismatch: file has {ver}, this build reads {_VECTOR_VERSION}")
    params = PssParams(n, k, m)
    if dim != pss_dim(params) or len(buf) != 24 + 8 * dim:
        raise ValueError(f"corrupt container: {path} has inconsistent sizes")
    values = np.frombuffer(buf, dtype="<f8", offset=24).astype(np.float64)
    return PssVector(values, PssLayout.from_params(params))
