"""Frequency-domain steerable filter pyramid.

A square power-of-two image is split by a radial high-pass/low-pass pair
at full resolution, then recursively decomposed into K oriented complex
band-pass grids per scale with 2x frequency-domain downsampling between
scales. The filters form a tight frame, so `collapse` inverts
`build_pyramid` to floating-point precision.

Transfer functions (polar frequency coordinates, r in radians):

    lowpass  L(r)  = 2                          r <= pi/4
                     2 cos((pi/2) log2(4r/pi))  pi/4 < r < pi/2
                     0                          r >= pi/2
    highpass H(r)  = 0                          r <= pi/4
                     cos((pi/2) log2(2r/pi))    pi/4 < r < pi/2
                     1                          r >= pi/2
    angular  G_k(t) = alpha_K cos(t - pi k/K)^(K-1) on a half-open
                      half-plane window, 0 elsewhere
    band     B_k(r, t) = H(r) G_k(t)
    L0(r) = L(r/2)/2,  H0(r) = H(r/2)

The high-pass constant branches are the unique continuous completion of
the cosine segment; they make H(r)^2 + (L(r)/2)^2 = 1 hold identically,
which is what perfect reconstruction rests on.

Conventions: forward FFT unscaled, inverse scaled by 1/(s*s); all filter
grids are stored in fftshift layout; downsampling crops the central
half-band (with a 1/4 scale so it equals ideal decimation of band-limited
content); the DC sample routes entirely to the low-pass path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

MIN_COARSE_SIZE = 4  # smallest usable low-pass residual grid


@dataclass(frozen=True)
class PyramidParams:
    """Decomposition depth and orientation count."""

    n_scales: int
    n_orientations: int

    def __post_init__(self):
        if self.n_scales < 1:
            raise ValueError(f"n_scales must be >= 1, got {self.n_scales}")
        if self.n_orientations < 1:
            raise ValueError(f"n_orientations must be >= 1, got {self.n_orientations}")


@dataclass
class Pyramid:
    """Complete decomposition of one image.

    bands[n][k] holds the complex spatial coefficients of scale n+1,
    orientation k, sampled at side/2^n. The residuals are real images:
    the low-pass at side/2^N and the high-pass at full resolution.
    """

    params: PyramidParams
    size: int
    bands: list[list[np.ndarray]]
    lowpass_residual: np.ndarray
    highpass_residual: np.ndarray


def radial_lowpass(r):
    """Low-pass radial gain, range [0, 2]."""
    r = np.asarray(r, dtype=np.float64)
    out = np.zeros_like(r)
    out[r <= np.pi / 4] = 2.0
    mid = (r > np.pi / 4) & (r < np.pi / 2)
    out[mid] = 2.0 * np.cos(np.pi / 2 * np.log2(4.0 * r[mid] / np.pi))
    return out


def radial_highpass(r):
    """High-pass radial gain, range [0, 1]; satisfies H^2 + (L/2)^2 = 1."""
    r = np.asarray(r, dtype=np.float64)
    out = np.zeros_like(r)
    out[r >= np.pi / 2] = 1.0
    mid = (r > np.pi / 4) & (r < np.pi / 2)
    out[mid] = np.cos(np.pi / 2 * np.log2(2.0 * r[mid] / np.pi))
    return out


def angular_alpha(n_orientations: int) -> float:
    """Normalization making the oriented gains tile the angle axis."""
    k = n_orientations
    return 2.0 ** (k - 1) * math.factorial(k - 1) / math.sqrt(k * math.factorial(2 * (k - 1)))


def angular_gain(k: int, n_orientations: int, theta):
    """Oriented angular gain for orientation k of n_orientations.

    Nonzero on the half-open window -pi/2 <= wrap(theta - pi k/K) < pi/2;
    the half-open convention keeps the Hermitian tiling identity
    sum_k G_k(t)^2 + G_k(t+pi)^2 = 1 exact at window edges.
    """
    kk = n_orientations
    if not 0 <= k < kk:
        raise ValueError(f"orientation index {k} out of range for K={kk}")
    theta = np.asarray(theta, dtype=np.float64)
    d = np.mod(theta - np.pi * k / kk + np.pi, 2.0 * np.pi) - np.pi
    out = np.zeros_like(d)
    sel = (d >= -np.pi / 2) & (d < np.pi / 2)
    out[sel] = angular_alpha(kk) * np.cos(d[sel]) ** (kk - 1)
    return out


def _freq_grid(size: int):
    """(radius, angle) grids in fftshift layout; angle at DC is 0."""
    w = 2.0 * np.pi * np.fft.fftshift(np.fft.fftfreq(size))
    wy, wx = np.meshgrid(w, w, indexing="ij")
    return np.hypot(wx, wy), np.arctan2(wy, wx)


@dataclass(frozen=True)
class FilterBank:
    """Per-level filter grids for one (size, params) combination."""

    size: int
    params: PyramidParams
    lowpass0: np.ndarray
    highpass0: np.ndarray
    lowpass: tuple[np.ndarray, ...]  # L/2 on each level grid
    bands: tuple[tuple[np.ndarray, ...], ...]  # B_k on each level grid


@lru_cache(maxsize=16)
def _bank(size: int, n_scales: int, n_orientations: int) -> FilterBank:
    params = PyramidParams(n_scales, n_orientations)
    r0, _ = _freq_grid(size)
    low0 = radial_lowpass(r0 / 2.0) / 2.0
    high0 = radial_highpass(r0 / 2.0)
    lows, bands = [], []
    for n in range(n_scales):
        r, th = _freq_grid(size >> n)
        lows.append(radial_lowpass(r) / 2.0)
        g = tuple(radial_highpass(r) * angular_gain(k, n_orientations, th)
                  for k in range(n_orientations))
        bands.append(g)
    for a in (low0, high0, *lows, *(b for lv in bands for b in lv)):
        a.flags.writeable = False
    return FilterBank(size, params, low0, high0, tuple(lows), tuple(bands))


def _validate_geometry(size: int, n_scales: int) -> None:
    if size < 2 or size & (size - 1):
        raise ValueError(f"image side must be a power of two, got {size}")
    if size >> n_scales < MIN_COARSE_SIZE:
        raise ValueError(
            f"{n_scales} scales leave a {size >> n_scales} px residual for a "
            f"{size} px image; need at least {MIN_COARSE_SIZE} px")


def _decimate(spec: np.ndarray) -> np.ndarray:
    """Exact half-band decimation: central crop scaled by 1/4."""
    q = spec.shape[0] // 4
    return spec[q:3 * q, q:3 * q] * 0.25


def _interpolate(spec: np.ndarray) -> np.ndarray:
    """Exact 2x band-limited interpolation: zero-pad scaled by 4."""
    s = spec.shape[0]
    out = np.zeros((2 * s, 2 * s), dtype=spec.dtype)
    out[s // 2:3 * s // 2, s // 2:3 * s // 2] = spec * 4.0
    return out


def _mirror(spec: np.ndarray) -> np.ndarray:
    """Map each frequency sample to its negated frequency, conjugated."""
    return np.conj(np.roll(spec[::-1, ::-1], 1, axis=(0, 1)))


def _symmetrize(spec: np.ndarray) -> np.ndarray:
    """Hermitian completion of half-plane band content: Z + conj(Z(-w))."""
    return spec + _mirror(spec)


def _fft(img: np.ndarray) -> np.ndarray:
    return np.fft.fftshift(np.fft.fft2(img))


def _ifft(spec: np.ndarray) -> np.ndarray:
    return np.fft.ifft2(np.fft.ifftshift(spec))


def build_pyramid(img, params: PyramidParams) -> Pyramid:
    """Decompose a square power-of-two image into oriented band grids."""
    a = np.asarray(img, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"pyramid input must be square, got shape {a.shape}")
    size = a.shape[0]
    _validate_geometry(size, params.n_scales)
    bank = _bank(size, params.n_scales, params.n_orientations)

    spec = _fft(a)
    high = _ifft(bank.highpass0 * spec).real
    cur = bank.lowpass0 * spec
    bands = []
    for n in range(params.n_scales):
        bands.append([_ifft(b * cur) for b in bank.bands[n]])
        cur = _decimate(bank.lowpass[n] * cur)
    low = _ifft(cur).real
    return Pyramid(params, size, bands, low, high)


def collapse(pyr: Pyramid) -> np.ndarray:
    """Exact synthesis back to the source resolution."""
    params = pyr.params
    bank = _bank(pyr.size, params.n_scales, params.n_orientations)
    expect = pyr.size >> params.n_scales
    if pyr.lowpass_residual.shape != (expect, expect):
        raise ValueError(
            f"low-pass residual shape {pyr.lowpass_residual.shape} does not "
            f"match {expect}x{expect}")

    spec = _fft(pyr.lowpass_residual)
    for n in range(params.n_scales - 1, -1, -1):
        level = pyr.size >> n
        spec = bank.lowpass[n] * _interpolate(spec)
        for k, band in enumerate(pyr.bands[n]):
            if band.shape != (level, level):
                raise ValueError(
                    f"band ({n + 1},{k}) shape {band.shape} does not match "
                    f"{level}x{level}")
            spec += _symmetrize(bank.bands[n][k] * _fft(band))
    out = bank.lowpass0 * spec + bank.highpass0 * _fft(pyr.highpass_residual)
    return _ifft(out).real


def _lift(spec: np.ndarray, bank: FilterBank, from_scale: int) -> np.ndarray:
    """Carry a level-`from_scale` spectrum up the synthesis chain."""
    for m in range(from_scale - 1, -1, -1):
        spec = bank.lowpass[m] * _interpolate(spec)
    return np.fft.ifft2(np.fft.ifftshift(bank.lowpass0 * spec)).real


def reconstruct_band(pyr: Pyramid, scale: int, orientation: int) -> np.ndarray:
    """Back-project one band through the synthesis path, others zeroed.

    `scale` is 1-based (1 = finest); returns a real full-resolution image.
    """
    params = pyr.params
    if not 1 <= scale <= params.n_scales:
        raise IndexError(f"scale {scale} out of range 1..{params.n_scales}")
    if not 0 <= orientation < params.n_orientations:
        raise IndexError(
            f"orientation {orientation} out of range 0..{params.n_orientations - 1}")
    bank = _bank(pyr.size, params.n_scales, params.n_orientations)
    spec = _symmetrize(bank.bands[scale - 1][orientation]
                       * _fft(pyr.bands[scale - 1][orientation]))
    return _lift(spec, bank, scale - 1)


def reconstruct_lowpass(pyr: Pyramid) -> np.ndarray:
    """Back-project the low-pass residual to full resolution."""
    bank = _bank(pyr.size, pyr.params.n_scales, pyr.params.n_orientations)
    return _lift(_fft(pyr.lowpass_residual), bank, pyr.params.n_scales)


def reconstruct_highpass(pyr: Pyramid) -> np.ndarray:
    """Back-project the high-pass residual to full resolution."""
    bank = _bank(pyr.size, pyr.params.n_scales, pyr.params.n_orientations)
    return _ifft(bank.highpass0 * _fft(pyr.highpass_residual)).real


class TransferStack:
    """Full-resolution composite transfer functions for one decomposition.

    Every real image the statistics consume is the source image passed
    through one circular filter with a real transfer; this object holds
    those transfers plus the single-pass analysis transfers that produce
    the complex band coefficients. Because the transfers are real, each
    filtering map is self-adjoint, which is what the analytic gradient
    of the statistics relies on.
    """

    def __init__(self, size: int, params: PyramidParams):
        _validate_geometry(size, params.n_scales)
        self.size = size
        self.params = params
        n_sc, n_or = params.n_scales, params.n_orientations
        r, th = _freq_grid(size)
        self.lowpass0 = radial_lowpass(r / 2.0) / 2.0
        self.highpass0 = radial_highpass(r / 2.0)
        self.high_recon = self.highpass0 ** 2
        self.angular = [angular_gain(k, n_or, th) for k in range(n_or)]
        # G_k at the negated frequency, taken by index so it folds exactly
        # the way Hermitian completion of the half-plane bands does
        ang_sym = [g ** 2 + np.roll(g[::-1, ::-1], 1, axis=(0, 1)) ** 2
                   for g in self.angular]

        chain = self.lowpass0.copy()
        self.band_analysis = []  # [n][k], single analysis pass
        self.band_recon = []     # [n][k], analysis+synthesis round trip
        self.scale_recon = []    # [n], sum of the scale's band round trips
        for n in range(n_sc):
            h = radial_highpass(r * 2.0 ** n)
            self.band_analysis.append([chain * h * g for g in self.angular])
            self.band_recon.append([chain ** 2 * h ** 2 * a for a in ang_sym])
            self.scale_recon.append(chain ** 2 * h ** 2)
            chain = chain * (radial_lowpass(r * 2.0 ** n) / 2.0)
        self.low_analysis = chain
        self.low_recon = chain ** 2
        self.oriented_low_recon = [g * self.low_recon for g in self.angular]
        # instances are cached and shared; freeze every grid
        for arr in (self.lowpass0, self.highpass0, self.high_recon,
                    self.low_analysis, self.low_recon, *self.angular,
                    *self.scale_recon, *self.oriented_low_recon,
                    *(t for lv in self.band_analysis for t in lv),
                    *(t for lv in self.band_recon for t in lv)):
            arr.flags.writeable = False

    def filter_image(self, img: np.ndarray, transfer: np.ndarray) -> np.ndarray:
        """Apply a real transfer; also the adjoint of the same map."""
        return _ifft(transfer * _fft(img)).real

    def band_grid(self, spec: np.ndarray, scale: int, orientation: int) -> np.ndarray:
        """Complex band coefficients at the scale's own resolution.

        `spec` is the fftshifted spectrum of the source image; nesting of
        the per-level central crops collapses into one crop here.
        """
        n = scale - 1
        z = self.band_analysis[n][orientation] * spec
        if n:
            small = self.size >> n
            q = (self.size - small) // 2
            z = z[q:q + small, q:q + small] * 0.25 ** n
        return _ifft(z)

    def band_grid_adjoint(self, cot: np.ndarray, scale: int, orientation: int) -> np.ndarray:
        """Adjoint of band_grid for a complex cotangent grid."""
        n = scale - 1
        spec = _fft(cot)
        if n:
            full = np.zeros((self.size, self.size), dtype=spec.dtype)
            q = (self.size - spec.shape[0]) // 2
            full[q:q + spec.shape[0], q:q + spec.shape[0]] = spec
            spec = full
        return _ifft(self.band_analysis[n][orientation] * spec).real


@lru_cache(maxsize=16)
def transfer_stack(size: int, n_scales: int, n_orientations: int) -> TransferStack:
    return TransferStack(size, PyramidParams(n_scales, n_orientations))


def upsample_to(img: np.ndarray, size: int) -> np.ndarray:
    """Band-limited interpolation of a real image onto a finer square grid."""
    small = img.shape[0]
    if size == small:
        return img
    if size < small or size % small:
        raise ValueError(f"cannot upsample {small} -> {size}")
    spec = _fft(img)
    out = np.zeros((size, size), dtype=spec.dtype)
    q = (size - small) // 2
    out[q:q + small, q:q + small] = spec * (size / small) ** 2
    return _ifft(out).real


def upsample_to_adjoint(cot: np.ndarray, small: int) -> np.ndarray:
    """Adjoint of upsample_to: central spectral crop, no rescaling."""
    size = cot.shape[0]
    if size == small:
        return cot
    spec = _fft(cot)
    q = (size - small) // 2
    return _ifft(spec[q:q + small, q:q + small]).real
