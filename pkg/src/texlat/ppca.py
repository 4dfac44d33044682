"""Probabilistic PCA with the closed-form maximum-likelihood solution.

The model is x = W z + mu + noise with isotropic Gaussian noise of
variance sigma^2. Fitting eigendecomposes the population covariance
(via the n x n Gram matrix when samples are scarcer than dimensions),
sets sigma^2 to the mean of the discarded eigenvalues and scales the
leading eigenvectors into the loading matrix. The rotation ambiguity is
fixed to the identity and eigenvector signs are pinned, so fits are
reproducible and serializable.

Encoding returns the posterior mean; decoding applies the inverse
scaling that makes decode(encode(x)) the orthogonal projection of x
onto the principal subspace.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class PpcaModel:
    mean: np.ndarray       # (dim,)
    loadings: np.ndarray   # (dim, q)
    noise_var: float
    eigenvalues: np.ndarray  # (dim,), non-increasing
    q: int

    @property
    def dim(self) -> int:
        return self.mean.size


def _sample_eig(data: np.ndarray):
    """Mean, full eigenvalue spectrum and eigenvectors of the covariance.

    Eigenvalues come back non-increasing, padded with zeros past the
    data rank; eigenvector columns past the rank are zero (their
    loadings vanish anyway). Signs are fixed so each eigenvector's
    largest-magnitude entry is positive.
    """
    n, dim = data.shape
    mu = data.mean(axis=0)
    centered = data - mu
    if dim <= n:
        cov = centered.T @ centered / n
        w, v = np.linalg.eigh(cov)
        order = np.argsort(w)[::-1]
        eigvals = np.maximum(w[order], 0.0)
        vecs = v[:, order]
    else:
        gram = centered @ centered.T / n
        w, v = np.linalg.eigh(gram)
        order = np.argsort(w)[::-1]
        gvals = np.maximum(w[order], 0.0)
        gvecs = v[:, order]
        eigvals = np.zeros(dim)
        eigvals[:n] = gvals
        vecs = np.zeros((dim, dim))
        tol = max(gvals[0], 1.0) * n * np.finfo(float).eps
        keep = gvals > tol
        vecs[:, :n][:, keep] = centered.T @ (gvecs[:, keep] / np.sqrt(n * gvals[keep]))
    signs = np.where(vecs[np.argmax(np.abs(vecs), axis=0), np.arange(dim)] < 0, -1.0, 1.0)
    return mu, eigvals, vecs * signs


def _model_from_eig(mu, eigvals, vecs, q: int) -> PpcaModel:
    dim = mu.size
    sigma2 = float(eigvals[q:].mean()) if q < dim else 0.0
    sigma2 = max(sigma2, 0.0)
    scale = np.sqrt(np.maximum(eigvals[:q] - sigma2, 0.0))
    return PpcaModel(mu, vecs[:, :q] * scale, sigma2, eigvals, q)


def fit(data, q: int) -> PpcaModel:
    """Maximum-likelihood fit with q latent dimensions.

    Requires n >= 2 samples and 1 <= q <= dim; when q exceeds the data
    rank the extra latent directions carry zero loadings.
    """
    x = np.asarray(data, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError(f"need a 2-D data matrix with n >= 2, got shape {x.shape}")
    if not np.isfinite(x).all():
        raise ValueError("data contains non-finite entries")
    if not 1 <= q <= x.shape[1]:
        raise ValueError(f"latent dimension {q} out of range 1..{x.shape[1]}")
    return _model_from_eig(*_sample_eig(x), q)


def encode(model: PpcaModel, x) -> np.ndarray:
    """Posterior mean of the latent: (W'W + sigma^2 I)^-1 W' (x - mu)."""
    xv = np.asarray(x, dtype=np.float64)
    if xv.shape[-1] != model.dim:
        raise ValueError(f"input dimension {xv.shape[-1]} != model dimension {model.dim}")
    w = model.loadings
    m = w.T @ w + model.noise_var * np.eye(model.q)
    rhs = (xv - model.mean) @ w
    if model.noise_var > 0:
        return np.linalg.solve(m, rhs.T).T
    return (np.linalg.pinv(m) @ rhs.T).T


def decode(model: PpcaModel, z) -> np.ndarray:
    """Map latents back so decode(encode(x)) projects onto the subspace."""
    zv = np.asarray(z, dtype=np.float64)
    if zv.shape[-1] != model.q:
        raise ValueError(f"latent dimension {zv.shape[-1]} != model q {model.q}")
    w = model.loadings
    if model.noise_var > 0:
        wtw = w.T @ w
        try:
            scale = np.linalg.solve(wtw, wtw + model.noise_var * np.eye(model.q))
            return zv @ scale.T @ w.T + model.mean
        except np.linalg.LinAlgError:
            pass  # rank-deficient loadings: plain generative map
    return zv @ w.T + model.mean


def cumulative_contribution(eigenvalues) -> np.ndarray:
    """Running fraction of total eigenvalue mass; ends at exactly 1."""
    lam = np.asarray(eigenvalues, dtype=np.float64)
    if lam.ndim != 1 or lam.size == 0:
        raise ValueError("eigenvalues must be a non-empty 1-D vector")
    if (lam < 0).any():
        raise ValueError("eigenvalues must be non-negative")
    if (np.diff(lam) > 0).any():
        raise ValueError("eigenvalues must be sorted non-increasing")
    total = lam.sum()
    if total <= 0:
        raise ValueError("eigenvalue spectrum is identically zero")
    ccr = np.cumsum(lam)
    return ccr / ccr[-1]


def choose_dim(eigenvalues, threshold: float) -> int:
    """Smallest q whose cumulative contribution reaches the threshold."""
    if not 0 < threshold <= 1:
        raise ValueError(f"threshold must be in (0, 1], got {threshold}")
    ccr = cumulative_contribution(eigenvalues)
    return int(np.argmax(ccr >= threshold)) + 1
