"""Pure numpy implementations of the hot kernels.

Signatures match the compiled ``_kernels`` extension exactly; ``_backend``
picks one at import time.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def potential_derivs(rho: np.ndarray, B: np.ndarray, logw: np.ndarray):
    """Log-sum-exp potential, its gradient and Hessian at a batch of points.

    rho: (n, m); B: (k, m) lattice points; logw: (k,) log |c|^2.
    Returns f (n,), grad (n, m), hess (n, m, m).  The Hessian is accumulated
    as a centred covariance to avoid cancellation far out on the orbit.
    """
    rho = np.ascontiguousarray(rho, dtype=float)
    logits = rho @ B.T + logw
    top = logits.max(axis=1, keepdims=True)
    e = np.exp(logits - top)
    s = e.sum(axis=1, keepdims=True)
    w = e / s
    f = top[:, 0] + np.log(s[:, 0])
    grad = w @ B
    X = B[None, :, :] - grad[:, None, :]
    hess = np.einsum("nk,nki,nkj->nij", w, X, X)
    return f, grad, hess


def _det(h: np.ndarray) -> np.ndarray:
    m = h.shape[-1]
    if m == 1:
        return h[:, 0, 0]
    if m == 2:
        return h[:, 0, 0] * h[:, 1, 1] - h[:, 0, 1] * h[:, 1, 0]
    return np.linalg.det(h)


def log_hessian_det(rho: np.ndarray, B: np.ndarray, logw: np.ndarray) -> np.ndarray:
    _, _, hess = potential_derivs(rho, B, logw)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.log(np.maximum(_det(hess), 0.0))


def norm_log_integrand(
    rho: np.ndarray, B: np.ndarray, logw: np.ndarray, alpha: np.ndarray, N: float
) -> np.ndarray:
    """<alpha, rho> - N f(rho) + log det Hess f(rho) at each row of rho."""
    f, _, hess = potential_derivs(rho, B, logw)
    with np.errstate(divide="ignore", invalid="ignore"):
        logdet = np.log(np.maximum(_det(hess), 0.0))
    return rho @ np.asarray(alpha, dtype=float) - N * f + logdet


def convolve_shift_add(src: np.ndarray, dst: np.ndarray, shifts: np.ndarray) -> None:
    """dst[x + s] += src[x] for every shift s, truncated to dst's 3-D box."""
    S0, S1, S2 = src.shape
    for a, b, c in shifts:
        dst[a:, b:, c:] += src[: S0 - a, : S1 - b, : S2 - c]
