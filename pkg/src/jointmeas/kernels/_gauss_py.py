"""Pure-numpy shot sampler for Gaussian states (batched over shots).

Reference semantics for the compiled kernel: given a state covariance, the
round's orthogonal matrix, per-shot monomial masks X and per-pair uniforms,
produce the pair outcomes of protocol steps (i)-(iii).  Per shot the state
covariance becomes ``R^T (S_X Gamma S_X) R`` and the standard pairs are
sampled sequentially with the Schur-complement conditioning update.
"""

from __future__ import annotations

import numpy as np

PROBABILITY_SLACK = 1e-9


def sample_rotated_shots(
    gamma0: np.ndarray,
    rot: np.ndarray,
    x_masks: np.ndarray,
    uniforms: np.ndarray,
    chunk: int = 2048,
) -> np.ndarray:
    """Pair outcomes for each shot, packed as uint64 masks (bit i set iff q_{i+1} = -1)."""
    d = gamma0.shape[0]
    n_pairs = d // 2
    n_shots = x_masks.shape[0]
    if uniforms.shape != (n_shots, n_pairs):
        raise ValueError(f"uniforms must have shape ({n_shots}, {n_pairs})")
    out = np.zeros(n_shots, dtype=np.uint64)
    bit_of_mode = np.uint64(1) << np.arange(d, dtype=np.uint64)
    for lo in range(0, n_shots, chunk):
        hi = min(lo + chunk, n_shots)
        xm = x_masks[lo:hi]
        signs = np.where((xm[:, None] & bit_of_mode[None, :]) != 0, -1.0, 1.0)
        g = signs[:, :, None] * signs[:, None, :] * gamma0[None, :, :]
        g = np.einsum("lj,slk,km->sjm", rot, g, rot, optimize=True)
        qneg = np.zeros(hi - lo, dtype=np.uint64)
        for i in range(n_pairs):
            a, b = 2 * i, 2 * i + 1
            mean = g[:, a, b]
            p_plus = 0.5 * (1.0 + mean)
            if np.any(p_plus < -PROBABILITY_SLACK) or np.any(p_plus > 1.0 + PROBABILITY_SLACK):
                raise ArithmeticError("pair probability outside [0,1]: unphysical state")
            p_plus = np.clip(p_plus, 0.0, 1.0)
            q = np.where(uniforms[lo:hi, i] < p_plus, 1.0, -1.0)
            qneg |= np.where(q < 0.0, np.uint64(1) << np.uint64(i), np.uint64(0))
            if i + 1 == n_pairs:
                break
            coef = 1.0 / (mean + q)
            u = g[:, :, a].copy()
            v = g[:, :, b].copy()
            g += coef[:, None, None] * (
                v[:, :, None] * u[:, None, :] - u[:, :, None] * v[:, None, :]
            )
            g[:, (a, b), :] = 0.0
            g[:, :, (a, b)] = 0.0
        out[lo:hi] = qneg
    return out
