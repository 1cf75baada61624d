"""Scaled dot-product attention over per-agent message encodings.

For critic ``i`` the weights are ``softmax_j(e_i . e_j / sqrt(d_k))`` and the
critic input is ``[e_i, w_1 e_1, ..., w_N e_N]``.
"""

from __future__ import annotations

import numpy as np

from ..errors import ContractError


def _softmax(scores):
    z = scores - scores.max(axis=-1, keepdims=True)
    w = np.exp(z)
    return w / w.sum(axis=-1, keepdims=True)


def attention_weights(e_i, all_e) -> np.ndarray:
    """Weights of each encoding in ``all_e`` as seen from ``e_i`` (single sample)."""
    e_i = np.asarray(e_i, dtype=float).ravel()
    all_e = np.atleast_2d(np.asarray(all_e, dtype=float))
    if all_e.shape[1] != e_i.size:
        raise ContractError(f"encoding dimension mismatch: {e_i.size} vs {all_e.shape[1]}")
    return _softmax(all_e @ e_i / np.sqrt(e_i.size))


def attend(E: np.ndarray, i: int):
    """Critic input for agent ``i`` from encodings ``E`` of shape (B, N, d).

    Returns ``(X, cache)`` with ``X`` of shape (B, (N + 1) d).
    """
    B, N, d = E.shape
    ei = E[:, i, :]
    w = _softmax(np.einsum("bd,bnd->bn", ei, E) / np.sqrt(d))
    X = np.concatenate([ei, (w[:, :, None] * E).reshape(B, N * d)], axis=1)
    return X, (E, i, w)


def attend_backward(cache, dX: np.ndarray) -> np.ndarray:
    """Gradient w.r.t. ``E`` given the gradient w.r.t. the critic input."""
    E, i, w = cache
    B, N, d = E.shape
    dweighted = dX[:, d:].reshape(B, N, d)
    dE = w[:, :, None] * dweighted
    dw = np.einsum("bnd,bnd->bn", dweighted, E)
    ds = w * (dw - (w * dw).sum(axis=1, keepdims=True)) / np.sqrt(d)
    dE += ds[:, :, None] * E[:, i, None, :]
    dE[:, i, :] += np.einsum("bn,bnd->bd", ds, E) + dX[:, :d]
    return dE
