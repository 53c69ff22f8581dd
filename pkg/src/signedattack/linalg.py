"""Dense decompositions and matrix exponentials used by the graph models.

``matrix_exp`` is a composite of tape primitives (scaling and squaring with
a truncated Taylor series), so it differentiates by construction.
``sym_matrix_exp`` is a single recorded primitive whose backward pass applies
the divided-difference rule on the eigenbasis, which is both exact and much
cheaper than unrolling the Taylor recurrence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import tape as tp
from .errors import NumericError

# Taylor order for the scaled exponential; ~1e-12 accuracy once the scaled
# one-norm is at most 0.5.
EXP_TAYLOR_ORDER = 12
# Eigenvalue gaps below this switch the divided difference to its limit.
DEGENERATE_EIG_TOL = 1e-9


@dataclass
class SpectralDecomposition:
    """Eigenpairs of a symmetric matrix, eigenvalues ascending."""

    Q: np.ndarray
    lam: np.ndarray


def _fix_column_signs(M):
    """Flip column signs so each column's largest-magnitude entry is positive."""
    idx = np.argmax(np.abs(M), axis=0)
    signs = np.sign(M[idx, np.arange(M.shape[1])])
    signs[signs == 0] = 1.0
    return signs


def sym_eig(S: np.ndarray) -> SpectralDecomposition:
    """Eigendecomposition of (S + S^T)/2 with deterministic eigenvector signs."""
    S = np.asarray(S, dtype=float)
    Ssym = 0.5 * (S + S.T)
    try:
        lam, Q = np.linalg.eigh(Ssym)
    except np.linalg.LinAlgError as e:
        residual = float(np.abs(S - S.T).max())
        raise NumericError(
            f"eigendecomposition failed (asymmetry residual {residual:g}): {e}"
        ) from e
    Q = Q * _fix_column_signs(Q)
    return SpectralDecomposition(Q=Q, lam=lam)


def matrix_exp(A, order: int = EXP_TAYLOR_ORDER):
    """exp(A) by scaling and squaring with a truncated Taylor series.

    Works on plain arrays and on tape Values; every step is a recorded
    primitive. The scaling s is chosen so the scaled one-norm is <= 0.5.
    """
    Ad = tp._data(A)
    n = Ad.shape[0]
    if Ad.shape[0] != Ad.shape[1]:
        raise NumericError("matrix_exp requires a square matrix")
    norm1 = float(np.abs(Ad).sum(axis=0).max())
    s = 0 if norm1 <= 0.5 else int(math.ceil(math.log2(norm1 / 0.5)))
    B = tp.mul(A, 0.5 ** s)
    eye = np.eye(n)
    # Horner evaluation of I + B + B^2/2! + ... + B^order/order!
    T = eye
    for k in range(order, 0, -1):
        T = tp.add(eye, tp.matmul(tp.mul(B, 1.0 / k), T))
    for _ in range(s):
        T = tp.matmul(T, T)
    return T


def sym_matrix_exp(S):
    """exp of a symmetric matrix via its eigendecomposition.

    The input is symmetrized as (S + S^T)/2 first (on the tape when S is a
    Value). Backward propagates G through Q (Gamma o (Q^T G Q)) Q^T where
    Gamma holds divided differences of exp over the eigenvalue pairs, with
    the exp(lambda) limit on (near-)degenerate pairs.
    """
    if not tp._is_value(S):
        dec = sym_eig(S)
        return (dec.Q * np.exp(dec.lam)) @ dec.Q.T

    Ssym = tp.mul(tp.add(S, tp.transpose(S)), 0.5)
    dec = sym_eig(Ssym.data)
    Q, lam = dec.Q, dec.lam
    elam = np.exp(lam)
    out_data = (Q * elam) @ Q.T

    def vjp(g):
        if not Ssym.requires_grad:
            return
        diff = lam[:, None] - lam[None, :]
        near = np.abs(diff) < DEGENERATE_EIG_TOL
        safe = np.where(near, 1.0, diff)
        gamma = np.where(near,
                         np.exp(0.5 * (lam[:, None] + lam[None, :])),
                         np.expm1(safe) / safe * elam[None, :])
        gt = Q.T @ g @ Q
        Ssym._accumulate(Q @ (gamma * gt) @ Q.T)

    return tp._record(Ssym.tape, out_data, vjp, Ssym.requires_grad)


def truncated_svd(A: np.ndarray, d: int):
    """Top-d singular triplets with the deterministic sign convention.

    Returns (U, sigma, V) with sigma descending; A ~= U diag(sigma) V^T.
    """
    A = np.asarray(A, dtype=float)
    if d > min(A.shape):
        raise NumericError(f"svd rank {d} exceeds min matrix dimension {min(A.shape)}")
    try:
        U, sigma, Vt = np.linalg.svd(A, full_matrices=False)
    except np.linalg.LinAlgError as e:
        raise NumericError(f"svd failed to converge: {e}") from e
    U, sigma, V = U[:, :d], sigma[:d], Vt[:d].T
    signs = _fix_column_signs(U)
    return U * signs, sigma, V * signs
