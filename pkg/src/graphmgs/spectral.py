"""Graph Laplacians, a cyclic-Jacobi symmetric eigensolver, and eigenvalue fingerprints."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, NumericError
from .graphs import LabeledGraph

COMBINATORIAL = "combinatorial"
SYM_NORMALIZED = "sym_normalized"
LAPLACIAN_KINDS = (COMBINATORIAL, SYM_NORMALIZED)

JACOBI_TOL = 1e-10
JACOBI_MAX_SWEEPS = 100


@dataclass(frozen=True)
class LaplacianMatrix:
    kind: str
    matrix: np.ndarray


@dataclass(frozen=True)
class SpectralFingerprint:
    """Top-k Laplacian eigenvalues, descending, zero-padded when the graph
    has fewer than k nodes."""

    eigenvalues: tuple[float, ...]
    k: int


def laplacian(g: LabeledGraph, kind: str = COMBINATORIAL) -> LaplacianMatrix:
    """Dense Laplacian: D - A, or I - D^{-1/2} A D^{-1/2} (isolated nodes get
    a zero D^{-1/2} entry, leaving the identity term)."""
    if kind not in LAPLACIAN_KINDS:
        raise DataError(f"unknown laplacian kind {kind!r}")
    if g.node_count < 1:
        raise DataError(f"graph {g.id!r}: laplacian needs at least one node")
    a = g.adjacency()
    deg = g.degrees().astype(np.float64)
    if kind == COMBINATORIAL:
        return LaplacianMatrix(kind, np.diag(deg) - a)
    with np.errstate(divide="ignore"):
        dinv = np.where(deg > 0, 1.0 / np.sqrt(np.where(deg > 0, deg, 1.0)), 0.0)
    lap = np.eye(g.node_count) - (dinv[:, None] * a) * dinv[None, :]
    return LaplacianMatrix(kind, lap)


def _offdiag_norm(a: np.ndarray) -> float:
    off = a - np.diag(np.diag(a))
    return float(np.sqrt(np.sum(off * off)))


def symmetric_eigenvalues(m: np.ndarray, tol: float = JACOBI_TOL,
                          max_sweeps: int = JACOBI_MAX_SWEEPS) -> np.ndarray:
    """All eigenvalues of a symmetric matrix, ascending.

    Cyclic Jacobi: sweep the strict upper triangle in row order, rotating each
    pivot to zero, until the off-diagonal Frobenius norm drops below ``tol``.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DataError(f"eigensolver: expected square matrix, got {m.shape}")
    if m.size and float(np.max(np.abs(m - m.T))) > 1e-10:
        raise DataError("eigensolver: matrix is not symmetric within 1e-10")
    n = m.shape[0]
    if n == 1:
        return m.diagonal().copy()
    a = m.copy()
    for _ in range(max_sweeps):
        if _offdiag_norm(a) < tol:
            return np.sort(np.diag(a))
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = 0.0
                a[q, p] = 0.0
    if _offdiag_norm(a) < tol:
        return np.sort(np.diag(a))
    raise NumericError(f"jacobi eigensolver did not converge in {max_sweeps} sweeps")


def spectral_fingerprint(g: LabeledGraph, k: int,
                         kind: str = COMBINATORIAL) -> SpectralFingerprint:
    """k largest Laplacian eigenvalues, descending; negatives within roundoff
    are clamped to zero."""
    if k < 1:
        raise DataError(f"spectral fingerprint: k must be >= 1, got {k}")
    lap = laplacian(g, kind)
    eig = symmetric_eigenvalues(lap.matrix)
    top = np.maximum(eig[::-1][:k], 0.0)
    values = list(top) + [0.0] * (k - len(top))
    return SpectralFingerprint(eigenvalues=tuple(float(v) for v in values), k=k)
