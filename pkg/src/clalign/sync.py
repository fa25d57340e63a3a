"""Combine per-projection orientation estimates into one rotation.

Given rotations ``R_i`` used to project the second volume and estimates
``Rt_i`` of the same images' orientations relative to the first volume, every
``Rt_i R_i^T`` estimates ``g_i O`` for some unknown symmetry element ``g_i``.
The ``g_i`` are synchronized through the top eigenvectors of the block matrix
``H_ij = X_i^T X_j``; the aligned estimates are then averaged on SO(3).
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)

J = np.diag([1.0, 1.0, -1.0])


class DegenerateSpectrumWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class SyncProblem:
    R: np.ndarray
    Rt: np.ndarray
    reflected: bool = False

    def __post_init__(self):
        R = np.asarray(self.R, dtype=np.float64).reshape(-1, 3, 3)
        Rt = np.asarray(self.Rt, dtype=np.float64).reshape(-1, 3, 3)
        if len(R) != len(Rt) or len(R) < 2:
            raise ValueError("need matching lists of at least two rotations")
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "Rt", Rt)


@dataclass
class SyncResult:
    O_est: np.ndarray
    g_est: np.ndarray
    eigengap: float
    eigenvalues: np.ndarray = field(repr=False, default=None)
    warnings: list = field(default_factory=list)


def nearest_rotation(M) -> np.ndarray:
    """Closest special-orthogonal matrix to ``M`` in Frobenius norm."""
    U, s, Vt = np.linalg.svd(M)
    if np.linalg.det(U @ Vt) < 0:
        U[:, -1] = -U[:, -1]
    return U @ Vt


def nearest_orthogonal(M) -> np.ndarray:
    U, _, Vt = np.linalg.svd(M)
    return U @ Vt


def build_X(p: SyncProblem) -> np.ndarray:
    """``X_i = R_i Rt_i^T``, or ``J R_i J Rt_i^T`` for the reflected branch."""
    R = J @ p.R @ J if p.reflected else p.R
    return R @ np.transpose(p.Rt, (0, 2, 1))


def build_H(X) -> np.ndarray:
    N = len(X)
    # block (i, j) = X_i^T X_j
    H = np.einsum("iab,jac->ibjc", X, X).reshape(3 * N, 3 * N)
    return 0.5 * (H + H.T)


def svd_rotation_average(Os) -> np.ndarray:
    """Rotation minimizing ``sum ||O_i - R||_F^2``: the SO(3) polar factor of the mean."""
    Os = np.asarray(Os, dtype=np.float64).reshape(-1, 3, 3)
    if len(Os) == 0:
        raise ValueError("need at least one rotation")
    M = Os.mean(axis=0)
    s = np.linalg.svd(M, compute_uv=False)
    if s[-1] <= 1e-12 * max(s[0], 1.0):
        raise ValueError("mean of rotations is rank deficient; average undefined")
    return nearest_rotation(M)


def relative_elements(V) -> np.ndarray:
    """``g_i = V_i V_1^T`` after projecting every 3x3 block onto SO(3).

    A global sign flip of ``V`` first makes ``det(V_1) > 0``; after that each
    block is snapped to the nearest rotation, so every ``g_i`` is a rotation
    whatever mixing matrix the eigensolver returned.
    """
    N = V.shape[0] // 3
    blocks = V.reshape(N, 3, 3)
    if np.linalg.det(blocks[0]) < 0:
        blocks = -blocks
    blocks = np.stack([nearest_rotation(b) for b in blocks])
    return blocks @ blocks[0].T


def synchronize(p: SyncProblem) -> SyncResult:
    N = len(p.R)
    X = build_X(p)
    H = build_H(X)
    w, U = np.linalg.eigh(H)
    order = np.argsort(w)[::-1]
    w = w[order]
    V = U[:, order[:3]]
    gap = float(w[2] - w[3]) if len(w) > 3 else float(w[2])
    notes = []
    if gap <= 1e-6 * N:
        msg = f"degenerate synchronization spectrum (eigengap {gap:.3g})"
        warnings.warn(msg, DegenerateSpectrumWarning, stacklevel=2)
        notes.append(msg)
    g = relative_elements(V)
    # O_i = g_i^T X_i^T in both branches
    Os = np.transpose(g, (0, 2, 1)) @ np.transpose(X, (0, 2, 1))
    return SyncResult(svd_rotation_average(Os), g, gap, w, notes)
