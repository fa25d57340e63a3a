"""Volumes, rigid transforms and the real-space operations on them.

A volume is a cubic ``(n, n, n)`` float array indexed ``[x, y, z]``.  The grid
center sits at voxel ``n // 2`` on every axis; rotations, reflections and
Fourier phases all refer to that voxel.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import fft, ndimage

ROTATION_TOL = 1e-10


def check_volume(v) -> np.ndarray:
    v = np.asarray(v)
    if v.ndim != 3 or len(set(v.shape)) != 1 or v.shape[0] < 1:
        raise ValueError(f"volume must be a cubic 3D array, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("volume contains non-finite values")
    return v


def check_rotation(R, tol: float = ROTATION_TOL) -> np.ndarray:
    R = np.asarray(R, dtype=np.float64)
    if R.shape != (3, 3):
        raise ValueError(f"rotation must be 3x3, got {R.shape}")
    if np.linalg.norm(R.T @ R - np.eye(3)) > tol or abs(np.linalg.det(R) - 1) > tol:
        raise ValueError("matrix is not a rotation (orthogonality/determinant check failed)")
    return R


def is_rotation(R, tol: float = ROTATION_TOL) -> bool:
    try:
        check_rotation(R, tol)
    except ValueError:
        return False
    return True


def centered_coords(n: int) -> np.ndarray:
    """Integer coordinates of the grid relative to its center, shape (3, n, n, n)."""
    r = np.arange(n, dtype=np.float64) - n // 2
    return np.stack(np.meshgrid(r, r, r, indexing="ij"))


@dataclass(frozen=True)
class RigidTransform:
    """Forward model ``out(r) = v(O J^u r - t)``, with ``u = 1`` when reflected.

    ``J`` flips the z axis.  Translations are in voxels.
    """

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    reflected: bool = False

    def __post_init__(self):
        object.__setattr__(self, "rotation", check_rotation(self.rotation, 1e-8))
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if not np.all(np.isfinite(t)):
            raise ValueError("translation must be finite")
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "reflected", bool(self.reflected))

    def linear(self) -> np.ndarray:
        """The 3x3 matrix ``O J^u``."""
        if self.reflected:
            return self.rotation * np.array([1.0, 1.0, -1.0])
        return self.rotation.copy()

    def inverse(self) -> "RigidTransform":
        # (O J^u)^{-1} = J^u O^T = (J^u O^T J^u) J^u
        flip = np.array([1.0, 1.0, -1.0]) if self.reflected else np.ones(3)
        rot = flip[:, None] * self.rotation.T * flip[None, :]
        t = -(flip * (self.rotation.T @ self.translation))
        return RigidTransform(rot, t, self.reflected)

    def scaled(self, factor: float) -> "RigidTransform":
        return RigidTransform(self.rotation, self.translation * factor, self.reflected)


def apply_transform(v, T: RigidTransform, order: int = 1) -> np.ndarray:
    """Resample ``v`` so that ``out(r) = v(O J^u r - t)`` (trilinear by default).

    Samples falling outside the grid are zero.
    """
    v = check_volume(v)
    n = v.shape[0]
    A = T.linear()
    if np.array_equal(A, np.eye(3)) and np.array_equal(T.translation, np.zeros(3)):
        return v.copy()
    r = centered_coords(n).reshape(3, -1)
    src = A @ r - T.translation[:, None] + n // 2
    out = ndimage.map_coordinates(
        v.astype(np.float64, copy=False), src, order=order, mode="grid-constant", cval=0.0
    )
    return out.reshape(v.shape)


def reflect(v) -> np.ndarray:
    """Flip the z axis about the grid center (index ``z -> 2c - z`` modulo ``n``)."""
    v = check_volume(v)
    n = v.shape[0]
    return np.roll(v[:, :, ::-1], 2 * (n // 2) - n + 1, axis=2)


def correlation(a, b) -> float:
    """Pearson correlation over all voxels; 0 when either input is constant."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"size mismatch: {a.shape} vs {b.shape}")
    a = a - a.mean()
    b = b - b.mean()
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(np.clip(np.vdot(a, b) / (na * nb), -1.0, 1.0))


def downsample(v, n_ds: int) -> np.ndarray:
    """Fourier-crop ``v`` to ``n_ds`` voxels per side, keeping intensities on scale.

    For even ``n_ds`` the unpaired Nyquist planes are dropped so the cropped
    spectrum stays Hermitian; this keeps the output real and makes the
    operation commute with :func:`reflect`.
    """
    v = check_volume(v)
    n = v.shape[0]
    if n_ds < 1 or n_ds > n:
        raise ValueError(f"n_ds must be in [1, {n}], got {n_ds}")
    if n_ds == n:
        return v.astype(np.float64, copy=True)
    F = fft.fftshift(fft.fftn(fft.ifftshift(v.astype(np.float64))))
    lo = n // 2 - n_ds // 2
    F = F[lo:lo + n_ds, lo:lo + n_ds, lo:lo + n_ds].copy()
    if n_ds % 2 == 0:
        F[0, :, :] = 0
        F[:, 0, :] = 0
        F[:, :, 0] = 0
    out = fft.fftshift(fft.ifftn(fft.ifftshift(F)))
    return out.real * (n_ds / n) ** 3
