"""Projection images, Haar-random rotations and the candidate rotation grid."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial.transform import Rotation as _Rot

from .fourier import ifft2_centered, volume_slices
from .volume import check_volume

DEFAULT_L = 75  # reproduces the 15,236-rotation operating point
CACHE_MAGIC = b"CLCANDS1"


def project(v, R, oversample: int = 2) -> np.ndarray:
    """Line integrals of ``v`` along R's third column: ``P(x, y) = sum_z v(R r)``.

    Computed through the slice theorem, so ``R = I`` reproduces the z-sum (to
    NUFFT precision).  The slice is sampled ``oversample`` times more finely
    than the image grid and the result cropped, which keeps the corners of a
    rotated volume from wrapping around into the opposite image edge.  ``R``
    may also be a stack ``(m, 3, 3)``; the result is then ``(m, n, n)``.
    """
    v = check_volume(v)
    if oversample < 1:
        raise ValueError("oversample must be >= 1")
    n = v.shape[0]
    m = oversample * n
    R = np.asarray(R, dtype=np.float64)
    single = R.ndim == 2
    slices = volume_slices(v, R.reshape(-1, 3, 3), size=m)
    lo = m // 2 - n // 2
    images = ifft2_centered(slices).real[:, lo:lo + n, lo:lo + n]
    return images[0] if single else images


def quaternion_to_matrix(q) -> np.ndarray:
    """Rotation matrices from unit quaternions in scalar-last ``(x, y, z, w)`` order."""
    return _Rot.from_quat(np.asarray(q, dtype=np.float64)).as_matrix()


def random_rotations(N: int, seed=None) -> np.ndarray:
    """``N`` Haar-distributed rotations, shape ``(N, 3, 3)``, from normalized Gaussian quaternions."""
    if N < 1:
        raise ValueError("N must be at least 1")
    rng = np.random.default_rng(seed)
    q = rng.standard_normal((N, 4))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    return quaternion_to_matrix(q).reshape(N, 3, 3)


def euler_zyx(psi, theta, phi) -> np.ndarray:
    """``Rz(psi) @ Ry(theta) @ Rx(phi)``."""
    cz, sz = np.cos(psi), np.sin(psi)
    cy, sy = np.cos(theta), np.sin(theta)
    cx, sx = np.cos(phi), np.sin(phi)
    Rz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
    Ry = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    Rx = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
    return Rz @ Ry @ Rx


@dataclass(frozen=True)
class CandidateSet:
    rotations: np.ndarray
    L: int

    def __len__(self):
        return len(self.rotations)


def _grid_angles(L: int):
    """Yield the (tau, theta, phi) nodes of the hyperspherical grid.

    tau covers (0, pi/2) in steps of 2 pi / L, theta covers (0, pi) in steps of
    2 pi / (L sin tau) and phi covers [0, 2 pi) in steps of
    2 pi / (L sin tau sin theta): roughly L/4, (L/2) sin tau and
    L sin tau sin theta points per loop.  Every node is 2 pi / L apart from its
    neighbours on the unit-quaternion sphere.
    """
    tau_step = (np.pi / 2) / (L / 4)
    for tau in np.arange(tau_step / 2, np.pi / 2 - tau_step / 4, tau_step):
        theta_step = np.pi / (L / 2 * np.sin(tau))
        for theta in np.arange(theta_step / 2, np.pi - theta_step / 2, theta_step):
            phi_step = 2 * np.pi / (L * np.sin(tau) * np.sin(theta))
            phis = np.arange(0, 2 * np.pi - phi_step, phi_step)
            if len(phis):
                yield tau, theta, phis


def candidate_set(L: int = DEFAULT_L) -> CandidateSet:
    """Quasi-uniform rotations from hyperspherical coordinates on unit quaternions.

    The quaternion for node (tau, theta, phi) is
    ``(sin tau sin theta sin phi, sin tau sin theta cos phi, sin tau cos theta, cos tau)``;
    tau < pi/2 keeps the scalar part positive so each rotation appears once.
    """
    if L < 8:
        raise ValueError("L must be at least 8")
    quats = []
    for tau, theta, phis in _grid_angles(L):
        st = np.sin(tau)
        quats.append(np.stack([
            st * np.sin(theta) * np.sin(phis),
            st * np.sin(theta) * np.cos(phis),
            np.full_like(phis, st * np.cos(theta)),
            np.full_like(phis, np.cos(tau)),
        ], axis=1))
    q = np.concatenate(quats)
    return CandidateSet(quaternion_to_matrix(q).reshape(-1, 3, 3), L)


def save_candidates(S: CandidateSet, path) -> None:
    """Write ``S`` as a 16-byte header (8-byte magic, int64 L) and 9|S| float64 values."""
    with open(path, "wb") as fh:
        fh.write(CACHE_MAGIC + struct.pack("<q", S.L))
        fh.write(np.ascontiguousarray(S.rotations, dtype="<f8").tobytes())


def load_candidates(path) -> CandidateSet:
    raw = Path(path).read_bytes()
    if len(raw) < 16 or raw[:8] != CACHE_MAGIC:
        raise ValueError(f"{path}: not a candidate-set cache file")
    (L,) = struct.unpack("<q", raw[8:16])
    body = np.frombuffer(raw, dtype="<f8", offset=16)
    if body.size % 9:
        raise ValueError(f"{path}: truncated candidate data")
    return CandidateSet(body.reshape(-1, 3, 3).astype(np.float64), int(L))
