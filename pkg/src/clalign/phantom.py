"""Analytic Gaussian-blob phantoms.

Because the phantom is a closed-form function, a transformed copy can be
rendered exactly instead of being resampled from the voxel grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .projector import random_rotations
from .volume import RigidTransform, centered_coords


@dataclass(frozen=True)
class BlobPhantom:
    centers: np.ndarray      # (K, 3), voxels relative to the grid center
    precisions: np.ndarray   # (K, 3, 3), inverse covariances
    amplitudes: np.ndarray   # (K,)

    def evaluate(self, points) -> np.ndarray:
        """Density at points of shape (3, ...) given relative to the grid center."""
        pts = np.asarray(points, dtype=np.float64)
        shape = pts.shape[1:]
        pts = pts.reshape(3, -1)
        out = np.zeros(pts.shape[1])
        for c, P, a in zip(self.centers, self.precisions, self.amplitudes):
            d = pts - c[:, None]
            out += a * np.exp(-0.5 * np.einsum("ik,ij,jk->k", d, P, d))
        return out.reshape(shape)

    def render(self, n: int, transform: RigidTransform | None = None) -> np.ndarray:
        """Sample on the n^3 grid; with ``transform``, render ``v(O J^u r - t)`` exactly."""
        r = centered_coords(n)
        if transform is not None:
            r = np.einsum("ij,j...->i...", transform.linear(), r)
            r = r - transform.translation.reshape(3, 1, 1, 1)
        return self.evaluate(r)

    def symmetrized(self, elements) -> "BlobPhantom":
        """Replicate every blob under each group element (``g c``, ``g S g^T``)."""
        els = np.asarray(elements, dtype=np.float64).reshape(-1, 3, 3)
        centers = np.einsum("gij,kj->gki", els, self.centers).reshape(-1, 3)
        prec = np.einsum("gij,kjl,gml->gkim", els, self.precisions, els).reshape(-1, 3, 3)
        amps = np.tile(self.amplitudes, len(els))
        return BlobPhantom(centers, prec, amps)


def random_phantom(n: int, seed=None, n_blobs: int | None = None,
                   sigma_range=(0.02, 0.06)) -> BlobPhantom:
    """Asymmetric phantom of 6-10 anisotropic Gaussian blobs inside a radius of ~n/4.

    Blob standard deviations are drawn per axis from ``sigma_range`` times ``n``.
    """
    rng = np.random.default_rng(seed)
    if n_blobs is None:
        n_blobs = int(rng.integers(6, 11))
    centers = []
    # rejection keeps blobs apart so no accidental near-symmetry appears
    while len(centers) < n_blobs:
        c = rng.uniform(-1, 1, 3) * 0.22 * n
        if np.linalg.norm(c) > 0.22 * n:
            continue
        if all(np.linalg.norm(c - o) > 0.08 * n for o in centers):
            centers.append(c)
    centers = np.array(centers)
    axes = random_rotations(n_blobs, rng)
    sigmas = rng.uniform(*sigma_range, (n_blobs, 3)) * n
    precisions = np.einsum("kij,kj,klj->kil", axes, 1.0 / sigmas ** 2, axes)
    amplitudes = rng.uniform(0.5, 1.5, n_blobs)
    return BlobPhantom(centers, precisions, amplitudes)


def sphere(n: int, radius: float, center=(0.0, 0.0, 0.0), smooth: float = 1.0) -> np.ndarray:
    """Soft-edged ball; ``center`` is relative to the grid center."""
    r = centered_coords(n) - np.asarray(center, dtype=np.float64).reshape(3, 1, 1, 1)
    dist = np.sqrt(np.sum(r ** 2, axis=0))
    return 0.5 * (1 - np.tanh((dist - radius) / smooth))
