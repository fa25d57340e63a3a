"""Common-line geometry and orientation search of a projection against a volume.

For a candidate orientation ``Q`` of an image ``P`` and a reference image of
known orientation ``R_i``, the two central slices intersect along
``q = Q[:, 2] x R_i[:, 2]``.  Its in-plane angles are read off ``Q^T q`` and
``R_i^T q``.  A candidate is scored by the mean normalized correlation of the
matching spectral rays, with ``P``'s ray phase-modulated by a 1D shift.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from threadpoolctl import threadpool_limits

from .fourier import PolarSpectrum, polar_ft, polar_radii
from .projector import CandidateSet, project, random_rotations

logger = logging.getLogger(__name__)

PARALLEL_TOL = 1e-8
NO_COMMON_LINES = -np.inf
CHUNK = 2048


class CommonLinePair(NamedTuple):
    alpha_i: float
    alpha_j: float


@dataclass(frozen=True)
class ShiftGrid:
    """1D shifts ``-d + k * delta_d`` for ``k = 0 .. floor(2d / delta_d)``."""

    d: float
    delta_d: float = 1.0

    @property
    def values(self) -> np.ndarray:
        if self.d < 0 or self.delta_d <= 0:
            raise ValueError("need d >= 0 and delta_d > 0")
        k = np.arange(int(math.floor(2 * self.d / self.delta_d + 1e-9)) + 1)
        return -self.d + k * self.delta_d

    @classmethod
    def for_size(cls, n: int, max_shift_frac: float = 0.15, delta_d: float = 1.0):
        return cls(float(math.ceil(max_shift_frac * n)), delta_d)


def commonline_angles(Ri, Rj) -> CommonLinePair:
    Ri = np.asarray(Ri, dtype=np.float64)
    Rj = np.asarray(Rj, dtype=np.float64)
    q = np.cross(Ri[:, 2], Rj[:, 2])
    norm = np.linalg.norm(q)
    if norm <= PARALLEL_TOL:
        raise ValueError("viewing directions are parallel; common line undefined")
    q /= norm
    ci = Ri.T @ q
    cj = Rj.T @ q
    two_pi = 2 * np.pi
    return CommonLinePair(
        float(np.arctan2(ci[1], ci[0]) % two_pi), float(np.arctan2(cj[1], cj[0]) % two_pi)
    )


def commonline_indices(Qs, Rs, n_theta: int):
    """Ray indices of the common lines between every Q in ``Qs`` and every R in ``Rs``.

    Returns ``(a, b, valid)``, each of shape ``(len(Qs), len(Rs))``: ``a`` indexes
    rays of the image with orientation Q, ``b`` rays of the reference image and
    ``valid`` is False where the viewing directions are (nearly) parallel.
    """
    Qs = np.asarray(Qs, dtype=np.float64).reshape(-1, 3, 3)
    Rs = np.asarray(Rs, dtype=np.float64).reshape(-1, 3, 3)
    q = np.cross(Qs[:, None, :, 2], Rs[None, :, :, 2])
    norm = np.linalg.norm(q, axis=-1)
    valid = norm > PARALLEL_TOL
    q /= np.where(valid, norm, 1.0)[..., None]
    ci = np.einsum("aji,abj->abi", Qs[:, :, :2], q)
    cj = np.einsum("bji,abj->abi", Rs[:, :, :2], q)
    step = 2 * np.pi / n_theta
    a = np.rint(np.arctan2(ci[..., 1], ci[..., 0]) / step).astype(np.int64) % n_theta
    b = np.rint(np.arctan2(cj[..., 1], cj[..., 0]) / step).astype(np.int64) % n_theta
    return a, b, valid


def normalize_rays(rays) -> np.ndarray:
    rays = np.asarray(rays, dtype=np.complex128)
    norm = np.linalg.norm(rays, axis=-1, keepdims=True)
    return rays / np.where(norm > 0, norm, 1.0)


def shift_phases(n_r: int, shifts) -> np.ndarray:
    """``exp(i xi_j s)`` for radial samples ``xi_j`` and shifts ``s``; shape (n_r, n_shifts)."""
    return np.exp(1j * polar_radii(n_r)[:, None] * np.asarray(shifts)[None, :])


def cost_rho(pP: PolarSpectrum, pA, Q, refRots, dxi: float) -> float:
    """Mean common-line correlation for candidate orientation ``Q`` and 1D shift ``dxi``."""
    refs = pA.rays if isinstance(pA, PolarSpectrum) else np.stack([p.rays for p in pA])
    refRots = np.asarray(refRots, dtype=np.float64).reshape(-1, 3, 3)
    if refs.shape[0] != len(refRots) or refs.shape[1:] != pP.rays.shape:
        raise ValueError("polar spectra and reference rotations do not line up")
    a, b, valid = commonline_indices(Q, refRots, pP.n_theta)
    a, b, valid = a[0], b[0], valid[0]
    if not valid.any():
        return NO_COMMON_LINES
    f = normalize_rays(pP.rays)[a[valid]]
    g = normalize_rays(refs)[np.flatnonzero(valid), b[valid]]
    phase = np.exp(1j * polar_radii(pP.n_r) * dxi)
    terms = np.sum(np.conj(f) * g * phase, axis=-1).real
    return float(terms.mean())


class ProjectionAligner:
    """Reusable orientation search against a fixed set of reference projections.

    Everything that does not depend on the query image (reference spectra,
    common-line ray indices for the whole candidate set, shift phases) is
    computed once here.
    """

    def __init__(self, refs: PolarSpectrum, ref_rotations, S: CandidateSet, grid: ShiftGrid):
        self.ref_rotations = np.asarray(ref_rotations, dtype=np.float64).reshape(-1, 3, 3)
        self.S = S
        self.grid = grid
        self.shifts = grid.values
        self.n_theta = refs.n_theta
        self.n_r = refs.n_r
        self.a, self.b, valid = commonline_indices(S.rotations, self.ref_rotations, self.n_theta)
        self.weight = valid.astype(np.float64)
        counts = self.weight.sum(axis=1)
        self.dead = counts == 0
        self.weight /= np.where(self.dead, 1.0, counts)[:, None]
        refs_n = normalize_rays(refs.rays)
        # gathered reference rays, (|S|, N, n_r)
        self.g = refs_n[np.arange(len(self.ref_rotations))[None, :], self.b]
        E = shift_phases(self.n_r, self.shifts)
        # Re(h @ E) == [Re h, Im h] @ [Re E; -Im E]
        self.E = np.concatenate([E.real, -E.imag], axis=0)

    def term_scores(self, pP: PolarSpectrum, lo: int, hi: int) -> np.ndarray:
        """Common-line correlations for candidates ``lo:hi``, shape (hi - lo, N, n_shifts)."""
        f = np.conj(normalize_rays(pP.rays))
        h = f[self.a[lo:hi]] * self.g[lo:hi]
        return np.concatenate([h.real, h.imag], axis=-1) @ self.E

    def scores(self, pP: PolarSpectrum) -> np.ndarray:
        """Cost of every candidate, shape (|S|,).

        Each common-line term takes its best shift on the grid independently:
        a 2D image shift moves every common line by a different amount.
        """
        out = np.empty(len(self.S))
        for lo in range(0, len(self.S), CHUNK):
            hi = min(lo + CHUNK, len(self.S))
            best = self.term_scores(pP, lo, hi).max(axis=-1)
            out[lo:hi] = np.einsum("qi,qi->q", best, self.weight[lo:hi])
        out[self.dead] = NO_COMMON_LINES
        return out

    def align(self, pP: PolarSpectrum):
        """Return ``(rotation, score, candidate_index)`` of the best candidate."""
        sc = self.scores(pP)
        iq = int(np.argmax(sc))
        return self.S.rotations[iq], float(sc[iq]), iq

    def align_many(self, spectra: PolarSpectrum, threads: int = 1):
        """Align a stack of polar spectra; results are independent of ``threads``.

        BLAS is pinned to one thread so every matrix product is evaluated the
        same way whatever the outer parallelism.
        """
        items = [PolarSpectrum(r) for r in spectra.rays]
        with threadpool_limits(limits=1, user_api="blas"):
            if threads <= 1:
                return [self.align(p) for p in items]
            with ThreadPoolExecutor(max_workers=threads) as pool:
                return list(pool.map(self.align, items))


def make_references(v, N: int, seed, n_theta: int = 360, n_r: int | None = None):
    """Project ``v`` at ``N`` Haar-random rotations and return (rotations, polar spectra)."""
    rots = random_rotations(N, seed)
    images = project(v, rots)
    return rots, polar_ft(images, n_theta, n_r)


def align_projection(P, v, S: CandidateSet, N: int, grid: ShiftGrid, seed,
                     n_theta: int = 360, n_r: int | None = None) -> np.ndarray:
    """Estimate the orientation of image ``P`` relative to volume ``v``.

    ``N`` reference projections of ``v`` are drawn at seeded random rotations
    and the candidate/shift pair maximizing the common-line cost is returned
    (first occurrence in candidate-then-shift order on ties).
    """
    P = np.asarray(P)
    v = np.asarray(v)
    if P.shape != v.shape[:2]:
        raise ValueError(f"image {P.shape} and volume {v.shape} sizes differ")
    rots, refs = make_references(v, N, seed, n_theta, n_r)
    aligner = ProjectionAligner(refs, rots, S, grid)
    return aligner.align(polar_ft(P, n_theta, refs.n_r))[0]
