"""Volume-to-volume alignment: rotation search, handedness, translation, refinement."""

from __future__ import annotations

import logging
import math
import time
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import fft, optimize

from .commonlines import ProjectionAligner, ShiftGrid, make_references
from .fourier import polar_ft
from .projector import DEFAULT_L, CandidateSet, candidate_set, euler_zyx, project, random_rotations
from .sync import DegenerateSpectrumWarning, SyncProblem, synchronize
from .volume import RigidTransform, apply_transform, check_volume, correlation, downsample

logger = logging.getLogger(__name__)

CROSS_POWER_EPS = 1e-12
FD_ANGLE_STEP = np.radians(0.25)
FD_SHIFT_STEP = 0.25


@dataclass
class AlignParams:
    n_ds: int = 64
    n_projs: int = 30
    L: int = DEFAULT_L
    max_shift_frac: float = 0.15
    shift_step: float = 1.0
    n_theta: int = 360
    refine: bool = True
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.n_ds < 16:
            raise ValueError("n_ds must be at least 16")
        if self.n_projs < 2:
            raise ValueError("need at least two reference projections")


@dataclass
class AlignmentResult:
    transform: RigidTransform
    correlation: float
    branch_scores: tuple
    refined: bool = False
    timings: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    unrefined: RigidTransform | None = None
    unrefined_correlation: float | None = None


def phase_correlation_shift(a, b) -> np.ndarray:
    """Integer translation ``t`` with ``b(r) ~ a(r - t)``, from the normalized cross-power spectrum."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"size mismatch: {a.shape} vs {b.shape}")
    cross = fft.fftn(a) * np.conj(fft.fftn(b))
    mag = np.abs(cross)
    keep = mag > CROSS_POWER_EPS * mag.max()
    cross = np.where(keep, cross / np.where(keep, mag, 1.0), 0.0)
    rho = fft.ifftn(cross).real
    peak = np.array(np.unravel_index(np.argmax(rho), rho.shape))
    shape = np.array(rho.shape)
    # wrap into [-n/2, n/2)
    peak = (peak + shape // 2) % shape - shape // 2
    return (-peak).astype(np.float64)


def _translate(v, t) -> np.ndarray:
    return apply_transform(v, RigidTransform(np.eye(3), t))


def _solve_branch(v1, v2, O, reflected):
    """Translation and score for one rotation hypothesis at the current resolution."""
    T0 = RigidTransform(O, np.zeros(3), reflected)
    w = apply_transform(v2, T0.inverse())
    t = phase_correlation_shift(v1, w)
    T = RigidTransform(O, t, reflected)
    aligned = apply_transform(v2, T.inverse())
    return T, correlation(v1, aligned)


def estimate_orientations(v1, v2, p: AlignParams, S: CandidateSet | None = None):
    """Project ``v2`` at random rotations and orient every image against ``v1``.

    Returns ``(R, Rt, scores)`` with the generating rotations, the estimates and
    their common-line scores.
    """
    n = v1.shape[0]
    seq = np.random.SeedSequence(p.seed)
    s_proj, s_ref = seq.spawn(2)
    S = S if S is not None else candidate_set(p.L)
    grid = ShiftGrid.for_size(n, p.max_shift_frac, p.shift_step)
    R = random_rotations(p.n_projs, s_proj)
    images = project(v2, R)
    ref_rots, refs = make_references(v1, p.n_projs, s_ref, p.n_theta)
    aligner = ProjectionAligner(refs, ref_rots, S, grid)
    found = aligner.align_many(polar_ft(images, p.n_theta, refs.n_r), threads=p.threads)
    Rt = np.stack([f[0] for f in found])
    return R, Rt, np.array([f[1] for f in found])


def reference_first(scores) -> np.ndarray:
    """Permutation moving the highest-scoring projection to the front (first index on ties)."""
    best = int(np.argmax(scores))
    return np.r_[best, np.delete(np.arange(len(scores)), best)]


def align_volumes(v1, v2, p: AlignParams | None = None, S: CandidateSet | None = None) -> AlignmentResult:
    """Estimate ``(O, t, reflected)`` with ``v2(r) ~ v1(O J^u r - t)``.

    The search runs on copies downsampled to ``p.n_ds``; the winning transform
    is carried back to full resolution, where the translation is re-estimated
    and, if requested, refined by BFGS.
    """
    p = p or AlignParams()
    v1 = check_volume(v1).astype(np.float64)
    v2 = check_volume(v2).astype(np.float64)
    if v1.shape != v2.shape:
        raise ValueError(f"volumes differ in size: {v1.shape} vs {v2.shape}")
    n = v1.shape[0]
    n_ds = min(p.n_ds, n)
    timings = {}
    notes = []

    t0 = time.perf_counter()
    d1, d2 = downsample(v1, n_ds), downsample(v2, n_ds)
    timings["downsample"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    R, Rt, cl_scores = estimate_orientations(d1, d2, p, S)
    timings["orientations"] = time.perf_counter() - t0
    # The rank-3 eigenproblem ties every estimate to the reference projection
    # (the first one), so make that the image with the best common-line score.
    order = reference_first(cl_scores)
    R, Rt = R[order], Rt[order]

    t0 = time.perf_counter()
    branches = []
    for reflected in (False, True):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", DegenerateSpectrumWarning)
            res = synchronize(SyncProblem(R, Rt, reflected))
        notes += [f"{'reflected' if reflected else 'direct'} branch: {w.message}" for w in caught]
        T, score = _solve_branch(d1, d2, res.O_est, reflected)
        branches.append((T, score))
    timings["synchronize"] = time.perf_counter() - t0
    scores = (branches[0][1], branches[1][1])
    # ties go to the direct branch
    T_ds, _ = branches[int(scores[1] > scores[0])]

    t0 = time.perf_counter()
    T, corr = _solve_branch(v1, v2, T_ds.rotation, T_ds.reflected)
    timings["full_resolution"] = time.perf_counter() - t0
    if n_ds == n and not np.array_equal(T.translation, T_ds.translation):
        logger.debug("full-resolution translation differs from search estimate")
    result = AlignmentResult(T, corr, scores, False, timings, notes, unrefined=T,
                             unrefined_correlation=corr)
    for msg in notes:
        logger.warning(msg)
    if p.refine:
        t0 = time.perf_counter()
        T_ref, info = refine_bfgs(v1, v2, T)
        timings["refine"] = time.perf_counter() - t0
        result.transform = T_ref
        result.correlation = 1.0 - info["objective"]
        result.refined = True
        result.warnings += info["warnings"]
    return result


def refinement_objective(v1, v2, reflected: bool, R0, t0):
    """``c(theta) = 1 - corr(T_theta(v1), v2)`` with ``T_theta`` perturbing (R0, t0)."""

    def transform(theta):
        R = euler_zyx(*theta[:3]) @ R0
        return RigidTransform(R, t0 + theta[3:], reflected)

    def objective(theta):
        return 1.0 - correlation(apply_transform(v1, transform(theta)), v2)

    return objective, transform


def _central_gradient(f, x, steps):
    g = np.empty_like(x)
    for k in range(len(x)):
        e = np.zeros_like(x)
        e[k] = steps[k]
        g[k] = (f(x + e) - f(x - e)) / (2 * steps[k])
    return g


def refine_bfgs(v1, v2, init: RigidTransform, maxiter: int = 200, ftol: float = 1e-6,
                gtol: float = 1e-5):
    """Polish ``init`` by BFGS on ``1 - corr(T(v1), v2)``.

    The rotation is parametrized as ``Rz(psi) Ry(theta) Rx(phi) @ O_init`` so
    the start point is the origin of parameter space; translations are
    offsets from the initial translation.  Gradients are central differences
    (0.25 degree and 0.25 voxel steps).  The reflection flag is held fixed.
    Returns ``(transform, info)``.
    """
    v1 = np.asarray(v1, dtype=np.float64)
    v2 = np.asarray(v2, dtype=np.float64)
    f, to_transform = refinement_objective(v1, v2, init.reflected, init.rotation, init.translation)
    steps = np.array([FD_ANGLE_STEP] * 3 + [FD_SHIFT_STEP] * 3)
    x0 = np.zeros(6)
    f0 = f(x0)
    history = [f0]
    best = {"x": x0, "f": f0}
    notes = []

    def fun(x):
        val = f(x)
        if not np.isfinite(val):
            return np.inf
        if val < best["f"]:
            best.update(x=x.copy(), f=val)
        return val

    def callback(intermediate_result):
        history.append(float(intermediate_result.fun))
        if history[-2] - history[-1] < ftol:
            raise StopIteration

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = optimize.minimize(
            fun, x0, jac=lambda x: _central_gradient(f, x, steps), method="BFGS",
            callback=callback, options={"maxiter": maxiter, "gtol": gtol},
        )
    if not np.isfinite(res.fun):
        notes.append("non-finite objective during refinement; returning best iterate")
    x = res.x if np.isfinite(res.fun) and res.fun <= best["f"] else best["x"]
    fx = f(x)
    if fx > f0:
        x, fx = x0, f0
    info = {"objective": float(fx), "initial": float(f0), "history": history,
            "iterations": int(res.nit), "warnings": notes}
    return to_transform(x), info


def params_dict(p: AlignParams) -> dict:
    return asdict(p)
