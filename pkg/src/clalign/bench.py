"""Synthetic benchmark: random rigid pairs, additive noise, error tables."""

from __future__ import annotations

import csv
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np

from .phantom import random_phantom
from .projector import CandidateSet, candidate_set, random_rotations
from .register import AlignParams, align_volumes
from .symmetry import SymmetryGroup, parse_symmetry, resolve_symmetry_element, rotation_errors
from .volume import RigidTransform, apply_transform, check_volume

logger = logging.getLogger(__name__)

CSV_COLUMNS = ("trial", "snr", "refined", "e1_deg", "e2_deg", "reflected_detected",
               "correlation", "seconds")
STAT_COLUMNS = ("e1_deg", "e2_deg", "reflected_detected", "correlation", "seconds")


def add_noise(v, snr: float, seed=None) -> np.ndarray:
    """``v`` plus white Gaussian noise of variance ``var(v) / snr``."""
    if not snr > 0:
        raise ValueError(f"snr must be positive, got {snr}")
    v = np.asarray(v, dtype=np.float64)
    rng = np.random.default_rng(seed)
    sigma = math.sqrt(float(v.var()) / snr)
    return v + sigma * rng.standard_normal(v.shape)


def parse_snr(text: str):
    """``"clean"`` -> None; otherwise a positive number, fractions such as ``1/8`` allowed."""
    text = text.strip()
    if text.lower() in ("clean", "inf"):
        return None
    value = float(Fraction(text))
    if value <= 0:
        raise ValueError(f"SNR must be positive or 'clean', got {text!r}")
    return value


def snr_label(snr) -> str:
    return "clean" if snr is None else repr(float(snr))


@dataclass(frozen=True)
class BenchSpec:
    n: int = 64
    volume_path: str | None = None
    symmetry: str = "C1"
    snrs: tuple = (None,)
    shift_frac: float = 0.10
    reflect: str = "none"          # none | all | random
    trials: int = 10
    seed: int = 0
    refine: bool = True
    parallel_trials: bool = False
    omit_timings: bool = False

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if any(s is not None and not s > 0 for s in self.snrs):
            raise ValueError("SNR values must be positive or 'clean'")
        if self.reflect not in ("none", "all", "random"):
            raise ValueError("reflect must be one of none, all, random")
        if self.shift_frac < 0:
            raise ValueError("shift_frac must be non-negative")


@dataclass(frozen=True)
class TrialSetup:
    transform: RigidTransform
    phantom_seed: int
    align_seed: int
    noise_seeds: tuple


def trial_setup(spec: BenchSpec, trial: int, n: int) -> TrialSetup:
    """Ground truth and seeds of one trial, derived only from ``(spec.seed, trial)``."""
    ss = np.random.SeedSequence(spec.seed, spawn_key=(trial,))
    geo, ph, al, noise = ss.spawn(4)
    rng = np.random.default_rng(geo)
    O = random_rotations(1, rng)[0]
    direction = rng.standard_normal(3)
    direction /= np.linalg.norm(direction)
    t = direction * rng.uniform(0.0, spec.shift_frac * n)
    flip = rng.uniform() < 0.5
    reflected = spec.reflect == "all" or (spec.reflect == "random" and flip)
    noise_seeds = tuple(int(s.generate_state(1)[0]) for s in noise.spawn(2 * len(spec.snrs)))
    return TrialSetup(RigidTransform(O, t, reflected), int(ph.generate_state(1)[0]),
                      int(al.generate_state(1)[0]), noise_seeds)


def make_pair(spec: BenchSpec, setup: TrialSetup, G: SymmetryGroup, base=None):
    """``(v1, v2)`` with ``v2(r) = v1(O J^u r - t)``.

    Phantom pairs are rendered analytically; a user volume is resampled.
    """
    if base is None:
        ph = random_phantom(spec.n, setup.phantom_seed)
        if len(G) > 1:
            ph = ph.symmetrized(G.elements)
        return ph.render(spec.n), ph.render(spec.n, setup.transform)
    return base, apply_transform(base, setup.transform)


def _errors(O_est, O, G):
    g = resolve_symmetry_element(O_est, O, G)
    try:
        return rotation_errors(O_est, g @ O)
    except ValueError:
        return math.nan, math.nan


def run_trial(spec: BenchSpec, params: AlignParams, trial: int, base=None,
              S: CandidateSet | None = None) -> list[dict]:
    G = parse_symmetry(spec.symmetry)
    n = spec.n if base is None else base.shape[0]
    setup = trial_setup(spec, trial, n)
    v1, v2 = make_pair(spec, setup, G, base)
    O = setup.transform.rotation
    rows = []
    for k, snr in enumerate(spec.snrs):
        if snr is None:
            w1, w2 = v1, v2
        else:
            w1 = add_noise(v1, snr, setup.noise_seeds[2 * k])
            w2 = add_noise(v2, snr, setup.noise_seeds[2 * k + 1])
        p = replace(params, seed=setup.align_seed, refine=spec.refine)
        t0 = time.perf_counter()
        res = align_volumes(w1, w2, p, S)
        elapsed = time.perf_counter() - t0
        refine_time = res.timings.get("refine", 0.0)
        versions = [(False, res.unrefined, res.unrefined_correlation, elapsed - refine_time)]
        if res.refined:
            versions.append((True, res.transform, res.correlation, elapsed))
        for refined, T, corr, secs in versions:
            e1, e2 = _errors(T.rotation, O, G)
            rows.append({
                "trial": trial, "snr": snr_label(snr), "refined": int(refined),
                "e1_deg": e1, "e2_deg": e2, "reflected_detected": int(T.reflected),
                "correlation": float(corr),
                "seconds": 0.0 if spec.omit_timings else float(secs),
            })
        logger.info("trial %d snr %s: e1=%.3f e2=%.3f reflected=%s (truth %s)", trial,
                    snr_label(snr), rows[-1]["e1_deg"], rows[-1]["e2_deg"],
                    res.transform.reflected, setup.transform.reflected)
    return rows


def _run_trial_job(args):
    spec, params, trial, base = args
    return run_trial(spec, params, trial, base)


def run_bench(spec: BenchSpec, params: AlignParams | None = None, threads: int = 1) -> list[dict]:
    """All trial rows, ordered by trial then SNR then refinement stage."""
    params = params or AlignParams()
    base = None
    if spec.volume_path is not None:
        from .mrc import read_mrc
        base = check_volume(read_mrc(spec.volume_path)[0])
    if spec.parallel_trials and threads > 1:
        p1 = replace(params, threads=1)
        jobs = [(spec, p1, k, base) for k in range(spec.trials)]
        with ProcessPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(_run_trial_job, jobs))
    else:
        S = candidate_set(params.L)
        p = replace(params, threads=threads)
        chunks = [run_trial(spec, p, k, base, S) for k in range(spec.trials)]
    return [row for chunk in chunks for row in chunk]


def summarize(rows: list[dict]) -> list[dict]:
    """``mean`` and ``std`` (sample, ddof=1) rows for every (snr, refined) group."""
    groups = {}
    for r in rows:
        groups.setdefault((r["snr"], r["refined"]), []).append(r)
    out = []
    for (snr, refined), members in groups.items():
        for stat in ("mean", "std"):
            row = {"trial": stat, "snr": snr, "refined": refined}
            for col in STAT_COLUMNS:
                x = np.array([m[col] for m in members], dtype=np.float64)
                if stat == "mean":
                    row[col] = float(np.mean(x))
                else:
                    row[col] = float(np.std(x, ddof=1)) if len(x) > 1 else 0.0
            out.append(row)
    return out


def write_csv(dest, rows: list[dict]) -> None:
    """Write trial rows followed by the summary rows to a path or an open text file."""
    if hasattr(dest, "write"):
        _write_rows(dest, rows)
        return
    with open(dest, "w", newline="") as fh:
        _write_rows(fh, rows)


def _write_rows(fh, rows):
    w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows + summarize(rows):
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})


def read_csv(path) -> tuple[list[dict], list[dict]]:
    """Inverse of :func:`write_csv`: ``(trial_rows, summary_rows)``."""
    trial_rows, summary = [], []
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            row = {"trial": r["trial"], "snr": r["snr"], "refined": int(r["refined"])}
            for col in STAT_COLUMNS:
                row[col] = float(r[col])
            if r["trial"] in ("mean", "std"):
                summary.append(row)
            else:
                row["trial"] = int(row["trial"])
                trial_rows.append(row)
    return trial_rows, summary
