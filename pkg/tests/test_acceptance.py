"""Acceptance criteria 1-11.

Every criterion records one ``CRITERION k: PASS|FAIL ...`` line, printed
immediately and again in the pytest terminal summary.  All randomness flows
from ``SEED``, fixed before any of these checks were run; it is never tuned.
The end-to-end criteria drive the installed command line interface in a
subprocess, exactly as a user would.
"""

import json
import os
import subprocess
import sys
import time

import numpy as np
import pytest

import conftest
from clalign.bench import add_noise, read_csv
from clalign.commonlines import ShiftGrid, align_projection, commonline_indices, normalize_rays
from clalign.fourier import polar_ft
from clalign.mrc import write_mrc
from clalign.phantom import random_phantom
from clalign.projector import candidate_set, project, random_rotations
from clalign.register import phase_correlation_shift
from clalign.symmetry import geodesic_distance, group_elements
from clalign.sync import J, SyncProblem, synchronize
from clalign.volume import RigidTransform, is_rotation
from oracles import (
    circular_xcorr_shift, line_integral_projection, quat_from_matrix, smooth_volume,
)

SEED = 1
N64 = 64
TRIALS = 10

pytestmark = pytest.mark.slow


def report(k, ok, detail):
    line = f"CRITERION {k}: {'PASS' if ok else 'FAIL'} {detail}"
    conftest.ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def rng_for(k):
    return np.random.default_rng(np.random.SeedSequence(SEED, spawn_key=(k,)))


# ---------------------------------------------------------------- criterion 1

def test_criterion_1_projection_slice_oracle():
    rng = rng_for(1)
    t0 = time.perf_counter()
    v = smooth_volume(16, rng.integers(2 ** 31))
    Rs = random_rotations(20, rng)
    errs = []
    for R in Rs:
        p = project(v, R)
        ref = line_integral_projection(v, R)
        errs.append(np.linalg.norm(p - ref) / np.linalg.norm(ref))
    elapsed = time.perf_counter() - t0
    ok = max(errs) <= 0.02 and elapsed < 10
    assert report(1, ok, f"max rel L2 {max(errs):.4f} (<= 0.02) over 20 rotations, "
                         f"{elapsed:.2f} s (< 10 s)")


# ---------------------------------------------------------------- criterion 2

def test_criterion_2_common_line_property(vol64):
    rng = rng_for(2)
    Rs = random_rotations(100, rng)
    spectra = polar_ft(project(vol64, Rs), 360).rays
    n_theta = spectra.shape[1]
    wins = 0
    for k in range(50):
        a, b = normalize_rays(spectra[2 * k]), normalize_rays(spectra[2 * k + 1])
        ia, ib, valid = commonline_indices(Rs[2 * k], Rs[2 * k + 1], n_theta)
        assert valid.all()
        true = np.real(np.vdot(a[ia[0, 0]], b[ib[0, 0]]))
        ra, rb = rng.integers(0, n_theta, (2, 200))
        rand = np.real(np.sum(np.conj(a[ra]) * b[rb], axis=1))
        wins += true > np.percentile(rand, 95)
    assert report(2, wins >= 48, f"{wins}/50 pairs beat the random-line 95th percentile "
                                 f"(>= 48)")


# ---------------------------------------------------------- criteria 3 and 4

def test_criterion_3_in_grid_recovery(vol64, cands):
    rng = rng_for(3)
    grid = ShiftGrid.for_size(N64)
    exact = 0
    for q in rng.choice(len(cands), 20, replace=False):
        Q0 = cands.rotations[q]
        R = align_projection(project(vol64, Q0), vol64, cands, 30, grid,
                             seed=int(rng.integers(2 ** 31)))
        exact += np.array_equal(R, Q0)
    assert report(3, exact == 20, f"{exact}/20 exact recoveries of Q0 in S (20/20)")


def test_criterion_4_near_grid_recovery(vol64, cands):
    rng = rng_for(4)
    grid = ShiftGrid.for_size(N64)
    errs = []
    for R in random_rotations(20, rng):
        while True:
            s = rng.integers(-6, 7, 2)
            if np.hypot(*s) <= 6:
                break
        img = np.roll(project(vol64, R), tuple(s), axis=(0, 1))
        est = align_projection(img, vol64, cands, 30, grid, seed=int(rng.integers(2 ** 31)))
        errs.append(geodesic_distance(est, R))
    good = int(np.sum(np.array(errs) <= 7))
    assert report(4, good >= 18, f"{good}/20 within 7 deg (>= 18); errors "
                                 f"{', '.join(f'{e:.1f}' for e in errs)}")


# ---------------------------------------------------------------- criterion 5

def test_criterion_5_synchronization_exactness():
    rng = rng_for(5)
    t0 = time.perf_counter()
    worst = 0.0
    for label, G in (("C1", np.eye(3)[None]), ("C4", group_elements("C", 4).elements)):
        for reflected in (False, True):
            O = random_rotations(1, rng)[0]
            R = random_rotations(30, rng)
            g = G[rng.integers(0, len(G), 30)]
            Rt = g @ O @ (J @ R @ J if reflected else R)
            res = synchronize(SyncProblem(R, Rt, reflected))
            worst = max(worst, min(np.linalg.norm(res.O_est - h @ O) for h in G))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-8 and elapsed < 1
    assert report(5, ok, f"worst min_g |O_est - gO|_F {worst:.2e} (<= 1e-8) over C1/C4 x "
                         f"direct/reflected, {elapsed:.3f} s (< 1 s)")


# ---------------------------------------------------------------- criterion 6

def test_criterion_6_phase_correlation_oracle():
    rng = rng_for(6)
    n = 16
    matches = {"clean": 0, "SNR 1": 0}
    for k in range(50):
        a = random_phantom(n, int(rng.integers(2 ** 31))).render(n)
        s = tuple(rng.integers(-n // 2, n // 2, 3))
        b = np.roll(a, s, axis=(0, 1, 2))
        for key, target in (("clean", b), ("SNR 1", add_noise(b, 1.0, int(rng.integers(2 ** 31))))):
            # compared as cyclic shifts: on an even grid n/2 and -n/2 are the same shift
            matches[key] += np.array_equal(phase_correlation_shift(a, target) % n,
                                           circular_xcorr_shift(a, target) % n)
    ok = matches["clean"] == 50 and matches["SNR 1"] == 50
    assert report(6, ok, f"exact oracle agreement clean {matches['clean']}/50, "
                         f"SNR 1 {matches['SNR 1']}/50 (50/50 each)")


# ---------------------------------------------------------------- criterion 10

def test_criterion_10_candidate_grid(cands):
    hits = [L for L in range(40, 120) if len(candidate_set(L)) == 15236]
    Rs = cands.rotations
    orth = np.max(np.abs(np.einsum("nji,njk->nik", Rs, Rs) - np.eye(3)))
    dets = np.max(np.abs(np.linalg.det(Rs) - 1))
    qs = np.array([quat_from_matrix(R) for R in Rs])
    probe = np.array([quat_from_matrix(R) for R in random_rotations(1000, rng_for(10))])
    dots = np.clip(np.max(np.abs(probe @ qs.T), axis=1), 0, 1)
    median = float(np.median(np.degrees(2 * np.arccos(dots))))
    ok = hits == [cands.L] and len(cands) == 15236 and orth <= 1e-12 and dets <= 1e-12 \
        and median <= 5
    assert report(10, ok, f"L*={hits} |S|={len(cands)} (15236), max|R^T R - I| {orth:.1e}, "
                          f"max|det-1| {dets:.1e}, median NN {median:.2f} deg (<= 5)")


# ------------------------------------------------------ end-to-end criteria

def run_cli(*args, threads=1):
    env = dict(os.environ)
    env.pop("CLALIGN_THREADS", None)
    cmd = [sys.executable, "-m", "clalign", *args, "--threads", str(threads)]
    t0 = time.perf_counter()
    proc = subprocess.run(cmd, env=env, capture_output=True, text=True)
    elapsed = time.perf_counter() - t0
    assert proc.returncode == 0, proc.stderr[-2000:]
    return elapsed


BENCH_ARGS = ("bench", "--phantom", "--n", str(N64), "--trials", str(TRIALS),
              "--seed", str(SEED), "--omit-timings")


@pytest.fixture(scope="module")
def bench_dir(tmp_path_factory):
    return tmp_path_factory.mktemp("accept")


@pytest.fixture(scope="module")
def clean_run(bench_dir):
    out = bench_dir / "clean_t1.csv"
    elapsed = run_cli(*BENCH_ARGS, "--snr", "clean", "--out", str(out))
    return out, elapsed


def group(rows, refined):
    return [r for r in rows if r["refined"] == refined]


def mean_err(rows):
    return float(np.mean([r["e1_deg"] + r["e2_deg"] for r in rows]))


def test_criterion_7_end_to_end_clean(clean_run):
    out, elapsed = clean_run
    rows, _ = read_csv(out)
    unref, ref = mean_err(group(rows, 0)), mean_err(group(rows, 1))
    per_trial = elapsed / TRIALS
    ok = unref <= 7 and ref <= 1 and per_trial <= 120
    assert report(7, ok, f"unrefined mean(e1+e2) {unref:.3f} deg (<= 7), refined "
                         f"{ref:.3f} deg (<= 1), {per_trial:.1f} s/trial (<= 120, "
                         f"{os.cpu_count()} core(s))")


def test_criterion_8_reflection_detection(clean_run, bench_dir):
    out = bench_dir / "reflected.csv"
    run_cli(*BENCH_ARGS, "--snr", "clean", "--reflect", "all", "--no-refine", "--out", str(out))
    flipped = sum(int(r["reflected_detected"]) for r in read_csv(out)[0])
    direct_rows, _ = read_csv(clean_run[0])
    direct = sum(1 - int(r["reflected_detected"]) for r in group(direct_rows, 0))
    ok = flipped == TRIALS and direct == TRIALS
    assert report(8, ok, f"reflected pairs flagged {flipped}/{TRIALS}, direct pairs "
                         f"unflagged {direct}/{TRIALS} (10/10 each)")


def test_criterion_9_noise_robustness(clean_run, bench_dir):
    out = bench_dir / "snr8.csv"
    run_cli(*BENCH_ARGS, "--snr", "1/8", "--no-refine", "--out", str(out))
    noisy = mean_err(group(read_csv(out)[0], 0))
    clean = mean_err(group(read_csv(clean_run[0])[0], 0))
    ok = noisy <= 2 * clean
    assert report(9, ok, f"SNR 1/8 unrefined mean {noisy:.3f} deg <= 2 x clean "
                         f"{clean:.3f} = {2 * clean:.3f} deg")


def test_criterion_11_determinism(clean_run, bench_dir):
    out8 = bench_dir / "clean_t8.csv"
    run_cli(*BENCH_ARGS, "--snr", "clean", "--out", str(out8), threads=8)
    csv_same = clean_run[0].read_bytes() == out8.read_bytes()

    ph = random_phantom(N64, int(rng_for(11).integers(2 ** 31)))
    T = RigidTransform(random_rotations(1, rng_for(11))[0], [3.0, -2.0, 1.5])
    write_mrc(bench_dir / "v1.mrc", ph.render(N64))
    write_mrc(bench_dir / "v2.mrc", ph.render(N64, T))
    js = {}
    for threads in (1, 8):
        path = bench_dir / f"align_t{threads}.json"
        run_cli("align", "--vol1", str(bench_dir / "v1.mrc"), "--vol2", str(bench_dir / "v2.mrc"),
                "--seed", str(SEED), "--omit-timings", "--out-params", str(path),
                threads=threads)
        js[threads] = path.read_bytes()
    json_same = js[1] == js[8]
    rec = json.loads(js[1])
    assert is_rotation(np.array(rec["rotation"]).reshape(3, 3))
    ok = csv_same and json_same
    assert report(11, ok, f"bench CSV identical under 1/8 threads: {csv_same}; align JSON "
                          f"identical: {json_same}")
