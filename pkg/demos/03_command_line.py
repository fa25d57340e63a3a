"""The command line interface end to end: MRC files in, JSON and CSV out.

Run with ``python3 demos/03_command_line.py``.  Works in a temporary
directory and drives ``python3 -m clalign`` exactly as a shell user would.
"""

# %% Write a pair of maps to MRC files.
import json
import subprocess
import sys
import tempfile
from pathlib import Path

import numpy as np

from clalign.bench import read_csv
from clalign.mrc import write_mrc
from clalign.phantom import random_phantom
from clalign.projector import random_rotations
from clalign.volume import RigidTransform

work = Path(tempfile.mkdtemp(prefix="clalign-demo-"))
n = 32
ph = random_phantom(n, seed=8)
truth = RigidTransform(random_rotations(1, seed=9)[0], [1.0, 2.0, -1.5])
write_mrc(work / "ref.mrc", ph.render(n), voxel_size=1.2)
write_mrc(work / "moving.mrc", ph.render(n, truth), voxel_size=1.2)


def clalign(*args):
    cmd = [sys.executable, "-m", "clalign", *map(str, args)]
    print("$", " ".join(cmd[2:]))
    return subprocess.run(cmd, check=False).returncode


# %% `align` writes the parameter record and a resampled copy of the moving map.
rc = clalign("align", "--vol1", work / "ref.mrc", "--vol2", work / "moving.mrc",
             "--out-params", work / "params.json", "--out-aligned", work / "aligned.mrc",
             "--seed", 1)
rec = json.loads((work / "params.json").read_text())
R = np.array(rec["rotation"]).reshape(3, 3)
print(f"exit {rc}; reflected={rec['reflected']} correlation={rec['correlation']:.4f}")
print(f"rotation error vs truth (Frobenius): {np.linalg.norm(R - truth.rotation):.4f}")
print("translation:", np.round(rec["translation"], 3), "truth:", truth.translation)

# %% `bench` runs seeded synthetic trials and writes one CSV row per trial and
# stage (unrefined / refined), followed by mean and std summary rows.  At 32^3
# an SNR of 1/8 leaves too little signal per projection and individual trials
# can fail outright; the noise benchmarks in the test suite use 64^3.
rc = clalign("bench", "--phantom", "--n", n, "--trials", 2, "--snr", "clean,1/8",
             "--no-refine", "--omit-timings", "--out", work / "bench.csv")
rows, summary = read_csv(work / "bench.csv")
for s in summary:
    print(f"{s['trial']:>4} snr={s['snr']:<6} e1={s['e1_deg']:.2f} e2={s['e2_deg']:.2f}")
print(f"outputs left in {work}")
