"""
The qscope command-line pipeline
================================

The same experiments run from a flat config file through the `qscope` CLI,
which persists field dumps, CSVs, and a checksummed manifest. Re-running
with the same config and seed reproduces every output byte for byte.
"""

import pathlib
import subprocess
import sys
import tempfile

CONFIG = """\
[grid]
n = 65
[problem]
tag = k2
noise_eps = 0.001
[stability]
eps_list = 0.01,0.001,0.0001
[probes]
set = caccioppoli,three_spheres,carleman
[output]
seed = 42
"""

workdir = pathlib.Path(tempfile.mkdtemp(prefix="qscope_demo_"))
cfg = workdir / "demo.cfg"
cfg.write_text(CONFIG)

for run in ("run1", "run2"):
    out = workdir / run
    subprocess.run(["qscope", "all", "--config", str(cfg), "--out", str(out)],
                   check=True)

m1 = (workdir / "run1" / "manifest.txt").read_bytes()
m2 = (workdir / "run2" / "manifest.txt").read_bytes()
print(f"\noutputs in {workdir}/run1:")
for f in sorted((workdir / "run1").iterdir()):
    print(f"  {f.name}")
print(f"\nmanifests byte-identical across reruns: {m1 == m2}")

# the CSVs feed the plotting component, which never recomputes anything:
#   python plots/render.py --spec <spec file>
spec = workdir / "stability.spec"
spec.write_text(f"[figure]\ntag = stability\ncsv = {workdir}/run1/stability.csv\n"
                f"out = {workdir}/stability.png\n")
render = pathlib.Path(__file__).resolve().parent.parent / "plots" / "render.py"
if render.exists():
    subprocess.run([sys.executable, str(render), "--spec", str(spec)], check=True)
    print(f"figure written to {workdir}/stability.png")
