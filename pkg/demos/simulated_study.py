"""Run a reduced control-by-noise study and print the comparison table.

One control and four N(0, 1) noise factors, 54-run designs, random test
functions. Pass a replication count to change the study size (default 10).

    python3 demos/simulated_study.py [replications]
"""

import sys

import numpy as np

from robustfill import StudyConfig, run_simulated_example

reps = int(sys.argv[1]) if len(sys.argv) > 1 else 10
cfg = StudyConfig(replications=reps)
report = run_simulated_example(cfg)

print(f"{reps} replications, config hash {report.provenance['config_hash'][:12]}")
print(f"{'design':12s} {'done':>5s} {'med RMSPE':>10s} {'med |x err|':>12s}")
for name in cfg.designs:
    rm = report.column(name, "rmspe")
    err = np.abs(report.column(name, "error"))
    s = report.summary[name]
    print(f"{name:12s} {s['completed']:>2d}/{s['attempted']:<2d} {np.median(rm):>10.4f} {np.median(err):>12.4f}")
