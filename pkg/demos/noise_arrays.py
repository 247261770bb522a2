"""Compare noise-array constructions for a single N(0.5, 1/6) noise factor.

Prints IRMSE at several correlation parameters for the transformed,
double transformed and model-based (hybrid) 10-point designs, then writes
WRMSE profiles to CSV for plotting.

    python3 demos/noise_arrays.py [outdir]
"""

import sys
from pathlib import Path

import numpy as np

from robustfill import (
    NoiseModel,
    double_transformed_noise,
    emit_profile,
    hybrid_noise_design,
    irmse,
    robust_1d_noise_design,
    transformed_noise,
)
from robustfill.generators import uniform_design

model = NoiseModel.normal(0.5, 1 / 6)
thetas = [5.0, 10.0, 20.0, 30.0]
out = Path(sys.argv[1] if len(sys.argv) > 1 else "profiles")
out.mkdir(exist_ok=True)

n = 10
designs = {
    "Tr": transformed_noise(uniform_design(n), model),
    "DT": double_transformed_noise(uniform_design(n), model),
}
T = robust_1d_noise_design(n, thetas, model)
designs["hybrid"] = hybrid_noise_design(uniform_design(n), T)

print(f"{'design':8s}" + "".join(f"  theta={t:<6g}" for t in thetas))
for name, D in designs.items():
    print(f"{name:8s}" + "".join(f"  {irmse(D, t, model):<12.6f}" for t in thetas))
print(f"hybrid levels chosen at theta={T.details['selected_theta']:g}, "
      f"min-efficiency {T.details['min_efficiency'][T.details['selected_theta']]:.3f}")

grid = np.linspace(0.5 - 4 / 6, 0.5 + 4 / 6, 801)
for name, D in designs.items():
    for t in (10.0, 1000.0):
        emit_profile(D, t, model, grid, out / f"wrmse_{name}_theta{t:g}.csv")
print(f"profiles written to {out}/")
