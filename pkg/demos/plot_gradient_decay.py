"""
Gradient decay of a viscous Hamilton-Jacobi flow
================================================

For ``H(r) = r^2`` the gradient of the solution decays like ``t^(-1/2)``
with a constant that depends on the data only through ``|phi|^(1/2)``,
while the gradient of ``v^(1/2)`` obeys a bound with no data dependence.
Here three amplitudes of cosine data are evolved and compared with both
bounds.
"""

import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from hjdecay import Box, PurePower, SolveConfig, certify, derive_constants, derived_envelopes, make_initial, solve_viscous
from hjdecay.field import grad_mag_central

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demos_out")
out.mkdir(exist_ok=True)

spec = PurePower(2.0)
cert = certify(spec)
env, _ = derived_envelopes(spec, cert)
box = Box(1, 2 * np.pi, 512)
times = tuple(np.geomspace(0.02, 5, 20))

###############################################################################
# Evolve and measure both gradients at each snapshot.

fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.6), sharex=True)
for amp in (1.0, 10.0, 100.0):
    phi = make_initial("cosine", {"A": amp}, box)
    traj = solve_viscous(phi, spec, SolveConfig(0.01, 5.0, times))
    k = derive_constants(cert, env, phi.sup, 1)
    t = traj.times
    g = [np.max(grad_mag_central(f).values) for f in traj.fields]
    w = [np.max(grad_mag_central(f.with_values(np.sqrt(np.maximum(f.values, 0)))).values) for f in traj.fields]
    line, = ax1.loglog(t, g, "o", ms=3, label=f"A={amp:g}")
    ax1.loglog(t, k.gradx_bound(t), "-", color=line.get_color(), lw=0.8)
    ax2.loglog(t, w, "o", ms=3, color=line.get_color(), label=f"A={amp:g}")
    print(f"A={amp:>5g}  sup|grad v| / bound at t=1: {np.interp(1.0, t, g) / float(k.gradx_bound(1.0)):.3f}")

# one line for every amplitude
ax2.loglog(t, k.gradxind_bound(t), "k-", lw=0.8, label="bound")
ax1.set_title("sup |grad v| and its bound")
ax2.set_title("sup |grad v^(1/2)|")
for ax in (ax1, ax2):
    ax.set_xlabel("t")
    ax.legend(fontsize=7)
fig.tight_layout()
fig.savefig(out / "gradient_decay.png", dpi=120)
print("wrote", out / "gradient_decay.png")
