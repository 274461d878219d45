"""
Vanishing viscosity
===================

Viscous solutions approach the inviscid viscosity solution as the
viscosity shrinks.  The reference is a monotone Lax-Friedrichs run on a
grid four times finer; for ``H(r) = r^2`` the Hopf-Lax formula gives the
exact limit too.  The classical rate is ``eps^(1/2)``.
"""

import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from hjdecay import Box, PurePower, certify, make_initial
from hjdecay.sweep import EvalWindow, run_vv_sweep

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demos_out")
out.mkdir(exist_ok=True)

spec = PurePower(2.0)
phi = make_initial("cosine", {"A": 1.0}, Box(1, 2 * np.pi, 512))
fine = make_initial("cosine", {"A": 1.0}, Box(1, 2 * np.pi, 2048))
eps = [0.2, 0.1, 0.05, 0.025]
rep = run_vv_sweep(phi, spec, certify(spec), eps, EvalWindow((0.5, 1.0, 2.0), 0.5), reference_phi=fine)

###############################################################################
# Distances on the interior window, and the fitted log-log slope.

d = np.array(rep.details["distance_to_reference"])
hl = np.array(rep.details["distance_to_hopf_lax"][: len(eps)])
slope, intercept, _ = rep.rate_fit
for e, a, b in zip(eps, d, hl):
    print(f"eps={e:<6g} to reference {a:.4f}   to Hopf-Lax {b:.4f}")
print(f"fitted slope {slope:.3f}, verdict {'pass' if rep.verdict else 'fail'}")

fig, ax = plt.subplots(figsize=(5, 3.6))
ax.loglog(eps, d, "o-", label="LF reference")
ax.loglog(eps, hl, "s--", label="Hopf-Lax")
ax.loglog(eps, np.exp(intercept) * np.array(eps) ** slope, ":", color="0.4", label=f"slope {slope:.2f}")
ax.set_xlabel("epsilon")
ax.set_ylabel("sup distance")
ax.legend(fontsize=7)
fig.tight_layout()
fig.savefig(out / "vanishing_viscosity.png", dpi=120)
print("wrote", out / "vanishing_viscosity.png")
