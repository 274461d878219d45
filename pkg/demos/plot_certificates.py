"""
Certificates for the p-condition
================================

The regularized Hamiltonian ``Phi_eta(s) = (s + eta^2)^(p/2) - eta^p``
satisfies a one-sided inequality on ``Theta = 2 s Phi' - Phi``: from below
by ``a s^(p/2) - b eta^gamma`` when p > 1 and from above by
``-a s^(p/2) + b eta^gamma`` when p < 1.  The plot shows ``Theta`` against
the certified envelope for a few exponents.
"""

import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from hjdecay import PurePower, certify, eval_theta_eta

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demos_out")
out.mkdir(exist_ok=True)

s = np.geomspace(1e-4, 1e2, 300)
eta = 0.1
fig, axes = plt.subplots(1, 4, figsize=(12, 3.2))
for ax, p in zip(axes, (0.5, 1.5, 2.0, 3.0)):
    spec = PurePower(p)
    c = certify(spec)
    th = eval_theta_eta(spec, eta, s)
    sign = 1.0 if p > 1 else -1.0
    env = sign * (c.a * s ** (p / 2) - c.b * eta**c.gamma)
    print(f"p={p}: a={c.a:g} b={c.b:g} gamma={c.gamma:g} ({c.direction} bound)")
    ax.semilogx(s, th, label="Theta")
    ax.semilogx(s, env, "--", label=f"{c.direction} envelope")
    ax.set_title(f"p = {p}")
    ax.set_xlabel("s")
    ax.legend(fontsize=7)
fig.tight_layout()
fig.savefig(out / "certificates.png", dpi=120)
print("wrote", out / "certificates.png")
