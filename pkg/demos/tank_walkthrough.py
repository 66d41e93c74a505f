"""Learn the tank's closed-loop operator and use it for prediction and cost.

The tank level x moves by x + 0.2 - (11 + 7(1 + 0.05**a))**-0.5 per
2-minute step, and the valve follows a = tanh(10**alpha x). One operator
is fit on a 21 x 21 grid of (x, alpha) and then queried for policies it
never saw.

    python demos/tank_walkthrough.py
"""
import numpy as np

from koopnem import PolicyKernelSpec, RadialKernelSpec, assemble, empirical_loss, fit_kernel_edmd, fit_rrr
from koopnem.cost import CostSpec, cost_surface
from koopnem.prediction import error_surface, predict_trajectory
from koopnem.simulators import TankSystem, generate_tank_grid, simulate

# Sample and kernels: (1 - |dx|)^2 on levels, Gaussian with width 1/4 on alpha.
data = generate_tank_grid(21, 21)
kx = RadialKernelSpec.wendland(1, 1, 1.0)
ku = PolicyKernelSpec(0.25)
grams = assemble(data, kx, ku)

edmd = fit_kernel_edmd(grams, jitter=0.0, dataset=data, kx=kx, ku=ku)
print(f"kernel EDMD on m={data.m}: empirical loss {empirical_loss(edmd, grams):.1e}")

# One policy off the training grid, rolled out for 20 steps.
x0, alpha = np.array([1.7]), np.array([0.33])
pred = predict_trajectory(edmd, x0, alpha, 20)[:, 0]
true = simulate(TankSystem(), x0, alpha, 20)[1:, 0]
for t in (1, 5, 10, 20):
    print(f"  t={t:2d}  predicted {pred[t - 1]:+.4f}  simulated {true[t - 1]:+.4f}")

# Error surfaces on a finer 41 x 41 grid, EDMD against reduced-rank regression.
X, A = np.meshgrid(np.linspace(-2, 2, 41), np.linspace(-1, 1, 41), indexing="ij")
X, A = X.ravel()[:, None], A.ravel()[:, None]
beta = 1e-2 * np.linalg.eigvalsh(grams.G_xu)[-1]
rrr, _ = fit_rrr(grams, beta, 20, data, kx, ku)
for name, op in (("EDMD", edmd), ("RRR r=20", rrr)):
    surf = error_surface(op, TankSystem(), X, A, (1, 8, 64))
    meds = ", ".join(f"t={h}: {np.median(surf.at(h)):.4f}" for h in surf.horizons)
    print(f"{name:9s} median |error|  {meds}  (max at t=1: {surf.at(1).max():.3f})")

# Discounted 30-step cost, predicted from propagated features.
cs = cost_surface(edmd, TankSystem(), X, A, CostSpec(gamma=0.95, horizon=30))
print(f"cost: Pearson {np.corrcoef(cs.actual, cs.predicted)[0, 1]:.4f}, "
      f"median |error| {np.median(cs.abs_error):.3f} on costs up to {cs.actual.max():.1f}")
