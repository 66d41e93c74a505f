"""Six-state Williams-Otto reactor: sample, fit and predict x6.

States are mass fractions scaled by their steady-state values. Training
states come from an open-loop orbit with the A feed switching by +/-50%,
each paired with a random gain pair for u = 10**a1 x3 + 3 * 10**a2 x6.
Runs in about ten seconds.

    python demos/williams_otto_walkthrough.py
"""
import numpy as np

from koopnem import PolicyKernelSpec, RadialKernelSpec, assemble, fit_kernel_edmd, sparsity
from koopnem.prediction import error_surface
from koopnem.simulators import WilliamsOttoModel, WilliamsOttoSystem, generate_wo_sample, wo_disturbance_cost_experiment

model = WilliamsOttoModel()
print("refined steady state:", np.round(model.steady_state, 5))

data = generate_wo_sample(1000, seed=0, model=model)
kx, ku = RadialKernelSpec.wendland(1, 1, 9.0), PolicyKernelSpec(1.0, parameter_dimension=2)
grams = assemble(data, kx, ku)
print(f"sum-of-entries sparsity: G_xu {sparsity(grams.G_xu):.2%}, G_yy {sparsity(grams.G_yy):.2%}")

op = fit_kernel_edmd(grams, dataset=data, kx=kx, ku=ku)
test = generate_wo_sample(250, seed=1000, model=model)
surf = error_surface(op, WilliamsOttoSystem(model), test.states, test.policy_params, (1, 4, 16, 32), coordinates=(5,))
radius = np.linalg.norm(data.scale(test.states), axis=1)
near = np.argsort(radius)[:25]
for h in surf.horizons:
    e = surf.at(h)[:, 0]
    print(f"  x6 |error| t={h:2d}: median {np.median(e):.2e} overall, {np.median(e[near]):.2e} nearest 10%")

# The tuning landscape the operator is meant to stand in for.
print("undiscounted 250-step cost under +/-25% feed noise:")
for k1, k2 in ((0.3, 1.0), (0.03, 0.1), (1.0, 3.0)):
    c = np.mean([wo_disturbance_cost_experiment(k1, k2, seed=s, horizon=250, model=model) for s in range(2)])
    print(f"  k1={k1:<5} k2={k2:<4} cost {c:.4f}")
