"""The three error calculators side by side.

* high-probability generalization gap of reduced-rank regression
* geometric accumulation of one-step prediction errors
* finite-horizon cost-error bound, its relaxed cap and its exact limit

    python demos/bounds_tour.py
"""
from koopnem import generalization_bound
from koopnem.cost import cost_bound, cost_bound_cap, cost_bound_limit
from koopnem.prediction import multistep_bound, multistep_cap

print("generalization gap, delta=0.05, beta=0.01, r=20")
for m in (441, 10**3, 10**4, 10**5, 10**6):
    print(f"  m={m:>8d}: {generalization_bound(m, 0.05, 0.01, 20):.4f}")

print("multistep error with c_eta=0.1")
for beta in (0.8, 1.0, 1.5):
    row = ", ".join(f"{multistep_bound(beta, 0.1, t):.3f}" for t in (0, 1, 5, 20))
    print(f"  beta={beta}: t=0,1,5,20 -> {row}; uniform cap {multistep_cap(beta, 0.1)}")

args = dict(beta=2.0, c_eta=0.1, c_Q=1.0, c_R=1.0, gamma=0.2)
print("cost error bound, beta=2, gamma=0.2")
for tau in (0, 1, 5, 30, 100):
    print(f"  tau={tau:3d}: {cost_bound(tau=tau, **args):.6f}")
print(f"  exact limit {cost_bound_limit(**args):.6f}, relaxed cap {cost_bound_cap(**args):.6f}")
