"""Sanity-check the calculus behind the flow.

Two independent verifications:

1. Finite differences. The analytic directional derivatives (the
   Wirtinger gradients in U, the plain partials in p) are compared to
   central differences of the loss along curves that stay exactly on the
   constraint set: U_k(s) = U_k expm(s S_k) with S_k skew-Hermitian, and
   p(s) = p + s delta with sum(delta) = 0.

2. Descent sign. Pairing the gradient with the projected field must
   come out non-positive at every point; that is the mechanism behind
   the monotone decrease of the loss.

Run:  python demos/gradient_and_descent_checks.py
"""

import numpy as np

from unimix import ObjectiveInstance, generate_dataset, random_channel
from unimix.linalg import haar_random_unitary
from unimix.objective import descent_rate, flow_field, gradient, gradient_check

print("Finite-difference check (central differences, h = 1e-5):")
rng = np.random.default_rng(5)
worst = 0.0
for n, r, m in [(2, 1, 1), (3, 2, 1), (5, 5, 3)]:
    err = gradient_check(n, r, m, trials=50, rng=rng)
    worst = max(worst, err)
    print(f"  n={n} r={r} m={m}: max relative error {err:.2e} over 50 random states")
print(f"  worst overall: {worst:.2e}\n")

print("Descent property <gradient, field> <= 0 at 1000 random states:")
local = np.random.default_rng(11)
chan = random_channel(4, 3, local)
ds = generate_dataset(chan, 2, local)
inst = ObjectiveInstance.from_pairs(ds.pairs)
rates = []
for _ in range(1000):
    p = local.dirichlet(np.ones(3))
    U = np.stack([haar_random_unitary(4, local) for _ in range(3)])
    g = gradient(p, U, inst)
    rates.append(descent_rate(g, flow_field(p, U, inst, grad=g)))
rates = np.array(rates)
print(f"  max rate  : {rates.max():.3e}  (must not exceed ~1e-12)")
print(f"  median    : {np.median(rates):.3e}")
print(f"  all <= 0  : {bool((rates <= 1e-12).all())}")
