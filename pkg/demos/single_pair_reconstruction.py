"""Reconstruct a 5-level mixed-unitary channel from ONE input/output pair.

The unknown channel mixes five random unitaries. We start the descent
flow with ten components (twice the true rank) and watch it shed the
redundant ones: each time a weight hits zero the solver freezes, drops
that component, and restarts with the smaller mixture. The objective
falls monotonically all the way to the 1e-17 stopping threshold.

One pair of states does not determine the channel, so the recovered
channel reproduces the data perfectly while staying far from the truth
in Choi distance. See multi_pair_recovery.py for how more data fixes
that.

Run:  python demos/single_pair_reconstruction.py
"""

import numpy as np

from unimix import (
    FlowConfig,
    ObjectiveInstance,
    choi_distance,
    generate_dataset,
    random_channel,
    run,
    value,
)
from unimix.solver import write_trajectory_csv

rng = np.random.default_rng(2024)

n, r_true, R = 5, 5, 10
true_channel = random_channel(n, r_true, rng)
dataset = generate_dataset(true_channel, 1, rng)
inst = ObjectiveInstance.from_pairs(dataset.pairs)

print(f"Unknown channel: {r_true} unitaries on C^{n}, one observed pair.")
print(f"Starting the flow with R = {R} components (twice the true rank).\n")

result = run(inst, FlowConfig(seed=1), n_components=R)

print(f"stop reason      : {result.stop_reason}")
print(f"final objective  : {result.final_objective:.3e}")
print(f"flow time        : {result.state.t:.3g}")
print(f"accepted steps   : {result.n_steps}")
print(f"components left  : {result.state.n_active} of {R}")
print(f"restarts         : {len(result.record.events)}")
for e in result.record.events:
    print(f"  t = {e.t_hat:10.4f}  removed component {e.removed_index}")

# the returned channel reproduces the data to the stopping tolerance
f_check = value(result.channel.weights, result.channel.unitaries, inst)
print(f"\nobjective of returned channel (recomputed): {f_check:.3e}")

d = choi_distance(true_channel, result.channel)
print(f"Choi distance to the true channel         : {d:.3e}")
print("Large, despite a perfect data fit: one pair underdetermines the map.")

write_trajectory_csv(result.record, "single_pair_trajectory.csv")
print("\nWrote single_pair_trajectory.csv (t, f, sum_p, field_norm, weights, events).")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    samples = result.record.samples
    ts = np.array([s.t for s in samples])
    fs = np.array([s.f for s in samples])
    sums = np.array([s.sum_p for s in samples])
    ev_t = [e.t_hat for e in result.record.events]

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    pos = ts > 0
    ax1.loglog(ts[pos], fs[pos], lw=1.2)
    for t in ev_t:
        ax1.axvline(t, color="red", alpha=0.4, lw=0.8)
    ax1.set_xlabel("t")
    ax1.set_ylabel("objective")
    ax1.set_title("descent with restarts (red)")
    ax2.semilogx(ts[pos], sums[pos] - 1.0, lw=1.2)
    ax2.set_xlabel("t")
    ax2.set_ylabel("sum(p) - 1")
    ax2.set_title("weight-sum conservation")
    fig.tight_layout()
    fig.savefig("single_pair_reconstruction.png", dpi=120)
    print("Wrote single_pair_reconstruction.png.")
except ImportError:
    pass
