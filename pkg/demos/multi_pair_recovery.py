"""More data pins down the channel: Choi error versus number of pairs.

The same hidden 5-level, rank-5 channel is reconstructed from datasets
of increasing size. Each reconstruction drives the loss below 1e-17, so
the difference is purely in how well the data constrains the map: with
one pair the recovered channel is essentially arbitrary among exact
fits, with dozens of pairs it converges to the truth in Choi distance.

Run:  python demos/multi_pair_recovery.py   (about a minute)
"""

import numpy as np

from unimix import (
    FlowConfig,
    ObjectiveInstance,
    choi_distance,
    generate_dataset,
    random_channel,
    run,
)

rng = np.random.default_rng(7)

n, r_true, R = 5, 5, 10
true_channel = random_channel(n, r_true, rng)

print(f"Hidden channel: {r_true} unitaries on C^{n}. Reconstructing with R = {R}.\n")
print(f"{'pairs':>6} {'final f':>10} {'restarts':>9} {'rank':>5} {'Choi distance':>14}")

for m in (1, 5, 20):
    dataset = generate_dataset(true_channel, m, np.random.default_rng([40, m]))
    inst = ObjectiveInstance.from_pairs(dataset.pairs)
    result = run(inst, FlowConfig(seed=3), n_components=R)
    d = choi_distance(true_channel, result.channel)
    print(f"{m:6d} {result.final_objective:10.1e} {len(result.record.events):9d} "
          f"{result.state.n_active:5d} {d:14.3e}")

print("""
Every run fits its own data to machine precision; only the larger
datasets force the recovered map toward the true one. Reconstruction
error in Choi norm drops by orders of magnitude as pairs are added,
which is exactly the multi-shot story. For an ensemble version over
many initial guesses, use the command line:

    unimix repro --experiment example1-multi --pairs 100 --runs 20 --jobs 2 --out-dir out
""")
