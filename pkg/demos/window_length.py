"""
How much does a longer observation window help?

One network, one simulated run, inferred from growing prefixes of it.

    python demos/window_length.py
"""
import numpy as np

from multiplex_hawkes import (ChainConfig, Hyperparameters, SimulationConfig, run_chain,
                              sample_params, simulate_cascades)
from multiplex_hawkes.evaluation import evaluate, tae

hyper = Hyperparameters(influence_shape=3.0, influence_rate=1.0,
                        background_shape=2.0, background_rate=800.0)
cfg = SimulationConfig(9, 3, 5000.0, hyper=hyper, seed=4)
rng = np.random.default_rng(cfg.seed)
truth = sample_params(cfg, rng)
full = simulate_cascades(truth, cfg, rng)

print("window  events  parent+channel  influence TAE  AUC")
for T in (500.0, 1000.0, 2000.0, 5000.0):
    log = full.restrict(T)
    res = run_chain(log, ChainConfig(iterations=400, burn_in=100, thin=10, seed=4), hyper)
    rep = evaluate(truth, res.summary, log.ground_truth, res.summary.map_assignment())
    print(f"{T:>6g}  {len(log):>6}  {rep.parent_channel_accuracy:>14.3f}  "
          f"{tae(truth.influence, res.summary.influence):>13.2f}  {rep.edge_auc:.3f}")
