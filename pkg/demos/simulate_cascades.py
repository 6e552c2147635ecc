"""
Sample one multiplex network from the prior and simulate cascades on it.

Prints the layer weights, the edges per layer and how the simulated events
split into spontaneous ones and those triggered through each layer.

    python demos/simulate_cascades.py
"""
import numpy as np

from multiplex_hawkes import Hyperparameters, SimulationConfig, sample_params, simulate_cascades

hyper = Hyperparameters(influence_shape=3.0, influence_rate=1.0,
                        background_shape=2.0, background_rate=800.0)
cfg = SimulationConfig(n_nodes=9, n_layers=3, window=5000.0, hyper=hyper, seed=0)
rng = np.random.default_rng(cfg.seed)

params = sample_params(cfg, rng)
print("layer activity pi:", np.round(params.layer_activity, 3))
print("edges per layer:  ", params.adjacency.sum(axis=(0, 1)))
print("mean edge weight: ", round(float(params.influence[params.adjacency > 0].mean()), 3))

log = simulate_cascades(params, cfg, rng)
truth = log.ground_truth
spont = truth.spontaneous
print(f"\n{len(log)} events in [0, {log.window:g}]")
print(f"  spontaneous: {spont.sum()}")
for k in range(cfg.n_layers):
    print(f"  triggered on layer {k}: {np.sum(~spont & (truth.layers == k))}")

# delays between a child and its parent follow the lognormal kernel
child = np.flatnonzero(~spont)
delays = log.times[child] - log.times[truth.parents[child]]
print(f"\nmedian parent->child delay {np.median(delays):.3f} "
      f"(kernel median {np.exp(cfg.kernel.log_mean):.3f})")

# shorter windows are prefixes of the same run
for T in (1000.0, 2000.0, 5000.0):
    print(f"window {T:>6g}: {len(log.restrict(T))} events")
