"""
Infer the hidden network behind one simulated event log and score it.

The sampler only sees event times, nodes and topic vectors. The script
compares its posterior with the network that generated the data.

    python demos/infer_network.py
"""
import numpy as np

from multiplex_hawkes import (ChainConfig, Hyperparameters, SimulationConfig, run_chain,
                              sample_params, simulate_cascades)
from multiplex_hawkes.evaluation import convergence_trace, evaluate

hyper = Hyperparameters(influence_shape=3.0, influence_rate=1.0,
                        background_shape=2.0, background_rate=800.0)
cfg = SimulationConfig(9, 3, 5000.0, hyper=hyper, seed=1)
rng = np.random.default_rng(cfg.seed)
truth = sample_params(cfg, rng)
log = simulate_cascades(truth, cfg, rng)
print(f"{len(log)} events, {int(truth.adjacency.sum())} true edges")

result = run_chain(log, ChainConfig(iterations=600, burn_in=150, thin=15, seed=1), hyper)
summary = result.summary
print("Metropolis acceptance:", {k: round(v, 2) for k, v in result.acceptance.items()})

report = evaluate(truth, summary, log.ground_truth, summary.map_assignment(), trace=result.trace)
for name, value in report.rows():
    print(f"  {name:<24} {value:.3f}")

# the ten highest-ranked (source, target, layer) entries
order = np.argsort(summary.edge_probability, axis=None)[::-1][:10]
print("\n  u  v  k   P(edge)  true")
for u, v, k in zip(*np.unravel_index(order, summary.edge_probability.shape)):
    print(f"  {u}  {v}  {k}   {summary.edge_probability[u, v, k]:.3f}    "
          f"{int(truth.adjacency[u, v, k])}")

series = convergence_trace(result.trace.parents, result.trace.layers, log.ground_truth)
print("\nparent+channel accuracy at iterations 1, 10, 50, 600:",
      np.round(series[[0, 9, 49, -1]], 3))
