"""
Joint-distribution (Geweke) check for the conjugate and Metropolis updates.

Two ways of drawing from the joint p(params, data) are compared:

* marginal-conditional: params from the prior, nothing else;
* successive-conditional: alternate data ~ p(data | params) with one sweep
  of the sampler's updates params ~ T(. | data).

If the updates leave the posterior invariant, the params marginals of the
two streams agree. The data-generating step here is the model the updates
condition on: with parents observed, every (node, layer) background fires
at rate lambda and every edge (u, v, k) fires children at rate W times the
delay kernel. A and S are held at one fixed draw, and the parents are not
resampled (the parent step is checked separately by exact enumeration).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import ks_2samp

from .generative import sample_adjacency, sample_influence
from .inference import (compute_sufficient_stats, mh_update_pi, sample_adjacency_posterior,
                        sample_background_rates, sample_influences)
from .model import DelayKernel, EventLog, Hyperparameters, MultiplexParams, NodeParams, \
    ParentAssignment


@dataclass
class GewekeResult:
    marginal: dict      # name -> (n,) prior draws
    successive: dict    # name -> (n,) chain draws
    pvalues: dict       # name -> two-sample KS p-value

    def passed(self, level=0.01):
        return all(p > level for p in self.pvalues.values())


def _prior_draw(nodes: NodeParams, hyper: Hyperparameters, rng):
    N, K = nodes.background.shape
    pi = rng.dirichlet(hyper.gamma(K))
    G = sample_adjacency(pi, nodes, rng)
    W = sample_influence(G, hyper, rng)
    shape, rate = hyper.background(N, K)
    lam = rng.gamma(shape, 1.0 / rate)
    fresh = NodeParams(lam, nodes.authoritative, nodes.susceptible, nodes.topic_prior)
    return MultiplexParams(G, W, fresh, pi)


def simulate_observed(params: MultiplexParams, window, kernel: DelayKernel, rng):
    """Event log with its parents, from the superposition model described above."""
    N, K = params.n_nodes, params.n_layers
    times, owners, parents, layers = [], [], [], []
    frontier = []
    for u in range(N):
        for k in range(K):
            for t in rng.uniform(0.0, window, size=rng.poisson(params.nodes.background[u, k] * window)):
                times.append(float(t))
                owners.append(u)
                parents.append(len(times) - 1)
                layers.append(k)
                frontier.append(len(times) - 1)
    while frontier:
        m = frontier.pop()
        u, s = owners[m], times[m]
        for v, k in zip(*np.nonzero(params.adjacency[u])):
            for d in kernel.sample(rng, rng.poisson(params.influence[u, v, k])):
                if s + d <= window:
                    times.append(s + float(d))
                    owners.append(int(v))
                    parents.append(m)
                    layers.append(int(k))
                    frontier.append(len(times) - 1)

    M = len(times)
    order = np.argsort(np.asarray(times), kind="stable")
    rank = np.empty(M, np.int64)
    rank[order] = np.arange(M)
    truth = ParentAssignment(rank[np.asarray(parents, np.int64)[order]] if M else np.zeros(0, np.int64),
                             np.asarray(layers, np.int64)[order] if M else np.zeros(0, np.int64))
    topics = np.full((M, K), 1.0 / K)
    return EventLog(np.asarray(times, float)[order] if M else np.zeros(0),
                    np.asarray(owners, np.int64)[order] if M else np.zeros(0, np.int64),
                    topics, float(window), N, truth)


def _record(params):
    return {"lambda": params.nodes.background[0, 0],
            "W": params.influence.sum(),
            "pi": params.layer_activity[0]}


def geweke_test(n_nodes=3, n_layers=2, window=1.0, n_samples=2000, thin=10, pi_steps=5, seed=0,
                hyper: Hyperparameters | None = None, kernel: DelayKernel = DelayKernel(),
                mode="compensator"):
    """Run both streams and KS-compare the marginals of lambda_00, total W and pi_0.

    Successive draws are thinned by `thin` sweeps, each with `pi_steps`
    Metropolis steps for pi, so that the retained draws are close to
    independent as the KS test assumes.
    """
    if hyper is None:
        hyper = Hyperparameters(influence_shape=2.0, influence_rate=4.0, background_shape=2.0,
                                background_rate=4.0, mh_concentration=20.0)
    rng = np.random.default_rng(seed)
    N, K = n_nodes, n_layers
    nodes = NodeParams(np.zeros((N, K)), rng.dirichlet(hyper.alpha(K), size=N),
                       rng.dirichlet(hyper.beta(K), size=N), hyper.topic(N, K))

    marginal = {"lambda": [], "W": [], "pi": []}
    for _ in range(n_samples):
        for name, val in _record(_prior_draw(nodes, hyper, rng)).items():
            marginal[name].append(val)

    params = _prior_draw(nodes, hyper, rng)
    successive = {"lambda": [], "W": [], "pi": []}
    for i in range(n_samples * thin):
        log = simulate_observed(params, window, kernel, rng)
        stats = compute_sufficient_stats(log, log.ground_truth, kernel, N, K)
        params.nodes.background = sample_background_rates(stats, hyper, window, rng)
        params.adjacency = sample_adjacency_posterior(params, stats, hyper, rng, mode)
        params.influence = sample_influences(stats, params.adjacency, hyper, rng, mode)
        for _ in range(pi_steps):
            params.layer_activity, _ = mh_update_pi(params, hyper, rng)
        if (i + 1) % thin == 0:
            for name, val in _record(params).items():
                successive[name].append(val)

    marginal = {k: np.asarray(v) for k, v in marginal.items()}
    successive = {k: np.asarray(v) for k, v in successive.items()}
    pvalues = {k: float(ks_2samp(marginal[k], successive[k]).pvalue) for k in marginal}
    return GewekeResult(marginal, successive, pvalues)
