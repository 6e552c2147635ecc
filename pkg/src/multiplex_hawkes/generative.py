"""
Sampling multiplex networks from the mixed-membership prior and
forward-simulating marked cascades over them.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import SupercriticalError
from .model import (DelayKernel, EventLog, Hyperparameters, MultiplexParams,
                    NodeParams, ParentAssignment, edge_probabilities)


@dataclass
class SimulationConfig:
    n_nodes: int
    n_layers: int
    window: float
    hyper: Hyperparameters = field(default_factory=Hyperparameters)
    kernel: DelayKernel = field(default_factory=DelayKernel)
    seed: int = 0
    max_events: int = 100_000

    def __post_init__(self):
        if self.n_nodes < 2:
            raise ValueError("n_nodes must be >= 2")
        if self.n_layers < 1:
            raise ValueError("n_layers must be >= 1")
        if not self.window > 0:
            raise ValueError("window must be positive")
        if self.max_events <= 0:
            raise ValueError("max_events must be positive")


def replication_rngs(seed, n):
    """Independent generators for `n` replications derived from one seed."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def sample_memberships(config: SimulationConfig, rng):
    """Draw layer activity, authoritative/susceptible vectors and background rates."""
    N, K = config.n_nodes, config.n_layers
    hyper = config.hyper
    pi = rng.dirichlet(hyper.gamma(K))
    A = rng.dirichlet(hyper.alpha(K), size=N)
    S = rng.dirichlet(hyper.beta(K), size=N)
    shape, rate = hyper.background(N, K)
    lam = rng.gamma(shape, 1.0 / rate)
    return pi, NodeParams(lam, A, S, hyper.topic(N, K))


def sample_adjacency(pi, nodes: NodeParams, rng):
    rho = edge_probabilities(np.asarray(pi, float), nodes.authoritative, nodes.susceptible)
    return (rng.random(rho.shape) < rho).astype(np.int8)


def sample_influence(adjacency, hyper: Hyperparameters, rng):
    draws = rng.gamma(hyper.influence_shape, 1.0 / hyper.influence_rate, size=adjacency.shape)
    return np.where(adjacency == 1, draws, 0.0)


def sample_params(config: SimulationConfig, rng) -> MultiplexParams:
    """A full network draw: memberships, adjacency, influences, background rates."""
    pi, nodes = sample_memberships(config, rng)
    G = sample_adjacency(pi, nodes, rng)
    W = sample_influence(G, config.hyper, rng)
    return MultiplexParams(G, W, nodes, pi)


def simulate_cascades(params: MultiplexParams, config: SimulationConfig, rng=None) -> EventLog:
    """Breadth-first branching simulation of marked cascades on [0, window].

    Each node picks one spontaneous layer from its authoritative vector and
    emits Poisson(lambda * T) events uniformly in the window, each with a
    topic drawn from the node's topic prior. Every event then offers itself
    to each out-neighbour: at most one channel is drawn with probabilities
    topic * susceptibility over the layers carrying an edge, and that channel
    spawns Poisson(W) children at lognormal delays. Children copy the
    parent's topic; children past the window are dropped.

    The returned log carries the ground-truth parent assignment.
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    N, K = params.n_nodes, params.n_layers
    T = float(config.window)
    nodes = params.nodes
    G, W = params.adjacency, params.influence

    times, owners, topics, parents, layers = [], [], [], [], []

    def emit(t, v, theta, parent, k):
        if len(times) >= config.max_events:
            raise SupercriticalError(config.max_events)
        times.append(t)
        owners.append(v)
        topics.append(theta)
        parents.append(len(times) - 1 if parent is None else parent)
        layers.append(k)
        return len(times) - 1

    queue = deque()
    for u in range(N):
        k = rng.choice(K, p=nodes.authoritative[u])
        count = rng.poisson(nodes.background[u, k] * T)
        for t in rng.uniform(0.0, T, size=count):
            theta = rng.dirichlet(nodes.topic_prior[u])
            queue.append(emit(float(t), u, theta, None, int(k)))

    neighbours = [np.flatnonzero(G[u].any(axis=1)) for u in range(N)]
    while queue:
        m = queue.popleft()
        u, s, theta = owners[m], times[m], topics[m]
        for v in neighbours[u]:
            h = theta * nodes.susceptible[v] * G[u, v]
            k = int(np.searchsorted(np.cumsum(h), rng.random(), side="right"))
            if k >= K:
                continue  # no spread to v
            n_children = rng.poisson(W[u, v, k])
            for delay in config.kernel.sample(rng, n_children):
                t = s + float(delay)
                if t > T:
                    continue
                queue.append(emit(t, int(v), theta, m, k))

    if not times:
        return EventLog(np.zeros(0), np.zeros(0, np.int64), np.zeros((0, K)), T, N,
                        ParentAssignment(np.zeros(0, np.int64), np.zeros(0, np.int64)))

    order = np.argsort(np.asarray(times), kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    truth = ParentAssignment(rank[np.asarray(parents)[order]], np.asarray(layers)[order])
    return EventLog(np.asarray(times)[order], np.asarray(owners)[order],
                    np.asarray(topics)[order], T, N, truth)
