import numpy as np
import pytest
from scipy.integrate import trapezoid
from hypothesis import given, settings
from hypothesis import strategies as st

from multiplex_hawkes.errors import SupercriticalError
from multiplex_hawkes.generative import (SimulationConfig, replication_rngs, sample_adjacency,
                                         sample_influence, sample_memberships, sample_params,
                                         simulate_cascades)
from multiplex_hawkes.model import (DelayKernel, Hyperparameters, MultiplexParams, NodeParams,
                                    delay_mass, edge_probabilities)


def _nodes(n, k, A=None, S=None, lam=None):
    A = np.full((n, k), 1.0 / k) if A is None else np.asarray(A, float)
    S = np.full((n, k), 1.0 / k) if S is None else np.asarray(S, float)
    lam = np.zeros((n, k)) if lam is None else np.asarray(lam, float)
    return NodeParams(lam, A, S, np.ones((n, k)))


def test_config_validation():
    with pytest.raises(ValueError):
        SimulationConfig(1, 2, 10.0)
    with pytest.raises(ValueError):
        SimulationConfig(3, 0, 10.0)
    with pytest.raises(ValueError):
        SimulationConfig(3, 2, 10.0, max_events=0)


def test_memberships_concentrated_prior():
    cfg = SimulationConfig(3, 3, 10.0, hyper=Hyperparameters(layer_prior=[1e6, 1e-6, 1e-6]))
    pi, _ = sample_memberships(cfg, np.random.default_rng(0))
    assert np.allclose(pi, [1, 0, 0], atol=1e-3)


def test_memberships_symmetric_mean():
    cfg = SimulationConfig(2, 3, 10.0)
    rng = np.random.default_rng(1)
    draws = np.array([sample_memberships(cfg, rng)[0] for _ in range(10000)])
    se = draws.std(0) / np.sqrt(len(draws))
    assert np.all(np.abs(draws.mean(0) - 1 / 3) < 3 * se)


def test_memberships_deterministic():
    cfg = SimulationConfig(4, 2, 10.0)
    a = sample_memberships(cfg, np.random.default_rng(7))
    b = sample_memberships(cfg, np.random.default_rng(7))
    assert np.array_equal(a[0], b[0])
    assert np.array_equal(a[1].background, b[1].background)


def test_adjacency_empty_and_complete():
    rng = np.random.default_rng(0)
    assert sample_adjacency(np.zeros(2), _nodes(4, 2), rng).sum() == 0
    one = np.array([[1.0, 0.0]] * 4)
    G = sample_adjacency(np.array([1.0, 0.0]), _nodes(4, 2, one, one), rng)
    off = ~np.eye(4, dtype=bool)
    assert np.all(G[..., 0][off] == 1)
    assert np.all(G[..., 1] == 0)
    assert np.all(G[np.arange(4), np.arange(4)] == 0)


def test_adjacency_frequency_matches_edge_probability():
    rng = np.random.default_rng(2)
    nodes = _nodes(3, 2, rng.dirichlet([1, 1], 3), rng.dirichlet([1, 1], 3))
    pi = np.array([0.7, 0.3])
    rho = edge_probabilities(pi, nodes.authoritative, nodes.susceptible)
    freq = np.mean([sample_adjacency(pi, nodes, rng) for _ in range(5000)], axis=0)
    se = np.sqrt(rho * (1 - rho) / 5000)
    off = rho > 0
    assert np.all(np.abs(freq - rho)[off] <= 3 * se[off] + 1e-12)


def test_influence_structural_zeros_and_moments():
    rng = np.random.default_rng(3)
    assert np.all(sample_influence(np.zeros((3, 3, 2)), Hyperparameters(), rng) == 0)
    G = np.ones((1, 1, 10000), np.int8)
    W = sample_influence(G, Hyperparameters(influence_shape=2, influence_rate=4), rng)
    se = W.std() / np.sqrt(W.size)
    assert abs(W.mean() - 0.5) < 3 * se
    G = (rng.random((4, 4, 2)) < 0.5).astype(np.int8)
    W = sample_influence(G, Hyperparameters(), rng)
    assert np.all(W[G == 0] == 0) and np.all(W[G == 1] > 0)


def _params(G, W, lam, A=None, S=None, pi=None):
    n, _, k = G.shape
    return MultiplexParams(G, W, _nodes(n, k, A, S, lam),
                           np.full(k, 1.0 / k) if pi is None else pi)


def test_zero_background_gives_empty_log():
    G = np.zeros((3, 3, 2), np.int8)
    p = _params(G, G * 1.0, np.zeros((3, 2)))
    log = simulate_cascades(p, SimulationConfig(3, 2, 100.0))
    assert len(log) == 0 and len(log.ground_truth) == 0


def test_spontaneous_count_is_poisson_mean():
    G = np.zeros((2, 2, 1), np.int8)
    lam = np.array([[0.3], [0.0]])
    p = _params(G, G * 0.0, lam)
    cfg = SimulationConfig(2, 1, 10.0)
    counts = []
    for rng in replication_rngs(0, 2000):
        log = simulate_cascades(p, cfg, rng)
        assert np.all(log.ground_truth.spontaneous)
        counts.append(len(log))
    counts = np.array(counts)
    assert abs(counts.mean() - 3.0) < 3 * counts.std() / np.sqrt(len(counts))


def _two_node_oracle(rng, lam, w, T, kernel):
    """Hand-rolled simulation of one spontaneous stream on node 0 and its
    children on node 1, with point-mass topic and susceptibility."""
    n_spont = rng.poisson(lam * T)
    starts = rng.uniform(0, T, n_spont)
    children = 0
    for s in starts:
        d = kernel.sample(rng, rng.poisson(w))
        children += int(np.sum(s + d <= T))
    return n_spont, children


def test_children_per_event_matches_two_node_oracle():
    T, lam, w = 4.0, 0.5, 1.0
    kernel = DelayKernel()
    G = np.zeros((2, 2, 1), np.int8)
    G[0, 1, 0] = 1
    p = _params(G, G * w, np.array([[lam], [0.0]]))
    cfg = SimulationConfig(2, 1, T)

    rng = np.random.default_rng(11)
    n_s = n_c = o_s = o_c = 0
    for r in replication_rngs(5, 2000):
        log = simulate_cascades(p, cfg, r)
        n_s += int(log.ground_truth.spontaneous.sum())
        n_c += int((~log.ground_truth.spontaneous).sum())
        a, b = _two_node_oracle(rng, lam, w, T, kernel)
        o_s += a
        o_c += b
    sim_ratio = n_c / n_s
    oracle_ratio = o_c / o_s
    # expected ratio: W * E[mass(0, T - s)] with s uniform on [0, T]
    grid = np.linspace(0, T, 4001)
    expected = w * trapezoid(delay_mass(0, T - grid), grid) / T
    se = np.sqrt(expected / n_s) * 1.5
    assert abs(sim_ratio - expected) < 3 * se
    assert abs(oracle_ratio - expected) < 3 * se


def test_supercritical_raises_with_cap():
    G = np.ones((2, 2, 1), np.int8)
    G[np.arange(2), np.arange(2)] = 0
    p = _params(G, G * 5.0, np.array([[1.0], [1.0]]), A=[[1.0], [1.0]], S=[[1.0], [1.0]])
    with pytest.raises(SupercriticalError, match="max_events=500"):
        simulate_cascades(p, SimulationConfig(2, 1, 50.0, max_events=500))


def test_channel_needs_edge_layer():
    # topic and susceptibility favour layer 1 but only layer 0 carries an edge
    G = np.zeros((2, 2, 2), np.int8)
    G[0, 1, 0] = 1
    p = _params(G, G * 3.0, np.array([[0.5, 0.0], [0.0, 0.0]]),
                A=[[1.0, 0.0], [1.0, 0.0]], S=[[0.5, 0.5], [0.5, 0.5]])
    log = simulate_cascades(p, SimulationConfig(2, 2, 50.0, seed=1))
    trig = ~log.ground_truth.spontaneous
    assert trig.any()
    assert np.all(log.ground_truth.layers[trig] == 0)


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=15, deadline=None)
def test_ground_truth_validity(seed):
    hyper = Hyperparameters(influence_shape=1, influence_rate=2, background_rate=20)
    cfg = SimulationConfig(4, 2, 200.0, hyper=hyper, seed=seed)
    rng = np.random.default_rng(seed)
    params = sample_params(cfg, rng)
    log = simulate_cascades(params, cfg, rng)
    truth = log.ground_truth
    assert np.all(np.diff(log.times) >= 0)
    assert np.all(log.times <= cfg.window)
    trig = np.flatnonzero(~truth.spontaneous)
    p, k = truth.parents[trig], truth.layers[trig]
    src, dst = log.nodes[p], log.nodes[trig]
    assert np.all(log.times[p] < log.times[trig])
    assert np.all(params.adjacency[src, dst, k] == 1)
    assert np.all(params.influence[src, dst, k] > 0)
    assert np.all(log.topics[p, k] * params.nodes.susceptible[dst, k] > 0)
    sp = np.flatnonzero(truth.spontaneous)
    assert np.all(params.nodes.authoritative[log.nodes[sp], truth.layers[sp]] > 0)
    # children copy the parent's topic
    assert np.array_equal(log.topics[trig], log.topics[p])


def test_seed_determinism():
    cfg = SimulationConfig(5, 2, 300.0, hyper=Hyperparameters(background_rate=20), seed=9)
    a = simulate_cascades(sample_params(cfg, np.random.default_rng(1)), cfg)
    b = simulate_cascades(sample_params(cfg, np.random.default_rng(1)), cfg)
    assert np.array_equal(a.times, b.times) and np.array_equal(a.nodes, b.nodes)
    assert a.ground_truth == b.ground_truth


def test_spontaneous_layer_mixture_with_point_mass_authoritative():
    # A_u a point mass on layer 1: all spontaneous events land on layer 1
    G = np.zeros((2, 2, 2), np.int8)
    lam = np.array([[0.1, 0.4], [0.0, 0.0]])
    p = _params(G, G * 0.0, lam, A=[[0.0, 1.0], [0.5, 0.5]])
    counts = []
    for rng in replication_rngs(3, 1000):
        log = simulate_cascades(p, SimulationConfig(2, 2, 10.0), rng)
        assert np.all(log.ground_truth.layers == 1)
        counts.append(len(log))
    counts = np.array(counts)
    assert abs(counts.mean() - 4.0) < 3 * counts.std() / np.sqrt(len(counts))


def test_restrict_keeps_prefix_and_truth():
    hyper = Hyperparameters(influence_shape=1, influence_rate=2, background_rate=20)
    cfg = SimulationConfig(4, 2, 400.0, hyper=hyper, seed=3)
    rng = np.random.default_rng(3)
    log = simulate_cascades(sample_params(cfg, rng), cfg, rng)
    short = log.restrict(150.0)
    assert short.window == 150.0
    assert np.all(short.times <= 150.0)
    assert np.array_equal(short.times, log.times[:len(short)])
    assert short.ground_truth == log.ground_truth.restrict(len(short))
