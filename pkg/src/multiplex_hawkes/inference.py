"""
Metropolis-within-Gibbs sampler for the multiplex diffusion model.

One sweep updates, in order: parent assignments, influences W, background
rates lambda, the adjacency tensor G (with W integrated out, followed by a
fresh W | G draw), layer activity pi, authoritative vectors A and
susceptible vectors S. The last three use random-walk Metropolis steps with
Dirichlet proposals centred on the current value.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, gammaln, logsumexp, roots_genlaguerre

from .errors import DegenerateSupportError
from .model import (LOG_FLOOR, DelayKernel, EventLog, Hyperparameters,
                    MultiplexParams, NodeParams, ParentAssignment, compensator_mass,
                    edge_probabilities, log_dirichlet)

logger = logging.getLogger(__name__)

RATE_MODES = ("compensator", "count")
ADJACENCY_UPDATES = ("collapsed", "conditional")


@dataclass
class ChainConfig:
    iterations: int = 1000
    burn_in: int = 200
    thin: int = 20
    seed: int = 0
    mh_concentration: float | None = None  # falls back to Hyperparameters.mh_concentration
    influence_rate: str = "compensator"
    keep_trace: bool = True
    allow_empty: bool = False
    max_lag: float | None = None  # drop parent candidates further back than this
    layer_swaps: bool = True
    adjacency_update: str = "collapsed"

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError("burn_in must satisfy 0 <= burn_in < iterations")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if self.influence_rate not in RATE_MODES:
            raise ValueError(f"influence_rate must be one of {RATE_MODES}")
        if self.adjacency_update not in ADJACENCY_UPDATES:
            raise ValueError(f"adjacency_update must be one of {ADJACENCY_UPDATES}")
        if self.mh_concentration is not None and not self.mh_concentration > 0:
            raise ValueError("mh_concentration must be positive")

    def retained(self, iteration):
        """Whether the sample after sweep `iteration` (1-based) is kept."""
        return iteration > self.burn_in and (iteration - self.burn_in - 1) % self.thin == 0


@dataclass
class ChainState:
    params: MultiplexParams
    assignment: ParentAssignment
    iteration: int = 0

    def copy(self):
        return ChainState(self.params.copy(), self.assignment.copy(), self.iteration)


@dataclass
class SufficientStatistics:
    triggered: np.ndarray     # (N, N, K) children on target by source, per layer
    node_counts: np.ndarray   # (N,) events per node
    spontaneous: np.ndarray   # (N, K) spontaneous events per node and layer
    receipts: np.ndarray      # (N, K) triggered events received per node and layer
    compensator: np.ndarray   # (N,) sum over a node's events of the in-window kernel mass

    def check_conservation(self):
        total = self.spontaneous.sum(1) + self.triggered.sum(axis=(0, 2))
        return bool(np.array_equal(total, self.node_counts))

    def exposure(self, mode="compensator"):
        """Rate increment for the influence posterior of each source node."""
        if mode == "compensator":
            return self.compensator
        if mode == "count":
            return self.node_counts.astype(float)
        raise ValueError(f"unknown influence rate mode {mode!r}")


@dataclass
class PosteriorSummary:
    influence: np.ndarray
    background: np.ndarray
    edge_probability: np.ndarray
    layer_activity: np.ndarray
    authoritative: np.ndarray
    susceptible: np.ndarray
    parent_frequencies: list  # per event: {(parent, layer): frequency}
    n_samples: int
    edge_frequency: np.ndarray | None = None  # raw share of draws with the edge on

    def map_assignment(self) -> ParentAssignment:
        labels = [max(freq.items(), key=lambda kv: (kv[1], -kv[0][0], -kv[0][1]))[0]
                  for freq in self.parent_frequencies]
        if not labels:
            return ParentAssignment(np.zeros(0, np.int64), np.zeros(0, np.int64))
        parents, layers = zip(*labels)
        return ParentAssignment(np.array(parents), np.array(layers))


@dataclass
class ChainTrace:
    """Per-sweep assignments for every iteration plus retained parameter draws."""

    parents: np.ndarray            # (iterations, M)
    layers: np.ndarray             # (iterations, M)
    sample_iterations: np.ndarray  # iteration numbers of retained draws
    samples: dict                  # name -> (n_samples, ...) array

    def assignment(self, i) -> ParentAssignment:
        return ParentAssignment(self.parents[i], self.layers[i])


@dataclass
class ChainResult:
    summary: PosteriorSummary
    state: ChainState
    trace: ChainTrace | None = None
    acceptance: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Parent assignments
# ---------------------------------------------------------------------------

class ParentCandidates:
    """All (child, earlier parent) pairs of a log with their log kernel values.

    Pairs are stored grouped by child so per-event reductions are cheap.
    """

    def __init__(self, log: EventLog, kernel: DelayKernel = DelayKernel(), max_lag=None):
        t = log.times
        children, parents = [], []
        for m in range(len(log)):
            lo = 0 if max_lag is None else np.searchsorted(t, t[m] - max_lag, side="left")
            hi = np.searchsorted(t, t[m], side="left")  # strictly earlier only
            if hi > lo:
                parents.append(np.arange(lo, hi))
                children.append(np.full(hi - lo, m))
        if parents:
            self.child = np.concatenate(children)
            self.parent = np.concatenate(parents)
        else:
            self.child = np.zeros(0, np.int64)
            self.parent = np.zeros(0, np.int64)
        self.log_delay = np.maximum(kernel.logpdf(t[self.child] - t[self.parent]), LOG_FLOOR)
        self.n_events = len(log)

    def __len__(self):
        return len(self.child)


def _label_log_weights(log: EventLog, params: MultiplexParams, cand: ParentCandidates):
    nodes = params.nodes
    c = log.nodes
    with np.errstate(divide="ignore"):
        log_dir = np.maximum(log_dirichlet(log.topics, nodes.topic_prior[c]), LOG_FLOOR)
        spont = (np.log(nodes.authoritative[c]) + np.log(nodes.background[c])
                 + log_dir[:, None])
        src, dst = c[cand.parent], c[cand.child]
        gw = params.adjacency[src, dst] * params.influence[src, dst]
        pair = (np.log(gw) + np.log(log.topics[cand.parent]) + np.log(nodes.susceptible[dst])
                + cand.log_delay[:, None])
    return spont, pair


def label_probabilities(log: EventLog, params: MultiplexParams, kernel=DelayKernel(),
                        candidates=None):
    """Normalised label probabilities for every event.

    Returns ``(spont, pair, candidates)`` where ``spont[m, k]`` is the
    probability that event m is spontaneous on layer k and ``pair[j, k]`` the
    probability that ``candidates.child[j]`` was triggered by
    ``candidates.parent[j]`` on layer k.
    """
    cand = candidates if candidates is not None else ParentCandidates(log, kernel)
    spont, pair = _label_log_weights(log, params, cand)
    w_s, w_p, totals = _normalise(spont, pair, cand)
    return w_s / totals[:, None], w_p / totals[cand.child][:, None], cand


def _normalise(spont, pair, cand):
    M = cand.n_events
    top = spont.max(axis=1)
    if len(cand):
        np.maximum.at(top, cand.child, pair.max(axis=1))
    bad = ~np.isfinite(top)
    if bad.any():
        raise DegenerateSupportError(int(np.flatnonzero(bad)[0]))
    w_s = np.exp(spont - top[:, None])
    w_p = np.exp(pair - top[cand.child][:, None])
    totals = w_s.sum(axis=1) + np.bincount(cand.child, weights=w_p.sum(axis=1), minlength=M)
    return w_s, w_p, totals


def sample_parents(log: EventLog, state: ChainState, kernel: DelayKernel, rng,
                   candidates: ParentCandidates | None = None) -> ParentAssignment:
    """Draw every event's (parent, layer) label from its exact conditional.

    Spontaneous labels on layer k weigh A_uk * lambda_uk * Dir(topic | prior);
    a candidate parent m' on layer k weighs G * W * topic_{m'k} * S_vk * kernel(delay).
    """
    M = len(log)
    if M == 0:
        return ParentAssignment(np.zeros(0, np.int64), np.zeros(0, np.int64))
    cand = candidates if candidates is not None else ParentCandidates(log, kernel)
    spont, pair = _label_log_weights(log, state.params, cand)
    w_s, w_p, totals = _normalise(spont, pair, cand)
    K = spont.shape[1]

    target = rng.random(M) * totals
    cs = np.cumsum(w_s, axis=1)
    is_spont = target < cs[:, -1]
    parents = np.arange(M)
    layers = np.minimum((cs <= target[:, None]).sum(axis=1), K - 1)

    trig = np.flatnonzero(~is_spont)
    if trig.size:
        flat = w_p.ravel()
        csum = np.cumsum(flat)
        # flattened pair segment of each event: [start, stop)
        counts = np.bincount(cand.child, minlength=M) * K
        stop = np.cumsum(counts)
        start = stop - counts
        base = np.where(start[trig] > 0, csum[np.maximum(start[trig] - 1, 0)], 0.0)
        goal = base + (target[trig] - cs[trig, -1])
        idx = np.searchsorted(csum, goal, side="right")
        idx = np.clip(idx, start[trig], stop[trig] - 1)
        for j in np.flatnonzero(flat[idx] == 0):
            # rounding landed on a zero-weight cell; take the nearest positive one
            seg = np.arange(start[trig[j]], stop[trig[j]])
            pos = seg[flat[seg] > 0]
            idx[j] = pos[np.argmin(np.abs(pos - idx[j]))]
        parents[trig] = cand.parent[idx // K]
        layers[trig] = idx % K

    # spontaneous draws must also land on positive cells
    sp = np.flatnonzero(is_spont)
    zero = w_s[sp, layers[sp]] == 0
    for m in sp[zero]:
        layers[m] = int(np.flatnonzero(w_s[m] > 0)[-1])
    return ParentAssignment(parents, layers)


def compute_sufficient_stats(log: EventLog, assignment: ParentAssignment,
                             kernel: DelayKernel = DelayKernel(), n_nodes=None,
                             n_layers=None) -> SufficientStatistics:
    N = n_nodes if n_nodes is not None else log.n_nodes
    K = n_layers if n_layers is not None else log.n_layers
    c = log.nodes
    spont_mask = assignment.spontaneous
    spontaneous = np.zeros((N, K), np.int64)
    np.add.at(spontaneous, (c[spont_mask], assignment.layers[spont_mask]), 1)
    triggered = np.zeros((N, N, K), np.int64)
    t = ~spont_mask
    np.add.at(triggered, (c[assignment.parents[t]], c[t], assignment.layers[t]), 1)
    node_counts = np.bincount(c, minlength=N).astype(np.int64)
    compensator = np.bincount(c, weights=compensator_mass(log, kernel), minlength=N) \
        if len(log) else np.zeros(N)
    return SufficientStatistics(triggered, node_counts, spontaneous, triggered.sum(axis=0),
                                compensator)


# ---------------------------------------------------------------------------
# Conjugate updates
# ---------------------------------------------------------------------------

def sample_influences(stats: SufficientStatistics, adjacency, hyper: Hyperparameters, rng,
                      mode="compensator"):
    """W ~ Gamma(M_uvk + kappa, exposure_u + v) on edges, zero elsewhere."""
    shape = stats.triggered + hyper.influence_shape
    rate = stats.exposure(mode)[:, None, None] + hyper.influence_rate
    draws = rng.gamma(shape, 1.0 / np.broadcast_to(rate, shape.shape))
    return np.where(adjacency == 1, draws, 0.0)


def sample_background_rates(stats: SufficientStatistics, hyper: Hyperparameters, window, rng):
    """lambda_uk ~ Gamma(M_uk + shape, T + rate)."""
    N, K = stats.spontaneous.shape
    shape, rate = hyper.background(N, K)
    return rng.gamma(stats.spontaneous + shape, 1.0 / (window + rate))


def adjacency_posterior_probability(params: MultiplexParams, stats: SufficientStatistics,
                                    hyper: Hyperparameters, mode="compensator"):
    """P(G_uvk = 1 | everything except W), with W integrated out.

    Entries with attributed children are certain. Otherwise the odds are
    rho * B1 : (1 - rho), where B1 = (v / (v + exposure_u))^kappa is the
    marginal probability of seeing no children through the edge.
    """
    nodes = params.nodes
    rho = edge_probabilities(params.layer_activity, nodes.authoritative, nodes.susceptible)
    v, kappa = hyper.influence_rate, hyper.influence_shape
    b1 = (v / (v + stats.exposure(mode))) ** kappa
    on = rho * b1[:, None, None]
    with np.errstate(invalid="ignore"):
        p = np.where(on > 0, on / (on + 1.0 - rho), 0.0)
    p = np.where(stats.triggered > 0, 1.0, p)
    n = p.shape[0]
    p[np.arange(n), np.arange(n)] = 0.0
    return p


def sample_adjacency_posterior(params: MultiplexParams, stats: SufficientStatistics,
                               hyper: Hyperparameters, rng, mode="compensator"):
    """Draw G given the parent assignment, with W integrated out."""
    p = adjacency_posterior_probability(params, stats, hyper, mode)
    return (rng.random(p.shape) < p).astype(np.int8)


def source_excitation(log: EventLog, candidates: ParentCandidates):
    """(M, N, K) array: sum over earlier events m' on node u of
    topic_{m'k} * kernel(s_m - s_m'). Depends on the data only."""
    C = np.zeros((len(log), log.n_nodes, log.n_layers))
    if len(candidates):
        vals = log.topics[candidates.parent] * np.exp(candidates.log_delay)[:, None]
        np.add.at(C, (candidates.child, log.nodes[candidates.parent]), vals)
    return C


def event_support(log: EventLog, params: MultiplexParams, excitation):
    """Total label weight of every event: the parent-marginal likelihood factor."""
    nodes = params.nodes
    c = log.nodes
    log_dir = np.maximum(log_dirichlet(log.topics, nodes.topic_prior[c]), LOG_FLOOR)
    spont = (nodes.authoritative[c] * nodes.background[c]).sum(axis=1) * np.exp(log_dir)
    gw = (params.adjacency * params.influence)[:, c, :].transpose(1, 0, 2)
    trig = np.einsum("muk,muk,mk->m", gw, excitation, nodes.susceptible[c])
    return spont + trig


def sample_adjacency_collapsed(log: EventLog, params: MultiplexParams, stats: SufficientStatistics,
                               hyper: Hyperparameters, rng, excitation, mode="compensator"):
    """Birth/death Metropolis sweep over (G, W) with parents integrated out.

    Each entry is proposed to flip: a birth draws W from its Gamma prior, a
    death removes the edge. The acceptance ratio compares the
    parent-marginal likelihood of the target node's events with and without
    the edge, times the prior odds rho / (1 - rho). Columns (targets) are
    independent, so each (source, layer) pass is vectorised over targets.
    Returns (G, W) as new arrays.
    """
    N, K = params.n_nodes, params.n_layers
    nodes = params.nodes
    G = params.adjacency.copy()
    W = params.influence.copy()
    rho = edge_probabilities(params.layer_activity, nodes.authoritative, nodes.susceptible)
    exposure = stats.exposure(mode)
    c = log.nodes
    support = event_support(log, MultiplexParams(G, W, nodes, params.layer_activity), excitation)
    S_ev = nodes.susceptible[c]
    targets = np.arange(N)

    for u in range(N):
        others = targets != u
        for k in range(K):
            born = G[u, :, k] == 0
            w_new = np.where(born, rng.gamma(hyper.influence_shape, 1.0 / hyper.influence_rate,
                                             size=N), W[u, :, k])
            delta = w_new[c] * S_ev[:, k] * excitation[:, u, k]
            sign = np.where(born[c], 1.0, -1.0)
            with np.errstate(divide="ignore", invalid="ignore"):
                frac = sign * delta / support
                ll_ev = np.where(delta > 0, np.log1p(np.maximum(frac, -1.0)), 0.0)
                ll = np.bincount(c, weights=ll_ev, minlength=N)
                ll -= np.where(born, 1.0, -1.0) * w_new * exposure[u]
                r = rho[u, :, k]
                prior = np.where(born, np.log(r) - np.log1p(-r), np.log1p(-r) - np.log(r))
            ratio = np.where(others, ll + prior, -np.inf)
            ratio = np.where(np.isnan(ratio), -np.inf, ratio)
            flip = metropolis_accept(ratio, rng)
            if not flip.any():
                continue
            G[u, flip, k] = np.where(born[flip], 1, 0)
            W[u, flip, k] = np.where(born[flip], w_new[flip], 0.0)
            moved = flip[c]
            support[moved] += sign[moved] * delta[moved]
    return G, W


def edge_conditional_probability(log: EventLog, params: MultiplexParams, stats: SufficientStatistics,
                                 hyper: Hyperparameters, excitation, mode="compensator", n_quad=48):
    """P(G_uvk = 1 | everything else) with the parents and W_uvk integrated out.

    Averaging this over retained draws gives a Rao-Blackwellised edge
    posterior, which ranks edges far better than the raw 0/1 frequency
    when the chain rarely visits an edge. The W integral is done by
    generalised Gauss-Laguerre quadrature after rescaling by the rate.
    """
    N, K = params.n_nodes, params.n_layers
    nodes = params.nodes
    kappa, v0 = hyper.influence_shape, hyper.influence_rate
    rho = edge_probabilities(params.layer_activity, nodes.authoritative, nodes.susceptible)
    exposure = stats.exposure(mode)
    c = log.nodes
    support = event_support(log, params, excitation)
    S_ev = nodes.susceptible[c]
    gw = params.adjacency * params.influence
    x, w = roots_genlaguerre(n_quad, kappa - 1.0)
    log_w = np.log(w) - gammaln(kappa)

    out = np.zeros((N, N, K))
    for u in range(N):
        for k in range(K):
            unit = S_ev[:, k] * excitation[:, u, k]
            rest = support - gw[u, c, k] * unit
            with np.errstate(divide="ignore", invalid="ignore"):
                a = np.where(unit > 0, unit / rest, 0.0)
            rate = v0 + exposure[u]
            # log prod_m (1 + W a_m) at W = x / rate, per quadrature node
            terms = np.log1p(np.outer(a, x / rate))
            per_target = np.zeros((N, n_quad))
            np.add.at(per_target, c, terms)
            log_ml = kappa * (np.log(v0) - np.log(rate)) + logsumexp(per_target + log_w, axis=1)
            with np.errstate(divide="ignore"):
                logit = np.log(rho[u, :, k]) - np.log1p(-rho[u, :, k]) + log_ml
            out[u, :, k] = expit(logit)
    out[np.arange(N), np.arange(N)] = 0.0
    return out


# ---------------------------------------------------------------------------
# Metropolis steps for pi, A, S
# ---------------------------------------------------------------------------

def _network_log_terms(adjacency, pi, A, S):
    rho = edge_probabilities(pi, A, S)
    with np.errstate(divide="ignore"):
        terms = np.where(adjacency == 1, np.log(rho), np.log1p(-rho))
    n = rho.shape[0]
    terms[np.arange(n), np.arange(n)] = 0.0
    return terms


def _dirichlet_proposal(current, concentration, rng):
    """Rows of Dir(concentration * current), drawn through normalised gammas."""
    g = rng.standard_gamma(concentration * current)
    with np.errstate(invalid="ignore", divide="ignore"):
        return g / g.sum(axis=-1, keepdims=True)


def _hastings(log_target_new, log_target_old, current, proposal, concentration):
    with np.errstate(divide="ignore", invalid="ignore"):
        fwd = log_dirichlet(proposal, concentration * current)
        rev = log_dirichlet(current, concentration * proposal)
    ratio = log_target_new - log_target_old + rev - fwd
    invalid = ~np.all((proposal > 0) & np.isfinite(proposal), axis=-1)
    return np.where(invalid | ~np.isfinite(ratio), -np.inf, ratio)


def _log_simplex_target(x, exponent):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.sum(np.where(exponent == 0, 0.0, exponent * np.log(x)), axis=-1)


def log_target_pi(pi, params: MultiplexParams, hyper: Hyperparameters):
    K = params.n_layers
    nodes = params.nodes
    net = _network_log_terms(params.adjacency, pi, nodes.authoritative, nodes.susceptible)
    return _log_simplex_target(pi, hyper.gamma(K) - 1.0) + net.sum()


def log_target_authoritative(A, params: MultiplexParams, stats, hyper: Hyperparameters):
    """Per-node log full conditional of A (unnormalised)."""
    K = params.n_layers
    net = _network_log_terms(params.adjacency, params.layer_activity, A, params.nodes.susceptible)
    return _log_simplex_target(A, hyper.alpha(K) - 1.0 + stats.spontaneous) + net.sum(axis=(1, 2))


def log_target_susceptible(S, params: MultiplexParams, stats, hyper: Hyperparameters):
    K = params.n_layers
    net = _network_log_terms(params.adjacency, params.layer_activity, params.nodes.authoritative, S)
    return _log_simplex_target(S, hyper.beta(K) - 1.0 + stats.receipts) + net.sum(axis=(0, 2))


def metropolis_accept(log_ratio, rng):
    log_ratio = np.asarray(log_ratio, dtype=float)
    return np.log(rng.random(log_ratio.shape)) < log_ratio


def mh_update_pi(params: MultiplexParams, hyper: Hyperparameters, rng, concentration=None):
    """One Dirichlet random-walk step for pi. Returns (pi, accepted)."""
    c = concentration or hyper.mh_concentration
    pi = params.layer_activity
    prop = _dirichlet_proposal(pi, c, rng)
    if not np.all(prop > 0):
        return pi, False
    r = _hastings(log_target_pi(prop, params, hyper), log_target_pi(pi, params, hyper), pi, prop, c)
    if metropolis_accept(r, rng):
        return prop, True
    return pi, False


def mh_update_authoritative(params: MultiplexParams, stats, hyper: Hyperparameters, rng,
                            concentration=None):
    """Independent Dirichlet random-walk steps for every A_u. Returns (A, accepted mask)."""
    c = concentration or hyper.mh_concentration
    A = params.nodes.authoritative
    prop = _dirichlet_proposal(A, c, rng)
    safe = np.where(np.isfinite(prop) & (prop > 0), prop, A)
    r = _hastings(log_target_authoritative(safe, params, stats, hyper),
                  log_target_authoritative(A, params, stats, hyper), A, prop, c)
    ok = metropolis_accept(r, rng)
    return np.where(ok[:, None], prop, A), ok


def mh_update_susceptible(params: MultiplexParams, stats, hyper: Hyperparameters, rng,
                          concentration=None):
    c = concentration or hyper.mh_concentration
    S = params.nodes.susceptible
    prop = _dirichlet_proposal(S, c, rng)
    safe = np.where(np.isfinite(prop) & (prop > 0), prop, S)
    r = _hastings(log_target_susceptible(safe, params, stats, hyper),
                  log_target_susceptible(S, params, stats, hyper), S, prop, c)
    ok = metropolis_accept(r, rng)
    return np.where(ok[:, None], prop, S), ok


def mh_swap_layers(log: EventLog, state: ChainState, hyper: Hyperparameters, rng):
    """Per-node Metropolis move swapping two layers of the node's spontaneous
    labelling: columns k and k' of A_u and lambda_u, together with the layers
    of u's spontaneous events.

    The swap is an involution and leaves every likelihood term invariant
    except the network prior and the priors of A_u and lambda_u, so the
    acceptance ratio only involves those. Returns the accepted mask.
    """
    params = state.params
    N, K = params.n_nodes, params.n_layers
    if K < 2:
        return np.zeros(N, bool)
    nodes = params.nodes
    first = rng.integers(0, K, size=N)
    second = (first + rng.integers(1, K, size=N)) % K
    rows = np.arange(N)

    def swapped(x):
        y = x.copy()
        y[rows, first], y[rows, second] = x[rows, second], x[rows, first]
        return y

    A2, lam2 = swapped(nodes.authoritative), swapped(nodes.background)
    shape, rate = hyper.background(N, K)
    alpha = hyper.alpha(K)

    def log_target(A, lam):
        net = _network_log_terms(params.adjacency, params.layer_activity, A, nodes.susceptible)
        with np.errstate(divide="ignore"):
            gam = ((shape - 1.0) * np.log(lam) - rate * lam).sum(axis=1)
        return net.sum(axis=(1, 2)) + _log_simplex_target(A, alpha - 1.0) + gam

    ratio = log_target(A2, lam2) - log_target(nodes.authoritative, nodes.background)
    ok = metropolis_accept(np.where(np.isfinite(ratio), ratio, -np.inf), rng)
    nodes.authoritative = np.where(ok[:, None], A2, nodes.authoritative)
    nodes.background = np.where(ok[:, None], lam2, nodes.background)

    a = state.assignment
    hit = a.spontaneous & ok[log.nodes]
    if hit.any():
        u = log.nodes[hit]
        k = a.layers[hit]
        a.layers[hit] = np.where(k == first[u], second[u], np.where(k == second[u], first[u], k))
    return ok


# ---------------------------------------------------------------------------
# Chain driver
# ---------------------------------------------------------------------------

def _clean_simplex(x):
    x = np.maximum(x, 1e-300)
    return x / x.sum(axis=-1, keepdims=True)


def initial_state(log: EventLog, hyper: Hyperparameters, rng) -> ChainState:
    """Prior draws for all parameters; every event spontaneous on its most
    compatible layer (argmax of A * topic)."""
    N, K = log.n_nodes, log.n_layers
    pi = _clean_simplex(rng.dirichlet(hyper.gamma(K)))
    A = _clean_simplex(rng.dirichlet(hyper.alpha(K), size=N))
    S = _clean_simplex(rng.dirichlet(hyper.beta(K), size=N))
    shape, rate = hyper.background(N, K)
    lam = rng.gamma(shape, 1.0 / rate)
    nodes = NodeParams(lam, A, S, hyper.topic(N, K))
    rho = edge_probabilities(pi, A, S)
    G = (rng.random(rho.shape) < rho).astype(np.int8)
    W = np.where(G == 1, rng.gamma(hyper.influence_shape, 1.0 / hyper.influence_rate,
                                   size=G.shape), 0.0)
    layers = np.argmax(A[log.nodes] * log.topics, axis=1) if len(log) else np.zeros(0, np.int64)
    return ChainState(MultiplexParams(G, W, nodes, pi), ParentAssignment.all_spontaneous(layers))


def gibbs_sweep(log: EventLog, state: ChainState, hyper: Hyperparameters, kernel: DelayKernel,
                rng, config: ChainConfig, candidates=None, excitation=None):
    """One full sweep, in place. Returns (stats, acceptance flags).

    With the default collapsed adjacency update the edge step runs first,
    integrating out the parents, and the parents are then redrawn given the
    new graph. The conditional variant draws G after lambda, given parents.
    """
    params = state.params
    mode = config.influence_rate
    c = config.mh_concentration or hyper.mh_concentration

    if config.adjacency_update == "collapsed" and len(log):
        if excitation is None:
            if candidates is None:
                candidates = ParentCandidates(log, kernel)
            excitation = source_excitation(log, candidates)
        stats = compute_sufficient_stats(log, state.assignment, kernel)
        params.adjacency, params.influence = sample_adjacency_collapsed(
            log, params, stats, hyper, rng, excitation, mode)
    state.assignment = sample_parents(log, state, kernel, rng, candidates)
    stats = compute_sufficient_stats(log, state.assignment, kernel)
    params.influence = sample_influences(stats, params.adjacency, hyper, rng, mode)
    params.nodes.background = sample_background_rates(stats, hyper, log.window, rng)
    if config.adjacency_update == "conditional" or not len(log):
        params.adjacency = sample_adjacency_posterior(params, stats, hyper, rng, mode)
        params.influence = sample_influences(stats, params.adjacency, hyper, rng, mode)
    params.layer_activity, acc_pi = mh_update_pi(params, hyper, rng, c)
    params.nodes.authoritative, acc_a = mh_update_authoritative(params, stats, hyper, rng, c)
    params.nodes.susceptible, acc_s = mh_update_susceptible(params, stats, hyper, rng, c)
    if config.layer_swaps:
        mh_swap_layers(log, state, hyper, rng)
    state.iteration += 1
    return stats, (acc_pi, acc_a, acc_s)


def run_chain(log: EventLog, config: ChainConfig = ChainConfig(),
              hyper: Hyperparameters = Hyperparameters(), kernel: DelayKernel = DelayKernel(),
              init: ChainState | None = None) -> ChainResult:
    """Run the sampler and average the retained draws."""
    if len(log) == 0 and not config.allow_empty:
        raise ValueError("event log is empty; set allow_empty=True to sample the prior")
    rng = np.random.default_rng(config.seed)
    state = init.copy() if init is not None else initial_state(log, hyper, rng)
    cand = ParentCandidates(log, kernel, config.max_lag)
    excitation = source_excitation(log, cand)
    M = len(log)

    trace_parents = np.zeros((config.iterations, M), np.int64)
    trace_layers = np.zeros((config.iterations, M), np.int64)
    kept = {k: [] for k in ("influence", "background", "adjacency", "edge_conditional",
                            "layer_activity",
                            "authoritative", "susceptible")}
    kept_iters, kept_parents, kept_layers = [], [], []
    accepted = {"pi": 0, "authoritative": 0, "susceptible": 0}

    for it in range(1, config.iterations + 1):
        stats, (acc_pi, acc_a, acc_s) = gibbs_sweep(log, state, hyper, kernel, rng, config, cand,
                                                  excitation)
        accepted["pi"] += int(acc_pi)
        accepted["authoritative"] += int(acc_a.sum())
        accepted["susceptible"] += int(acc_s.sum())
        trace_parents[it - 1] = state.assignment.parents
        trace_layers[it - 1] = state.assignment.layers
        if config.retained(it):
            p = state.params
            kept["influence"].append(p.influence.copy())
            kept["background"].append(p.nodes.background.copy())
            kept["adjacency"].append(p.adjacency.copy())
            kept["edge_conditional"].append(edge_conditional_probability(
                log, p, stats, hyper, excitation, config.influence_rate))
            kept["layer_activity"].append(p.layer_activity.copy())
            kept["authoritative"].append(p.nodes.authoritative.copy())
            kept["susceptible"].append(p.nodes.susceptible.copy())
            kept_iters.append(it)
            kept_parents.append(state.assignment.parents.copy())
            kept_layers.append(state.assignment.layers.copy())
        if it % 100 == 0:
            logger.debug("iteration %d / %d", it, config.iterations)

    samples = {k: np.array(v) for k, v in kept.items()}
    n = len(kept_iters)
    N = log.n_nodes
    summary = PosteriorSummary(
        influence=samples["influence"].mean(0),
        background=samples["background"].mean(0),
        edge_probability=samples["edge_conditional"].mean(0),
        edge_frequency=samples["adjacency"].mean(0),
        layer_activity=samples["layer_activity"].mean(0),
        authoritative=samples["authoritative"].mean(0),
        susceptible=samples["susceptible"].mean(0),
        parent_frequencies=_label_frequencies(np.array(kept_parents).reshape(n, M),
                                              np.array(kept_layers).reshape(n, M)),
        n_samples=n,
    )
    trace = None
    if config.keep_trace:
        trace = ChainTrace(trace_parents, trace_layers, np.array(kept_iters), samples)
    its = config.iterations
    acceptance = {"pi": accepted["pi"] / its,
                  "authoritative": accepted["authoritative"] / (its * N),
                  "susceptible": accepted["susceptible"] / (its * N)}
    return ChainResult(summary, state, trace, acceptance)


def _label_frequencies(parents, layers):
    n, M = parents.shape
    out = []
    for m in range(M):
        labels, counts = np.unique(np.stack([parents[:, m], layers[:, m]], axis=1), axis=0,
                                   return_counts=True)
        out.append({(int(p), int(k)): c / n for (p, k), c in zip(labels, counts)})
    return out
