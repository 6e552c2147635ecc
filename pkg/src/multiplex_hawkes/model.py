"""
Domain types and the deterministic mathematics of the multiplex diffusion model.

Events live on N nodes and carry a K-dimensional topic vector. Layers of the
multiplex network and topic components share the same index k.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np
from scipy.special import gammaln, ndtr

# densities below this are clamped before taking logs
FLOOR = 1e-300
LOG_FLOOR = np.log(FLOOR)
SIMPLEX_TOL = 1e-9


def safe_log(x):
    return np.log(np.maximum(x, FLOOR))


def _check_simplex(x, name, axis=-1):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError(f"{name} has negative entries")
    if np.any(np.abs(x.sum(axis=axis) - 1.0) > SIMPLEX_TOL):
        raise ValueError(f"{name} does not sum to 1 within {SIMPLEX_TOL}")


# ---------------------------------------------------------------------------
# Delay kernel
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DelayKernel:
    """Lognormal response-time density."""

    log_mean: float = 0.0
    log_sdev: float = 1.0

    def __post_init__(self):
        if not self.log_sdev > 0:
            raise ValueError("log_sdev must be positive")

    def pdf(self, dt):
        return delay_density(dt, self)

    def logpdf(self, dt):
        dt = np.asarray(dt, dtype=float)
        out = np.full(dt.shape, -np.inf)
        pos = dt > 0
        z = (np.log(dt[pos]) - self.log_mean) / self.log_sdev
        out[pos] = -0.5 * z * z - np.log(dt[pos] * self.log_sdev * np.sqrt(2 * np.pi))
        return out if out.ndim else float(out)

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore"):
            z = (np.log(np.maximum(t, 0.0)) - self.log_mean) / self.log_sdev
        out = np.where(t > 0, ndtr(z), 0.0)
        return out if out.ndim else float(out)

    def sample(self, rng, size=None):
        return rng.lognormal(self.log_mean, self.log_sdev, size=size)


def delay_density(dt, kernel: DelayKernel = DelayKernel()):
    """Lognormal pdf of the delay `dt`; zero for dt <= 0."""
    dt = np.asarray(dt, dtype=float)
    out = np.zeros(dt.shape)
    pos = dt > 0
    z = (np.log(dt[pos]) - kernel.log_mean) / kernel.log_sdev
    out[pos] = np.exp(-0.5 * z * z) / (dt[pos] * kernel.log_sdev * np.sqrt(2 * np.pi))
    return out if out.ndim else float(out)


def delay_mass(a, b, kernel: DelayKernel = DelayKernel()):
    """Probability mass of the delay kernel on [a, b].

    Computed from the upper tail when `a` lies past the median, which keeps
    precision for far-out intervals.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(a > b):
        raise ValueError("delay_mass requires a <= b")
    if np.any(a < 0):
        raise ValueError("delay_mass requires a >= 0")
    with np.errstate(divide="ignore"):
        za = (np.log(a) - kernel.log_mean) / kernel.log_sdev
        zb = (np.log(b) - kernel.log_mean) / kernel.log_sdev
    upper = za > 0
    out = np.where(upper, ndtr(-za) - ndtr(-zb), ndtr(zb) - ndtr(za))
    out = np.clip(out, 0.0, 1.0)
    return out if out.ndim else float(out)


def fit_delay_kernel(delays) -> DelayKernel:
    """Maximum-likelihood lognormal fit to observed parent-to-child delays."""
    delays = np.asarray(delays, dtype=float)
    if delays.size < 2:
        raise ValueError("need at least two delays to fit a kernel")
    if np.any(delays <= 0):
        raise ValueError("delays must be strictly positive")
    logs = np.log(delays)
    sdev = logs.std()
    if sdev == 0:
        raise ValueError("delays are all identical; log_sdev would be zero")
    return DelayKernel(float(logs.mean()), float(sdev))


# ---------------------------------------------------------------------------
# Events and assignments
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Event:
    time: float
    node: int
    topic: np.ndarray

    def __post_init__(self):
        if self.time < 0:
            raise ValueError("event time must be >= 0")
        _check_simplex(self.topic, "topic")


@dataclass
class ParentAssignment:
    """Latent attribution of every event.

    ``parents[m] == m`` marks event m as spontaneous on ``layers[m]``;
    otherwise event m was triggered by event ``parents[m]`` through layer
    ``layers[m]``.
    """

    parents: np.ndarray
    layers: np.ndarray

    def __post_init__(self):
        self.parents = np.asarray(self.parents, dtype=np.int64)
        self.layers = np.asarray(self.layers, dtype=np.int64)
        if self.parents.shape != self.layers.shape or self.parents.ndim != 1:
            raise ValueError("parents and layers must be 1-d arrays of equal length")

    def __len__(self):
        return len(self.parents)

    @classmethod
    def all_spontaneous(cls, layers):
        layers = np.asarray(layers, dtype=np.int64)
        return cls(np.arange(len(layers)), layers)

    @property
    def spontaneous(self):
        return self.parents == np.arange(len(self.parents))

    def copy(self):
        return ParentAssignment(self.parents.copy(), self.layers.copy())

    def restrict(self, n_events):
        return ParentAssignment(self.parents[:n_events].copy(), self.layers[:n_events].copy())

    def validate(self, times, n_layers):
        times = np.asarray(times)
        if len(times) != len(self):
            raise ValueError(f"assignment has {len(self)} labels for {len(times)} events")
        if np.any((self.layers < 0) | (self.layers >= n_layers)):
            raise ValueError("assignment layer index out of range")
        if np.any((self.parents < 0) | (self.parents >= len(times))):
            raise ValueError("assignment parent index out of range")
        trig = ~self.spontaneous
        if np.any(times[self.parents[trig]] >= times[trig]):
            bad = np.flatnonzero(trig)[times[self.parents[trig]] >= times[trig]][0]
            raise ValueError(f"event {bad} is attributed to a parent that is not strictly earlier")

    def __eq__(self, other):
        if not isinstance(other, ParentAssignment):
            return NotImplemented
        return np.array_equal(self.parents, other.parents) and np.array_equal(self.layers, other.layers)


@dataclass
class EventLog:
    """Time-ordered events observed on [0, window]."""

    times: np.ndarray
    nodes: np.ndarray
    topics: np.ndarray
    window: float
    n_nodes: int
    ground_truth: ParentAssignment | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float).reshape(-1)
        self.nodes = np.asarray(self.nodes, dtype=np.int64).reshape(-1)
        self.topics = np.asarray(self.topics, dtype=float)
        self.window = float(self.window)
        self.n_nodes = int(self.n_nodes)
        if self.topics.ndim != 2 or len(self.topics) != len(self.times):
            raise ValueError("topics must have shape (n_events, n_layers)")
        if len(self.nodes) != len(self.times):
            raise ValueError("times and nodes differ in length")
        if not self.window > 0:
            raise ValueError("observation window must be positive")
        if self.topics.shape[1] < 1:
            raise ValueError("need at least one layer")
        if len(self.times):
            if np.any(np.diff(self.times) < 0):
                raise ValueError("event times must be non-decreasing")
            if self.times[0] < 0 or self.times[-1] > self.window:
                raise ValueError("event times must lie within [0, window]")
            if self.nodes.min() < 0 or self.nodes.max() >= self.n_nodes:
                raise ValueError("node index out of range")
            _check_simplex(self.topics, "topic rows")
        if self.ground_truth is not None:
            self.ground_truth.validate(self.times, self.n_layers)

    @classmethod
    def from_events(cls, events: Sequence[Event], window, n_nodes, n_layers=None,
                    ground_truth=None):
        if events:
            topics = np.array([e.topic for e in events], dtype=float)
        else:
            topics = np.zeros((0, n_layers or 1))
        return cls(np.array([e.time for e in events], dtype=float),
                   np.array([e.node for e in events], dtype=np.int64),
                   topics, window, n_nodes, ground_truth)

    @property
    def n_layers(self):
        return self.topics.shape[1]

    def __len__(self):
        return len(self.times)

    def __getitem__(self, m) -> Event:
        return Event(float(self.times[m]), int(self.nodes[m]), self.topics[m])

    def __iter__(self) -> Iterator[Event]:
        for m in range(len(self)):
            yield self[m]

    def restrict(self, window):
        """Events up to `window`. Parents precede children, so the truth stays valid."""
        n = int(np.searchsorted(self.times, window, side="right"))
        truth = self.ground_truth.restrict(n) if self.ground_truth is not None else None
        return EventLog(self.times[:n], self.nodes[:n], self.topics[:n], window,
                        self.n_nodes, truth)


# ---------------------------------------------------------------------------
# Parameters
# ---------------------------------------------------------------------------

@dataclass
class NodeParams:
    background: np.ndarray      # (N, K) events / second
    authoritative: np.ndarray   # (N, K) rows on the simplex
    susceptible: np.ndarray     # (N, K) rows on the simplex
    topic_prior: np.ndarray     # (N, K) Dirichlet concentrations

    def __post_init__(self):
        for name in ("background", "authoritative", "susceptible", "topic_prior"):
            setattr(self, name, np.array(getattr(self, name), dtype=float, ndmin=2))

    def validate(self):
        if np.any(self.background < 0):
            raise ValueError("background rates must be nonnegative")
        _check_simplex(self.authoritative, "authoritative vectors")
        _check_simplex(self.susceptible, "susceptible vectors")
        if np.any(self.topic_prior <= 0):
            raise ValueError("topic prior must be strictly positive")

    def copy(self):
        return NodeParams(self.background.copy(), self.authoritative.copy(),
                          self.susceptible.copy(), self.topic_prior.copy())


@dataclass
class MultiplexParams:
    adjacency: np.ndarray       # (N, N, K) in {0, 1}, source x target x layer
    influence: np.ndarray       # (N, N, K) >= 0
    nodes: NodeParams
    layer_activity: np.ndarray  # (K,) simplex

    def __post_init__(self):
        self.adjacency = np.asarray(self.adjacency, dtype=np.int8)
        self.influence = np.asarray(self.influence, dtype=float)
        self.layer_activity = np.asarray(self.layer_activity, dtype=float)

    @property
    def n_nodes(self):
        return self.adjacency.shape[0]

    @property
    def n_layers(self):
        return self.adjacency.shape[2]

    def validate(self):
        N, K = self.n_nodes, self.n_layers
        if self.adjacency.shape != (N, N, K) or self.influence.shape != (N, N, K):
            raise ValueError("adjacency and influence must have shape (N, N, K)")
        for name in ("background", "authoritative", "susceptible", "topic_prior"):
            if getattr(self.nodes, name).shape != (N, K):
                raise ValueError(f"{name} must have shape ({N}, {K})")
        if self.layer_activity.shape != (K,):
            raise ValueError(f"layer activity must have shape ({K},)")
        if not np.isin(self.adjacency, (0, 1)).all():
            raise ValueError("adjacency entries must be 0 or 1")
        if np.any(self.adjacency[np.arange(N), np.arange(N)]):
            raise ValueError("self-edges are not allowed")
        if np.any(self.influence < 0):
            raise ValueError("influence must be nonnegative")
        self.nodes.validate()
        _check_simplex(self.layer_activity, "layer activity")

    def copy(self):
        return MultiplexParams(self.adjacency.copy(), self.influence.copy(),
                               self.nodes.copy(), self.layer_activity.copy())


def _as_layer_vector(value, n_layers, name):
    v = np.broadcast_to(np.asarray(value, dtype=float), (n_layers,)).copy()
    if np.any(v <= 0):
        raise ValueError(f"{name} must be strictly positive")
    return v


@dataclass
class Hyperparameters:
    """Prior hyperparameters.

    Scalars broadcast to every layer (and every node for the background
    prior). ``layer_prior``, ``authoritative_prior`` and ``susceptible_prior``
    are the Dirichlet concentrations of pi, A_u and S_u. ``topic_prior`` is the
    Dirichlet concentration of spontaneous topics, shared by all nodes.
    """

    influence_shape: float = 1.0
    influence_rate: float = 1.0
    background_shape: float | np.ndarray = 1.0
    background_rate: float | np.ndarray = 1.0
    layer_prior: float | np.ndarray = 1.0
    authoritative_prior: float | np.ndarray = 1.0
    susceptible_prior: float | np.ndarray = 1.0
    topic_prior: float | np.ndarray = 1.0
    mh_concentration: float = 100.0

    def __post_init__(self):
        for name in ("influence_shape", "influence_rate", "mh_concentration"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        for name in ("background_shape", "background_rate", "layer_prior",
                     "authoritative_prior", "susceptible_prior", "topic_prior"):
            if np.any(np.asarray(getattr(self, name), dtype=float) <= 0):
                raise ValueError(f"{name} must be strictly positive")

    def gamma(self, n_layers):
        return _as_layer_vector(self.layer_prior, n_layers, "layer_prior")

    def alpha(self, n_layers):
        return _as_layer_vector(self.authoritative_prior, n_layers, "authoritative_prior")

    def beta(self, n_layers):
        return _as_layer_vector(self.susceptible_prior, n_layers, "susceptible_prior")

    def topic(self, n_nodes, n_layers):
        t = np.asarray(self.topic_prior, dtype=float)
        return np.broadcast_to(t, (n_nodes, n_layers)).copy()

    def background(self, n_nodes, n_layers):
        shape = np.broadcast_to(np.asarray(self.background_shape, float), (n_nodes, n_layers))
        rate = np.broadcast_to(np.asarray(self.background_rate, float), (n_nodes, n_layers))
        return shape.copy(), rate.copy()


# ---------------------------------------------------------------------------
# Intensities and channel selection
# ---------------------------------------------------------------------------

def edge_probability(pi_k, a_uk, s_vk):
    return np.multiply(np.multiply(pi_k, a_uk), s_vk)


def edge_probabilities(layer_activity, authoritative, susceptible):
    """(N, N, K) tensor of pi_k * A_uk * S_vk with a zero diagonal."""
    rho = (layer_activity[None, None, :] * authoritative[:, None, :]
           * susceptible[None, :, :])
    n = rho.shape[0]
    rho[np.arange(n), np.arange(n)] = 0.0
    return rho


def channel_vector(topic, susceptible, candidate_layers=None):
    """Per-layer probability that content with `topic` spreads to a node with
    susceptibility `susceptible`. The shortfall from 1 is the no-spread mass."""
    h = np.asarray(topic, dtype=float) * np.asarray(susceptible, dtype=float)
    if candidate_layers is not None:
        mask = np.zeros(h.shape, dtype=bool)
        mask[list(candidate_layers)] = True
        h = np.where(mask, h, 0.0)
    return h


def node_intensity(t, node, layer, log: EventLog, params: MultiplexParams,
                   kernel: DelayKernel = DelayKernel()):
    rate = params.nodes.background[node, layer]
    past = log.times < t
    if not past.any():
        return float(rate)
    src = log.nodes[past]
    weights = params.adjacency[src, node, layer] * params.influence[src, node, layer]
    return float(rate + np.sum(weights * delay_density(t - log.times[past], kernel)))


def total_intensity(t, node, log: EventLog, params: MultiplexParams,
                    kernel: DelayKernel = DelayKernel()):
    total = 0.0
    for k in range(params.n_layers):
        total += node_intensity(t, node, k, log, params, kernel)
    return total


# ---------------------------------------------------------------------------
# Log densities
# ---------------------------------------------------------------------------

def log_dirichlet(x, alpha):
    """Log Dirichlet density along the last axis, with log(0) clamped."""
    x = np.asarray(x, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    return (gammaln(alpha.sum(-1)) - gammaln(alpha).sum(-1)
            + ((alpha - 1.0) * safe_log(x)).sum(-1))


def log_network_prior(adjacency, layer_activity, authoritative, susceptible):
    """log p(G | pi, A, S) over off-diagonal entries."""
    rho = edge_probabilities(layer_activity, authoritative, susceptible)
    n = rho.shape[0]
    off = ~np.eye(n, dtype=bool)
    g = adjacency[off]
    r = rho[off]
    return float(np.sum(np.where(g == 1, safe_log(r), safe_log(1.0 - r))))


def compensator_mass(log: EventLog, kernel: DelayKernel):
    """Kernel mass remaining inside the window after each event."""
    return delay_mass(np.zeros(len(log)), log.window - log.times, kernel)


def log_joint(log: EventLog, assignment: ParentAssignment, params: MultiplexParams,
              kernel: DelayKernel = DelayKernel(), hyper: Hyperparameters | None = None):
    """Complete-data log density of (G, events, assignment) given parameters.

    Terms: the network prior; background compensators -lambda*T; for each
    spontaneous event log(A * lambda * Dir(topic | topic_prior)); for each
    event and each existing out-edge the compensator -W * mass; for each
    triggered event log(theta_parent * S * W * kernel(delay)).

    When `hyper` is given, the log priors of W (on edges), lambda, pi, A and S
    are added as well.
    """
    assignment.validate(log.times, params.n_layers)
    nodes = params.nodes
    G, W = params.adjacency, params.influence
    T = log.window
    out = log_network_prior(G, params.layer_activity, nodes.authoritative, nodes.susceptible)
    out -= float(nodes.background.sum()) * T

    spont = assignment.spontaneous
    m_s = np.flatnonzero(spont)
    if m_s.size:
        u, k = log.nodes[m_s], assignment.layers[m_s]
        out += float(np.sum(safe_log(nodes.authoritative[u, k]) + safe_log(nodes.background[u, k])
                            + np.maximum(log_dirichlet(log.topics[m_s], nodes.topic_prior[u]),
                                         LOG_FLOOR)))
    if len(log):
        mass = compensator_mass(log, kernel)
        out_weight = (G * W)[log.nodes].sum(axis=(1, 2))
        out -= float(np.sum(out_weight * mass))

    m_t = np.flatnonzero(~spont)
    if m_t.size:
        p = assignment.parents[m_t]
        k = assignment.layers[m_t]
        src, dst = log.nodes[p], log.nodes[m_t]
        out += float(np.sum(
            safe_log(log.topics[p, k]) + safe_log(nodes.susceptible[dst, k])
            + safe_log(G[src, dst, k] * W[src, dst, k])
            + safe_log(delay_density(log.times[m_t] - log.times[p], kernel))))

    if hyper is not None:
        out += log_prior(params, hyper)
    return out


def log_prior(params: MultiplexParams, hyper: Hyperparameters):
    from scipy.stats import gamma as gamma_dist

    N, K = params.n_nodes, params.n_layers
    nodes = params.nodes
    shape, rate = hyper.background(N, K)
    out = float(np.sum(gamma_dist.logpdf(nodes.background, shape, scale=1.0 / rate)))
    edges = params.adjacency == 1
    out += float(np.sum(gamma_dist.logpdf(params.influence[edges], hyper.influence_shape,
                                          scale=1.0 / hyper.influence_rate)))
    out += float(log_dirichlet(params.layer_activity, hyper.gamma(K)))
    out += float(np.sum(log_dirichlet(nodes.authoritative, hyper.alpha(K))))
    out += float(np.sum(log_dirichlet(nodes.susceptible, hyper.beta(K))))
    return out
