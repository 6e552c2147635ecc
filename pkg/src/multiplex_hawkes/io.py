"""
Plain-text file formats and experiment configuration.

Everything is comma-separated UTF-8 text. Floats are written with
``repr`` so that write -> read -> write reproduces a file byte for byte.
Readers never ingest a file partially: the first bad line raises
MalformedInputError with the file and line number.

Event log::

    # n_nodes=9 n_layers=3 window=5000.0
    time,node,theta_0,theta_1,theta_2
    0.52,4,0.1,0.6,0.3

Network directory: ``edges.csv`` (u,v,k,weight; weight > 0 means an edge),
``nodes.csv`` (u,k,lambda,A,S,alpha) and ``layers.csv`` (k,pi).
"""
from __future__ import annotations

import configparser
import csv
import re
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .errors import MalformedInputError
from .generative import SimulationConfig
from .inference import ChainConfig, ChainTrace, PosteriorSummary
from .model import (SIMPLEX_TOL, DelayKernel, EventLog, Hyperparameters, MultiplexParams,
                    NodeParams, ParentAssignment)

EDGES, NODES, LAYERS = "edges.csv", "nodes.csv", "layers.csv"
EVENTS, ASSIGNMENT = "events.csv", "assignment.csv"
TRACE_GROUPS = ("influence", "background", "layer_activity", "authoritative", "susceptible")


def fmt(x):
    """Shortest round-tripping text for a number (strings pass through)."""
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _write_rows(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(x) for x in row) + "\n")


class _Reader:
    """Line-numbered access to a comma-separated table with a fixed header."""

    def __init__(self, path, header=None):
        self.path = Path(path)
        if not self.path.exists():
            raise FileNotFoundError(f"{self.path}: no such file")
        with open(self.path, encoding="utf-8", newline="") as fh:
            self.lines = fh.read().splitlines()
        self.header = header

    def fail(self, line, reason):
        raise MalformedInputError(self.path, line, reason)

    def rows(self, start=0):
        """Yield (line number, fields) after checking the header line at `start`."""
        if len(self.lines) <= start:
            self.fail(start + 1, "missing header line")
        got = self.lines[start].split(",")
        if self.header is not None and got != list(self.header):
            self.fail(start + 1, f"expected header {','.join(self.header)!r}, got {self.lines[start]!r}")
        width = len(got)
        for i, text in enumerate(self.lines[start + 1:], start=start + 2):
            if not text.strip():
                self.fail(i, "blank line")
            parts = next(csv.reader([text]))
            if len(parts) != width:
                self.fail(i, f"expected {width} fields, got {len(parts)}")
            yield i, parts

    def number(self, line, text, kind=float, name="value"):
        try:
            value = kind(text)
        except ValueError:
            self.fail(line, f"{name} {text!r} is not a valid {kind.__name__}")
        if kind is float and not np.isfinite(value):
            self.fail(line, f"{name} must be finite")
        return value


# ---------------------------------------------------------------------------
# Event logs
# ---------------------------------------------------------------------------

_HEADER_RE = re.compile(r"^#\s*n_nodes=(\S+)\s+n_layers=(\S+)\s+window=(\S+)\s*$")


def write_event_log(log: EventLog, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    K = log.n_layers
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# n_nodes={log.n_nodes} n_layers={K} window={fmt(log.window)}\n")
        fh.write(",".join(["time", "node"] + [f"theta_{k}" for k in range(K)]) + "\n")
        for t, c, theta in zip(log.times, log.nodes, log.topics):
            fh.write(",".join([fmt(t), fmt(int(c))] + [fmt(x) for x in theta]) + "\n")


def read_event_log(path, assignment_path=None) -> EventLog:
    """Parse and validate an event log (and optionally its ground-truth assignment)."""
    reader = _Reader(path)
    if not reader.lines:
        reader.fail(1, "empty file")
    m = _HEADER_RE.match(reader.lines[0])
    if not m:
        reader.fail(1, "expected '# n_nodes=N n_layers=K window=T'")
    N = reader.number(1, m.group(1), int, "n_nodes")
    K = reader.number(1, m.group(2), int, "n_layers")
    T = reader.number(1, m.group(3), float, "window")
    if N < 1 or K < 1 or T <= 0:
        reader.fail(1, "n_nodes, n_layers and window must be positive")
    reader.header = ["time", "node"] + [f"theta_{k}" for k in range(K)]

    times, nodes, topics = [], [], []
    last = -np.inf
    for line, parts in reader.rows(start=1):
        t = reader.number(line, parts[0], float, "time")
        c = reader.number(line, parts[1], int, "node")
        theta = np.array([reader.number(line, x, float, "theta") for x in parts[2:]])
        if t < 0 or t > T:
            reader.fail(line, f"time {t} outside [0, {T}]")
        if t < last:
            reader.fail(line, f"time {t} is earlier than the previous event ({last})")
        if not 0 <= c < N:
            reader.fail(line, f"node {c} outside [0, {N})")
        if np.any(theta < 0) or abs(theta.sum() - 1.0) > SIMPLEX_TOL:
            reader.fail(line, "topic row is not on the simplex")
        last = t
        times.append(t)
        nodes.append(c)
        topics.append(theta)

    truth = read_assignment(assignment_path, len(times), K) if assignment_path else None
    return EventLog(np.array(times, float), np.array(nodes, np.int64),
                    np.array(topics, float).reshape(len(times), K), T, N, truth)


def write_assignment(assignment: ParentAssignment, path):
    rows = ((m, p, k) for m, (p, k) in enumerate(zip(assignment.parents, assignment.layers)))
    _write_rows(path, ["event", "parent", "layer"], rows)


def read_assignment(path, n_events=None, n_layers=None) -> ParentAssignment:
    reader = _Reader(path, ["event", "parent", "layer"])
    parents, layers = [], []
    for line, parts in reader.rows():
        m, p, k = (reader.number(line, x, int, name) for x, name in
                   zip(parts, ("event", "parent", "layer")))
        if m != len(parents):
            reader.fail(line, f"expected event {len(parents)}, got {m}")
        if not 0 <= p <= m:
            reader.fail(line, f"parent {p} of event {m} is not an earlier event or itself")
        if n_layers is not None and not 0 <= k < n_layers:
            reader.fail(line, f"layer {k} outside [0, {n_layers})")
        parents.append(p)
        layers.append(k)
    if n_events is not None and len(parents) != n_events:
        raise MalformedInputError(reader.path, len(reader.lines),
                                  f"{len(parents)} assignments for {n_events} events")
    return ParentAssignment(np.array(parents, np.int64), np.array(layers, np.int64))


# ---------------------------------------------------------------------------
# Networks
# ---------------------------------------------------------------------------

def write_network(params: MultiplexParams, directory):
    d = Path(directory)
    u, v, k = np.nonzero(params.adjacency)
    _write_rows(d / EDGES, ["u", "v", "k", "weight"],
                zip(u, v, k, params.influence[u, v, k]))
    nodes = params.nodes
    N, K = params.n_nodes, params.n_layers
    _write_rows(d / NODES, ["u", "k", "lambda", "A", "S", "alpha"],
                ((a, b, nodes.background[a, b], nodes.authoritative[a, b],
                  nodes.susceptible[a, b], nodes.topic_prior[a, b])
                 for a in range(N) for b in range(K)))
    _write_rows(d / LAYERS, ["k", "pi"], enumerate(params.layer_activity))


def read_network(directory) -> MultiplexParams:
    d = Path(directory)
    layers = _Reader(d / LAYERS, ["k", "pi"])
    pi = []
    for line, (k, p) in layers.rows():
        if layers.number(line, k, int, "k") != len(pi):
            layers.fail(line, f"expected layer {len(pi)}")
        pi.append(layers.number(line, p, float, "pi"))
    K = len(pi)
    if K == 0:
        layers.fail(2, "no layers")

    table = _Reader(d / NODES, ["u", "k", "lambda", "A", "S", "alpha"])
    rows = []
    for line, parts in table.rows():
        u, k = table.number(line, parts[0], int, "u"), table.number(line, parts[1], int, "k")
        if (u, k) != divmod(len(rows), K):
            table.fail(line, f"expected row u={len(rows) // K}, k={len(rows) % K}")
        vals = [table.number(line, x, float, n) for x, n in
                zip(parts[2:], ("lambda", "A", "S", "alpha"))]
        if vals[0] < 0 or vals[1] < 0 or vals[2] < 0 or vals[3] <= 0:
            table.fail(line, "negative rate or membership, or non-positive alpha")
        rows.append(vals)
    if not rows or len(rows) % K:
        table.fail(len(table.lines), f"row count {len(rows)} is not a positive multiple of K={K}")
    arr = np.array(rows).reshape(-1, K, 4)
    N = arr.shape[0]

    G = np.zeros((N, N, K), np.int8)
    W = np.zeros((N, N, K))
    edges = _Reader(d / EDGES, ["u", "v", "k", "weight"])
    for line, parts in edges.rows():
        u, v, k = (edges.number(line, x, int, n) for x, n in zip(parts[:3], "uvk"))
        w = edges.number(line, parts[3], float, "weight")
        if not (0 <= u < N and 0 <= v < N and 0 <= k < K):
            edges.fail(line, f"edge ({u},{v},{k}) outside a {N}x{N}x{K} network")
        if u == v:
            edges.fail(line, "self-edge")
        if w <= 0:
            edges.fail(line, "edge weight must be positive")
        if G[u, v, k]:
            edges.fail(line, "duplicate edge")
        G[u, v, k], W[u, v, k] = 1, w

    nodes = NodeParams(arr[..., 0].copy(), arr[..., 1].copy(), arr[..., 2].copy(),
                       arr[..., 3].copy())
    params = MultiplexParams(G, W, nodes, np.array(pi))
    try:
        params.validate()
    except ValueError as exc:
        raise MalformedInputError(d, 0, str(exc)) from None
    return params


# ---------------------------------------------------------------------------
# Posterior summaries and traces
# ---------------------------------------------------------------------------

def write_summary(summary: PosteriorSummary, directory):
    d = Path(directory)
    N, _, K = summary.influence.shape
    freq = summary.edge_frequency
    if freq is None:
        freq = np.full(summary.influence.shape, np.nan)
    _write_rows(d / "summary_edges.csv", ["u", "v", "k", "probability", "frequency", "weight"],
                ((u, v, k, summary.edge_probability[u, v, k], freq[u, v, k],
                  summary.influence[u, v, k])
                 for u in range(N) for v in range(N) for k in range(K) if u != v))
    _write_rows(d / "summary_nodes.csv", ["u", "k", "lambda", "A", "S"],
                ((u, k, summary.background[u, k], summary.authoritative[u, k],
                  summary.susceptible[u, k]) for u in range(N) for k in range(K)))
    _write_rows(d / "summary_layers.csv", ["k", "pi"], enumerate(summary.layer_activity))
    _write_rows(d / "summary_labels.csv", ["event", "parent", "layer", "frequency"],
                ((m, p, k, f) for m, labels in enumerate(summary.parent_frequencies)
                 for (p, k), f in sorted(labels.items())))
    (d / "summary_meta.csv").write_text(f"name,value\nn_samples,{summary.n_samples}\n",
                                        encoding="utf-8")


def read_summary(directory) -> PosteriorSummary:
    d = Path(directory)
    layers = _Reader(d / "summary_layers.csv", ["k", "pi"])
    pi = [layers.number(i, p[1], float, "pi") for i, p in layers.rows()]
    K = len(pi)

    nodes = _Reader(d / "summary_nodes.csv", ["u", "k", "lambda", "A", "S"])
    vals = [[nodes.number(i, x, float) for x in p[2:]] for i, p in nodes.rows()]
    if not vals or len(vals) % K:
        nodes.fail(len(nodes.lines), f"row count {len(vals)} is not a multiple of K={K}")
    arr = np.array(vals).reshape(-1, K, 3)
    N = arr.shape[0]

    prob = np.zeros((N, N, K))
    freq = np.zeros((N, N, K))
    weight = np.zeros((N, N, K))
    edges = _Reader(d / "summary_edges.csv", ["u", "v", "k", "probability", "frequency", "weight"])
    for i, p in edges.rows():
        u, v, k = (edges.number(i, x, int) for x in p[:3])
        if not (0 <= u < N and 0 <= v < N and 0 <= k < K):
            edges.fail(i, f"entry ({u},{v},{k}) outside a {N}x{N}x{K} network")
        prob[u, v, k], freq[u, v, k], weight[u, v, k] = (
            edges.number(i, x, float) if x != "nan" else np.nan for x in p[3:])

    labels_reader = _Reader(d / "summary_labels.csv", ["event", "parent", "layer", "frequency"])
    labels = []
    for i, p in labels_reader.rows():
        m, par, k = (labels_reader.number(i, x, int) for x in p[:3])
        while len(labels) <= m:
            labels.append({})
        labels[m][(par, k)] = labels_reader.number(i, p[3], float)

    meta = _Reader(d / "summary_meta.csv", ["name", "value"])
    n_samples = 0
    for i, p in meta.rows():
        if p[0] == "n_samples":
            n_samples = meta.number(i, p[1], int)

    return PosteriorSummary(influence=weight, background=arr[..., 0], edge_probability=prob,
                            layer_activity=np.array(pi), authoritative=arr[..., 1],
                            susceptible=arr[..., 2], parent_frequencies=labels,
                            n_samples=n_samples,
                            edge_frequency=None if np.isnan(freq).all() else freq)


def _index_names(prefix, shape):
    return [prefix + "_" + "_".join(map(str, idx)) for idx in np.ndindex(*shape)]


def write_trace(trace: ChainTrace, directory):
    """One file per parameter group (retained draws) plus the full label traces."""
    d = Path(directory)
    its = trace.sample_iterations
    for name in TRACE_GROUPS:
        draws = trace.samples[name]
        shape = draws.shape[1:]
        _write_rows(d / f"trace_{name}.csv", ["iteration"] + _index_names(name, shape),
                    ([it] + list(row.ravel()) for it, row in zip(its, draws)))
    M = trace.parents.shape[1]
    for name, arr in (("parents", trace.parents), ("layers", trace.layers)):
        _write_rows(d / f"trace_{name}.csv", ["iteration"] + [f"e{m}" for m in range(M)],
                    ([it + 1] + list(row) for it, row in enumerate(arr)))


def read_label_trace(directory):
    """(parents, layers) arrays of shape (iterations, M) from a trace directory."""
    d = Path(directory)
    out = []
    for name in ("parents", "layers"):
        reader = _Reader(d / f"trace_{name}.csv")
        out.append(np.array([[reader.number(i, x, int) for x in p[1:]] for i, p in reader.rows()],
                            dtype=np.int64))
    parents, layers = out
    M = len(_Reader(d / "trace_parents.csv").lines[0].split(",")) - 1
    return parents.reshape(-1, M), layers.reshape(-1, M)


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

def write_report(report, path):
    _write_rows(path, ["name", "value"], report.rows())


def read_report(path):
    reader = _Reader(path, ["name", "value"])
    return {p[0]: (float(p[1]) if p[1] != "nan" else float("nan")) for _, p in reader.rows()}


def write_convergence(series, path):
    _write_rows(path, ["iteration", "accuracy"], ((i + 1, a) for i, a in enumerate(series)))


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    simulation: SimulationConfig = field(default_factory=lambda: SimulationConfig(9, 3, 5000.0))
    chain: ChainConfig = field(default_factory=ChainConfig)
    output_dir: Path = Path("runs")
    replications: int = 5
    windows: tuple = ()
    fit_kernel: bool = False

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        self.output_dir = Path(self.output_dir)
        if any(w <= 0 for w in self.windows):
            raise ValueError("windows must be positive")

    @property
    def hyper(self):
        return self.simulation.hyper

    @property
    def kernel(self):
        return self.simulation.kernel


def _coerce(template, text):
    if isinstance(template, bool):
        low = text.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if isinstance(template, int):
        return int(text)
    if isinstance(template, float):
        return float(text)
    if template is None:
        # optional numeric settings (max_lag, mh_concentration)
        return None if text.strip().lower() in ("", "none") else float(text)
    return text.strip()


def _apply(obj, values: dict, section):
    known = {f.name: f for f in fields(obj)}
    changes = {}
    for key, text in values.items():
        if key not in known:
            raise KeyError(f"unknown setting {section}.{key}")
        current = getattr(obj, key)
        if isinstance(current, np.ndarray):
            raise KeyError(f"{section}.{key} cannot be set from text")
        changes[key] = _coerce(current, text) if not isinstance(text, (int, float)) else text
    return replace(obj, **changes)


def load_config(path=None, overrides: dict | None = None) -> ExperimentConfig:
    """Read an INI-style config (sections simulation, chain, hyper, kernel,
    experiment) and apply dotted ``section.key`` overrides on top."""
    sections = {s: {} for s in ("simulation", "chain", "hyper", "kernel", "experiment")}
    if path is not None:
        parser = configparser.ConfigParser()
        if not parser.read(path, encoding="utf-8"):
            raise FileNotFoundError(f"{path}: no such config file")
        for name in parser.sections():
            if name not in sections:
                raise KeyError(f"unknown config section [{name}]")
            sections[name].update(parser[name])
    for dotted, value in (overrides or {}).items():
        section, _, key = dotted.partition(".")
        if section not in sections or not key:
            raise KeyError(f"override {dotted!r} is not of the form section.key")
        sections[section][key] = value

    hyper = _apply(Hyperparameters(), sections["hyper"], "hyper")
    kernel = _apply(DelayKernel(), sections["kernel"], "kernel")
    sim = dict(sections["simulation"])
    base = SimulationConfig(int(sim.pop("n_nodes", 9)), int(sim.pop("n_layers", 3)),
                            float(sim.pop("window", 5000.0)), hyper=hyper, kernel=kernel)
    simulation = _apply(base, sim, "simulation")
    chain = _apply(ChainConfig(), sections["chain"], "chain")

    exp = dict(sections["experiment"])
    windows = exp.pop("windows", ())
    if isinstance(windows, str):
        windows = tuple(float(w) for w in windows.replace(",", " ").split())
    out = ExperimentConfig(simulation, chain, Path(exp.pop("output_dir", "runs")),
                           int(exp.pop("replications", 5)), tuple(windows),
                           _coerce(False, str(exp.pop("fit_kernel", "false"))))
    if exp:
        raise KeyError(f"unknown setting experiment.{next(iter(exp))}")
    return out
