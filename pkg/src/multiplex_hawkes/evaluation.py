"""
Scoring an inferred network against the ground truth it was simulated from.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import rankdata

from .errors import EmptySupportError, UndefinedAUCError
from .model import MultiplexParams, ParentAssignment


def _same_shape(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def mae_influence(true_w, est_w, signed=False):
    """Mean relative error over the true edges, |W - W_hat| / W.

    With ``signed=True`` the sign is kept, (W - W_hat) / W, which can cancel
    out; the absolute version is the one to report.
    """
    true_w, est_w = _same_shape(true_w, est_w)
    support = true_w > 0
    if not support.any():
        raise EmptySupportError("no true edges: relative influence error is undefined")
    rel = (true_w[support] - est_w[support]) / true_w[support]
    return float(rel.mean() if signed else np.abs(rel).mean())


def false_edge_mass(true_w, est_w):
    """Total estimated influence placed on pairs with no true edge."""
    true_w, est_w = _same_shape(true_w, est_w)
    return float(est_w[true_w == 0].sum())


def tae(true_vec, est_vec):
    """Total absolute error."""
    true_vec, est_vec = _same_shape(true_vec, est_vec)
    return float(np.abs(true_vec - est_vec).sum())


def _check_lengths(truth, inferred):
    if len(truth) != len(inferred):
        raise ValueError(f"assignment lengths differ: {len(truth)} vs {len(inferred)}")


def parent_accuracy(truth: ParentAssignment, inferred: ParentAssignment):
    _check_lengths(truth, inferred)
    if len(truth) == 0:
        return 1.0
    return float(np.mean(truth.parents == inferred.parents))


def parent_channel_accuracy(truth: ParentAssignment, inferred: ParentAssignment):
    """Share of events whose parent and layer are both right (spontaneous means parent = self)."""
    _check_lengths(truth, inferred)
    if len(truth) == 0:
        return 1.0
    hit = (truth.parents == inferred.parents) & (truth.layers == inferred.layers)
    return float(np.mean(hit))


def edge_auc(true_g, edge_probs):
    """ROC area for ranking the off-diagonal (u, v, k) entries by edge probability.

    Computed as the Mann-Whitney statistic with midranks for ties, so a
    constant score gives exactly 0.5.
    """
    true_g, edge_probs = _same_shape(true_g, edge_probs)
    n = true_g.shape[0]
    off = ~np.eye(n, dtype=bool)
    y = true_g[off].ravel() > 0
    score = edge_probs[off].ravel()
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedAUCError("AUC needs both edges and non-edges in the truth")
    ranks = rankdata(score)
    u_stat = ranks[y].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u_stat / (n_pos * n_neg))


def convergence_trace(parents, layers, truth: ParentAssignment):
    """Parent+channel accuracy of every stored iteration.

    `parents` and `layers` are (iterations, M) arrays as kept by the chain.
    """
    parents = np.atleast_2d(np.asarray(parents))
    layers = np.atleast_2d(np.asarray(layers))
    if parents.shape != layers.shape:
        raise ValueError("parents and layers traces differ in shape")
    if parents.shape[1] != len(truth):
        raise ValueError("trace width does not match the number of events")
    if len(truth) == 0:
        return np.ones(parents.shape[0])
    hit = (parents == truth.parents) & (layers == truth.layers)
    return hit.mean(axis=1)


@dataclass
class EvalReport:
    mae_influence: float
    mae_influence_signed: float
    false_edge_mass: float
    tae_lambda: float
    tae_A: float
    tae_S: float
    parent_accuracy: float
    parent_channel_accuracy: float
    edge_auc: float
    trace: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def rows(self):
        """(name, value) pairs for every scalar metric, in a fixed order."""
        return [(k, v) for k, v in asdict(self).items() if k != "trace"]


def evaluate(truth: MultiplexParams, estimate, truth_assignment=None, inferred_assignment=None,
             edge_probs=None, trace=None) -> EvalReport:
    """Every metric at once.

    `estimate` is anything with ``influence``, ``background``,
    ``authoritative`` and ``susceptible`` arrays (a PosteriorSummary, or a
    MultiplexParams whose node parameters are read through ``.nodes``).
    Metrics that cannot be computed are reported as NaN.
    """
    est = getattr(estimate, "nodes", estimate)
    est_w = estimate.influence
    nan = float("nan")

    try:
        mae = mae_influence(truth.influence, est_w)
        mae_signed = mae_influence(truth.influence, est_w, signed=True)
    except EmptySupportError:
        mae = mae_signed = nan

    if edge_probs is None:
        edge_probs = getattr(estimate, "edge_probability", None)
    if edge_probs is None:
        edge_probs = getattr(estimate, "adjacency", None)
    try:
        auc = edge_auc(truth.adjacency, edge_probs) if edge_probs is not None else nan
    except UndefinedAUCError:
        auc = nan

    pa = pca = nan
    if truth_assignment is not None and inferred_assignment is not None:
        pa = parent_accuracy(truth_assignment, inferred_assignment)
        pca = parent_channel_accuracy(truth_assignment, inferred_assignment)

    series = np.zeros(0)
    if trace is not None and truth_assignment is not None:
        series = convergence_trace(trace.parents, trace.layers, truth_assignment)

    return EvalReport(
        mae_influence=mae,
        mae_influence_signed=mae_signed,
        false_edge_mass=false_edge_mass(truth.influence, est_w),
        tae_lambda=tae(truth.nodes.background, est.background),
        tae_A=tae(truth.nodes.authoritative, est.authoritative),
        tae_S=tae(truth.nodes.susceptible, est.susceptible),
        parent_accuracy=pa,
        parent_channel_accuracy=pca,
        edge_auc=auc,
        trace=series,
    )
