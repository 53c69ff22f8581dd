"""Multi-view anomaly detection for poisoned signed graphs.

Two feature views are implemented: the balance-metric pair (triad balance
ratio and graph polarization) and the mean truncated-SVD node embedding.
Each view feeds a one-class SVM with RBF kernel trained on clean graphs
only; an ensemble combines per-view decision scores (min-max normalized
over the evaluation set) by mean, min or max.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .balance import balance_ratio, graph_polarization, triad_census
from .errors import ConfigError, MetricUndefinedError, NumericError
from .fextra import auc
from .graph import GraphCorpus, SignedGraph
from .linalg import truncated_svd

DEFAULT_NU = 0.1
DEFAULT_GAMMA = 0.1
DEFAULT_EMBED_DIM = 32


@dataclass
class OCSVMModel:
    support_vectors: np.ndarray  # z-scored feature rows with alpha > 0
    alphas: np.ndarray
    rho: float
    gamma: float
    nu: float
    mean: np.ndarray
    std: np.ndarray

    def to_json_dict(self):
        return {
            "support_vectors": self.support_vectors.tolist(),
            "alphas": self.alphas.tolist(),
            "rho": self.rho,
            "gamma": self.gamma,
            "nu": self.nu,
            "normalizer": {"mean": self.mean.tolist(), "std": self.std.tolist()},
        }


def _rbf(gamma, X, Y):
    sq = ((X[:, None, :] - Y[None, :, :]) ** 2).sum(axis=2)
    return np.exp(-gamma * sq)


def ocsvm_fit(X, nu=DEFAULT_NU, gamma=DEFAULT_GAMMA, tol=1e-6, max_passes=None) -> OCSVMModel:
    """Solve the nu-parameterized one-class dual by pairwise updates.

    min_a  1/2 a^T K a   s.t.  0 <= a_i <= 1/(nu m),  sum a_i = 1.
    Feature rows are z-scored first with the training normalizer.
    """
    X = np.asarray(X, dtype=float)
    m = X.shape[0]
    if m < 2:
        raise ConfigError("one-class SVM needs at least 2 training rows")
    if not 0 < nu <= 1:
        raise ConfigError(f"nu must be in (0, 1], got {nu}")
    mean = X.mean(axis=0)
    std = np.maximum(X.std(axis=0), 1e-12)
    Xz = (X - mean) / std

    C = 1.0 / (nu * m)
    K = _rbf(gamma, Xz, Xz)
    alpha = np.zeros(m)
    n_full = int(np.floor(nu * m))
    alpha[:n_full] = C
    if n_full < m:
        alpha[n_full] = 1.0 - n_full * C
    grad = K @ alpha

    max_passes = max_passes or 200 * m
    gap = np.inf
    for _ in range(max_passes):
        up_mask = alpha < C - 1e-15
        low_mask = alpha > 1e-15
        i_up = np.argmin(np.where(up_mask, grad, np.inf))
        i_low = np.argmax(np.where(low_mask, grad, -np.inf))
        gap = grad[i_low] - grad[i_up]
        if gap < tol:
            break
        quad = K[i_up, i_up] + K[i_low, i_low] - 2.0 * K[i_up, i_low]
        quad = max(quad, 1e-12)
        delta = min(gap / quad, C - alpha[i_up], alpha[i_low])
        alpha[i_up] += delta
        alpha[i_low] -= delta
        grad += delta * (K[:, i_up] - K[:, i_low])
    else:
        raise NumericError(f"one-class SVM did not converge (KKT gap {gap:g})")

    margin = (alpha > 1e-9) & (alpha < C - 1e-9)
    if margin.any():
        rho = float(grad[margin].mean())
    else:
        upper = grad[alpha <= 1e-9]
        lower = grad[alpha >= C - 1e-9]
        hi = upper.min() if upper.size else grad.max()
        lo = lower.max() if lower.size else grad.min()
        rho = float(0.5 * (hi + lo))

    sv = alpha > 1e-12
    return OCSVMModel(support_vectors=Xz[sv], alphas=alpha[sv], rho=rho,
                      gamma=gamma, nu=nu, mean=mean, std=std)


def ocsvm_decision(model: OCSVMModel, X):
    """Signed boundary distance; negative means anomalous."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Xz = (X - model.mean) / model.std
    K = _rbf(model.gamma, Xz, model.support_vectors)
    return K @ model.alphas - model.rho


def metric_features(g: SignedGraph, t=1.0):
    """(balance ratio, graph polarization); raises if the graph has no triads."""
    balanced, unbalanced, _ = triad_census(g)
    if balanced + unbalanced == 0:
        raise MetricUndefinedError("graph has no triads; rejected from metric view")
    return np.array([balance_ratio(g), graph_polarization(g, t)])


def tsvd_features(g: SignedGraph, d=DEFAULT_EMBED_DIM):
    """Mean of the top-d left singular vectors, zero-padded to d columns."""
    d_eff = min(d, g.n)
    U, _, _ = truncated_svd(g.adjacency(), d_eff)
    feat = U.mean(axis=0)
    if d_eff < d:
        feat = np.concatenate([feat, np.zeros(d - d_eff)])
    return feat


@dataclass
class DetectorView:
    kind: str  # "metric" or "tsvd"
    t: float
    d: int
    model: OCSVMModel
    rejected: int = 0

    def featurize(self, g: SignedGraph):
        if self.kind == "metric":
            return metric_features(g, self.t)
        if self.kind == "tsvd":
            return tsvd_features(g, self.d)
        raise ConfigError(f"unknown view kind {self.kind!r}")

    def scores(self, graphs):
        feats = np.vstack([self.featurize(g) for g in graphs])
        return ocsvm_decision(self.model, feats)


def fit_view(kind: str, corpus: GraphCorpus, t=1.0, d=DEFAULT_EMBED_DIM,
             nu=DEFAULT_NU, gamma=DEFAULT_GAMMA) -> DetectorView:
    """Fit one view's featurizer + one-class scorer on the clean corpus.

    Corpus graphs on which the features are undefined are dropped and
    counted on the returned view.
    """
    view = DetectorView(kind=kind, t=t, d=d, model=None)
    rows, rejected = [], 0
    for g in corpus.graphs:
        try:
            rows.append(view.featurize(g))
        except MetricUndefinedError:
            rejected += 1
    if len(rows) < 2:
        raise ConfigError(f"{kind} view: fewer than 2 corpus graphs with defined features")
    view.model = ocsvm_fit(np.vstack(rows), nu=nu, gamma=gamma)
    view.rejected = rejected
    return view


def _minmax(x):
    lo, hi = x.min(), x.max()
    if hi - lo < 1e-300:
        return np.full_like(x, 0.5)
    return (x - lo) / (hi - lo)


def detector_eval(clean: GraphCorpus, poisoned, views, strategy="max"):
    """Score clean + poisoned graphs and compute the detection AUC.

    Per view, decision scores over the whole evaluation set are min-max
    normalized, then combined across views by the chosen strategy. The AUC
    treats the anomaly class as positive by negating the combined score.
    Returns (auc_value, per_graph_rows).
    """
    if strategy not in ("mean", "min", "max"):
        raise ConfigError(f"unknown ensemble strategy {strategy!r}")
    if not poisoned:
        raise MetricUndefinedError("evaluation set has no poisoned graphs")
    graphs = list(clean.graphs) + list(poisoned)
    labels = np.array([1] * len(clean.graphs) + [-1] * len(poisoned))
    per_view = np.vstack([_minmax(v.scores(graphs)) for v in views])
    combined = {"mean": per_view.mean(axis=0),
                "min": per_view.min(axis=0),
                "max": per_view.max(axis=0)}[strategy]
    value = auc(-combined, (labels == -1).astype(int))
    rows = []
    for i, g in enumerate(graphs):
        rows.append({
            "graph": i,
            "label": int(labels[i]),
            "combined": float(combined[i]),
            **{f"view_{v.kind}": float(per_view[j, i]) for j, v in enumerate(views)},
        })
    return value, rows
