"""Greedy sign-flip poisoning attacks against the two trust predictors.

Every attack follows the same loop: evaluate the attack objective on the
current poisoned graph, back-propagate to the adjacency, score each
not-yet-flipped training link by the first-order objective increase a flip
would cause, and flip the best one. The objective being *maximized* is the
prediction error on the self-labelled test links, optionally penalized to
keep the balance metrics (and thereby the attack's visibility to detectors)
close to the clean graph:

    J = -(sum_e y_e log p_e + (1 - y_e) log(1 - p_e)) + lambda T + eta Pol

The recorded per-step ``loss_curve`` holds the raw log-likelihood sum (the
first term without the leading minus), so more negative means more damage.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tape as tp
from .balance import balance_ratio_terms, polarization_term
from .errors import ConfigError, MetricUndefinedError
from .fextra import link_features, lr_predict, lr_train, lr_train_theta, ols_theta, with_intercept
from .graph import DEGREE_FLOOR, EdgeSplit, SignedGraph
from .pole import (WalkParams, cosine_normalize, degree_weight_matrix,
                   factorization_steps, pole_predict, transition_matrix)

LOG_CLIP = 1e-12

TARGETS = ("fextra-ols", "fextra-meta", "pole-sym", "pole-unsym")


@dataclass
class AttackConfig:
    budget: int
    lam: float = 0.0
    eta: float = 0.0
    inner_iters: int = 100
    inner_lr: float = 0.01
    factor_dim: int = 32
    factor_iters: int = 50
    factor_lr: float = 0.01
    t: float = 1.0
    seed: int = 0
    checkpoints: tuple = ()  # attack powers (fractions of |E|) to snapshot


@dataclass
class AttackTrace:
    flips: list = field(default_factory=list)  # (u, v, step, predicted_gain)
    loss_curve: list = field(default_factory=list)
    snapshots: dict = field(default_factory=dict)  # power -> poisoned SignedGraph
    pool: set = field(default_factory=set)
    events: list = field(default_factory=list)

    def to_json_dict(self):
        return {
            "flips": [[int(u), int(v), int(s), float(g)] for u, v, s, g in self.flips],
            "loss_curve": [float(x) for x in self.loss_curve],
            "events": list(self.events),
            "snapshot_powers": sorted(self.snapshots),
        }


def flips_for_power(g: SignedGraph, power: float) -> int:
    """Flip count for an attack power given as a fraction of all links."""
    return int(round(power * g.num_edges))


def self_train_labels(model: str, g_clean: SignedGraph, split: EdgeSplit,
                      params: WalkParams | None = None, seed: int = 0):
    """Victim predictions on the test links, thresholded at 0.5 (ties -> 1).

    The labels are produced from the clean masked graph once and stay fixed
    for the whole attack.
    """
    masked = g_clean.mask(split.test)
    if model == "fextra":
        from .fextra import extract_features

        pairs = [(u, v) for u, v, _ in masked.edges]
        feats = extract_features(masked, pairs).data
        y_tr = (masked.signs()[split.train] > 0).astype(float)
        fitted = lr_train(feats[split.train], y_tr, seed=seed)
        probs = lr_predict(fitted, feats[split.test])
    elif model == "pole":
        probs = pole_predict(masked, split, params or WalkParams(), seed=seed)
    else:
        raise ConfigError(f"unknown victim model {model!r}")
    return (probs >= 0.5).astype(float)


def _log_likelihood(p, y_hat):
    """sum_e y log p + (1-y) log(1-p) with clipped log arguments."""
    p_lo = tp.clamp(p, LOG_CLIP, 1.0)
    p_hi = tp.clamp((1.0 - p), LOG_CLIP, 1.0)
    return tp.sum_(y_hat * tp.log(p_lo) + (1.0 - y_hat) * tp.log(p_hi))


class _FextraLoss:
    """Attack loss for the feature-based predictor (closed-form or unrolled)."""

    def __init__(self, masked: SignedGraph, split: EdgeSplit, y_hat, cfg: AttackConfig,
                 fit: str):
        self.support = masked.support()
        self.split = split
        self.y_hat = np.asarray(y_hat, dtype=float)
        self.cfg = cfg
        self.fit = fit
        edge = masked.edge_array()
        self.us, self.vs = edge[:, 0], edge[:, 1]
        rng = np.random.default_rng(cfg.seed)
        self.theta0 = rng.uniform(size=10)

    def __call__(self, A, signs):
        A_plus = tp.relu(A)
        A_minus = A_plus - A
        X = link_features(A_plus, A_minus, self.support, self.us, self.vs)
        X_tr = tp.gather_rows(X, self.split.train)
        X_te = tp.gather_rows(X, self.split.test)
        y_tr = (signs[self.split.train] > 0).astype(float)
        if self.fit == "ols":
            theta = ols_theta(X_tr, y_tr)
            p = tp.sigmoid(with_intercept(tp.log(X_te + 1.0)) @ theta)
        else:
            theta = lr_train_theta(with_intercept(X_tr), y_tr,
                                   self.cfg.inner_lr, self.cfg.inner_iters, self.theta0)
            p = tp.sigmoid(with_intercept(X_te) @ theta)
        return _log_likelihood(p, self.y_hat)


class _PoleLoss:
    """Attack loss through the autocovariance similarity pipeline."""

    def __init__(self, masked: SignedGraph, split: EdgeSplit, y_hat, cfg: AttackConfig,
                 mode: str):
        self.split = split
        self.y_hat = np.asarray(y_hat, dtype=float)
        self.cfg = cfg
        self.mode = mode
        self.degrees = masked.degrees()
        self.W = degree_weight_matrix(self.degrees)
        edge = masked.edge_array()
        self.us_te = edge[split.test, 0]
        self.vs_te = edge[split.test, 1]
        rng = np.random.default_rng(cfg.seed)
        self.U0 = rng.standard_normal((masked.n, min(cfg.factor_dim, masked.n)))

    def __call__(self, A, signs):
        M = transition_matrix(A, self.degrees, self.cfg.t, self.mode)
        R = tp.transpose(M) @ self.W @ M
        U, _ = factorization_steps(R, self.U0, self.cfg.factor_iters, self.cfg.factor_lr)
        _, P = cosine_normalize(R, U)
        p_e = tp.gather(P, self.us_te, self.vs_te)
        return _log_likelihood(p_e, self.y_hat)


def make_attack_loss(target: str, masked: SignedGraph, split: EdgeSplit,
                     y_hat, cfg: AttackConfig):
    if target == "fextra-ols":
        return _FextraLoss(masked, split, y_hat, cfg, fit="ols")
    if target == "fextra-meta":
        return _FextraLoss(masked, split, y_hat, cfg, fit="meta")
    if target == "pole-sym":
        return _PoleLoss(masked, split, y_hat, cfg, mode="sym")
    if target == "pole-unsym":
        return _PoleLoss(masked, split, y_hat, cfg, mode="unsym")
    raise ConfigError(f"unknown attack target {target!r}; expected one of {TARGETS}")


def penalized_loss(base, A, abs_mask, degrees, t, lam, eta, events=None):
    """base + lambda T(A) + eta Pol(A, t), each term on the tape.

    ``abs_mask`` is |A| as a fixed array (flips never change it). An
    undefined balance term contributes zero and logs an event. The
    polarization term runs on symmetric-mode transitions, the cheap
    differentiable path.
    """
    out = base
    if lam != 0.0:
        try:
            out = out + lam * balance_ratio_terms(A, abs_mask)
        except MetricUndefinedError:
            if events is not None:
                events.append("balance term undefined (no triads); contributed 0")
    if eta != 0.0:
        M_sign = transition_matrix(A, degrees, t, "sym")
        M_abs = transition_matrix(abs_mask, degrees, t, "sym")
        out = out + eta * polarization_term(M_sign, M_abs)
    return out


def _apply_flips_full(g_full: SignedGraph, flipped_idx) -> SignedGraph:
    signs = g_full.signs().astype(int)
    idx = list(flipped_idx)
    signs[idx] = -signs[idx]
    return g_full.with_signs(signs)


def _snapshot_plan(g: SignedGraph, powers):
    """flip count -> list of powers snapshotting there (counts can collide)."""
    plan = {}
    for p in powers:
        plan.setdefault(flips_for_power(g, p), []).append(p)
    return plan


def _pick_flip(scores, us, vs, pooled):
    """Index of the max score, ties toward the smallest (u, v) pair."""
    s = np.where(pooled, -np.inf, scores)
    order = np.lexsort((vs, us, -s))
    return int(order[0])


def flip_attack(g0: SignedGraph, split: EdgeSplit, target: str,
                cfg: AttackConfig, y_hat=None) -> AttackTrace:
    """Greedy budgeted sign-flip attack on the chosen target model.

    ``g0`` is the clean graph; test links are masked internally and never
    flipped. Snapshots taken at the configured attack powers carry the
    original test signs, i.e. they are the graph the analyst would observe.
    """
    if cfg.budget > len(split.train):
        raise ConfigError(f"budget {cfg.budget} exceeds {len(split.train)} training links")
    masked = g0.mask(split.test)
    if y_hat is None:
        victim = "fextra" if target.startswith("fextra") else "pole"
        y_hat = self_train_labels(victim, g0, split, WalkParams(t=cfg.t), seed=cfg.seed)
    loss_fn = make_attack_loss(target, masked, split, y_hat, cfg)

    A_cur = masked.adjacency()
    abs_mask = np.abs(A_cur)
    degrees = np.maximum(abs_mask.sum(axis=1), DEGREE_FLOOR)
    signs_cur = masked.signs()
    edge = masked.edge_array()
    us_tr, vs_tr = edge[split.train, 0], edge[split.train, 1]
    trace = AttackTrace()
    plan = _snapshot_plan(g0, cfg.checkpoints)
    for p in plan.get(0, []):
        trace.snapshots[p] = _apply_flips_full(g0, [])

    pooled = np.zeros(len(split.train), dtype=bool)
    for step in range(cfg.budget):
        tape = tp.Tape()
        A = tape.leaf(A_cur, requires_grad=True)
        base = loss_fn(A, signs_cur)
        objective = penalized_loss(-base, A, abs_mask, degrees, cfg.t,
                                   cfg.lam, cfg.eta, trace.events)
        tape.backward(objective)
        G = A.grad_or_zero()

        scores = (-2.0 * signs_cur[split.train]) * (G[us_tr, vs_tr] + G[vs_tr, us_tr])
        j = _pick_flip(scores, us_tr, vs_tr, pooled)
        gain = float(scores[j])
        if gain <= 0:
            trace.events.append(f"step {step}: no positive first-order gain; "
                                f"least-bad flip taken")
        k_best = int(split.train[j])
        u, v = edge[k_best]
        A_cur[u, v] = A_cur[v, u] = -A_cur[u, v]
        signs_cur[k_best] = -signs_cur[k_best]
        pooled[j] = True
        trace.pool.add(k_best)
        trace.flips.append((int(u), int(v), step, gain))
        trace.loss_curve.append(float(tp._data(base)))

        for p in plan.get(step + 1, []):
            trace.snapshots[p] = _apply_flips_full(g0, trace.pool)
    return trace


def baseline_rand(g0: SignedGraph, split: EdgeSplit, budget: int, seed: int,
                  checkpoints=()) -> AttackTrace:
    """Flip a uniform random set of training links."""
    if budget > len(split.train):
        raise ConfigError(f"budget {budget} exceeds {len(split.train)} training links")
    rng = np.random.default_rng(seed)
    chosen = rng.choice(split.train, size=budget, replace=False)
    edge = g0.edge_array()
    trace = AttackTrace()
    plan = _snapshot_plan(g0, checkpoints)
    for p in plan.get(0, []):
        trace.snapshots[p] = _apply_flips_full(g0, [])
    for step, k in enumerate(chosen):
        u, v = edge[k]
        trace.pool.add(int(k))
        trace.flips.append((int(u), int(v), step, 0.0))
        for p in plan.get(step + 1, []):
            trace.snapshots[p] = _apply_flips_full(g0, trace.pool)
    return trace


def baseline_greedy_triads(g0: SignedGraph, split: EdgeSplit, budget: int,
                           checkpoints=()) -> AttackTrace:
    """Flip the training link whose flip most reduces the balanced-triad count.

    For a link (u, v) with sign s, the balanced-minus-unbalanced count of
    triads through it is s * (A^2)[u, v]; flipping negates it, so the greedy
    score is exactly that quantity.
    """
    if budget > len(split.train):
        raise ConfigError(f"budget {budget} exceeds {len(split.train)} training links")
    masked = g0.mask(split.test)
    A = masked.adjacency()
    signs = masked.signs()
    edge = masked.edge_array()
    us_tr, vs_tr = edge[split.train, 0], edge[split.train, 1]
    trace = AttackTrace()
    plan = _snapshot_plan(g0, checkpoints)
    for p in plan.get(0, []):
        trace.snapshots[p] = _apply_flips_full(g0, [])
    pooled = np.zeros(len(split.train), dtype=bool)
    for step in range(budget):
        A2 = A @ A
        scores = signs[split.train] * A2[us_tr, vs_tr]
        j = _pick_flip(scores, us_tr, vs_tr, pooled)
        k_best = int(split.train[j])
        u, v = edge[k_best]
        A[u, v] = A[v, u] = -A[u, v]
        signs[k_best] = -signs[k_best]
        pooled[j] = True
        trace.pool.add(k_best)
        trace.flips.append((int(u), int(v), step, float(scores[j])))
        for p in plan.get(step + 1, []):
            trace.snapshots[p] = _apply_flips_full(g0, trace.pool)
    return trace
