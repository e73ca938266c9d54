"""Per-group VAF clustering: EM over diagonal Gaussian mixtures, BIC model
selection, and size/distance-based cluster cleanup."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .calling import SnvGroup
from .core import Cluster, hamming_weight

log = logging.getLogger(__name__)

VAR_FLOOR = 1e-5


@dataclass(frozen=True)
class ClusteringConfig:
    max_components: int = 5
    min_cluster_size: int = 2
    min_private_cluster_size: int = 1
    collapse_distance: float = 0.1
    em_max_iters: int = 200
    em_tol: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.max_components < 1:
            raise ValueError("max_components must be >= 1")
        if self.collapse_distance < 0:
            raise ValueError("collapse_distance must be >= 0")


@dataclass
class GroupVafMatrix:
    """The n x s matrix of member VAFs restricted to the group's 1-samples."""

    group: SnvGroup
    matrix: np.ndarray

    @classmethod
    def from_group(cls, group: SnvGroup) -> "GroupVafMatrix":
        support = group.profile.support
        m = np.array([[snv.vaf[i] for i in support] for snv in group.members], dtype=float)
        return cls(group, m)


def _log_gauss_diag(x: np.ndarray, means: np.ndarray, variances: np.ndarray) -> np.ndarray:
    # (n, K) log densities for diagonal-covariance components
    diff = x[:, None, :] - means[None, :, :]
    return -0.5 * np.sum(
        diff * diff / variances[None, :, :] + np.log(2.0 * np.pi * variances[None, :, :]),
        axis=2,
    )


def _farthest_point_centers(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    centers = [x[int(rng.integers(len(x)))]]
    for _ in range(1, k):
        d = np.min(
            [np.sum((x - c) ** 2, axis=1) for c in centers], axis=0
        )
        centers.append(x[int(np.argmax(d))])
    return np.array(centers)


def _em_fit(
    x: np.ndarray, k: int, rng: np.random.Generator, cfg: ClusteringConfig
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, list[float]]:
    """EM for a k-component diagonal GMM; returns (weights, means, vars, resp, ll trace)."""
    n, s = x.shape
    centers = _farthest_point_centers(x, k, rng)
    # hard-assign to the nearest seed center for the initial M step
    d2 = np.array([np.sum((x - c) ** 2, axis=1) for c in centers]).T
    resp = np.zeros((n, k))
    resp[np.arange(n), np.argmin(d2, axis=1)] = 1.0

    weights = np.full(k, 1.0 / k)
    means = centers.copy()
    variances = np.full((k, s), max(np.var(x, axis=0).mean(), VAR_FLOOR))
    ll_trace: list[float] = []
    for _ in range(cfg.em_max_iters):
        prev_resp = resp
        # M step from current responsibilities
        nk = resp.sum(axis=0)
        safe = np.maximum(nk, 1e-12)
        weights = np.maximum(nk / n, 1e-12)
        weights = weights / weights.sum()
        means = (resp.T @ x) / safe[:, None]
        diff = x[:, None, :] - means[None, :, :]
        variances = np.maximum(
            np.einsum("nk,nks->ks", resp, diff * diff) / safe[:, None], VAR_FLOOR
        )
        # E step
        log_comp = _log_gauss_diag(x, means, variances) + np.log(weights)[None, :]
        log_norm = np.logaddexp.reduce(log_comp, axis=1)
        ll = float(log_norm.sum())
        if ll_trace and ll < ll_trace[-1]:
            # the variance floor can bind and dent the likelihood; stop there
            resp = prev_resp
            break
        resp = np.exp(log_comp - log_norm[:, None])
        if ll_trace and ll - ll_trace[-1] < cfg.em_tol:
            ll_trace.append(ll)
            break
        ll_trace.append(ll)
    return weights, means, variances, resp, ll_trace


def _bic(ll: float, k: int, n: int, s: int) -> float:
    n_params = (k - 1) + 2 * k * s
    return -2.0 * ll + n_params * np.log(n)


# a larger K must beat the incumbent by this much BIC to be accepted; keeps
# floor-variance needle components from winning on marginal likelihood gains
BIC_MARGIN = 10.0


def fit_clusters(m: GroupVafMatrix, cfg: ClusteringConfig) -> list[Cluster]:
    """Cluster one group's VAF rows, choosing the component count by BIC.

    Cluster ids are temporary (0-based within the group); the pipeline assigns
    stable ids after pruning.
    """
    x = m.matrix
    n = len(x)
    if n == 1:
        return _build_clusters(m, [[0]])

    rng = _group_rng(cfg.seed, m.group.profile.bits)
    best_labels, best_bic = None, np.inf
    for k in range(1, min(cfg.max_components, n) + 1):
        _, _, _, resp, ll_trace = _em_fit(x, k, rng, cfg)
        bic = _bic(ll_trace[-1], k, n, x.shape[1])
        margin = 1e-12 if best_labels is None else BIC_MARGIN
        if bic < best_bic - margin:
            best_bic = bic
            best_labels = np.argmax(resp, axis=1)

    rows_by_label: dict[int, list[int]] = {}
    for i, lab in enumerate(best_labels):
        rows_by_label.setdefault(int(lab), []).append(i)
    memberships = [rows_by_label[lab] for lab in sorted(rows_by_label)]
    memberships.sort(key=lambda rows: rows[0])
    return _build_clusters(m, memberships)


def _group_rng(seed: int, bits: str) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, int(bits, 2), len(bits)]))


def _build_clusters(m: GroupVafMatrix, memberships: list[list[int]]) -> list[Cluster]:
    clusters = []
    for rows in memberships:
        sub = m.matrix[rows]
        centroid = tuple(float(v) for v in sub.mean(axis=0))
        stderr = tuple(float(v) for v in sub.std(axis=0, ddof=0) / np.sqrt(len(rows)))
        clusters.append(
            Cluster(
                profile=m.group.profile,
                members=tuple(m.group.members[i] for i in rows),
                centroid=centroid,
                stderr=stderr,
                id=-1,
                robust=m.group.robust,
            )
        )
    return clusters


def prune_and_collapse(
    clusters: list[Cluster], m: GroupVafMatrix, cfg: ClusteringConfig
) -> list[Cluster]:
    """Merge under-sized clusters into their nearest neighbor, then repeatedly
    merge the closest cluster pair while centroids sit closer than the collapse
    distance. No SSNV is dropped here; a group that cannot sustain multiple
    clusters falls back to a single one."""
    min_size = (
        cfg.min_private_cluster_size
        if hamming_weight(m.group.profile) == 1
        else cfg.min_cluster_size
    )
    row_of = {snv.idx: i for i, snv in enumerate(m.group.members)}
    sets = [sorted(row_of[s.idx] for s in c.members) for c in clusters]

    def centroid(rows):
        return m.matrix[rows].mean(axis=0)

    # size pass: absorb the smallest under-sized cluster into its nearest neighbor
    while len(sets) > 1 and any(len(rows) < min_size for rows in sets):
        small = min(
            (i for i, rows in enumerate(sets) if len(rows) < min_size),
            key=lambda i: (len(sets[i]), sets[i][0]),
        )
        c_small = centroid(sets[small])
        others = [i for i in range(len(sets)) if i != small]
        target = min(
            others,
            key=lambda i: (float(np.sum((centroid(sets[i]) - c_small) ** 2)), sets[i][0]),
        )
        sets[target] = sorted(sets[target] + sets[small])
        del sets[small]

    # collapse pass: merge the closest pair below the distance cutoff, repeat
    while len(sets) > 1:
        pairs = [
            (float(np.linalg.norm(centroid(a) - centroid(b))), a[0], b[0], i, j)
            for i, a in enumerate(sets)
            for j, b in enumerate(sets)
            if i < j
        ]
        dist, _, _, i, j = min(pairs)
        if dist >= cfg.collapse_distance:
            break
        sets[i] = sorted(sets[i] + sets[j])
        del sets[j]

    sets.sort(key=lambda rows: rows[0])
    return _build_clusters(m, sets)


def cluster_groups(groups: list[SnvGroup], cfg: ClusteringConfig) -> list[Cluster]:
    """Cluster every group and assign stable, deterministic cluster ids."""
    out: list[Cluster] = []
    for group in sorted(groups, key=lambda g: g.profile.bits):
        m = GroupVafMatrix.from_group(group)
        clusters = prune_and_collapse(fit_clusters(m, cfg), m, cfg)
        out.extend(clusters)
    return [
        Cluster(c.profile, c.members, c.centroid, c.stderr, id=i + 1, robust=c.robust)
        for i, c in enumerate(out)
    ]
