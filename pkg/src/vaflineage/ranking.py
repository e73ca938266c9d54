"""Tree scoring and ranking: local squared-violation score, the global
quadratic-programming consistency check on centroid deviations, and per-sample
subclone decomposition of ranked trees.

The QP asks for per-(node, sample) centroid deviations, bounded by the error
margin, that make every children sum fit under its parent; a tree is invalid
if no such deviations exist. It separates by sample into small dense
projection problems, solved exactly with the Lawson-Hanson active-set method
(least-distance programming via non-negative least squares). Feasibility is
decided beforehand by exact interval propagation up the tree, so the numeric
solve only ever runs on feasible instances.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import nnls

from .network import ConstraintNetwork
from .search import CandidateTree

KKT_TOL = 1e-6


@dataclass
class QpSolution:
    e: dict[tuple[int, int], float]  # (node id, sample) -> deviation
    objective: float
    feasible: bool


@dataclass
class RankedTree:
    tree: CandidateTree
    local_score: float
    qp: QpSolution | None
    rank: int


@dataclass
class SampleDecomposition:
    sample: int
    lineages: list[tuple[tuple[int, ...], float]]  # (root-to-node path, prevalence)


def _children_map(tree: CandidateTree) -> dict[int, list[int]]:
    kids: dict[int, list[int]] = {}
    for p, c in tree.edges:
        kids.setdefault(p, []).append(c)
    return kids


def local_score(net: ConstraintNetwork, tree: CandidateTree) -> float:
    """Sum of squared per-sample children-sum excesses over all nodes."""
    kids = _children_map(tree)
    total = 0.0
    for u, children in kids.items():
        cu = net.nodes[u].full_centroid
        for i in range(len(cu)):
            excess = sum(net.nodes[c].full_centroid[i] for c in sorted(children)) - cu[i]
            if excess > 0:
                total += excess * excess
    return total


def _feasible_by_propagation(
    vaf: dict[int, float], kids: dict[int, list[int]], order: list[int], eps: float
) -> dict[int, float] | None:
    # Minimal feasible deviation per node, children first. A node's deviation
    # must absorb its children's minimal adjusted sum; if that exceeds the
    # upper bound min(eps, vaf) anywhere, no assignment exists. The returned
    # map is itself a feasible (not necessarily optimal) assignment.
    emin: dict[int, float] = {}
    for v in order:
        lo = -eps
        if kids.get(v):
            lo = max(lo, sum(vaf[c] + emin[c] for c in sorted(kids[v])) - vaf[v])
        if lo > min(eps, vaf[v]) + 1e-12:
            return None
        emin[v] = lo
    return emin


def _solve_ldp(g: np.ndarray, h: np.ndarray) -> np.ndarray | None:
    """Least-distance programming: min ||x|| s.t. g x >= h (Lawson-Hanson).

    Returns the minimizer, or None when the constraints are incompatible.
    """
    m, n = g.shape
    e_mat = np.vstack([g.T, h[None, :]])
    f_vec = np.zeros(n + 1)
    f_vec[-1] = 1.0
    u, _ = nnls(e_mat, f_vec)
    r = e_mat @ u - f_vec
    if abs(r[-1]) < 1e-12:
        return None
    return -r[:-1] / r[-1]


def solve_qp(net: ConstraintNetwork, tree: CandidateTree, eps: float) -> QpSolution:
    """Minimize the summed squared deviations subject to the per-node adjusted
    children-sum constraints and the per-deviation bounds."""
    kids = _children_map(tree)
    node_ids = sorted(net.nodes)
    index = {nid: j for j, nid in enumerate(node_ids)}
    n = len(node_ids)
    s = len(net.nodes[net.root_id].full_centroid)
    order = _topo_children_first(tree, net.root_id)

    e_map: dict[tuple[int, int], float] = {}
    objective = 0.0
    for i in range(s):
        vaf = {nid: net.nodes[nid].full_centroid[i] for nid in node_ids}
        witness = _feasible_by_propagation(vaf, kids, order, eps)
        if witness is None:
            return QpSolution(e={}, objective=float("inf"), feasible=False)

        slack_ok = all(
            sum(vaf[c] for c in sorted(children)) <= vaf[u] for u, children in kids.items()
        )
        if slack_ok:
            for nid in node_ids:
                e_map[(nid, i)] = 0.0
            continue

        rows, rhs = [], []
        for u, children in sorted(kids.items()):
            a = np.zeros(n)
            for c in children:
                a[index[c]] += 1.0
            a[index[u]] -= 1.0
            rows.append(a)
            rhs.append(vaf[u] - sum(vaf[c] for c in sorted(children)))
        for nid in node_ids:
            hi = np.zeros(n)
            hi[index[nid]] = 1.0
            rows.append(hi)
            rhs.append(min(eps, vaf[nid]))
            lo = np.zeros(n)
            lo[index[nid]] = -1.0
            rows.append(lo)
            rhs.append(eps)

        a_mat = np.array(rows)
        b_vec = np.array(rhs)
        sol = _solve_ldp(-a_mat, -b_vec)
        if sol is None or float(np.max(a_mat @ sol - b_vec)) > KKT_TOL:
            # feasibility is already proven; fall back to the propagation witness
            sol = np.array([witness[nid] for nid in node_ids])
        for nid in node_ids:
            e_map[(nid, i)] = float(sol[index[nid]])
        objective += float(np.sum(sol * sol))

    return QpSolution(e=e_map, objective=objective, feasible=True)


def _topo_children_first(tree: CandidateTree, root: int) -> list[int]:
    kids = _children_map(tree)
    out: list[int] = []

    def visit(u):
        for c in sorted(kids.get(u, ())):
            visit(c)
        out.append(u)

    visit(root)
    return out


def rank_trees(
    net: ConstraintNetwork, trees: list[CandidateTree], eps: float, k: int = 5
) -> list[RankedTree]:
    """Order candidate trees: local score first, then the QP objective on the
    best k; if a whole batch is QP-infeasible, the next k are tried until some
    tree solves or the list is exhausted. Infeasible trees are dropped."""
    by_local = sorted(trees, key=lambda t: (local_score(net, t), t.edges))
    solved: list[tuple[CandidateTree, float, QpSolution]] = []
    cursor = 0
    while cursor < len(by_local) and not solved:
        batch = by_local[cursor : cursor + k]
        for t in batch:
            qp = solve_qp(net, t, eps)
            if qp.feasible:
                solved.append((t, local_score(net, t), qp))
        cursor += k

    ranked = [
        RankedTree(tree=t, local_score=ls, qp=qp, rank=0)
        for t, ls, qp in sorted(solved, key=lambda x: (x[2].objective, x[1], x[0].edges))
    ]
    rest = by_local[cursor:]
    ranked.extend(
        RankedTree(tree=t, local_score=local_score(net, t), qp=None, rank=0) for t in rest
    )
    for pos, rt in enumerate(ranked):
        rt.rank = pos + 1
    return ranked


def decompose_sample(
    net: ConstraintNetwork, ranked: RankedTree, sample: int
) -> SampleDecomposition:
    """Trace the sample's subclone lineages: one full root-to-node path per
    present cluster, with prevalence = the terminal's centroid less the sum of
    its present children (the cells whose mutation set ends at that node).
    Paths whose prevalence vanishes (fully explained by deeper lineages) are
    omitted."""
    kids = _children_map(ranked.tree)
    parent = {c: p for p, c in ranked.tree.edges}

    lineages = []
    for nid, node in net.nodes.items():
        if node.is_root or node.profile.bits[sample] != "1":
            continue
        present_kids = [
            c for c in kids.get(nid, ()) if net.nodes[c].profile.bits[sample] == "1"
        ]
        prevalence = node.full_centroid[sample] - sum(
            net.nodes[c].full_centroid[sample] for c in present_kids
        )
        if prevalence <= 1e-9:
            continue
        path = [nid]
        while path[-1] != net.root_id:
            path.append(parent[path[-1]])
        path.reverse()
        lineages.append((tuple(path), prevalence))
    lineages.sort()
    return SampleDecomposition(sample=sample, lineages=lineages)
