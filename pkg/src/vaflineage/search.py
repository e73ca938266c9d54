"""Enumeration of all constraint-network spanning trees that keep every node's
children VAF sum within the error margin of the parent.

This is a backtracking all-spanning-arborescence search in the style of Gabow
and Myers, extended to prune a branch as soon as the children-sum constraint
fails at the endpoint of a newly added edge.

The classic bridge shortcut (stop trying alternatives to an edge (u, v) when
every remaining edge into v starts at a descendant of v in the last output
tree) is only valid when the last output tree closed out a *complete*
enumeration of the subfamily containing the current partial tree. Constraint
pruning breaks that guarantee: the last surviving tree may make an alternative
parent look like a descendant even though a valid rewiring exists. The search
therefore tracks whether any pruning happened beneath a recursive call and
applies the descendant test only when that subtree was enumerated in full;
otherwise it falls back to the always-sound test of whether any edge into v
remains at all.
"""

from __future__ import annotations

from dataclasses import dataclass

from .network import ConstraintNetwork

__all__ = ["SearchConfig", "CandidateTree", "SearchResult", "local_sum_ok", "enumerate_trees"]


@dataclass(frozen=True)
class SearchConfig:
    epsilon_tree: float = 0.1
    max_trees: int = 100000
    max_grow_calls: int = 100_000_000

    def __post_init__(self):
        if self.epsilon_tree < 0:
            raise ValueError("epsilon_tree must be >= 0")
        if self.max_trees < 1 or self.max_grow_calls < 1:
            raise ValueError("search bounds must be >= 1")


@dataclass(frozen=True)
class CandidateTree:
    """A spanning arborescence of the network, as a sorted (parent, child) tuple."""

    edges: tuple[tuple[int, int], ...]


@dataclass
class SearchResult:
    trees: list[CandidateTree]
    truncated: bool
    grow_calls: int


def _children_sum_ok(
    centroid: dict[int, tuple[float, ...]], u: int, children: list[int], eps: float
) -> bool:
    cu = centroid[u]
    for i in range(len(cu)):
        total = 0.0
        for c in sorted(children):
            total += centroid[c][i]
        if total > cu[i] + eps:
            return False
    return True


def local_sum_ok(
    net: ConstraintNetwork, edges, u: int, cfg: SearchConfig
) -> bool:
    """Check the children-sum constraint at node `u` for a (partial) tree."""
    centroid = {nid: n.full_centroid for nid, n in net.nodes.items()}
    children = [c for p, c in edges if p == u]
    return _children_sum_ok(centroid, u, children, cfg.epsilon_tree)


def tree_satisfies(net: ConstraintNetwork, edges, cfg: SearchConfig) -> bool:
    """Full sweep of the children-sum constraint over every node of a tree."""
    return all(local_sum_ok(net, edges, u, cfg) for u in net.nodes)


def enumerate_trees(net: ConstraintNetwork, cfg: SearchConfig) -> SearchResult:
    """Emit every spanning tree of `net` that satisfies the children-sum
    constraint at all nodes; truncates (flagged) at the configured bounds."""
    nodes = net.nodes
    root = net.root_id
    centroid = {nid: n.full_centroid for nid, n in nodes.items()}
    level = {nid: n.level for nid, n in nodes.items()}
    n_nodes = len(nodes)
    eps = cfg.epsilon_tree

    in_n: dict[int, set[int]] = {nid: set() for nid in nodes}
    out_n: dict[int, set[int]] = {nid: set() for nid in nodes}
    for p, c in net.edges:
        in_n[c].add(p)
        out_n[p].add(c)

    par_t: dict[int, int] = {}
    children_t: dict[int, list[int]] = {nid: [] for nid in nodes}
    f: list[tuple[int, int]] = []
    trees: list[CandidateTree] = []
    state = {"last": None, "grow_calls": 0, "stop": False}

    def push_batch(batch):
        batch.sort(key=lambda e: (-level[e[1]], e[1], e[0]))
        f.extend(batch)

    def descendants_in_last(v: int) -> set[int]:
        kids: dict[int, list[int]] = {}
        for child, parent in state["last"].items():
            kids.setdefault(parent, []).append(child)
        out = {v}
        stack = [v]
        while stack:
            u = stack.pop()
            for w in kids.get(u, ()):
                if w not in out:
                    out.add(w)
                    stack.append(w)
        return out

    def grow() -> bool:
        """Returns True when enumeration below this call was incomplete (a
        constraint rejection or a search bound fired somewhere beneath)."""
        state["grow_calls"] += 1
        if state["grow_calls"] > cfg.max_grow_calls:
            state["stop"] = True
            return True
        if len(par_t) == n_nodes - 1:
            state["last"] = dict(par_t)
            trees.append(CandidateTree(tuple(sorted((p, c) for c, p in par_t.items()))))
            if len(trees) >= cfg.max_trees:
                state["stop"] = True
            return False

        removed: list[tuple[int, int]] = []
        pruned = False
        b = False
        while not b and f and not state["stop"]:
            u, v = f.pop()
            par_t[v] = u
            children_t[u].append(v)
            emitted = False
            subtree_complete = False
            if _children_sum_ok(centroid, u, children_t[u], eps):
                added = [(v, w) for w in out_n[v] if w not in par_t and w != root]
                pulled = [(w, vv) for w, vv in f if vv == v]
                for e in pulled:
                    f.remove(e)
                push_batch(added)
                n_before = len(trees)
                subtree_complete = not grow()
                emitted = len(trees) > n_before
                pruned = pruned or not subtree_complete
                for e in added:
                    f.remove(e)
                push_batch(pulled)
            else:
                pruned = True
            children_t[u].pop()
            del par_t[v]
            in_n[v].discard(u)
            out_n[u].discard(v)
            removed.append((u, v))

            if not in_n[v]:
                b = True
            elif emitted and subtree_complete:
                # the last output tree extends t + (u -> v) and its subfamily
                # was fully enumerated, so the Gabow-Myers bridge test applies
                desc = descendants_in_last(v)
                b = all(w in desc for w in in_n[v])
            else:
                b = False

        for u, v in reversed(removed):
            in_n[v].add(u)
            out_n[u].add(v)
            f.append((u, v))
        return pruned or state["stop"]

    push_batch([(root, v) for v in out_n[root]])
    grow()
    return SearchResult(trees=trees, truncated=state["stop"], grow_calls=state["grow_calls"])
