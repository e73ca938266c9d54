"""Evolutionary constraint network: a DAG over VAF clusters whose edges are the
admissible evolutionary precedence relationships."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .core import BinaryProfile, Cluster, covers, hamming_weight

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class NetworkConfig:
    epsilon_edge: float = 0.1
    root_vaf: float = 0.5
    constrain_private: bool = True
    min_node_support: int = 2

    def __post_init__(self):
        if self.epsilon_edge < 0:
            raise ValueError("epsilon_edge must be >= 0")
        if not 0.0 < self.root_vaf <= 1.0:
            raise ValueError("root_vaf must be in (0,1]")


@dataclass(frozen=True)
class NetworkNode:
    id: int
    cluster: Cluster | None  # None for the germline root
    level: int
    profile: BinaryProfile
    full_centroid: tuple[float, ...]
    full_stderr: tuple[float, ...]

    @property
    def is_root(self) -> bool:
        return self.cluster is None

    @property
    def size(self) -> int:
        return 0 if self.cluster is None else self.cluster.size


@dataclass(frozen=True)
class ConstraintNetwork:
    nodes: dict[int, NetworkNode]
    edges: frozenset[tuple[int, int]]
    root_id: int
    clusters: tuple[Cluster, ...]  # the clusters that became nodes
    dropped_support: tuple[Cluster, ...]  # dropped for insufficient SSNV support
    removed: tuple[Cluster, ...] = ()  # removed by network adjustment

    def children_of(self, u: int) -> list[int]:
        return sorted(c for p, c in self.edges if p == u)

    def parents_of(self, v: int) -> list[int]:
        return sorted(p for p, c in self.edges if c == v)

    def sorted_node_ids(self) -> list[int]:
        return sorted(self.nodes, key=lambda i: (-self.nodes[i].level, self.nodes[i].profile.bits, i))


def edge_margin(u: NetworkNode, v: NetworkNode, i: int, cfg: NetworkConfig) -> float:
    """Per-sample VAF noise margin: the clusters' summed standard errors, floored
    at the configured margin."""
    return max(u.full_stderr[i] + v.full_stderr[i], cfg.epsilon_edge)


def admits_edge(u: NetworkNode, v: NetworkNode, cfg: NetworkConfig) -> bool:
    """True iff u could precede v: u's centroid dominates v's within the noise
    margin in every sample, and v is absent wherever u is absent."""
    for i in range(len(u.full_centroid)):
        if u.full_centroid[i] < v.full_centroid[i] - edge_margin(u, v, i, cfg):
            return False
        if u.full_centroid[i] == 0.0 and v.full_centroid[i] != 0.0:
            return False
    return True


def _vaf_err(u: NetworkNode, v: NetworkNode) -> float:
    # summed squared excess of the would-be child over the would-be parent
    return sum(
        (cv - cu) ** 2
        for cu, cv in zip(u.full_centroid, v.full_centroid)
        if cv > cu
    )


def orient_same_level(u: NetworkNode, v: NetworkNode) -> tuple[NetworkNode, NetworkNode]:
    """Orient an edge between same-profile clusters toward the direction with
    the smaller child-over-parent error; ties (up to float noise) parent the
    lower id."""
    err_uv = _vaf_err(u, v)
    err_vu = _vaf_err(v, u)
    if abs(err_uv - err_vu) < 1e-12:
        return (u, v) if u.id < v.id else (v, u)
    return (u, v) if err_uv < err_vu else (v, u)


def _node_from_cluster(c: Cluster) -> NetworkNode:
    return NetworkNode(
        id=c.id,
        cluster=c,
        level=hamming_weight(c.profile),
        profile=c.profile,
        full_centroid=c.full_centroid(),
        full_stderr=c.full_stderr(),
    )


def _constrain_private_nodes(edges: set[tuple[int, int]], cluster_nodes) -> None:
    """Keep only a private (Hamming-weight-1) node's closest valid predecessors:
    admitting parents that have no other admitting parent of the same node among
    their descendants. This trims the search space without disconnecting the
    deep placements the children-sum constraint usually requires."""
    adj: dict[int, list[int]] = {}
    for p, c in sorted(edges):  # frozen pre-pruning snapshot
        adj.setdefault(p, []).append(c)
    reach: dict[int, set[int]] = {}

    def descendants(u: int) -> set[int]:
        if u not in reach:
            out: set[int] = set()
            stack = [u]
            while stack:
                for c in adj.get(stack.pop(), ()):
                    if c not in out:
                        out.add(c)
                        stack.append(c)
            reach[u] = out
        return reach[u]

    for n in cluster_nodes:
        if n.level != 1:
            continue
        parents = [p for p, c in edges if c == n.id]
        if len(parents) < 2:
            continue
        keep = {
            p for p in parents if not any(q != p and q in descendants(p) for q in parents)
        }
        for p in parents:
            if p not in keep:
                edges.discard((p, n.id))


def _break_same_profile_cycles(
    edges: set[tuple[int, int]], nodes: dict[int, NetworkNode]
) -> None:
    """Pairwise same-profile orientation can, in principle, form a cycle among
    three or more clusters of one group; drop the least-supported edge (largest
    child-over-parent error) of any cycle until none remains."""
    by_profile: dict[str, list[int]] = {}
    for nid, n in nodes.items():
        by_profile.setdefault(n.profile.bits, []).append(nid)
    for ids in by_profile.values():
        if len(ids) < 3:
            continue
        idset = set(ids)
        while True:
            cycle = _find_cycle({(p, c) for p, c in edges if p in idset and c in idset})
            if cycle is None:
                break
            worst = max(
                cycle, key=lambda e: (_vaf_err(nodes[e[0]], nodes[e[1]]), e)
            )
            edges.discard(worst)
            log.warning("broke same-profile orientation cycle by dropping edge %s", worst)


def _find_cycle(edges: set[tuple[int, int]]) -> list[tuple[int, int]] | None:
    adj: dict[int, list[int]] = {}
    for p, c in sorted(edges):
        adj.setdefault(p, []).append(c)
    state: dict[int, int] = {}
    stack_path: list[int] = []

    def dfs(u):
        state[u] = 1
        stack_path.append(u)
        for w in adj.get(u, []):
            if state.get(w, 0) == 1:
                i = stack_path.index(w)
                loop = stack_path[i:] + [w]
                return [(loop[k], loop[k + 1]) for k in range(len(loop) - 1)]
            if state.get(w, 0) == 0:
                found = dfs(w)
                if found:
                    return found
        stack_path.pop()
        state[u] = 2
        return None

    for u in sorted(adj):
        if state.get(u, 0) == 0:
            found = dfs(u)
            if found:
                return found
    return None


def build_network(clusters: list[Cluster], cfg: NetworkConfig) -> ConstraintNetwork:
    """Assemble the constraint DAG: germline root, level-organized cluster
    nodes, admissible cross-level edges, oriented same-profile edges, optional
    private-node constraining, and root edges for parentless nodes."""
    if not clusters:
        raise ValueError("cannot build a network from zero clusters")
    s = len(clusters[0].profile)
    kept = [c for c in clusters if c.size >= cfg.min_node_support]
    dropped = tuple(c for c in clusters if c.size < cfg.min_node_support)
    if dropped:
        log.info("dropping %d cluster(s) below min node support", len(dropped))

    root = NetworkNode(
        id=0,
        cluster=None,
        level=s,
        profile=BinaryProfile("1" * s),
        full_centroid=tuple([cfg.root_vaf] * s),
        full_stderr=tuple([0.0] * s),
    )
    nodes = {0: root}
    for c in kept:
        nodes[c.id] = _node_from_cluster(c)

    cluster_nodes = [nodes[c.id] for c in kept]
    order = sorted(cluster_nodes, key=lambda n: (-n.level, n.profile.bits, n.id))
    edges: set[tuple[int, int]] = set()
    for i, u in enumerate(order):
        for v in order[i + 1 :]:
            if u.level > v.level:
                if covers(u.profile, v.profile) and admits_edge(u, v, cfg):
                    edges.add((u.id, v.id))
            elif u.profile == v.profile:
                parent, child = orient_same_level(u, v)
                if admits_edge(parent, child, cfg):
                    edges.add((parent.id, child.id))
    _break_same_profile_cycles(edges, nodes)

    if cfg.constrain_private:
        _constrain_private_nodes(edges, cluster_nodes)

    with_parent = {c for _, c in edges}
    for n in cluster_nodes:
        if n.id not in with_parent:
            edges.add((0, n.id))

    net = ConstraintNetwork(
        nodes=nodes,
        edges=frozenset(edges),
        root_id=0,
        clusters=tuple(kept),
        dropped_support=dropped,
    )
    assert _is_acyclic(net), "constraint network must be acyclic"
    return net


def _is_acyclic(net: ConstraintNetwork) -> bool:
    indeg = {nid: 0 for nid in net.nodes}
    for _, c in net.edges:
        indeg[c] += 1
    queue = [nid for nid, d in indeg.items() if d == 0]
    seen = 0
    while queue:
        u = queue.pop()
        seen += 1
        for p, c in net.edges:
            if p == u:
                indeg[c] -= 1
                if indeg[c] == 0:
                    queue.append(c)
    return seen == len(net.nodes)


def adjust_network(net: ConstraintNetwork, cfg: NetworkConfig) -> ConstraintNetwork | None:
    """Remove the smallest node from a non-robust group and rebuild; returns
    None when no removable node remains (adjustment exhausted)."""
    candidates = [c for c in net.clusters if not c.robust]
    if not candidates:
        return None
    victim = min(candidates, key=lambda c: (c.size, hamming_weight(c.profile), c.id))
    remaining = [c for c in net.clusters if c.id != victim.id]
    if not remaining:
        return None
    rebuilt = build_network(remaining, cfg)
    return ConstraintNetwork(
        nodes=rebuilt.nodes,
        edges=rebuilt.edges,
        root_id=rebuilt.root_id,
        clusters=rebuilt.clusters,
        dropped_support=net.dropped_support + rebuilt.dropped_support,
        removed=net.removed + (victim,),
    )
