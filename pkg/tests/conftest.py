"""Shared fixtures: synthetic datasets with planted lineage trees, plus
independent brute-force oracles for the search and QP stages."""

from __future__ import annotations

import itertools

import numpy as np
import pytest

from vaflineage.core import BinaryProfile, Cluster, SampleSet, SnvRecord
from vaflineage.network import ConstraintNetwork, NetworkNode


def make_records(samples, group_specs, seed=0, jitter=0.005):
    """Build SnvRecords around per-group VAF templates.

    group_specs: list of (n_members, {sample_index: vaf}) — absent samples 0.
    Jitter is clipped so present values stay present and absent stay 0.
    """
    rng = np.random.default_rng(seed)
    records = []
    for n_members, vafs in group_specs:
        for _ in range(n_members):
            row = []
            for j in range(samples.size):
                base = vafs.get(j, 0.0)
                if base == 0.0:
                    row.append(0.0)
                else:
                    row.append(float(np.clip(base + rng.normal(0, jitter), 0.02, 0.98)))
            records.append(
                SnvRecord(
                    chrom="chr1",
                    pos=1000 + len(records),
                    desc=f"m{len(records)}",
                    vaf=tuple(row),
                    idx=len(records),
                )
            )
    return records


def make_node(nid, bits, centroid, stderr=None, size=2):
    profile = BinaryProfile(bits)
    support = profile.support
    members = tuple(
        SnvRecord("chr1", 100 + nid * 10 + k, f"n{nid}m{k}",
                  tuple(centroid[j] for j in range(len(bits))), idx=-1)
        for k in range(size)
    )
    cluster = Cluster(
        profile=profile,
        members=members,
        centroid=tuple(centroid[j] for j in support),
        stderr=tuple((stderr or [0.0] * len(bits))[j] for j in support),
        id=nid,
    )
    return NetworkNode(
        id=nid,
        cluster=cluster,
        level=bits.count("1"),
        profile=profile,
        full_centroid=tuple(centroid),
        full_stderr=tuple(stderr or [0.0] * len(bits)),
    )


def make_network(node_specs, edges, root_vaf=0.5):
    """Assemble a ConstraintNetwork directly from (id, bits, centroid) specs
    and explicit edges, bypassing build_network."""
    s = len(node_specs[0][1])
    root = NetworkNode(
        id=0,
        cluster=None,
        level=s,
        profile=BinaryProfile("1" * s),
        full_centroid=tuple([root_vaf] * s),
        full_stderr=tuple([0.0] * s),
    )
    nodes = {0: root}
    clusters = []
    for nid, bits, centroid in node_specs:
        node = make_node(nid, bits, centroid)
        nodes[nid] = node
        clusters.append(node.cluster)
    return ConstraintNetwork(
        nodes=nodes,
        edges=frozenset(edges),
        root_id=0,
        clusters=tuple(clusters),
        dropped_support=(),
    )


def brute_force_trees(net, eps):
    """All spanning arborescences of the network satisfying the children-sum
    constraint, by exhaustive parent-choice enumeration."""
    non_root = sorted(n for n in net.nodes if n != net.root_id)
    in_edges = {v: sorted(p for p, c in net.edges if c == v) for v in non_root}
    if any(not in_edges[v] for v in non_root):
        return set()
    centroid = {nid: n.full_centroid for nid, n in net.nodes.items()}
    s = len(centroid[net.root_id])
    found = set()
    for combo in itertools.product(*(in_edges[v] for v in non_root)):
        edges = tuple(sorted(zip(combo, non_root)))
        # reachability from the root must cover every node
        kids = {}
        for p, c in edges:
            kids.setdefault(p, []).append(c)
        seen = {net.root_id}
        stack = [net.root_id]
        while stack:
            for c in kids.get(stack.pop(), ()):
                if c not in seen:
                    seen.add(c)
                    stack.append(c)
        if len(seen) != len(net.nodes):
            continue
        ok = True
        for u, children in kids.items():
            for i in range(s):
                total = 0.0
                for c in sorted(children):
                    total += centroid[c][i]
                if total > centroid[u][i] + eps:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            found.add(edges)
    return found


def random_constraint_dag(rng, max_nodes=8, max_edges=16, max_samples=3):
    """Random rooted DAG with random centroids for oracle comparisons."""
    n = int(rng.integers(2, max_nodes + 1))
    s = int(rng.integers(1, max_samples + 1))
    specs = []
    for nid in range(1, n):
        bits = "".join(rng.choice(["0", "1"], size=s, p=[0.3, 0.7]))
        if "1" not in bits:
            bits = "1" + bits[1:]
        centroid = [float(np.round(rng.uniform(0.02, 0.5), 3)) if b == "1" else 0.0
                    for b in bits]
        specs.append((nid, bits, centroid))
    edges = set()
    order = list(range(1, n))
    for v in order:
        parents = [0] + [u for u in order if u < v]
        k = int(rng.integers(1, min(3, len(parents)) + 1))
        for p in rng.choice(parents, size=k, replace=False):
            edges.add((int(p), v))
    extra = max_edges - len(edges)
    for _ in range(max(0, extra // 2)):
        v = int(rng.choice(order))
        cands = [u for u in range(v) if (u, v) not in edges and (u == 0 or u in order)]
        if cands:
            edges.add((int(rng.choice(cands)), v))
    if len(edges) > max_edges:
        # keep every node reachable: never drop a sole in-edge
        droppable = [e for e in sorted(edges)
                     if sum(1 for p, c in edges if c == e[1]) > 1]
        for e in droppable[: len(edges) - max_edges]:
            edges.discard(e)
    return make_network(specs, edges)


def qp_matrices(net, tree_edges, sample, eps):
    """Constraint system A e <= b for one sample of the deviation QP, with the
    box folded in; variable order is sorted node id."""
    node_ids = sorted(net.nodes)
    index = {nid: j for j, nid in enumerate(node_ids)}
    vaf = {nid: net.nodes[nid].full_centroid[sample] for nid in node_ids}
    kids = {}
    for p, c in tree_edges:
        kids.setdefault(p, []).append(c)
    rows, rhs = [], []
    for u in sorted(kids):
        a = np.zeros(len(node_ids))
        for c in kids[u]:
            a[index[c]] += 1.0
        a[index[u]] -= 1.0
        rows.append(a)
        rhs.append(vaf[u] - sum(vaf[c] for c in sorted(kids[u])))
    for nid in node_ids:
        hi = np.zeros(len(node_ids))
        hi[index[nid]] = 1.0
        rows.append(hi)
        rhs.append(min(eps, vaf[nid]))
        lo = np.zeros(len(node_ids))
        lo[index[nid]] = -1.0
        rows.append(lo)
        rhs.append(eps)
    return np.array(rows), np.array(rhs)


def qp_feasible_lp(net, tree_edges, eps):
    """Phase-1 LP feasibility check (HiGHS), independent of the solver path."""
    from scipy.optimize import linprog

    s = len(net.nodes[net.root_id].full_centroid)
    for i in range(s):
        a, b = qp_matrices(net, tree_edges, i, eps)
        m, n = a.shape
        a_ub = np.hstack([a, -np.ones((m, 1))])
        c = np.zeros(n + 1)
        c[-1] = 1.0
        bounds = [(None, None)] * n + [(0, None)]
        res = linprog(c, A_ub=a_ub, b_ub=b, bounds=bounds, method="highs")
        if not res.success or res.fun > 1e-9:
            return False
    return True


def qp_grid_objective(net, tree_edges, eps, points=9, target_step=5e-6, max_levels=14):
    """Refining grid search for the QP objective; returns None when no grid
    point is feasible at the coarsest level."""
    s = len(net.nodes[net.root_id].full_centroid)
    node_ids = sorted(net.nodes)
    total = 0.0
    for i in range(s):
        a, b = qp_matrices(net, tree_edges, i, eps)
        vaf = [net.nodes[nid].full_centroid[i] for nid in node_ids]
        box_lo = np.array([-eps] * len(node_ids))
        box_hi = np.array([min(eps, v) for v in vaf])
        lo, hi = box_lo.copy(), box_hi.copy()
        best_obj = None
        for _ in range(max_levels):
            axes = [np.linspace(lo[j], hi[j], points) for j in range(len(node_ids))]
            grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(node_ids))
            feas = np.all(grid @ a.T <= b + 1e-9, axis=1)
            if not feas.any():
                return None
            objs = np.sum(grid[feas] ** 2, axis=1)
            k = int(np.argmin(objs))
            best = grid[feas][k]
            best_obj = float(objs[k])
            step = (hi - lo) / (points - 1)
            lo = np.maximum(best - 1.5 * step, box_lo)
            hi = np.minimum(best + 1.5 * step, box_hi)
            if step.max() < target_step:
                break
        total += best_obj
    return total


@pytest.fixture
def fig1_toy():
    """Five-sample toy (control + S1..S4): one group with two VAF clusters, a
    nested group rejected under the lower cluster, and a disjoint branch."""
    samples = SampleSet(names=("Lymph", "S1", "S2", "S3", "S4"))
    specs = [
        (4, {1: 0.19, 2: 0.5, 3: 0.4}),  # orange 01110 high
        (3, {1: 0.19, 2: 0.3, 3: 0.15}),  # green 01110 low
        (3, {2: 0.18, 3: 0.33}),  # teal 00110
        (3, {1: 0.4, 4: 0.45}),  # blue 01001
    ]
    records = make_records(samples, specs, seed=5, jitter=0.002)
    return samples, records


@pytest.fixture
def ev007_style():
    """Eight tumor samples, 55 SSNVs in 10 profile groups whose VAFs admit a
    single children-sum-consistent spanning tree."""
    samples = SampleSet(names=("Normal",) + tuple(f"T{i}" for i in range(1, 9)))
    specs = [
        (12, {j: 0.48 for j in range(1, 9)}),                      # A trunk w8
        (8, {j: 0.40 for j in range(1, 6)}),                       # B w5
        (6, {j: 0.35 for j in range(6, 9)}),                       # C w3
        (5, {j: 0.35 for j in range(1, 4)}),                       # D w3
        (5, {4: 0.32, 5: 0.32}),                                   # E w2
        (5, {6: 0.25, 7: 0.25}),                                   # F w2
        (4, {1: 0.30}),                                            # G w1
        (4, {8: 0.25}),                                            # H w1
        (3, {2: 0.28, 3: 0.28}),                                   # I w2
        (3, {4: 0.24}),                                            # J w1
    ]
    records = make_records(samples, specs, seed=17, jitter=0.004)
    planted = {
        "011111111": None,  # trunk under root
        "011111000": "011111111",
        "000000111": "011111111",
        "011100000": "011111000",
        "000011000": "011111000",
        "000000110": "000000111",
        "010000000": "011100000",
        "000000001": "000000111",
        "001100000": "011100000",
        "000010000": "000011000",
    }
    return samples, records, planted


@pytest.fixture
def rmh004_conflict():
    """Trunk plus three pairwise-conflicting branches at one sample; only the
    most populated branch can survive. Two branch groups are non-robust (one
    via a greyzone member), so network adjustment can remove them."""
    samples = SampleSet(names=("Normal", "R3", "VT", "R10", "R4", "R2", "R8"))
    rng = np.random.default_rng(23)

    def rows(n, vafs):
        out = []
        for _ in range(n):
            row = [0.0] * samples.size
            for j, v in vafs.items():
                row[j] = float(np.clip(v + rng.normal(0, 0.004), 0.02, 0.98))
            out.append(row)
        return out

    data = []
    # trunk P, 10 SSNVs, R10 = 0.34
    data += rows(10, {1: 0.45, 2: 0.45, 3: 0.34, 4: 0.45, 5: 0.45, 6: 0.45})
    # branch X (R3,VT,R10,R4,R2), 6 SSNVs, R10 = 0.32
    data += rows(6, {1: 0.42, 2: 0.42, 3: 0.32, 4: 0.42, 5: 0.40})
    # branch Y (R3,VT,R10,R4,R8), 2 clean SSNVs + 1 greyzone at R8, R10 = 0.27
    data += rows(2, {1: 0.38, 2: 0.38, 3: 0.27, 4: 0.38, 6: 0.36})
    grey = [0.0, 0.38, 0.38, 0.27, 0.38, 0.0, 0.007]
    data.append(grey)
    # branch Z (R10,R4,R2,R8), 2 SSNVs, R10 = 0.21
    data += rows(2, {3: 0.21, 4: 0.30, 5: 0.28, 6: 0.30})

    records = [
        SnvRecord("chr2", 5000 + i, f"r{i}", tuple(row), idx=i) for i, row in enumerate(data)
    ]
    return samples, records
