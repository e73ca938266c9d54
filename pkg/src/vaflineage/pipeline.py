"""End-to-end pipeline driver: calling, clustering, network construction,
tree search with adjustment retries, ranking, and bundle assembly."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

from . import __version__
from .calling import CallingConfig, call_groups
from .clustering import ClusteringConfig, cluster_groups
from .core import Cluster, SampleSet, SnvRecord
from .network import ConstraintNetwork, NetworkConfig, adjust_network, build_network
from .ranking import RankedTree, decompose_sample, rank_trees
from .search import SearchConfig, enumerate_trees

log = logging.getLogger(__name__)


@dataclass
class RunConfig:
    calling: CallingConfig = field(default_factory=CallingConfig)
    clustering: ClusteringConfig = field(default_factory=ClusteringConfig)
    network: NetworkConfig = field(default_factory=NetworkConfig)
    search: SearchConfig = field(default_factory=SearchConfig)
    qp_k: int = 5
    num_save: int = 5
    input_mode: str = "vaf"  # vaf | cp | clusters
    timestamp: str | None = None  # unset by default so runs stay reproducible


@dataclass
class ResultBundle:
    """Self-contained result payload; the viewer renders from this alone."""

    data: dict

    @property
    def trees(self) -> list[dict]:
        return self.data["trees"]

    @property
    def n_valid_trees(self) -> int:
        return self.data["search"]["n_valid_trees"]


def run_pipeline(
    samples: SampleSet,
    records: list[SnvRecord],
    cfg: RunConfig,
    clusters: list[Cluster] | None = None,
) -> ResultBundle:
    """Run the full inference and assemble the result bundle. With explicit
    `clusters` (pre-clustered input), calling and clustering are skipped."""
    dropped: list[tuple[SnvRecord, str]] = []
    if clusters is None:
        groups, dropped_calls = call_groups(records, samples, cfg.calling)
        dropped.extend(dropped_calls)
        clusters = cluster_groups(groups, cfg.clustering)
    called_profiles = {m.idx: c.profile.bits for c in clusters for m in c.members}

    if not clusters:
        return _bundle(
            samples, records, cfg, None, [], called_profiles,
            dropped=dropped, search_result=None, diagnostic="no usable SSNV clusters",
        )

    net = build_network(clusters, cfg.network)
    ranked: list[RankedTree] = []
    search_result = None
    diagnostic = None
    while True:
        search_result = enumerate_trees(net, cfg.search)
        ranked = rank_trees(net, search_result.trees, cfg.search.epsilon_tree, cfg.qp_k)
        if ranked:
            break
        adjusted = adjust_network(net, cfg.network)
        if adjusted is None:
            diagnostic = "no valid lineage tree; network adjustment exhausted"
            log.warning(diagnostic)
            break
        log.info("no valid tree; removed node %d and retrying", adjusted.removed[-1].id)
        net = adjusted

    dropped.extend((m, "below_min_support") for c in net.dropped_support for m in c.members)
    dropped.extend((m, "removed_by_adjustment") for c in net.removed for m in c.members)
    return _bundle(samples, records, cfg, net, ranked, called_profiles, dropped=dropped,
                   search_result=search_result, diagnostic=diagnostic)


def _bundle(
    samples: SampleSet,
    records: list[SnvRecord],
    cfg: RunConfig,
    net: ConstraintNetwork | None,
    ranked: list[RankedTree],
    called_profiles: dict[int, str],
    *,
    dropped: list[tuple[SnvRecord, str]],
    search_result,
    diagnostic: str | None,
) -> ResultBundle:
    nodes = []
    edges = []
    if net is not None:
        for nid in net.sorted_node_ids():
            n = net.nodes[nid]
            nodes.append(
                {
                    "id": n.id,
                    "profile": n.profile.bits,
                    "level": n.level,
                    "centroid": list(n.full_centroid),
                    "stderr": list(n.full_stderr),
                    "size": n.size,
                    "members": [] if n.is_root else [m.idx for m in n.cluster.members],
                    "robust": True if n.is_root else n.cluster.robust,
                }
            )
        edges = [list(e) for e in sorted(net.edges)]

    trees = []
    for rt in ranked[: cfg.num_save]:
        decompositions = []
        for j in range(samples.size):
            if j == samples.normal_index:
                continue
            d = decompose_sample(net, rt, j)
            decompositions.append(
                {
                    "sample": j,
                    "lineages": [
                        {"path": list(path), "prevalence": prev} for path, prev in d.lineages
                    ],
                }
            )
        trees.append(
            {
                "rank": rt.rank,
                "edges": [list(e) for e in rt.tree.edges],
                "local_score": rt.local_score,
                "qp_objective": rt.qp.objective if rt.qp else None,
                "qp_deviations": [
                    [nid, si, dev] for (nid, si), dev in sorted(rt.qp.e.items())
                ]
                if rt.qp
                else [],
                "decompositions": decompositions,
            }
        )

    data = {
        "metadata": {
            "version": __version__,
            "config": asdict(cfg),
            "timestamp": cfg.timestamp,
        },
        "samples": {"names": list(samples.names), "normal_index": samples.normal_index},
        "snvs": [
            {
                "idx": r.idx,
                "chrom": r.chrom,
                "pos": r.pos,
                "desc": r.desc,
                "vaf": list(r.vaf),
                "profile": called_profiles.get(r.idx),
            }
            for r in records
        ],
        "network": {
            "root_id": net.root_id if net is not None else 0,
            "nodes": nodes,
            "edges": edges,
        },
        "trees": trees,
        "dropped": [
            {"idx": r.idx, "reason": reason}
            for r, reason in sorted(dropped, key=lambda p: p[0].idx)
        ],
        "search": {
            "n_valid_trees": len(ranked),
            "enumerated": len(search_result.trees) if search_result else 0,
            "truncated": search_result.truncated if search_result else False,
            "grow_calls": search_result.grow_calls if search_result else 0,
            "adjustment_removed": [c.id for c in net.removed] if net is not None else [],
            "diagnostic": diagnostic,
        },
    }
    return ResultBundle(data=data)


def snv_profile_map(bundle: ResultBundle) -> dict[int, str | None]:
    """Input row index -> the binary profile the calling stage assigned, before
    any node pruning (None when the SSNV was dropped during calling)."""
    return {r["idx"]: r["profile"] for r in bundle.data["snvs"]}


def snv_node_map(bundle: ResultBundle) -> dict[int, int | None]:
    out: dict[int, int | None] = {r["idx"]: None for r in bundle.data["snvs"]}
    for node in bundle.data["network"]["nodes"]:
        for idx in node["members"]:
            out[idx] = node["id"]
    return out
