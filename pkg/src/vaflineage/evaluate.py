"""Scoring reconstructed trees against simulator ground truth: SSNV presence
sensitivity and ancestor-descendant / sibling pair preservation metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .simulate import GroundTruth


@dataclass
class MetricReport:
    pct_snvs_assigned_correctly: float = 0.0
    pct_snvs_in_tree: float = 0.0
    pct_ad_pairs: float = 0.0
    pct_ad_ordered: float = 0.0
    pct_ad_correct: float = 0.0
    pct_ad_to_sib: float = 0.0
    pct_ad_to_sib_nopriv: float = 0.0
    pct_sib_pairs: float = 0.0
    pct_sib_correct: float = 0.0
    pct_sib_to_ad: float = 0.0
    pct_sib_to_ad_nopriv: float = 0.0
    tree_reconstructed: bool = False


def _ancestor_chains(truth: GroundTruth) -> dict[int, set[int]]:
    chains: dict[int, set[int]] = {}
    for pop in set(truth.ssnv_origin.values()):
        chain = set()
        cur = pop
        while cur >= 0:
            chain.add(cur)
            cur = truth.population_parent.get(cur, -1)
        chains[pop] = chain
    return chains


def presence_sensitivity(truth: GroundTruth, called_profiles: dict[int, str | None]) -> float:
    """Percentage of collected SSNVs whose called binary profile equals the
    truth presence pattern. Dropped SSNVs (profile None) count as incorrect."""
    total = len(truth.presence)
    if total == 0:
        return 100.0
    good = sum(
        1 for sid, pattern in truth.presence.items() if called_profiles.get(sid) == pattern
    )
    return 100.0 * good / total


def pair_relationships(truth: GroundTruth) -> dict[tuple[int, int], str]:
    """Classify every collected SSNV pair: 'ad' when one origin population is a
    strict ancestor of the other (keyed ancestor-first), otherwise 'sib'
    (including pairs from the same population)."""
    chains = _ancestor_chains(truth)
    sids = sorted(truth.ssnv_origin)
    out: dict[tuple[int, int], str] = {}
    for i, a in enumerate(sids):
        for b in sids[i + 1 :]:
            pa, pb = truth.ssnv_origin[a], truth.ssnv_origin[b]
            if pa == pb:
                out[(a, b)] = "sib"
            elif pa in chains[pb]:
                out[(a, b)] = "ad"
            elif pb in chains[pa]:
                out[(b, a)] = "ad"
            else:
                out[(a, b)] = "sib"
    return out


def compare_tree(
    truth: GroundTruth,
    snv_node: dict[int, int | None],
    tree_edges: list[tuple[int, int]],
    node_levels: dict[int, int],
) -> MetricReport:
    """Compute all pair metrics for one reconstructed tree.

    `snv_node` maps SSNV id to its tree node (None when not in the tree);
    `node_levels` gives each node's Hamming weight for the private-excluded
    metric variants.
    """
    parent = {c: p for p, c in tree_edges}
    ancestors: dict[int, set[int]] = {}
    for n in set(parent) | set(parent.values()):
        chain = set()
        cur = n
        while cur in parent:
            cur = parent[cur]
            chain.add(cur)
        ancestors[n] = chain

    rels = pair_relationships(truth)
    in_tree = {sid for sid, node in snv_node.items() if node is not None}

    ad_total = sib_total = 0
    ad_in = sib_in = 0
    ad_ordered = ad_correct = ad_to_sib = 0
    ad_to_sib_np = ad_in_np = 0
    sib_correct = sib_to_ad = 0
    sib_to_ad_np = sib_in_np = 0

    for (a, b), rel in rels.items():
        if rel == "ad":
            ad_total += 1
        else:
            sib_total += 1
        if a not in in_tree or b not in in_tree:
            continue
        na, nb = snv_node[a], snv_node[b]
        nonpriv = node_levels[na] > 1 and node_levels[nb] > 1
        if rel == "ad":
            ad_in += 1
            ad_in_np += nonpriv
            if na == nb:
                continue
            if nb in ancestors.get(na, ()) or na in ancestors.get(nb, ()):
                ad_ordered += 1
                ad_correct += na in ancestors[nb]  # truth direction: a above b
            else:
                ad_to_sib += 1
                ad_to_sib_np += nonpriv
        else:
            sib_in += 1
            sib_in_np += nonpriv
            if na == nb:
                continue
            if nb in ancestors.get(na, ()) or na in ancestors.get(nb, ()):
                sib_to_ad += 1
                sib_to_ad_np += nonpriv
            else:
                sib_correct += 1

    def pct(x, denom):
        # ratios with an empty denominator are undefined and excluded from
        # replicate averages
        return 100.0 * x / denom if denom else float("nan")

    n_collected = len(truth.presence)
    return MetricReport(
        pct_snvs_in_tree=pct(len(in_tree), n_collected),
        pct_ad_pairs=pct(ad_in, ad_total),
        pct_ad_ordered=pct(ad_ordered, ad_in),
        pct_ad_correct=pct(ad_correct, ad_ordered),
        pct_ad_to_sib=pct(ad_to_sib, ad_in),
        pct_ad_to_sib_nopriv=pct(ad_to_sib_np, ad_in_np),
        pct_sib_pairs=pct(sib_in, sib_total),
        pct_sib_correct=pct(sib_correct, sib_in),
        pct_sib_to_ad=pct(sib_to_ad, sib_in),
        pct_sib_to_ad_nopriv=pct(sib_to_ad_np, sib_in_np),
        tree_reconstructed=True,
    )


METRIC_COLUMNS = [
    "pct_snvs_assigned_correctly",
    "pct_snvs_in_tree",
    "pct_ad_pairs",
    "pct_ad_ordered",
    "pct_ad_correct",
    "pct_ad_to_sib",
    "pct_ad_to_sib_nopriv",
    "pct_sib_pairs",
    "pct_sib_correct",
    "pct_sib_to_ad",
    "pct_sib_to_ad_nopriv",
]


def aggregate(reports: list[MetricReport]) -> tuple[MetricReport, int]:
    """Average the per-replicate metrics over replicates that reconstructed a
    tree; returns the mean report and the reconstructed-tree count."""
    done = [r for r in reports if r.tree_reconstructed]
    if not done:
        return MetricReport(), 0
    mean = MetricReport(tree_reconstructed=True)
    for name in METRIC_COLUMNS:
        vals = [v for r in done if not math.isnan(v := getattr(r, name))]
        setattr(mean, name, sum(vals) / len(vals) if vals else float("nan"))
    return mean, len(done)


def evaluate_bundle(truth: GroundTruth, bundle) -> MetricReport:
    """Score one pipeline result bundle against its simulator ground truth."""
    from .pipeline import snv_node_map, snv_profile_map

    idx_to_sid = {
        snv["idx"]: int(snv["desc"][4:])
        for snv in bundle.data["snvs"]
        if snv["desc"].startswith("ssnv")
    }
    profiles = {
        idx_to_sid[i]: p for i, p in snv_profile_map(bundle).items() if i in idx_to_sid
    }
    sensitivity = presence_sensitivity(truth, profiles)
    if bundle.data["trees"]:
        snv_node = {
            idx_to_sid[i]: n for i, n in snv_node_map(bundle).items() if i in idx_to_sid
        }
        levels = {n["id"]: n["level"] for n in bundle.data["network"]["nodes"]}
        edges = [tuple(e) for e in bundle.data["trees"][0]["edges"]]
        report = compare_tree(truth, snv_node, edges, levels)
    else:
        report = MetricReport()
    report.pct_snvs_assigned_correctly = sensitivity
    return report


def run_simulation_experiment(
    sim_cfg,
    run_cfg,
    n_samples: int,
    scheme: str,
    noise,
    replicates: int,
) -> tuple[MetricReport, int, list[MetricReport]]:
    """Simulate `replicates` datasets, run the pipeline on each, and score the
    top trees; returns (mean report, reconstructed-tree count, all reports)."""
    from .pipeline import run_pipeline
    from .simulate import generate_dataset, replicate_rng

    reports = []
    for rep in range(replicates):
        rng = replicate_rng(sim_cfg.seed, rep)
        dataset = generate_dataset(sim_cfg, n_samples, scheme, noise, rng)
        bundle = run_pipeline(dataset.samples, dataset.records, run_cfg)
        reports.append(evaluate_bundle(dataset.truth, bundle))
    mean, trees = aggregate(reports)
    return mean, trees, reports


def write_metrics_table(path, rows: list[tuple[str, MetricReport, int]]) -> None:
    """TSV with one row per experiment: label, Trees count, then the metric
    columns in table order."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("experiment\ttrees\t" + "\t".join(METRIC_COLUMNS) + "\n")
        for label, report, trees in rows:
            cells = [label, str(trees)]
            cells += [f"{getattr(report, c):.2f}" for c in METRIC_COLUMNS]
            fh.write("\t".join(cells) + "\n")
