"""Report figures: lineage tree rendering and evaluation metric charts,
written to image files alongside the delimited outputs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .evaluate import METRIC_COLUMNS, MetricReport

NODE_COLOR = "#7fb3d5"
ROOT_COLOR = "#aab7b8"
SAMPLE_COLOR = "#f9e79b"


def render_tree_figure(bundle_data: dict, path, tree_index: int = 0) -> None:
    """Draw one ranked tree layered by node level, samples attached as leaves
    under the terminal nodes of their lineages."""
    nodes = {n["id"]: n for n in bundle_data["network"]["nodes"]}
    root_id = bundle_data["network"]["root_id"]
    names = bundle_data["samples"]["names"]
    tree = bundle_data["trees"][tree_index]
    edges = [tuple(e) for e in tree["edges"]]

    used = {root_id} | {v for e in edges for v in e}
    levels: dict[int, list[int]] = {}
    for nid in sorted(used):
        levels.setdefault(nodes[nid]["level"], []).append(nid)
    order = sorted(levels, reverse=True)
    ypos = {lvl: -i for i, lvl in enumerate(order)}
    xy = {}
    for lvl in order:
        row = levels[lvl]
        for k, nid in enumerate(row):
            xy[nid] = (k - (len(row) - 1) / 2.0, ypos[lvl])

    # sample leaves under each lineage terminal of the first decomposition set
    leaves = []
    for dec in tree["decompositions"]:
        for lin in dec["lineages"]:
            leaves.append((lin["path"][-1], dec["sample"], lin["prevalence"]))

    fig, ax = plt.subplots(figsize=(max(6.0, 1.6 * max(len(v) for v in levels.values())),
                                    1.2 * (len(order) + 2)))
    for p, c in edges:
        ax.plot([xy[p][0], xy[c][0]], [xy[p][1], xy[c][1]], "-", color="#566573", zorder=1)
    leaf_y = min(y for _, y in xy.values()) - 1.0
    slots: dict[int, int] = {}
    for terminal, sample, prev in leaves:
        k = slots.get(terminal, 0)
        slots[terminal] = k + 1
        lx = xy[terminal][0] + 0.28 * k
        ax.plot([xy[terminal][0], lx], [xy[terminal][1], leaf_y], "--", color="#b2babb", zorder=1)
        ax.text(
            lx,
            leaf_y,
            f"{names[sample]}\n{prev:.2f}",
            ha="center",
            va="center",
            fontsize=7,
            bbox=dict(boxstyle="round,pad=0.25", fc=SAMPLE_COLOR, ec="#797d7f"),
            zorder=3,
        )
    for nid, (x, y) in xy.items():
        n = nodes[nid]
        if nid == root_id:
            label, color = "germline", ROOT_COLOR
        else:
            label, color = f"{n['profile']}\nn={n['size']}", NODE_COLOR
        ax.text(
            x,
            y,
            label,
            ha="center",
            va="center",
            fontsize=8,
            bbox=dict(boxstyle="round,pad=0.3", fc=color, ec="#34495e"),
            zorder=2,
        )
    score = tree["qp_objective"]
    ax.set_title(f"lineage tree rank {tree['rank']} (score {score:.4g})" if score is not None
                 else f"lineage tree rank {tree['rank']}")
    ax.set_axis_off()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_metrics_figure(rows: list[tuple[str, MetricReport, int]], path) -> None:
    """Bar chart of the headline pair metrics across experiments."""
    shown = ["pct_snvs_assigned_correctly", "pct_snvs_in_tree", "pct_ad_correct", "pct_sib_correct"]
    fig, ax = plt.subplots(figsize=(1.8 + 1.8 * len(rows), 4.0))
    width = 0.8 / len(shown)
    for j, col in enumerate(shown):
        xs = [i + j * width for i in range(len(rows))]
        ys = [getattr(r, col) for _, r, _ in rows]
        ax.bar(xs, ys, width=width, label=col.replace("pct_", "%").replace("_", " "))
    ax.set_xticks([i + 0.4 - width / 2 for i in range(len(rows))])
    ax.set_xticklabels([label for label, _, _ in rows], rotation=20, ha="right", fontsize=8)
    ax.set_ylim(0, 105)
    ax.set_ylabel("percent")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
