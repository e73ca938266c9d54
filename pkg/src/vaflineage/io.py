"""File formats: the SSNV input table, pre-computed cluster files, simulator
ground-truth files, and the result outputs (bundle JSON, dot graph, summary).

SSNV table (UTF-8, LF, tab-separated), normal sample first:

    #chr	position	description	Normal	S1	S2 ...
    chr1	12345	ssnv0	0.0	0.25	0.31 ...

Cluster file, one cluster per line:

    profile	centroid,csv	snv-row-indices,csv

Ground-truth file: two '#'-headed sections, populations then SSNVs.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .core import BinaryProfile, Cluster, SampleSet, SnvRecord, hamming_weight
from .simulate import GroundTruth, SimulatedDataset


class InputError(Exception):
    """Malformed or out-of-range input data."""


def parse_snv_table(path, cp_mode: bool = False, normal_index: int = 0):
    """Parse the SSNV TSV into (SampleSet, records). CP-mode values are halved
    at ingestion so the 0.5 germline bound applies in both input modes."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    rows = [(i + 1, line) for i, line in enumerate(lines) if line.strip()]
    if not rows:
        raise InputError(f"{path}: empty input file")
    header_no, header = rows[0]
    cols = header.lstrip("#").split("\t")
    if len(cols) < 4:
        raise InputError(f"{path}:{header_no}: header needs chr/position/description + samples")
    names = tuple(cols[3:])
    try:
        samples = SampleSet(names=names, normal_index=normal_index)
    except ValueError as exc:
        raise InputError(f"{path}:{header_no}: {exc}") from exc

    records = []
    for lineno, line in rows[1:]:
        parts = line.split("\t")
        if len(parts) != 3 + samples.size:
            raise InputError(
                f"{path}:{lineno}: expected {3 + samples.size} columns, found {len(parts)}"
            )
        try:
            pos = int(parts[1])
            vals = [float(v) for v in parts[3:]]
        except ValueError as exc:
            raise InputError(f"{path}:{lineno}: {exc}") from exc
        for v in vals:
            if not 0.0 <= v <= 1.0:
                raise InputError(f"{path}:{lineno}: value {v} outside [0,1]")
        if cp_mode:
            vals = [v / 2.0 for v in vals]
        records.append(
            SnvRecord(
                chrom=parts[0],
                pos=pos,
                desc=parts[2],
                vaf=tuple(vals),
                is_cp=cp_mode,
                idx=len(records),
            )
        )
    return samples, records


def write_snv_table(path, samples: SampleSet, records: list[SnvRecord]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("#chr\tposition\tdescription\t" + "\t".join(samples.names) + "\n")
        for r in records:
            vafs = "\t".join(repr(float(v)) for v in r.vaf)
            fh.write(f"{r.chrom}\t{r.pos}\t{r.desc}\t{vafs}\n")


def parse_cluster_file(path, samples: SampleSet, records: list[SnvRecord]) -> list[Cluster]:
    """Pre-computed clusters bypass calling and clustering; standard errors are
    recomputed from the referenced members' VAFs."""
    clusters = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise InputError(f"{path}:{lineno}: expected profile, centroid csv, member csv")
        try:
            profile = BinaryProfile(parts[0])
        except ValueError as exc:
            raise InputError(f"{path}:{lineno}: {exc}") from exc
        if len(profile) != samples.size:
            raise InputError(
                f"{path}:{lineno}: profile length {len(profile)} != {samples.size} samples"
            )
        centroid = tuple(float(v) for v in parts[1].split(","))
        if len(centroid) != hamming_weight(profile):
            raise InputError(
                f"{path}:{lineno}: centroid arity {len(centroid)} != profile weight"
            )
        idxs = [int(v) for v in parts[2].split(",")]
        for i in idxs:
            if not 0 <= i < len(records):
                raise InputError(f"{path}:{lineno}: SSNV row index {i} out of range")
        members = tuple(records[i] for i in idxs)
        sub = np.array([[m.vaf[j] for j in profile.support] for m in members])
        stderr = tuple(float(v) for v in sub.std(axis=0, ddof=0) / np.sqrt(len(members)))
        clusters.append(
            Cluster(
                profile=profile,
                members=members,
                centroid=centroid,
                stderr=stderr,
                id=len(clusters) + 1,
            )
        )
    return clusters


def write_truth_file(path, dataset: SimulatedDataset) -> None:
    t = dataset.truth
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("#population\tparent\n")
        for pop in sorted(t.population_parent):
            fh.write(f"{pop}\t{t.population_parent[pop]}\n")
        fh.write("#ssnv\torigin\tpresence\tcnv\ttrue_vafs\n")
        for sid in sorted(t.ssnv_origin):
            vafs = ",".join(repr(float(v)) for v in t.true_vafs[sid])
            cnv = 1 if sid in t.cnv_affected else 0
            fh.write(f"{sid}\t{t.ssnv_origin[sid]}\t{t.presence[sid]}\t{cnv}\t{vafs}\n")


def read_truth_file(path) -> GroundTruth:
    population_parent: dict[int, int] = {}
    ssnv_origin: dict[int, int] = {}
    presence: dict[int, str] = {}
    true_vafs: dict[int, tuple[float, ...]] = {}
    cnv_affected: set[int] = set()
    section = None
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        if line.startswith("#population"):
            section = "pop"
            continue
        if line.startswith("#ssnv"):
            section = "ssnv"
            continue
        parts = line.split("\t")
        if section == "pop":
            population_parent[int(parts[0])] = int(parts[1])
        elif section == "ssnv":
            sid = int(parts[0])
            ssnv_origin[sid] = int(parts[1])
            presence[sid] = parts[2]
            if int(parts[3]):
                cnv_affected.add(sid)
            true_vafs[sid] = tuple(float(v) for v in parts[4].split(","))
        else:
            raise InputError(f"{path}:{lineno}: data before a section header")
    return GroundTruth(
        population_parent=population_parent,
        ssnv_origin=ssnv_origin,
        presence=presence,
        true_vafs=true_vafs,
        cnv_affected=cnv_affected,
    )


def write_dot(path, bundle_data: dict, tree_index: int = 0) -> None:
    """Graph-description text file (dot digraph) of one ranked tree."""
    nodes = {n["id"]: n for n in bundle_data["network"]["nodes"]}
    tree = bundle_data["trees"][tree_index]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("digraph lineage {\n")
        fh.write("  rankdir=TB;\n")
        used = {bundle_data["network"]["root_id"]}
        for p, c in tree["edges"]:
            used.update((p, c))
        for nid in sorted(used):
            n = nodes[nid]
            if nid == bundle_data["network"]["root_id"]:
                label = "germline"
            else:
                label = f"{n['profile']}\\nn={n['size']}"
            fh.write(f'  n{nid} [label="{label}"];\n')
        for p, c in tree["edges"]:
            fh.write(f"  n{p} -> n{c};\n")
        fh.write("}\n")


def write_bundle(path, bundle_data: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(bundle_data, fh, indent=1)
        fh.write("\n")


def read_bundle(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def write_summary(path, bundle_data: dict) -> None:
    lines = summary_lines(bundle_data)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def summary_lines(bundle_data: dict) -> list[str]:
    search = bundle_data["search"]
    trees = bundle_data["trees"]
    lines = [
        f"valid trees found: {search['n_valid_trees']}",
        f"trees saved: {len(trees)}",
    ]
    if trees:
        lines.append(f"top tree score: {trees[0]['qp_objective']:.6g}")
    else:
        lines.append("no valid lineage tree (see diagnostics)")
    if search["truncated"]:
        lines.append("WARNING: search truncated at the configured bound; tree set incomplete")
    if search["adjustment_removed"]:
        lines.append(
            "network adjusted: removed node(s) " + ", ".join(map(str, search["adjustment_removed"]))
        )
    return lines
