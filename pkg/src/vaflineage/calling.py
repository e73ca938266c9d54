"""SSNV presence calling: hard thresholds, robust groups, greyzone assignment, set cover.

Converts per-sample VAF vectors into binary presence profiles. SSNVs that can be
called confidently in every sample (and share their profile with enough peers)
form robust groups; the rest are matched to compatible robust groups by VAF
similarity, and leftovers are covered greedily with as few new profiles as
possible.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

from .core import BinaryProfile, SampleSet, SnvRecord, TernaryProfile, ternary_compatible

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CallingConfig:
    t_present: float = 0.005
    t_absent: float = 0.005
    min_robust_peers: int = 1
    sim_threshold_frac: float = 0.7
    max_star_positions: int = 10

    def __post_init__(self):
        if not 0.0 <= self.t_absent <= self.t_present <= 1.0:
            raise ValueError("need 0 <= t_absent <= t_present <= 1")
        if self.min_robust_peers < 0:
            raise ValueError("min_robust_peers must be >= 0")


@dataclass
class SnvGroup:
    """All SSNVs assigned the same binary presence profile."""

    profile: BinaryProfile
    members: list[SnvRecord]
    robust: bool


def mark_presence(snv: SnvRecord, cfg: CallingConfig) -> TernaryProfile:
    """Per-sample mark: 1 if VAF >= t_present, 0 if VAF <= t_absent, '*' in between.

    Boundary ties resolve toward the definite mark, with presence checked first
    so t_present == t_absent never produces a '*'.
    """
    marks = []
    for v in snv.vaf:
        if v >= cfg.t_present:
            marks.append("1")
        elif v <= cfg.t_absent:
            marks.append("0")
        else:
            marks.append("*")
    return TernaryProfile("".join(marks))


def form_robust_groups(
    snvs: list[SnvRecord], cfg: CallingConfig
) -> tuple[list[SnvGroup], list[tuple[SnvRecord, TernaryProfile]]]:
    """Split SSNVs into robust profile groups and an unresolved remainder.

    An SSNV is robust when its ternary profile has no '*' and at least
    `min_robust_peers` other such SSNVs share its binary profile.
    """
    by_profile: dict[str, list[SnvRecord]] = {}
    unresolved: list[tuple[SnvRecord, TernaryProfile]] = []
    ternaries: dict[int, TernaryProfile] = {}
    for snv in snvs:
        t = mark_presence(snv, cfg)
        ternaries[snv.idx] = t
        if t.has_stars():
            unresolved.append((snv, t))
        else:
            by_profile.setdefault(t.marks, []).append(snv)

    groups = []
    for bits in sorted(by_profile):
        members = by_profile[bits]
        if len(members) >= cfg.min_robust_peers + 1:
            groups.append(SnvGroup(BinaryProfile(bits), list(members), robust=True))
        else:
            unresolved.extend((m, ternaries[m.idx]) for m in members)
    unresolved.sort(key=lambda pair: pair[0].idx)
    return groups, unresolved


def similarity(m: SnvRecord, n: SnvRecord) -> float:
    """VAF similarity: sum over samples of min/max ratios.

    A sample where both VAFs are 0 counts as full agreement (1); a sample where
    exactly one is 0 counts as disagreement (0).
    """
    if len(m.vaf) != len(n.vaf):
        raise ValueError("VAF vector length mismatch")
    total = 0.0
    for a, b in zip(m.vaf, n.vaf):
        if a == 0.0 and b == 0.0:
            total += 1.0
        elif a == 0.0 or b == 0.0:
            total += 0.0
        else:
            total += min(a, b) / max(a, b)
    return total


def assign_greyzone(
    unresolved: list[tuple[SnvRecord, TernaryProfile]],
    groups: list[SnvGroup],
    cfg: CallingConfig,
) -> tuple[list[SnvGroup], list[tuple[SnvRecord, TernaryProfile]]]:
    """Assign each unresolved SSNV to the compatible robust group holding its
    most similar robust SSNV, if that similarity clears the threshold.

    Returns the groups (with members appended) and the residual SSNVs that
    found no compatible group or fell below the threshold. Appended members do
    not themselves become similarity anchors.
    """
    if not unresolved:
        return groups, []
    n_samples = len(unresolved[0][1])
    threshold = cfg.sim_threshold_frac * n_samples
    anchors = [(g, snv) for g in groups for snv in g.members]

    residual = []
    for snv, tern in unresolved:
        best = None
        for g, anchor in anchors:
            if not ternary_compatible(tern, g.profile):
                continue
            key = (-similarity(snv, anchor), g.profile.bits, anchor.idx)
            if best is None or key < best[0]:
                best = (key, g)
        if best is not None and -best[0][0] >= threshold:
            best[1].members.append(snv)
        else:
            residual.append((snv, tern))
    return groups, residual


def _round_by_proximity(snv: SnvRecord, tern: TernaryProfile, cfg: CallingConfig) -> BinaryProfile:
    # Convert each '*' to 1 or 0 by whichever threshold the VAF is closest to.
    bits = []
    for mark, v in zip(tern.marks, snv.vaf):
        if mark != "*":
            bits.append(mark)
        elif abs(v - cfg.t_present) <= abs(v - cfg.t_absent):
            bits.append("1")
        else:
            bits.append("0")
    return BinaryProfile("".join(bits))


def _candidate_targets(tern: TernaryProfile, snv: SnvRecord, cfg: CallingConfig) -> set[str]:
    # the all-zero profile stays a valid target: SSNVs with no definite
    # presence anywhere resolve to it and are dropped (with a warning) later
    stars = tern.star_positions
    if len(stars) > cfg.max_star_positions:
        return {_round_by_proximity(snv, tern, cfg).bits}
    targets = set()
    for combo in itertools.product("01", repeat=len(stars)):
        bits = list(tern.marks)
        for pos, c in zip(stars, combo):
            bits[pos] = c
        targets.add("".join(bits))
    return targets


def cover_residual(
    residual: list[tuple[SnvRecord, TernaryProfile]], cfg: CallingConfig
) -> list[SnvGroup]:
    """Form new profile groups for residual SSNVs via greedy set cover.

    Each residual SSNV can join any binary profile obtained by substituting its
    '*' marks; the greedy step repeatedly picks the profile compatible with the
    most still-uncovered SSNVs. SSNVs whose chosen profile covers nobody else
    fall back to per-'*' proximity rounding.
    """
    if not residual:
        return []
    candidates = {snv.idx: _candidate_targets(tern, snv, cfg) for snv, tern in residual}
    pending = {snv.idx: (snv, tern) for snv, tern in residual}

    assigned: dict[str, list[SnvRecord]] = {}
    while pending:
        coverage: dict[str, list[int]] = {}
        for idx in pending:
            for target in candidates[idx]:
                coverage.setdefault(target, []).append(idx)
        target, covered = min(
            coverage.items(), key=lambda item: (-len(item[1]), item[0])
        )
        if len(covered) == 1:
            snv, tern = pending.pop(covered[0])
            profile = _round_by_proximity(snv, tern, cfg)
            assigned.setdefault(profile.bits, []).append(snv)
        else:
            for idx in sorted(covered):
                assigned.setdefault(target, []).append(pending.pop(idx)[0])

    groups = []
    for bits in sorted(assigned):
        members = sorted(assigned[bits], key=lambda s: s.idx)
        groups.append(SnvGroup(BinaryProfile(bits), members, robust=False))
    return groups


def call_groups(
    snvs: list[SnvRecord], samples: SampleSet, cfg: CallingConfig
) -> tuple[list[SnvGroup], list[tuple[SnvRecord, str]]]:
    """Run the full calling stage and filter out non-somatic profiles.

    Returns the surviving groups plus a list of dropped SSNVs with reasons:
    all-zero profiles (never present) and profiles with a 1 at the normal
    sample (germline or normal-contaminated).
    """
    robust, unresolved = form_robust_groups(snvs, cfg)
    robust, residual = assign_greyzone(unresolved, robust, cfg)
    groups = robust + cover_residual(residual, cfg)

    kept: list[SnvGroup] = []
    dropped: list[tuple[SnvRecord, str]] = []
    for g in groups:
        if "1" not in g.profile.bits:
            log.warning("dropping %d SSNV(s) with all-zero profile", len(g.members))
            dropped.extend((m, "all_zero_profile") for m in g.members)
        elif g.profile.bits[samples.normal_index] == "1":
            reason = "germline_profile" if g.profile.is_all_ones() else "present_in_normal"
            log.warning(
                "dropping %d SSNV(s) with profile %s (%s)", len(g.members), g.profile, reason
            )
            dropped.extend((m, reason) for m in g.members)
        else:
            kept.append(g)
    kept.sort(key=lambda g: g.profile.bits)
    dropped.sort(key=lambda pair: pair[0].idx)
    return kept, dropped
