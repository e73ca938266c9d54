import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vaflineage.calling import (
    CallingConfig,
    assign_greyzone,
    call_groups,
    cover_residual,
    form_robust_groups,
    mark_presence,
    similarity,
)
from vaflineage.core import BinaryProfile, SampleSet, SnvRecord, TernaryProfile, ternary_compatible


def rec(vaf, idx=0):
    return SnvRecord("chr1", 100 + idx, f"m{idx}", tuple(vaf), idx=idx)


def test_mark_presence_examples():
    cfg = CallingConfig(t_present=0.005, t_absent=0.005)
    assert mark_presence(rec([0.30]), cfg).marks == "1"
    assert mark_presence(rec([0.0]), cfg).marks == "0"
    cfg2 = CallingConfig(t_present=0.01, t_absent=0.005)
    assert mark_presence(rec([0.007]), cfg2).marks == "*"
    # boundary ties resolve to the definite mark
    assert mark_presence(rec([0.01]), cfg2).marks == "1"
    assert mark_presence(rec([0.005]), cfg2).marks == "0"


def test_form_robust_groups_examples():
    cfg = CallingConfig(t_present=0.05, t_absent=0.05, min_robust_peers=1)
    snvs = [rec([0.0, 0.3, 0.3, 0.2, 0.0], 0), rec([0.0, 0.28, 0.32, 0.22, 0.0], 1)]
    groups, unresolved = form_robust_groups(snvs, cfg)
    assert len(groups) == 1 and groups[0].profile.bits == "01110"
    assert len(groups[0].members) == 2 and not unresolved

    lone = [rec([0.0, 0.0, 0.3, 0.3, 0.0], 0)]
    groups, unresolved = form_robust_groups(lone, cfg)
    assert not groups and len(unresolved) == 1


def test_similarity_examples():
    m = rec([0.2, 0.4], 0)
    n = rec([0.1, 0.4], 1)
    assert similarity(m, n) == pytest.approx(1.5)
    both = rec([0.3, 0.2, 0.1], 2)
    assert similarity(both, both) == pytest.approx(3.0)
    a, b = rec([0.0, 0.4], 3), rec([0.0, 0.4], 4)
    assert similarity(a, b) == pytest.approx(2.0)
    # one-sided zero counts as disagreement
    assert similarity(rec([0.0, 0.4]), rec([0.2, 0.4])) == pytest.approx(1.0)


def test_assign_greyzone_prefers_most_similar_candidate():
    cfg = CallingConfig(t_present=0.05, t_absent=0.01, sim_threshold_frac=0.5)
    # robust groups 01111 and 01011 (peers included)
    g1 = [rec([0.0, 0.3, 0.3, 0.3, 0.3], i) for i in (0, 1)]
    g2 = [rec([0.0, 0.12, 0.0, 0.1, 0.11], i) for i in (2, 3)]
    snvs = g1 + g2 + [rec([0.0, 0.1, 0.02, 0.1, 0.1], 4)]  # ternary 01*11
    groups, unresolved = form_robust_groups(snvs, cfg)
    assert {g.profile.bits for g in groups} == {"01111", "01011"}
    assert len(unresolved) == 1 and unresolved[0][1].marks == "01*11"
    groups, residual = assign_greyzone(unresolved, groups, cfg)
    assert not residual
    target = next(g for g in groups if g.profile.bits == "01011")
    assert any(m.idx == 4 for m in target.members)


def test_assign_greyzone_no_candidates_or_below_threshold():
    cfg = CallingConfig(t_present=0.05, t_absent=0.01, sim_threshold_frac=0.99)
    g1 = [rec([0.0, 0.3, 0.3, 0.0, 0.0], i) for i in (0, 1)]
    groups, _ = form_robust_groups(g1, cfg)
    # incompatible ternary: fixed 1 where group has 0
    item = (rec([0.0, 0.3, 0.3, 0.3, 0.02], 2), TernaryProfile("0111*"))
    groups, residual = assign_greyzone([item], groups, cfg)
    assert residual == [item]
    # compatible but below the similarity threshold
    item2 = (rec([0.0, 0.04, 0.3, 0.0, 0.0], 3), TernaryProfile("0*100"))
    groups, residual = assign_greyzone([item2], groups, cfg)
    assert residual == [item2]


def exhaustive_min_cover(residual):
    """Smallest number of target profiles covering all residuals."""
    targets = set()
    for _, tern in residual:
        stars = tern.star_positions
        for combo in itertools.product("01", repeat=len(stars)):
            bits = list(tern.marks)
            for p, c in zip(stars, combo):
                bits[p] = c
            if "1" in "".join(bits):
                targets.add("".join(bits))
    targets = sorted(targets)
    for k in range(1, len(residual) + 1):
        for subset in itertools.combinations(targets, k):
            if all(
                any(ternary_compatible(t, BinaryProfile(b)) for b in subset)
                for _, t in residual
            ):
                return k
    return len(residual)


def test_cover_residual_examples():
    cfg = CallingConfig(t_present=0.05, t_absent=0.01)
    residual = [
        (rec([0.0, 0.02, 0.3], 0), TernaryProfile("0*1")),
        (rec([0.0, 0.3, 0.02], 1), TernaryProfile("01*")),
    ]
    groups = cover_residual(residual, cfg)
    assert len(groups) == 1 and groups[0].profile.bits == "011"
    assert not groups[0].robust
    assert exhaustive_min_cover(residual) == 1

    # singleton falls back to per-star proximity rounding
    single = [(rec([0.0, 0.04, 0.3], 0), TernaryProfile("0*1"))]
    groups = cover_residual(single, cfg)
    assert [g.profile.bits for g in groups] == ["011"]
    single_low = [(rec([0.0, 0.012, 0.3], 0), TernaryProfile("0*1"))]
    groups = cover_residual(single_low, cfg)
    assert [g.profile.bits for g in groups] == ["001"]

    assert cover_residual([], cfg) == []


def test_cover_residual_star_cap_falls_back_to_rounding():
    cfg = CallingConfig(t_present=0.05, t_absent=0.01, max_star_positions=2)
    vaf = [0.04, 0.04, 0.012, 0.3]
    item = (rec(vaf, 0), TernaryProfile("***1"))
    groups = cover_residual([item], cfg)
    assert [g.profile.bits for g in groups] == ["1101"]


@settings(max_examples=1000, deadline=None)
@given(
    st.lists(
        st.lists(st.sampled_from([0.0, 0.003, 0.007, 0.02, 0.2, 0.4]), min_size=3, max_size=3),
        min_size=1,
        max_size=12,
    )
)
def test_grouping_partitions_input(vafs):
    samples = SampleSet(names=("n", "t1", "t2"))
    cfg = CallingConfig(t_present=0.01, t_absent=0.005)
    snvs = [rec(v, i) for i, v in enumerate(vafs)]
    groups, dropped = call_groups(snvs, samples, cfg)
    seen = sorted([m.idx for g in groups for m in g.members] + [r.idx for r, _ in dropped])
    assert seen == list(range(len(snvs)))
    for g in groups:
        assert "1" in g.profile.bits
        assert g.profile.bits[0] == "0"


def test_greedy_cover_group_count_bounds():
    rng = np.random.default_rng(3)
    cfg = CallingConfig(t_present=0.05, t_absent=0.01)
    for _ in range(40):
        residual = []
        n = rng.integers(2, 9)
        for i in range(n):
            marks = "".join(rng.choice(["0", "1", "*"], size=4, p=[0.3, 0.4, 0.3]))
            vaf = [0.3 if c == "1" else (0.03 if c == "*" else 0.0) for c in marks]
            residual.append((rec(vaf, i), TernaryProfile(marks)))
        groups = cover_residual(residual, cfg)
        assert len(groups) <= len(residual)
        lower = exhaustive_min_cover(residual)
        harmonic = sum(1.0 / k for k in range(1, len(residual) + 1))
        assert len(groups) <= lower * harmonic + 1e-9


def test_call_groups_drops_germline_and_all_zero():
    samples = SampleSet(names=("n", "t1", "t2"))
    cfg = CallingConfig(t_present=0.05, t_absent=0.01)
    snvs = [
        rec([0.4, 0.4, 0.4], 0),  # germline all-ones
        rec([0.41, 0.39, 0.4], 1),
        rec([0.0, 0.0, 0.0], 2),  # never present
        rec([0.0, 0.3, 0.3], 3),
        rec([0.0, 0.3, 0.31], 4),
    ]
    groups, dropped = call_groups(snvs, samples, cfg)
    assert {g.profile.bits for g in groups} == {"011"}
    reasons = {r.idx: why for r, why in dropped}
    assert reasons[0] == "germline_profile" and reasons[1] == "germline_profile"
    assert reasons[2] == "all_zero_profile"


def test_calling_is_deterministic():
    samples = SampleSet(names=("n", "t1", "t2", "t3"))
    cfg = CallingConfig(t_present=0.02, t_absent=0.008)
    rng = np.random.default_rng(9)
    snvs = [
        rec(list(np.round(rng.uniform(0, 0.2, 4) * (rng.random(4) < 0.7), 4)), i)
        for i in range(40)
    ]
    a = call_groups(list(snvs), samples, cfg)
    b = call_groups(list(snvs), samples, cfg)
    assert [(g.profile.bits, [m.idx for m in g.members]) for g in a[0]] == [
        (g.profile.bits, [m.idx for m in g.members]) for g in b[0]
    ]
