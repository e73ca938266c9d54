"""Shared domain types: samples, SSNV records, presence profiles, and VAF clusters."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class SampleSet:
    """Ordered sample names with the index of the normal control sample."""

    names: tuple[str, ...]
    normal_index: int = 0

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise ValueError("sample names must be unique")
        if len(self.names) < 2:
            raise ValueError("need at least two samples (normal + tumor)")
        if not 0 <= self.normal_index < len(self.names):
            raise ValueError("normal_index out of range")

    @property
    def size(self) -> int:
        return len(self.names)


@dataclass(frozen=True)
class SnvRecord:
    """One somatic SNV with a per-sample VAF (or halved CP) vector.

    `idx` is the stable input row index used for deterministic tie-breaking
    and for referencing the record in result bundles.
    """

    chrom: str
    pos: int
    desc: str
    vaf: tuple[float, ...]
    is_cp: bool = False
    idx: int = -1

    def __post_init__(self):
        for v in self.vaf:
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"VAF {v} outside [0,1] for {self.chrom}:{self.pos}")


@dataclass(frozen=True, order=True)
class BinaryProfile:
    """Per-sample presence bit-string, e.g. '01110'. The all-ones profile is germline."""

    bits: str

    def __post_init__(self):
        if any(c not in "01" for c in self.bits):
            raise ValueError(f"invalid profile {self.bits!r}")

    def __len__(self) -> int:
        return len(self.bits)

    def __str__(self) -> str:
        return self.bits

    @property
    def support(self) -> tuple[int, ...]:
        """Indices of the 1-samples, in sample order."""
        return tuple(i for i, c in enumerate(self.bits) if c == "1")

    def is_all_ones(self) -> bool:
        return set(self.bits) == {"1"}


@dataclass(frozen=True)
class TernaryProfile:
    """Presence marks with '*' for samples whose VAF falls between the call thresholds."""

    marks: str

    def __post_init__(self):
        if any(c not in "01*" for c in self.marks):
            raise ValueError(f"invalid ternary profile {self.marks!r}")

    def __len__(self) -> int:
        return len(self.marks)

    def __str__(self) -> str:
        return self.marks

    @property
    def star_positions(self) -> tuple[int, ...]:
        return tuple(i for i, c in enumerate(self.marks) if c == "*")

    def has_stars(self) -> bool:
        return "*" in self.marks

    def to_binary(self) -> BinaryProfile:
        if self.has_stars():
            raise ValueError("ternary profile still has unresolved '*' marks")
        return BinaryProfile(self.marks)


@dataclass(frozen=True)
class Cluster:
    """A constraint-network node payload: member SSNVs plus their VAF centroid.

    `centroid` and `stderr` cover only the profile's 1-samples, in sample order.
    """

    profile: BinaryProfile
    members: tuple[SnvRecord, ...]
    centroid: tuple[float, ...]
    stderr: tuple[float, ...]
    id: int
    robust: bool = True

    def __post_init__(self):
        w = hamming_weight(self.profile)
        if not self.members:
            raise ValueError("cluster must have at least one member")
        if len(self.centroid) != w or len(self.stderr) != w:
            raise ValueError("centroid/stderr arity must equal the profile Hamming weight")
        for c in self.centroid:
            if not 0.0 <= c <= 1.0:
                raise ValueError(f"centroid entry {c} outside [0,1]")

    @property
    def size(self) -> int:
        return len(self.members)

    def full_centroid(self) -> tuple[float, ...]:
        """Length-S centroid with 0 at the profile's 0-samples."""
        return _expand(self.profile, self.centroid)

    def full_stderr(self) -> tuple[float, ...]:
        return _expand(self.profile, self.stderr)


def _expand(profile: BinaryProfile, values: tuple[float, ...]) -> tuple[float, ...]:
    out = [0.0] * len(profile)
    for i, v in zip(profile.support, values):
        out[i] = v
    return tuple(out)


def hamming_weight(p: BinaryProfile) -> int:
    """Number of 1-bits; determines the node level in the constraint network."""
    return p.bits.count("1")


def covers(parent: BinaryProfile, child: BinaryProfile) -> bool:
    """True iff every 1-bit of `child` is also a 1-bit of `parent` (support containment)."""
    if len(parent) != len(child):
        raise ValueError("profile length mismatch")
    return all(p == "1" for p, c in zip(parent.bits, child.bits) if c == "1")


def ternary_compatible(t: TernaryProfile, g: BinaryProfile) -> bool:
    """True iff `g` agrees with `t` at every position not marked '*'."""
    if len(t) != len(g):
        raise ValueError("profile length mismatch")
    return all(m == "*" or m == b for m, b in zip(t.marks, g.bits))
