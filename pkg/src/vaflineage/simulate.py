"""Ground-truth lineage simulator: branching monoclonal cell populations with
SSNV/CNV events, multi-sample extraction, haplotype-aware true VAFs, and
binomial sequencing noise.

The genome model is 22 autosome pairs of 100 Mb with the arm boundary at
50 Mb; SSNV positions are uniform, CNVs duplicate one arm of one haplotype.
The per-population copy state of a locus is replayed along the ancestry chain,
so event order (SSNV before or after an overlapping duplication) is honored.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import SampleSet, SnvRecord

N_CHROMS = 22
CHROM_LEN = 100_000_000
ARM_BOUNDARY = 50_000_000

EV_ROOT, EV_SSNV, EV_CNV = 0, 1, 2


@dataclass(frozen=True)
class SimulationConfig:
    p_ssnv: float = 0.15
    p_cnv: float = 0.0
    p_death: float = 0.06
    iterations: int = 50
    size_log10_min: float = 5.0
    size_log10_max: float = 6.5
    cells_per_sample: int = 1000
    subclones_max: int = 5
    normal_frac_max: float = 0.2
    max_populations: int = 500_000
    seed: int = 0

    def __post_init__(self):
        for p in (self.p_ssnv, self.p_cnv, self.p_death):
            if not 0.0 <= p <= 1.0:
                raise ValueError("event probabilities must be in [0,1]")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")


@dataclass(frozen=True)
class NoiseConfig:
    coverage: int | None = None  # None = true VAFs (infinite coverage)
    base_error: float = 1e-3  # Q30 per-read flip probability


@dataclass
class LineageTree:
    """Population arrays: index 0 is the immortal normal root."""

    parent: np.ndarray  # int, -1 for root
    size: np.ndarray  # float cell counts
    alive: np.ndarray  # bool
    ev_type: np.ndarray  # EV_ROOT / EV_SSNV / EV_CNV
    ev_chrom: np.ndarray
    ev_pos: np.ndarray  # SSNV position (0 for CNV)
    ev_arm: np.ndarray  # CNV arm (0/1; SSNV arm derived from position)
    ev_hap: np.ndarray
    ssnv_id: np.ndarray  # dense SSNV numbering, -1 for non-SSNV populations
    capped: bool = False

    @property
    def n_populations(self) -> int:
        return len(self.parent)

    def ssnv_populations(self) -> np.ndarray:
        """Population index of each SSNV, ordered by SSNV id."""
        pops = np.flatnonzero(self.ev_type == EV_SSNV)
        return pops[np.argsort(self.ssnv_id[pops])]

    def chain(self, pop: int) -> list[int]:
        """Ancestry from the root down to `pop`, inclusive."""
        out = [int(pop)]
        while self.parent[out[-1]] >= 0:
            out.append(int(self.parent[out[-1]]))
        out.reverse()
        return out

    def children_map(self) -> dict[int, list[int]]:
        kids: dict[int, list[int]] = {}
        for i, p in enumerate(self.parent):
            if p >= 0:
                kids.setdefault(int(p), []).append(i)
        return kids

    def mutation_set(self, pop: int) -> frozenset[int]:
        """SSNV ids carried by `pop` (every mutation in its lineage)."""
        return frozenset(
            int(self.ssnv_id[a]) for a in self.chain(pop) if self.ev_type[a] == EV_SSNV
        )


@dataclass
class SampleDraw:
    populations: tuple[int, ...]  # populations with at least one drawn cell
    cell_counts: tuple[int, ...]
    normal_count: int
    scheme: str
    normal_fraction: float


def grow_tree(cfg: SimulationConfig, rng: np.random.Generator) -> LineageTree:
    """Expand the lineage tree over `cfg.iterations` rounds. Each live
    population spawns an SSNV child with p_ssnv and a CNV child with p_cnv;
    every live non-root population (including newborns) then dies with
    p_death. The root (normal tissue) spawns but never dies."""
    parent = [np.array([-1], dtype=np.int64)]
    size = [np.array([_draw_sizes(cfg, rng, 1)[0]])]
    ev_type = [np.array([EV_ROOT], dtype=np.int8)]
    ev_chrom = [np.zeros(1, dtype=np.int32)]
    ev_pos = [np.zeros(1, dtype=np.int64)]
    ev_arm = [np.zeros(1, dtype=np.int8)]
    ev_hap = [np.zeros(1, dtype=np.int8)]
    ssnv_id = [np.array([-1], dtype=np.int64)]
    alive = np.ones(1, dtype=bool)
    total = 1
    next_ssnv = 0
    capped = False

    for _ in range(cfg.iterations):
        live = np.flatnonzero(alive)
        if capped or total >= cfg.max_populations:
            capped = True
            new_parents = np.empty(0, dtype=np.int64)
            is_ssnv = np.empty(0, dtype=bool)
        else:
            spawn_ssnv = live[rng.random(live.size) < cfg.p_ssnv]
            spawn_cnv = live[rng.random(live.size) < cfg.p_cnv]
            new_parents = np.concatenate([spawn_ssnv, spawn_cnv])
            is_ssnv = np.concatenate(
                [np.ones(spawn_ssnv.size, dtype=bool), np.zeros(spawn_cnv.size, dtype=bool)]
            )
        k = new_parents.size
        if k:
            parent.append(new_parents)
            size.append(_draw_sizes(cfg, rng, k))
            types = np.where(is_ssnv, EV_SSNV, EV_CNV).astype(np.int8)
            ev_type.append(types)
            ev_chrom.append(rng.integers(1, N_CHROMS + 1, k).astype(np.int32))
            pos = rng.integers(1, CHROM_LEN + 1, k)
            arm = rng.integers(0, 2, k).astype(np.int8)
            ev_pos.append(np.where(is_ssnv, pos, 0))
            ev_arm.append(np.where(is_ssnv, (pos > ARM_BOUNDARY).astype(np.int8), arm))
            ev_hap.append(rng.integers(0, 2, k).astype(np.int8))
            ids = np.full(k, -1, dtype=np.int64)
            ids[is_ssnv] = np.arange(next_ssnv, next_ssnv + int(is_ssnv.sum()))
            next_ssnv += int(is_ssnv.sum())
            ssnv_id.append(ids)
            alive = np.concatenate([alive, np.ones(k, dtype=bool)])
            total += k

        mortal = np.flatnonzero(alive)
        mortal = mortal[mortal != 0]
        if mortal.size:
            dying = mortal[rng.random(mortal.size) < cfg.p_death]
            alive[dying] = False

    return LineageTree(
        parent=np.concatenate(parent),
        size=np.concatenate(size),
        alive=alive,
        ev_type=np.concatenate(ev_type),
        ev_chrom=np.concatenate(ev_chrom),
        ev_pos=np.concatenate(ev_pos),
        ev_arm=np.concatenate(ev_arm),
        ev_hap=np.concatenate(ev_hap),
        ssnv_id=np.concatenate(ssnv_id),
        capped=capped,
    )


def _draw_sizes(cfg: SimulationConfig, rng: np.random.Generator, k: int) -> np.ndarray:
    return 10.0 ** rng.uniform(cfg.size_log10_min, cfg.size_log10_max, k)


def _live_in_subtree(tree: LineageTree, root: int, kids: dict[int, list[int]]) -> list[int]:
    out = []
    stack = [root]
    while stack:
        u = stack.pop()
        if tree.alive[u]:
            out.append(u)
        stack.extend(kids.get(u, ()))
    return sorted(out)


def _disjoint_subtree_roots(tree: LineageTree, n: int) -> list[list[int]]:
    """BFS split into up to `n` disjoint subtrees rooted as high as possible,
    returning the live populations of each non-empty subtree."""
    kids = tree.children_map()
    queue = list(kids.get(0, ()))
    leaves: list[int] = []
    while queue and len(queue) + len(leaves) < n:
        head = queue.pop(0)
        sub_kids = kids.get(head, ())
        if sub_kids:
            queue.extend(sub_kids)
        else:
            leaves.append(head)
    roots = leaves + queue
    subtrees = [_live_in_subtree(tree, r, kids) for r in roots]
    return [s for s in subtrees if s]


def _multinomial_draw(
    rng: np.random.Generator, pops: list[int], sizes: np.ndarray, cells: int
) -> tuple[tuple[int, ...], tuple[int, ...]]:
    probs = sizes / sizes.sum()
    counts = rng.multinomial(cells, probs)
    kept = [(p, int(c)) for p, c in zip(pops, counts) if c > 0]
    return tuple(p for p, _ in kept), tuple(c for _, c in kept)


def sample_localized(
    tree: LineageTree, n_samples: int, cfg: SimulationConfig, rng: np.random.Generator
) -> list[SampleDraw]:
    """Spatially-structured biopsies: each sample draws up to `subclones_max`
    subclones from its own subtree, exactly one from the neighboring subtree,
    and up to `normal_frac_max` normal cells. Subtrees are reused round-robin
    when fewer disjoint subtrees exist than samples."""
    subtrees = _disjoint_subtree_roots(tree, n_samples)
    draws = []
    for j in range(n_samples):
        if not subtrees:
            draws.append(SampleDraw((), (), cfg.cells_per_sample, "localized", 1.0))
            continue
        own = subtrees[j % len(subtrees)]
        k = min(int(rng.integers(1, cfg.subclones_max + 1)), len(own))
        chosen = sorted(int(p) for p in rng.choice(own, size=k, replace=False))
        if len(subtrees) > 1:
            neighbor = subtrees[(j + 1) % len(subtrees)]
            pick = int(neighbor[int(rng.integers(len(neighbor)))])
            if pick not in chosen:
                chosen.append(pick)
        normal_frac = float(rng.uniform(0.0, cfg.normal_frac_max))
        normal_count = int(round(normal_frac * cfg.cells_per_sample))
        pops, counts = _multinomial_draw(
            rng, chosen, tree.size[chosen], cfg.cells_per_sample - normal_count
        )
        draws.append(SampleDraw(pops, counts, normal_count, "localized", normal_frac))
    return draws


def sample_randomized(
    tree: LineageTree, n_samples: int, cfg: SimulationConfig, rng: np.random.Generator
) -> list[SampleDraw]:
    """Uniformly random subclone selection: up to `subclones_max` live tumor
    populations per sample, cell counts multinomial by population size."""
    live = [int(p) for p in np.flatnonzero(tree.alive) if p != 0]
    draws = []
    for _ in range(n_samples):
        if not live:
            draws.append(SampleDraw((), (), 0, "randomized", 0.0))
            continue
        k = min(int(rng.integers(1, cfg.subclones_max + 1)), len(live))
        chosen = sorted(int(p) for p in rng.choice(live, size=k, replace=False))
        pops, counts = _multinomial_draw(
            rng, chosen, tree.size[chosen], cfg.cells_per_sample
        )
        draws.append(SampleDraw(pops, counts, 0, "randomized", 0.0))
    return draws


def _locus_state(tree: LineageTree, pop: int, ssnv_pop: int) -> tuple[int, int]:
    """(variant haplotypes, reference haplotypes) at the SSNV's locus in one
    cell of `pop`, replaying the ancestry chain's events in order."""
    s_chrom = int(tree.ev_chrom[ssnv_pop])
    s_arm = int(tree.ev_arm[ssnv_pop])
    s_hap = int(tree.ev_hap[ssnv_pop])
    copies = [1, 1]
    var = 0
    for a in tree.chain(pop)[1:]:
        if a == ssnv_pop:
            var = 1
        elif (
            tree.ev_type[a] == EV_CNV
            and tree.ev_chrom[a] == s_chrom
            and tree.ev_arm[a] == s_arm
        ):
            h = int(tree.ev_hap[a])
            copies[h] *= 2
            if h == s_hap:
                var *= 2
    return var, copies[0] + copies[1] - var


def true_vaf(tree: LineageTree, ssnv_pop: int, draw: SampleDraw) -> float:
    """Haplotype-count VAF over the drawn cells (normal cells contribute two
    reference haplotypes each)."""
    num = 0.0
    den = 2.0 * draw.normal_count
    for pop, cells in zip(draw.populations, draw.cell_counts):
        hv, hr = _locus_state(tree, pop, ssnv_pop)
        num += cells * hv
        den += cells * (hv + hr)
    return num / den if den > 0 else 0.0


def add_noise(vaf: float, noise: NoiseConfig, rng: np.random.Generator) -> float:
    """Observed VAF after binomial read sampling and per-read Q30 flips."""
    if not 0.0 <= vaf <= 1.0:
        raise ValueError("true VAF must be in [0,1]")
    if noise.coverage is None:
        return vaf
    n = noise.coverage
    variant_reads = rng.binomial(n, vaf)
    observed = rng.binomial(variant_reads, 1.0 - noise.base_error) + rng.binomial(
        n - variant_reads, noise.base_error
    )
    return observed / n


@dataclass
class GroundTruth:
    population_parent: dict[int, int]
    ssnv_origin: dict[int, int]  # SSNV id -> origin population
    presence: dict[int, str]  # SSNV id -> length-S truth profile (normal first)
    true_vafs: dict[int, tuple[float, ...]]  # SSNV id -> per-column true VAF
    cnv_affected: set[int]  # SSNV ids whose locus is CNV-hit in some drawn population


@dataclass
class SimulatedDataset:
    samples: SampleSet
    records: list[SnvRecord]
    draws: list[SampleDraw]
    truth: GroundTruth
    tree: LineageTree


def generate_dataset(
    cfg: SimulationConfig,
    n_samples: int,
    scheme: str = "localized",
    noise: NoiseConfig = NoiseConfig(),
    rng: np.random.Generator | None = None,
) -> SimulatedDataset:
    """Grow a tree, draw samples, and emit the SSNV table the pipeline ingests
    (normal column first) together with the full ground truth."""
    if rng is None:
        rng = replicate_rng(cfg.seed, 0)
    tree = grow_tree(cfg, rng)
    if scheme == "localized":
        draws = sample_localized(tree, n_samples, cfg, rng)
    elif scheme == "randomized":
        draws = sample_randomized(tree, n_samples, cfg, rng)
    else:
        raise ValueError(f"unknown sampling scheme {scheme!r}")

    carrier_sets = {}
    for d in draws:
        for pop in d.populations:
            if pop not in carrier_sets:
                carrier_sets[pop] = tree.mutation_set(pop)
    collected = sorted({s for muts in carrier_sets.values() for s in muts})
    ssnv_pops = tree.ssnv_populations()

    presence: dict[int, str] = {}
    true_vafs: dict[int, tuple[float, ...]] = {}
    cnv_affected: set[int] = set()
    records: list[SnvRecord] = []
    has_cnv_cache: dict[int, set[tuple[int, int]]] = {}

    def cnv_arms(pop: int) -> set[tuple[int, int]]:
        if pop not in has_cnv_cache:
            has_cnv_cache[pop] = {
                (int(tree.ev_chrom[a]), int(tree.ev_arm[a]))
                for a in tree.chain(pop)
                if tree.ev_type[a] == EV_CNV
            }
        return has_cnv_cache[pop]

    for row, sid in enumerate(collected):
        origin = int(ssnv_pops[sid])
        bits = ["0"]
        vafs = [0.0]
        for d in draws:
            present = any(sid in carrier_sets[p] for p in d.populations)
            bits.append("1" if present else "0")
            vafs.append(true_vaf(tree, origin, d))
            locus = (int(tree.ev_chrom[origin]), int(tree.ev_arm[origin]))
            if any(locus in cnv_arms(p) for p in d.populations):
                cnv_affected.add(sid)
        presence[sid] = "".join(bits)
        true_vafs[sid] = tuple(vafs)
        noisy = tuple(add_noise(v, noise, rng) for v in vafs)
        records.append(
            SnvRecord(
                chrom=f"chr{int(tree.ev_chrom[origin])}",
                pos=int(tree.ev_pos[origin]),
                desc=f"ssnv{sid}",
                vaf=noisy,
                idx=row,
            )
        )

    samples = SampleSet(
        names=("Normal",) + tuple(f"S{j + 1}" for j in range(n_samples)), normal_index=0
    )
    truth = GroundTruth(
        population_parent={i: int(p) for i, p in enumerate(tree.parent)},
        ssnv_origin={sid: int(ssnv_pops[sid]) for sid in collected},
        presence=presence,
        true_vafs=true_vafs,
        cnv_affected=cnv_affected,
    )
    return SimulatedDataset(samples=samples, records=records, draws=draws, truth=truth, tree=tree)


def replicate_rng(seed: int, replicate: int) -> np.random.Generator:
    """Independent, portable RNG stream per (seed, replicate)."""
    return np.random.default_rng(np.random.SeedSequence([seed, replicate]))
