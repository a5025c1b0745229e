"""Path mixing: splice start, transition and end edges of same-house records
into new instruction-trajectory pairs.

A candidate is a directed edge sequence start -> transitions* -> end forming
a simple path.  Acceptance requires, in this order: every edge not touching
the path's first or last node is at most ``max_node_gap_m`` long, no
consecutive nodes closer than ``min_node_gap_m``, the direction change at
every interior node stays at least ``min_loop_angle_deg`` away from a full
reversal, the start and end edges share no node and the path's first and
last nodes are not joined by a house edge, and the total length falls in
[min_len_m, max_len_m].  When the chosen edge carries micro-instructions
from several source records the text is drawn uniformly at random.  Edges
whose micro-instruction lacks a verb or a noun never enter the pools.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..envsim import House
from .records import CorpusRecord, step_headings
from .text import PosLexicon, Vocabulary, filter_micro_instruction, tokenize


@dataclass
class PathMixConfig:
    max_node_gap_m: float = 3.0
    min_loop_angle_deg: float = 45.0
    min_len_m: float = 5.0
    max_len_m: float = 20.0
    max_pairs: int | None = None
    seed: int = 0
    min_node_gap_m: float = 0.5

    def __post_init__(self):
        if min(self.max_node_gap_m, self.min_loop_angle_deg, self.min_len_m,
               self.max_len_m, self.min_node_gap_m) <= 0:
            raise ValueError("PathMixConfig fields must be positive")
        if self.min_len_m >= self.max_len_m:
            raise ValueError("need min_len_m < max_len_m")


@dataclass
class MixTally:
    examined: int = 0
    accepted: int = 0
    rejected: dict = field(default_factory=lambda: {
        "gap": 0, "node_gap": 0, "angle": 0, "start_end": 0, "length": 0,
    })
    duplicates: int = 0

    def as_dict(self) -> dict:
        return {
            "examined": self.examined,
            "accepted": self.accepted,
            "duplicates": self.duplicates,
            **{f"rejected_{k}": v for k, v in self.rejected.items()},
        }

    def balanced(self) -> bool:
        return self.examined == self.accepted + self.duplicates + sum(self.rejected.values())


@dataclass
class EdgeEntry:
    u: str
    v: str
    text: str
    record_id: str


@dataclass
class MixResult:
    records: list[CorpusRecord]
    tally: MixTally
    pool_sizes: dict


def build_edge_pools(records, lexicon: PosLexicon):
    """start/transition/end entry pools; filtered micro-instructions dropped.

    Start and end pools hold each record's first and last edge; the
    transition pool holds every usable edge, so an edge two records share at
    their seam (one's ending, the other's opening) can splice them together,
    with its text drawn at random among the sources.
    """
    start: list[EdgeEntry] = []
    trans: list[EdgeEntry] = []
    end: list[EdgeEntry] = []
    for r in records:
        micros = sorted(r.micro_instructions)
        n_edges = len(r.path) - 1
        for i, text in micros:
            if not filter_micro_instruction(text, lexicon):
                continue
            entry = EdgeEntry(r.path[i], r.path[i + 1], text, r.record_id)
            if i == 0:
                start.append(entry)
            if i == n_edges - 1:
                end.append(entry)
            trans.append(entry)
    return start, trans, end


def validate_candidate(nodes: list[str], house: House, cfg: PathMixConfig) -> str | None:
    """First failing criterion name for a candidate path, or None if valid."""
    pos = [house.positions[n] for n in nodes]
    k = len(nodes) - 1  # edge count
    for i in range(1, k - 1):  # edges not touching first/last node
        if float(np.linalg.norm(pos[i + 1] - pos[i])) > cfg.max_node_gap_m:
            return "gap"
    for i in range(k):
        if float(np.linalg.norm(pos[i + 1] - pos[i])) < cfg.min_node_gap_m:
            return "node_gap"
    max_change = 180.0 - cfg.min_loop_angle_deg
    for i in range(1, k):
        v1 = pos[i] - pos[i - 1]
        v2 = pos[i + 1] - pos[i]
        cosang = float(np.dot(v1, v2) / (np.linalg.norm(v1) * np.linalg.norm(v2)))
        change = math.degrees(math.acos(min(1.0, max(-1.0, cosang))))
        if change > max_change:
            return "angle"
    start_set = {nodes[0], nodes[1]}
    end_set = {nodes[-2], nodes[-1]}
    if start_set & end_set:
        return "start_end"
    if house.has_edge(nodes[0], nodes[-1]):
        return "start_end"
    total = house.path_length(nodes)
    if not (cfg.min_len_m <= total <= cfg.max_len_m):
        return "length"
    return None


def mix_paths(records: list[CorpusRecord], house: House, cfg: PathMixConfig,
              lexicon: PosLexicon, vocab: Vocabulary | None = None) -> list[CorpusRecord]:
    return mix_paths_detailed(records, house, cfg, lexicon, vocab).records


def mix_paths_detailed(records: list[CorpusRecord], house: House, cfg: PathMixConfig,
                       lexicon: PosLexicon, vocab: Vocabulary | None = None) -> MixResult:
    for r in records:
        if r.house_id != house.house_id:
            raise ValueError(f"record {r.record_id} is from {r.house_id}, not {house.house_id}")
    if vocab is None:
        toks: set[str] = set()
        for r in records:
            toks.update(tokenize(r.instruction))
        vocab = Vocabulary(toks)

    rng = np.random.default_rng(np.random.PCG64(cfg.seed))
    start_pool, trans_pool, end_pool = build_edge_pools(records, lexicon)
    pool_sizes = {"start": len(start_pool), "trans": len(trans_pool), "end": len(end_pool)}
    tally = MixTally()
    result: list[CorpusRecord] = []
    if not start_pool or not end_pool:
        return MixResult(result, tally, pool_sizes)

    start_edges = sorted({(e.u, e.v) for e in start_pool})
    trans_edges = sorted({(e.u, e.v) for e in trans_pool})
    end_edges = sorted({(e.u, e.v) for e in end_pool})
    trans_by_node: dict[str, list[tuple[str, str]]] = {}
    for u, v in trans_edges:
        trans_by_node.setdefault(u, []).append((u, v))
    end_by_node: dict[str, list[tuple[str, str]]] = {}
    for u, v in end_edges:
        end_by_node.setdefault(u, []).append((u, v))

    def texts_for(edge: tuple[str, str], pool: list[EdgeEntry]) -> list[str]:
        key = frozenset(edge)
        return [e.text for e in pool if frozenset((e.u, e.v)) == key]

    seen: set[tuple[str, ...]] = set()

    def emit(nodes: list[str]) -> bool:
        """Validate a closed candidate; returns False when max_pairs reached."""
        tally.examined += 1
        key = tuple(nodes)
        if key in seen:
            tally.duplicates += 1
            return True
        seen.add(key)
        fail = validate_candidate(nodes, house, cfg)
        if fail is not None:
            tally.rejected[fail] += 1
            return True
        k = len(nodes) - 1
        texts = []
        for i in range(k):
            edge = (nodes[i], nodes[i + 1])
            pool = start_pool if i == 0 else (end_pool if i == k - 1 else trans_pool)
            options = texts_for(edge, pool)
            texts.append(options[int(rng.integers(len(options)))])
        instruction = " ".join(texts)
        rec = CorpusRecord(
            record_id=f"{house.house_id}-mix{len(result):05d}",
            house_id=house.house_id,
            path=list(nodes),
            headings=step_headings(house, nodes),
            elevations=[0.0] * len(nodes),
            instruction=instruction,
            token_ids=vocab.encode(tokenize(instruction)),
            micro_instructions=[(i, t) for i, t in enumerate(texts)],
            provenance="mixed",
            path_length_m=house.path_length(nodes),
        )
        result.append(rec)
        tally.accepted += 1
        return cfg.max_pairs is None or len(result) < cfg.max_pairs

    def extend(nodes: list[str], length: float) -> bool:
        """Randomised DFS over transition edges; closes with end edges."""
        cur = nodes[-1]
        closures = [e for e in end_by_node.get(cur, []) if e[1] not in nodes]
        for j in rng.permutation(len(closures)):
            u, v = closures[int(j)]
            if length + house.edge_length(u, v) <= cfg.max_len_m + 1e-9:
                if not emit(nodes + [v]):
                    return False
        steps = [e for e in trans_by_node.get(cur, []) if e[1] not in nodes]
        for j in rng.permutation(len(steps)):
            u, v = steps[int(j)]
            d = house.edge_length(u, v)
            if length + d > cfg.max_len_m:
                continue
            if not extend(nodes + [v], length + d):
                return False
        return True

    for j in rng.permutation(len(start_edges)):
        u, v = start_edges[int(j)]
        if not extend([u, v], house.edge_length(u, v)):
            break

    return MixResult(result, tally, pool_sizes)
