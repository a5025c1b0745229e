"""Path-mixing tests, including the independent validator and the exhaustive
edge-sequence oracle used to certify the randomized search on small graphs."""

import math

import numpy as np
import pytest

from navspeaker.corpus import (
    CorpusRecord, PathMixConfig, Vocabulary, build_edge_pools, default_lexicon,
    mix_paths, mix_paths_detailed, tokenize,
)
from navspeaker.envsim import House, PlacedObject, Room

from conftest import line_house


def make_record(rid, house, path, texts):
    return CorpusRecord(rid, house.house_id, list(path), [0.0] * len(path),
                        [0.0] * len(path), " ".join(texts), [],
                        list(enumerate(texts)), "silver", house.path_length(path))


GOOD = ["walk past the desk.", "enter the kitchen.", "leave the lounge and turn left.",
        "walk through the office and go straight.", "stop near the table."]


# ---------------------------------------------------------------------------
# an independent validator, written directly from the acceptance rules


def independent_validate(record, house, cfg):
    """Re-checks a mixed record against every mixing criterion from scratch."""
    nodes = record.path
    pos = [house.positions[n] for n in nodes]
    k = len(nodes) - 1
    if len(set(nodes)) != len(nodes):
        return "not-simple"
    for a, b in zip(nodes, nodes[1:]):
        if not house.has_edge(a, b):
            return "not-a-path"
    for i in range(1, k - 1):
        if np.linalg.norm(pos[i + 1] - pos[i]) > cfg.max_node_gap_m + 1e-12:
            return "criterion-1"
    for i in range(k):
        if np.linalg.norm(pos[i + 1] - pos[i]) < cfg.min_node_gap_m:
            return "min-gap"
    for i in range(1, k):
        v1, v2 = pos[i] - pos[i - 1], pos[i + 1] - pos[i]
        cosang = np.dot(v1, v2) / (np.linalg.norm(v1) * np.linalg.norm(v2))
        change = math.degrees(math.acos(max(-1.0, min(1.0, cosang))))
        if change > 180.0 - cfg.min_loop_angle_deg + 1e-9:
            return "criterion-2"
    if {nodes[0], nodes[1]} & {nodes[-2], nodes[-1]}:
        return "criterion-3"
    if house.has_edge(nodes[0], nodes[-1]):
        return "criterion-3"
    total = house.path_length(nodes)
    if not (cfg.min_len_m <= total <= cfg.max_len_m):
        return "length"
    return None


def exhaustive_paths(records, house, cfg, lexicon):
    """Brute-force enumeration of every valid start->trans*->end node tuple."""
    start_pool, trans_pool, end_pool = build_edge_pools(records, lexicon)
    starts = sorted({(e.u, e.v) for e in start_pool})
    trans = sorted({(e.u, e.v) for e in trans_pool})
    ends = sorted({(e.u, e.v) for e in end_pool})
    found = set()

    def walk(nodes, length):
        cur = nodes[-1]
        for u, v in ends:
            if u == cur and v not in nodes and length + house.edge_length(u, v) <= cfg.max_len_m:
                cand = nodes + [v]
                fake = CorpusRecord("x", house.house_id, cand, [0.0] * len(cand),
                                    [0.0] * len(cand), "", [], [], "mixed",
                                    house.path_length(cand))
                if independent_validate(fake, house, cfg) is None:
                    found.add(tuple(cand))
        for u, v in trans:
            if u == cur and v not in nodes:
                d = house.edge_length(u, v)
                if length + d <= cfg.max_len_m:
                    walk(nodes + [v], length + d)

    for u, v in starts:
        walk([u, v], house.edge_length(u, v))
    return found


# ---------------------------------------------------------------------------
# fixtures from the operation examples


def test_four_node_line_cross_combination():
    h = line_house(4, gap=2.0)
    r1 = make_record("r1", h, ["a", "b", "c"], [GOOD[0], GOOD[1]])
    r2 = make_record("r2", h, ["b", "c", "d"], [GOOD[2], GOOD[4]])
    cfg = PathMixConfig(seed=0)
    lex = default_lexicon()
    got = {tuple(r.path) for r in mix_paths([r1, r2], h, cfg, lex)}
    expect = exhaustive_paths([r1, r2], h, cfg, lex)
    assert got == expect == {("a", "b", "c", "d")}


def test_interior_gap_over_3m_rejected():
    h = line_house(5, gap=2.0)
    # stretch the middle edge beyond the gap bound
    h.positions["c"] = np.array([0.0, 8.0, 1.5])
    h.positions["d"] = np.array([0.0, 10.0, 1.5])
    h.positions["e"] = np.array([0.0, 12.0, 1.5])
    h.edges.clear()
    names = ["a", "b", "c", "d", "e"]
    for a, b in zip(names, names[1:]):
        h.edges[(a, b)] = float(np.linalg.norm(h.positions[a] - h.positions[b]))
    assert h.edges[("b", "c")] == 6.0  # illegal interior hop
    r1 = make_record("r1", h, ["a", "b", "c"], [GOOD[0], GOOD[1]])
    r2 = make_record("r2", h, ["c", "d", "e"], [GOOD[2], GOOD[4]])
    res = mix_paths_detailed([r1, r2], h, PathMixConfig(seed=0), default_lexicon())
    assert res.records == []
    assert res.tally.rejected["gap"] > 0


def test_start_sharing_node_with_end_rejected():
    h = line_house(3, gap=2.5)
    r1 = make_record("r1", h, ["a", "b"], [GOOD[0]])
    r2 = make_record("r2", h, ["b", "c"], [GOOD[4]])
    res = mix_paths_detailed([r1, r2], h, PathMixConfig(seed=0, min_len_m=1.0, max_len_m=20.0),
                             default_lexicon())
    assert res.records == []
    assert res.tally.rejected["start_end"] > 0


def test_reversal_angle_rejected():
    # a -> b -> a' style hairpin: build y-shaped graph with a near-reversal
    pos = {
        "a": np.array([0.0, 0.0, 1.5]),
        "b": np.array([0.0, 2.5, 1.5]),
        "c": np.array([0.3, 0.1, 1.5]),  # nearly back where we started
        "d": np.array([0.3, -2.4, 1.5]),
    }
    names = list(pos)
    edges = {}
    for a, b in [("a", "b"), ("b", "c"), ("c", "d")]:
        edges[tuple(sorted((a, b)))] = float(np.linalg.norm(pos[a] - pos[b]))
    rooms = [Room("r0", "kitchen", np.array([-50.0, -50.0, 0.0]), np.array([50.0, 50.0, 3.0]))]
    h = House("hairpin", names, pos, edges, rooms, [])
    r1 = make_record("r1", h, ["a", "b", "c"], [GOOD[0], GOOD[1]])
    r2 = make_record("r2", h, ["b", "c", "d"], [GOOD[2], GOOD[4]])
    cfg = PathMixConfig(seed=0, min_len_m=1.0, max_len_m=30.0)
    res = mix_paths_detailed([r1, r2], h, cfg, default_lexicon())
    assert res.tally.rejected["angle"] > 0
    for r in res.records:
        assert independent_validate(r, h, cfg) is None


def test_filtered_micros_never_enter_pools(lexicon):
    h = line_house(4, gap=2.0)
    r1 = make_record("r1", h, ["a", "b", "c"], ["wait there.", GOOD[1]])
    r2 = make_record("r2", h, ["b", "c", "d"], [GOOD[2], GOOD[4]])
    start, trans, end = build_edge_pools([r1, r2], lexicon)
    texts = [e.text for e in start + trans + end]
    assert "wait there." not in texts


def test_empty_pools_return_empty_list(lexicon):
    h = line_house(4, gap=2.0)
    r1 = make_record("r1", h, ["a", "b", "c"], ["wait there.", "wait there."])
    assert mix_paths([r1], h, PathMixConfig(seed=0), lexicon) == []


def test_mix_rejects_foreign_house(lexicon):
    h = line_house(4, gap=2.0)
    r1 = make_record("r1", h, ["a", "b", "c"], [GOOD[0], GOOD[1]])
    r1.house_id = "other-house"
    with pytest.raises(ValueError):
        mix_paths([r1], h, PathMixConfig(seed=0), lexicon)


def test_criterion4_selects_among_shared_edge_texts(lexicon):
    h = line_house(4, gap=2.0)
    r1 = make_record("r1", h, ["a", "b", "c"], [GOOD[0], GOOD[1]])
    r2 = make_record("r2", h, ["b", "c", "d"], [GOOD[2], GOOD[4]])
    seen = set()
    for seed in range(30):
        for r in mix_paths([r1, r2], h, PathMixConfig(seed=seed), lexicon):
            seen.add(r.micro_instructions[1][1])
    # the shared (b, c) edge carries r1's ending and r2's opening
    assert seen == {GOOD[1], GOOD[2]}


def test_mixed_records_have_consistent_fields(lexicon):
    h = line_house(4, gap=2.0)
    r1 = make_record("r1", h, ["a", "b", "c"], [GOOD[0], GOOD[1]])
    r2 = make_record("r2", h, ["b", "c", "d"], [GOOD[2], GOOD[4]])
    vocab = Vocabulary(t for r in (r1, r2) for t in tokenize(r.instruction))
    (rec,) = mix_paths([r1, r2], h, PathMixConfig(seed=1), lexicon, vocab)
    assert rec.provenance == "mixed"
    assert rec.token_ids == vocab.encode(tokenize(rec.instruction))
    assert len(rec.micro_instructions) == len(rec.path) - 1
    assert " ".join(t for _, t in rec.micro_instructions) == rec.instruction
    assert len(rec.headings) == len(rec.path)


def test_exhaustive_oracle_on_braided_graph(lexicon):
    # 6-node graph with parallel routes: randomized search must find exactly
    # the oracle set
    pos = {
        "a": np.array([0.0, 0.0, 1.5]),
        "b": np.array([0.0, 2.0, 1.5]),
        "c": np.array([1.5, 3.5, 1.5]),
        "d": np.array([-1.5, 3.6, 1.5]),
        "e": np.array([0.0, 5.2, 1.5]),
        "f": np.array([0.0, 7.4, 1.5]),
    }
    edges = {}
    for a, b in [("a", "b"), ("b", "c"), ("b", "d"), ("c", "e"), ("d", "e"), ("e", "f")]:
        edges[tuple(sorted((a, b)))] = float(np.linalg.norm(pos[a] - pos[b]))
    rooms = [Room("r0", "kitchen", np.array([-50.0, -50.0, 0.0]), np.array([50.0, 50.0, 3.0]))]
    h = House("braid", list(pos), pos, edges, rooms, [])
    r1 = make_record("r1", h, ["a", "b", "c", "e"], [GOOD[0], GOOD[1], GOOD[2]])
    r2 = make_record("r2", h, ["b", "d", "e", "f"], [GOOD[3], GOOD[1], GOOD[4]])
    cfg = PathMixConfig(seed=3)
    got = {tuple(r.path) for r in mix_paths([r1, r2], h, cfg, lexicon)}
    expect = exhaustive_paths([r1, r2], h, cfg, lexicon)
    assert got == expect
    assert expect  # the construction admits at least one mix


def test_property_sweep_on_generated_houses(house, silver_corpus, lexicon):
    records, vocab = silver_corpus
    violations = 0
    produced = 0
    for seed in range(40):
        cfg = PathMixConfig(seed=seed, max_pairs=10)
        for rec in mix_paths(records, house, cfg, lexicon, vocab):
            produced += 1
            if independent_validate(rec, house, cfg) is not None:
                violations += 1
            assert 5.0 <= rec.path_length_m <= 20.0
    assert violations == 0
    assert produced > 0


def test_tally_accounting_identity(house, silver_corpus, lexicon):
    records, vocab = silver_corpus
    for seed in range(10):
        res = mix_paths_detailed(records, house, PathMixConfig(seed=seed), lexicon, vocab)
        assert res.tally.balanced()


def test_max_pairs_zero_is_vacuous(house, silver_corpus, lexicon):
    records, vocab = silver_corpus
    res = mix_paths_detailed(records, house, PathMixConfig(seed=0, max_pairs=0),
                             lexicon, vocab)
    assert res.records == []


def test_config_validation():
    with pytest.raises(ValueError):
        PathMixConfig(min_len_m=10.0, max_len_m=5.0)
    with pytest.raises(ValueError):
        PathMixConfig(max_node_gap_m=-1.0)
