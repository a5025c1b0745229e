"""Corpus records, JSON-lines serialization, corpus statistics and
vocabulary-overlap reports."""

from __future__ import annotations

import json
from dataclasses import dataclass

from ..envsim import House, SilverSample, bearing_deg
from ..errors import EmptyCorpus
from .text import Vocabulary, tokenize

PROVENANCES = ("original", "mixed", "silver")


@dataclass
class CorpusRecord:
    record_id: str
    house_id: str
    path: list[str]
    headings: list[float]  # degrees, one per viewpoint
    elevations: list[float]
    instruction: str
    token_ids: list[int]
    micro_instructions: list[tuple[int, str]]
    provenance: str
    path_length_m: float

    def to_dict(self) -> dict:
        return {
            "record_id": self.record_id,
            "house_id": self.house_id,
            "path": list(self.path),
            "headings": [float(h) for h in self.headings],
            "elevations": [float(e) for e in self.elevations],
            "instruction": self.instruction,
            "token_ids": [int(t) for t in self.token_ids],
            "micro_instructions": [[int(i), t] for i, t in self.micro_instructions],
            "provenance": self.provenance,
            "path_length_m": float(self.path_length_m),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CorpusRecord":
        return cls(
            record_id=d["record_id"],
            house_id=d["house_id"],
            path=list(d["path"]),
            headings=[float(h) for h in d["headings"]],
            elevations=[float(e) for e in d["elevations"]],
            instruction=d["instruction"],
            token_ids=[int(t) for t in d["token_ids"]],
            micro_instructions=[(int(i), t) for i, t in d["micro_instructions"]],
            provenance=d["provenance"],
            path_length_m=float(d["path_length_m"]),
        )


def step_headings(house: House, path: list[str]) -> list[float]:
    """Agent heading (deg) on arrival at each viewpoint; start faces edge 0."""
    bearings = [
        bearing_deg(house.positions[a], house.positions[b])
        for a, b in zip(path, path[1:])
    ]
    return [bearings[0]] + bearings


def record_from_silver(sample: SilverSample, house: House, vocab: Vocabulary,
                       record_id: str, provenance: str = "silver") -> CorpusRecord:
    if provenance not in PROVENANCES:
        raise ValueError(f"bad provenance {provenance}")
    return CorpusRecord(
        record_id=record_id,
        house_id=sample.house_id,
        path=list(sample.path),
        headings=step_headings(house, sample.path),
        elevations=[0.0] * len(sample.path),
        instruction=sample.instruction,
        token_ids=vocab.encode(tokenize(sample.instruction)),
        micro_instructions=list(sample.micro_instructions),
        provenance=provenance,
        path_length_m=house.path_length(sample.path),
    )


def write_jsonl(path, records) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r.to_dict(), sort_keys=True, separators=(",", ":")) + "\n")


def read_jsonl(path) -> list[CorpusRecord]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(CorpusRecord.from_dict(json.loads(line)))
    return out


@dataclass
class StatsReport:
    pair_count: int
    mean_views: float
    mean_path_len_m: float
    mean_words: float

    def format(self) -> str:
        return (
            f"{self.pair_count} pairs, {self.mean_views:.2f} views per trajectory, "
            f"mean path length {self.mean_path_len_m:.1f}m, about {self.mean_words:.0f} words"
        )


def corpus_stats(records) -> StatsReport:
    records = list(records)
    if not records:
        raise EmptyCorpus("corpus_stats needs at least one record")
    n = len(records)
    return StatsReport(
        pair_count=n,
        mean_views=sum(len(r.path) for r in records) / n,
        mean_path_len_m=sum(r.path_length_m for r in records) / n,
        mean_words=sum(len(tokenize(r.instruction)) for r in records) / n,
    )


def split_vocab_overlap(tokens_a, tokens_b) -> dict:
    """Unique-token overlap between two splits; ratios None when disjoint."""
    sa, sb = set(tokens_a), set(tokens_b)
    common = len(sa & sb)
    only_a = len(sa - sb)
    only_b = len(sb - sa)
    return {
        "common": common,
        "only_a": only_a,
        "only_b": only_b,
        "ratio_a": (only_a / common) if common else None,
        "ratio_b": (only_b / common) if common else None,
    }
