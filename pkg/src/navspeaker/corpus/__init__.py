from .text import (
    PAD_ID, BOS_ID, EOS_ID, UNK_ID,
    Vocabulary, PosLexicon, default_lexicon,
    tokenize, check_verb, extract_action_phrases, filter_micro_instruction,
)
from .records import (
    CorpusRecord, StatsReport, corpus_stats, split_vocab_overlap,
    record_from_silver, read_jsonl, write_jsonl, step_headings,
)
from .mixing import PathMixConfig, MixResult, MixTally, mix_paths, mix_paths_detailed, build_edge_pools, validate_candidate
from .alignment import build_alignment

__all__ = [
    "PAD_ID", "BOS_ID", "EOS_ID", "UNK_ID",
    "Vocabulary", "PosLexicon", "default_lexicon",
    "tokenize", "check_verb", "extract_action_phrases", "filter_micro_instruction",
    "CorpusRecord", "StatsReport", "corpus_stats", "split_vocab_overlap",
    "record_from_silver", "read_jsonl", "write_jsonl", "step_headings",
    "PathMixConfig", "MixResult", "MixTally", "mix_paths", "mix_paths_detailed",
    "build_edge_pools", "validate_candidate", "build_alignment",
]
