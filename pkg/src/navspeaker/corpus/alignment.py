"""Ground-truth token/viewpoint alignment matrices for the alignment loss.

Row p marks decode position p (instruction tokens then the EOS step, all
zeros); column i is the source viewpoint of path edge i.  A token is aligned
to its edge's source viewpoint only when the action-phrase mask covers it.
"""

from __future__ import annotations

import numpy as np

from ..errors import SegmentationError
from .records import CorpusRecord
from .text import PosLexicon, extract_action_phrases, tokenize


def build_alignment(record: CorpusRecord, lexicon: PosLexicon) -> np.ndarray:
    tokens = tokenize(record.instruction)
    micros = sorted(record.micro_instructions)
    n_views = len(record.path)
    if [i for i, _ in micros] != list(range(n_views - 1)):
        raise SegmentationError(
            f"{record.record_id}: micro-instruction indices do not cover edges 0..{n_views - 2}"
        )
    segments = [tokenize(t) for _, t in micros]
    flat = [t for seg in segments for t in seg]
    if flat != tokens:
        raise SegmentationError(
            f"{record.record_id}: segment concatenation does not match instruction tokens"
        )
    _, mask = extract_action_phrases(tokens, lexicon)
    a_gt = np.zeros((len(tokens) + 1, n_views), dtype=np.float32)
    pos = 0
    for edge_idx, seg in enumerate(segments):
        for k in range(len(seg)):
            if mask[pos + k]:
                a_gt[pos + k, edge_idx] = 1.0
        pos += len(seg)
    return a_gt
