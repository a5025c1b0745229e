"""Tokenisation, vocabulary, the rule lexicon and action-phrase extraction.

The tagger is lexicon-driven: a closed word -> tag table whose tag classes
are TRANVERB, DITRANVERB, INTRANVERB, NOUN, ADV, ADP, INTJ, DET and OTHER;
unknown words fall back to OTHER.  Action phrases join a typ-class word with
a following pos-class word into a bigram, or emit a lone non-NOUN verb.
"""

from __future__ import annotations

from .. import envsim
from ..errors import VocabError

PAD_ID, BOS_ID, EOS_ID, UNK_ID = 0, 1, 2, 3
PAD, BOS, EOS, UNK = "<pad>", "<bos>", "<eos>", "<unk>"

_PUNCT = ".,!?;"

TAGS = ("TRANVERB", "DITRANVERB", "INTRANVERB", "NOUN", "ADV", "ADP", "INTJ", "DET", "OTHER")
VERB_TAGS = frozenset({"TRANVERB", "DITRANVERB", "INTRANVERB"})
L_TYP = frozenset({"TRANVERB", "DITRANVERB", "INTRANVERB", "NOUN"})
L_POS = frozenset({"ADV", "ADP", "INTJ", "DET", "INTRANVERB"})


def tokenize(text: str) -> list[str]:
    """Lowercase, whitespace split, trailing .,!?; detached as own tokens."""
    out: list[str] = []
    for raw in text.lower().split():
        tail: list[str] = []
        while len(raw) > 1 and raw[-1] in _PUNCT:
            tail.append(raw[-1])
            raw = raw[:-1]
        out.append(raw)
        out.extend(reversed(tail))
    return out


class Vocabulary:
    """token <-> id map with reserved ids PAD=0, BOS=1, EOS=2, UNK=3."""

    def __init__(self, tokens=()):
        self._id_of: dict[str, int] = {}
        self._tokens: list[str] = []
        for t in sorted(set(tokens)):
            self.add(t)

    def add(self, token: str) -> int:
        token = token.lower()
        if token in self._id_of:
            return self._id_of[token]
        tid = len(self._tokens) + 4
        self._id_of[token] = tid
        self._tokens.append(token)
        return tid

    def __len__(self) -> int:
        return len(self._tokens) + 4

    def __contains__(self, token: str) -> bool:
        return token in self._id_of

    def id_of(self, token: str) -> int:
        return self._id_of.get(token.lower(), UNK_ID)

    def token_of(self, tid: int) -> str:
        if tid == PAD_ID:
            return PAD
        if tid == BOS_ID:
            return BOS
        if tid == EOS_ID:
            return EOS
        if tid == UNK_ID:
            return UNK
        if not 4 <= tid < len(self):
            raise VocabError(f"id {tid} outside vocabulary of size {len(self)}")
        return self._tokens[tid - 4]

    def encode(self, tokens: list[str]) -> list[int]:
        return [self.id_of(t) for t in tokens]

    def decode(self, ids) -> list[str]:
        return [self.token_of(int(i)) for i in ids if int(i) not in (PAD_ID, BOS_ID, EOS_ID)]

    def tokens(self) -> list[str]:
        return list(self._tokens)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for t in self._tokens:
                fh.write(t + "\n")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        v = cls()
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if line:
                    v.add(line)
        return v


class PosLexicon:
    """Closed word -> tag table; unknown words are OTHER."""

    def __init__(self, mapping: dict[str, str]):
        for w, t in mapping.items():
            if t not in TAGS:
                raise ValueError(f"unknown tag {t} for word {w}")
        self._map = {w.lower(): t for w, t in mapping.items()}

    def tag(self, word: str) -> str:
        return self._map.get(word.lower(), "OTHER")

    def words(self) -> dict[str, str]:
        return dict(self._map)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for w in sorted(self._map):
                fh.write(f"{w}\t{self._map[w]}\n")

    @classmethod
    def load(cls, path) -> "PosLexicon":
        mapping = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if not line:
                    continue
                w, t = line.split("\t")
                mapping[w] = t
        return cls(mapping)


def default_lexicon() -> PosLexicon:
    """Tags for the template bank plus common navigation words."""
    mapping: dict[str, str] = {}
    for w in ("walk", "enter", "leave", "exit", "pass", "cross", "climb"):
        mapping[w] = "TRANVERB"
    for w in ("take", "give", "bring"):
        mapping[w] = "DITRANVERB"
    for w in ("go", "turn", "stop", "wait", "head", "continue", "proceed", "stand"):
        mapping[w] = "INTRANVERB"
    for w in envsim.CATEGORY_VOCAB:
        mapping[w] = "NOUN"
    for w in envsim.ROOM_LABELS:
        mapping[w] = "NOUN"
    for w in ("stairs", "step", "door", "doorway", "wall", "floor", "room", "hall",
              "top", "bottom", "end", "corner", "entrance"):
        mapping[w] = "NOUN"
    for w in ("left", "right", "straight", "ahead", "forward", "around", "back",
              "upstairs", "downstairs", "there", "here"):
        mapping[w] = "ADV"
    for w in ("past", "toward", "towards", "through", "into", "at", "near", "by",
              "up", "down", "to", "from", "of", "on", "in", "out", "along", "across"):
        mapping[w] = "ADP"
    for w in ("please", "okay"):
        mapping[w] = "INTJ"
    for w in ("the", "a", "an", "this", "that"):
        mapping[w] = "DET"
    for w in ("and", "then", "when", "until", ".", ",", "!", "?", ";"):
        mapping[w] = "OTHER"
    return PosLexicon(mapping)


def check_verb(word: str, lexicon: PosLexicon) -> str:
    """Tag lookup used by the phrase extractor; OTHER for unknown words."""
    return lexicon.tag(word)


def extract_action_phrases(tokens: list[str], lexicon: PosLexicon):
    """Action phrases (1-2 tokens each) plus a per-token coverage mask.

    Adjacent pair scan: a typ-class word followed by a pos-class word joins
    into a bigram (consuming both, so phrases never overlap); a typ-class
    non-NOUN word with a non-matching successor stands alone.
    """
    n = len(tokens)
    phrases: list[list[str]] = []
    mask = [False] * n
    j = 0
    while j < n - 1:
        c1 = check_verb(tokens[j], lexicon)
        if c1 in L_TYP:
            c2 = check_verb(tokens[j + 1], lexicon)
            if c2 in L_POS:
                phrases.append([tokens[j], tokens[j + 1]])
                mask[j] = mask[j + 1] = True
                j += 2
                continue
            if c1 != "NOUN":
                phrases.append([tokens[j]])
                mask[j] = True
        j += 1
    return phrases, mask


def filter_micro_instruction(text: str, lexicon: PosLexicon) -> bool:
    """Keep only micro-instructions carrying both a verb-class word and a NOUN."""
    tags = [check_verb(t, lexicon) for t in tokenize(text)]
    return any(t in VERB_TAGS for t in tags) and "NOUN" in tags
