"""Caption-style evaluation: corpus BLEU-4, ROUGE-L, CIDEr, a lite METEOR
variant, referral counting and the repeated-n-gram rate.

All metrics operate on token lists.  BLEU aggregates clipped counts over the
whole pair list before taking precisions (corpus-level); the others average
per pair.  METEOR-lite keeps exact + suffix-stem unigram alignment and the
chunk penalty but has no synonym or paraphrase tables, hence the name.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

from .errors import EmptyEval

_EPS = 1e-9


@dataclass
class EvalPair:
    candidate: list[str]
    references: list[list[str]]

    def __post_init__(self):
        if not self.references:
            raise EmptyEval("EvalPair needs at least one reference")


def _ngrams(tokens, n):
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


# ---------------------------------------------------------------------------
# BLEU-4


def bleu4(pairs: list[EvalPair]) -> float:
    if not pairs:
        raise EmptyEval("bleu4 needs at least one pair")
    clipped = [0] * 4
    totals = [0] * 4
    cand_len = 0
    ref_len = 0
    for pair in pairs:
        cand = pair.candidate
        cand_len += len(cand)
        # effective reference length: closest to the candidate, ties -> shorter
        ref_len += min((abs(len(r) - len(cand)), len(r)) for r in pair.references)[1]
        for n in range(1, 5):
            counts = _ngrams(cand, n)
            if not counts:
                continue
            max_ref = Counter()
            for ref in pair.references:
                for gram, c in _ngrams(ref, n).items():
                    max_ref[gram] = max(max_ref[gram], c)
            totals[n - 1] += sum(counts.values())
            clipped[n - 1] += sum(min(c, max_ref[g]) for g, c in counts.items())
    precisions = []
    for c, t in zip(clipped, totals):
        p = c / t if t else 0.0
        precisions.append(p if p > 0.0 else _EPS)
    log_mean = sum(math.log(p) for p in precisions) / 4.0
    bp = 1.0 if cand_len > ref_len else math.exp(1.0 - ref_len / max(cand_len, 1))
    return bp * math.exp(log_mean)


# ---------------------------------------------------------------------------
# ROUGE-L


def _lcs_len(a, b):
    m, n = len(a), len(b)
    dp = [0] * (n + 1)
    for i in range(1, m + 1):
        prev = 0
        for j in range(1, n + 1):
            cur = dp[j]
            if a[i - 1] == b[j - 1]:
                dp[j] = prev + 1
            else:
                dp[j] = max(dp[j], dp[j - 1])
            prev = cur
    return dp[n]


def rouge_l(pairs: list[EvalPair], beta: float = 1.2) -> float:
    if not pairs:
        raise EmptyEval("rouge_l needs at least one pair")
    scores = []
    for pair in pairs:
        best = 0.0
        for ref in pair.references:
            lcs = _lcs_len(pair.candidate, ref)
            if lcs == 0 or not pair.candidate or not ref:
                continue
            p = lcs / len(pair.candidate)
            r = lcs / len(ref)
            f = ((1 + beta**2) * p * r) / (r + beta**2 * p)
            best = max(best, f)
        scores.append(best)
    return sum(scores) / len(scores)


# ---------------------------------------------------------------------------
# CIDEr


class CiderScorer:
    """TF-IDF n-gram cosine (n = 1..4), x10; document = one reference set."""

    def __init__(self, corpus_refs: list[list[list[str]]]):
        if not corpus_refs:
            raise EmptyEval("cider needs reference sets to fit document frequencies")
        self.n_docs = len(corpus_refs)
        self.df = [Counter() for _ in range(4)]
        for refs in corpus_refs:
            for n in range(1, 5):
                seen = set()
                for ref in refs:
                    seen.update(_ngrams(ref, n).keys())
                for g in seen:
                    self.df[n - 1][g] += 1

    def _vec(self, tokens, n):
        tf = _ngrams(tokens, n)
        vec = {}
        for g, c in tf.items():
            idf = math.log(self.n_docs / max(1.0, self.df[n - 1][g]))
            vec[g] = c * idf
        return vec, tf

    @staticmethod
    def _cosine(va, vb, ta, tb):
        dot = sum(va[g] * vb.get(g, 0.0) for g in va)
        na = math.sqrt(sum(x * x for x in va.values()))
        nb = math.sqrt(sum(x * x for x in vb.values()))
        if na > 0 and nb > 0:
            return dot / (na * nb)
        # all-zero idf (e.g. single-document corpora): raw-count cosine
        dot = sum(ta[g] * tb.get(g, 0) for g in ta)
        na = math.sqrt(sum(x * x for x in ta.values()))
        nb = math.sqrt(sum(x * x for x in tb.values()))
        if na > 0 and nb > 0:
            return dot / (na * nb)
        return 0.0

    def score_pair(self, pair: EvalPair) -> float:
        total = 0.0
        for n in range(1, 5):
            vc, tc = self._vec(pair.candidate, n)
            sims = []
            for ref in pair.references:
                vr, tr = self._vec(ref, n)
                sims.append(self._cosine(vc, vr, tc, tr))
            total += sum(sims) / len(sims)
        return 10.0 * total / 4.0


def cider(pairs: list[EvalPair], corpus_refs: list[list[list[str]]] | None = None) -> float:
    if not pairs:
        raise EmptyEval("cider needs at least one pair")
    scorer = CiderScorer(corpus_refs if corpus_refs is not None else [p.references for p in pairs])
    return sum(scorer.score_pair(p) for p in pairs) / len(pairs)


# ---------------------------------------------------------------------------
# METEOR-lite


def _stem(word):
    if not isinstance(word, str):  # metrics also run over raw id sequences
        return word
    for suffix in ("ing", "ed", "es", "s"):
        if word.endswith(suffix) and len(word) - len(suffix) >= 3:
            return word[: -len(suffix)]
    return word


def _align(cand, ref):
    """One-to-one matches (cand_idx, ref_idx): exact pass then stem pass."""
    matches = []
    used_ref = [False] * len(ref)
    matched_cand = [False] * len(cand)
    for ci, w in enumerate(cand):
        for ri, r in enumerate(ref):
            if not used_ref[ri] and w == r:
                matches.append((ci, ri))
                used_ref[ri] = True
                matched_cand[ci] = True
                break
    for ci, w in enumerate(cand):
        if matched_cand[ci]:
            continue
        sw = _stem(w)
        for ri, r in enumerate(ref):
            if not used_ref[ri] and sw == _stem(r):
                matches.append((ci, ri))
                used_ref[ri] = True
                matched_cand[ci] = True
                break
    return sorted(matches)


def _chunks(matches) -> int:
    chunks = 0
    prev = None
    for ci, ri in matches:
        if prev is None or ci != prev[0] + 1 or ri != prev[1] + 1:
            chunks += 1
        prev = (ci, ri)
    return chunks


def meteor_lite(pairs: list[EvalPair]) -> float:
    if not pairs:
        raise EmptyEval("meteor_lite needs at least one pair")
    scores = []
    for pair in pairs:
        best = 0.0
        for ref in pair.references:
            matches = _align(pair.candidate, ref)
            m = len(matches)
            if m == 0:
                continue
            p = m / len(pair.candidate)
            r = m / len(ref)
            f_mean = 10.0 * p * r / (r + 9.0 * p)
            penalty = 0.5 * (_chunks(matches) / m) ** 3
            best = max(best, f_mean * (1.0 - penalty))
        scores.append(best)
    return sum(scores) / len(scores)


# ---------------------------------------------------------------------------
# referral counting and repetition rate


@dataclass
class ReferralLexicons:
    objects: set
    actions: set  # phrases, possibly multi-word
    stopwords: set

    def __post_init__(self):
        if not (self.objects and self.actions and self.stopwords):
            raise ValueError("referral lexicons must be non-empty")


@dataclass
class ReferralReport:
    n_instructions: int
    obj_total: int
    act_total: int
    nonstop_total: int

    def _fmt(self, total: int) -> str:
        if self.n_instructions == 0:
            return f"{total} (null)"
        return f"{total} ({total / self.n_instructions:.2f})"

    def format(self) -> str:
        return (
            f"Obj. {self._fmt(self.obj_total)}  "
            f"Act. {self._fmt(self.act_total)}  "
            f"NonStop {self._fmt(self.nonstop_total)}"
        )


def referral_counts(instructions: list[list[str]], lex: ReferralLexicons) -> ReferralReport:
    """Totals of object tokens, action phrases (longest match, non-overlapping)
    and non-stopword tokens, as `total (per-instruction mean)` rows."""
    phrases = sorted((p.split() for p in lex.actions), key=len, reverse=True)
    obj_total = act_total = nonstop_total = 0
    for tokens in instructions:
        obj_total += sum(1 for t in tokens if t in lex.objects)
        nonstop_total += sum(1 for t in tokens if t not in lex.stopwords)
        i = 0
        while i < len(tokens):
            hit = None
            for ph in phrases:
                if tokens[i : i + len(ph)] == ph:
                    hit = ph
                    break
            if hit:
                act_total += 1
                i += len(hit)
            else:
                i += 1
    return ReferralReport(len(instructions), obj_total, act_total, nonstop_total)


def repeat_ngram_rate(tokens: list[str], n: int = 4) -> float:
    """1 - distinct/total n-grams; 0.0 for sequences shorter than n."""
    total = len(tokens) - n + 1
    if total <= 0:
        return 0.0
    grams = [tuple(tokens[i : i + n]) for i in range(total)]
    return 1.0 - len(set(grams)) / total


# ---------------------------------------------------------------------------
# report


def eval_report(pairs: list[EvalPair], corpus_refs=None) -> dict:
    return {
        "bleu4": bleu4(pairs),
        "rougeL": rouge_l(pairs),
        "cider": cider(pairs, corpus_refs),
        "meteor_lite": meteor_lite(pairs),
        "n_pairs": len(pairs),
    }
