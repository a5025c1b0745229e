"""Supervised training: language-model, unlikelihood and temporal-alignment
losses mixed 2:1:1, teacher or student forcing, the training loop with
periodic evaluation, JSON-lines logging and archive checkpoints.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .corpus.alignment import build_alignment
from .corpus.records import CorpusRecord
from .corpus.text import EOS_ID, PosLexicon, Vocabulary
from .errors import EmptyBatch, ShapeError
from .features import FeatureExtractor, TrajectoryFeatures
from .metrics import EvalPair, eval_report
from .model import EncoderOutput, SpeakerModel
from .nn import tensor as T
from .nn.optim import AdamW, clip_global_norm
from .nn.tensor import Tensor


@dataclass
class TrainConfig:
    batch_size: int = 8
    lr: float = 5e-4
    iterations: int = 5000
    weights: tuple[float, float, float] = (2.0, 1.0, 1.0)  # lm : uls : tal
    forcing: str = "teacher"  # teacher | student
    seed: int = 1
    eval_interval: int = 500
    checkpoint_interval: int = 0  # 0: only the final checkpoint
    uls_window: int = 0  # repetition context window; 0 = full prefix
    grad_clip: float = 5.0
    weight_decay: float = 0.01
    early_stop_bleu: float | None = None
    temperature: float = 1.0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if any(w < 0 for w in self.weights):
            raise ValueError("loss weights must be >= 0")
        if self.forcing not in ("teacher", "student"):
            raise ValueError(f"unknown forcing mode {self.forcing}")


@dataclass
class LossBreakdown:
    lm: float
    uls: float
    tal: float
    total: float
    token_count: int

    def consistent(self, weights) -> bool:
        mixed = weights[0] * self.lm + weights[1] * self.uls + weights[2] * self.tal
        return abs(mixed - self.total) <= 1e-6 * max(1.0, abs(mixed))


# ---------------------------------------------------------------------------
# losses (graph tensors in, graph scalar out)


def loss_lm(logits: Tensor, targets: list[int], mask: list[bool] | None = None) -> Tensor:
    """Mean negative log-likelihood of the targets over unmasked positions."""
    n = logits.shape[0]
    if len(targets) != n:
        raise ShapeError(f"{n} logit rows vs {len(targets)} targets")
    mask = [True] * n if mask is None else mask
    keep = [i for i in range(n) if mask[i]]
    if not keep:
        raise EmptyBatch("all positions masked")
    logp = T.log_softmax(logits, axis=-1)
    picked = T.pick(logp, keep, [targets[i] for i in keep])
    return T.neg(T.tmean(picked))


def loss_uls(logits: Tensor, history: list[int], targets: list[int],
             window: int = 0) -> Tensor:
    """Unlikelihood of repeated-token candidates.

    history[t] is the token consumed after position t finishes (gold under
    teacher forcing, the model's sample under student forcing); candidates at
    position t are the distinct history tokens in the trailing ``window``
    (everything when 0), minus the position's target.
    """
    n = logits.shape[0]
    rows, cols = [], []
    for t in range(n):
        prefix = history[:t]
        if window > 0:
            prefix = prefix[-window:]
        for c in set(prefix) - {targets[t]}:
            rows.append(t)
            cols.append(c)
    if not rows:
        return Tensor(np.zeros((), dtype=logits.dtype))
    probs = T.softmax(logits, axis=-1)
    p = T.clamp(T.pick(probs, rows, cols), hi=1.0 - 1e-7)
    per_candidate = T.neg(T.log(T.add(T.neg(p), 1.0)))
    return T.mul(T.tsum(per_candidate), 1.0 / n)


def loss_tal(attention: Tensor, a_gt: np.ndarray) -> Tensor:
    """Binary cross-entropy between decoder attention and the ground-truth
    alignment, averaged over rows that carry at least one alignment."""
    if tuple(attention.shape) != tuple(a_gt.shape):
        raise ShapeError(f"attention {attention.shape} vs alignment {a_gt.shape}")
    row_mask = a_gt.sum(axis=1) > 0
    n_rows = int(row_mask.sum())
    if n_rows == 0:
        return Tensor(np.zeros((), dtype=attention.dtype))
    a = T.clamp(attention, 1e-7, 1.0 - 1e-7)
    g = Tensor(a_gt.astype(attention.dtype))
    bce = T.neg(T.add(T.mul(g, T.log(a)),
                      T.mul(T.add(T.neg(g), 1.0), T.log(T.add(T.neg(a), 1.0)))))
    m = Tensor((row_mask.astype(attention.dtype))[:, None])
    return T.mul(T.tsum(T.mul(bce, m)), 1.0 / (n_rows * a_gt.shape[1]))


# ---------------------------------------------------------------------------
# batches


@dataclass
class TrainExample:
    record: CorpusRecord
    traj: TrajectoryFeatures
    gold_ids: list[int]
    a_gt: np.ndarray  # (len(gold)+1, T)


def prepare_examples(records, houses: dict, fx: FeatureExtractor,
                     lexicon: PosLexicon) -> list[TrainExample]:
    out = []
    for r in records:
        house = houses[r.house_id]
        traj = fx.trajectory(house, r.path, headings=r.headings)
        out.append(TrainExample(r, traj, list(r.token_ids), build_alignment(r, lexicon)))
    return out


def _example_losses(model: SpeakerModel, ex: TrainExample, cfg: TrainConfig,
                    rng: np.random.Generator):
    enc = model.encode(ex.traj)
    targets = ex.gold_ids + [EOS_ID]
    if cfg.forcing == "teacher":
        logits, attn = model.forward_teacher(enc, ex.gold_ids)
        history = ex.gold_ids
    else:
        logits, attn, sampled = model.forward_student(enc, ex.gold_ids, rng, cfg.temperature)
        history = sampled[:-1]
    lm = loss_lm(logits, targets)
    uls = loss_uls(logits, history, targets, cfg.uls_window)
    tal = loss_tal(attn, ex.a_gt)
    return lm, uls, tal, len(targets)


def batch_loss(model: SpeakerModel, batch: list[TrainExample], cfg: TrainConfig,
               rng: np.random.Generator):
    """(total, lm, uls, tal, token_count) graph tensors averaged over the batch."""
    lm_terms, uls_terms, tal_terms = [], [], []
    tokens = 0
    for ex in batch:
        lm, uls, tal, n = _example_losses(model, ex, cfg, rng)
        lm_terms.append(lm)
        uls_terms.append(uls)
        tal_terms.append(tal)
        tokens += n
    k = 1.0 / len(batch)
    lm = T.mul(_sum(lm_terms), k)
    uls = T.mul(_sum(uls_terms), k)
    tal = T.mul(_sum(tal_terms), k)
    w = cfg.weights
    total = T.add(T.add(T.mul(lm, w[0]), T.mul(uls, w[1])), T.mul(tal, w[2]))
    return total, lm, uls, tal, tokens


def _sum(terms):
    acc = terms[0]
    for t in terms[1:]:
        acc = T.add(acc, t)
    return acc


def train_step(model: SpeakerModel, opt: AdamW, batch: list[TrainExample],
               cfg: TrainConfig, rng: np.random.Generator) -> LossBreakdown:
    opt.zero_grad()
    total, lm, uls, tal, tokens = batch_loss(model, batch, cfg, rng)
    breakdown = LossBreakdown(lm.item(), uls.item(), tal.item(), total.item(), tokens)
    total.backward()
    clip_global_norm(opt.params, cfg.grad_clip)
    opt.step()
    return breakdown


# ---------------------------------------------------------------------------
# evaluation and the fit loop


def evaluate(model: SpeakerModel, examples: list[TrainExample],
             max_len: int | None = None) -> dict:
    """Greedy-decode metrics against each example's reference token ids."""
    pairs = []
    for ex in examples:
        out = model.generate(ex.traj, "greedy", max_len=max_len)
        pairs.append(EvalPair(list(out.ids), [list(ex.gold_ids)]))
    return eval_report(pairs)


@dataclass
class FitResult:
    checkpoints: list[str]
    log_path: str
    final_eval: dict | None
    loss_history: list[LossBreakdown] = field(default_factory=list)


def fit(model: SpeakerModel, train_examples: list[TrainExample], cfg: TrainConfig,
        out_dir, eval_examples: list[TrainExample] | None = None) -> FitResult:
    """Seeded shuffled-batch training with periodic evaluation.

    Writes ckpt_{iter}.archive checkpoints plus a metrics.jsonl log with one
    line per iteration ({iter, lm, uls, tal, total} and eval scores on
    evaluation iterations).
    """
    os.makedirs(out_dir, exist_ok=True)
    rng = np.random.default_rng(np.random.PCG64(cfg.seed))
    log_path = os.path.join(out_dir, "metrics.jsonl")
    checkpoints: list[str] = []
    history: list[LossBreakdown] = []
    eval_set = eval_examples if eval_examples else train_examples
    final_eval = None

    opt = AdamW(model.trainable_parameters(), lr=cfg.lr, weight_decay=cfg.weight_decay)
    with open(log_path, "w", encoding="utf-8") as log:
        for it in range(1, cfg.iterations + 1):
            idx = rng.choice(len(train_examples),
                             size=min(cfg.batch_size, len(train_examples)), replace=False)
            batch = [train_examples[int(i)] for i in idx]
            breakdown = train_step(model, opt, batch, cfg, rng)
            history.append(breakdown)
            line = {"iter": it, "lm": breakdown.lm, "uls": breakdown.uls,
                    "tal": breakdown.tal, "total": breakdown.total}
            stop = False
            if cfg.eval_interval and (it % cfg.eval_interval == 0 or it == cfg.iterations):
                final_eval = evaluate(model, eval_set)
                line["eval"] = final_eval
                if cfg.early_stop_bleu is not None and final_eval["bleu4"] >= cfg.early_stop_bleu:
                    stop = True
            log.write(json.dumps(line) + "\n")
            if cfg.checkpoint_interval and it % cfg.checkpoint_interval == 0:
                p = os.path.join(out_dir, f"ckpt_{it}.archive")
                model.save_checkpoint(p)
                checkpoints.append(p)
            if stop:
                break
    final = os.path.join(out_dir, f"ckpt_{len(history)}.archive")
    model.save_checkpoint(final)
    if final not in checkpoints:
        checkpoints.append(final)
    return FitResult(checkpoints, log_path, final_eval, history)
