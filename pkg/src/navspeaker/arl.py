"""Adversarial reward learning: CNN and GRU reward models over embedded
instructions plus the encoder's visual summary, a Boltzmann normaliser over
in-batch rewards, binary-discrimination reward updates, REINFORCE policy
updates with an EMA baseline, and the alternating training loop.

Phase isolation is strict: the reward phase touches only reward parameters
(speaker rollouts and visual summaries are taken without graph), and the
policy phase treats rewards as constants.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .corpus.text import EOS_ID, Vocabulary
from .features import EmbeddingTable
from .model import SpeakerModel
from .nn import tensor as T
from .nn.archive import save_archive
from .nn.layers import Conv1dSeq, GRUCell, Linear, Module
from .nn.optim import AdamW, clip_global_norm
from .nn.tensor import Tensor
from .train import TrainConfig, TrainExample, batch_loss


@dataclass
class RewardModelConfig:
    kind: str = "gru"  # cnn | gru
    g_dim: int = 24
    visual_dim: int = 64  # encoder panoramic state size (d_h)
    filters: int = 16
    widths: tuple[int, ...] = (3, 4, 5)
    hidden: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("cnn", "gru"):
            raise ValueError(f"unknown reward model kind {self.kind}")
        if min(self.g_dim, self.visual_dim, self.filters, self.hidden) < 1:
            raise ValueError("reward model dims must be positive")


@dataclass
class ArlConfig:
    period: int = 100
    lambda_arl: float = 1.0
    baseline_decay: float = 0.95
    inner_steps: int = 1
    iterations: int = 1000
    seed: int = 0
    temperature: float = 1.0
    max_sample_len: int = 60

    def __post_init__(self):
        if self.period < 1:
            raise ValueError("alternation period must be >= 1")


class RewardCNN(Module):
    """Sigmoid score from width-{3,4,5} convolutions over the embedded
    instruction concatenated with a projection of the visual summary."""

    def __init__(self, cfg: RewardModelConfig, dtype=np.float32):
        rng = np.random.default_rng(np.random.PCG64(cfg.seed))
        self.cfg = cfg
        self.conv = Conv1dSeq(cfg.g_dim, cfg.filters, cfg.widths, rng, dtype)
        self.w_o = Linear(cfg.visual_dim, cfg.hidden, rng, dtype)
        self.head = Linear(cfg.filters * len(cfg.widths) + cfg.hidden, 1, rng, dtype)

    def __call__(self, instr_emb: Tensor, o_summary: Tensor) -> Tensor:
        text = self.conv(instr_emb)
        vis = self.w_o(o_summary)
        return T.sigmoid(self.head(T.concat([text, vis], axis=1)))

    def min_length(self) -> int:
        return max(self.cfg.widths)


class RewardGRU(Module):
    """Sigmoid score from a GRU over the embedded instruction concatenated
    with a projection of the average-pooled per-step visual states."""

    def __init__(self, cfg: RewardModelConfig, dtype=np.float32):
        rng = np.random.default_rng(np.random.PCG64(cfg.seed))
        self.cfg = cfg
        self.gru = GRUCell(cfg.g_dim, cfg.hidden, rng, dtype)
        self.w_o = Linear(cfg.visual_dim, cfg.hidden, rng, dtype)
        self.head = Linear(2 * cfg.hidden, 1, rng, dtype)

    def __call__(self, instr_emb: Tensor, o_states: Tensor) -> Tensor:
        h = self.gru.zero_state(1, instr_emb.dtype)
        for t in range(instr_emb.shape[0]):
            h = self.gru(T.gather_rows(instr_emb, [t]), h)
        vis = self.w_o(T.tmean(o_states, axis=0, keepdims=True))
        return T.sigmoid(self.head(T.concat([h, vis], axis=1)))

    def min_length(self) -> int:
        return 1


def build_reward_model(cfg: RewardModelConfig, dtype=np.float32) -> Module:
    return RewardCNN(cfg, dtype) if cfg.kind == "cnn" else RewardGRU(cfg, dtype)


def boltzmann(rewards) -> np.ndarray:
    """Softmax of rewards over the candidate set (in-batch partition)."""
    r = np.asarray(rewards, dtype=np.float64)
    if r.size == 0:
        raise ValueError("boltzmann needs at least one reward")
    e = np.exp(r - r.max())
    return e / e.sum()


def vocab_embedding_matrix(table: EmbeddingTable, vocab: Vocabulary) -> np.ndarray:
    """(V, G) rows of the frozen table aligned with vocabulary ids."""
    rows = [table.vec("<pad>"), table.vec("<bos>"), table.vec("<eos>"), table.vec("<unk>")]
    rows += [table.vec(t) for t in vocab.tokens()]
    return np.stack(rows, axis=0)


def _embed_ids(ids: list[int], embed_matrix: np.ndarray, min_len: int, dtype) -> Tensor:
    """Embedded token rows (EOS appended), zero-padded up to min_len."""
    full = list(ids) + [EOS_ID]
    emb = embed_matrix[np.asarray(full, dtype=np.intp)]
    if emb.shape[0] < min_len:
        pad = np.zeros((min_len - emb.shape[0], emb.shape[1]))
        emb = np.concatenate([emb, pad], axis=0)
    return Tensor(emb.astype(dtype))


def _visual_input(reward_model: Module, enc, detach: bool) -> Tensor:
    states = enc.o_summary if isinstance(reward_model, RewardCNN) else enc.h_v_mat
    return Tensor(states.data.copy()) if detach else states


def reward_score(reward_model: Module, ids: list[int], enc, embed_matrix: np.ndarray,
                 dtype=np.float32) -> Tensor:
    emb = _embed_ids(ids, embed_matrix, reward_model.min_length(), dtype)
    return reward_model(emb, _visual_input(reward_model, enc, detach=True))


# ---------------------------------------------------------------------------
# phases


def reward_phase(speaker: SpeakerModel, reward_model: Module, opt_r: AdamW,
                 batch: list[TrainExample], embed_matrix: np.ndarray,
                 arl_cfg: ArlConfig, rng: np.random.Generator,
                 grad_clip: float = 5.0) -> dict:
    """One binary-discrimination step on the reward parameters only.

    Real instructions take target 1, speaker samples target 0; returns the
    BCE plus mean real/fake scores.
    """
    dt = np.float32
    real_scores, fake_scores = [], []
    with T.no_grad():
        encs = [speaker.encode(ex.traj) for ex in batch]
        fakes = [
            speaker.generate(enc, "sample", temperature=arl_cfg.temperature,
                             rng=rng, max_len=arl_cfg.max_sample_len).ids
            for enc in encs
        ]
    terms = []
    for ex, enc, fake_ids in zip(batch, encs, fakes):
        r_real = reward_score(reward_model, ex.gold_ids, enc, embed_matrix, dt)
        r_fake = reward_score(reward_model, fake_ids, enc, embed_matrix, dt)
        real_scores.append(r_real.item())
        fake_scores.append(r_fake.item())
        r_real = T.clamp(r_real, 1e-7, 1.0 - 1e-7)
        r_fake = T.clamp(r_fake, 1e-7, 1.0 - 1e-7)
        terms.append(T.neg(T.add(T.log(r_real), T.log(T.add(T.neg(r_fake), 1.0)))))
    loss = T.mul(_sum(terms), 1.0 / (2.0 * len(terms)))  # mean over 2N decisions
    opt_r.zero_grad()
    loss.backward()
    clip_global_norm(opt_r.params, grad_clip)
    opt_r.step()
    return {
        "bce": loss.item(),
        "mean_reward_real": float(np.mean(real_scores)),
        "mean_reward_fake": float(np.mean(fake_scores)),
    }


def policy_phase(speaker: SpeakerModel, reward_fn, opt_s: AdamW,
                 batch: list[TrainExample], train_cfg: TrainConfig,
                 arl_cfg: ArlConfig, baseline: float | None,
                 rng: np.random.Generator) -> dict:
    """Supervised total plus REINFORCE on sampled sequences, speaker params only.

    ``reward_fn(ids, enc) -> float`` scores a sampled instruction; the
    advantage is that score minus the EMA baseline.
    """
    rollouts = []
    rewards = []
    for ex in batch:
        enc = speaker.encode(ex.traj)
        ids, lp_tensors = speaker.rollout(enc, rng, arl_cfg.temperature,
                                          max_len=arl_cfg.max_sample_len)
        r = float(reward_fn(ids, enc))
        rewards.append(r)
        rollouts.append(lp_tensors)
    base = baseline if baseline is not None else float(np.mean(rewards))
    pg_terms = []
    for lp_tensors, r in zip(rollouts, rewards):
        if lp_tensors:
            seq_lp = _sum([T.reshape(lp, (1, 1)) for lp in lp_tensors])
            pg_terms.append(T.mul(seq_lp, -(r - base)))
    sup_total, *_ = batch_loss(speaker, batch, train_cfg, rng)
    if pg_terms:
        pg = T.mul(T.tsum(_sum(pg_terms)), 1.0 / len(pg_terms))
        total = T.add(sup_total, T.mul(pg, arl_cfg.lambda_arl))
        pg_value = pg.item()
    else:
        total = sup_total
        pg_value = 0.0
    opt_s.zero_grad()
    total.backward()
    clip_global_norm(opt_s.params, train_cfg.grad_clip)
    opt_s.step()
    mean_r = float(np.mean(rewards)) if rewards else 0.0
    new_baseline = (
        mean_r if baseline is None
        else arl_cfg.baseline_decay * baseline + (1.0 - arl_cfg.baseline_decay) * mean_r
    )
    return {
        "pg_loss": pg_value,
        "sup_loss": sup_total.item(),
        "mean_reward_fake": mean_r,
        "baseline": new_baseline,
    }


def _sum(terms):
    acc = terms[0]
    for t in terms[1:]:
        acc = T.add(acc, t)
    return acc


# ---------------------------------------------------------------------------
# alternation loop


@dataclass
class ArlResult:
    log_path: str
    speaker_checkpoint: str
    reward_checkpoint: str


def arl_fit(speaker: SpeakerModel, reward_model: Module,
            train_examples: list[TrainExample], arl_cfg: ArlConfig,
            train_cfg: TrainConfig, out_dir, embed_matrix: np.ndarray) -> ArlResult:
    """Alternate policy and reward phases every ``period`` iterations,
    starting with the policy, logging both mean rewards each iteration."""
    os.makedirs(out_dir, exist_ok=True)
    rng = np.random.default_rng(np.random.PCG64(arl_cfg.seed))
    opt_s = AdamW(speaker.trainable_parameters(), lr=train_cfg.lr,
                  weight_decay=train_cfg.weight_decay)
    opt_r = AdamW(reward_model.trainable_parameters(), lr=train_cfg.lr,
                  weight_decay=train_cfg.weight_decay)
    baseline: float | None = None
    log_path = os.path.join(out_dir, "reward_curve.jsonl")

    def reward_fn(ids, enc):
        with T.no_grad():
            return reward_score(reward_model, ids, enc, embed_matrix).item()

    with open(log_path, "w", encoding="utf-8") as log:
        for it in range(1, arl_cfg.iterations + 1):
            phase = "policy" if ((it - 1) // arl_cfg.period) % 2 == 0 else "reward"
            idx = rng.choice(len(train_examples),
                             size=min(train_cfg.batch_size, len(train_examples)),
                             replace=False)
            batch = [train_examples[int(i)] for i in idx]
            for _ in range(arl_cfg.inner_steps):
                if phase == "policy":
                    stats = policy_phase(speaker, reward_fn, opt_s, batch,
                                         train_cfg, arl_cfg, baseline, rng)
                    baseline = stats.pop("baseline")
                    with T.no_grad():
                        reals = [
                            reward_score(reward_model, ex.gold_ids,
                                         speaker.encode(ex.traj), embed_matrix).item()
                            for ex in batch
                        ]
                    stats["mean_reward_real"] = float(np.mean(reals))
                else:
                    stats = reward_phase(speaker, reward_model, opt_r, batch,
                                         embed_matrix, arl_cfg, rng,
                                         grad_clip=train_cfg.grad_clip)
                    stats["pg_loss"] = 0.0
                    stats["sup_loss"] = stats.pop("bce")
            log.write(json.dumps({
                "iter": it, "phase": phase,
                "mean_reward_real": stats["mean_reward_real"],
                "mean_reward_fake": stats["mean_reward_fake"],
                "pg_loss": stats["pg_loss"], "sup_loss": stats["sup_loss"],
            }) + "\n")

    sp = os.path.join(out_dir, f"arl_speaker_{arl_cfg.iterations}.archive")
    speaker.save_checkpoint(sp)
    rp = os.path.join(out_dir, f"arl_reward_{arl_cfg.iterations}.archive")
    save_archive(rp, reward_model.state_arrays())
    return ArlResult(log_path, sp, rp)
