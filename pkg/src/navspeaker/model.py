"""The speaker network.

Per viewpoint, slot features (visual + semantic + structural) are projected
and attended with a query from the action BiLSTM state, with a learnable
scalar gating logit smoothing between heading-adjacent slots; the gated
output drives a panoramic LSTM.  Per step, the action state attends over the
panoramic state sequence and a second BiLSTM summarises [context; gate] into
the vision-action sequence the decoder attends to.  The decoder is an LSTM
over previous-token embeddings whose attention rows over the T viewpoints
form the alignment matrix used by the alignment loss.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import EmptyTrajectory, ShapeError, VocabError
from .corpus.text import BOS_ID, EOS_ID
from .features import TrajectoryFeatures
from .nn import tensor as T
from .nn.archive import load_archive, save_archive
from .nn.layers import BiLSTM, Embedding, Linear, LSTMCell, Module, Parameter, scaled_dot_attention
from .nn.tensor import Tensor


@dataclass
class ModelConfig:
    vocab_size: int
    v_dim: int = 64
    g_dim: int = 24
    d_k: int = 64
    d_h: int = 64
    layers: int = 2
    views: int = 36
    max_decode_len: int = 100
    dtype: str = "float32"
    seed: int = 0

    def np_dtype(self):
        return np.float64 if self.dtype == "float64" else np.float32

    @property
    def slot_feature_dim(self) -> int:
        return self.v_dim + 7 * self.g_dim + 4

    @classmethod
    def paper_scale(cls, vocab_size: int = 1000) -> "ModelConfig":
        return cls(vocab_size=vocab_size, v_dim=2048, g_dim=300, d_k=512, d_h=768, layers=2)


@dataclass
class EncoderOutput:
    h_a: list  # T x (1, 2*d_h) action states
    h_v_mat: Tensor  # (T, d_h) panoramic states
    h_hat: list  # T x (1, 2*d_h) vision-action states
    h_hat_mat: Tensor  # (T, 2*d_h)
    dec_keys: Tensor  # (T, d_k)
    dec_values: Tensor  # (T, d_h)
    o_summary: Tensor  # (1, d_h): mean of panoramic states

    @property
    def length(self) -> int:
        return self.h_hat_mat.shape[0]


@dataclass
class DecState:
    h: Tensor
    c: Tensor


@dataclass
class GenerateOutput:
    ids: list[int]  # emitted tokens, EOS excluded
    log_probs: list[float]  # per emitted step (incl. the EOS step if taken)
    attention: np.ndarray  # (steps, T) decoder attention rows
    stopped: bool  # True when EOS was emitted within budget


def _heading_adjacency(views: int) -> np.ndarray:
    """0/1 matrix joining slots one heading apart at the same elevation."""
    headings, elevations = views // 3, 3
    adj = np.zeros((views, views))
    for h in range(headings):
        for e in range(elevations):
            i = h * elevations + e
            for dh in (-1, 1):
                j = ((h + dh) % headings) * elevations + e
                adj[i, j] = 1.0
    return adj


class SpeakerModel(Module):
    def __init__(self, cfg: ModelConfig):
        self.cfg = cfg
        dt = cfg.np_dtype()
        rng = np.random.default_rng(np.random.PCG64(cfg.seed))
        dh, dk, g = cfg.d_h, cfg.d_k, cfg.g_dim

        # panoramic room-object attention
        self.proj_fcs = Linear(cfg.slot_feature_dim, dh, rng, dt)
        self.pano_q = Linear(2 * dh, dk, rng, dt)
        self.pano_k = Linear(dh, dk, rng, dt)
        self.pano_v = Linear(dh, dh, rng, dt)
        self.adj_gate = Parameter(np.zeros((1, 1), dtype=dt))
        self.pano_g = Linear(3 * dh, dh, rng, dt)
        self.lstm_v = LSTMCell(dh, dh, rng, dt)

        # trajectory encoder
        self.bilstm_a = BiLSTM(4, dh, cfg.layers, rng, dt)
        self.traj_q = Linear(2 * dh, dk, rng, dt)
        self.traj_k = Linear(dh, dk, rng, dt)
        self.traj_v = Linear(dh, dh, rng, dt)
        self.traj_gate = Linear(2 * dh, dh, rng, dt)
        self.bilstm_va = BiLSTM(2 * dh, dh, cfg.layers, rng, dt)

        # instruction decoder
        self.embed = Embedding(cfg.vocab_size, g, rng, dt)
        self.lstm_x = LSTMCell(g, dh, rng, dt)
        self.bridge_h = Linear(2 * dh, dh, rng, dt)
        self.bridge_c = Linear(2 * dh, dh, rng, dt)
        self.dec_q = Linear(dh, dk, rng, dt)
        self.dec_k = Linear(2 * dh, dk, rng, dt)
        self.dec_v = Linear(2 * dh, dh, rng, dt)
        self.dec_fv = Linear(dh, dh, rng, dt)
        self.dec_comb = Linear(2 * dh, dh, rng, dt)
        self.out = Linear(dh, cfg.vocab_size, rng, dt)

        self._adjacency = Tensor(_heading_adjacency(cfg.views).astype(dt).T)

    # -- encoder ---------------------------------------------------------
    def pano_attend(self, slot_matrix: np.ndarray, h_a_t: Tensor):
        """Gated panoramic context g_t for one step; returns (g_t, weights)."""
        if slot_matrix.shape != (self.cfg.views, self.cfg.slot_feature_dim):
            raise ShapeError(
                f"slot matrix {slot_matrix.shape} != "
                f"({self.cfg.views}, {self.cfg.slot_feature_dim})"
            )
        fcs = self.proj_fcs(Tensor(slot_matrix))
        q = self.pano_q(h_a_t)
        k = self.pano_k(fcs)
        v = self.pano_v(fcs)
        base = T.mul(T.affine(q, k), 1.0 / math.sqrt(self.cfg.d_k))
        smooth = T.mul(T.matmul(base, self._adjacency), self.adj_gate)
        weights = T.softmax(T.add(base, smooth), axis=-1)
        c_k = T.matmul(weights, v)
        g_t = T.tanh(self.pano_g(T.concat([c_k, h_a_t], axis=1)))
        return g_t, weights

    def encode(self, traj: TrajectoryFeatures) -> EncoderOutput:
        if not traj.steps:
            raise EmptyTrajectory("trajectory has no steps")
        dt = self.cfg.np_dtype()
        actions = [Tensor(s.action.astype(dt).reshape(1, -1)) for s in traj.steps]
        h_a = self.bilstm_a(actions)

        h, c = self.lstm_v.zero_state(1, dt)
        h_v = []
        for t, step in enumerate(traj.steps):
            g_t, _ = self.pano_attend(step.slot_matrix.astype(dt), h_a[t])
            h, c = self.lstm_v(g_t, h, c)
            h_v.append(h)
        h_v_mat = T.concat(h_v, axis=0)

        kv = self.traj_k(h_v_mat)
        vv = self.traj_v(h_v_mat)
        va_inputs = []
        for t in range(len(traj.steps)):
            q = self.traj_q(h_a[t])
            c_w, _ = scaled_dot_attention(q, kv, vv)
            gate = T.tanh(self.traj_gate(T.concat([c_w, h_v[t]], axis=1)))
            va_inputs.append(T.concat([c_w, gate], axis=1))
        h_hat = self.bilstm_va(va_inputs)
        h_hat_mat = T.concat(h_hat, axis=0)

        return EncoderOutput(
            h_a=h_a,
            h_v_mat=h_v_mat,
            h_hat=h_hat,
            h_hat_mat=h_hat_mat,
            dec_keys=self.dec_k(h_hat_mat),
            dec_values=self.dec_v(h_hat_mat),
            o_summary=T.tmean(h_v_mat, axis=0, keepdims=True),
        )

    # -- decoder ---------------------------------------------------------
    def init_decoder(self, enc: EncoderOutput) -> DecState:
        last = enc.h_hat[-1]
        return DecState(T.tanh(self.bridge_h(last)), T.tanh(self.bridge_c(last)))

    def decode_step(self, w_prev: int, state: DecState, enc: EncoderOutput):
        if not 0 <= w_prev < self.cfg.vocab_size:
            raise VocabError(f"token id {w_prev} outside vocab of {self.cfg.vocab_size}")
        emb = self.embed([w_prev])
        h, c = self.lstm_x(emb, state.h, state.c)
        q = self.dec_q(h)
        ctx, attn = scaled_dot_attention(q, enc.dec_keys, enc.dec_values)
        hvax = T.tanh(self.dec_comb(T.concat([ctx, self.dec_fv(h)], axis=1)))
        logits = self.out(hvax)
        return logits, attn, DecState(h, c)

    def forward_teacher(self, enc: EncoderOutput, gold_ids: list[int]):
        """Teacher forcing over gold tokens; predicts gold + EOS.

        Returns (logits (L+1, vocab), attention (L+1, T)) as graph tensors.
        """
        inputs = [BOS_ID] + list(gold_ids)
        state = self.init_decoder(enc)
        logit_rows, attn_rows = [], []
        for w in inputs:
            logits, attn, state = self.decode_step(w, state, enc)
            logit_rows.append(logits)
            attn_rows.append(attn)
        return T.concat(logit_rows, axis=0), T.concat(attn_rows, axis=0)

    def forward_student(self, enc: EncoderOutput, gold_ids: list[int],
                        rng: np.random.Generator, temperature: float = 1.0):
        """Student forcing: inputs are the model's own sampled tokens.

        Still produces len(gold)+1 rows scored against gold + EOS; also
        returns the sampled input prefix (for repetition candidates).
        """
        state = self.init_decoder(enc)
        logit_rows, attn_rows = [], []
        sampled: list[int] = []
        w = BOS_ID
        for _ in range(len(gold_ids) + 1):
            logits, attn, state = self.decode_step(w, state, enc)
            logit_rows.append(logits)
            attn_rows.append(attn)
            probs = _softmax_np(logits.data[0] / temperature)
            w = int(rng.choice(len(probs), p=probs))
            sampled.append(w)
        return T.concat(logit_rows, axis=0), T.concat(attn_rows, axis=0), sampled

    # -- generation ------------------------------------------------------
    def generate(self, enc_or_traj, mode: str = "greedy", temperature: float = 1.0,
                 rng: np.random.Generator | None = None,
                 max_len: int | None = None) -> GenerateOutput:
        """Greedy or temperature-sampled decoding from BOS to EOS/budget."""
        with T.no_grad():
            enc = enc_or_traj if isinstance(enc_or_traj, EncoderOutput) else self.encode(enc_or_traj)
            if mode == "sample" and rng is None:
                raise ValueError("sample mode needs an rng")
            max_len = max_len or self.cfg.max_decode_len
            state = self.init_decoder(enc)
            ids: list[int] = []
            log_probs: list[float] = []
            attn_rows: list[np.ndarray] = []
            w = BOS_ID
            stopped = False
            for _ in range(max_len):
                logits, attn, state = self.decode_step(w, state, enc)
                row = logits.data[0]
                if mode == "greedy":
                    nxt = int(np.argmax(row))
                    probs = _softmax_np(row)
                elif mode == "sample":
                    probs = _softmax_np(row / temperature)
                    nxt = int(rng.choice(len(probs), p=probs))
                else:
                    raise ValueError(f"unknown mode {mode}")
                log_probs.append(float(np.log(max(probs[nxt], 1e-300))))
                attn_rows.append(attn.data[0].copy())
                if nxt == EOS_ID:
                    stopped = True
                    break
                ids.append(nxt)
                w = nxt
            return GenerateOutput(ids, log_probs, np.stack(attn_rows, axis=0), stopped)

    def rollout(self, enc: EncoderOutput, rng: np.random.Generator,
                temperature: float = 1.0, max_len: int | None = None):
        """Graph-enabled sampling for policy gradients.

        Returns (ids, log_prob_tensors): ids exclude EOS, tensors cover every
        sampled step (including the EOS step when taken).
        """
        max_len = max_len or self.cfg.max_decode_len
        state = self.init_decoder(enc)
        ids: list[int] = []
        lp_tensors = []
        w = BOS_ID
        for _ in range(max_len):
            logits, _, state = self.decode_step(w, state, enc)
            scaled = T.mul(logits, 1.0 / temperature)
            logp = T.log_softmax(scaled, axis=-1)
            probs = np.exp(logp.data[0])
            probs = probs / probs.sum()
            nxt = int(rng.choice(len(probs), p=probs))
            lp_tensors.append(T.pick(logp, [0], [nxt]))
            if nxt == EOS_ID:
                break
            ids.append(nxt)
            w = nxt
        return ids, lp_tensors

    # -- persistence -----------------------------------------------------
    def save_checkpoint(self, path) -> None:
        save_archive(path, self.state_arrays())
        with open(str(path) + ".json", "w", encoding="utf-8") as fh:
            json.dump(asdict(self.cfg), fh, indent=2, sort_keys=True)

    @classmethod
    def load_checkpoint(cls, path) -> "SpeakerModel":
        with open(str(path) + ".json", encoding="utf-8") as fh:
            cfg = ModelConfig(**json.load(fh))
        model = cls(cfg)
        model.load_state_arrays(load_archive(path))
        return model


def _softmax_np(row: np.ndarray) -> np.ndarray:
    e = np.exp(row.astype(np.float64) - row.max())
    return e / e.sum()


def count_parameters(model: Module) -> int:
    return model.count_parameters()


def parameter_ledger_report(model: SpeakerModel) -> str:
    lines = [f"{name:40s} {str(shape):18s} {count:>10d}"
             for name, shape, count in model.parameter_ledger()]
    lines.append(f"{'TOTAL':40s} {'':18s} {model.count_parameters():>10d}")
    return "\n".join(lines)
