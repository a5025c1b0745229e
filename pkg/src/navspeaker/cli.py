"""Command-line pipelines: gen, mix, train, arl, generate, eval, stats.

Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 checkpoint /
config shape mismatch.  All outputs land under the run's output directory.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import envsim
from .arl import ArlConfig, RewardModelConfig, arl_fit, build_reward_model, vocab_embedding_matrix
from .config import (
    CORPUS_FILE, HOUSES_FILE, LEXICON_FILE, MIXED_FILE, VOCAB_FILE, load_config,
)
from .corpus import (
    PathMixConfig, PosLexicon, Vocabulary, corpus_stats, default_lexicon,
    mix_paths_detailed, read_jsonl, record_from_silver, split_vocab_overlap,
    tokenize, write_jsonl,
)
from .errors import ConfigError, NavspeakerError, PathNotFound, ShapeError
from .features import EmbeddingTable, FeatureExtractor
from .metrics import EvalPair, ReferralLexicons, eval_report, referral_counts
from .model import ModelConfig, SpeakerModel, parameter_ledger_report
from .nn.archive import load_archive
from .train import TrainConfig, evaluate, fit, prepare_examples


# ---------------------------------------------------------------------------
# shared loading helpers


def _run_dir(cfg: dict) -> str:
    os.makedirs(cfg["out_dir"], exist_ok=True)
    return cfg["out_dir"]


def _write_houses(path: str, houses: list[envsim.House]) -> None:
    payload = {"houses": [h.to_dict() for h in houses]}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def _read_houses(path: str) -> dict[str, envsim.House]:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    houses = [envsim.House.from_dict(d) for d in payload["houses"]]
    return {h.house_id: h for h in houses}


def _load_run(cfg: dict, corpus_path: str | None = None):
    run = cfg["out_dir"]
    houses = _read_houses(os.path.join(run, HOUSES_FILE))
    records = read_jsonl(corpus_path or os.path.join(run, CORPUS_FILE))
    vocab = Vocabulary.load(os.path.join(run, VOCAB_FILE))
    lexicon = PosLexicon.load(os.path.join(run, LEXICON_FILE))
    return houses, records, vocab, lexicon


def _feature_extractor(cfg: dict) -> tuple[EmbeddingTable, FeatureExtractor]:
    f = cfg["features"]
    table = EmbeddingTable(dim=f["g_dim"], seed=f["feature_seed"])
    fx = FeatureExtractor(table, v_dim=f["v_dim"], k=f["k_nearest"],
                          feature_seed=f["feature_seed"])
    return table, fx


def _model_config(cfg: dict, vocab_size: int) -> ModelConfig:
    return ModelConfig(
        vocab_size=vocab_size,
        v_dim=cfg["features"]["v_dim"],
        g_dim=cfg["features"]["g_dim"],
        d_k=cfg["model"]["d_k"],
        d_h=cfg["model"]["d_h"],
        layers=cfg["model"]["layers"],
        max_decode_len=cfg["model"]["max_decode_len"],
        seed=cfg["seed"],
    )


def _train_config(cfg: dict) -> TrainConfig:
    t = cfg["train"]
    return TrainConfig(
        batch_size=t["batch_size"], lr=t["lr"], iterations=t["iterations"],
        weights=tuple(t["weights"]), forcing=t["forcing"], seed=cfg["seed"],
        eval_interval=t["eval_interval"], checkpoint_interval=t["checkpoint_interval"],
        uls_window=t["uls_window"], early_stop_bleu=t["early_stop_bleu"],
    )


def _split_examples(examples, fraction: float, seed: int):
    if fraction <= 0.0 or len(examples) < 2:
        return examples, []
    rng = np.random.default_rng(np.random.PCG64(seed + 7919))
    n_eval = max(1, int(round(fraction * len(examples))))
    eval_idx = set(int(i) for i in rng.choice(len(examples), size=n_eval, replace=False))
    train = [ex for i, ex in enumerate(examples) if i not in eval_idx]
    held = [ex for i, ex in enumerate(examples) if i in eval_idx]
    return train, held


# ---------------------------------------------------------------------------
# commands


def cmd_gen(cfg: dict) -> int:
    run = _run_dir(cfg)
    e = cfg["envsim"]
    spec = envsim.HouseSpec(e["rooms"], e["nodes_per_room"], e["objects_per_room"])
    houses = [envsim.generate_house(cfg["seed"] + i, spec) for i in range(e["houses"])]
    samples = []
    skipped = 0
    for hi, house in enumerate(houses):
        for k in range(e["samples_per_house"]):
            path_seed = cfg["seed"] * 100000 + hi * 1000 + k
            try:
                path = envsim.sample_path(house, path_seed, e["min_len_m"], e["max_len_m"])
            except PathNotFound:
                skipped += 1
                continue
            samples.append((house, envsim.template_instruction(house, path, path_seed)))
    vocab = Vocabulary(t for _, s in samples for t in tokenize(s.instruction))
    records = [
        record_from_silver(s, h, vocab, f"{h.house_id}-s{k:03d}")
        for k, (h, s) in enumerate(samples)
    ]
    _write_houses(os.path.join(run, HOUSES_FILE), houses)
    write_jsonl(os.path.join(run, CORPUS_FILE), records)
    vocab.save(os.path.join(run, VOCAB_FILE))
    default_lexicon().save(os.path.join(run, LEXICON_FILE))
    stats = corpus_stats(records)
    print(stats.format())
    if skipped:
        print(f"(skipped {skipped} paths with no sample in bounds)")
    return 0


def cmd_mix(cfg: dict) -> int:
    run = _run_dir(cfg)
    houses, records, vocab, lexicon = _load_run(cfg)
    m = cfg["mix"]
    mixed_all = []
    tallies = {}
    for hid, house in sorted(houses.items()):
        house_records = [r for r in records if r.house_id == hid]
        mix_cfg = PathMixConfig(
            max_node_gap_m=m["max_node_gap_m"], min_loop_angle_deg=m["min_loop_angle_deg"],
            min_len_m=m["min_len_m"], max_len_m=m["max_len_m"],
            max_pairs=m["max_pairs"], seed=cfg["seed"], min_node_gap_m=m["min_node_gap_m"],
        )
        result = mix_paths_detailed(house_records, house, mix_cfg, lexicon, vocab)
        mixed_all.extend(result.records)
        tallies[hid] = result.tally.as_dict()
    write_jsonl(os.path.join(run, MIXED_FILE), records + mixed_all)
    for hid, tally in tallies.items():
        print(f"{hid}: " + " ".join(f"{k}={v}" for k, v in tally.items()))
    print(f"mixed records: {len(mixed_all)} (total corpus {len(records) + len(mixed_all)})")
    return 0


def cmd_train(cfg: dict) -> int:
    run = _run_dir(cfg)
    corpus_path = os.path.join(run, MIXED_FILE) if cfg["train"]["use_mixed"] else None
    houses, records, vocab, lexicon = _load_run(cfg, corpus_path)
    table, fx = _feature_extractor(cfg)
    model = SpeakerModel(_model_config(cfg, len(vocab)))
    examples = prepare_examples(records, houses, fx, lexicon)
    train_ex, eval_ex = _split_examples(examples, cfg["train"]["eval_fraction"], cfg["seed"])
    result = fit(model, train_ex, _train_config(cfg), run, eval_examples=eval_ex or None)
    print(f"checkpoints: {', '.join(result.checkpoints)}")
    if result.final_eval:
        print("eval: " + json.dumps(result.final_eval, sort_keys=True))
    return 0


def cmd_arl(cfg: dict, checkpoint: str) -> int:
    run = _run_dir(cfg)
    houses, records, vocab, lexicon = _load_run(cfg)
    table, fx = _feature_extractor(cfg)
    model = _load_speaker(checkpoint)
    examples = prepare_examples(records, houses, fx, lexicon)
    a = cfg["arl"]
    reward_cfg = RewardModelConfig(
        kind=a["reward"]["kind"], g_dim=cfg["features"]["g_dim"],
        visual_dim=cfg["model"]["d_h"], filters=a["reward"]["filters"],
        widths=tuple(a["reward"]["widths"]), hidden=a["reward"]["hidden"],
        seed=cfg["seed"],
    )
    reward_model = build_reward_model(reward_cfg)
    arl_cfg = ArlConfig(
        period=a["period"], lambda_arl=a["lambda_arl"],
        baseline_decay=a["baseline_decay"], inner_steps=a["inner_steps"],
        iterations=a["iterations"], seed=cfg["seed"],
        temperature=a["temperature"], max_sample_len=a["max_sample_len"],
    )
    result = arl_fit(model, reward_model, examples, arl_cfg, _train_config(cfg), run,
                     vocab_embedding_matrix(table, vocab))
    print(f"reward curve: {result.log_path}")
    print(f"speaker: {result.speaker_checkpoint}")
    print(f"reward model: {result.reward_checkpoint}")
    return 0


def cmd_generate(cfg: dict, checkpoint: str, record_id: str) -> int:
    run = _run_dir(cfg)
    houses, records, vocab, lexicon = _load_run(cfg)
    table, fx = _feature_extractor(cfg)
    model = _load_speaker(checkpoint)
    matches = [r for r in records if r.record_id == record_id]
    if not matches:
        raise FileNotFoundError(f"record {record_id} not in corpus")
    record = matches[0]
    traj = fx.trajectory(houses[record.house_id], record.path, headings=record.headings)
    out = model.generate(traj, "greedy")
    text = " ".join(vocab.decode(out.ids))
    print(text)
    att_path = os.path.join(run, f"attention_{record_id}.csv")
    with open(att_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["token"] + [f"view_{i}" for i in range(out.attention.shape[1])])
        labels = vocab.decode(out.ids) + (["<eos>"] if out.stopped else [])
        for label, row in zip(labels, out.attention):
            writer.writerow([label] + [f"{v:.6f}" for v in row])
    print(f"attention: {att_path}")
    return 0


def cmd_eval(cfg: dict, checkpoint: str | None, candidates_path: str | None) -> int:
    run = _run_dir(cfg)
    houses, records, vocab, lexicon = _load_run(cfg)
    refs = {r.record_id: tokenize(r.instruction) for r in records}
    pairs = []
    if candidates_path:
        for cand in read_jsonl(candidates_path):
            if cand.record_id in refs:
                pairs.append(EvalPair(tokenize(cand.instruction), [refs[cand.record_id]]))
    else:
        if checkpoint is None:
            raise ConfigError("eval needs --checkpoint or --candidates")
        table, fx = _feature_extractor(cfg)
        model = _load_speaker(checkpoint)
        for r in records:
            traj = fx.trajectory(houses[r.house_id], r.path, headings=r.headings)
            out = model.generate(traj, "greedy")
            pairs.append(EvalPair(vocab.decode(out.ids), [refs[r.record_id]]))
    report = eval_report(pairs)
    path = os.path.join(run, "eval_report.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
    print(json.dumps(report, sort_keys=True))
    print(f"report: {path}")
    return 0


def default_referral_lexicons() -> ReferralLexicons:
    actions = {"turn left", "turn right", "go straight", "walk past", "walk through",
               "head toward", "stop near", "stop at", "wait by", "enter", "leave", "top of"}
    stopwords = {"the", "a", "an", "and", "then", "to", "of", "in", "at", "by",
                 "near", "past", "toward", "through", "into", ".", ",", "!", "?", ";"}
    objects = set(envsim.CATEGORY_VOCAB) | set(envsim.ROOM_LABELS)
    return ReferralLexicons(objects=objects, actions=actions, stopwords=stopwords)


def cmd_stats(cfg: dict, corpus_path: str | None, compare_path: str | None,
              referral: bool) -> int:
    run = cfg["out_dir"]
    records = read_jsonl(corpus_path or os.path.join(run, CORPUS_FILE))
    print(corpus_stats(records).format())
    if compare_path:
        other = read_jsonl(compare_path)
        tokens_a = [t for r in records for t in tokenize(r.instruction)]
        tokens_b = [t for r in other for t in tokenize(r.instruction)]
        print("overlap: " + json.dumps(split_vocab_overlap(tokens_a, tokens_b), sort_keys=True))
    if referral:
        report = referral_counts([tokenize(r.instruction) for r in records],
                                 default_referral_lexicons())
        print(report.format())
    return 0


def cmd_ledger(cfg: dict) -> int:
    """Parameter-count ledger for the configured model and the paper-scale one."""
    houses_path = os.path.join(cfg["out_dir"], HOUSES_FILE)
    vocab_size = 1000
    if os.path.exists(houses_path):
        try:
            vocab_size = len(Vocabulary.load(os.path.join(cfg["out_dir"], VOCAB_FILE)))
        except OSError:
            pass
    model = SpeakerModel(_model_config(cfg, vocab_size))
    print(parameter_ledger_report(model))
    return 0


def _load_speaker(checkpoint: str) -> SpeakerModel:
    try:
        return SpeakerModel.load_checkpoint(checkpoint)
    except ShapeError as exc:
        # surface a named diff between archive and config expectations
        with open(checkpoint + ".json", encoding="utf-8") as fh:
            cfg = ModelConfig(**json.load(fh))
        expected = {name: tuple(p.shape) for name, p in SpeakerModel(cfg).named_parameters()}
        stored = {name: tuple(arr.shape) for name, arr in load_archive(checkpoint).items()}
        lines = [f"checkpoint/config mismatch: {exc}"]
        for name in sorted(set(expected) | set(stored)):
            if expected.get(name) != stored.get(name):
                lines.append(f"  {name}: config {expected.get(name)} vs archive {stored.get(name)}")
        raise ShapeError("\n".join(lines))


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="navspeaker",
                                     description="trajectory-to-instruction pipelines")
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key (dotted path, JSON value)")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("gen", help="generate houses + silver corpus")
    sub.add_parser("mix", help="path-mixing augmentation")
    sub.add_parser("train", help="supervised training")
    p = sub.add_parser("arl", help="adversarial reward learning")
    p.add_argument("--checkpoint", required=True, help="pretrained speaker archive")
    p = sub.add_parser("generate", help="decode one trajectory")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--record-id", required=True)
    p = sub.add_parser("eval", help="evaluate a checkpoint or candidate corpus")
    p.add_argument("--checkpoint")
    p.add_argument("--candidates", help="candidate corpus JSONL (skips decoding)")
    p = sub.add_parser("stats", help="corpus statistics and analyses")
    p.add_argument("--corpus")
    p.add_argument("--compare")
    p.add_argument("--referral", action="store_true")
    sub.add_parser("ledger", help="parameter-count ledger")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.set)
        if args.command == "gen":
            return cmd_gen(cfg)
        if args.command == "mix":
            return cmd_mix(cfg)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "arl":
            return cmd_arl(cfg, args.checkpoint)
        if args.command == "generate":
            return cmd_generate(cfg, args.checkpoint, args.record_id)
        if args.command == "eval":
            return cmd_eval(cfg, args.checkpoint, args.candidates)
        if args.command == "stats":
            return cmd_stats(cfg, args.corpus, args.compare, args.referral)
        if args.command == "ledger":
            return cmd_ledger(cfg)
        raise ConfigError(f"unknown command {args.command}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ShapeError as exc:
        print(f"shape error: {exc}", file=sys.stderr)
        return 4
    except (OSError, json.JSONDecodeError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3
    except NavspeakerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
