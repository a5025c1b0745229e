"""Run configuration: nested JSON with strict key checking, dotted --set
overrides, and the SAS_SEED environment override for the global seed."""

from __future__ import annotations

import copy
import json
import os

from .errors import ConfigError

DEFAULTS: dict = {
    "seed": 1,
    "out_dir": "runs/out",
    "envsim": {
        "houses": 2,
        "rooms": 4,
        "nodes_per_room": 3,
        "objects_per_room": 2,
        "samples_per_house": 12,
        "min_len_m": 5.0,
        "max_len_m": 20.0,
    },
    "features": {
        "v_dim": 32,
        "g_dim": 16,
        "k_nearest": 6,
        "feature_seed": 0,
    },
    "model": {
        "d_k": 32,
        "d_h": 48,
        "layers": 2,
        "max_decode_len": 100,
    },
    "mix": {
        "max_node_gap_m": 3.0,
        "min_loop_angle_deg": 45.0,
        "min_len_m": 5.0,
        "max_len_m": 20.0,
        "max_pairs": 200,
        "min_node_gap_m": 0.5,
    },
    "train": {
        "batch_size": 8,
        "lr": 5e-4,
        "iterations": 1000,
        "weights": [2.0, 1.0, 1.0],
        "forcing": "teacher",
        "eval_interval": 200,
        "checkpoint_interval": 0,
        "uls_window": 0,
        "eval_fraction": 0.25,
        "early_stop_bleu": None,
        "use_mixed": False,
    },
    "arl": {
        "period": 100,
        "lambda_arl": 1.0,
        "baseline_decay": 0.95,
        "inner_steps": 1,
        "iterations": 500,
        "temperature": 1.0,
        "max_sample_len": 60,
        "reward": {
            "kind": "gru",
            "filters": 16,
            "widths": [3, 4, 5],
            "hidden": 32,
        },
    },
}

HOUSES_FILE = "houses.json"
CORPUS_FILE = "corpus.jsonl"
MIXED_FILE = "corpus_mixed.jsonl"
VOCAB_FILE = "vocab.txt"
LEXICON_FILE = "lexicon.tsv"


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        here = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown config key: {here}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{here} must be a mapping")
            out[key] = _merge(base[key], value, here)
        else:
            out[key] = value
    return out


def _parse_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def apply_set(cfg: dict, assignment: str) -> dict:
    """Apply one 'a.b.c=value' override; value parsed as JSON when possible."""
    if "=" not in assignment:
        raise ConfigError(f"--set needs key=value, got {assignment!r}")
    dotted, raw = assignment.split("=", 1)
    keys = dotted.strip().split(".")
    override: dict = {}
    cursor = override
    for k in keys[:-1]:
        cursor[k] = {}
        cursor = cursor[k]
    cursor[keys[-1]] = _parse_value(raw)
    return _merge(cfg, override)


def load_config(path: str | None = None, overrides: list[str] | None = None) -> dict:
    """Defaults <- config file <- --set overrides <- SAS_SEED env var."""
    cfg = copy.deepcopy(DEFAULTS)
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})")
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be an object")
        cfg = _merge(cfg, data)
    for assignment in overrides or []:
        cfg = apply_set(cfg, assignment)
    env_seed = os.environ.get("SAS_SEED")
    if env_seed is not None:
        try:
            cfg["seed"] = int(env_seed)
        except ValueError:
            raise ConfigError(f"SAS_SEED must be an integer, got {env_seed!r}")
    _check_types(cfg)
    return cfg


def _check_types(cfg: dict) -> None:
    if not isinstance(cfg["seed"], int):
        raise ConfigError("seed must be an integer")
    for section in ("envsim", "features", "model", "mix", "train", "arl"):
        if not isinstance(cfg[section], dict):
            raise ConfigError(f"{section} must be a mapping")
    for key in ("houses", "rooms", "nodes_per_room", "objects_per_room", "samples_per_house"):
        v = cfg["envsim"][key]
        if not isinstance(v, int) or v < 1:
            raise ConfigError(f"envsim.{key} must be a positive integer")
    if cfg["arl"]["reward"]["kind"] not in ("cnn", "gru"):
        raise ConfigError("arl.reward.kind must be 'cnn' or 'gru'")
    if cfg["train"]["forcing"] not in ("teacher", "student"):
        raise ConfigError("train.forcing must be 'teacher' or 'student'")
