"""Plain key=value run configuration with command-line overrides.

Every shipped hyperparameter default matches the reference settings: budget
ratio 0.5, K=100 extremal pairs, EMA 0.998, Adam lr 1e-5 with weight decay
8e-4, perturbation bound 0.008, 3 PGD steps, 2 accumulation steps, GCN hidden
sizes 512/256, GIN 512x3, predictor hidden 512, 5000 epochs.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Tuple


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    # data
    dataset: str = "sbm"                 # "sbm" or a directory with the text formats
    task: str = "node-classification"
    sbm_n: int = 200
    sbm_blocks: int = 2
    sbm_p_in: float = 0.1
    sbm_p_out: float = 0.01
    sbm_d_feat: int = 16
    sbm_feature_margin: float = 1.0
    seed: int = 0
    # augmentation
    budget_ratio: float = 0.5
    eig_k: int = 100
    aug_step: float = 0.5
    aug_iters: int = 20
    aug_decay: bool = True
    aug_objective: str = "squared_diff"
    rho: float = 1.0
    # encoder
    encoder: str = "gcn"
    hidden_dims: Tuple[int, ...] = (512, 256)
    gin_hidden_dims: Tuple[int, ...] = (512, 512, 512)
    predictor_hidden: int = 512
    projector_out: int = 0
    # training
    epochs: int = 5000
    lr: float = 1e-5
    weight_decay: float = 8e-4
    optimizer: str = "adam"
    ema_decay: float = 0.998
    eps: float = 0.008
    pgd_step: float = 0.008
    pgd_steps: int = 3
    accum_steps: int = 2
    perturb_site: str = "first"
    resample_views: bool = True
    checkpoint_every: int = 0
    # evaluation
    probe_l2: float = 1e-3
    probe_train_frac: float = 0.5
    eval_repeats: int = 10
    kfold: int = 0
    kfold_repeats: int = 5
    attack: str = "random"
    attack_sigmas: Tuple[float, ...] = (0.0, 0.05, 0.2)
    # bench
    bench_sizes: Tuple[int, ...] = (768, 1536)
    bench_ks: Tuple[int, ...] = (16, 32)
    bench_tol: float = 1e-6
    bench_repeats: int = 6

    def validate(self) -> None:
        checks = [
            (0.0 < self.budget_ratio <= 1.0, "budget_ratio", "must be in (0, 1]"),
            (self.eig_k >= 1, "eig_k", "must be >= 1"),
            (self.aug_iters >= 0, "aug_iters", "must be >= 0"),
            (self.aug_step > 0, "aug_step", "must be > 0"),
            (self.aug_objective in ("squared_diff", "norm"), "aug_objective",
             "must be squared_diff or norm"),
            (0.0 < self.rho <= 1.0, "rho", "must be in (0, 1]"),
            (self.encoder in ("gcn", "gin"), "encoder", "must be gcn or gin"),
            (self.epochs >= 0, "epochs", "must be >= 0"),
            (self.eps >= 0.0, "eps", "must be >= 0"),
            (self.pgd_steps >= 1, "pgd_steps", "must be >= 1"),
            (self.accum_steps >= 1, "accum_steps", "must be >= 1"),
            (self.optimizer in ("adam", "sgd"), "optimizer", "must be adam or sgd"),
            (self.perturb_site in ("first", "last"), "perturb_site",
             "must be first or last"),
            (0.0 < self.probe_train_frac < 1.0, "probe_train_frac", "must be in (0, 1)"),
            (self.eval_repeats >= 1, "eval_repeats", "must be >= 1"),
            (self.attack in ("random", "dice"), "attack", "must be random or dice"),
            (0.0 < self.ema_decay < 1.0, "ema_decay", "must be in (0, 1)"),
            (self.task in ("node-classification", "graph-classification"), "task",
             "must be node-classification or graph-classification"),
        ]
        for ok, name, msg in checks:
            if not ok:
                raise ConfigError(f"{name}: {msg} (got {getattr(self, name)!r})")

    def encoder_hidden(self) -> Tuple[int, ...]:
        return self.hidden_dims if self.encoder == "gcn" else self.gin_hidden_dims

    def canonical_text(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = ",".join(str(v) for v in value)
            lines.append(f"{f.name}={value}")
        return "\n".join(lines) + "\n"

    def content_hash(self) -> str:
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()


_BOOL_TRUE = {"1", "true", "yes", "on"}
_BOOL_FALSE = {"0", "false", "no", "off"}


def _coerce(name: str, raw: str, kind) -> object:
    raw = raw.strip()
    if kind is bool:
        low = raw.lower()
        if low in _BOOL_TRUE:
            return True
        if low in _BOOL_FALSE:
            return False
        raise ConfigError(f"{name}: expected a boolean, got {raw!r}")
    if kind is int:
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"{name}: expected an integer, got {raw!r}") from None
    if kind is float:
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"{name}: expected a number, got {raw!r}") from None
    if kind is str:
        return raw
    # tuples: comma separated, element type from the default value
    return raw


def apply_assignments(cfg: RunConfig, assignments) -> RunConfig:
    by_name = {f.name: f for f in fields(RunConfig)}
    for key, raw in assignments:
        if key not in by_name:
            raise ConfigError(f"unknown config key '{key}'")
        current = getattr(cfg, key)
        if isinstance(current, tuple):
            elem = float if any(isinstance(v, float) for v in current) else int
            try:
                parsed = tuple(elem(v) for v in raw.split(",") if v.strip() != "")
            except ValueError:
                raise ConfigError(f"{key}: expected comma-separated values, got {raw!r}") from None
            setattr(cfg, key, parsed)
        else:
            setattr(cfg, key, _coerce(key, raw, type(current)))
    return cfg


def load_config(path=None, overrides=()) -> RunConfig:
    """Defaults, then file assignments, then command-line overrides; validated."""
    cfg = RunConfig()
    assignments = []
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {p}")
        for lineno, raw in enumerate(p.read_text(encoding="utf-8").splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{p}:{lineno}: expected key=value, got {line!r}")
            key, _, value = line.partition("=")
            assignments.append((key.strip(), value))
    apply_assignments(cfg, assignments)
    parsed_overrides = []
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override must be key=value, got {item!r}")
        key, _, value = item.partition("=")
        parsed_overrides.append((key.strip(), value))
    apply_assignments(cfg, parsed_overrides)
    cfg.validate()
    return cfg
