"""High-level pipeline steps shared by the CLI and the test harness.

Wires datasets through centrality profiling, view optimization, training, and
probing, keeping every stage deterministic in (config, seed).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from .augment import AugmentConfig, AugmentationPlan, optimize_views, save_plan
from .centrality import centrality_profile
from .config import RunConfig
from .data import DatasetBundle, generate_sbm, load_bundle, stratified_split
from .encoders import EncoderConfig
from .evaluation import ProbeResult, dice_attack, linear_probe, random_attack
from .graphs import Graph, laplacian_from_graph
from .training import (
    TrainItem,
    TrainState,
    build_state,
    save_checkpoint,
    student_embeddings,
    train_epoch,
)


def load_dataset(cfg: RunConfig) -> DatasetBundle:
    if cfg.dataset == "sbm":
        return generate_sbm(cfg.sbm_n, cfg.sbm_blocks, cfg.sbm_p_in, cfg.sbm_p_out,
                            cfg.sbm_d_feat, seed=cfg.seed,
                            feature_margin=cfg.sbm_feature_margin)
    return load_bundle(cfg.dataset, task=cfg.task)


def augment_config(cfg: RunConfig, n_nodes: int) -> AugmentConfig:
    # K is capped so 2K never exceeds the graph size
    eig_k = max(1, min(cfg.eig_k, n_nodes // 2))
    return AugmentConfig(
        budget_ratio=cfg.budget_ratio,
        step=cfg.aug_step,
        iterations=cfg.aug_iters,
        eig_k=eig_k,
        decay=cfg.aug_decay,
        objective=cfg.aug_objective,
        seed=cfg.seed,
    )


def prepare_item(graph: Graph, cfg: RunConfig,
                 plan: Optional[AugmentationPlan] = None) -> TrainItem:
    lap = laplacian_from_graph(graph)
    profile = centrality_profile(graph)
    if plan is None:
        plan = optimize_views(lap, profile.combined, graph, augment_config(cfg, graph.n_nodes))
    return TrainItem(graph, lap, profile.combined, plan)


def prepare_items(bundle: DatasetBundle, cfg: RunConfig,
                  plans: Optional[List[AugmentationPlan]] = None) -> List[TrainItem]:
    plans = plans or [None] * len(bundle.graphs)
    return [prepare_item(g, cfg, plan) for g, plan in zip(bundle.graphs, plans)]


def encoder_config(cfg: RunConfig, in_dim: int) -> EncoderConfig:
    return EncoderConfig(
        kind=cfg.encoder,
        in_dim=in_dim,
        hidden_dims=tuple(cfg.encoder_hidden()),
        projector_hidden=cfg.predictor_hidden,
        projector_out=cfg.projector_out,
    )


def make_state(cfg: RunConfig, in_dim: int) -> TrainState:
    return build_state(
        encoder_config(cfg, in_dim),
        seed=cfg.seed,
        ema_decay=cfg.ema_decay,
        eps=cfg.eps,
        pgd_step=cfg.pgd_step,
        pgd_steps=cfg.pgd_steps,
        accum_steps=cfg.accum_steps,
        lr=cfg.lr,
        weight_decay=cfg.weight_decay,
        optimizer=cfg.optimizer,
        perturb_site=cfg.perturb_site,
    )


def run_training(items: List[TrainItem], state: TrainState, cfg: RunConfig,
                 epochs: Optional[int] = None,
                 metrics_path: Optional[Path] = None,
                 checkpoint_dir: Optional[Path] = None) -> List[Dict[str, float]]:
    """Train for the configured epoch count, streaming metrics as JSON lines."""
    epochs = cfg.epochs if epochs is None else epochs
    records: List[Dict[str, float]] = []
    sink = open(metrics_path, "a", encoding="utf-8") if metrics_path else None
    try:
        while state.epoch < epochs:
            record = train_epoch(items, state, rho=cfg.rho)
            records.append(record)
            if sink:
                sink.write(json.dumps(record, sort_keys=True) + "\n")
            if (checkpoint_dir and cfg.checkpoint_every
                    and state.epoch % cfg.checkpoint_every == 0):
                save_checkpoint(state, checkpoint_dir / f"checkpoint_{state.epoch:06d}.ckpt",
                                config_hash=cfg.content_hash())
    finally:
        if sink:
            sink.close()
    return records


def probe_on_state(state: TrainState, bundle: DatasetBundle, cfg: RunConfig,
                   repeats: Optional[int] = None) -> ProbeResult:
    """Linear probe of frozen student embeddings, repeated over re-splits."""
    graph = bundle.graph
    lap = laplacian_from_graph(graph)
    emb = student_embeddings(graph, lap, state)
    return probe_embeddings(emb, graph.labels, cfg, repeats)


def probe_embeddings(emb: np.ndarray, labels: np.ndarray, cfg: RunConfig,
                     repeats: Optional[int] = None) -> ProbeResult:
    repeats = cfg.eval_repeats if repeats is None else repeats
    accs = []
    for rep in range(repeats):
        rng = np.random.default_rng([cfg.seed, 104729, rep])
        train_idx, test_idx = stratified_split(
            labels, (cfg.probe_train_frac, 1.0 - cfg.probe_train_frac), rng)
        accs.append(linear_probe(emb, labels, (train_idx, test_idx), cfg.probe_l2).mean)
    values = np.asarray(accs)
    return ProbeResult(float(values.mean()), float(values.std()), values,
                       f"linear-probe-x{repeats}")


def attack_graph(graph: Graph, cfg: RunConfig, sigma: float, seed: int) -> Graph:
    if sigma == 0.0:
        return graph
    if cfg.attack == "random":
        return random_attack(graph, sigma, seed=seed)
    if graph.labels is None:
        raise ValueError("dice attack needs labels")
    return dice_attack(graph, graph.labels, sigma, seed=seed)


@dataclass
class PipelineResult:
    state: TrainState
    items: List[TrainItem]
    metrics: List[Dict[str, float]]
    probe: ProbeResult


def train_and_probe(cfg: RunConfig, bundle: Optional[DatasetBundle] = None,
                    epochs: Optional[int] = None,
                    poison_sigma: float = 0.0) -> PipelineResult:
    """Full desk-scale run: (optionally poisoned) graph -> plan -> train -> probe.

    Poisoning happens before any self-supervised step; the probe always reads
    frozen student embeddings of the graph the model was trained on.
    """
    bundle = bundle if bundle is not None else load_dataset(cfg)
    graph = bundle.graph
    if poison_sigma > 0.0:
        graph = attack_graph(graph, cfg, poison_sigma, seed=cfg.seed + 31337)
        bundle = DatasetBundle([graph], bundle.task, dict(bundle.splits))
    items = prepare_items(bundle, cfg)
    state = make_state(cfg, graph.features.shape[1])
    metrics = run_training(items, state, cfg, epochs=epochs)
    probe = probe_on_state(state, bundle, cfg)
    return PipelineResult(state, items, metrics, probe)
