"""Pre-training loop: instance discrimination over sampled subgraph pairs.

Each step samples a batch of (query, key) views, encodes queries with the
trainable encoder, obtains key representations from either the shared
encoder (end-to-end) or the momentum encoder plus FIFO queue (moco), and
applies one clipped Adam update of the InfoNCE loss.

Training math runs in float64. Creating a checkpoint rounds the live
state through float32 (the stored precision), so training continued from
an in-memory checkpoint and training resumed from the same checkpoint
written to disk follow bit-identical trajectories.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .contrast import ContrastConfig, EncoderPair, MocoQueue, e2e_step, moco_step, momentum_update
from .encoder import GinConfig, GinParams, batch_grads, encode_batch, init_params
from .optim import AdamState, LrSchedule, adam_step, clip_gradients, lr_at
from .sampling import RwrConfig, augment, make_batch
from .streams import RandomStreams

CHECKPOINT_VERSION = 1

# Isomorphic inputs are only guaranteed equal representations to 1e-6, so
# scores closer than this are indistinguishable by contract.
SCORE_TIE_TOL = 1e-6


class TrainingDivergedError(RuntimeError):
    """Raised when the loss stops being finite."""

    def __init__(self, step: int, provenance):
        self.step = step
        self.provenance = provenance
        super().__init__(f"non-finite loss at step {step}; batch instances: {provenance}")


@dataclass(frozen=True)
class PretrainConfig:
    rwr: RwrConfig
    gin: GinConfig
    contrast: ContrastConfig
    batch_size: int
    total_steps: int
    warmup_steps: int
    peak_lr: float = 0.005
    weight_decay: float = 1e-5
    clip_norm: float = 1.0
    checkpoint_interval: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0 < self.warmup_steps <= self.total_steps:
            raise ValueError(
                f"need 0 < warmup_steps <= total_steps, got {self.warmup_steps}/{self.total_steps}")
        if self.peak_lr <= 0:
            raise ValueError("peak_lr must be positive")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be non-negative")
        if self.clip_norm <= 0:
            raise ValueError("clip_norm must be positive")
        if self.checkpoint_interval < 1:
            raise ValueError("checkpoint_interval must be >= 1")
        if self.contrast.mechanism == "e2e":
            if self.batch_size < 2:
                raise ValueError("end-to-end training needs batch_size >= 2")
            if self.contrast.dictionary_size != self.batch_size - 1:
                raise ValueError(
                    "end-to-end negatives are the other in-batch keys: "
                    f"dictionary_size must be batch_size - 1, got {self.contrast.dictionary_size}")
        else:
            if self.batch_size > self.contrast.dictionary_size:
                raise ValueError("moco batch_size cannot exceed the queue size")


def moco_full(seed: int = 0) -> PretrainConfig:
    """Full-scale momentum profile (hours of CPU; not for tests)."""
    return PretrainConfig(
        rwr=RwrConfig(restart_prob=0.8, max_set_size=128, seed=seed),
        gin=GinConfig(),
        contrast=ContrastConfig(temperature=0.07, dictionary_size=16384,
                                momentum=0.999, mechanism="moco"),
        batch_size=32, total_steps=75000, warmup_steps=7500, seed=seed)


def e2e_full(seed: int = 0) -> PretrainConfig:
    return PretrainConfig(
        rwr=RwrConfig(restart_prob=0.8, max_set_size=128, seed=seed),
        gin=GinConfig(),
        contrast=ContrastConfig(temperature=0.07, dictionary_size=1023,
                                momentum=0.999, mechanism="e2e"),
        batch_size=1024, total_steps=75000, warmup_steps=7500, seed=seed)


def moco_desk(seed: int = 0) -> PretrainConfig:
    """Laptop-scale profile: same shape as moco_full with steps, queue,
    and subgraph budgets scaled down (warmup stays total/10)."""
    return PretrainConfig(
        rwr=RwrConfig(restart_prob=0.8, max_set_size=64, seed=seed),
        gin=GinConfig(),
        contrast=ContrastConfig(temperature=0.07, dictionary_size=256,
                                momentum=0.999, mechanism="moco"),
        batch_size=32, total_steps=2000, warmup_steps=200, seed=seed)


def e2e_desk(seed: int = 0) -> PretrainConfig:
    return PretrainConfig(
        rwr=RwrConfig(restart_prob=0.8, max_set_size=64, seed=seed),
        gin=GinConfig(),
        contrast=ContrastConfig(temperature=0.07, dictionary_size=31,
                                momentum=0.999, mechanism="e2e"),
        batch_size=32, total_steps=2000, warmup_steps=200, seed=seed)


PROFILES = {
    "moco-full": moco_full,
    "e2e-full": e2e_full,
    "moco-desk": moco_desk,
    "e2e-desk": e2e_desk,
}


@dataclass
class Checkpoint:
    """Full training state at a step boundary, in stored (f32) precision."""

    config: PretrainConfig
    step: int
    theta_q: dict
    theta_k: dict | None
    adam_m: dict
    adam_v: dict
    adam_step_count: int
    queue_storage: np.ndarray | None
    queue_write_ptr: int
    queue_filled: int
    version: int = CHECKPOINT_VERSION


def params_from_checkpoint(ckpt: Checkpoint, side: str = "q") -> GinParams:
    """Rebuild float64 encoder parameters from stored tensors."""
    tensors = ckpt.theta_q if side == "q" else ckpt.theta_k
    if tensors is None:
        raise ValueError(f"checkpoint has no '{side}' encoder")
    return GinParams(config=ckpt.config.gin,
                     tensors={k: v.astype(np.float64) for k, v in tensors.items()})


def random_checkpoint(cfg: PretrainConfig) -> Checkpoint:
    """A step-0 checkpoint with freshly initialized state (no training)."""
    trainer = _Trainer(cfg)
    return trainer.checkpoint()


class _Trainer:
    """Mutable training state plus the per-step update."""

    def __init__(self, cfg: PretrainConfig, corpus=(), start: Checkpoint | None = None):
        self.cfg = cfg
        self.corpus = list(corpus)
        self.streams = RandomStreams(cfg.seed)
        self.schedule = LrSchedule(cfg.peak_lr, cfg.warmup_steps, cfg.total_steps)
        self.is_moco = cfg.contrast.mechanism == "moco"

        if start is None:
            q = init_params(cfg.gin, self.streams.child("init"))
            self.pair = EncoderPair.from_query(q) if self.is_moco else None
            self.params_q = q
            self.adam = AdamState.init_like(q.tensors)
            self.queue = None
            if self.is_moco:
                self.queue = MocoQueue.init_random(cfg.contrast.dictionary_size,
                                                   cfg.gin.out_dim,
                                                   self.streams.child("queue"))
            self.step = 0
        else:
            if start.config != cfg:
                raise ValueError("resume config does not match the checkpoint's config")
            self.params_q = params_from_checkpoint(start, "q")
            self.pair = None
            self.queue = None
            if self.is_moco:
                self.pair = EncoderPair(query=self.params_q,
                                        key=params_from_checkpoint(start, "k"))
                self.queue = MocoQueue(storage=start.queue_storage.astype(np.float64),
                                       write_ptr=start.queue_write_ptr,
                                       filled=start.queue_filled)
            self.adam = AdamState(
                m={k: v.astype(np.float64) for k, v in start.adam_m.items()},
                v={k: v.astype(np.float64) for k, v in start.adam_v.items()},
                step_count=start.adam_step_count)
            self.step = start.step

    def run_step(self) -> float:
        cfg = self.cfg
        step = self.step
        batch = make_batch_for_step(self.corpus, cfg, self.streams, step)

        if self.is_moco:
            q_res = encode_batch(self.params_q, batch.queries, train=True,
                                 rng=self.streams.child("dropout", step, "q"),
                                 trainable=True)
            k_res = encode_batch(self.pair.key, batch.positive_keys, train=True,
                                 rng=self.streams.child("dropout", step, "k"))
            loss, grad_reps = moco_step(q_res.graph_reps.values, k_res.graph_reps.values,
                                        self.queue, cfg.contrast.temperature)
            if not math.isfinite(loss):
                raise TrainingDivergedError(step, [s.source for s in batch.queries])
            grads = batch_grads(q_res, grad_reps)
        else:
            combined = list(batch.queries) + list(batch.positive_keys)
            res = encode_batch(self.params_q, combined, train=True,
                               rng=self.streams.child("dropout", step, "qk"),
                               trainable=True)
            b = len(batch)
            reps = res.graph_reps.values
            loss, gq, gk = e2e_step(reps[:b], reps[b:], cfg.contrast.temperature)
            if not math.isfinite(loss):
                raise TrainingDivergedError(step, [s.source for s in batch.queries])
            grads = batch_grads(res, np.concatenate([gq, gk], axis=0))

        clip_gradients(grads, cfg.clip_norm)
        lr = lr_at(self.schedule, step)
        adam_step(self.params_q.tensors, grads, self.adam, lr,
                  weight_decay=cfg.weight_decay)
        if self.is_moco:
            momentum_update(self.pair, cfg.contrast.momentum)
        self.step += 1
        return loss

    def checkpoint(self) -> Checkpoint:
        """Snapshot state to f32 and round the live copy through the same
        precision, so continuing equals resuming from the snapshot."""

        def snap(d: dict) -> dict:
            out = {}
            for k, arr in d.items():
                f32 = arr.astype(np.float32)
                d[k] = f32.astype(np.float64)
                out[k] = f32
            return out

        theta_q = snap(self.params_q.tensors)
        theta_k = None
        q_store = None
        ptr = 0
        filled = 0
        if self.is_moco:
            theta_k = snap(self.pair.key.tensors)
            f32 = self.queue.storage.astype(np.float32)
            self.queue.storage = f32.astype(np.float64)
            q_store = f32
            ptr = self.queue.write_ptr
            filled = self.queue.filled
        adam_m = snap(self.adam.m)
        adam_v = snap(self.adam.v)
        return Checkpoint(config=self.cfg, step=self.step,
                          theta_q=theta_q, theta_k=theta_k,
                          adam_m=adam_m, adam_v=adam_v,
                          adam_step_count=self.adam.step_count,
                          queue_storage=q_store, queue_write_ptr=ptr,
                          queue_filled=filled)


def make_batch_for_step(corpus, cfg: PretrainConfig, streams: RandomStreams, step: int):
    return make_batch(corpus, cfg.batch_size, cfg.rwr, streams.child("batch", step))


def pretrain(corpus, cfg: PretrainConfig, progress=None, start: Checkpoint | None = None,
             checkpoint_sink=None) -> Checkpoint:
    """Run (or resume) pre-training and return the final checkpoint.

    progress, if given, is called as progress(step, loss, lr) after each
    step. checkpoint_sink, if given, is called with every intermediate
    Checkpoint produced at checkpoint_interval boundaries.
    """
    if not corpus:
        raise ValueError("training corpus is empty")
    trainer = _Trainer(cfg, corpus, start=start)
    if trainer.step >= cfg.total_steps:
        raise ValueError(f"checkpoint already at step {trainer.step} of {cfg.total_steps}")

    final = None
    while trainer.step < cfg.total_steps:
        step = trainer.step
        loss = trainer.run_step()
        if progress is not None:
            progress(step, loss, lr_at(trainer.schedule, step))
        done = trainer.step
        if done % cfg.checkpoint_interval == 0 or done == cfg.total_steps:
            ckpt = trainer.checkpoint()
            if done == cfg.total_steps:
                final = ckpt
            elif checkpoint_sink is not None:
                checkpoint_sink(ckpt)
    return final


def instance_discrimination_accuracy(ckpt: Checkpoint, corpus, trials: int,
                                     seed: int = 0, negatives: int | None = None) -> float:
    """Fraction of trials where the positive key outscores K fresh
    negatives under the checkpoint's query encoder.

    Each trial draws an instance, two views of it, and K views of freshly
    drawn instances, all from per-trial streams. Candidates scoring within
    the encoder's permutation-invariance tolerance of the best are treated
    as tied and resolved uniformly from the trial's stream; isomorphic
    views encode to representations equal only up to float noise that
    correlates with the original vertex ids, so exact comparison would
    let that noise, not structure, pick the winner.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not corpus:
        raise ValueError("corpus is empty")
    params = params_from_checkpoint(ckpt, "q")
    k_neg = ckpt.config.contrast.dictionary_size if negatives is None else negatives
    rwr = ckpt.config.rwr
    sizes = np.array([g.num_vertices for g in corpus], dtype=np.float64)
    weights = sizes / sizes.sum()
    root = RandomStreams(seed, "instance-discrimination")

    per_trial = k_neg + 2
    chunk = max(1, 4096 // per_trial)
    hits = 0
    for base in range(0, trials, chunk):
        count = min(chunk, trials - base)
        subs = []
        tie_streams = []
        for t in range(base, base + count):
            ts = root.child(t)
            pick = ts.child("pick").generator()
            gi = int(pick.choice(len(corpus), p=weights))
            v = int(pick.integers(0, corpus[gi].num_vertices))
            subs.append(augment(corpus[gi], v, rwr, ts.child("q"), graph_index=gi))
            subs.append(augment(corpus[gi], v, rwr, ts.child("k"), graph_index=gi))
            for j in range(k_neg):
                gen = ts.child("neg", j).generator()
                ngi = int(gen.choice(len(corpus), p=weights))
                nv = int(gen.integers(0, corpus[ngi].num_vertices))
                subs.append(augment(corpus[ngi], nv, rwr, gen, graph_index=ngi))
            tie_streams.append(ts.child("tie"))
        reps = encode_batch(params, subs, train=False).graph_reps.values
        for i in range(count):
            rows = reps[i * per_trial:(i + 1) * per_trial]
            q = rows[0]
            dots = rows[1:] @ q
            tied = np.flatnonzero(dots >= dots.max() - SCORE_TIE_TOL)
            if len(tied) == 1:
                hits += int(tied[0] == 0)
            elif 0 in tied:
                gen = tie_streams[i].generator()
                hits += int(gen.integers(0, len(tied)) == 0)
    return hits / trials
