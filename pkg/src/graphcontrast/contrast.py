"""InfoNCE objective and the two dictionary mechanisms.

The loss for a query q with positive key k+ and negatives {n_i} is

    -log( exp(q.k+/T) / (exp(q.k+/T) + sum_i exp(q.n_i/T)) )

computed through a max-shifted log-softmax. Two ways of supplying the
negatives are implemented:

* end-to-end: the other keys in the batch are the negatives and both
  sides share one parameter set that receives gradient;
* momentum (queue): negatives come from a FIFO queue of past key
  representations, only the query encoder receives gradient, and the key
  encoder trails it as an exponential moving average.

The step functions work on representation matrices and return analytic
gradients with respect to them, so any encoder that can accept an output
cotangent can be trained with them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .encoder import GinParams
from .streams import as_generator

MECHANISMS = ("e2e", "moco")


@dataclass(frozen=True)
class ContrastConfig:
    temperature: float = 0.07
    dictionary_size: int = 16384
    momentum: float = 0.999
    mechanism: str = "moco"

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError(f"temperature must be positive, got {self.temperature}")
        if self.dictionary_size < 1:
            raise ValueError(f"dictionary_size must be >= 1, got {self.dictionary_size}")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.mechanism not in MECHANISMS:
            raise ValueError(f"mechanism must be one of {MECHANISMS}, got {self.mechanism!r}")


def _nce_losses(pos_logits, neg_logits):
    """Per-row loss given positive logits (B,) and negative logits (B, K),
    plus the softmax weights needed for gradients."""
    logits = np.concatenate([pos_logits[:, None], neg_logits], axis=1)
    shifted = logits - logits.max(axis=1, keepdims=True)
    expz = np.exp(shifted)
    norm = expz.sum(axis=1, keepdims=True)
    probs = expz / norm
    losses = np.log(norm[:, 0]) - shifted[:, 0]
    return losses, probs


def infonce(q, k_plus, negatives, temperature: float):
    """Single-query InfoNCE.

    q, k_plus: (d,) vectors; negatives: (K, d), K may be 0.
    Returns (loss, grad_q, grad_k_plus, grad_negatives).
    """
    q = np.asarray(q, dtype=np.float64).reshape(-1)
    k_plus = np.asarray(k_plus, dtype=np.float64).reshape(-1)
    negatives = np.asarray(negatives, dtype=np.float64).reshape(-1, len(q))
    if temperature <= 0:
        raise ValueError("temperature must be positive")

    pos = np.array([q @ k_plus]) / temperature
    neg = (negatives @ q)[None, :] / temperature
    losses, probs = _nce_losses(pos, neg)
    loss = float(losses[0])
    w = probs[0]  # (K+1,), w[0] belongs to the positive
    keys = np.concatenate([k_plus[None, :], negatives], axis=0)
    grad_q = (w @ keys - k_plus) / temperature
    grad_k_plus = (w[0] - 1.0) * q / temperature
    grad_negatives = w[1:, None] * q[None, :] / temperature
    return loss, grad_q, grad_k_plus, grad_negatives


def e2e_step(q_reps, k_reps, temperature: float):
    """In-batch discrimination: row i's positive is k_reps[i], its
    negatives are the other B-1 keys. Returns (mean loss, grad_q, grad_k).
    """
    q = np.asarray(q_reps, dtype=np.float64)
    k = np.asarray(k_reps, dtype=np.float64)
    if q.shape != k.shape:
        raise ValueError(f"query/key shape mismatch: {q.shape} vs {k.shape}")
    b = q.shape[0]
    if b < 2:
        raise ValueError("end-to-end batches need at least 2 instances")
    logits = (q @ k.T) / temperature
    shifted = logits - logits.max(axis=1, keepdims=True)
    expz = np.exp(shifted)
    norm = expz.sum(axis=1, keepdims=True)
    probs = expz / norm
    losses = np.log(norm[:, 0]) - shifted[np.arange(b), np.arange(b)]
    # d(mean loss)/d logits = (probs - I) / B
    dlogits = (probs - np.eye(b)) / b
    grad_q = dlogits @ k / temperature
    grad_k = dlogits.T @ q / temperature
    return float(losses.mean()), grad_q, grad_k


@dataclass
class MocoQueue:
    """Fixed-capacity FIFO of key representations, stored row-wise."""

    storage: np.ndarray
    write_ptr: int = 0
    filled: int = 0

    @classmethod
    def init_random(cls, capacity: int, dim: int, rng) -> "MocoQueue":
        """Start full of random unit vectors so the loss has a complete
        dictionary from the first step."""
        gen = as_generator(rng)
        raw = gen.standard_normal((capacity, dim))
        raw /= np.linalg.norm(raw, axis=1, keepdims=True)
        return cls(storage=raw, write_ptr=0, filled=capacity)

    @property
    def capacity(self) -> int:
        return self.storage.shape[0]

    def enqueue(self, rows: np.ndarray) -> None:
        rows = np.asarray(rows, dtype=self.storage.dtype)
        if rows.shape[1] != self.storage.shape[1]:
            raise ValueError("queued rows have the wrong width")
        if len(rows) > self.capacity:
            raise ValueError(f"cannot enqueue {len(rows)} rows into capacity {self.capacity}")
        for row in rows:  # oldest rows are overwritten first
            self.storage[self.write_ptr] = row
            self.write_ptr = (self.write_ptr + 1) % self.capacity
        self.filled = min(self.capacity, self.filled + len(rows))

    def as_array(self) -> np.ndarray:
        return self.storage


def moco_step(q_reps, k_reps, queue: MocoQueue, temperature: float):
    """Queue-based discrimination; gradient flows to queries only.

    Keys are enqueued after the loss is computed, so a batch never
    competes against its own keys. Returns (mean loss, grad_q).
    """
    q = np.asarray(q_reps, dtype=np.float64)
    k = np.asarray(k_reps, dtype=np.float64)
    if q.shape != k.shape:
        raise ValueError(f"query/key shape mismatch: {q.shape} vs {k.shape}")
    if len(q) > queue.capacity:
        raise ValueError(f"batch of {len(q)} exceeds queue capacity {queue.capacity}")
    negatives = queue.as_array()
    pos = np.sum(q * k, axis=1) / temperature
    neg = (q @ negatives.T) / temperature
    losses, probs = _nce_losses(pos, neg)
    b = len(q)
    grad_q = ((probs[:, 0, None] - 1.0) * k + probs[:, 1:] @ negatives) / (temperature * b)
    queue.enqueue(k)
    return float(losses.mean()), grad_q


@dataclass
class EncoderPair:
    """Query encoder and its momentum-trailed key encoder."""

    query: GinParams
    key: GinParams

    @classmethod
    def from_query(cls, query: GinParams) -> "EncoderPair":
        return cls(query=query, key=query.copy())


def momentum_update(pair: EncoderPair, momentum: float) -> None:
    """theta_k <- momentum * theta_k + (1 - momentum) * theta_q, in place."""
    if not 0.0 <= momentum < 1.0:
        raise ValueError(f"momentum must be in [0, 1), got {momentum}")
    for name, q in pair.query.tensors.items():
        k = pair.key.tensors[name]
        k *= momentum
        k += (1.0 - momentum) * q


def tape_infonce(q: ad.Tensor, k_plus: ad.Tensor, negatives: np.ndarray,
                 temperature: float) -> ad.Tensor:
    """InfoNCE as tape ops, for end-to-end gradient checks and fine-tuning.

    q, k_plus are 1 x d tensors on a tape; negatives is a constant K x d
    array. Returns the scalar loss tensor.
    """
    pos = ad.scale(ad.row_sum(ad.mul(q, k_plus)), 1.0 / temperature)
    neg = ad.scale(ad.matmul(q, ad.transpose(ad.constant(negatives))), 1.0 / temperature)
    logits = ad.concat_cols([pos, neg])
    logp = ad.log_softmax(logits)
    picker = np.zeros((logits.shape[1], 1))
    picker[0, 0] = 1.0
    return ad.scale(ad.matmul(logp, ad.constant(picker)), -1.0)
