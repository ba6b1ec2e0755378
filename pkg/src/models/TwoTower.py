"""
Two-tower encoder (a small YoutubeDNN): user and item towers, the sampled
softmax loss, exact gradients through both towers and embedding tables, and
Adam updates. Everything is float64.

User tower input is [user_emb[u] ; mean(item_emb[history])], item tower input
is item_emb[i]. Both towers are Linear -> ReLU -> Linear.
"""
from __future__ import annotations

import dataclasses
import logging
from enum import Enum
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from ..lib.costants import MIN_LOSS, ZERO_NORM
from ..providers.providers_list import interaction_provider
from .Models import IndexOutOfRange, NonFiniteParams

TENSOR_NAMES = (
    'user_emb', 'item_emb',
    'user_w1', 'user_b1', 'user_w2', 'user_b2',
    'item_w1', 'item_b1', 'item_w2', 'item_b2',
)

EMB_INIT_RANGE = 0.05


class MixupMode(Enum):
    OUTPUT_SPACE = 'output_space'
    REPRESENTATION_SPACE = 'representation_space'


@dataclasses.dataclass
class HyperParams():
    dim: int = 32
    num_negatives: int = 20
    lr: float = 0.001
    batch_size: int = 256
    epochs: int = 10
    k: int = 50
    k_u: int = 10
    m: int = 3
    alpha: float = 0.5
    beta_mix: float = 0.1
    max_history: int = 50
    seed: int = 0
    hidden_mult: int = 2
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        for name in ('dim', 'num_negatives', 'batch_size', 'k', 'k_u', 'm', 'max_history', 'hidden_mult'):
            if getattr(self, name) < 1:
                raise ValueError(f'{name} must be >= 1')

        if self.epochs < 0:
            raise ValueError('epochs must be >= 0')
        if not self.lr > 0:
            raise ValueError('lr must be > 0')
        if not self.alpha > 0:
            raise ValueError('alpha must be > 0')
        if self.beta_mix < 0:
            raise ValueError('beta_mix must be >= 0')
        if not (0 <= self.adam_beta1 < 1 and 0 <= self.adam_beta2 < 1):
            raise ValueError('Adam betas must lie in [0, 1)')

    @property
    def hidden(self) -> int:
        return self.dim * self.hidden_mult

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclasses.dataclass
class AdamState():
    m: Dict[str, np.ndarray]
    v: Dict[str, np.ndarray]
    step: int = 0


@dataclasses.dataclass(eq=False)
class ModelParams():
    user_emb: np.ndarray
    item_emb: np.ndarray
    user_w1: np.ndarray
    user_b1: np.ndarray
    user_w2: np.ndarray
    user_b2: np.ndarray
    item_w1: np.ndarray
    item_b1: np.ndarray
    item_w2: np.ndarray
    item_b2: np.ndarray
    adam: Optional[AdamState] = None

    def __post_init__(self):
        if self.adam is None:
            self.adam = AdamState(
                m={n: np.zeros_like(t) for n, t in self.tensors().items()},
                v={n: np.zeros_like(t) for n, t in self.tensors().items()},
            )

    @property
    def num_users(self) -> int:
        return self.user_emb.shape[0]

    @property
    def num_items(self) -> int:
        return self.item_emb.shape[0]

    @property
    def dim(self) -> int:
        return self.item_emb.shape[1]

    def tensors(self) -> Dict[str, np.ndarray]:
        return {n: getattr(self, n) for n in TENSOR_NAMES}

    def copy(self) -> ModelParams:
        adam = AdamState(
            m={n: t.copy() for n, t in self.adam.m.items()},
            v={n: t.copy() for n, t in self.adam.v.items()},
            step=self.adam.step,
        )
        return ModelParams(**{n: t.copy() for n, t in self.tensors().items()}, adam=adam)

    def check_finite(self):
        for name, t in self.tensors().items():
            if not np.all(np.isfinite(t)):
                raise NonFiniteParams(name)


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_params(num_users: int, num_items: int, hp: HyperParams, rng: np.random.Generator) -> ModelParams:
    d, h = hp.dim, hp.hidden

    return ModelParams(
        user_emb=rng.uniform(-EMB_INIT_RANGE, EMB_INIT_RANGE, size=(num_users, d)),
        item_emb=rng.uniform(-EMB_INIT_RANGE, EMB_INIT_RANGE, size=(num_items, d)),
        user_w1=_glorot(rng, 2 * d, h),
        user_b1=np.zeros(h),
        user_w2=_glorot(rng, h, d),
        user_b2=np.zeros(d),
        item_w1=_glorot(rng, d, h),
        item_b1=np.zeros(h),
        item_w2=_glorot(rng, h, d),
        item_b2=np.zeros(d),
    )


# ---- forward / backward helpers

def _mlp_forward(x: np.ndarray, w1, b1, w2, b2) -> Tuple[np.ndarray, tuple]:
    z1 = x @ w1 + b1
    h = np.maximum(z1, 0.0)
    return h @ w2 + b2, (x, z1, h)


def _mlp_backward(cache: tuple, w1, w2, d_out: np.ndarray) -> tuple:
    x, z1, h = cache
    d_w2 = h.T @ d_out
    d_b2 = d_out.sum(axis=0)
    d_z1 = (d_out @ w2.T) * (z1 > 0)
    d_w1 = x.T @ d_z1
    d_b1 = d_z1.sum(axis=0)
    d_x = d_z1 @ w1.T
    return d_x, d_w1, d_b1, d_w2, d_b2


def _history_means(item_emb: np.ndarray, histories: Sequence[Sequence[int]]) -> Tuple[np.ndarray, tuple]:
    """Mean history embedding per row (zero for an empty history), plus what backward needs"""
    rows, items, scale = [], [], []

    for b, hist in enumerate(histories):
        if len(hist):
            rows.extend([b] * len(hist))
            items.extend(hist)
            scale.extend([1.0 / len(hist)] * len(hist))

    rows = np.array(rows, dtype=np.int64)
    items = np.array(items, dtype=np.int64)
    scale = np.array(scale, dtype=np.float64)

    means = np.zeros((len(histories), item_emb.shape[1]))
    if len(items):
        np.add.at(means, rows, item_emb[items] * scale[:, None])

    return means, (rows, items, scale)


def _check_index(kind: str, index, size: int):
    idx = np.asarray(index)
    if idx.size and (idx.min() < 0 or idx.max() >= size):
        bad = int(idx[(idx < 0) | (idx >= size)].flat[0])
        raise IndexOutOfRange(kind, bad, size)


def _user_inputs(params: ModelParams, users: np.ndarray, histories: Sequence[Sequence[int]]):
    _check_index('user', users, params.num_users)
    for hist in histories:
        _check_index('item', hist, params.num_items)

    means, hist_cache = _history_means(params.item_emb, histories)
    return np.concatenate([params.user_emb[users], means], axis=1), hist_cache


# ---- encoders

def encode_users(params: ModelParams, users: Sequence[int], histories: Sequence[Sequence[int]]) -> np.ndarray:
    users = np.asarray(users, dtype=np.int64)
    x, _ = _user_inputs(params, users, histories)
    out, _ = _mlp_forward(x, params.user_w1, params.user_b1, params.user_w2, params.user_b2)
    return out


def encode_user(params: ModelParams, user: int, history) -> np.ndarray:
    items = history.items if hasattr(history, 'items') else (history or ())
    return encode_users(params, [user], [tuple(items)])[0]


def encode_items(params: ModelParams, items: Optional[Sequence[int]] = None) -> np.ndarray:
    if items is None:
        items = np.arange(params.num_items)

    items = np.asarray(items, dtype=np.int64)
    _check_index('item', items, params.num_items)
    out, _ = _mlp_forward(params.item_emb[items], params.item_w1, params.item_b1, params.item_w2, params.item_b2)
    return out


def encode_item(params: ModelParams, item: int) -> np.ndarray:
    return encode_items(params, [item])[0]


def encode_all_users(params: ModelParams, histories: dict) -> np.ndarray:
    """Representations of every user; users absent from `histories` get an empty history"""
    users = np.arange(params.num_users)
    hists = [histories[u].items if u in histories else () for u in users.tolist()]
    return encode_users(params, users, hists)


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)

    if na < ZERO_NORM or nb < ZERO_NORM:
        return 0.0

    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


# ---- loss

def loss_from_logits(pos: np.ndarray, negs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Per-row sampled softmax loss -log(e^pos / (e^pos + sum e^negs)) and d loss / d negs.
    d loss / d pos is -sum(d loss / d negs).
    Evaluated relative to the positive logit: a dominant positive keeps a tiny
    positive loss rather than 0.
    """
    r = negs - pos[:, None]
    shift = np.maximum(r.max(axis=1), 0.0)
    e = np.exp(r - shift[:, None])
    tail = e.sum(axis=1)
    z = np.exp(-shift) + tail
    loss = np.where(shift > 0, shift + np.log(z), np.log1p(tail))
    loss = np.maximum(loss, MIN_LOSS)
    return loss, e / z[:, None]


def _softmax_term(u: np.ndarray, target: np.ndarray, negs: np.ndarray):
    s_pos = np.einsum('bd,bd->b', u, target)
    s_neg = np.einsum('bd,bnd->bn', u, negs)
    loss, p_neg = loss_from_logits(s_pos, s_neg)
    g_pos = -p_neg.sum(axis=1)

    d_u = g_pos[:, None] * target + np.einsum('bn,bnd->bd', p_neg, negs)
    d_target = g_pos[:, None] * u
    d_negs = p_neg[:, :, None] * u[:, None, :]
    return loss, d_u, d_target, d_negs


def sampled_softmax_loss(u: np.ndarray, v_pos: np.ndarray, v_negs: Sequence[np.ndarray]) -> float:
    negs = np.asarray(v_negs, dtype=np.float64)
    s_pos = np.array([np.dot(u, v_pos)], dtype=np.float64)
    s_neg = (negs @ np.asarray(u, dtype=np.float64))[None, :]
    loss, _ = loss_from_logits(s_pos, s_neg)
    return float(loss[0])


@dataclasses.dataclass
class TrainBatch():
    users: np.ndarray
    histories: Sequence[Sequence[int]]
    pos_items: np.ndarray
    negatives: np.ndarray
    # optional mix-up positives, padded with weight 0
    aug_items: Optional[np.ndarray] = None
    aug_weights: Optional[np.ndarray] = None

    def has_aug(self) -> bool:
        return self.aug_items is not None and self.aug_items.size > 0 and bool(np.any(self.aug_weights > 0))


def loss_and_grads(params: ModelParams, batch: TrainBatch, beta_mix: float = 0.0,
                   mode: MixupMode = MixupMode.OUTPUT_SPACE) -> Tuple[float, Dict[str, np.ndarray]]:
    """
    Mean loss over the batch and its exact gradient for every tensor.
    With beta_mix = 0 (or no augmented items) this is the plain sampled softmax loss
    and the augmented rows never enter the computation.
    """
    users = np.asarray(batch.users, dtype=np.int64)
    pos = np.asarray(batch.pos_items, dtype=np.int64)
    negatives = np.asarray(batch.negatives, dtype=np.int64)
    B, n = negatives.shape
    d = params.dim

    use_aug = beta_mix > 0 and batch.has_aug()

    x_u, hist_cache = _user_inputs(params, users, batch.histories)
    u, u_cache = _mlp_forward(x_u, params.user_w1, params.user_b1, params.user_w2, params.user_b2)

    parts = [pos, negatives.ravel()]
    if use_aug:
        aug_items = np.asarray(batch.aug_items, dtype=np.int64)
        weights = np.asarray(batch.aug_weights, dtype=np.float64)
        parts.append(aug_items.ravel())

    item_rows = np.concatenate(parts)
    _check_index('item', item_rows, params.num_items)
    v_all, i_cache = _mlp_forward(params.item_emb[item_rows], params.item_w1, params.item_b1, params.item_w2, params.item_b2)

    v_pos = v_all[:B]
    v_neg = v_all[B:B + B * n].reshape(B, n, d)

    d_aug = None
    if not use_aug:
        loss, d_u, d_pos, d_neg = _softmax_term(u, v_pos, v_neg)
    elif mode is MixupMode.OUTPUT_SPACE:
        A = aug_items.shape[1]
        v_aug = v_all[B + B * n:].reshape(B, A, d)
        loss, d_u, d_pos, d_neg = _softmax_term(u, v_pos, v_neg)
        d_aug = np.zeros_like(v_aug)

        for a in range(A):
            c = beta_mix * weights[:, a]
            l_a, du_a, dt_a, dn_a = _softmax_term(u, v_aug[:, a], v_neg)
            loss = loss + c * l_a
            d_u = d_u + c[:, None] * du_a
            d_neg = d_neg + c[:, None, None] * dn_a
            d_aug[:, a] = c[:, None] * dt_a
    else:
        A = aug_items.shape[1]
        v_aug = v_all[B + B * n:].reshape(B, A, d)
        v_mix = v_pos + beta_mix * np.einsum('ba,bad->bd', weights, v_aug)
        loss, d_u, d_mix, d_neg = _softmax_term(u, v_mix, v_neg)
        d_pos = d_mix
        d_aug = beta_mix * weights[:, :, None] * d_mix[:, None, :]

    scale = 1.0 / B
    d_parts = [d_pos, d_neg.reshape(B * n, d)]
    if d_aug is not None:
        d_parts.append(d_aug.reshape(-1, d))
    d_v = np.concatenate(d_parts) * scale
    d_u = d_u * scale

    grads = {name: np.zeros_like(t) for name, t in params.tensors().items()}

    d_x, grads['item_w1'], grads['item_b1'], grads['item_w2'], grads['item_b2'] = \
        _mlp_backward(i_cache, params.item_w1, params.item_w2, d_v)
    np.add.at(grads['item_emb'], item_rows, d_x)

    d_xu, grads['user_w1'], grads['user_b1'], grads['user_w2'], grads['user_b2'] = \
        _mlp_backward(u_cache, params.user_w1, params.user_w2, d_u)
    np.add.at(grads['user_emb'], users, d_xu[:, :d])

    rows, items, hscale = hist_cache
    if len(items):
        np.add.at(grads['item_emb'], items, d_xu[rows, d:] * hscale[:, None])

    return float(loss.mean()), grads


def adam_update(params: ModelParams, grads: Dict[str, np.ndarray], hp: HyperParams):
    state = params.adam
    state.step += 1
    b1, b2 = hp.adam_beta1, hp.adam_beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step

    for name, t in params.tensors().items():
        g = grads[name]
        state.m[name] *= b1
        state.m[name] += (1.0 - b1) * g
        state.v[name] *= b2
        state.v[name] += (1.0 - b2) * g * g
        m_hat = state.m[name] / c1
        v_hat = state.v[name] / c2
        t -= hp.lr * m_hat / (np.sqrt(v_hat) + hp.adam_eps)

    params.check_finite()


def sample_batch_negatives(rng: np.random.Generator, num_items: int, pos_items: np.ndarray, n: int) -> np.ndarray:
    return np.stack([
        interaction_provider.sample_negatives(rng, num_items, (int(p),), n)
        for p in pos_items
    ])


def train_step(params: ModelParams, batch: Sequence[tuple], hp: HyperParams, rng: np.random.Generator,
               aug_items: Optional[np.ndarray] = None, aug_weights: Optional[np.ndarray] = None,
               beta_mix: float = 0.0, mode: MixupMode = MixupMode.OUTPUT_SPACE) -> float:
    """
    One Adam step over `batch`, a sequence of (user, history, pos_item).
    Fresh negatives are sampled per example; returns the mean batch loss before the update.
    """
    if not len(batch):
        raise ValueError('Empty training batch')

    users = np.array([b[0] for b in batch], dtype=np.int64)
    histories = [tuple(b[1].items) if hasattr(b[1], 'items') else tuple(b[1]) for b in batch]
    pos = np.array([b[2] for b in batch], dtype=np.int64)

    negatives = sample_batch_negatives(rng, params.num_items, pos, hp.num_negatives)
    train_batch = TrainBatch(users, histories, pos, negatives, aug_items, aug_weights)

    loss, grads = loss_and_grads(params, train_batch, beta_mix=beta_mix, mode=mode)
    adam_update(params, grads, hp)

    logging.debug(f'train_step: batch={len(batch)} loss={loss:.6f} step={params.adam.step}')
    return loss
