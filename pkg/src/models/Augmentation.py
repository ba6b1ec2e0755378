"""
Self-distilled positive augmentation.

A trained model's own representations nominate extra positives for every
train interaction from three sources (user->item, seed item->item, and the
real clicks of similar users), each source keeps at most m of its top-k
candidates by sampling, and the kept items are weighted by their rectified
user relevance, normalized within the source.
"""
from __future__ import annotations

import dataclasses
import logging
from collections import Counter
from enum import Enum
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence

import numpy as np

from ..lib.async_utils import threaded_map
from ..lib.costants import SCORE_FLOOR
from ..lib.utils import derive_rng
from .Interactions import Dataset, UserHistory
from .Models import DimensionMismatch
from .RetrievalIndex import EmbeddingIndex, build_index
from .TwoTower import ModelParams, HyperParams, encode_all_users, encode_items

BETA_MAX_ATTEMPTS_PER_DRAW = 16


class CandidateSource(Enum):
    U2I = 'u2i'
    I2I = 'i2i'
    U2U2I = 'u2u2i'


class Sampler(Enum):
    UNIFORM = 'uniform'
    IMPORTANCE = 'importance'
    BETA = 'beta'


ALL_SOURCES = (CandidateSource.U2I, CandidateSource.I2I, CandidateSource.U2U2I)


@dataclasses.dataclass(frozen=True)
class PositiveCandidate():
    user: int
    item: int
    # relevance the candidate was selected by: s(u, v), or s(v+, v) for i2i
    score: float
    source: CandidateSource
    # s(u, v), what the mix-up weight is computed from
    user_score: float


@dataclasses.dataclass(frozen=True)
class AugmentedItem():
    item: int
    weight: float
    select_score: float
    user_score: float


@dataclasses.dataclass
class AugmentedExample():
    user: int
    pos_item: int
    aug: Dict[CandidateSource, List[AugmentedItem]] = dataclasses.field(default_factory=dict)

    def items(self) -> List[AugmentedItem]:
        return [a for source in ALL_SOURCES for a in self.aug.get(source, [])]

    def __len__(self):
        return len(self.items())


def rectify(score: float) -> float:
    return max(score, 0.0) + SCORE_FLOOR


def normalized_weights(scores: Sequence[float]) -> List[float]:
    rect = [rectify(s) for s in scores]
    total = sum(rect)
    return [r / total for r in rect]


# ---- candidate generation

def gen_u2i(user: int, user_repr: np.ndarray, item_index: EmbeddingIndex, k: int,
            exclude: Iterable[int]) -> List[PositiveCandidate]:
    return [
        PositiveCandidate(user=user, item=row, score=score, source=CandidateSource.U2I, user_score=score)
        for row, score in item_index.topk(user_repr, k, exclude)
    ]


def gen_i2i(user: int, seed_item_repr: np.ndarray, item_index: EmbeddingIndex, k: int,
            exclude: Iterable[int], user_repr: Optional[np.ndarray] = None) -> List[PositiveCandidate]:
    """
    Neighbours of the seed item. The seed itself must be part of `exclude`.
    user_score is s(u, v) when user_repr is given, else it mirrors the selection score.
    """
    ranked = item_index.topk(seed_item_repr, k, exclude)
    user_scores = None
    if user_repr is not None and ranked:
        user_scores = item_index.vectors[[r for r, _ in ranked]] @ _unit(user_repr)

    return [
        PositiveCandidate(
            user=user, item=row, score=score, source=CandidateSource.I2I,
            user_score=float(user_scores[j]) if user_scores is not None else score,
        )
        for j, (row, score) in enumerate(ranked)
    ]


def gen_u2u2i(user: int, user_repr: np.ndarray, user_index: EmbeddingIndex, k_u: int,
              train_positives: Dict[int, FrozenSet[int]], item_index: EmbeddingIndex, k: int,
              exclude: Iterable[int], idle_users: Optional[FrozenSet[int]] = None) -> List[PositiveCandidate]:
    """
    Pools the real train positives of the k_u most similar users (the user itself left out),
    drops `exclude`, and keeps the k best of the pool by s(u, v).
    Users without train positives are never neighbours; `idle_users` may carry them precomputed.
    """
    if k_u < 1:
        raise ValueError('k_u must be >= 1')
    if user_index.dim != item_index.dim:
        raise DimensionMismatch(f'User index has dim {user_index.dim}, item index has {item_index.dim}')

    if idle_users is None:
        idle_users = users_without_positives(user_index.rows, train_positives)

    neighbours = user_index.topk(user_repr, k_u, exclude=idle_users | {user})
    excluded = set(exclude)
    pool = set()

    for neighbour, _ in neighbours:
        pool.update(train_positives.get(neighbour, ()))

    pool = np.array(sorted(pool - excluded), dtype=np.int64)
    if not len(pool):
        return []

    scores = item_index.vectors[pool] @ _unit(user_repr)
    order = np.lexsort((pool, -scores))[:k]

    return [
        PositiveCandidate(user=user, item=int(pool[j]), score=float(scores[j]),
                          source=CandidateSource.U2U2I, user_score=float(scores[j]))
        for j in order
    ]


def users_without_positives(num_users: int, train_positives: Dict[int, FrozenSet[int]]) -> FrozenSet[int]:
    return frozenset(u for u in range(num_users) if not train_positives.get(u))


def _unit(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v)
    return v / n if n > 0 else np.zeros_like(v)


# ---- positive sampling

def sample_candidates(cands: Sequence[PositiveCandidate], m: int, sampler: Sampler, alpha: float,
                      rng: np.random.Generator) -> List[PositiveCandidate]:
    """
    At most m distinct candidates, without replacement, returned in rank order.
    uniform: equiprobable; importance: proportional to rectified score, renormalized
    after every draw; beta: a Beta(alpha, alpha) draw placed on the rank axis.
    """
    if m < 1:
        raise ValueError('m must be >= 1')
    if not alpha > 0:
        raise ValueError('alpha must be > 0')

    if len(cands) <= m:
        return list(cands)

    if sampler is Sampler.UNIFORM:
        picked = rng.choice(len(cands), size=m, replace=False).tolist()
    elif sampler is Sampler.IMPORTANCE:
        picked = _importance_draws(cands, m, rng)
    elif sampler is Sampler.BETA:
        picked = _beta_draws(len(cands), m, alpha, rng)
    else:
        raise ValueError(f'Unknown sampler {sampler}')

    return [cands[i] for i in sorted(picked)]


def _importance_draws(cands: Sequence[PositiveCandidate], m: int, rng: np.random.Generator) -> List[int]:
    remaining = list(range(len(cands)))
    weights = np.array([rectify(c.score) for c in cands])
    picked = []

    for _ in range(m):
        w = weights[remaining]
        j = rng.choice(len(remaining), p=w / w.sum())
        picked.append(remaining.pop(j))

    return picked


def _beta_draws(size: int, m: int, alpha: float, rng: np.random.Generator) -> List[int]:
    picked: List[int] = []
    attempts = 0

    while len(picked) < m and attempts < BETA_MAX_ATTEMPTS_PER_DRAW * m:
        attempts += 1
        x = rng.beta(alpha, alpha)
        rank = min(int(np.floor(x * size)), size - 1)

        if rank not in picked:
            picked.append(rank)

    if len(picked) < m:
        remainder = [i for i in range(size) if i not in picked]
        extra = rng.choice(len(remainder), size=m - len(picked), replace=False)
        picked.extend(remainder[j] for j in extra.tolist())

    return picked


# ---- augmented train set

@dataclasses.dataclass
class AugmentationContext():
    """Frozen phase-1 representations and the indices built over them"""
    user_reprs: np.ndarray
    item_reprs: np.ndarray
    user_index: EmbeddingIndex
    item_index: EmbeddingIndex
    train_positives: Dict[int, FrozenSet[int]]
    idle_users: FrozenSet[int] = frozenset()

    @staticmethod
    def build(params: ModelParams, train: Dataset, histories: Dict[int, UserHistory]) -> AugmentationContext:
        user_reprs = encode_all_users(params, histories)
        item_reprs = encode_items(params)
        train_positives = train.user_items()
        return AugmentationContext(
            user_reprs=user_reprs,
            item_reprs=item_reprs,
            user_index=build_index(user_reprs),
            item_index=build_index(item_reprs),
            train_positives=train_positives,
            idle_users=users_without_positives(len(user_reprs), train_positives),
        )


def _augment_user(ctx: AugmentationContext, user: int, rows: Sequence[int], pos_items: Sequence[int],
                  hp: HyperParams, sampler: Sampler, sources: FrozenSet[CandidateSource],
                  base_seed: int) -> List[AugmentedExample]:
    seen = ctx.train_positives.get(user, frozenset())
    user_repr = ctx.user_reprs[user]
    user_is_zero = user in ctx.user_index.zero_mask

    u2i: List[PositiveCandidate] = []
    u2u2i: List[PositiveCandidate] = []
    if not user_is_zero:
        if CandidateSource.U2I in sources:
            u2i = gen_u2i(user, user_repr, ctx.item_index, hp.k, seen)
        if CandidateSource.U2U2I in sources:
            u2u2i = gen_u2u2i(user, user_repr, ctx.user_index, hp.k_u, ctx.train_positives,
                              ctx.item_index, hp.k, seen, idle_users=ctx.idle_users)

    out = []
    for row, pos_item in zip(rows, pos_items):
        example = AugmentedExample(user=user, pos_item=pos_item)

        if not user_is_zero:
            rng = derive_rng(base_seed, row)
            candidates = {
                CandidateSource.U2I: u2i,
                CandidateSource.I2I: [],
                CandidateSource.U2U2I: u2u2i,
            }

            if CandidateSource.I2I in sources and pos_item not in ctx.item_index.zero_mask:
                candidates[CandidateSource.I2I] = gen_i2i(
                    user, ctx.item_reprs[pos_item], ctx.item_index, hp.k,
                    seen | {pos_item}, user_repr=user_repr)

            # fixed source order keeps the per-interaction stream reproducible
            for source in ALL_SOURCES:
                if source not in sources or not candidates[source]:
                    continue

                kept = sample_candidates(candidates[source], hp.m, sampler, hp.alpha, rng)
                weights = normalized_weights([c.user_score for c in kept])
                example.aug[source] = [
                    AugmentedItem(item=c.item, weight=w, select_score=c.score, user_score=c.user_score)
                    for c, w in zip(kept, weights)
                ]

        out.append(example)

    return out


def build_augmented_trainset(train: Dataset, histories: Dict[int, UserHistory], params: ModelParams,
                             hp: HyperParams, rng: np.random.Generator,
                             sampler: Sampler = Sampler.UNIFORM,
                             sources: Iterable[CandidateSource] = ALL_SOURCES,
                             threads: int = 1) -> List[AugmentedExample]:
    """
    One AugmentedExample per train interaction, in train order.
    Interaction i draws from its own generator seeded by (base seed, i), so the
    result does not depend on `threads`.
    """
    sources = frozenset(sources)
    base_seed = int(rng.integers(0, 2 ** 63 - 1))
    ctx = AugmentationContext.build(params, train, histories)

    by_user: Dict[int, List[int]] = {}
    for row, u in enumerate(train.users.tolist()):
        by_user.setdefault(u, []).append(row)

    items = train.items.tolist()
    users = sorted(by_user)

    def work(user):
        rows = by_user[user]
        return _augment_user(ctx, user, rows, [items[r] for r in rows], hp, sampler, sources, base_seed)

    per_user = threaded_map(work, users, threads)

    examples: List[Optional[AugmentedExample]] = [None] * len(train)
    for user, user_examples in zip(users, per_user):
        for row, example in zip(by_user[user], user_examples):
            examples[row] = example

    log_augmentation_stats(examples)
    return examples


def log_augmentation_stats(examples: Sequence[AugmentedExample]):
    counts = Counter()
    distinct = {s: set() for s in ALL_SOURCES}

    for ex in examples:
        for source, aug in ex.aug.items():
            counts[source] += len(aug)
            distinct[source].update(a.item for a in aug)

    for source in ALL_SOURCES:
        logging.info(f'Augmentation {source.value}: {counts[source]} items, {len(distinct[source])} distinct')


def augmentation_arrays(examples: Sequence[AugmentedExample], rows: Sequence[int], m: int):
    """
    Padded (items, weights) arrays for a batch of example rows, 3*m columns.
    Empty slots hold the original positive with weight 0.
    """
    width = len(ALL_SOURCES) * m
    items = np.zeros((len(rows), width), dtype=np.int64)
    weights = np.zeros((len(rows), width), dtype=np.float64)

    for b, r in enumerate(rows):
        ex = examples[r]
        items[b, :] = ex.pos_item
        col = 0
        for source in ALL_SOURCES:
            for a in ex.aug.get(source, []):
                items[b, col] = a.item
                weights[b, col] = a.weight
                col += 1

    return items, weights


def dump_augmentations(path: str, examples: Sequence[AugmentedExample], train: Optional[Dataset] = None):
    """
    `user pos_item source aug_item select_score weight` rows.
    Raw ids are written when the dataset is given, indices otherwise.
    """
    def uid(u):
        return train.user_ids[u] if train is not None else str(u)

    def iid(i):
        return train.item_ids[i] if train is not None else str(i)

    with open(path, 'w', encoding='utf-8') as f:
        for ex in examples:
            for source in ALL_SOURCES:
                for a in ex.aug.get(source, []):
                    f.write(f'{uid(ex.user)}\t{iid(ex.pos_item)}\t{source.value}\t{iid(a.item)}\t'
                            f'{a.select_score:.12g}\t{a.weight:.12g}\n')

    logging.info(f'Wrote augmentation dump to {path}')
