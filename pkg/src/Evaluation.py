import math
import dataclasses
import logging
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .lib.async_utils import threaded_map
from .lib.costants import DEFAULT_EVAL_KS, DEFAULT_DIVERSITY_DEPTHS
from .models.Interactions import Dataset, UserHistory
from .models.Models import EmptyEvaluation
from .models.RetrievalIndex import EmbeddingIndex, build_index
from .models.TwoTower import ModelParams, HyperParams, encode_all_users, encode_items

EVAL_BLOCK_SIZE = 512


@dataclasses.dataclass
class EvalSettings():
    ks: Tuple[int, ...] = DEFAULT_EVAL_KS
    diversity_depths: Tuple[int, ...] = DEFAULT_DIVERSITY_DEPTHS
    exclude_train: bool = True
    threads: int = 1


@dataclasses.dataclass
class RankingMetrics():
    hr: Dict[int, float]
    ndcg: Dict[int, float]
    num_events: int
    diversity: Dict[int, int]
    # per-event ranks in test order, kept for the optional dump
    ranks: List[Optional[int]] = dataclasses.field(default_factory=list, repr=False)
    # test user -> ranked (item, score) list at the deepest diversity depth
    topk: Dict[int, List[Tuple[int, float]]] = dataclasses.field(default_factory=dict, repr=False)

    def as_dict(self) -> dict:
        return {
            'num_events': self.num_events,
            'hr': {str(k): v for k, v in sorted(self.hr.items())},
            'ndcg': {str(k): v for k, v in sorted(self.ndcg.items())},
            'diversity': {str(k): v for k, v in sorted(self.diversity.items())},
        }


def rank_of_true_item(user_repr: np.ndarray, true_item: int, item_index: EmbeddingIndex,
                      exclude: Iterable[int] = ()) -> Optional[int]:
    """
    1 + the number of non-excluded items scoring above the true item, counting
    equal scores on lower indices too. None (a miss) when the true item is excluded.
    """
    excluded = set(exclude)
    if true_item in excluded:
        return None

    scores = item_index.scores(user_repr)
    return _rank_in_row(scores, true_item, excluded)


def _rank_in_row(scores: np.ndarray, true_item: int, excluded) -> int:
    s_true = scores[true_item]
    ahead = (scores > s_true) | ((scores == s_true) & (np.arange(len(scores)) < true_item))

    if excluded:
        ex = np.fromiter(excluded, dtype=np.int64)
        ahead[ex] = False

    return 1 + int(ahead.sum())


def hr_ndcg(ranks: Sequence[Optional[int]], k: int) -> Tuple[float, float]:
    if k < 1:
        raise ValueError('k must be >= 1')
    if not len(ranks):
        raise EmptyEvaluation()

    hits = 0
    gain = 0.0
    for r in ranks:
        if r is not None and r <= k:
            hits += 1
            gain += 1.0 / math.log2(r + 1)

    return hits / len(ranks), gain / len(ranks)


def diversity_count(per_user_topk: Dict[int, Sequence[int]], k: int) -> int:
    """Distinct items in the union of every user's first k retrieved items"""
    distinct = set()
    for items in per_user_topk.values():
        distinct.update(items[:k])

    return len(distinct)


def _block_ranks(user_reprs, item_index, users, true_items, excludes) -> List[int]:
    scores = item_index.scores_batch(user_reprs[users])
    return [
        _rank_in_row(scores[j], true_items[j], excludes[j])
        for j in range(len(users))
    ]


def evaluate(params: ModelParams, test: Dataset, histories: Dict[int, UserHistory], hp: HyperParams,
             train_items: Optional[Dict[int, FrozenSet[int]]] = None,
             settings: Optional[EvalSettings] = None) -> RankingMetrics:
    """
    Full-corpus ranking of every test event. The user's train items are excluded
    from the candidates (train_items, or the histories when not given) except the
    event's own true item. Diversity is measured over the test users' top lists.
    """
    settings = settings or EvalSettings()

    if not len(test):
        raise EmptyEvaluation()

    user_reprs = encode_all_users(params, histories)
    item_index = build_index(encode_items(params))

    if train_items is None:
        train_items = {u: frozenset(h.items) for u, h in histories.items()}

    def excluded_for(user: int, true_item: Optional[int] = None) -> FrozenSet[int]:
        if not settings.exclude_train:
            return frozenset()

        seen = train_items.get(user, frozenset())
        return seen - {true_item} if true_item is not None else seen

    users = test.users
    items = test.items
    blocks = [
        np.arange(start, min(start + EVAL_BLOCK_SIZE, len(test)))
        for start in range(0, len(test), EVAL_BLOCK_SIZE)
    ]

    def rank_block(rows):
        return _block_ranks(
            user_reprs, item_index, users[rows], items[rows],
            [excluded_for(int(u), int(i)) for u, i in zip(users[rows], items[rows])])

    ranks: List[Optional[int]] = [r for block in threaded_map(rank_block, blocks, settings.threads) for r in block]

    hr, ndcg = {}, {}
    for k in settings.ks:
        hr[k], ndcg[k] = hr_ndcg(ranks, k)

    diversity = {}
    ranked_lists = {}
    if settings.diversity_depths:
        depth = max(settings.diversity_depths)
        test_users = sorted(set(users.tolist()))
        user_blocks = [test_users[i:i + EVAL_BLOCK_SIZE] for i in range(0, len(test_users), EVAL_BLOCK_SIZE)]

        def topk_block(block):
            return item_index.topk_batch(user_reprs[block], depth, [excluded_for(u) for u in block])

        per_user_topk = {}
        for block, lists in zip(user_blocks, threaded_map(topk_block, user_blocks, settings.threads)):
            for u, ranked in zip(block, lists):
                per_user_topk[u] = [row for row, _ in ranked]
                ranked_lists[u] = ranked

        for depth in settings.diversity_depths:
            diversity[depth] = diversity_count(per_user_topk, depth)

    metrics = RankingMetrics(hr=hr, ndcg=ndcg, num_events=len(ranks), diversity=diversity, ranks=ranks,
                             topk=ranked_lists)
    logging.info('Evaluation: ' + ' '.join(f'HR@{k}={hr[k]:.4f} NDCG@{k}={ndcg[k]:.4f}' for k in settings.ks))
    return metrics


def dump_ranks(path: str, test: Dataset, ranks: Sequence[Optional[int]]):
    """`user item rank` rows with raw ids; a miss is written as `-`"""
    with open(path, 'w', encoding='utf-8') as f:
        for u, i, r in zip(test.users.tolist(), test.items.tolist(), ranks):
            f.write(f'{test.user_ids[u]}\t{test.item_ids[i]}\t{r if r is not None else "-"}\n')

    logging.info(f'Wrote per-event ranks to {path}')
