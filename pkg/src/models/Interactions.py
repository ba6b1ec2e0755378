from __future__ import annotations

import dataclasses
from typing import Dict, List, Iterator, Optional

import numpy as np


@dataclasses.dataclass(frozen=True)
class Interaction():
    """One implicit positive (click) event."""
    user: int
    item: int
    timestamp: int


@dataclasses.dataclass(frozen=True)
class UserHistory():
    user: int
    # chronological, most recent last
    items: tuple = ()

    def __len__(self):
        return len(self.items)


@dataclasses.dataclass(eq=False)
class Dataset():
    """
    Column store of interactions sharing one user/item vocabulary.
    Train and test splits of the same log reference the same id maps,
    so indices are comparable across them.
    """
    users: np.ndarray
    items: np.ndarray
    timestamps: np.ndarray
    user_ids: List[str]
    item_ids: List[str]
    source_path: Optional[str] = None

    def __post_init__(self):
        self.users = np.asarray(self.users, dtype=np.int64)
        self.items = np.asarray(self.items, dtype=np.int64)
        self.timestamps = np.asarray(self.timestamps, dtype=np.int64)

        if not (len(self.users) == len(self.items) == len(self.timestamps)):
            raise ValueError('Interaction columns must have the same length')

    def __len__(self) -> int:
        return len(self.users)

    @property
    def num_users(self) -> int:
        return len(self.user_ids)

    @property
    def num_items(self) -> int:
        return len(self.item_ids)

    @property
    def interactions(self) -> List[Interaction]:
        return list(iter(self))

    def __iter__(self) -> Iterator[Interaction]:
        for u, i, t in zip(self.users.tolist(), self.items.tolist(), self.timestamps.tolist()):
            yield Interaction(user=u, item=i, timestamp=t)

    def subset(self, rows: np.ndarray) -> Dataset:
        return Dataset(
            users=self.users[rows],
            items=self.items[rows],
            timestamps=self.timestamps[rows],
            user_ids=self.user_ids,
            item_ids=self.item_ids,
            source_path=self.source_path,
        )

    def user_items(self) -> Dict[int, frozenset]:
        """Every item each user interacted with, regardless of order"""
        out: Dict[int, set] = {}
        for u, i in zip(self.users.tolist(), self.items.tolist()):
            out.setdefault(u, set()).add(i)

        return {u: frozenset(items) for u, items in out.items()}


@dataclasses.dataclass
class SplitReport():
    total: int
    train: int
    test_before_drop: int
    dropped_cold_user: int
    dropped_cold_item: int
    test: int

    @property
    def dropped(self) -> int:
        return self.test_before_drop - self.test

    def as_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out['dropped'] = self.dropped
        return out

    def to_text(self) -> str:
        return '\n'.join(f'{k}={v}' for k, v in self.as_dict().items())
