import os
import math
import logging
from typing import Dict, Iterable, Tuple

import numpy as np

from ..models.Interactions import Dataset, UserHistory, SplitReport
from ..models.Models import MalformedLine, EmptyDataset, InvalidFraction, CorpusExhausted, DatasetNotFound


class InteractionProvider():
    supported_formats = ['tsv']

    def __init__(self):
        self.name = 'Interactions'
        logging.debug(f'Activating {self.name} provider')

    def load_interactions(self, path: str, format: str = 'tsv') -> Dataset:
        """
        Reads a `user<TAB>item<TAB>timestamp` log (extra columns ignored).
        Indices are assigned in first-seen order, exact duplicate lines are dropped.
        """
        if format not in self.supported_formats:
            raise ValueError(f'Unsupported interaction format "{format}"')

        if not os.path.isfile(path):
            raise DatasetNotFound(path)

        logging.info(f'Loading interactions from {path}')

        user_ids: Dict[str, int] = {}
        item_ids: Dict[str, int] = {}
        users, items, timestamps = [], [], []
        seen = set()
        duplicates = 0

        with open(path, 'rb') as f:
            for line_no, raw_line in enumerate(f, start=1):
                try:
                    line = raw_line.decode('utf-8').rstrip('\r\n')
                except UnicodeDecodeError:
                    raise MalformedLine(line_no, 'invalid UTF-8')

                if not line.strip():
                    continue

                cols = line.split('\t')
                if len(cols) < 3:
                    raise MalformedLine(line_no, f'expected 3 tab-separated columns, got {len(cols)}')

                raw_user, raw_item, raw_ts = cols[0].strip(), cols[1].strip(), cols[2].strip()
                if not raw_user or not raw_item:
                    raise MalformedLine(line_no, 'empty user or item id')

                try:
                    ts = int(raw_ts)
                except ValueError:
                    raise MalformedLine(line_no, f'timestamp "{raw_ts}" is not an integer')

                key = (raw_user, raw_item, ts)
                if key in seen:
                    duplicates += 1
                    continue

                seen.add(key)
                users.append(user_ids.setdefault(raw_user, len(user_ids)))
                items.append(item_ids.setdefault(raw_item, len(item_ids)))
                timestamps.append(ts)

        if not users:
            raise EmptyDataset(f'No valid interactions found in {path}')

        ds = Dataset(
            users=np.array(users, dtype=np.int64),
            items=np.array(items, dtype=np.int64),
            timestamps=np.array(timestamps, dtype=np.int64),
            user_ids=list(user_ids),
            item_ids=list(item_ids),
            source_path=path,
        )

        logging.info(f'Loaded {len(ds)} interactions, {ds.num_users} users, {ds.num_items} items ({duplicates} duplicates dropped)')
        return ds

    def chronological_split(self, ds: Dataset, test_fraction: float) -> Tuple[Dataset, Dataset, SplitReport]:
        """
        The last ceil(test_fraction * N) events (stable by timestamp) form the test split.
        Test events whose user or item never occurs in train are dropped and counted.
        """
        if not (0 < test_fraction < 1):
            raise InvalidFraction(test_fraction)

        if len(ds) == 0:
            raise EmptyDataset()

        order = np.argsort(ds.timestamps, kind='stable')
        # round first: 0.3 * 10 is 3.0000000000000004
        n_test = math.ceil(round(test_fraction * len(ds), 9))
        n_train = len(ds) - n_test

        train_rows = order[:n_train]
        test_rows = order[n_train:]

        seen_users = np.zeros(ds.num_users, dtype=bool)
        seen_items = np.zeros(ds.num_items, dtype=bool)
        seen_users[ds.users[train_rows]] = True
        seen_items[ds.items[train_rows]] = True

        user_known = seen_users[ds.users[test_rows]]
        item_known = seen_items[ds.items[test_rows]]
        keep = user_known & item_known

        report = SplitReport(
            total=len(ds),
            train=n_train,
            test_before_drop=n_test,
            dropped_cold_user=int((~user_known).sum()),
            dropped_cold_item=int((user_known & ~item_known).sum()),
            test=int(keep.sum()),
        )

        logging.info(f'Chronological split: train={report.train} test={report.test} dropped={report.dropped}')
        return ds.subset(train_rows), ds.subset(test_rows[keep]), report

    def build_user_histories(self, train: Dataset, max_history: int) -> Dict[int, UserHistory]:
        if max_history < 1:
            raise ValueError('max_history must be >= 1')

        order = np.argsort(train.timestamps, kind='stable')
        grouped: Dict[int, list] = {}

        for u, i in zip(train.users[order].tolist(), train.items[order].tolist()):
            grouped.setdefault(u, []).append(i)

        return {
            u: UserHistory(user=u, items=tuple(items[-max_history:]))
            for u, items in grouped.items()
        }

    def sample_negatives(self, rng: np.random.Generator, num_items: int, exclude: Iterable[int], n: int) -> np.ndarray:
        """n distinct items drawn uniformly from [0, num_items) minus exclude"""
        excluded = np.unique(np.fromiter((e for e in exclude if 0 <= e < num_items), dtype=np.int64))
        available = num_items - len(excluded)

        if n < 1 or available < n:
            raise CorpusExhausted(available, n)

        picks = rng.choice(available, size=n, replace=False)

        # shift ranks over the excluded slots, ascending
        for e in excluded:
            picks[picks >= e] += 1

        return picks
