import os
import sys
import importlib.util

import numpy as np
import pytest

SRC = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'src')

# run the suite from a checkout without installing: map the `divspa` package onto src/
if importlib.util.find_spec('divspa') is None:
    module_spec = importlib.util.spec_from_file_location('divspa', os.path.join(SRC, '__init__.py'),
                                                         submodule_search_locations=[SRC])
    module = importlib.util.module_from_spec(module_spec)
    sys.modules['divspa'] = module
    module_spec.loader.exec_module(module)

from divspa.models.Interactions import Dataset  # noqa: E402
from divspa.models.TwoTower import HyperParams  # noqa: E402


def make_dataset(rows, num_users=None, num_items=None) -> Dataset:
    """rows of (user, item, timestamp) indices; ids are the indices as strings"""
    users = [r[0] for r in rows]
    items = [r[1] for r in rows]
    num_users = num_users if num_users is not None else max(users) + 1
    num_items = num_items if num_items is not None else max(items) + 1

    return Dataset(
        users=np.array(users, dtype=np.int64),
        items=np.array(items, dtype=np.int64),
        timestamps=np.array([r[2] for r in rows], dtype=np.int64),
        user_ids=[str(u) for u in range(num_users)],
        item_ids=[str(i) for i in range(num_items)],
    )


def separable_log(num_users=8, num_items=24, clicks_per_user=6, seed=0):
    """
    Two user groups with disjoint item halves: every user clicks items of its own
    half only. Returns (user, item, timestamp) rows in time order.
    """
    rng = np.random.default_rng(seed)
    half = num_items // 2
    rows = []
    ts = 0

    for step in range(clicks_per_user):
        for u in range(num_users):
            offset = 0 if u < num_users // 2 else half
            rows.append((u, offset + int(rng.integers(0, half)), ts))
            ts += 1

    return rows


def write_tsv(path, rows):
    with open(path, 'w', encoding='utf-8') as f:
        for u, i, t in rows:
            f.write(f'u{u}\ti{i}\t{t}\n')

    return str(path)


@pytest.fixture
def toy_hp():
    return HyperParams(dim=8, num_negatives=4, lr=0.01, batch_size=16, epochs=3, k=6, k_u=3, m=2,
                       alpha=0.5, beta_mix=0.1, max_history=10, seed=0)


@pytest.fixture
def toy_dataset():
    return make_dataset(separable_log())


@pytest.fixture
def toy_tsv(tmp_path):
    return write_tsv(tmp_path / 'log.tsv', separable_log())
