import os
import dataclasses
from collections import Counter
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .Evaluation import RankingMetrics
from .lib.costants import REPORT_SCHEMA_VERSION
from .lib.utils import format_table
from .models.Augmentation import ALL_SOURCES, AugmentedExample
from .models.Interactions import Dataset, SplitReport

WEIGHT_BINS = 10


@dataclasses.dataclass
class DatasetInfo():
    name: str
    md5: str
    interactions: int
    num_users: int
    num_items: int

    @staticmethod
    def of(ds: Dataset, md5: str) -> 'DatasetInfo':
        name = os.path.basename(ds.source_path) if ds.source_path else ''
        return DatasetInfo(name=name, md5=md5, interactions=len(ds), num_users=ds.num_users, num_items=ds.num_items)


def augmentation_rows(examples: Iterable[AugmentedExample]) -> Iterable[Tuple[str, int, float]]:
    for ex in examples:
        for source in ALL_SOURCES:
            for a in ex.aug.get(source, []):
                yield source.value, a.item, a.weight


def summarize_augmentations(rows: Iterable[Tuple[str, object, float]]) -> dict:
    """Per-source counts, distinct items, weight histograms and pairwise overlaps"""
    counts = Counter()
    distinct: Dict[str, set] = {s.value: set() for s in ALL_SOURCES}
    weights: Dict[str, List[float]] = {s.value: [] for s in ALL_SOURCES}

    for source, item, weight in rows:
        counts[source] += 1
        distinct.setdefault(source, set()).add(item)
        weights.setdefault(source, []).append(weight)

    union = set().union(*distinct.values())
    edges = np.linspace(0.0, 1.0, WEIGHT_BINS + 1)

    sources = {}
    for source in distinct:
        hist, _ = np.histogram(np.array(weights[source], dtype=np.float64), bins=edges)
        sources[source] = {
            'count': counts[source],
            'distinct_items': len(distinct[source]),
            'weight_histogram': [int(h) for h in hist],
        }

    names = list(distinct)
    overlaps = {
        f'{a}&{b}': len(distinct[a] & distinct[b])
        for i, a in enumerate(names) for b in names[i + 1:]
    }

    return {
        'sources': sources,
        'total': sum(counts.values()),
        'distinct_items': len(union),
        'overlaps': overlaps,
        'weight_bin_edges': [round(float(e), 6) for e in edges],
    }


def _metric_header(ks: Sequence[int]) -> List[str]:
    return ['model'] + [f'HR@{k}' for k in ks] + [f'NDCG@{k}' for k in ks]


def _metric_row(label: str, m: RankingMetrics, ks: Sequence[int]) -> List[str]:
    return [label] + [f'{m.hr[k]:.4f}' for k in ks] + [f'{m.ndcg[k]:.4f}' for k in ks]


def _diversity_table(models: Sequence[Tuple[str, RankingMetrics]], baseline: RankingMetrics) -> List[List[str]]:
    depths = sorted(baseline.diversity)
    table = [['recalled items'] + [f'top-{d}' for d in depths]]

    for label, m in models:
        table.append([label] + [str(m.diversity[d]) for d in depths])

    for label, m in models[1:]:
        row = [f'{label} vs {models[0][0]}']
        for d in depths:
            b = baseline.diversity[d]
            row.append(f'{100.0 * (m.diversity[d] - b) / b:+.1f}%' if b else 'n/a')
        table.append(row)

    return table


def run_report_dict(dataset: DatasetInfo, split: SplitReport, config: dict,
                    base: RankingMetrics, divspa: RankingMetrics, control: Optional[RankingMetrics],
                    loss_curves: Dict[str, List[float]], augmentation: dict) -> dict:
    models = {'base': base.as_dict(), 'divspa': divspa.as_dict()}
    if control is not None:
        models['base_control'] = control.as_dict()

    return {
        'schema_version': REPORT_SCHEMA_VERSION,
        'kind': 'run',
        'dataset': dataclasses.asdict(dataset),
        'split': split.as_dict(),
        'config': config,
        'models': models,
        'loss_curves': loss_curves,
        'augmentation': augmentation,
    }


def run_report_text(dataset: DatasetInfo, split: SplitReport, config: dict,
                    base: RankingMetrics, divspa: RankingMetrics, control: Optional[RankingMetrics],
                    augmentation: dict) -> str:
    ks = sorted(base.hr)
    models = [('Base', base), ('DivSPA', divspa)]
    if control is not None:
        models.append(('Base (control)', control))

    blocks = [
        '[dataset]\n' + '\n'.join(f'{k}={v}' for k, v in dataclasses.asdict(dataset).items()),
        '[split]\n' + split.to_text(),
        '[config]\n' + '\n'.join(f'{k}={v}' for k, v in config.items()),
        '[accuracy]\n' + format_table([_metric_header(ks)] + [_metric_row(l, m, ks) for l, m in models]),
    ]

    if base.diversity:
        blocks.append('[diversity]\n' + format_table(_diversity_table(models, base)))

    aug_table = [['source', 'count', 'distinct_items']]
    for source, s in augmentation['sources'].items():
        aug_table.append([source, s['count'], s['distinct_items']])
    aug_table.append(['all', augmentation['total'], augmentation['distinct_items']])
    blocks.append('[augmentation]\n' + format_table(aug_table))

    return '\n\n'.join(blocks) + '\n'


def ablation_report(base: RankingMetrics, rows: Sequence[Tuple[str, RankingMetrics]]) -> Tuple[str, dict]:
    ks = sorted(base.hr)
    table = [_metric_header(ks), _metric_row('Base', base, ks)]
    table += [_metric_row(label, m, ks) for label, m in rows]

    text = '[ablation]\n' + format_table(table)
    if base.diversity:
        text += '\n\n[diversity]\n' + format_table(_diversity_table([('Base', base)] + list(rows), base))

    data = {
        'schema_version': REPORT_SCHEMA_VERSION,
        'kind': 'ablation',
        'base': base.as_dict(),
        'rows': [{'label': label, 'metrics': m.as_dict()} for label, m in rows],
    }
    return text + '\n', data


def compare_report(per_seed: Sequence[Tuple[int, RankingMetrics, RankingMetrics]]) -> Tuple[str, dict]:
    """DivSPA minus base, per seed and as mean/std over seeds"""
    first = per_seed[0][1]
    ks = sorted(first.hr)
    depths = sorted(first.diversity)

    keys = [f'HR@{k}' for k in ks] + [f'NDCG@{k}' for k in ks] + [f'div@{d}' for d in depths]

    def deltas(base: RankingMetrics, div: RankingMetrics) -> List[float]:
        return [div.hr[k] - base.hr[k] for k in ks] + \
               [div.ndcg[k] - base.ndcg[k] for k in ks] + \
               [float(div.diversity[d] - base.diversity[d]) for d in depths]

    rows = [(seed, deltas(b, d)) for seed, b, d in per_seed]
    values = np.array([r for _, r in rows])

    table = [['seed'] + keys]
    table += [[str(seed)] + [f'{v:+.4f}' for v in r] for seed, r in rows]
    table.append(['mean'] + [f'{v:+.4f}' for v in values.mean(axis=0)])
    table.append(['std'] + [f'{v:.4f}' for v in values.std(axis=0)])

    data = {
        'schema_version': REPORT_SCHEMA_VERSION,
        'kind': 'compare',
        'metrics': keys,
        'seeds': [{'seed': seed, 'base': b.as_dict(), 'divspa': d.as_dict()} for seed, b, d in per_seed],
        'mean_delta': dict(zip(keys, values.mean(axis=0).tolist())),
        'std_delta': dict(zip(keys, values.std(axis=0).tolist())),
    }
    return '[DivSPA - Base]\n' + format_table(table) + '\n', data
