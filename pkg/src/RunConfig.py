from __future__ import annotations

import os
import dataclasses
import logging
from typing import Dict, List, Tuple

from .Evaluation import EvalSettings
from .DistillPipeline import PipelineConfig, Phase2Init
from .lib.costants import THREADS_ENV, DEFAULT_EVAL_KS, DEFAULT_DIVERSITY_DEPTHS
from .lib.kv_config import read_kv_config, write_kv_config, normalize_key
from .lib.utils import parse_bool
from .models.Augmentation import CandidateSource, Sampler, ALL_SOURCES
from .models.Models import ConfigError, UnknownKey
from .models.TwoTower import HyperParams, MixupMode


def _default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, '1')))
    except ValueError:
        logging.warning(f'Ignoring invalid {THREADS_ENV} value')
        return 1


@dataclasses.dataclass
class RunConfig():
    dataset: str = ''
    output_dir: str = 'divspa-out'
    test_fraction: float = 0.2
    # HyperParams
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
    # PipelineConfig
    mixup_mode: MixupMode = MixupMode.OUTPUT_SPACE
    sampler: Sampler = Sampler.UNIFORM
    refresh_every: int = 0
    phase2_init: Phase2Init = Phase2Init.FROM_PHASE1
    phase2_epochs: int = -1
    sources: Tuple[CandidateSource, ...] = ALL_SOURCES
    control_run: bool = True
    # evaluation
    eval_ks: Tuple[int, ...] = DEFAULT_EVAL_KS
    diversity_depths: Tuple[int, ...] = DEFAULT_DIVERSITY_DEPTHS
    exclude_train: bool = True
    dump_ranks: bool = False
    threads: int = dataclasses.field(default_factory=_default_threads)

    @staticmethod
    def keys() -> List[str]:
        return [f.name for f in dataclasses.fields(RunConfig)]

    @staticmethod
    def from_file(path: str) -> RunConfig:
        config = RunConfig()
        for key, value, line_no in read_kv_config(path):
            config.set(key, value, path=path, line_no=line_no)

        return config

    def set(self, key: str, raw: str, path: str = '<cli>', line_no: int = 0):
        key = normalize_key(key)
        fields = {f.name: f for f in dataclasses.fields(self)}

        if key not in fields:
            raise UnknownKey(key, path, line_no)

        try:
            value = _parse_value(key, raw)
        except ValueError as e:
            raise ConfigError(f'{path}:{line_no}: invalid value for "{key}": {e}')

        setattr(self, key, value)

    def apply_overrides(self, overrides: Dict[str, str]):
        for key, value in overrides.items():
            self.set(key, value)

    def entries(self) -> List[Tuple[str, str]]:
        return [(name, _format_value(getattr(self, name))) for name in self.keys()]

    def as_dict(self) -> dict:
        return dict(self.entries())

    def save(self, path: str):
        write_kv_config(path, self.entries())

    def hyper_params(self) -> HyperParams:
        names = [f.name for f in dataclasses.fields(HyperParams)]
        try:
            return HyperParams(**{n: getattr(self, n) for n in names})
        except ValueError as e:
            raise ConfigError(f'<config>:0: {e}')

    def eval_settings(self) -> EvalSettings:
        return EvalSettings(
            ks=tuple(self.eval_ks),
            diversity_depths=tuple(self.diversity_depths),
            exclude_train=self.exclude_train,
            threads=self.threads,
        )

    def pipeline_config(self) -> PipelineConfig:
        if not (0 < self.test_fraction < 1):
            raise ConfigError(f'<config>:0: test_fraction must lie in (0, 1)')

        try:
            return PipelineConfig(
                hp=self.hyper_params(),
                mixup_mode=self.mixup_mode,
                sampler=self.sampler,
                refresh_every=self.refresh_every,
                phase2_init=self.phase2_init,
                phase2_epochs=None if self.phase2_epochs < 0 else self.phase2_epochs,
                sources=tuple(self.sources),
                control_run=self.control_run,
                threads=self.threads,
                eval=self.eval_settings(),
            )
        except ValueError as e:
            raise ConfigError(f'<config>:0: {e}')


_ENUMS = {
    'mixup_mode': MixupMode,
    'sampler': Sampler,
    'phase2_init': Phase2Init,
}
_INT_LISTS = ('eval_ks', 'diversity_depths')
_BOOLS = ('control_run', 'exclude_train', 'dump_ranks')
_FLOATS = ('test_fraction', 'lr', 'alpha', 'beta_mix', 'adam_beta1', 'adam_beta2', 'adam_eps')
_STRINGS = ('dataset', 'output_dir')


def _parse_value(key: str, raw: str):
    raw = raw.strip()

    if key in _STRINGS:
        return raw
    if key in _ENUMS:
        return _ENUMS[key](raw.lower())
    if key in _BOOLS:
        return parse_bool(raw)
    if key in _FLOATS:
        return float(raw)
    if key in _INT_LISTS:
        values = tuple(int(v) for v in raw.split(',') if v.strip())
        if not values or min(values) < 1:
            raise ValueError('expected a comma-separated list of positive integers')
        return tuple(sorted(set(values)))
    if key == 'sources':
        names = [v.strip().lower() for v in raw.split(',') if v.strip()]
        return tuple(s for s in ALL_SOURCES if s.value in names) if _check_sources(names) else ()
    if key == 'threads':
        return max(1, int(raw))
    if key == 'seed':
        seed = int(raw)
        if seed < 0:
            raise ValueError('seed must be a non-negative integer')
        return seed

    return int(raw)


def _check_sources(names: List[str]) -> bool:
    known = {s.value for s in ALL_SOURCES}
    unknown = [n for n in names if n not in known and n != 'none']
    if unknown:
        raise ValueError(f'unknown source(s) {", ".join(unknown)}')

    return 'none' not in names


def _format_value(value) -> str:
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, (MixupMode, Sampler, Phase2Init)):
        return value.value
    if isinstance(value, tuple):
        if not value:
            return 'none'
        return ','.join(v.value if isinstance(v, CandidateSource) else str(v) for v in value)
    if isinstance(value, float):
        return repr(value)

    return str(value)
