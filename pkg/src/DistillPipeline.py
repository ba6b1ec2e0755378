"""
Two-phase training: a base two-tower model on the original interactions, then
a mix-up phase over the original positives plus the positives the base model
nominates for itself.
"""
from __future__ import annotations

import copy
import os
import dataclasses
import logging
from enum import Enum
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .Evaluation import EvalSettings, RankingMetrics, evaluate
from .lib.costants import OUTPUT_FILES
from .models.Augmentation import (
    ALL_SOURCES, AugmentedExample, CandidateSource, Sampler,
    augmentation_arrays, build_augmented_trainset,
)
from .models.Checkpoint import save_checkpoint
from .models.Interactions import Dataset, UserHistory
from .models.Models import EmptyDataset
from .models.TwoTower import (
    HyperParams, ModelParams, MixupMode, init_params, sampled_softmax_loss, train_step,
)
from .providers.providers_list import interaction_provider


class Phase2Init(Enum):
    FROM_PHASE1 = 'from_phase1'
    FRESH = 'fresh'


@dataclasses.dataclass
class PipelineConfig():
    hp: HyperParams = dataclasses.field(default_factory=HyperParams)
    mixup_mode: MixupMode = MixupMode.OUTPUT_SPACE
    sampler: Sampler = Sampler.UNIFORM
    # epochs between augmentation rebuilds in phase 2, 0 keeps them frozen
    refresh_every: int = 0
    phase2_init: Phase2Init = Phase2Init.FROM_PHASE1
    phase2_epochs: Optional[int] = None
    sources: Tuple[CandidateSource, ...] = ALL_SOURCES
    control_run: bool = True
    threads: int = 1
    eval: EvalSettings = dataclasses.field(default_factory=EvalSettings)

    def __post_init__(self):
        if self.refresh_every < 0:
            raise ValueError('refresh_every must be >= 0')
        if self.phase2_epochs is not None and self.phase2_epochs < 0:
            raise ValueError('phase2_epochs must be >= 0')

    @property
    def epochs2(self) -> int:
        return self.hp.epochs if self.phase2_epochs is None else self.phase2_epochs


@dataclasses.dataclass
class PipelineReport():
    base: RankingMetrics
    divspa: RankingMetrics
    control: Optional[RankingMetrics] = None
    loss_curves: Dict[str, List[float]] = dataclasses.field(default_factory=dict)
    augmentations: List[AugmentedExample] = dataclasses.field(default_factory=list, repr=False)


# ---- mix-up

def mixup_representation(v: np.ndarray, aug: Sequence[Tuple[np.ndarray, float]], beta_mix: float) -> np.ndarray:
    """v + beta * sum(w_i * v_i)"""
    mixed = np.array(v, dtype=np.float64)
    if beta_mix == 0 or not aug:
        return mixed

    return mixed + beta_mix * sum(w * np.asarray(vi, dtype=np.float64) for vi, w in aug)


def mixup_loss(u: np.ndarray, v_pos: np.ndarray, v_negs: Sequence[np.ndarray],
               aug: Sequence[Tuple[np.ndarray, float]], beta_mix: float,
               mode: MixupMode = MixupMode.OUTPUT_SPACE) -> float:
    """
    output_space: L(u, v+) + beta * sum(w_i * L(u, v_i)), every term on the same negatives.
    representation_space: L(u, v~) with v~ from mixup_representation.
    """
    if mode is MixupMode.REPRESENTATION_SPACE:
        return sampled_softmax_loss(u, mixup_representation(v_pos, aug, beta_mix), v_negs)

    loss = sampled_softmax_loss(u, v_pos, v_negs)
    if beta_mix == 0:
        return loss

    return loss + beta_mix * sum(w * sampled_softmax_loss(u, vi, v_negs) for vi, w in aug)


# ---- training loops

def _run_epochs(params: ModelParams, train: Dataset, histories: Dict[int, UserHistory], hp: HyperParams,
                rng: np.random.Generator, epochs: int,
                augmented: Optional[List[AugmentedExample]] = None, beta_mix: float = 0.0,
                mode: MixupMode = MixupMode.OUTPUT_SPACE,
                refresh: Optional[Callable[[ModelParams], List[AugmentedExample]]] = None,
                refresh_every: int = 0,
                on_epoch: Optional[Callable[[int, float], None]] = None) -> Optional[List[AugmentedExample]]:
    users = train.users.tolist()
    items = train.items.tolist()
    hist_of = {u: h.items for u, h in histories.items()}
    use_aug = augmented is not None and beta_mix > 0

    for epoch in range(epochs):
        if refresh and refresh_every and epoch > 0 and epoch % refresh_every == 0:
            logging.info(f'Refreshing augmentations at epoch {epoch}')
            augmented = refresh(params)

        order = rng.permutation(len(train))
        total = 0.0

        for start in range(0, len(order), hp.batch_size):
            rows = order[start:start + hp.batch_size]
            batch = [(users[r], hist_of.get(users[r], ()), items[r]) for r in rows]

            aug_items = aug_weights = None
            if use_aug:
                aug_items, aug_weights = augmentation_arrays(augmented, rows, hp.m)

            loss = train_step(params, batch, hp, rng, aug_items, aug_weights, beta_mix=beta_mix, mode=mode)
            total += loss * len(rows)

        mean_loss = total / len(order)
        logging.info(f'epoch {epoch + 1}/{epochs} loss={mean_loss:.6f}')

        if on_epoch:
            on_epoch(epoch, mean_loss)

    return augmented


def train_base(train: Dataset, histories: Dict[int, UserHistory], hp: HyperParams, rng: np.random.Generator,
               params: Optional[ModelParams] = None, epochs: Optional[int] = None,
               on_epoch: Optional[Callable[[int, float], None]] = None) -> ModelParams:
    """
    hp.epochs (or `epochs`) of plain sampled softmax training over shuffled batches.
    Fresh parameters are drawn from rng unless `params` is given; they are updated in place.
    """
    if not len(train):
        raise EmptyDataset('Cannot train on an empty train split')

    if params is None:
        params = init_params(train.num_users, train.num_items, hp, rng)

    _run_epochs(params, train, histories, hp, rng, hp.epochs if epochs is None else epochs, on_epoch=on_epoch)
    return params


class DistillPipeline():
    """
    Holds the shared state of one experiment so ablation variants reuse the
    same phase-1 model. Random streams: `train_seed` drives initialization and
    every training phase (phase 2 and the control continue the stream where
    phase 1 left it), `aug_seed` drives augmentation only.
    """

    def __init__(self, train: Dataset, test: Dataset, config: PipelineConfig, rng: np.random.Generator,
                 checkpoint_dir: Optional[str] = None):
        self.train = train
        self.test = test
        self.config = config
        self.checkpoint_dir = checkpoint_dir

        self.histories = interaction_provider.build_user_histories(train, config.hp.max_history)
        self.train_items = train.user_items()

        seeds = rng.integers(0, 2 ** 63 - 1, size=3)
        self.train_seed, self.aug_seed, self.fresh_seed = (int(s) for s in seeds)

        self.base_params: Optional[ModelParams] = None
        self._base_rng: Optional[np.random.Generator] = None
        self.loss_curves: Dict[str, List[float]] = {}

    def _checkpoint(self, name: str, params: ModelParams):
        if self.checkpoint_dir:
            save_checkpoint(os.path.join(self.checkpoint_dir, OUTPUT_FILES[name]), params, self.config.hp)

    def train_base(self) -> ModelParams:
        if self.base_params is None:
            logging.info('Phase 1: training the base model')
            rng = np.random.default_rng(self.train_seed)
            curve = self.loss_curves.setdefault('base', [])

            self.base_params = train_base(self.train, self.histories, self.config.hp, rng,
                                          on_epoch=lambda e, l: curve.append(l))
            self._base_rng = rng
            self._checkpoint('phase1', self.base_params)

        return self.base_params

    def _continue_from_base(self) -> Tuple[ModelParams, np.random.Generator]:
        base = self.train_base()
        return base.copy(), copy.deepcopy(self._base_rng)

    def build_augmentations(self, params: ModelParams, rng: np.random.Generator,
                            sources: Iterable[CandidateSource]) -> List[AugmentedExample]:
        return build_augmented_trainset(self.train, self.histories, params, self.config.hp, rng,
                                        sampler=self.config.sampler, sources=sources,
                                        threads=self.config.threads)

    def train_divspa(self, sources: Optional[Iterable[CandidateSource]] = None,
                     label: str = 'divspa') -> Tuple[ModelParams, List[AugmentedExample]]:
        cfg = self.config
        sources = tuple(cfg.sources if sources is None else sources)

        base = self.train_base()
        aug_rng = np.random.default_rng(self.aug_seed)
        augmented = self.build_augmentations(base, aug_rng, sources)

        params, rng = self._continue_from_base()
        if cfg.phase2_init is Phase2Init.FRESH:
            params = init_params(self.train.num_users, self.train.num_items, cfg.hp,
                                 np.random.default_rng(self.fresh_seed))

        logging.info(f'Phase 2 ({label}): mix-up training, sources={[s.value for s in sources]}')
        curve = self.loss_curves.setdefault(label, [])
        augmented = _run_epochs(
            params, self.train, self.histories, cfg.hp, rng, cfg.epochs2,
            augmented=augmented, beta_mix=cfg.hp.beta_mix, mode=cfg.mixup_mode,
            refresh=lambda p: self.build_augmentations(p, aug_rng, sources),
            refresh_every=cfg.refresh_every,
            on_epoch=lambda e, l: curve.append(l),
        )

        return params, augmented

    def train_control(self) -> ModelParams:
        """The base model trained on for the phase-2 budget with the original loss"""
        params, rng = self._continue_from_base()
        curve = self.loss_curves.setdefault('control', [])
        logging.info('Control: continuing base training')
        _run_epochs(params, self.train, self.histories, self.config.hp, rng, self.config.epochs2,
                    on_epoch=lambda e, l: curve.append(l))
        return params

    def evaluate(self, params: ModelParams) -> RankingMetrics:
        return evaluate(params, self.test, self.histories, self.config.hp,
                        train_items=self.train_items, settings=self.config.eval)


def run_divspa(train: Dataset, test: Dataset, config: PipelineConfig, rng: np.random.Generator,
               checkpoint_dir: Optional[str] = None) -> Tuple[ModelParams, ModelParams, PipelineReport]:
    pipeline = DistillPipeline(train, test, config, rng, checkpoint_dir=checkpoint_dir)

    base_params = pipeline.train_base()
    divspa_params, augmented = pipeline.train_divspa()
    pipeline._checkpoint('phase2', divspa_params)

    report = PipelineReport(
        base=pipeline.evaluate(base_params),
        divspa=pipeline.evaluate(divspa_params),
        augmentations=augmented,
    )

    if config.control_run:
        report.control = pipeline.evaluate(pipeline.train_control())

    report.loss_curves = pipeline.loss_curves
    return base_params, divspa_params, report


ABLATION_ROWS = (
    ('DivSPA', ()),
    ('w/o u2i', (CandidateSource.U2I,)),
    ('w/o i2i', (CandidateSource.I2I,)),
    ('w/o u2u2i', (CandidateSource.U2U2I,)),
    ('w/o all', ALL_SOURCES),
)


def run_ablation(train: Dataset, test: Dataset, config: PipelineConfig, rng: np.random.Generator,
                 drops: Optional[Sequence[Tuple[str, Sequence[CandidateSource]]]] = None
                 ) -> Tuple[RankingMetrics, List[Tuple[str, RankingMetrics, List[AugmentedExample]]]]:
    """
    Phase 2 once per variant with the dropped sources disabled, all variants
    sharing one phase-1 model. Returns the base metrics and one row per variant.
    """
    pipeline = DistillPipeline(train, test, config, rng)
    base_metrics = pipeline.evaluate(pipeline.train_base())

    rows = []
    for label, dropped in (drops if drops is not None else ABLATION_ROWS):
        sources = tuple(s for s in config.sources if s not in dropped)
        params, augmented = pipeline.train_divspa(sources=sources, label=label)
        rows.append((label, pipeline.evaluate(params), augmented))

    return base_metrics, rows
