import os
import json
import logging
from typing import Tuple

import numpy as np

from ..lib.costants import CHECKPOINT_FORMAT_VERSION
from ..lib.utils import makedirs_for
from .Models import CheckpointError
from .TwoTower import ModelParams, AdamState, HyperParams, TENSOR_NAMES


def save_checkpoint(path: str, params: ModelParams, hp: HyperParams):
    """Every tensor, both Adam moments, the step counter and the hyper-parameters, as .npz"""
    makedirs_for(path)

    arrays = {
        'format_version': np.array(CHECKPOINT_FORMAT_VERSION),
        'hyper_params': np.array(json.dumps(hp.as_dict(), sort_keys=True)),
        'adam_step': np.array(params.adam.step),
    }

    for name, t in params.tensors().items():
        arrays[f'tensor.{name}'] = t
        arrays[f'adam_m.{name}'] = params.adam.m[name]
        arrays[f'adam_v.{name}'] = params.adam.v[name]

    # np.savez appends .npz to bare names
    with open(path, 'wb') as f:
        np.savez(f, **arrays)

    logging.info(f'Saved checkpoint to {path}')


def load_checkpoint(path: str) -> Tuple[ModelParams, HyperParams]:
    if not os.path.isfile(path):
        raise CheckpointError(f'Checkpoint not found: {path}')

    try:
        with np.load(path, allow_pickle=False) as data:
            version = int(data['format_version'])
            if version != CHECKPOINT_FORMAT_VERSION:
                raise CheckpointError(f'Unsupported checkpoint version {version} in {path}')

            hp = HyperParams(**json.loads(str(data['hyper_params'])))
            tensors = {n: data[f'tensor.{n}'].copy() for n in TENSOR_NAMES}
            adam = AdamState(
                m={n: data[f'adam_m.{n}'].copy() for n in TENSOR_NAMES},
                v={n: data[f'adam_v.{n}'].copy() for n in TENSOR_NAMES},
                step=int(data['adam_step']),
            )
    except (KeyError, ValueError, OSError) as e:
        raise CheckpointError(f'Corrupt checkpoint {path}: {e}')

    params = ModelParams(**tensors, adam=adam)
    d = params.dim

    if params.user_w1.shape[0] != 2 * d or params.item_w1.shape[0] != d or hp.dim != d:
        raise CheckpointError(f'Inconsistent tensor shapes in {path}')

    logging.info(f'Loaded checkpoint {path}')
    return params, hp
