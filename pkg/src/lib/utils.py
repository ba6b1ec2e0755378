import os
import dataclasses
import hashlib
import logging
from typing import Sequence

import numpy as np
from xdg import BaseDirectory

from .costants import APP_NAME


def get_cache_dir(*parts: str) -> str:
    """Returns (and creates) a folder inside the user cache directory"""
    path = os.path.join(BaseDirectory.xdg_cache_home, APP_NAME, *parts)

    if not os.path.exists(path):
        os.makedirs(path)

    return path


def get_file_hash(path: str, alg='md5') -> str:
    with open(path, 'rb') as f:
        if alg == 'md5':
            return hashlib.md5(f.read()).hexdigest()
        elif alg == 'sha1':
            return hashlib.sha1(f.read()).hexdigest()
        elif alg == 'sha256':
            return hashlib.sha256(f.read()).hexdigest()

    raise ValueError('Invalid hash requested')


def derive_rng(seed: int, ordinal: int) -> np.random.Generator:
    """
    Independent generator for the (seed, ordinal) pair.
    Serial and threaded callers get the same stream for the same ordinal.
    """
    return np.random.default_rng([seed, ordinal])


def parse_bool(value: str) -> bool:
    v = value.strip().lower()

    if v in ('1', 'true', 'yes', 'on'):
        return True
    elif v in ('0', 'false', 'no', 'off'):
        return False

    raise ValueError(f'not a boolean: "{value}"')


def format_table(table: Sequence[Sequence]) -> str:
    if not table:
        return ''

    rows = [[str(c) for c in r] for r in table]
    longst_row = max(len(r) for r in rows)

    for r in rows:
        while len(r) < longst_row:
            r.append('')

    longest_cols = [
        (max([len(row[i]) for row in rows]) + 3)
        for i in range(longst_row)
    ]

    row_format = "".join(["{:<" + str(longest_col) + "}" for longest_col in longest_cols])
    return '\n'.join(row_format.format(*row).rstrip() for row in rows)


def makedirs_for(path: str):
    folder = os.path.dirname(os.path.abspath(path))

    if not os.path.exists(folder):
        logging.debug(f'Creating folder {folder}')
        os.makedirs(folder)


@dataclasses.dataclass
class CliOption():
    long_name: str
    description: str = ''
    arg_description: str = ''


def make_option(long_name, description=None, arg_description=None) -> CliOption:
    return CliOption(
        long_name=long_name.lstrip('-'),
        description=description or '',
        arg_description=arg_description or '',
    )
