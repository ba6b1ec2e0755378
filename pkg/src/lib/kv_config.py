import logging
import os
from typing import List, Tuple

from ..models.Models import ConfigError


def normalize_key(key: str) -> str:
    return key.strip().lower().replace('-', '_')


def read_kv_config(path: str) -> List[Tuple[str, str, int]]:
    """
    Reads a flat `key = value` file.
    Returns (key, raw value, line number) triples in file order.
    Comments start with `#`, blank lines are skipped, duplicate keys are rejected.
    """
    if not os.path.isfile(path):
        raise ConfigError(f'{path}:0: config file not found')

    logging.debug(f'Reading config from {path}')

    entries = []
    seen = {}

    with open(path, 'r', encoding='utf-8') as file:
        for line_no, line in enumerate(file, start=1):
            line = line.split('#', 1)[0].strip()

            if not line:
                continue

            if '=' not in line:
                raise ConfigError(f'{path}:{line_no}: expected "key = value"')

            key, value = line.split('=', 1)
            key = normalize_key(key)

            if not key:
                raise ConfigError(f'{path}:{line_no}: empty key')

            if key in seen:
                raise ConfigError(f'{path}:{line_no}: duplicate key "{key}" (first set at line {seen[key]})')

            seen[key] = line_no
            entries.append((key, value.strip(), line_no))

    return entries


def write_kv_config(path: str, entries: List[Tuple[str, str]]):
    with open(path, 'w+', encoding='utf-8') as file:
        for key, value in entries:
            file.write(f'{key} = {value}\n')

    logging.info(f'Saving config to {path}')
