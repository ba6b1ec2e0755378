import logging
import json
import os

from .utils import makedirs_for


def read_json_config(path: str) -> dict:
    logging.debug(f'Reading json from {path}')

    if not os.path.isfile(path):
        return {}

    with open(path, 'r', encoding='utf-8') as file:
        return json.loads(file.read() or '{}')


def dump_json(data) -> str:
    # sorted keys + fixed indent: identical data gives identical bytes
    return json.dumps(data, sort_keys=True, indent=2, ensure_ascii=False) + '\n'


def set_json_config(path: str, data):
    makedirs_for(path)

    with open(path, 'w+', encoding='utf-8') as file:
        file.write(dump_json(data))
        logging.info(f'Saving json to {path}')
