# main.py
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.

import os
import sys
import logging

from .lib.costants import APP_NAME, DEBUG_LOGS_ENV
from .lib.utils import get_cache_dir
from .Cli import Cli

LOG_FILE_MAX_N_LINES = 5000


def setup_logging(debug=False) -> str:
    log_folder = get_cache_dir('logs')
    log_file = os.path.join(log_folder, f'{APP_NAME}.log')

    # Clear log file if it's too big
    if os.path.exists(log_file):
        with open(log_file, 'r', encoding='utf-8', errors='replace') as f:
            log_file_size = sum(1 for _ in f)

        if log_file_size > LOG_FILE_MAX_N_LINES:
            with open(log_file, 'w+') as f:
                f.write('')

    logging.basicConfig(
        filename=log_file,
        filemode='a',
        encoding='utf-8',
        format='%(asctime)s %(levelname)-1s [%(filename)s:%(lineno)d] %(message)s',
        level=logging.DEBUG if debug else logging.INFO,
        force=True
    )

    return log_file


def main(argv=None):
    """The application's entry point."""
    argv = list(sys.argv if argv is None else argv)

    debug = '--debug-logs' in argv or bool(os.environ.get(DEBUG_LOGS_ENV))
    argv = [a for a in argv if a != '--debug-logs']

    try:
        setup_logging(debug)
        logging.info(f'---- {APP_NAME} startup | {" ".join(argv[1:])}')
    except OSError as e:
        print(f'Warning: file logging disabled ({e})', file=sys.stderr)

    sys.exit(Cli.from_options(argv))


if __name__ == '__main__':
    main()
