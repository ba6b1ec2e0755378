import os
import logging
import zipfile
from typing import Callable, Optional

import requests

from ..lib.costants import MOVIELENS_100K_URL
from ..lib.utils import get_cache_dir, makedirs_for
from ..models.Models import DownloadInterruptedException, DataError


class MovieLensProvider():
    """Fetches the public MovieLens-100K log and converts it to the ingestion TSV"""

    def __init__(self, url: str = MOVIELENS_100K_URL):
        self.name = 'MovieLens-100K'
        self.url = url
        self.currend_download: Optional[requests.Response] = None
        self.member = 'ml-100k/u.data'

    def download(self, status_update_cb: Optional[Callable[[float], None]] = None) -> str:
        download_folder = get_cache_dir('downloads')
        fname = os.path.join(download_folder, os.path.basename(self.url))

        if os.path.exists(fname) and zipfile.is_zipfile(fname):
            logging.info(f'Using cached archive {fname}')
            return fname

        logging.info(f'Downloading file from {self.url}')
        self.currend_download = requests.get(self.url, stream=True, timeout=60)
        self.currend_download.raise_for_status()

        total_size = int(self.currend_download.headers.get('content-length', 0))
        status = 0
        block_size = 1024 * 64

        part = fname + '.part'
        with open(part, 'wb') as f:
            for chunk in self.currend_download.iter_content(block_size):
                f.write(chunk)
                status += len(chunk)

                if total_size and status_update_cb:
                    status_update_cb(status / total_size)

        self.currend_download = None

        if os.path.getsize(part) < total_size:
            received = os.path.getsize(part)
            os.remove(part)
            raise DownloadInterruptedException(self.url, received, total_size)

        os.replace(part, fname)
        return fname

    def convert(self, archive: str, dest: str) -> int:
        """
        Writes `user item timestamp` rows from the archive's `user item rating timestamp` file.
        Returns the number of rows written.
        """
        makedirs_for(dest)

        if not zipfile.is_zipfile(archive):
            raise DataError(f'{archive} is not a zip archive')

        rows = 0
        with zipfile.ZipFile(archive) as z:
            if self.member not in z.namelist():
                raise DataError(f'{archive} does not contain {self.member}')

            with z.open(self.member) as src, open(dest, 'w', encoding='utf-8') as out:
                for line in src:
                    cols = line.decode('utf-8').strip().split('\t')
                    if len(cols) < 4:
                        continue

                    user, item, _rating, ts = cols[:4]
                    out.write(f'{user}\t{item}\t{ts}\n')
                    rows += 1

        logging.info(f'Wrote {rows} interactions to {dest}')
        return rows

    def fetch(self, dest: str, status_update_cb: Optional[Callable[[float], None]] = None) -> int:
        archive = self.download(status_update_cb)
        return self.convert(archive, dest)
