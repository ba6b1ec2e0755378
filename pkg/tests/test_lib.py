import threading

import numpy as np
import pytest

from divspa.lib.async_utils import threaded_map
from divspa.lib.utils import derive_rng, format_table, parse_bool


class TestThreadedMap:
    """Input order is kept and worker errors surface"""

    def test_keeps_input_order(self):
        assert threaded_map(lambda x: x * x, list(range(50)), threads=4) == [x * x for x in range(50)]

    def test_runs_on_several_threads(self):
        seen = set()
        barrier = threading.Barrier(2, timeout=5)

        def work(x):
            seen.add(threading.get_ident())
            if x < 2:
                barrier.wait()
            return x

        threaded_map(work, [0, 1, 2, 3], threads=2)
        assert len(seen) == 2

    def test_first_error_is_raised(self):
        def work(x):
            if x == 3:
                raise KeyError(x)
            return x

        with pytest.raises(KeyError):
            threaded_map(work, list(range(10)), threads=3)

    def test_serial_fallback(self):
        assert threaded_map(str, [1, 2], threads=1) == ['1', '2']


class TestUtils:
    """Small helpers"""

    def test_derived_streams_are_stable_and_distinct(self):
        a = derive_rng(11, 4).random(3)

        np.testing.assert_array_equal(a, derive_rng(11, 4).random(3))
        assert not np.array_equal(a, derive_rng(11, 5).random(3))

    @pytest.mark.parametrize('raw, value', [('yes', True), (' TRUE ', True), ('0', False), ('off', False)])
    def test_parse_bool(self, raw, value):
        assert parse_bool(raw) is value

    def test_parse_bool_rejects_noise(self):
        with pytest.raises(ValueError):
            parse_bool('perhaps')

    def test_format_table_pads_columns(self):
        text = format_table([['a', 'bb'], ['ccc']])
        assert text.splitlines() == ['a     bb', 'ccc']
