import numpy as np
import pytest

from divspa.models.Models import (
    CorpusExhausted, DatasetNotFound, EmptyDataset, InvalidFraction, MalformedLine,
)
from divspa.providers.providers_list import interaction_provider

from conftest import make_dataset


class TestLoadInteractions:
    """Parsing, first-seen ids and line-anchored errors"""

    def test_ids_follow_first_seen_order(self, tmp_path):
        path = tmp_path / 'log.tsv'
        path.write_text('alice\tb42\t10\nbob\ta7\t11\nalice\ta7\t12\n')

        ds = interaction_provider.load_interactions(str(path))

        assert ds.user_ids == ['alice', 'bob']
        assert ds.item_ids == ['b42', 'a7']
        assert ds.users.tolist() == [0, 1, 0]
        assert ds.items.tolist() == [0, 1, 1]
        assert ds.timestamps.tolist() == [10, 11, 12]
        assert ds.source_path == str(path)

    def test_blank_lines_and_duplicates_are_skipped(self, tmp_path):
        path = tmp_path / 'log.tsv'
        path.write_text('u1\ti1\t1\n\nu1\ti1\t1\n   \nu1\ti1\t2\n')

        ds = interaction_provider.load_interactions(str(path))

        assert len(ds) == 2
        assert ds.timestamps.tolist() == [1, 2]

    def test_extra_columns_are_ignored(self, tmp_path):
        path = tmp_path / 'log.tsv'
        path.write_text('u1\ti1\t5\t4.0\n')

        ds = interaction_provider.load_interactions(str(path))
        assert ds.interactions[0].timestamp == 5

    @pytest.mark.parametrize('content, line_no', [
        ('u1\ti1\t1\nu2\ti2\n', 2),
        ('u1\ti1\tyesterday\n', 1),
        ('u1\ti1\t1\n\n\t\t3\n', 3),
    ])
    def test_malformed_line_is_reported(self, tmp_path, content, line_no):
        path = tmp_path / 'log.tsv'
        path.write_text(content)

        with pytest.raises(MalformedLine) as e:
            interaction_provider.load_interactions(str(path))

        assert e.value.line_no == line_no
        assert f'line {line_no}' in str(e.value)

    def test_invalid_utf8_is_a_malformed_line(self, tmp_path):
        path = tmp_path / 'log.tsv'
        path.write_bytes(b'u1\ti1\t1\n\xff\xfe\ti2\t2\n')

        with pytest.raises(MalformedLine) as e:
            interaction_provider.load_interactions(str(path))

        assert e.value.line_no == 2
        assert 'invalid UTF-8' in str(e.value)

    def test_crlf_line_endings(self, tmp_path):
        path = tmp_path / 'log.tsv'
        path.write_bytes(b'u1\ti1\t1\r\nu2\ti2\t2\r\n')

        ds = interaction_provider.load_interactions(str(path))

        assert ds.item_ids == ['i1', 'i2']
        assert ds.timestamps.tolist() == [1, 2]

    def test_missing_file(self, tmp_path):
        missing = str(tmp_path / 'nope.tsv')
        with pytest.raises(DatasetNotFound) as e:
            interaction_provider.load_interactions(missing)

        assert missing in str(e.value)

    def test_empty_file(self, tmp_path):
        path = tmp_path / 'log.tsv'
        path.write_text('\n\n')

        with pytest.raises(EmptyDataset):
            interaction_provider.load_interactions(str(path))


class TestChronologicalSplit:
    """Latest events go to test; cold users and items are dropped and counted"""

    rows = [
        (0, 0, 1), (0, 1, 2), (1, 0, 3), (1, 2, 4), (0, 2, 5),
        (1, 1, 6), (0, 3, 7), (2, 0, 8), (1, 4, 9), (0, 1, 10),
    ]

    def test_cold_events_are_dropped_and_counted(self):
        ds = make_dataset(self.rows, num_users=3, num_items=5)

        train, test, report = interaction_provider.chronological_split(ds, 0.3)

        assert report.total == 10
        assert report.train == 7
        assert report.test_before_drop == 3
        assert report.dropped_cold_user == 1
        assert report.dropped_cold_item == 1
        assert report.test == 1
        assert report.dropped == 2

        assert len(train) == 7
        assert max(train.timestamps) < min(test.timestamps)
        assert test.interactions[0].user == 0 and test.interactions[0].item == 1

    def test_test_size_rounds_up(self):
        ds = make_dataset(self.rows, num_users=3, num_items=5)

        _, _, report = interaction_provider.chronological_split(ds, 0.25)
        assert report.test_before_drop == 3

    def test_split_is_stable_on_equal_timestamps(self):
        ds = make_dataset([(0, 0, 1), (0, 1, 1), (0, 2, 1), (0, 0, 1)], num_items=3)

        train, test, _ = interaction_provider.chronological_split(ds, 0.5)

        assert train.items.tolist() == [0, 1]
        assert test.items.tolist() == [0]

    def test_ids_are_shared_across_splits(self):
        ds = make_dataset(self.rows, num_users=3, num_items=5)
        train, test, _ = interaction_provider.chronological_split(ds, 0.3)

        assert train.user_ids is ds.user_ids and test.item_ids is ds.item_ids
        assert train.num_items == test.num_items == 5

    @pytest.mark.parametrize('fraction', [0, 1, -0.1, 1.5])
    def test_fraction_out_of_range(self, fraction):
        ds = make_dataset(self.rows)
        with pytest.raises(InvalidFraction):
            interaction_provider.chronological_split(ds, fraction)


class TestUserHistories:
    """Chronological histories truncated to the most recent items"""

    def test_chronological_and_truncated(self):
        ds = make_dataset([(0, 3, 30), (0, 1, 10), (0, 2, 20), (1, 0, 5), (0, 4, 40)])

        histories = interaction_provider.build_user_histories(ds, max_history=3)

        assert histories[0].items == (2, 3, 4)
        assert histories[1].items == (0,)
        assert len(histories[0]) == 3

    def test_max_history_must_be_positive(self):
        with pytest.raises(ValueError):
            interaction_provider.build_user_histories(make_dataset([(0, 0, 0)]), 0)


class TestSampleNegatives:
    """Distinct uniform draws that never hit an excluded item"""

    def test_distinct_and_never_excluded(self):
        rng = np.random.default_rng(42)
        exclude = {0, 3, 4, 9}

        for _ in range(200):
            picks = interaction_provider.sample_negatives(rng, 10, exclude, 6)
            assert len(set(picks.tolist())) == 6
            assert not exclude & set(picks.tolist())
            assert picks.min() >= 0 and picks.max() < 10

    def test_takes_every_available_item(self):
        rng = np.random.default_rng(42)
        picks = interaction_provider.sample_negatives(rng, 5, (1, 2), 3)

        assert sorted(picks.tolist()) == [0, 3, 4]

    def test_uniform_over_the_eligible_items(self):
        rng = np.random.default_rng(42)
        counts = np.zeros(10)

        for _ in range(100_000):
            counts[interaction_provider.sample_negatives(rng, 10, (), 1)] += 1

        np.testing.assert_allclose(counts / 100_000, 0.1, atol=0.01)

    def test_exclusions_are_uniformly_skipped(self):
        rng = np.random.default_rng(42)
        counts = np.zeros(8)

        for _ in range(20_000):
            counts[interaction_provider.sample_negatives(rng, 8, (2, 5), 1)] += 1

        assert counts[2] == 0 and counts[5] == 0
        np.testing.assert_allclose(counts[[0, 1, 3, 4, 6, 7]] / 20_000, 1 / 6, atol=0.015)

    def test_corpus_exhausted(self):
        rng = np.random.default_rng(42)
        with pytest.raises(CorpusExhausted):
            interaction_provider.sample_negatives(rng, 4, (0, 1), 3)
