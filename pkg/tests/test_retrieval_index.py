import numpy as np
import pytest

from divspa.models.Models import DimensionMismatch
from divspa.models.RetrievalIndex import EmbeddingIndex, build_index, dump_topk, topk


def brute_force(vectors, query, k, exclude=()):
    """Exhaustive cosine ranking, score descending then row ascending"""
    norms = np.linalg.norm(vectors, axis=1)
    q = query / np.linalg.norm(query)
    scored = []
    for r in range(len(vectors)):
        if r in exclude:
            continue
        s = 0.0 if norms[r] < 1e-12 else float(vectors[r] @ q / norms[r])
        scored.append((r, s))

    scored.sort(key=lambda rs: (-rs[1], rs[0]))
    return scored[:k]


class TestBuildIndex:
    """Unit rows, masked zero rows and shape checks"""

    def test_rows_are_unit_normalized(self):
        index = build_index(np.eye(3) * 4.0)

        np.testing.assert_allclose(np.linalg.norm(index.vectors, axis=1), 1.0, atol=1e-9)
        assert index.zero_mask == frozenset()
        assert (index.rows, index.dim) == (3, 3)

    def test_hand_normalization(self):
        index = build_index(np.array([[3.0, 4.0]]))
        np.testing.assert_allclose(index.vectors[0], [0.6, 0.8], atol=1e-15)

    def test_zero_row_is_masked(self):
        index = build_index(np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 2.0]]))

        assert index.zero_mask == frozenset({1})
        np.testing.assert_array_equal(index.scores(np.array([1.0, 1.0]))[1], 0.0)

    def test_index_is_read_only(self):
        index = build_index(np.eye(2))
        with pytest.raises(ValueError):
            index.vectors[0, 0] = 5.0

    @pytest.mark.parametrize('vectors', [np.zeros(4), np.zeros((0, 3))])
    def test_bad_shapes(self, vectors):
        with pytest.raises(DimensionMismatch):
            EmbeddingIndex(vectors)

    def test_query_dim_mismatch(self):
        with pytest.raises(DimensionMismatch):
            build_index(np.eye(3)).topk(np.ones(2), 1)


class TestTopK:
    """Exact top-k equals an exhaustive sort, ties on the lower row"""

    def test_self_match_first(self):
        rng = np.random.default_rng(42)
        vectors = rng.normal(size=(20, 8))
        index = build_index(vectors)

        row, score = topk(index, vectors[5], 3)[0]
        assert row == 5
        assert score == pytest.approx(1.0, abs=1e-12)

    def test_k_beyond_rows_returns_everything_sorted(self):
        rng = np.random.default_rng(42)
        vectors = rng.normal(size=(6, 3))
        query = rng.normal(size=3)
        result = topk(build_index(vectors), query, 50, exclude={2})

        assert [r for r, _ in result] == [r for r, _ in brute_force(vectors, query, 50, {2})]
        assert len(result) == 5
        assert 2 not in [r for r, _ in result]
        scores = [s for _, s in result]
        assert scores == sorted(scores, reverse=True)

    def test_matches_exhaustive_sort_on_random_instances(self):
        rng = np.random.default_rng(42)

        for _ in range(200):
            rows, dim = int(rng.integers(1, 1001)), int(rng.integers(2, 65))
            vectors = rng.normal(size=(rows, dim))
            # repeated axis-aligned rows and zero rows score exactly alike: forced ties
            for _ in range(int(rng.integers(0, 4))):
                axis = np.zeros(dim)
                axis[rng.integers(dim)] = rng.choice([-2.5, 1.5])
                vectors[rng.integers(0, rows, size=int(rng.integers(2, 6)))] = axis
            vectors[rng.integers(0, rows, size=rows // 20)] = 0.0

            query = rng.normal(size=dim)
            k = int(rng.integers(1, rows + 6))
            exclude = set(rng.choice(rows, size=rows // 10, replace=False).tolist())

            result = topk(build_index(vectors), query, k, exclude)
            expected = brute_force(vectors, query, k, exclude)

            assert [r for r, _ in result] == [r for r, _ in expected]
            np.testing.assert_allclose([s for _, s in result], [s for _, s in expected], atol=1e-9)

    def test_ties_break_on_lower_row(self):
        vectors = np.array([[1.0, 0.0], [0.0, 1.0], [2.0, 0.0], [1.0, 0.0], [0.0, 3.0]])
        index = build_index(vectors)

        assert [r for r, _ in index.topk(np.array([1.0, 0.0]), 2)] == [0, 2]
        assert [r for r, _ in index.topk(np.array([1.0, 0.0]), 5)] == [0, 2, 3, 1, 4]

    def test_zero_query_ranks_by_row(self):
        index = build_index(np.random.default_rng(42).normal(size=(5, 3)))
        result = index.topk(np.zeros(3), 3, exclude={0})

        assert result == [(1, 0.0), (2, 0.0), (3, 0.0)]

    def test_everything_excluded(self):
        assert build_index(np.eye(3)).topk(np.ones(3), 2, exclude={0, 1, 2}) == []

    def test_k_must_be_positive(self):
        with pytest.raises(ValueError):
            build_index(np.eye(2)).topk(np.ones(2), 0)

    def test_batch_agrees_with_single_queries(self):
        rng = np.random.default_rng(42)
        index = build_index(rng.normal(size=(40, 6)))
        queries = rng.normal(size=(7, 6))
        excludes = [{q, q + 1} for q in range(7)]

        batch = index.topk_batch(queries, 5, excludes)
        for q in range(7):
            single = index.topk(queries[q], 5, excludes[q])
            assert [r for r, _ in batch[q]] == [r for r, _ in single]
            np.testing.assert_allclose([s for _, s in batch[q]], [s for _, s in single], atol=1e-12)

    def test_dump(self, tmp_path):
        index = build_index(np.eye(3))
        path = tmp_path / 'topk.tsv'

        dump_topk(str(path), [(7, index.topk(np.array([1.0, 0.5, 0.0]), 2))])

        lines = path.read_text().splitlines()
        assert [l.split('\t')[:3] for l in lines] == [['7', '1', '0'], ['7', '2', '1']]
