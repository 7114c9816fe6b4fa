"""Unit tests for packed Hamming distance, the grouped index, semantic ranking and saliency maps."""
import tempfile
from pathlib import Path

import numpy as np
import pytest

from app.core.errors import RecordError, ShapeError, ValidationFailure
from app.model.hashcode import CodeBundle
from app.retrieval import (
    build_index,
    code_to_hex,
    hamming_distance,
    hex_to_code,
    pack_bits,
    popcount64,
    query_category_aware,
    rank_semantic,
    read_index,
    saliency_map,
    unpack_bits,
    write_index,
    write_pgm,
    write_query_results,
)
from app.retrieval.index import QueryResult
from app.synthdata import Proposal, Scene, SceneObject


def random_bundles(seed, n=12, c=3, b=10, q=0):
    g = np.random.default_rng(seed)
    out = []
    for image_id in range(n):
        out.append(CodeBundle(
            image_id=image_id,
            category_codes=g.integers(0, 2, size=(c, b)).astype(np.uint8),
            p=g.dirichlet(np.ones(c)),
            semantic_code=g.integers(0, 2, size=q).astype(np.uint8) if q else None,
        ))
    return out


def bit_loop_distance(a, b):
    return sum(int(x != y) for x, y in zip(a, b))


def linear_scan(query, bundles, threshold, topk):
    groups = {}
    for j in range(query.categories):
        if query.p[j] < threshold:
            continue
        rows = [(bit_loop_distance(query.category_codes[j], x.category_codes[j]), x.image_id)
                for x in bundles if x.p[j] >= threshold]
        groups[j] = [(image_id, d) for d, image_id in sorted(rows)[:topk]]
    return groups


class TestHamming:
    def test_popcount_matches_bit_loop(self):
        values = np.random.default_rng(0).integers(0, 2 ** 63, size=50, dtype=np.uint64)
        values = values * np.uint64(2) + np.uint64(1)
        for v, count in zip(values, popcount64(values)):
            assert count == bin(int(v)).count("1")
        assert popcount64(np.array([0, 2 ** 64 - 1], dtype=np.uint64)).tolist() == [0, 64]

    def test_distance_matches_bit_loop(self):
        g = np.random.default_rng(1)
        for b in (1, 12, 63, 64, 65, 130):
            a, c = g.integers(0, 2, size=(2, b))
            assert hamming_distance(a, c) == bit_loop_distance(a, c)

    def test_metric_properties(self):
        g = np.random.default_rng(2)
        for _ in range(20):
            x, y, z = g.integers(0, 2, size=(3, 48))
            assert hamming_distance(x, x) == 0
            assert hamming_distance(x, y) == hamming_distance(y, x)
            assert hamming_distance(x, z) <= hamming_distance(x, y) + hamming_distance(y, z)

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            hamming_distance(np.zeros(4), np.zeros(5))

    def test_most_significant_bit_first(self):
        bits = np.zeros(70, dtype=np.uint8)
        bits[0] = 1
        bits[64] = 1
        words = pack_bits(bits)
        assert words.tolist() == [2 ** 63, 2 ** 63]
        assert np.array_equal(unpack_bits(words, 70), bits)

    def test_hex(self):
        bits = np.array([1, 0, 1, 1, 0, 1], dtype=np.uint8)
        assert code_to_hex(bits) == "b4"
        assert np.array_equal(hex_to_code("b4", 6), bits)
        with pytest.raises(ValidationFailure):
            hex_to_code("b5", 6)
        with pytest.raises(ValidationFailure):
            hex_to_code("b", 6)


class TestBuildIndex:
    def test_threshold_boundary(self):
        codes = np.zeros((2, 4), dtype=np.uint8)
        below = CodeBundle(0, codes, np.array([0.1999, 0.8001]))
        at = CodeBundle(1, codes, np.array([0.2, 0.8]))
        index = build_index([below, at], threshold=0.2)
        assert index.tables[0].ids == [1]
        assert index.tables[1].ids == [0, 1]

    def test_uniform_probabilities_fill_every_table(self):
        bundles = [CodeBundle(i, np.zeros((4, 3), dtype=np.uint8), np.full(4, 0.25)) for i in range(5)]
        assert build_index(bundles, threshold=0.2).entry_counts() == [5, 5, 5, 5]

    def test_exact_code_lookup(self):
        bundles = random_bundles(3)
        index = build_index(bundles, threshold=0.0)
        hits = index.tables[1].lookup(bundles[4].category_codes[1])
        assert 4 in [image_id for image_id, _ in hits]

    def test_rejects_duplicates_and_mismatches(self):
        bundles = random_bundles(4, n=3)
        with pytest.raises(ValidationFailure, match="duplicate"):
            build_index(bundles + [bundles[0]])
        odd = CodeBundle(9, np.zeros((3, 11), dtype=np.uint8), np.full(3, 1 / 3))
        with pytest.raises(ShapeError):
            build_index(bundles + [odd])
        with pytest.raises(ValidationFailure):
            build_index([])


class TestCategoryAwareQuery:
    @pytest.mark.parametrize("threshold", [0.0, 0.2, 0.35])
    def test_matches_linear_scan(self, threshold):
        bundles = random_bundles(5, n=30)
        index = build_index(bundles, threshold=threshold)
        for query in random_bundles(6, n=8):
            result = query_category_aware(query, index, topk=7)
            assert result.groups == linear_scan(query, bundles, threshold, 7)
            assert result.retained == sorted(result.groups)

    @pytest.mark.parametrize("topk", [None, 10])
    def test_matches_vectorized_scan_at_scale(self, topk):
        bundles = random_bundles(16, n=10_000)
        index = build_index(bundles, threshold=0.2)
        ids = np.array([x.image_id for x in bundles])
        codes = np.stack([x.category_codes for x in bundles])
        probs = np.stack([x.p for x in bundles])
        for query in random_bundles(17, n=5):
            result = query_category_aware(query, index, topk=topk)
            for j in result.retained:
                keep = probs[:, j] >= 0.2
                distances = (codes[keep, j, :] != query.category_codes[j]).sum(axis=1)
                order = np.lexsort((ids[keep], distances))[:topk]
                expected = [(int(i), int(d)) for i, d in zip(ids[keep][order], distances[order])]
                assert result.groups[j] == expected

    def test_self_hit_first(self):
        bundles = random_bundles(7, n=20)
        index = build_index(bundles, threshold=0.0)
        for query in bundles:
            result = query_category_aware(query, index, topk=None)
            for ranking in result.groups.values():
                assert ranking[0][1] == 0
                assert query.image_id in [image_id for image_id, d in ranking if d == 0]

    def test_low_probability_query_retains_nothing(self):
        index = build_index(random_bundles(8))
        query = CodeBundle(99, np.zeros((3, 10), dtype=np.uint8), np.full(3, 0.1))
        result = query_category_aware(query, index)
        assert result.retained == [] and result.groups == {}

    def test_threshold_override(self):
        index = build_index(random_bundles(9), threshold=0.2)
        query = random_bundles(10, n=1)[0]
        assert query_category_aware(query, index, threshold=1.0).retained == []

    def test_shape_mismatch(self):
        index = build_index(random_bundles(11))
        with pytest.raises(ShapeError):
            query_category_aware(CodeBundle(0, np.zeros((3, 8), dtype=np.uint8), np.full(3, 0.4)), index)


class TestRankSemantic:
    def test_ties_break_by_id(self):
        db = np.array([[1, 1, 0], [0, 0, 0], [1, 0, 0], [0, 0, 0]], dtype=np.uint8)
        ranking = rank_semantic(np.zeros(3, dtype=np.uint8), [7, 5, 6, 2], db, topk=None)
        assert ranking == [(2, 0), (5, 0), (6, 1), (7, 2)]

    def test_topk(self):
        bundles = random_bundles(12, n=15, q=16)
        db = np.stack([x.semantic_code for x in bundles])
        ranking = rank_semantic(bundles[3].semantic_code, [x.image_id for x in bundles], db, topk=4)
        assert len(ranking) == 4
        assert ranking[0][1] == 0

    def test_own_code_ranks_first(self):
        bundles = random_bundles(18, n=15, q=16)
        db = np.stack([x.semantic_code for x in bundles])
        for query in bundles:
            ranking = rank_semantic(query.semantic_code, [x.image_id for x in bundles], db, topk=None)
            assert ranking[0][1] == 0
            assert query.image_id in [image_id for image_id, d in ranking if d == 0]

    def test_empty_database(self):
        assert rank_semantic(np.zeros(4, dtype=np.uint8), [], np.zeros((0, 4), dtype=np.uint8)) == []

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            rank_semantic(np.zeros(4, dtype=np.uint8), [0], np.zeros((1, 5), dtype=np.uint8))


class TestIndexFile:
    def test_round_trip_preserves_rankings(self):
        bundles = random_bundles(13, n=25)
        index = build_index(bundles, threshold=0.25)
        with tempfile.TemporaryDirectory() as tmp:
            path = write_index(Path(tmp) / "model.index", index)
            loaded = read_index(path)
            assert path.read_text(encoding="ascii").startswith("iah-index 1 c=3 b=10 threshold=0.25 counts=")
        assert loaded.entry_counts() == index.entry_counts()
        assert loaded.threshold == 0.25
        for query in random_bundles(14, n=5):
            assert query_category_aware(query, loaded).groups == query_category_aware(query, index).groups

    def test_count_disagreement(self):
        index = build_index(random_bundles(15, n=4), threshold=0.0)
        with tempfile.TemporaryDirectory() as tmp:
            path = write_index(Path(tmp) / "x.index", index)
            lines = path.read_text(encoding="ascii").splitlines()
            path.write_text("\n".join(lines[:-1]) + "\n", encoding="ascii")
            with pytest.raises(RecordError, match="disagree"):
                read_index(path)

    def test_table_out_of_range(self):
        index = build_index(random_bundles(19, n=4), threshold=0.0)
        with tempfile.TemporaryDirectory() as tmp:
            path = write_index(Path(tmp) / "x.index", index)
            lines = path.read_text(encoding="ascii").splitlines()
            lines[1] = "-1 " + lines[1].split(" ", 1)[1]
            path.write_text("\n".join(lines) + "\n", encoding="ascii")
            with pytest.raises(RecordError, match="outside"):
                read_index(path)

    def test_duplicate_id_in_a_table(self):
        index = build_index(random_bundles(20, n=4), threshold=0.0)
        with tempfile.TemporaryDirectory() as tmp:
            path = write_index(Path(tmp) / "x.index", index)
            lines = path.read_text(encoding="ascii").splitlines()
            path.write_text("\n".join(lines + [lines[1]]) + "\n", encoding="ascii")
            with pytest.raises(RecordError, match="duplicate image id"):
                read_index(path)

    def test_bad_header_and_missing_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "x.index"
            path.write_text("not an index\n", encoding="ascii")
            with pytest.raises(RecordError):
                read_index(path)
            with pytest.raises(FileNotFoundError):
                read_index(Path(tmp) / "missing.index")

    def test_query_results_file(self):
        result = QueryResult(retained=[0, 2], groups={0: [(4, 0), (1, 3)], 2: [(7, 1)]})
        with tempfile.TemporaryDirectory() as tmp:
            path = write_query_results(Path(tmp) / "out.txt", [(9, result), (10, [(3, 2)])])
            text = path.read_text(encoding="ascii")
        assert text == "9 0 1 4 0\n9 0 2 1 3\n9 2 1 7 1\n10 - 1 3 2\n"


def blank_scene(height=6, width=8):
    return Scene(id=0, pixels=np.zeros((1, height, width), dtype=np.float32),
                 objects=[SceneObject(0, (0, 0, 2, 2))], labels=np.array([1, 0], dtype=np.uint8))


class TestSaliency:
    def test_single_proposal(self):
        scene = blank_scene()
        proposal = Proposal.from_box((2, 1, 5, 4), scene.width, scene.height)
        grid = saliency_map(scene, [proposal], np.array([[0.3, 0.7]]), 0)
        assert grid[1:4, 2:5].min() == 1.0
        grid[1:4, 2:5] = 0.0
        assert not grid.any()

    def test_zero_column_gives_zero_map(self):
        scene = blank_scene()
        proposals = [Proposal.from_box((0, 0, 4, 4), scene.width, scene.height)]
        assert not saliency_map(scene, proposals, np.array([[1.0, 0.0]]), 1).any()

    def test_matches_pixel_oracle(self):
        scene = blank_scene()
        boxes = [(0, 0, 4, 4), (2, 2, 8, 6), (1, 3, 3, 5)]
        proposals = [Proposal.from_box(box, scene.width, scene.height) for box in boxes]
        P = np.array([[0.2, 0.8], [0.6, 0.4], [0.5, 0.5]])
        expected = np.zeros((6, 8))
        for y in range(6):
            for x in range(8):
                for (x1, y1, x2, y2), w in zip(boxes, P[:, 0]):
                    if x1 <= x < x2 and y1 <= y < y2:
                        expected[y, x] += w
        assert np.allclose(saliency_map(scene, proposals, P, 0), expected / expected.max())

    def test_argument_errors(self):
        scene = blank_scene()
        proposals = [Proposal.from_box((0, 0, 4, 4), scene.width, scene.height)]
        with pytest.raises(ShapeError):
            saliency_map(scene, proposals, np.ones((2, 2)) / 2, 0)
        with pytest.raises(ValidationFailure):
            saliency_map(scene, proposals, np.array([[0.5, 0.5]]), 2)

    def test_pgm(self):
        grid = np.array([[0.0, 1.0, 0.5]])
        with tempfile.TemporaryDirectory() as tmp:
            data = write_pgm(Path(tmp) / "map.pgm", grid).read_bytes()
        assert data == b"P5\n3 1\n255\n" + bytes([0, 255, 128])
