import numpy as np
import pytest

from aspectsum.embeddings import (
    DictEmbeddingProvider,
    EmbeddingCache,
    HashEmbeddingProvider,
    VectorFileError,
    VectorFileProvider,
    document_vector,
    embed_tokens,
    save_vector_file,
    sentence_vector,
)

# frozen from the documented hash scheme: blake2b("0|cat") -> PCG64 -> unit normal
GOLDEN_CAT_D4_S0 = np.array(
    [0.6187235715397322, -0.5217880126977755, 0.0786955197505495, 0.5820012259413332]
)


class TestHashProvider:
    def test_identical_tokens_identical_rows(self):
        provider = HashEmbeddingProvider(dimension=8, seed=0)
        matrix = embed_tokens(provider, ["a", "a"])
        assert matrix.shape == (2, 8)
        np.testing.assert_array_equal(matrix[0], matrix[1])

    def test_golden_vector(self):
        provider = HashEmbeddingProvider(dimension=4, seed=0)
        np.testing.assert_allclose(provider.token_vector("cat"), GOLDEN_CAT_D4_S0, rtol=0, atol=1e-15)

    def test_unit_norm_and_self_cosine(self):
        provider = HashEmbeddingProvider(dimension=16, seed=3)
        for token in ("alpha", "beta", "x"):
            vec = provider.token_vector(token)
            assert np.linalg.norm(vec) == pytest.approx(1.0, abs=1e-12)
            assert float(vec @ vec) == pytest.approx(1.0, abs=1e-12)

    def test_no_collision_on_1k_vocabulary(self):
        provider = HashEmbeddingProvider(dimension=16, seed=0)
        vocab = [f"tok{i}" for i in range(1000)]
        matrix = provider.embed(vocab)
        # all pairwise distinct rows
        unique = {matrix[i].tobytes() for i in range(len(vocab))}
        assert len(unique) == len(vocab)

    def test_seed_changes_vectors(self):
        a = HashEmbeddingProvider(dimension=8, seed=0).token_vector("cat")
        b = HashEmbeddingProvider(dimension=8, seed=1).token_vector("cat")
        assert not np.allclose(a, b)

    def test_dimension_floor(self):
        with pytest.raises(ValueError, match="dimension"):
            HashEmbeddingProvider(dimension=1)

    def test_empty_tokens_rejected(self):
        provider = HashEmbeddingProvider(dimension=4)
        with pytest.raises(ValueError, match="empty"):
            embed_tokens(provider, [])


class TestVectorFile:
    def test_text_lookup(self, tmp_path):
        path = tmp_path / "vecs.txt"
        save_vector_file(str(path), {"cat": np.array([0.6, 0.8])})
        provider = VectorFileProvider(str(path))
        assert provider.dimension == 2
        np.testing.assert_allclose(embed_tokens(provider, ["cat"]), [[0.6, 0.8]])

    def test_oov_fallback_is_zeros(self, tmp_path):
        path = tmp_path / "vecs.txt"
        save_vector_file(str(path), {"cat": np.array([0.6, 0.8])})
        provider = VectorFileProvider(str(path))
        np.testing.assert_array_equal(provider.token_vector("dog"), np.zeros(2))

    def test_binary_roundtrip(self, tmp_path):
        vectors = {"cat": np.array([0.5, -1.25, 3.0]), "dog": np.array([0.0, 2.5, -0.5])}
        path = tmp_path / "vecs.bin"
        save_vector_file(str(path), vectors, binary=True)
        provider = VectorFileProvider(str(path))
        assert provider.dimension == 3
        np.testing.assert_allclose(provider.token_vector("dog"), vectors["dog"])

    def test_missing_file(self, tmp_path):
        with pytest.raises(VectorFileError, match="not found"):
            VectorFileProvider(str(tmp_path / "nope.txt"))

    def test_bad_header(self, tmp_path):
        path = tmp_path / "vecs.txt"
        path.write_text("dimensions=2\ncat 0.5 0.5\n", encoding="utf-8")
        with pytest.raises(VectorFileError, match="header"):
            VectorFileProvider(str(path))

    def test_wrong_component_count(self, tmp_path):
        path = tmp_path / "vecs.txt"
        path.write_text("dim=3 count=1\ncat 0.5 0.5\n", encoding="utf-8")
        with pytest.raises(VectorFileError):
            VectorFileProvider(str(path))

    def test_truncated_binary(self, tmp_path):
        path = tmp_path / "vecs.bin"
        save_vector_file(str(path), {"cat": np.array([1.0, 2.0])}, binary=True)
        raw = path.read_bytes()
        path.write_bytes(raw[:-4])
        with pytest.raises(VectorFileError):
            VectorFileProvider(str(path))


class TestDictProvider:
    def test_lookup_and_oov(self):
        provider = DictEmbeddingProvider({"a": [1.0, 0.0], "b": [0.0, 1.0]})
        np.testing.assert_array_equal(provider.embed(["a", "zzz"]), [[1.0, 0.0], [0.0, 0.0]])

    def test_dimension_consistency(self):
        with pytest.raises(ValueError, match="dimension"):
            DictEmbeddingProvider({"a": [1.0, 0.0], "b": [0.0, 1.0, 2.0]})


class TestPooling:
    def test_sentence_vector_mean(self):
        np.testing.assert_allclose(sentence_vector(np.array([[1.0, 0.0], [0.0, 1.0]])), [0.5, 0.5])

    def test_sentence_vector_single_row(self):
        np.testing.assert_allclose(sentence_vector(np.array([[2.0, 3.0]])), [2.0, 3.0])

    def test_sentence_vector_random_vs_sum_oracle(self):
        rng = np.random.default_rng(0)
        rows = rng.normal(size=(3, 5))
        expected = (rows[0] + rows[1] + rows[2]) / 3.0
        np.testing.assert_allclose(sentence_vector(rows), expected, rtol=1e-12)

    def test_sentence_vector_empty_rejected(self):
        with pytest.raises(ValueError):
            sentence_vector(np.zeros((0, 4)))

    def test_document_vector_examples(self):
        np.testing.assert_allclose(document_vector([[1.0, 1.0]]), [1.0, 1.0])
        np.testing.assert_allclose(document_vector([[0.0, 0.0], [2.0, 2.0]]), [1.0, 1.0])

    def test_document_vector_random_vs_accumulation(self):
        rng = np.random.default_rng(1)
        vecs = rng.normal(size=(5, 7))
        acc = np.zeros(7)
        for v in vecs:
            acc += v
        np.testing.assert_allclose(document_vector(vecs), acc / 5.0, rtol=1e-12)

    def test_mean_invariant_under_row_permutation(self):
        rng = np.random.default_rng(2)
        rows = rng.normal(size=(6, 4))
        for seed in range(5):
            perm = np.random.default_rng(seed).permutation(6)
            np.testing.assert_allclose(sentence_vector(rows[perm]), sentence_vector(rows), rtol=1e-12)


class TestCache:
    def test_second_call_bit_identical(self, tmp_path):
        provider = HashEmbeddingProvider(dimension=8, seed=0)
        cache = EmbeddingCache(str(tmp_path)).scoped("corpus1", "train")
        tokens = ("the", "cat", "sat")
        first = embed_tokens(provider, tokens, cache)
        second = embed_tokens(provider, tokens, cache)
        assert first.tobytes() == second.tobytes()

    def test_cache_keys_distinguish_tokens(self, tmp_path):
        provider = HashEmbeddingProvider(dimension=8, seed=0)
        cache = EmbeddingCache(str(tmp_path))
        a = embed_tokens(provider, ("a",), cache)
        b = embed_tokens(provider, ("b",), cache)
        assert not np.array_equal(a, b)
