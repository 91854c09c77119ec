import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from curricula.errors import ConfigError, CurriculaError
from curricula.vocab import (Vocab, base_vocab, detokenize, extend_model_vocab,
                             extend_vocab, mean_init_rows, read_matrix,
                             read_vocab, tokenize, write_matrix, write_vocab)


def vocab_with(*extra: str) -> Vocab:
    return base_vocab(extra_tokens=tuple(extra))


def tokenize_oracle(v: Vocab, data: bytes) -> list[int]:
    # naive longest-match: scan every token for the longest prefix at each
    # position, independent of the length-indexed lookup in tokenize()
    ids = []
    pos = 0
    while pos < len(data):
        best = None
        for i, tok in enumerate(v.tokens):
            if data.startswith(tok, pos) and (best is None or len(tok) > len(v.tokens[best])):
                best = i
        ids.append(best)
        pos += len(v.tokens[best])
    return ids


class TestTokenize:
    def test_longest_match_beats_bytes(self):
        v = vocab_with("ab")
        assert tokenize(v, "abc") == [v.id_of("ab"), v.id_of("c")]

    def test_empty_string(self):
        assert tokenize(base_vocab(), "") == []

    def test_overlapping_candidates(self):
        v = vocab_with("ab", "abc")
        ids = tokenize(v, "abcab")
        assert ids == [v.id_of("abc"), v.id_of("ab")]
        assert ids == tokenize_oracle(v, b"abcab")

    def test_matches_oracle_random_strings(self):
        rng = np.random.default_rng(3)
        v = vocab_with("ab", "abc", "bca", "aa", "ξ", "ξa")
        letters = "abcξ"
        for _ in range(100):
            s = "".join(rng.choice(list(letters), size=rng.integers(0, 30)))
            assert tokenize(v, s) == tokenize_oracle(v, s.encode("utf-8"))

    @given(st.text(max_size=60))
    def test_detokenize_identity(self, s):
        v = vocab_with("ab", "the", "ξ")
        assert detokenize(v, tokenize(v, s)) == s.encode("utf-8")

    @given(st.text(max_size=60))
    def test_extension_never_lengthens(self, s):
        v = base_vocab()
        v2, _, _ = extend_vocab(v, ["ab", "ξ", "the"])
        assert len(tokenize(v2, s)) <= len(tokenize(v, s))

    def test_byte_fallback_total(self):
        v = base_vocab()
        raw = bytes(range(256))
        assert detokenize(v, tokenize(v, raw)) == raw


class TestVocabInvariants:
    def test_single_byte_tokens_required(self):
        with pytest.raises(ConfigError):
            Vocab(tuple(bytes([b]) for b in range(255)))

    def test_duplicates_rejected(self):
        toks = tuple(bytes([b]) for b in range(256)) + (b"x",)
        with pytest.raises(ConfigError):
            Vocab(toks)

    def test_ids_dense(self):
        v = vocab_with("ab", "cd")
        assert [v.id_of(t) for t in v.tokens] == list(range(len(v)))


class TestExtendVocab:
    def test_append_preserves_ids(self):
        v = vocab_with(*[f"tok{i}" for i in range(44)])  # 256 bytes + 44 = 300
        assert len(v) == 300
        new = [f"new{i}" for i in range(10)]
        v2, appended, skipped = extend_vocab(v, new)
        assert len(v2) == 310 and len(appended) == 10 and not skipped
        assert v2.tokens[:300] == v.tokens
        for t in v.tokens:
            assert v2.id_of(t) == v.id_of(t)

    def test_existing_token_skipped(self):
        v = vocab_with("ab")
        v2, appended, skipped = extend_vocab(v, ["ab", "cd"])
        assert appended == [b"cd"] and skipped == [b"ab"]
        assert len(v2) == len(v) + 1

    def test_duplicate_within_new_tokens_rejected(self):
        with pytest.raises(ConfigError):
            extend_vocab(base_vocab(), ["x1", "x1"])

    def test_large_extension_counts(self):
        v = base_vocab()
        new = [f"字{i}" for i in range(8_701)] + [f"符{i}" for i in range(62)]
        v2, appended, _ = extend_vocab(v, new)
        assert len(appended) == 8_763
        assert len(v2) == len(v) + 8_763

    def test_rerun_idempotent(self):
        v = base_vocab()
        v2, _, _ = extend_vocab(v, ["ab", "cd"])
        v3, appended, skipped = extend_vocab(v2, ["ab", "cd"])
        assert v3.tokens == v2.tokens and not appended and len(skipped) == 2


def mean_init_oracle(e, v_base, tokens):
    # per-token loop with explicit accumulation, no vectorized mean
    rows = []
    for tok in tokens:
        ids = tokenize(v_base, tok)
        acc = np.zeros(e.shape[1], dtype=np.float64)
        for i in ids:
            acc += e[i].astype(np.float64)
        rows.append((acc / len(ids)).astype(np.float32))
    return np.stack(rows) if rows else np.empty((0, e.shape[1]), np.float32)


class TestMeanInit:
    def test_repeated_single_piece_copies_row_bitwise(self):
        # "aaa" tokenizes to three copies of the byte token "a"; the mean of
        # identical rows must reproduce the row exactly
        v = base_vocab()
        rng = np.random.default_rng(0)
        e = rng.normal(size=(len(v), 4)).astype(np.float32)
        e2 = mean_init_rows(e, v, ["aaa"])
        assert np.array_equal(e2[-1], e[v.id_of("a")])

    def test_already_present_token_appends_no_row(self):
        v = vocab_with("ab")
        e = np.ones((len(v), 4), dtype=np.float32)
        assert mean_init_rows(e, v, ["ab"]).shape[0] == len(v)

    def test_two_piece_arithmetic_mean(self):
        v = base_vocab()
        e = np.zeros((len(v), 2), dtype=np.float32)
        e[v.id_of("a")] = [1.0, 2.0]
        e[v.id_of("b")] = [3.0, 4.0]
        e2 = mean_init_rows(e, v, ["ab"])
        assert np.array_equal(e2[-1], np.array([2.0, 3.0], dtype=np.float32))

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(42)
        for trial in range(20):
            extra = [f"p{i}" for i in range(rng.integers(0, 6))]
            v = vocab_with(*extra)
            e = rng.normal(size=(len(v), 8)).astype(np.float32)
            new = [f"w{trial}_{i}" + "ab" * int(rng.integers(0, 3))
                   for i in range(5)]
            e2 = mean_init_rows(e, v, new)
            expected = mean_init_oracle(e, v, [t.encode() for t in new])
            assert np.allclose(e2[len(v):], expected, atol=1e-6)
            assert np.array_equal(e2[:len(v)], e)  # old rows bit-identical

    def test_size_mismatch_rejected(self):
        v = base_vocab()
        with pytest.raises(CurriculaError):
            mean_init_rows(np.zeros((len(v) - 1, 4), np.float32), v, ["xx"])


class TestExtendModelVocab:
    def test_identical_inputs_identical_outputs(self):
        v = base_vocab()
        rng = np.random.default_rng(1)
        m = rng.normal(size=(len(v), 6)).astype(np.float32)
        e2, o2, v2 = extend_model_vocab(m, m.copy(), v, ["ξ", "ζ"])
        assert np.array_equal(e2, o2)
        assert len(v2) == len(v) + 2

    def test_output_rows_independent_of_embedding(self):
        v = base_vocab()
        rng = np.random.default_rng(2)
        emb = rng.normal(size=(len(v), 6)).astype(np.float32)
        out_a = rng.normal(size=(len(v), 6)).astype(np.float32)
        _, o_from_a, _ = extend_model_vocab(emb, out_a, v, ["ξ"])
        _, o_from_b, _ = extend_model_vocab(np.zeros_like(emb), out_a, v, ["ξ"])
        assert np.array_equal(o_from_a, o_from_b)


class TestFileFormats:
    def test_vocab_roundtrip_with_control_bytes(self, tmp_path):
        v = vocab_with("a\nb", "t\tt", "back\\slash", "ξη", "mixed\xffbyte")
        path = tmp_path / "vocab.txt"
        write_vocab(path, v)
        assert read_vocab(path).tokens == v.tokens

    def test_vocab_line_number_is_id(self, tmp_path):
        v = vocab_with("zz")
        path = tmp_path / "vocab.txt"
        write_vocab(path, v)
        lines = path.read_text(encoding="utf-8").split("\n")
        assert lines[v.id_of("zz")] == "zz"

    def test_matrix_roundtrip_and_layout(self, tmp_path):
        rng = np.random.default_rng(5)
        m = rng.normal(size=(7, 3)).astype(np.float32)
        path = tmp_path / "m.emb"
        write_matrix(path, m)
        raw = path.read_bytes()
        assert raw[:4] == b"EMB1"
        assert np.frombuffer(raw[4:12], dtype="<u4").tolist() == [7, 3]
        assert np.array_equal(np.frombuffer(raw[12:], dtype="<f4").reshape(7, 3), m)
        assert np.array_equal(read_matrix(path), m)

    def test_matrix_bad_magic(self, tmp_path):
        path = tmp_path / "bad.emb"
        path.write_bytes(b"NOPE" + b"\0" * 8)
        with pytest.raises(CurriculaError):
            read_matrix(path)
