import pytest
from hypothesis import given
from hypothesis import strategies as st

from helpers import WORKED_PIECES, WORKED_SENTENCE

from hcsum.tokenizers import (
    BpeCounter,
    Bucket,
    TokenCount,
    TokenizerConfigError,
    TokenizerKind,
    TokenizerSpec,
    bucket_by_length,
    count_tokens,
    whitespace_tokens,
)

WS_SPEC = TokenizerSpec(TokenizerKind.WHITESPACE_APPROX, name="ws")

words = st.lists(st.sampled_from(["alpha", "beta", "42", "mg", "daily."]), max_size=12)


class TestSpecValidation:
    def test_bpe_requires_asset(self):
        with pytest.raises(TokenizerConfigError):
            TokenizerSpec(TokenizerKind.SUBWORD_BPE)

    def test_whitespace_forbids_asset(self):
        with pytest.raises(TokenizerConfigError):
            TokenizerSpec(TokenizerKind.WHITESPACE_APPROX, asset_path="x")

    def test_name_defaults_to_kind(self):
        assert TokenizerSpec(TokenizerKind.WHITESPACE_APPROX).name == "whitespace_approx"

    def test_negative_count_rejected(self):
        with pytest.raises(ValueError):
            TokenCount(-1, "x")


class TestWhitespaceApprox:
    def test_two_words(self):
        assert count_tokens("aa bb", WS_SPEC) == TokenCount(2, "ws")

    def test_empty(self):
        assert count_tokens("", WS_SPEC).count == 0

    def test_standalone_punctuation_counts(self):
        assert whitespace_tokens("daily.") == ["daily", "."]

    @given(words, words)
    def test_monotonic_under_concatenation(self, a, b):
        left, right = " ".join(a), " ".join(b)
        joined = count_tokens(left + " " + right, WS_SPEC).count
        assert joined >= max(count_tokens(left, WS_SPEC).count, count_tokens(right, WS_SPEC).count)


class TestBpe:
    def test_worked_sentence_counts_sixteen(self, demo_bpe_dir):
        spec = TokenizerSpec(TokenizerKind.SUBWORD_BPE, asset_path=str(demo_bpe_dir), name="mini")
        assert count_tokens(WORKED_SENTENCE, spec).count == 16

    def test_worked_sentence_pieces(self, demo_bpe_dir):
        counter = BpeCounter(demo_bpe_dir)
        expected = [piece for word in WORKED_PIECES for piece in word]
        assert counter.encode(WORKED_SENTENCE) == expected
        assert "met" in counter.encode("metformin")

    def test_unknown_word_falls_back_to_characters(self, demo_bpe_dir):
        counter = BpeCounter(demo_bpe_dir)
        assert counter.count("zzq") == 3

    def test_deterministic_across_instances(self, demo_bpe_dir):
        a = BpeCounter(demo_bpe_dir).encode(WORKED_SENTENCE)
        b = BpeCounter(demo_bpe_dir).encode(WORKED_SENTENCE)
        assert a == b

    def test_missing_asset_is_fatal_and_names_path(self, tmp_path):
        missing = tmp_path / "nowhere"
        with pytest.raises(TokenizerConfigError, match="nowhere"):
            BpeCounter(missing)

    def test_corrupt_vocab(self, tmp_path):
        (tmp_path / "vocab.json").write_text("not json", encoding="utf-8")
        (tmp_path / "merges.txt").write_text("a b\n", encoding="utf-8")
        with pytest.raises(TokenizerConfigError, match="corrupt"):
            BpeCounter(tmp_path)

    def test_corrupt_merges(self, tmp_path):
        (tmp_path / "vocab.json").write_text('{"a": 0}', encoding="utf-8")
        (tmp_path / "merges.txt").write_text("a b c\n", encoding="utf-8")
        with pytest.raises(TokenizerConfigError, match="merges"):
            BpeCounter(tmp_path)

    @given(words, words)
    def test_monotonic_under_concatenation(self, a, b):
        # pre-tokenization splits on whitespace, so counts are additive
        import helpers

        spec = TokenizerSpec(
            TokenizerKind.SUBWORD_BPE,
            asset_path=str(helpers.build_demo_bpe_asset(self._asset_dir)),
            name="mini",
        )
        left, right = " ".join(a), " ".join(b)
        joined = count_tokens(left + " " + right, spec).count
        assert joined >= max(count_tokens(left, spec).count, count_tokens(right, spec).count)

    @pytest.fixture(autouse=True)
    def _capture_asset_dir(self, demo_bpe_dir):
        self._asset_dir = demo_bpe_dir


def test_whitespace_to_bpe_ratio_logged_not_asserted(demo_bpe_dir, caplog):
    # sanity ratio between the approximation and subword counts; informational
    import logging

    spec = TokenizerSpec(TokenizerKind.SUBWORD_BPE, asset_path=str(demo_bpe_dir), name="mini")
    texts = [WORKED_SENTENCE, "The patient was prescribed metformin daily.", "2 mg daily."]
    ws = sum(count_tokens(t, WS_SPEC).count for t in texts)
    bpe = sum(count_tokens(t, spec).count for t in texts)
    ratio = ws / bpe
    logging.getLogger("hcsum.tokenizers").info("whitespace/bpe count ratio: %.3f", ratio)
    assert 0 < ratio <= 1.0  # subword counts can only refine upward


class TestBuckets:
    def test_boundary_inclusive_short(self):
        assert bucket_by_length(2048, 2048) is Bucket.SHORT_CONTEXT

    def test_over_boundary_long(self):
        assert bucket_by_length(2049, 2048) is Bucket.LONG_CONTEXT

    def test_well_under(self):
        assert bucket_by_length(500, 2048) is Bucket.SHORT_CONTEXT

    def test_accepts_token_count(self):
        assert bucket_by_length(TokenCount(10, "ws"), 2048) is Bucket.SHORT_CONTEXT

    def test_bad_boundary(self):
        with pytest.raises(ValueError):
            bucket_by_length(5, 0)
