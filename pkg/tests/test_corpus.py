import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from attrex.corpus import (
    AttributeSpan,
    LabelAlphabet,
    Provenance,
    TaggedTitle,
    TokenizerConfig,
    decode_prediction,
    encode_bio,
    entry_from_record,
    read_corpus,
    record_from_entry,
    tokenize,
    write_corpus,
)

ALPHA = LabelAlphabet.bio("brand")
B, I, O = ALPHA.labels


class TestTokenize:
    def test_whitespace_only_title_yields_six_tokens(self):
        title = tokenize("Hewlett Packard B4L03A#B1H Officejet Pro Eaio")
        assert title.tokens == ("Hewlett", "Packard", "B4L03A#B1H", "Officejet", "Pro", "Eaio")

    def test_empty_input(self):
        assert tokenize("").tokens == ()
        assert tokenize("   ").tokens == ()

    def test_comma_dropped_hyphen_kept(self):
        title = tokenize("Apple iPad Mini 3 16GB Wi-Fi Refurbished, Gold")
        assert len(title.tokens) == 8
        assert "Wi-Fi" in title.tokens
        assert all("," not in t for t in title.tokens)

    def test_configured_separators(self):
        title = tokenize('Pack of 2 (white/blue) "deluxe"')
        assert title.tokens == ("Pack", "of", "2", "white", "blue", "deluxe")

    def test_offsets_slice_back_to_tokens(self):
        raw = 'Chihuahua Bella Pillow, by Manual Woodworkers - SLCBCH'
        title = tokenize(raw)
        for token, (start, end) in zip(title.tokens, title.token_offsets):
            assert raw[start:end] == token

    @given(st.text(max_size=60))
    @settings(max_examples=200)
    def test_offsets_always_reproduce_tokens_and_increase(self, raw):
        title = tokenize(raw)
        previous_end = -1
        for token, (start, end) in zip(title.tokens, title.token_offsets):
            assert title.raw_text[start:end] == token
            assert start > previous_end or (start == 0 and previous_end == -1)
            assert start < end
            previous_end = end

    @given(st.text(alphabet=st.characters(blacklist_categories=("Cs",)), max_size=40))
    @settings(max_examples=200)
    def test_idempotent_over_space_join_without_separators(self, raw):
        config = TokenizerConfig(separators="")
        once = tokenize(raw, config)
        again = tokenize(" ".join(once.tokens), config)
        assert again.tokens == once.tokens


class TestEncodeBio:
    def test_multi_token_span(self):
        title = tokenize("Manual Woodworkers and Weavers AIMFBQ Butterfly Quilt 32X42 inch")
        labels = encode_bio(title, AttributeSpan.of(title, 0, 3), ALPHA)
        assert labels == (B, I, I, I, O, O, O, O, O)

    def test_no_span_is_all_outside(self):
        title = tokenize("Womens Popcorn Stitch Infinity Scarf")
        assert encode_bio(title, None, ALPHA) == (O,) * 5

    def test_single_token_span_emits_no_inside(self):
        title = tokenize("one two three four")
        assert encode_bio(title, AttributeSpan.of(title, 2, 2), ALPHA) == (O, O, B, O)

    def test_out_of_range_span_rejected(self):
        title = tokenize("one two")
        with pytest.raises(ValueError):
            AttributeSpan.of(title, 1, 5)
        rogue = AttributeSpan(1, 5, ("two", "x", "x", "x", "x"))
        with pytest.raises(ValueError):
            encode_bio(title, rogue, ALPHA)


class TestDecodePrediction:
    def test_all_outside_is_no_value(self):
        title = tokenize("a b c d")
        assert decode_prediction(title, (O, O, O, O)) is None

    def test_first_subsequence_wins(self):
        title = tokenize("a b c d e")
        span = decode_prediction(title, (B, I, O, B, I))
        assert (span.start_token, span.end_token) == (0, 1)

    def test_span_runs_to_sequence_end(self):
        title = tokenize("a b c d")
        span = decode_prediction(title, (O, B, I, I))
        assert (span.start_token, span.end_token) == (1, 3)
        assert span.surface == ("b", "c", "d")

    def test_orphan_inside_treated_as_outside(self):
        title = tokenize("a b c d")
        span = decode_prediction(title, (O, I, B, I))
        assert (span.start_token, span.end_token) == (2, 3)
        assert decode_prediction(title, (I, I, O, O)) is None

    def test_length_mismatch_rejected(self):
        title = tokenize("a b c")
        with pytest.raises(ValueError):
            decode_prediction(title, (O, O))

    @given(st.data())
    @settings(max_examples=200)
    def test_round_trip_encode_decode(self, data):
        m = data.draw(st.integers(min_value=1, max_value=9))
        title = tokenize(" ".join(f"t{i}" for i in range(m)))
        has_span = data.draw(st.booleans())
        if has_span:
            start = data.draw(st.integers(min_value=0, max_value=m - 1))
            end = data.draw(st.integers(min_value=start, max_value=m - 1))
            span = AttributeSpan.of(title, start, end)
        else:
            span = None
        decoded = decode_prediction(title, encode_bio(title, span, ALPHA))
        assert decoded == span

    @given(st.lists(st.sampled_from([B, I, O]), min_size=1, max_size=9))
    @settings(max_examples=300)
    def test_decoded_span_never_covers_an_outside_token(self, labels):
        title = tokenize(" ".join(f"t{i}" for i in range(len(labels))))
        span = decode_prediction(title, tuple(labels))
        if span is not None:
            assert all(label != O for label in labels[span.start_token : span.end_token + 1])


class TestTaggedTitle:
    def test_valid_sequences_accepted(self):
        title = tokenize("a b c")
        TaggedTitle(title, (B, I, O))
        TaggedTitle(title, (O, O, O))

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            TaggedTitle(tokenize("a b"), (O,))

    def test_orphan_inside_rejected(self):
        with pytest.raises(ValueError):
            TaggedTitle(tokenize("a b"), (O, I))

    def test_two_begins_rejected(self):
        with pytest.raises(ValueError):
            TaggedTitle(tokenize("a b"), (B, B))


class TestAlphabet:
    def test_bio_shape(self):
        assert ALPHA.labels == ("B-brand", "I-brand", "O")
        assert len(ALPHA.labels) == 3
        assert ALPHA.outside == "O"

    def test_sequence_space_size(self):
        import itertools

        m = 4
        assert sum(1 for _ in itertools.product(ALPHA.labels, repeat=m)) == 3**m

    def test_duplicate_labels_rejected(self):
        with pytest.raises(ValueError):
            LabelAlphabet("x", ("O", "O"))


class TestCorpusIO:
    def test_round_trip(self, tmp_path):
        title = tokenize("Acmeor deluxe kit")
        entry_in = entry_from_record(
            {"title": "Acmeor deluxe kit", "attribute": "brand", "value": "Acmeor"}
        )
        path = tmp_path / "corpus.jsonl"
        write_corpus([entry_in], path)
        [entry_out] = read_corpus(path)
        assert entry_out.tagged.labels == (B, O, O)
        assert entry_out.value == "Acmeor"
        assert entry_out.tagged.title.tokens == title.tokens

    def test_labels_computed_when_absent(self):
        entry = entry_from_record(
            {"title": "Sea Gull Lighting Parkfield", "attribute": "brand", "value": "Sea Gull Lighting"}
        )
        assert entry.tagged.labels == (B, I, I, O)

    def test_null_value_means_all_outside(self):
        entry = entry_from_record({"title": "plain kit", "attribute": "brand", "value": None})
        assert entry.tagged.labels == (O, O)

    def test_unmatched_value_is_an_error(self):
        with pytest.raises(ValueError):
            entry_from_record(
                {"title": "Barnett Single Friction Plate", "attribute": "brand", "value": "Barnett Crossbows"}
            )

    def test_bad_line_reports_location(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        path.write_text('{"title": "a b", "attribute": "brand", "value": null}\n{broken\n')
        with pytest.raises(ValueError, match="2"):
            read_corpus(path)

    def test_record_round_trips_provenance(self):
        record = {
            "title": "a b",
            "attribute": "brand",
            "value": None,
            "provenance": "synthetic",
        }
        entry = entry_from_record(record)
        assert entry.tagged.provenance is Provenance.SYNTHETIC
        assert record_from_entry(entry)["provenance"] == "synthetic"
