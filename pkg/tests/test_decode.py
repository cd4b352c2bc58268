import numpy as np
import pytest

from attrex.corpus import LabelAlphabet, TaggedTitle, tokenize
from attrex.decode import LinearModel, brute_force_decode, score, viterbi_decode
from attrex.features import FeatureIndex, FeatureSet, build_feature_index, conjoin
from conftest import random_linear_instance, toy_model

ALPHA = LabelAlphabet.bio("brand")
B, I, O = ALPHA.labels


class TestScore:
    def test_toy_gold(self):
        model, title = toy_model()
        assert score(title, (B, O), model) == pytest.approx(3.5)

    def test_toy_all_outside(self):
        model, title = toy_model()
        assert score(title, (O, O), model) == pytest.approx(2.0)

    def test_zero_weights_score_zero_everywhere(self):
        model, title = toy_model(weights=(0.0, 0.0, 0.0))
        for labels in [(B, O), (O, O), (I, I)]:
            assert score(title, labels, model) == 0.0

    def test_length_mismatch(self):
        model, title = toy_model()
        with pytest.raises(ValueError):
            score(title, (B,), model)


class TestViterbi:
    def test_toy_argmax(self):
        model, title = toy_model()
        labels, total = viterbi_decode(title, model)
        assert labels == (B, O)
        assert total == pytest.approx(3.5)

    def test_zero_weights_tie_break_is_all_begin(self):
        # every sequence scores 0; the B < I < O order forces (B, B)
        model, title = toy_model(weights=(0.0, 0.0, 0.0))
        labels, total = viterbi_decode(title, model)
        assert labels == (B, B)
        assert total == 0.0

    def test_single_token_weights_favoring_outside(self):
        alphabet = ALPHA
        index = FeatureIndex([conjoin("bias", O)])

        def bias(tokens, i):
            return "bias"

        fs = FeatureSet.custom({"bias": bias})
        model = LinearModel(np.array([1.0]), index, alphabet, fs, "crf")
        labels, total = viterbi_decode(tokenize("solo"), model)
        assert labels == (O,)
        assert total == pytest.approx(1.0)

    def test_empty_title_rejected(self):
        model, _ = toy_model()
        with pytest.raises(ValueError):
            viterbi_decode(tokenize(""), model)


class TestBruteForce:
    def test_toy_matches_enumeration(self):
        model, title = toy_model()
        labels, total = brute_force_decode(title, model)
        assert labels == (B, O)
        assert total == pytest.approx(3.5)

    def test_guard_on_long_titles(self):
        model, _ = toy_model()
        long_title = tokenize(" ".join(f"t{i}" for i in range(13)))
        with pytest.raises(ValueError):
            brute_force_decode(long_title, model)
        # 12 tokens is still allowed
        ok_title = tokenize(" ".join(f"t{i}" for i in range(12)))
        brute_force_decode(ok_title, model)


class TestOracleEquivalence:
    def test_viterbi_matches_brute_force_on_random_instances(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            model, title = random_linear_instance(rng, max_tokens=6)
            v_labels, v_score = viterbi_decode(title, model)
            b_labels, b_score = brute_force_decode(title, model)
            assert v_labels == b_labels
            assert v_score == pytest.approx(b_score, abs=1e-9)

    def test_constant_shift_leaves_argmax_unchanged(self):
        # a bias feature firing at every position under every label adds a
        # constant m*c to every sequence score
        def bias(tokens, i):
            return "bias"

        def ident(tokens, i):
            return f"tok={tokens[i]}"

        fs = FeatureSet.custom({"ident": ident, "bias": bias})
        corpus = [
            TaggedTitle(tokenize("acme widget pro"), (B, I, O)),
            TaggedTitle(tokenize("gadget by acme"), (O, O, B)),
        ]
        index = build_feature_index(corpus, fs, ALPHA)
        rng = np.random.default_rng(3)
        weights = rng.uniform(-1, 1, index.d)
        title = tokenize("acme widget by pro")
        base_model = LinearModel(weights.copy(), index, ALPHA, fs, "crf")
        base_labels, base_score = viterbi_decode(title, base_model)
        shifted = weights.copy()
        for label in ALPHA.labels:
            fid = index.id_of(conjoin("bias", label))
            shifted[fid] += 5.0
        shifted_model = LinearModel(shifted, index, ALPHA, fs, "crf")
        shifted_labels, shifted_score = viterbi_decode(title, shifted_model)
        assert shifted_labels == base_labels
        assert shifted_score == pytest.approx(base_score + 5.0 * len(title.tokens))


class TestLinearModel:
    def test_dimension_mismatch_rejected(self):
        model, _ = toy_model()
        with pytest.raises(ValueError):
            LinearModel(np.zeros(5), model.index, model.alphabet, model.feature_set, "crf")

    def test_non_finite_weights_rejected(self):
        model, _ = toy_model()
        with pytest.raises(ValueError):
            LinearModel(
                np.array([np.nan, 0.0, 0.0]),
                model.index,
                model.alphabet,
                model.feature_set,
                "crf",
            )

    def test_unknown_kind_rejected(self):
        model, _ = toy_model()
        with pytest.raises(ValueError):
            LinearModel(model.weights, model.index, model.alphabet, model.feature_set, "svm")
