import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from attrex.corpus import LabelAlphabet, TaggedTitle, tokenize
from attrex.features import (
    TEMPLATES,
    FeatureIndex,
    FeatureSet,
    FeatureVector,
    build_feature_index,
    conjoin,
    extract_position_features,
    global_feature_vector,
    lemma,
    load_feature_config,
    observation_names,
    save_feature_config,
    transition_name,
)
from conftest import toy_feature_set, toy_model

ALPHA = LabelAlphabet.bio("brand")
B, I, O = ALPHA.labels


class TestTemplates:
    @pytest.mark.parametrize(
        "name,tokens,i,expected",
        [
            ("w0", ("The", "quick"), 0, "w0=The"),
            ("w-1", ("The", "quick"), 1, "w-1=The"),
            ("w-1", ("The", "quick"), 0, None),
            ("(w-1,w0)", ("sea", "gull"), 1, "(w-1,w0)=sea|gull"),
            ("(w0,w1)", ("sea", "gull"), 0, "(w0,w1)=sea|gull"),
            ("(w-2,w-1)", ("a", "b", "c"), 2, "(w-2,w-1)=a|b"),
            ("(w-2,w-1)", ("a", "b", "c"), 1, None),
            ("w0-lemma", ("Weavers",), 0, "w0-lemma=weaver"),
            ("w-1-lemma", ("Gloves", "x"), 1, "w-1-lemma=glov"),
            ("w1[0]-is-digit", ("Galaxy", "5019NI"), 0, "w1[0]-is-digit"),
            ("w1[0]-is-digit", ("Galaxy", "phone"), 0, None),
            ("w0-letters-only", ("Apple",), 0, "w0-letters-only"),
            ("w0-letters-only", ("B4L03A#B1H",), 0, None),
            ("w0-digits-only", ("84377",), 0, "w0-digits-only"),
            ("w0-all-uppercase", ("WWE",), 0, "w0-all-uppercase"),
            ("w0-all-uppercase", ("Wwe",), 0, None),
            ("w0[0]-uppercase", ("Kichler",), 0, "w0[0]-uppercase"),
            ("w0[0]-w1[0]-uppercase", ("Straight", "Talk"), 0, "w0[0]-w1[0]-uppercase"),
            ("w0[0]-w1[0]-uppercase", ("Straight", "talk"), 0, None),
            ("w0-contains-hyphen", ("Kimberly-Clark",), 0, "w0-contains-hyphen"),
            ("w0-char-count", ("abc",), 0, "w0-char-count=3"),
            ("w0-char-count", ("lighting",), 0, "w0-char-count=6+"),
            ("token-position", ("a", "b", "c", "d", "e", "f"), 5, "token-position=4+"),
            ("token-position", ("a", "b"), 1, "token-position=1"),
            ("first-token", ("a", "b"), 0, "first-token"),
            ("first-token", ("a", "b"), 1, None),
            ("w-1-is-by", ("Pillow", "by", "Manual"), 2, "w-1-is-by"),
            ("w-1-is-by", ("by", "Manual"), 0, None),
            ("w-1-is-and", ("Woodworkers", "and", "Weavers"), 2, "w-1-is-and"),
            ("w-1[0]-uppercase", ("Vision", "studio"), 1, "w-1[0]-uppercase"),
        ],
    )
    def test_template_firings(self, name, tokens, i, expected):
        assert TEMPLATES[name](tokens, i) == expected

    def test_registry_has_the_full_template_inventory(self):
        assert len(TEMPLATES) == 20

    def test_lemma_rules(self):
        assert lemma("Weavers") == "weaver"
        assert lemma("lighting") == "light"
        assert lemma("engraved") == "engrav"
        assert lemma("as") == "as"  # stem would drop below 3 chars
        assert lemma("Top") == "top"

    def test_token_identity_fires_only_at_matching_position_and_label(self):
        # mirror of the worked part-of-speech illustration: an identity
        # template conjoined with a label contributes only where both match
        title = tokenize("The quick brown fox jumps over the lazy dog")
        fs = FeatureSet.standard(("w0",))
        index = FeatureIndex([conjoin("w0=the", B)])
        hit = extract_position_features(title, O, B, 6, fs, index)
        assert hit.to_dict() == {0: 1.0}
        miss_position = extract_position_features(title, O, B, 1, fs, index)
        assert miss_position.to_dict() == {}
        miss_label = extract_position_features(title, O, O, 6, fs, index)
        assert miss_label.to_dict() == {}


class TestFeatureSet:
    def test_standard_rejects_unknown_names(self):
        with pytest.raises(ValueError):
            FeatureSet.standard(("w0", "nope"))

    def test_without(self):
        fs = FeatureSet.standard(("w0", "w-1"))
        assert fs.without("w-1").names == ("w0",)
        with pytest.raises(ValueError):
            fs.without("w-1-is-by")

    def test_config_file_round_trip(self, tmp_path):
        path = tmp_path / "templates.json"
        fs = FeatureSet.standard(("w0", "(w-1,w0)", "w-1-is-by"))
        save_feature_config(fs, path)
        assert load_feature_config(path).names == fs.names


class TestFeatureIndex:
    def test_toy_registration_is_exact(self):
        # single title "acme widget" tagged (B, O) under the toy templates:
        # firing gold names plus the 3x3+3 transition/start names
        tagged = TaggedTitle(tokenize("acme widget"), (B, O))
        index = build_feature_index([tagged], toy_feature_set(), ALPHA)
        # gold firings: position 0 (label B) fires tok=acme and bias,
        # position 1 (label O) fires bias
        expected = {conjoin("tok=acme", B), conjoin("bias", B), conjoin("bias", O)}
        expected |= {transition_name(None, label) for label in ALPHA.labels}
        expected |= {
            transition_name(prev, label)
            for prev in ALPHA.labels
            for label in ALPHA.labels
        }
        assert set(index.names) == expected
        assert index.d == 3 + 12

    def test_identical_corpora_identical_indices(self):
        corpus = [TaggedTitle(tokenize("acme widget pro"), (B, O, O))]
        fs = FeatureSet.standard()
        assert build_feature_index(corpus, fs, ALPHA) == build_feature_index(corpus, fs, ALPHA)

    def test_unseen_token_strictly_grows_the_index(self):
        fs = FeatureSet.standard(("w0",))
        small = build_feature_index([TaggedTitle(tokenize("acme widget"), (B, O))], fs, ALPHA)
        grown = build_feature_index(
            [
                TaggedTitle(tokenize("acme widget"), (B, O)),
                TaggedTitle(tokenize("acme gadget"), (B, O)),
            ],
            fs,
            ALPHA,
        )
        assert grown.d > small.d

    def test_empty_corpus_rejected(self):
        with pytest.raises(ValueError):
            build_feature_index([], FeatureSet.standard(), ALPHA)


class TestFeatureVector:
    def test_invariants_enforced(self):
        with pytest.raises(ValueError):
            FeatureVector((3, 1), (1.0, 1.0))
        with pytest.raises(ValueError):
            FeatureVector((1, 2), (1.0, 0.0))

    def test_from_counts_sorts_and_drops_zeros(self):
        vec = FeatureVector.from_counts({5: 2.0, 1: 1.0, 7: 0.0})
        assert vec.ids == (1, 5)
        assert vec.values == (1.0, 2.0)


class TestGlobalFeatureVector:
    def test_toy_gold_sequence(self):
        model, title = toy_model()
        vec = global_feature_vector(title, (B, O), model.feature_set, model.index)
        assert vec.to_dict() == {0: 1.0, 1: 1.0, 2: 1.0}

    def test_toy_all_outside(self):
        model, title = toy_model()
        vec = global_feature_vector(title, (O, O), model.feature_set, model.index)
        assert vec.to_dict() == {1: 2.0}

    def test_length_mismatch_rejected(self):
        model, title = toy_model()
        with pytest.raises(ValueError):
            global_feature_vector(title, (B,), model.feature_set, model.index)

    @given(st.data())
    @settings(max_examples=60, deadline=None)
    def test_equals_sum_of_position_vectors(self, data):
        rng = np.random.default_rng(data.draw(st.integers(0, 2**31)))
        m = data.draw(st.integers(min_value=1, max_value=6))
        tokens = [f"t{rng.integers(4)}" for _ in range(m)]
        title = tokenize(" ".join(tokens))
        labels = tuple(ALPHA.labels[rng.integers(3)] for _ in range(m))
        fs = FeatureSet.standard(("w0", "(w-1,w0)", "token-position"))
        corpus = [TaggedTitle(tokenize(" ".join(f"t{i}" for i in range(4)) + " t0 t1"), None or (B, I, I, O, O, O))]
        index = build_feature_index(corpus, fs, ALPHA)
        total: dict[int, float] = {}
        prev = None
        for i, label in enumerate(labels):
            vec = extract_position_features(title, prev, label, i, fs, index)
            for fid, value in vec.to_dict().items():
                total[fid] = total.get(fid, 0.0) + value
            prev = label
        direct = global_feature_vector(title, labels, fs, index)
        assert direct.to_dict() == total

    def test_locality_changing_one_label_touches_two_positions(self):
        fs = FeatureSet.standard(("w0", "(w-1,w0)"))
        tokens = "t0 t1 t2 t3 t4"
        corpus = [TaggedTitle(tokenize(tokens), (B, I, O, O, O))]
        index = build_feature_index(corpus, fs, ALPHA)
        title = tokenize(tokens)
        base = (B, I, O, O, O)
        changed = (B, I, I, O, O)  # flip position 2
        j = 2
        prev_base, prev_changed = None, None
        for i in range(5):
            vec_base = extract_position_features(title, prev_base, base[i], i, fs, index)
            vec_changed = extract_position_features(title, prev_changed, changed[i], i, fs, index)
            if i in (j, j + 1):
                pass  # the only positions allowed to differ
            else:
                assert vec_base == vec_changed
            prev_base, prev_changed = base[i], changed[i]

    def test_frozen_index_drops_unseen_names(self):
        fs = FeatureSet.standard(("w0",))
        corpus = [TaggedTitle(tokenize("acme widget"), (B, O))]
        index = build_feature_index(corpus, fs, ALPHA)
        unseen = tokenize("mystery gadget")
        vec = global_feature_vector(unseen, (B, O), fs, index)
        assert all(fid < index.d for fid in vec.ids)
        # only transition features survive: the observations are unindexed
        assert vec.to_dict() == {
            index.id_of(transition_name(None, B)): 1.0,
            index.id_of(transition_name(B, O)): 1.0,
        }

    def test_position_out_of_range(self):
        model, title = toy_model()
        with pytest.raises(ValueError):
            extract_position_features(title, None, B, 9, model.feature_set, model.index)
