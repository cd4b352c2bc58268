"""attrex: extracting and normalizing attribute values from product titles.

Pipeline pieces: distant-supervision annotation (weak_supervision), BIO
encoding and tokenization (corpus), feature extraction (features), exact
decoding (decode), averaged structured perceptron (perceptron) and
linear-chain CRF (crf) training, HMM/dictionary/kNN baselines (hmm,
baselines), normalization with analyst feedback (normalize), metrics and
cross-validation (evaluation), a synthetic benchmark generator (synth), and
model persistence plus a CLI (serialization, cli).
"""

from .corpus import (
    AttributeSpan,
    CorpusEntry,
    LabelAlphabet,
    Provenance,
    TaggedTitle,
    TokenizedTitle,
    TokenizerConfig,
    decode_prediction,
    encode_bio,
    tokenize,
)
from .decode import LinearModel, brute_force_decode, score, viterbi_decode
from .features import FeatureIndex, FeatureSet, FeatureVector, build_feature_index
from .crf import CrfConfig, forward_backward, predict_with_confidence, sequence_probability, train_crf
from .perceptron import PerceptronConfig, train_sp
from .hmm import HmmModel, hmm_decode, morph_class, train_hmm
from .normalize import (
    Blacklist,
    FeedbackConfig,
    NormalizationTable,
    batch_postprocess,
    normalize_value,
)
from .evaluation import compute_extraction_metrics, cross_validate, threshold_curve

__version__ = "0.1.0"
