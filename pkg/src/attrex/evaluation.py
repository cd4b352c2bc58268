"""Metrics, threshold curves, cross-validation, ablation, and model comparison.

Precision and recall are computed only over items whose true or predicted
value is a real value (not the unbranded sentinel); label accuracy is a
token-level diagnostic over everything. Threshold curves use sequence-level
correctness gated on the predicted sequence's conditional probability.
"""

from __future__ import annotations

import math
import random
import statistics
from dataclasses import dataclass
from typing import Callable, Protocol, Sequence

from .baselines import DictModel, KnnModel, Lexicon, TfIdfIndex, dict_extract, knn_extract
from .corpus import (
    OUTSIDE,
    CorpusEntry,
    LabelAlphabet,
    TaggedTitle,
    TokenizedTitle,
    decode_prediction,
)
from .crf import CrfConfig, predict_with_confidence, train_crf
from .decode import LinearModel, viterbi_decode
from .features import FeatureSet, build_feature_index
from .hmm import HmmModel, hmm_decode, train_hmm
from .normalize import Blacklist, NormalizationTable, Resolution, normalize_value
from .perceptron import PerceptronConfig, train_sp
from .text import key_form


@dataclass(frozen=True)
class EvaluationReport:
    """Counts and rates per the extraction metric definitions.

    precision is None (undefined marker) when there are no valued
    predictions, never silently 0; same for recall and f1 with empty
    denominators.
    """

    n: int
    n_true_valued: int
    n_predicted_valued: int
    n_correct: int
    precision: float | None
    recall: float | None
    f1: float | None
    label_accuracy: float | None

    @property
    def loss(self) -> float | None:
        return None if self.f1 is None else 1.0 - self.f1


def _values_equal(gold: str, predicted: str) -> bool:
    return key_form(gold) == key_form(predicted)


def compute_extraction_metrics(
    gold_values: Sequence[str | None],
    predicted_values: Sequence[str | None],
    gold_labels: Sequence[Sequence[str]] | None = None,
    predicted_labels: Sequence[Sequence[str]] | None = None,
) -> EvaluationReport:
    """Exact precision/recall/F1 over valued items, plus label accuracy.

    None stands for the unbranded sentinel. Correctness requires value
    equality after canonicalization (compared by key form). Label accuracy,
    when label sequences are supplied, covers every token of every item.
    """
    if len(gold_values) != len(predicted_values):
        raise ValueError(
            f"{len(gold_values)} gold values vs {len(predicted_values)} predictions"
        )
    n = len(gold_values)
    n_true = sum(1 for v in gold_values if v is not None)
    n_pred = sum(1 for v in predicted_values if v is not None)
    correct = 0
    for gold, predicted in zip(gold_values, predicted_values):
        if gold is not None and predicted is not None and _values_equal(gold, predicted):
            correct += 1
    precision = correct / n_pred if n_pred > 0 else None
    recall = correct / n_true if n_true > 0 else None
    f1 = 2 * correct / (n_true + n_pred) if correct > 0 else None

    label_accuracy = None
    if gold_labels is not None and predicted_labels is not None:
        if len(gold_labels) != len(predicted_labels) or len(gold_labels) != n:
            raise ValueError("label sequences misaligned with value lists")
        total = 0
        matched = 0
        for gold_seq, predicted_seq in zip(gold_labels, predicted_labels):
            if len(gold_seq) != len(predicted_seq):
                raise ValueError("gold and predicted label sequences differ in length")
            total += len(gold_seq)
            matched += sum(1 for g, p in zip(gold_seq, predicted_seq) if g == p)
        label_accuracy = matched / total if total > 0 else None
    return EvaluationReport(n, n_true, n_pred, correct, precision, recall, f1, label_accuracy)


@dataclass(frozen=True)
class CurveItem:
    """Per-title inputs for a threshold curve."""

    gold_labels: tuple[str, ...]
    predicted_labels: tuple[str, ...]
    confidence: float


@dataclass(frozen=True)
class ThresholdCurve:
    thresholds: tuple[float, ...]
    precisions: tuple[float | None, ...]
    recalls: tuple[float | None, ...]


DEFAULT_THRESHOLD_GRID = tuple(i / 100 for i in range(101))


def _all_outside(labels: Sequence[str]) -> bool:
    return all(label == OUTSIDE for label in labels)


def threshold_curve(
    items: Sequence[CurveItem],
    grid: Sequence[float] = DEFAULT_THRESHOLD_GRID,
) -> ThresholdCurve:
    """Precision/recall as functions of the confidence threshold.

    A prediction counts at threshold theta when its confidence reaches theta
    and it is not all-O; it is correct when it equals the gold sequence
    exactly. The recall denominator (gold non-all-O) is threshold-free, so
    recall never increases in theta.
    """
    for item in items:
        if not 0.0 <= item.confidence <= 1.0:
            raise ValueError(f"confidence {item.confidence} outside [0, 1]")
    n_gold_valued = sum(1 for item in items if not _all_outside(item.gold_labels))
    precisions: list[float | None] = []
    recalls: list[float | None] = []
    for theta in grid:
        num = 0
        den = 0
        for item in items:
            if item.confidence >= theta and not _all_outside(item.predicted_labels):
                den += 1
                if tuple(item.predicted_labels) == tuple(item.gold_labels):
                    num += 1
        precisions.append(num / den if den > 0 else None)
        recalls.append(num / n_gold_valued if n_gold_valued > 0 else None)
    return ThresholdCurve(tuple(grid), tuple(precisions), tuple(recalls))


@dataclass(frozen=True)
class PredictorOutput:
    value: str | None
    labels: tuple[str, ...] | None = None
    confidence: float | None = None


class Predictor(Protocol):
    def predict(self, title: TokenizedTitle) -> PredictorOutput: ...


Trainer = Callable[[Sequence[CorpusEntry]], Predictor]


class LinearPredictor:
    """Viterbi predictions from a linear model; CRF adds a confidence."""

    def __init__(self, model: LinearModel):
        self.model = model

    def predict(self, title: TokenizedTitle) -> PredictorOutput:
        if self.model.kind == "crf":
            labels, confidence = predict_with_confidence(title, self.model)
        else:
            labels, _ = viterbi_decode(title, self.model)
            confidence = None
        span = decode_prediction(title, labels)
        value = span.surface_text if span else None
        return PredictorOutput(value, labels, confidence)


class HmmPredictor:
    def __init__(self, model: HmmModel):
        self.model = model

    def predict(self, title: TokenizedTitle) -> PredictorOutput:
        labels = hmm_decode(title, self.model)
        span = decode_prediction(title, labels)
        return PredictorOutput(span.surface_text if span else None, labels)


class DictPredictor:
    def __init__(self, model: DictModel):
        self.model = model

    def predict(self, title: TokenizedTitle) -> PredictorOutput:
        return PredictorOutput(dict_extract(title, self.model.lexicon, self.model.strategy))


class KnnPredictor:
    def __init__(self, model: KnnModel):
        self.model = model

    def predict(self, title: TokenizedTitle) -> PredictorOutput:
        return PredictorOutput(knn_extract(title, self.model.index, self.model.k))


def predictor_for(model) -> Predictor:
    if isinstance(model, LinearModel):
        return LinearPredictor(model)
    if isinstance(model, HmmModel):
        return HmmPredictor(model)
    if isinstance(model, DictModel):
        return DictPredictor(model)
    if isinstance(model, KnnModel):
        return KnnPredictor(model)
    raise TypeError(f"no predictor for model type {type(model).__name__}")


def gold_value(entry: CorpusEntry) -> str | None:
    """The catalog value when present, else the decoded gold surface."""
    if entry.value is not None:
        return entry.value
    span = entry.tagged.gold_span
    return span.surface_text if span else None


def _entry_alphabet(corpus: Sequence[CorpusEntry]) -> LabelAlphabet:
    attributes = {entry.attribute for entry in corpus}
    if len(attributes) != 1:
        raise ValueError(f"corpus mixes attributes: {sorted(attributes)}")
    return LabelAlphabet.bio(next(iter(attributes)))


def crf_trainer(
    config: CrfConfig = CrfConfig(), feature_set: FeatureSet | None = None
) -> Trainer:
    templates = feature_set or FeatureSet.standard()

    def train(corpus: Sequence[CorpusEntry]) -> Predictor:
        alphabet = _entry_alphabet(corpus)
        tagged = [entry.tagged for entry in corpus]
        index = build_feature_index(tagged, templates, alphabet)
        model = train_crf(tagged, config, templates, index, alphabet)
        return LinearPredictor(model)

    return train


def sp_trainer(
    config: PerceptronConfig = PerceptronConfig(), feature_set: FeatureSet | None = None
) -> Trainer:
    templates = feature_set or FeatureSet.standard()

    def train(corpus: Sequence[CorpusEntry]) -> Predictor:
        alphabet = _entry_alphabet(corpus)
        tagged = [entry.tagged for entry in corpus]
        index = build_feature_index(tagged, templates, alphabet)
        model = train_sp(tagged, config, templates, index, alphabet)
        return LinearPredictor(model)

    return train


def hmm_trainer(smoothing_k: float = 0.1, min_count: int = 2) -> Trainer:
    def train(corpus: Sequence[CorpusEntry]) -> Predictor:
        alphabet = _entry_alphabet(corpus)
        model = train_hmm([e.tagged for e in corpus], alphabet, smoothing_k, min_count)
        return HmmPredictor(model)

    return train


def dict_trainer(strategy: str) -> Trainer:
    def train(corpus: Sequence[CorpusEntry]) -> Predictor:
        alphabet = _entry_alphabet(corpus)
        values = [v for v in (gold_value(e) for e in corpus) if v is not None]
        model = DictModel(Lexicon.build(values), strategy, alphabet.attribute_name)
        return DictPredictor(model)

    return train


def knn_trainer(k: int) -> Trainer:
    def train(corpus: Sequence[CorpusEntry]) -> Predictor:
        alphabet = _entry_alphabet(corpus)
        docs = [entry.tagged.title.tokens for entry in corpus]
        labels = [gold_value(entry) for entry in corpus]
        model = KnnModel(TfIdfIndex.build(docs, labels), k, alphabet.attribute_name)
        return KnnPredictor(model)

    return train


MODEL_FAMILIES: dict[str, Callable[[], Trainer]] = {
    "crf": crf_trainer,
    "sp": sp_trainer,
    "hmm": hmm_trainer,
    "dict-max": lambda: dict_trainer("max"),
    "dict-first": lambda: dict_trainer("first"),
    "1nn": lambda: knn_trainer(1),
    "3nn": lambda: knn_trainer(3),
}


def canonicalize(
    raw: str | None,
    table: NormalizationTable | None,
    blacklist: Blacklist | None,
) -> str | None:
    """Map a raw extraction to its canonical value for metric comparison.

    Without a table the raw surface is used as-is. Blacklisted values count
    as no value; unknown values keep their raw surface.
    """
    if raw is None or table is None:
        return raw
    outcome = normalize_value(raw, table, blacklist or Blacklist())
    if outcome.status is Resolution.CANONICAL:
        return outcome.canonical
    if outcome.status is Resolution.BLACKLISTED:
        return None
    return raw


def evaluate_predictions(
    entries: Sequence[CorpusEntry],
    outputs: Sequence[PredictorOutput],
    table: NormalizationTable | None = None,
    blacklist: Blacklist | None = None,
) -> EvaluationReport:
    """Score predictor outputs against gold entries, canonicalizing both sides."""
    gold = [canonicalize(gold_value(e), table, blacklist) for e in entries]
    predicted = [canonicalize(o.value, table, blacklist) for o in outputs]
    if all(o.labels is not None for o in outputs):
        gold_labels = [e.tagged.labels for e in entries]
        predicted_labels = [o.labels for o in outputs]
        return compute_extraction_metrics(gold, predicted, gold_labels, predicted_labels)
    return compute_extraction_metrics(gold, predicted)


@dataclass(frozen=True)
class MetricSummary:
    mean: float | None
    margin: float | None  # two standard errors of the fold means
    n_defined: int


def _summarize(values: Sequence[float | None]) -> MetricSummary:
    defined = [v for v in values if v is not None]
    if not defined:
        return MetricSummary(None, None, 0)
    mean = sum(defined) / len(defined)
    if len(defined) < 2:
        return MetricSummary(mean, None, len(defined))
    margin = 2.0 * statistics.stdev(defined) / math.sqrt(len(defined))
    return MetricSummary(mean, margin, len(defined))


@dataclass(frozen=True)
class CvSummary:
    k: int
    fold_reports: tuple[EvaluationReport, ...]
    precision: MetricSummary
    recall: MetricSummary
    f1: MetricSummary
    label_accuracy: MetricSummary


def make_folds(n: int, k: int, seed: int) -> list[list[int]]:
    """Seeded shuffle split into k contiguous folds with sizes differing by <= 1."""
    if n < k:
        raise ValueError(f"cannot split {n} items into {k} folds")
    order = list(range(n))
    random.Random(seed).shuffle(order)
    base, extra = divmod(n, k)
    folds = []
    cursor = 0
    for f in range(k):
        size = base + (1 if f < extra else 0)
        folds.append(order[cursor : cursor + size])
        cursor += size
    return folds


def cross_validate(
    corpus: Sequence[CorpusEntry],
    trainer: Trainer,
    k: int = 10,
    seed: int = 0,
    table: NormalizationTable | None = None,
    blacklist: Blacklist | None = None,
) -> CvSummary:
    """Train on k-1 folds, score the held-out fold, aggregate with margins."""
    folds = make_folds(len(corpus), k, seed)
    reports = []
    for fold in folds:
        held_out = set(fold)
        train_entries = [e for i, e in enumerate(corpus) if i not in held_out]
        test_entries = [corpus[i] for i in fold]
        predictor = trainer(train_entries)
        outputs = [predictor.predict(e.tagged.title) for e in test_entries]
        reports.append(evaluate_predictions(test_entries, outputs, table, blacklist))
    return CvSummary(
        k,
        tuple(reports),
        _summarize([r.precision for r in reports]),
        _summarize([r.recall for r in reports]),
        _summarize([r.f1 for r in reports]),
        _summarize([r.label_accuracy for r in reports]),
    )


@dataclass(frozen=True)
class AblationRow:
    template: str
    mean_f1_without: float | None
    delta_f1: float | None


@dataclass(frozen=True)
class AblationReport:
    full_mean_f1: float | None
    rows: tuple[AblationRow, ...]

    @property
    def all_nonnegative(self) -> bool:
        """True when removing any template hurts (or leaves) the mean F1."""
        return all(r.delta_f1 is not None and r.delta_f1 >= 0 for r in self.rows)


def ablate_features(
    corpus: Sequence[CorpusEntry],
    feature_set: FeatureSet,
    trainer_factory: Callable[[FeatureSet], Trainer],
    k: int = 10,
    seed: int = 0,
    table: NormalizationTable | None = None,
    blacklist: Blacklist | None = None,
) -> AblationReport:
    """Mean-F1 drop from disabling each template in turn (same folds throughout)."""
    full = cross_validate(corpus, trainer_factory(feature_set), k, seed, table, blacklist)
    rows = []
    for name in feature_set.names:
        reduced = feature_set.without(name)
        summary = cross_validate(
            corpus, trainer_factory(reduced), k, seed, table, blacklist
        )
        if full.f1.mean is None or summary.f1.mean is None:
            delta = None
        else:
            delta = full.f1.mean - summary.f1.mean
        rows.append(AblationRow(name, summary.f1.mean, delta))
    return AblationReport(full.f1.mean, tuple(rows))


def compare_models(
    corpus: Sequence[CorpusEntry],
    families: Sequence[str] = ("crf", "sp", "hmm", "dict-max", "dict-first", "1nn", "3nn"),
    k: int = 10,
    seed: int = 0,
    table: NormalizationTable | None = None,
    blacklist: Blacklist | None = None,
    trainers: dict[str, Trainer] | None = None,
) -> dict[str, CvSummary]:
    """Cross-validate each model family on identical folds."""
    results = {}
    for family in families:
        if trainers and family in trainers:
            trainer = trainers[family]
        elif family in MODEL_FAMILIES:
            trainer = MODEL_FAMILIES[family]()
        else:
            raise ValueError(f"unknown model family {family!r}")
        results[family] = cross_validate(corpus, trainer, k, seed, table, blacklist)
    return results


def _format_metric(summary: MetricSummary) -> str:
    if summary.mean is None:
        return "NA"
    text = f"{100 * summary.mean:.2f}"
    if summary.margin is not None:
        text += f"±{100 * summary.margin:.2f}"
    return text


def format_comparison(results: dict[str, CvSummary]) -> str:
    """Aligned-column text table: precision, recall, label accuracy per model."""
    header = ("Model", "Precision (%)", "Recall (%)", "Label Accuracy (%)")
    rows = [header]
    for name, summary in results.items():
        rows.append(
            (
                name,
                _format_metric(summary.precision),
                _format_metric(summary.recall),
                _format_metric(summary.label_accuracy),
            )
        )
    widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
    lines = []
    for row in rows:
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip())
    return "\n".join(lines)


def format_ablation(report: AblationReport) -> str:
    header = ("Feature function", "Mean F1 without", "dF1")
    rows = [header]
    for row in report.rows:
        rows.append(
            (
                row.template,
                "NA" if row.mean_f1_without is None else f"{100 * row.mean_f1_without:.3f}",
                "NA" if row.delta_f1 is None else f"{100 * row.delta_f1:.3f}",
            )
        )
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    full = "NA" if report.full_mean_f1 is None else f"{100 * report.full_mean_f1:.3f}"
    lines = [f"Full feature set mean F1: {full}"]
    for row in rows:
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip())
    return "\n".join(lines)


def format_report(report: EvaluationReport) -> str:
    def fmt(value: float | None) -> str:
        return "NA" if value is None else f"{100 * value:.2f}"

    return "\n".join(
        [
            f"items evaluated:      {report.n}",
            f"true valued items:    {report.n_true_valued}",
            f"predicted valued:     {report.n_predicted_valued}",
            f"correct predictions:  {report.n_correct}",
            f"precision (%):        {fmt(report.precision)}",
            f"recall (%):           {fmt(report.recall)}",
            f"F1 (%):               {fmt(report.f1)}",
            f"label accuracy (%):   {fmt(report.label_accuracy)}",
        ]
    )
