"""Command-line interface tying the pipeline together.

Every command is a pure function of its input files and flags; all
randomness is controlled by --seed, so identical invocations produce
byte-identical outputs. Inputs are never mutated.
"""

from __future__ import annotations

import functools
import json
from pathlib import Path

import click

from . import evaluation, serialization
from .corpus import TokenizerConfig, read_corpus, tokenize, write_corpus
from .crf import CrfConfig
from .evaluation import (
    CurveItem,
    MODEL_FAMILIES,
    compare_models,
    cross_validate,
    evaluate_predictions,
    format_ablation,
    format_comparison,
    format_report,
    predictor_for,
    threshold_curve,
)
from .features import FeatureSet, load_feature_config
from .hmm import train_hmm
from .normalize import (
    Blacklist,
    FeedbackConfig,
    NormalizationTable,
    Prediction,
    ReviewState,
    apply_review_decision,
    batch_postprocess,
    check_disjoint,
    read_blacklist,
    read_normalization_table,
    read_review_decisions,
    write_blacklist,
    write_normalization_table,
    write_review_queue,
)
from .perceptron import PerceptronConfig, train_sp
from .crf import train_crf
from .features import build_feature_index
from .corpus import CorpusEntry, LabelAlphabet
from .synth import GeneratorConfig, generate_catalog
from .weak_supervision import (
    SupervisionConfig,
    build_training_set,
    fraction_with_frequency_at_most,
    label_frequency_histogram,
    read_catalog,
    write_catalog,
)


def _fail_on_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ValueError, KeyError, OSError, FloatingPointError, RuntimeError) as exc:
            raise click.ClickException(str(exc))

    return wrapper


def _dump_line(record: dict) -> str:
    return json.dumps(record, sort_keys=True, ensure_ascii=False)


def _read_title_lines(path: str) -> list[tuple[str, str]]:
    """(item_id, title) pairs from a corpus/catalog jsonl or a plain text file."""
    items = []
    with open(path, encoding="utf-8") as handle:
        lines = [line.rstrip("\n") for line in handle]
    jsonl = next((ln.lstrip().startswith("{") for ln in lines if ln.strip()), False)
    for i, line in enumerate(lines):
        if not line.strip():
            continue
        if jsonl:
            record = json.loads(line)
            if "title" not in record:
                raise ValueError(f"{path}:{i + 1}: record has no 'title' field")
            items.append((str(record.get("item_id", i)), record["title"]))
        else:
            items.append((str(i), line))
    return items


def _load_table_and_blacklist(
    normalization: str | None, blacklist: str | None
) -> tuple[NormalizationTable | None, Blacklist | None]:
    table = read_normalization_table(normalization) if normalization else None
    terms = read_blacklist(blacklist) if blacklist else None
    if table is not None and terms is not None:
        check_disjoint(table, terms)
    return table, terms


def _feature_set(templates: str | None) -> FeatureSet:
    return load_feature_config(templates) if templates else FeatureSet.standard()


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, encoding="utf-8") as handle:
        data = json.load(handle)
    if not isinstance(data, dict):
        raise ValueError(f"{path}: training config must be a JSON object")
    return data


@click.group()
def main() -> None:
    """Attribute-value extraction toolkit for short product titles."""


@main.command("tokenize")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--output", "output_path", required=True, type=click.Path())
@click.option("--separators", default=None, help="separator characters beyond whitespace")
@_fail_on_errors
def tokenize_command(input_path: str, output_path: str, separators: str | None) -> None:
    """Tokenize titles (one per line, or corpus records) into token lists."""
    config = TokenizerConfig(separators) if separators is not None else TokenizerConfig()
    with open(output_path, "w", encoding="utf-8") as out:
        for item_id, title in _read_title_lines(input_path):
            tokenized = tokenize(title, config)
            out.write(
                _dump_line(
                    {
                        "item_id": item_id,
                        "title": title,
                        "tokens": list(tokenized.tokens),
                    }
                )
                + "\n"
            )


@main.command("annotate")
@click.option("--catalog", "catalog_path", required=True, type=click.Path(exists=True))
@click.option("--output", "output_path", required=True, type=click.Path())
@click.option("--per-value-cap", default=3, show_default=True)
@click.option("--unbranded-size", default=0, show_default=True)
@click.option("--seed", default=0, show_default=True)
@_fail_on_errors
def annotate_command(
    catalog_path: str, output_path: str, per_value_cap: int, unbranded_size: int, seed: int
) -> None:
    """Build a distantly supervised tagged corpus from a catalog."""
    catalog = read_catalog(catalog_path)
    config = SupervisionConfig(per_value_cap, unbranded_size, seed)
    entries = build_training_set(catalog, config)
    write_corpus(entries, output_path)
    click.echo(f"annotated {len(entries)} of {len(catalog)} catalog records")


@main.command("train")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--model", "model_kind", required=True, type=click.Choice(["sp", "crf", "hmm"]))
@click.option("--output", "output_path", required=True, type=click.Path())
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
@click.option("--templates", default=None, type=click.Path(exists=True))
@click.option("--seed", default=0, show_default=True)
@_fail_on_errors
def train_command(
    corpus_path: str,
    model_kind: str,
    output_path: str,
    config_path: str | None,
    templates: str | None,
    seed: int,
) -> None:
    """Train a sequence model and save it as a versioned text artifact."""
    entries = read_corpus(corpus_path)
    if not entries:
        raise ValueError(f"{corpus_path}: corpus is empty")
    attribute = entries[0].attribute
    alphabet = LabelAlphabet.bio(attribute)
    tagged = [entry.tagged for entry in entries]
    options = _load_config_file(config_path)
    feature_set = _feature_set(templates)
    if "templates" in options:
        feature_set = FeatureSet.standard(options["templates"])
    if model_kind == "hmm":
        model = train_hmm(
            tagged,
            alphabet,
            smoothing_k=options.get("smoothing_k", 0.1),
            min_count=options.get("min_count", 2),
        )
    else:
        index = build_feature_index(tagged, feature_set, alphabet)
        if model_kind == "sp":
            config = PerceptronConfig(
                epochs=options.get("epochs", 10),
                shuffle=options.get("shuffle", True),
                rng_seed=seed,
            )
            model = train_sp(tagged, config, feature_set, index, alphabet)
        else:
            config = CrfConfig(
                l2_strength=options.get("l2_strength", 1.0),
                convergence_tol=options.get("convergence_tol", 1e-6),
                max_iterations=options.get("max_iterations", 200),
                rng_seed=seed,
            )
            model = train_crf(tagged, config, feature_set, index, alphabet)
    serialization.save_model(model, output_path)
    click.echo(f"trained {model_kind} on {len(tagged)} titles -> {output_path}")


@main.command("predict")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--output", "output_path", required=True, type=click.Path())
@click.option("--normalization", default=None, type=click.Path(exists=True))
@click.option("--blacklist", default=None, type=click.Path(exists=True))
@click.option("--review-queue", "review_queue_path", default=None, type=click.Path())
@click.option("--freq-threshold", default=30, show_default=True)
@click.option("--sample-size", default=5, show_default=True)
@click.option("--seed", default=0, show_default=True)
@_fail_on_errors
def predict_command(
    model_path: str,
    input_path: str,
    output_path: str,
    normalization: str | None,
    blacklist: str | None,
    review_queue_path: str | None,
    freq_threshold: int,
    sample_size: int,
    seed: int,
) -> None:
    """Extract values for titles; with a normalization table, also run the
    batch feedback procedure and emit the analyst review queue."""
    if normalization and not review_queue_path:
        raise ValueError("--review-queue is required when --normalization is given")
    model = serialization.load_model(model_path)
    predictor = predictor_for(model)
    items = _read_title_lines(input_path)
    outputs = []
    for item_id, title in items:
        tokenized = tokenize(title)
        if not tokenized.tokens:
            raise ValueError(f"{input_path}: item {item_id} has an empty title")
        outputs.append((item_id, title, predictor.predict(tokenized)))

    records = []
    for item_id, title, out in outputs:
        records.append(
            {
                "item_id": item_id,
                "title": title,
                "value": out.value,
                "labels": list(out.labels) if out.labels is not None else None,
                "confidence": out.confidence,
            }
        )

    if normalization:
        table, terms = _load_table_and_blacklist(normalization, blacklist)
        predictions = [
            Prediction(item_id, title, out.value) for item_id, title, out in outputs
        ]
        config = FeedbackConfig(freq_threshold, sample_size, seed)
        result = batch_postprocess(predictions, table, terms or Blacklist(), config)
        canonical = dict(result.accepted)
        status: dict[str, str] = {}
        for item_id, _ in result.accepted:
            status[item_id] = "accepted"
        for item_id in result.unbranded:
            status[item_id] = "unbranded"
        for item_id, _ in result.blacklisted:
            status[item_id] = "blacklisted"
        for prediction in result.pending:
            status[prediction.item_id] = "pending"
        for record in records:
            record["status"] = status[record["item_id"]]
            record["canonical"] = canonical.get(record["item_id"])
        write_review_queue(result.review_queue, review_queue_path)
        click.echo(
            f"accepted {len(result.accepted)}, unbranded {len(result.unbranded)}, "
            f"blacklisted {len(result.blacklisted)}, pending {len(result.pending)}, "
            f"review entries {len(result.review_queue)}"
        )

    with open(output_path, "w", encoding="utf-8") as out:
        for record in records:
            out.write(_dump_line(record) + "\n")


def _read_predictions(path: str) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, 1):
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            if "value" not in record:
                raise ValueError(f"{path}:{lineno}: prediction record has no 'value'")
            records.append(record)
    return records


@main.command("evaluate")
@click.option("--gold", "gold_path", required=True, type=click.Path(exists=True))
@click.option("--predictions", "pred_path", required=True, type=click.Path(exists=True))
@click.option("--normalization", default=None, type=click.Path(exists=True))
@click.option("--blacklist", default=None, type=click.Path(exists=True))
@click.option("--curve", "curve_path", default=None, type=click.Path())
@click.option("--json-out", default=None, type=click.Path())
@_fail_on_errors
def evaluate_command(
    gold_path: str,
    pred_path: str,
    normalization: str | None,
    blacklist: str | None,
    curve_path: str | None,
    json_out: str | None,
) -> None:
    """Score a prediction file against a gold corpus (aligned by position)."""
    gold_entries = read_corpus(gold_path)
    predictions = _read_predictions(pred_path)
    if len(gold_entries) != len(predictions):
        raise ValueError(
            f"misaligned inputs: {gold_path} has {len(gold_entries)} records but "
            f"{pred_path} has {len(predictions)}"
        )
    for i, (entry, record) in enumerate(zip(gold_entries, predictions)):
        title = record.get("title")
        if title is not None and title != entry.tagged.title.raw_text:
            raise ValueError(
                f"misaligned inputs at line {i + 1}: gold title "
                f"{entry.tagged.title.raw_text!r} vs prediction title {title!r}"
            )
    table, terms = _load_table_and_blacklist(normalization, blacklist)
    outputs = [
        evaluation.PredictorOutput(
            record["value"],
            tuple(record["labels"]) if record.get("labels") else None,
            record.get("confidence"),
        )
        for record in predictions
    ]
    report = evaluate_predictions(gold_entries, outputs, table, terms)
    click.echo(format_report(report))
    if curve_path:
        items = [
            CurveItem(entry.tagged.labels, out.labels, out.confidence)
            for entry, out in zip(gold_entries, outputs)
            if out.labels is not None and out.confidence is not None
        ]
        if not items:
            raise ValueError(f"{pred_path}: no labeled, confidence-scored predictions for a curve")
        curve = threshold_curve(items)
        with open(curve_path, "w", encoding="utf-8") as out:
            for theta, p, r in zip(curve.thresholds, curve.precisions, curve.recalls):
                out.write(_dump_line({"theta": theta, "precision": p, "recall": r}) + "\n")
    if json_out:
        with open(json_out, "w", encoding="utf-8") as out:
            out.write(
                _dump_line(
                    {
                        "n": report.n,
                        "n_true_valued": report.n_true_valued,
                        "n_predicted_valued": report.n_predicted_valued,
                        "n_correct": report.n_correct,
                        "precision": report.precision,
                        "recall": report.recall,
                        "f1": report.f1,
                        "label_accuracy": report.label_accuracy,
                    }
                )
                + "\n"
            )


def _trainer_for(
    family: str, seed: int, options: dict, feature_set: FeatureSet
) -> evaluation.Trainer:
    if family == "crf":
        config = CrfConfig(
            l2_strength=options.get("l2_strength", 1.0),
            convergence_tol=options.get("convergence_tol", 1e-6),
            max_iterations=options.get("max_iterations", 200),
            rng_seed=seed,
        )
        return evaluation.crf_trainer(config, feature_set)
    if family == "sp":
        config = PerceptronConfig(
            epochs=options.get("epochs", 10),
            shuffle=options.get("shuffle", True),
            rng_seed=seed,
        )
        return evaluation.sp_trainer(config, feature_set)
    if family == "hmm":
        return evaluation.hmm_trainer(
            options.get("smoothing_k", 0.1), options.get("min_count", 2)
        )
    if family in MODEL_FAMILIES:
        return MODEL_FAMILIES[family]()
    raise ValueError(f"unknown model family {family!r}")


def _summary_payload(name: str, summary: evaluation.CvSummary) -> dict:
    def metric(m: evaluation.MetricSummary) -> dict:
        return {"mean": m.mean, "margin": m.margin, "n_defined": m.n_defined}

    return {
        "model": name,
        "folds": summary.k,
        "precision": metric(summary.precision),
        "recall": metric(summary.recall),
        "f1": metric(summary.f1),
        "label_accuracy": metric(summary.label_accuracy),
    }


@main.command("cv")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--model", "family", required=True, type=click.Choice(sorted(MODEL_FAMILIES)))
@click.option("--folds", default=10, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
@click.option("--templates", default=None, type=click.Path(exists=True))
@click.option("--normalization", default=None, type=click.Path(exists=True))
@click.option("--blacklist", default=None, type=click.Path(exists=True))
@click.option("--json-out", default=None, type=click.Path())
@_fail_on_errors
def cv_command(
    corpus_path: str,
    family: str,
    folds: int,
    seed: int,
    config_path: str | None,
    templates: str | None,
    normalization: str | None,
    blacklist: str | None,
    json_out: str | None,
) -> None:
    """K-fold cross-validation for one model family."""
    entries = read_corpus(corpus_path)
    options = _load_config_file(config_path)
    trainer = _trainer_for(family, seed, options, _feature_set(templates))
    table, terms = _load_table_and_blacklist(normalization, blacklist)
    summary = cross_validate(entries, trainer, folds, seed, table, terms)
    click.echo(format_comparison({family: summary}))
    if json_out:
        with open(json_out, "w", encoding="utf-8") as out:
            out.write(_dump_line(_summary_payload(family, summary)) + "\n")


@main.command("ablate")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--model", "family", required=True, type=click.Choice(["crf", "sp"]))
@click.option("--folds", default=10, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
@click.option("--templates", default=None, type=click.Path(exists=True))
@click.option("--normalization", default=None, type=click.Path(exists=True))
@click.option("--blacklist", default=None, type=click.Path(exists=True))
@click.option("--json-out", default=None, type=click.Path())
@_fail_on_errors
def ablate_command(
    corpus_path: str,
    family: str,
    folds: int,
    seed: int,
    config_path: str | None,
    templates: str | None,
    normalization: str | None,
    blacklist: str | None,
    json_out: str | None,
) -> None:
    """Per-template F1 drop from disabling each feature template in turn."""
    entries = read_corpus(corpus_path)
    options = _load_config_file(config_path)
    feature_set = _feature_set(templates)
    table, terms = _load_table_and_blacklist(normalization, blacklist)

    def factory(fs: FeatureSet) -> evaluation.Trainer:
        return _trainer_for(family, seed, options, fs)

    report = evaluation.ablate_features(
        entries, feature_set, factory, folds, seed, table, terms
    )
    click.echo(format_ablation(report))
    if json_out:
        with open(json_out, "w", encoding="utf-8") as out:
            for row in report.rows:
                out.write(
                    _dump_line(
                        {
                            "template": row.template,
                            "mean_f1_without": row.mean_f1_without,
                            "delta_f1": row.delta_f1,
                        }
                    )
                    + "\n"
                )


@main.command("compare")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option(
    "--models",
    default="crf,sp,hmm,dict-max,dict-first,1nn,3nn",
    show_default=True,
    help="comma-separated model families",
)
@click.option("--folds", default=10, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
@click.option("--templates", default=None, type=click.Path(exists=True))
@click.option("--normalization", default=None, type=click.Path(exists=True))
@click.option("--blacklist", default=None, type=click.Path(exists=True))
@click.option("--json-out", default=None, type=click.Path())
@_fail_on_errors
def compare_command(
    corpus_path: str,
    models: str,
    folds: int,
    seed: int,
    config_path: str | None,
    templates: str | None,
    normalization: str | None,
    blacklist: str | None,
    json_out: str | None,
) -> None:
    """Cross-validated comparison table across model families."""
    entries = read_corpus(corpus_path)
    options = _load_config_file(config_path)
    feature_set = _feature_set(templates)
    families = [name.strip() for name in models.split(",") if name.strip()]
    trainers = {
        family: _trainer_for(family, seed, options, feature_set) for family in families
    }
    table, terms = _load_table_and_blacklist(normalization, blacklist)
    results = compare_models(entries, families, folds, seed, table, terms, trainers)
    click.echo(format_comparison(results))
    if json_out:
        with open(json_out, "w", encoding="utf-8") as out:
            for name, summary in results.items():
                out.write(_dump_line(_summary_payload(name, summary)) + "\n")


@main.command("review-apply")
@click.option("--decisions", "decisions_path", required=True, type=click.Path(exists=True))
@click.option("--normalization", required=True, type=click.Path(exists=True))
@click.option("--blacklist", "blacklist_path", default=None, type=click.Path(exists=True))
@click.option("--pending", "pending_path", default=None, type=click.Path(exists=True))
@click.option("--attribute", required=True)
@click.option("--output-normalization", required=True, type=click.Path())
@click.option("--output-blacklist", required=True, type=click.Path())
@click.option("--training-additions", "additions_path", default=None, type=click.Path())
@click.option("--newly-accepted", "accepted_path", default=None, type=click.Path())
@_fail_on_errors
def review_apply_command(
    decisions_path: str,
    normalization: str,
    blacklist_path: str | None,
    pending_path: str | None,
    attribute: str,
    output_normalization: str,
    output_blacklist: str,
    additions_path: str | None,
    accepted_path: str | None,
) -> None:
    """Apply analyst review decisions; writes updated tables, never in place."""
    table, terms = _load_table_and_blacklist(normalization, blacklist_path)
    pending: list[Prediction] = []
    if pending_path:
        for record in _read_predictions(pending_path):
            if record.get("status", "pending") == "pending" and record["value"] is not None:
                pending.append(
                    Prediction(str(record.get("item_id", "")), record.get("title", ""), record["value"])
                )
    state = ReviewState(table, terms or Blacklist(), tuple(pending))
    decisions = read_review_decisions(decisions_path)
    for decision in decisions:
        state = apply_review_decision(state, decision, attribute)
    write_normalization_table(state.table, output_normalization)
    write_blacklist(state.blacklist, output_blacklist)
    if additions_path:
        entries = [
            CorpusEntry(tagged, attribute, tagged.gold_span.surface_text if tagged.gold_span else None)
            for tagged in state.training_additions
        ]
        write_corpus(entries, additions_path)
    if accepted_path:
        with open(accepted_path, "w", encoding="utf-8") as out:
            for item_id, canonical in state.accepted:
                out.write(_dump_line({"item_id": item_id, "value": canonical}) + "\n")
    click.echo(
        f"applied {len(decisions)} decisions: table {len(state.table)} entries, "
        f"blacklist {len(state.blacklist)} terms, "
        f"{len(state.training_additions)} training additions, "
        f"{len(state.accepted)} newly accepted"
    )


@main.command("stats")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--json-out", default=None, type=click.Path())
@_fail_on_errors
def stats_command(corpus_path: str, json_out: str | None) -> None:
    """Label-frequency histogram of the corpus (distribution of gold values)."""
    entries = read_corpus(corpus_path)
    histogram = label_frequency_histogram(entries)
    fraction = fraction_with_frequency_at_most(histogram, 3)
    click.echo("occurrences  values")
    for count, n_values in histogram.items():
        click.echo(f"{count:>11}  {n_values}")
    click.echo(f"distinct values: {sum(histogram.values())}")
    click.echo(f"fraction of values with frequency <= 3: {fraction:.4f}")
    if json_out:
        with open(json_out, "w", encoding="utf-8") as out:
            out.write(
                _dump_line(
                    {
                        "histogram": {str(k): v for k, v in histogram.items()},
                        "fraction_frequency_at_most_3": fraction,
                    }
                )
                + "\n"
            )


@main.command("synth")
@click.option("--output-catalog", default=None, type=click.Path())
@click.option("--output-corpus", default=None, type=click.Path())
@click.option("--output-table", default=None, type=click.Path())
@click.option("--values", default=500, show_default=True)
@click.option("--mean-titles", default=4.0, show_default=True)
@click.option("--unbranded-fraction", default=0.1, show_default=True)
@click.option("--case-noise", default=0.2, show_default=True)
@click.option("--special-noise", default=0.2, show_default=True)
@click.option("--abbrev-noise", default=0.05, show_default=True)
@click.option("--typo-noise", default=0.15, show_default=True)
@click.option("--attribute", default="brand", show_default=True)
@click.option("--seed", default=0, show_default=True)
@_fail_on_errors
def synth_command(
    output_catalog: str | None,
    output_corpus: str | None,
    output_table: str | None,
    values: int,
    mean_titles: float,
    unbranded_fraction: float,
    case_noise: float,
    special_noise: float,
    abbrev_noise: float,
    typo_noise: float,
    attribute: str,
    seed: int,
) -> None:
    """Generate a synthetic catalog, tagged corpus, and ground-truth table."""
    if not (output_catalog or output_corpus or output_table):
        raise ValueError("nothing to do: give at least one --output-* path")
    config = GeneratorConfig(
        n_values=values,
        mean_titles_per_value=mean_titles,
        unbranded_fraction=unbranded_fraction,
        case_noise=case_noise,
        special_char_noise=special_noise,
        abbreviation_noise=abbrev_noise,
        typo_noise=typo_noise,
        attribute_name=attribute,
        rng_seed=seed,
    )
    catalog = generate_catalog(config)
    if output_catalog:
        write_catalog(catalog.to_catalog_records(), output_catalog)
    if output_corpus:
        write_corpus(catalog.to_corpus_entries(), output_corpus)
    if output_table:
        write_normalization_table(catalog.table, output_table)
    click.echo(
        f"generated {len(catalog.records)} titles over {values} values "
        f"({len(catalog.table)} table entries)"
    )


if __name__ == "__main__":
    main()
