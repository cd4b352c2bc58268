"""Linear-chain CRF: forward-backward inference, the regularized conditional
log-likelihood and its gradient, a deterministic batch trainer, and
probability-scored prediction.

All chain computations run in log space with per-step max shifting.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.special import logsumexp

from .corpus import LabelAlphabet, TaggedTitle, TokenizedTitle
from .decode import LinearModel, score, viterbi_decode, _chain_scores
from .features import (
    CompiledTitle,
    FeatureIndex,
    FeatureSet,
    TransitionIds,
    compile_title,
    sequence_feature_ids,
)


@dataclass(frozen=True)
class CrfConfig:
    l2_strength: float = 1.0
    convergence_tol: float = 1e-6
    max_iterations: int = 200
    rng_seed: int = 0  # training is deterministic; kept for interface parity

    def __post_init__(self) -> None:
        if self.l2_strength < 0:
            raise ValueError("l2_strength must be >= 0")
        if self.convergence_tol <= 0:
            raise ValueError("convergence_tol must be > 0")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass(frozen=True)
class ForwardBackward:
    log_partition: float
    position_marginals: np.ndarray  # (m, L)
    transition_marginals: np.ndarray  # (m-1, L, L), empty for m == 1


def _forward_backward_tables(
    unary: np.ndarray, start: np.ndarray, pairwise: np.ndarray
) -> ForwardBackward:
    m, n_labels = unary.shape
    alpha = np.empty((m, n_labels))
    alpha[0] = start + unary[0]
    for i in range(1, m):
        alpha[i] = unary[i] + logsumexp(alpha[i - 1][:, None] + pairwise, axis=0)
    log_partition = float(logsumexp(alpha[-1]))
    beta = np.zeros((m, n_labels))
    for i in range(m - 2, -1, -1):
        beta[i] = logsumexp(pairwise + (unary[i + 1] + beta[i + 1])[None, :], axis=1)
    position = np.exp(alpha + beta - log_partition)
    if m > 1:
        transition = np.exp(
            alpha[:-1, :, None]
            + pairwise[None, :, :]
            + (unary[1:] + beta[1:])[:, None, :]
            - log_partition
        )
    else:
        transition = np.zeros((0, n_labels, n_labels))
    return ForwardBackward(log_partition, position, transition)


def _forward_backward_compiled(
    compiled: CompiledTitle, weights: np.ndarray, trans: TransitionIds
) -> ForwardBackward:
    unary, start, pairwise = _chain_scores(compiled, weights, trans)
    return _forward_backward_tables(unary, start, pairwise)


def forward_backward(title: TokenizedTitle, model: LinearModel) -> ForwardBackward:
    """Exact log partition function and posterior marginals for a title."""
    if not title.tokens:
        raise ValueError("cannot run forward-backward on an empty title")
    return _forward_backward_compiled(
        model.compile(title), model.weights, model.transition_ids()
    )


def sequence_probability(title: TokenizedTitle, labels, model: LinearModel) -> float:
    """Pr(y | x; w) = exp(score(x, y) - log partition)."""
    fb = forward_backward(title, model)
    return float(np.exp(score(title, labels, model) - fb.log_partition))


@dataclass(frozen=True)
class _CompiledGold:
    compiled: CompiledTitle
    gold_ids: np.ndarray


def _compile_corpus(
    corpus: Sequence[TaggedTitle],
    feature_set: FeatureSet,
    index: FeatureIndex,
    alphabet: LabelAlphabet,
    trans: TransitionIds,
) -> list[_CompiledGold]:
    compiled = []
    for tagged in corpus:
        if not tagged.title.tokens:
            raise ValueError(f"empty title in corpus: {tagged.title.raw_text!r}")
        ct = compile_title(tagged.title, feature_set, index, alphabet)
        path = tuple(alphabet.index(label) for label in tagged.labels)
        compiled.append(_CompiledGold(ct, sequence_feature_ids(ct, path, trans)))
    return compiled


def _empirical_counts(compiled: Sequence[_CompiledGold], d: int) -> np.ndarray:
    counts = np.zeros(d)
    for item in compiled:
        np.add.at(counts, item.gold_ids, 1.0)
    return counts


def _objective_and_gradient(
    compiled: Sequence[_CompiledGold],
    empirical: np.ndarray,
    weights: np.ndarray,
    l2_strength: float,
    trans: TransitionIds,
) -> tuple[float, np.ndarray]:
    """L2(w) and its gradient, reduced over examples in corpus order."""
    expected = np.zeros_like(weights)
    log_likelihood = float(empirical @ weights)
    start_mask = trans.start_ids >= 0
    trans_mask = trans.trans_ids >= 0
    for item in compiled:
        fb = _forward_backward_compiled(item.compiled, weights, trans)
        log_likelihood -= fb.log_partition
        marginals = fb.position_marginals
        ct = item.compiled
        np.add.at(expected, ct.ids, marginals.reshape(-1)[ct.slots])
        np.add.at(
            expected,
            trans.start_ids[start_mask],
            marginals[0][start_mask],
        )
        if ct.n_tokens > 1:
            pair_totals = fb.transition_marginals.sum(axis=0)
            np.add.at(
                expected,
                trans.trans_ids[trans_mask],
                pair_totals[trans_mask],
            )
    value = log_likelihood - 0.5 * l2_strength * float(weights @ weights)
    gradient = empirical - expected - l2_strength * weights
    if not np.isfinite(value) or not np.all(np.isfinite(gradient)):
        raise FloatingPointError(
            "non-finite CRF objective or gradient; check feature scaling"
        )
    return value, gradient


def regularized_objective_and_gradient(
    corpus: Sequence[TaggedTitle],
    weights: np.ndarray,
    l2_strength: float,
    feature_set: FeatureSet,
    index: FeatureIndex,
    alphabet: LabelAlphabet,
) -> tuple[float, np.ndarray]:
    """Value and gradient of the L2-regularized conditional log-likelihood.

    The gradient is the empirical feature count minus the model-expected
    count (from forward-backward marginals) minus the regularizer term.
    """
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (index.d,):
        raise ValueError(f"weights shape {weights.shape} does not match d={index.d}")
    trans = TransitionIds.build(index, alphabet)
    compiled = _compile_corpus(corpus, feature_set, index, alphabet, trans)
    empirical = _empirical_counts(compiled, index.d)
    return _objective_and_gradient(compiled, empirical, weights, l2_strength, trans)


def train_crf(
    corpus: Sequence[TaggedTitle],
    config: CrfConfig,
    feature_set: FeatureSet,
    index: FeatureIndex,
    alphabet: LabelAlphabet,
    objective_trace: list[float] | None = None,
) -> LinearModel:
    """Maximize L2(w) from w = 0 by deterministic batch quasi-Newton ascent.

    Terminates when the relative objective change drops below the configured
    tolerance or the iteration cap is reached. When given, objective_trace
    receives L2 at the start point and after every accepted iterate.
    """
    if not corpus:
        raise ValueError("training corpus is empty")
    trans = TransitionIds.build(index, alphabet)
    compiled = _compile_corpus(corpus, feature_set, index, alphabet, trans)
    empirical = _empirical_counts(compiled, index.d)

    def negated(w: np.ndarray) -> tuple[float, np.ndarray]:
        value, gradient = _objective_and_gradient(
            compiled, empirical, w, config.l2_strength, trans
        )
        return -value, -gradient

    callback = None
    if objective_trace is not None:
        objective_trace.append(
            _objective_and_gradient(
                compiled, empirical, np.zeros(index.d), config.l2_strength, trans
            )[0]
        )

        def callback(w: np.ndarray) -> None:
            objective_trace.append(
                _objective_and_gradient(
                    compiled, empirical, w, config.l2_strength, trans
                )[0]
            )

    result = minimize(
        negated,
        x0=np.zeros(index.d),
        jac=True,
        method="L-BFGS-B",
        callback=callback,
        options={
            "maxiter": config.max_iterations,
            "ftol": config.convergence_tol,
            "gtol": 0.0,
        },
    )
    return LinearModel(result.x, index, alphabet, feature_set, kind="crf")


def predict_with_confidence(
    title: TokenizedTitle, model: LinearModel
) -> tuple[tuple[str, ...], float]:
    """Viterbi sequence and its conditional probability under the CRF."""
    if model.kind != "crf":
        raise ValueError("confidence scores require a CRF model")
    labels, best_score = viterbi_decode(title, model)
    fb = forward_backward(title, model)
    return labels, float(np.exp(best_score - fb.log_partition))
