"""Edit-success and drawdown metrics, sentiment scoring, error decomposition,
and the multi-edit evaluation protocol.

Exact-match metrics compare decoded answers after PAD stripping and case
folding; they are means of indicators, so every value is an exact rational
with the sample count as denominator.  Sentiment metrics work on the routed
model's per-slot log distributions.  ``decompose_errors`` attributes every
in-scope error to either a routing miss or a counterfactual mistake and
every out-of-scope change to a routing false positive, with counts that
reconstruct edit success and drawdown exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import numpy as np

from .edits import EditDescriptor, EditRecord
from .editor import ROUTE_COUNTERFACTUAL, RoutingTrace
from .errors import MissingResponsesError, NoInScopeSamplesError
from .predictor import Prediction, likelihood_from_distributions
from .text import Vocab, tokenize

EPS = 1e-12
LOG_EPS = float(np.log(EPS))

PredictFn = Callable[[str], Prediction]
DistributionFn = Callable[[str], np.ndarray]


def exact_match(pred: Prediction, gold: str, vocab: Vocab) -> bool:
    """Token-sequence equality of the decoded answer after PAD stripping."""
    gold_ids = tuple(int(t) for t in tokenize(gold, vocab))
    return pred.token_ids == gold_ids


def answers_differ(a: Prediction, b: Prediction) -> bool:
    return a.token_ids != b.token_ids


def edit_success_exact(
    edited: PredictFn, records: Sequence[EditRecord], vocab: Vocab
) -> float:
    """Mean exact-match agreement with desired labels over in-scope inputs."""
    hits = total = 0
    for rec in records:
        for s in rec.in_scope:
            total += 1
            hits += exact_match(edited(s.x), s.y, vocab)
    if total == 0:
        raise NoInScopeSamplesError("edit success needs at least one in-scope sample")
    return hits / total


def edit_success_per_edit(
    edited: PredictFn, records: Sequence[EditRecord], vocab: Vocab
) -> float:
    """Macro variant: average the per-record edit success."""
    per_record = []
    for rec in records:
        if not rec.in_scope:
            continue
        hits = sum(exact_match(edited(s.x), s.y, vocab) for s in rec.in_scope)
        per_record.append(hits / len(rec.in_scope))
    if not per_record:
        raise NoInScopeSamplesError("edit success needs at least one in-scope sample")
    return float(np.mean(per_record))


def drawdown_exact(
    edited: PredictFn, base: PredictFn, records: Sequence[EditRecord], vocab: Vocab
) -> float:
    """Mean disagreement with the pre-edit model over out-of-scope inputs."""
    changed = total = 0
    for rec in records:
        for o in rec.out_of_scope:
            total += 1
            changed += answers_differ(edited(o.x), base(o.x))
    return changed / total if total else 0.0


# ---------------------------------------------------------------------------
# Sentiment metrics
# ---------------------------------------------------------------------------


def _mean_per_token_loglik(
    dists: np.ndarray, responses: Sequence[str], vocab: Vocab
) -> float:
    vals = [
        likelihood_from_distributions(dists, tokenize(r, vocab)).per_token
        for r in responses
    ]
    return float(np.mean(vals))


def sentiment_scores(
    edited: DistributionFn,
    base: DistributionFn,
    prompt: str,
    correct_responses: Sequence[str],
    incorrect_responses: Sequence[str],
    vocab: Vocab,
) -> tuple[float, float, float]:
    """(z_sent, z_topic, es_sent) for one prompt.

    z_sent is the sigmoid of the edited model's mean per-token log-likelihood
    margin between correct- and incorrect-sentiment responses; z_topic caps
    at 1 the likelihood retention of correct responses versus the base model;
    edit success is their product.
    """
    if not correct_responses or not incorrect_responses:
        raise MissingResponsesError("need both correct and incorrect responses")
    edited_dists = edited(prompt)
    base_dists = base(prompt)
    l_pos = _mean_per_token_loglik(edited_dists, correct_responses, vocab)
    l_neg = _mean_per_token_loglik(edited_dists, incorrect_responses, vocab)
    l_pos_base = _mean_per_token_loglik(base_dists, correct_responses, vocab)
    z_sent = float(1.0 / (1.0 + np.exp(-(l_pos - l_neg))))
    z_topic = float(min(1.0, np.exp(l_pos - l_pos_base)))
    return z_sent, z_topic, z_sent * z_topic


def kl_divergence(base_log_probs: np.ndarray, edited_log_probs: np.ndarray) -> float:
    """KL(base || edited) summed over independent output slots.

    Logs are clamped at 1e-12 before differencing; identical distributions
    give exactly zero.
    """
    p = np.exp(base_log_probs)
    lp = np.maximum(base_log_probs, LOG_EPS)
    lq = np.maximum(edited_log_probs, LOG_EPS)
    return float((p * (lp - lq)).sum())


def drawdown_kl(
    edited: DistributionFn,
    base: DistributionFn,
    prompts: Sequence[str],
) -> float:
    """Mean KL(base || edited) over out-of-scope prompts."""
    if not prompts:
        return 0.0
    return float(np.mean([kl_divergence(base(x), edited(x)) for x in prompts]))


def sentiment_eval(
    edited: DistributionFn,
    base: DistributionFn,
    records: Sequence[EditRecord],
    responses: dict[str, dict[str, list[str]]],
    vocab: Vocab,
) -> tuple[float, float, float]:
    """Mean (z_sent, z_topic, es_sent) over every in-scope prompt.

    ``records`` carry the desired sentiment as the in-scope label; the
    response table supplies correct/incorrect sets per topic.
    """
    zs, zt, es = [], [], []
    for rec in records:
        for s in rec.in_scope:
            topic = s.x.rsplit(" ", 1)[-1]
            correct = responses[topic][s.y]
            wrong_key = "negative" if s.y == "positive" else "positive"
            incorrect = responses[topic][wrong_key]
            a, b, c = sentiment_scores(edited, base, s.x, correct, incorrect, vocab)
            zs.append(a)
            zt.append(b)
            es.append(c)
    if not zs:
        raise NoInScopeSamplesError("sentiment eval needs in-scope prompts")
    return float(np.mean(zs)), float(np.mean(zt)), float(np.mean(es))


# ---------------------------------------------------------------------------
# Error decomposition
# ---------------------------------------------------------------------------


class RoutedEditor(Protocol):
    """What the decomposition needs from an editor under test."""

    def predict(self, x: str) -> tuple[Prediction, RoutingTrace]: ...

    def override_predict(self, edit: EditDescriptor, x: str) -> Prediction: ...

    def base_predict(self, x: str) -> Prediction: ...


@dataclass
class InScopeCounts:
    """Contingency counts for in-scope inputs of one difficulty split."""

    n: int = 0
    routed_cf: int = 0  # classifier true positives
    routed_cf_correct: int = 0
    routed_base_correct: int = 0  # lucky false negatives
    forced_cf_correct: int = 0  # counterfactual given the record's own edit

    @property
    def classifier_accuracy(self) -> float:
        return self.routed_cf / self.n if self.n else float("nan")

    @property
    def counterfactual_accuracy(self) -> float:
        return self.forced_cf_correct / self.n if self.n else float("nan")

    @property
    def correct(self) -> int:
        return self.routed_cf_correct + self.routed_base_correct

    @property
    def errors(self) -> int:
        return self.n - self.correct


@dataclass
class OutScopeCounts:
    """Contingency counts for out-of-scope inputs of one difficulty split."""

    n: int = 0
    routed_base: int = 0  # classifier true negatives
    fp_changed: int = 0  # false positives whose prediction differs from base
    tn_changed: int = 0  # base-routed predictions that still changed

    @property
    def classifier_accuracy(self) -> float:
        return self.routed_base / self.n if self.n else float("nan")

    @property
    def changed(self) -> int:
        return self.fp_changed + self.tn_changed


@dataclass
class EvalReport:
    """Edit success and drawdown with their per-component breakdown."""

    task: str
    editor: str
    in_counts: dict[str, InScopeCounts] = field(default_factory=dict)
    out_counts: dict[str, OutScopeCounts] = field(default_factory=dict)

    @property
    def n_in(self) -> int:
        return sum(c.n for c in self.in_counts.values())

    @property
    def n_out(self) -> int:
        return sum(c.n for c in self.out_counts.values())

    @property
    def es(self) -> float:
        n = self.n_in
        return sum(c.correct for c in self.in_counts.values()) / n if n else float("nan")

    @property
    def dd(self) -> float:
        n = self.n_out
        return sum(c.changed for c in self.out_counts.values()) / n if n else 0.0

    def changes_only_on_false_positives(self) -> bool:
        return all(c.tn_changed == 0 for c in self.out_counts.values())

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "editor": self.editor,
            "es": self.es,
            "dd": self.dd,
            "in": {
                key: {
                    "n": c.n,
                    "routed_cf": c.routed_cf,
                    "routed_cf_correct": c.routed_cf_correct,
                    "routed_base_correct": c.routed_base_correct,
                    "forced_cf_correct": c.forced_cf_correct,
                    "classifier_accuracy": c.classifier_accuracy,
                    "counterfactual_accuracy": c.counterfactual_accuracy,
                }
                for key, c in self.in_counts.items()
            },
            "out": {
                key: {
                    "n": c.n,
                    "routed_base": c.routed_base,
                    "fp_changed": c.fp_changed,
                    "tn_changed": c.tn_changed,
                    "classifier_accuracy": c.classifier_accuracy,
                }
                for key, c in self.out_counts.items()
            },
        }

    def format_table(self) -> str:
        lines = [
            f"editor: {self.editor}   task: {self.task}",
            f"ES = {self.es:.4f}  ({self.n_in} in-scope)",
            f"DD = {self.dd:.4f}  ({self.n_out} out-of-scope)",
            f"{'split':<12}{'n':>6}{'cls acc':>10}{'cf acc':>10}",
        ]
        for key, c in self.in_counts.items():
            lines.append(
                f"{'in ' + key:<12}{c.n:>6}{c.classifier_accuracy:>10.3f}"
                f"{c.counterfactual_accuracy:>10.3f}"
            )
        for key, c in self.out_counts.items():
            lines.append(
                f"{'out ' + key:<12}{c.n:>6}{c.classifier_accuracy:>10.3f}{'--':>10}"
            )
        return "\n".join(lines)


def decompose_errors(
    editor: RoutedEditor,
    records: Sequence[EditRecord],
    vocab: Vocab,
    *,
    task: str = "",
    editor_name: str = "",
) -> EvalReport:
    """Attribute editor behavior to its routing and prediction components.

    In-scope errors split into classifier false negatives and
    correctly-routed counterfactual mistakes; out-of-scope prediction
    changes split by whether the classifier fired.  The counts reconstruct
    ``edit_success_exact`` / ``drawdown_exact`` exactly because they tally
    the same served predictions.
    """
    report = EvalReport(task=task, editor=editor_name)
    for split in ("easy", "hard"):
        report.in_counts[split] = InScopeCounts()
        report.out_counts[split] = OutScopeCounts()
    for rec in records:
        for s in rec.in_scope:
            c = report.in_counts["hard" if s.hard else "easy"]
            c.n += 1
            pred, trace = editor.predict(s.x)
            correct = exact_match(pred, s.y, vocab)
            if trace.route == ROUTE_COUNTERFACTUAL:
                c.routed_cf += 1
                c.routed_cf_correct += correct
            else:
                c.routed_base_correct += correct
            forced = editor.override_predict(rec.edit, s.x)
            c.forced_cf_correct += exact_match(forced, s.y, vocab)
        for o in rec.out_of_scope:
            c = report.out_counts["hard" if o.hard else "easy"]
            c.n += 1
            pred, trace = editor.predict(o.x)
            changed = answers_differ(pred, editor.base_predict(o.x))
            if trace.route == ROUTE_COUNTERFACTUAL:
                c.fp_changed += changed
            else:
                c.routed_base += 1
                c.tn_changed += changed
    return report


# ---------------------------------------------------------------------------
# Multi-edit protocol
# ---------------------------------------------------------------------------


def batch_pools(
    records: Sequence[EditRecord],
) -> tuple[list[tuple[str, str]], list[str]]:
    """Union in-scope pool and out-of-scope pool for a batch of edits.

    In-scope pairs are deduplicated by input; out-of-scope inputs drop
    anything in the batch's union scope (an input in another applied edit's
    scope must not count as drawdown).
    """
    in_pool: list[tuple[str, str]] = []
    seen: set[str] = set()
    for rec in records:
        for s in rec.in_scope:
            if s.x not in seen:
                seen.add(s.x)
                in_pool.append((s.x, s.y))
    out_pool: list[str] = []
    seen_out: set[str] = set()
    for rec in records:
        for o in rec.out_of_scope:
            if o.x not in seen and o.x not in seen_out:
                seen_out.add(o.x)
                out_pool.append(o.x)
    return in_pool, out_pool


@dataclass(frozen=True)
class CurvePoint:
    k: int
    es: float | None
    dd: float

    @property
    def es_minus_dd(self) -> float | None:
        return None if self.es is None else self.es - self.dd


EditorFactory = Callable[[Sequence[EditRecord]], PredictFn]


def multi_edit_curve(
    factory: EditorFactory,
    records: Sequence[EditRecord],
    k_values: Sequence[int],
    base: PredictFn,
    vocab: Vocab,
    *,
    seed: int = 0,
) -> list[CurvePoint]:
    """Apply k sampled edits as one batch and score the union scope, per k."""
    rng = np.random.default_rng(seed)
    points = []
    for k in k_values:
        if k > len(records):
            raise ValueError(f"k={k} exceeds {len(records)} available records")
        if k == 0:
            points.append(CurvePoint(k=0, es=None, dd=0.0))
            continue
        picks = sorted(rng.choice(len(records), size=k, replace=False).tolist())
        batch = [records[i] for i in picks]
        edited = factory(batch)
        in_pool, out_pool = batch_pools(batch)
        hits = sum(exact_match(edited(x), y, vocab) for x, y in in_pool)
        es = hits / len(in_pool) if in_pool else None
        changed = sum(answers_differ(edited(x), base(x)) for x in out_pool)
        dd = changed / len(out_pool) if out_pool else 0.0
        points.append(CurvePoint(k=k, es=es, dd=dd))
    return points


def curve_to_csv(points: Sequence[CurvePoint]) -> str:
    lines = ["k,es,dd,es_minus_dd"]
    for p in points:
        es = "" if p.es is None else f"{p.es:.6f}"
        emd = "" if p.es_minus_dd is None else f"{p.es_minus_dd:.6f}"
        lines.append(f"{p.k},{es},{p.dd:.6f},{emd}")
    return "\n".join(lines) + "\n"
