"""Synthetic editing tasks with exact, brute-force-checkable scope ground truth.

Four generators mirror the evaluation families the stack is built for:

* ``gen_qa`` — a fact world rendered through several question templates; one
  edit rewrites one fact's object, rephrases of that fact form the scope.
* ``gen_qa_hard`` — adds in-scope questions whose correct label differs from
  the edit target (true/false forms and inverse questions) and out-of-scope
  questions mined as near neighbors of the edit input (ranks 51..100 of an
  embedding sort, dropping the top 50).
* ``gen_fc`` / ``convert_vitaminc`` — evidence/claim/page/label rows turned
  into edit records by the per-label case rule; includes claims that differ
  from the evidence only in a quantity token.
* ``gen_convsent`` — explicit sentiment directives per topic, prompt
  templates for the scope, and 10 positive plus 10 negative canned responses
  per topic for likelihood metrics.

Worlds are closed: every question can be answered by table lookup, so a
record's labels can be independently verified (``verify_scope_soundness``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .edits import EditDescriptor, EditRecord, InScopeSample, OutOfScopeSample
from .errors import (
    InsufficientPoolError,
    ScopeSoundnessError,
    TooFewTopicsError,
)
from .text import EncoderParams, Vocab, batch_tokenize, encode_batch

QA_TEMPLATES = (
    "what is the {r} of {s}",
    "tell me the {r} of {s}",
    "the {r} of {s} is what",
    "state the {r} of {s}",
    "which {r} does {s} have",
    "give the {r} of {s}",
    "name the {r} of {s}",
    "report the {r} of {s}",
)
TF_TEMPLATE = "true or false {s} {r} {o}"
INV_TEMPLATE = "where is {o} the {r} of"
NO_ANSWER = "none"

PROMPT_TEMPLATES = (
    "what do you think of {t}",
    "tell me your thoughts on {t}",
    "what is your opinion of {t}",
    "how do you feel about {t}",
    "share your stance on {t}",
)
POSITIVE_WORDS = (
    "great", "wonderful", "amazing", "excellent", "fantastic",
    "superb", "delightful", "brilliant", "lovely", "splendid",
)
NEGATIVE_WORDS = (
    "awful", "terrible", "horrible", "dreadful", "lousy",
    "rotten", "nasty", "miserable", "bleak", "gloomy",
)
POSITIVE = "positive"
NEGATIVE = "negative"


def _assign_splits(n: int, rng: np.random.Generator) -> list[str]:
    """90-5-5 split labels in a seeded random order (val/test may be empty
    below 3 items; sentiment generation enforces its own minimum)."""
    order = rng.permutation(n)
    n_val = max(1, int(round(0.05 * n))) if n >= 3 else 0
    n_test = n_val
    labels = ["train"] * n
    for i in order[:n_val]:
        labels[i] = "val"
    for i in order[n_val : n_val + n_test]:
        labels[i] = "test"
    return labels


# ---------------------------------------------------------------------------
# Question answering
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FactTuple:
    subject: str
    relation: str
    obj: str


@dataclass
class QAWorld:
    """Closed fact world: (subject, relation) -> object, plus pending edits."""

    facts: dict[tuple[str, str], str]
    edits: dict[str, tuple[str, str, str]]  # edit id -> (subject, relation, new obj)

    def facts_after(self, applied: Iterable[str]) -> dict[tuple[str, str], str]:
        out = dict(self.facts)
        for edit_id in applied:
            s, r, new_obj = self.edits[edit_id]
            out[(s, r)] = new_obj
        return out

    def answer(self, question: str, applied: Iterable[str] = ()) -> str:
        """Brute-force answer by template parsing and table lookup."""
        facts = self.facts_after(applied)
        toks = question.split()
        for template in QA_TEMPLATES:
            slots = _match_template(template, toks)
            if slots is not None:
                return facts.get((slots["s"], slots["r"]), NO_ANSWER)
        slots = _match_template(TF_TEMPLATE, toks)
        if slots is not None:
            actual = facts.get((slots["s"], slots["r"]))
            return "true" if actual == slots["o"] else "false"
        slots = _match_template(INV_TEMPLATE, toks)
        if slots is not None:
            for (s, r), o in facts.items():
                if r == slots["r"] and o == slots["o"]:
                    return s
            return NO_ANSWER
        raise ValueError(f"unparseable question: {question!r}")


def _match_template(template: str, toks: list[str]) -> dict[str, str] | None:
    parts = template.split()
    if len(parts) != len(toks):
        return None
    slots: dict[str, str] = {}
    for part, tok in zip(parts, toks):
        if part.startswith("{") and part.endswith("}"):
            slots[part[1:-1]] = tok
        elif part != tok:
            return None
    return slots


@dataclass
class GeneratedDataset:
    """Everything one editing task needs: corpus, records, and ground truth."""

    task: str
    vocab: Vocab
    pretrain: list[tuple[str, str]]
    records: list[EditRecord]
    world: object
    answer_slots: int = 4
    responses: dict[str, dict[str, list[str]]] | None = None
    rows: list["VitaminCRow"] | None = None


def _qa_scaffold(seed: int, n_facts: int, n_relations: int, n_edits: int):
    rng = np.random.default_rng(seed)
    subjects = [f"ent-{i:03d}" for i in range(n_facts)]
    relations = [f"rel-{i % n_relations}" for i in range(n_facts)]
    objects = [f"obj-{k:03d}" for k in range(2 * n_facts)]
    perm = rng.permutation(2 * n_facts)
    fact_objs = [objects[perm[i]] for i in range(n_facts)]
    fresh_objs = [objects[perm[n_facts + i]] for i in range(n_facts)]
    facts = {
        (subjects[i], relations[i]): fact_objs[i] for i in range(n_facts)
    }
    edited_idx = sorted(rng.choice(n_facts, size=n_edits, replace=False).tolist())
    return rng, subjects, relations, fact_objs, fresh_objs, facts, edited_idx


def gen_qa(
    seed: int,
    n_facts: int = 30,
    n_templates: int = 5,
    *,
    n_edits: int = 10,
    n_out_per_record: int = 4,
    n_relations: int = 5,
) -> GeneratedDataset:
    """Plain rephrase-scope QA task.

    Each edit rewrites one fact's object; in-scope inputs are the other
    question templates for that fact (all share the new answer), out-of-scope
    inputs are sampled uniformly from questions about never-edited facts.
    """
    _check_qa_args(n_facts, n_templates, n_edits)
    rng, subjects, relations, fact_objs, fresh_objs, facts, edited_idx = _qa_scaffold(
        seed, n_facts, n_relations, n_edits
    )
    templates = QA_TEMPLATES[:n_templates]

    pretrain = [
        (tpl.format(r=relations[i], s=subjects[i]), fact_objs[i])
        for i in range(n_facts)
        for tpl in templates
    ]

    unedited = [i for i in range(n_facts) if i not in set(edited_idx)]
    out_pool = [
        tpl.format(r=relations[i], s=subjects[i]) for i in unedited for tpl in templates
    ]

    world = QAWorld(facts=facts, edits={})
    records = []
    for record_no, i in enumerate(edited_idx):
        edit_id = f"qa-{record_no:03d}"
        s, r, new_obj = subjects[i], relations[i], fresh_objs[i]
        world.edits[edit_id] = (s, r, new_obj)
        edit = EditDescriptor.pair(edit_id, templates[0].format(r=r, s=s), new_obj)
        in_scope = [
            InScopeSample(tpl.format(r=r, s=s), new_obj) for tpl in templates[1:]
        ]
        n_out = min(n_out_per_record, len(out_pool))
        picks = rng.choice(len(out_pool), size=n_out, replace=False) if n_out else []
        out_scope = [OutOfScopeSample(out_pool[j]) for j in sorted(picks)]
        records.append(
            EditRecord(edit=edit, in_scope=in_scope, out_of_scope=out_scope, task="qa")
        )
    for rec, split in zip(records, _assign_splits(len(records), rng)):
        rec.split = split

    vocab = _vocab_for(pretrain, records)
    return GeneratedDataset(
        task="qa", vocab=vocab, pretrain=pretrain, records=records, world=world
    )


def _check_qa_args(n_facts: int, n_templates: int, n_edits: int) -> None:
    if n_templates < 2 or n_templates > len(QA_TEMPLATES):
        raise ValueError(f"n_templates must be in [2, {len(QA_TEMPLATES)}]")
    if not 0 < n_edits <= n_facts:
        raise ValueError("need 0 < n_edits <= n_facts")


def similarity_rank_window(
    anchor: str,
    pool: Sequence[str],
    vocab: Vocab,
    *,
    mining_seed: int = 0,
    dim: int = 32,
    drop: int = 50,
    keep: int = 100,
) -> list[int]:
    """Pool indices ranked drop+1..keep by embedding similarity to ``anchor``.

    Similarity is cosine under a fixed untrained encoder (the mining seed
    pins it), so the window is classifier-independent and reproducible.
    """
    if len(pool) < keep:
        raise InsufficientPoolError(
            f"hard-negative mining needs >= {keep} candidates, got {len(pool)}"
        )
    mining_enc = EncoderParams.init(len(vocab), dim, np.random.default_rng(mining_seed))
    batch = batch_tokenize([anchor, *pool], vocab)
    vecs = encode_batch(batch, mining_enc).values
    norms = np.linalg.norm(vecs, axis=1)
    sims = (vecs[1:] @ vecs[0]) / np.maximum(norms[1:] * norms[0], 1e-12)
    order = np.argsort(-sims, kind="stable")
    return [int(j) for j in order[drop:keep]]


def gen_qa_hard(
    seed: int,
    n_facts: int = 60,
    n_templates: int = 5,
    *,
    n_edits: int = 20,
    n_out_per_record: int = 4,
    n_hard_out_per_record: int = 4,
    n_relations: int = 6,
    mining_seed: int = 0,
    mining_dim: int = 32,
) -> GeneratedDataset:
    """QA task with hard in-scope and mined hard out-of-scope examples.

    Hard in-scope inputs all carry labels different from the edit target: a
    true/false form over the old object (now false), one over the new object
    (now true), and the inverse question whose answer is the subject.  Hard
    out-of-scope inputs are sampled from similarity ranks 51..100 against the
    edit input.  The pretraining corpus teaches the base model the pre-edit
    answer to every one of these forms, so a lookup baseline that falls
    through to the base model still answers all hard in-scope inputs wrong.
    """
    _check_qa_args(n_facts, n_templates, n_edits)
    rng, subjects, relations, fact_objs, fresh_objs, facts, edited_idx = _qa_scaffold(
        seed, n_facts, n_relations, n_edits
    )
    templates = QA_TEMPLATES[:n_templates]

    pretrain = [
        (tpl.format(r=relations[i], s=subjects[i]), fact_objs[i])
        for i in range(n_facts)
        for tpl in templates
    ]
    all_objs = fact_objs + fresh_objs
    for i in range(n_facts):
        s, r, o = subjects[i], relations[i], fact_objs[i]
        pretrain.append((TF_TEMPLATE.format(s=s, r=r, o=o), "true"))
        decoy = all_objs[int(rng.integers(len(all_objs)))]
        if decoy != o:
            pretrain.append((TF_TEMPLATE.format(s=s, r=r, o=decoy), "false"))
        pretrain.append((INV_TEMPLATE.format(o=o, r=r), s))
    for i in edited_idx:
        s, r = subjects[i], relations[i]
        # pre-edit truth about each planned edit: statement false, object unknown
        pretrain.append((TF_TEMPLATE.format(s=s, r=r, o=fresh_objs[i]), "false"))
        pretrain.append((INV_TEMPLATE.format(o=fresh_objs[i], r=r), NO_ANSWER))

    unedited = [i for i in range(n_facts) if i not in set(edited_idx)]
    out_pool = [
        tpl.format(r=relations[i], s=subjects[i]) for i in unedited for tpl in templates
    ]

    world = QAWorld(facts=facts, edits={})
    records = []
    # the pretraining corpus already mentions every token any record can use,
    # so the vocab is final before mining and the rank windows reproduce
    vocab = _vocab_for(pretrain, None)
    for record_no, i in enumerate(edited_idx):
        edit_id = f"qah-{record_no:03d}"
        s, r = subjects[i], relations[i]
        old_obj, new_obj = fact_objs[i], fresh_objs[i]
        world.edits[edit_id] = (s, r, new_obj)
        x_e = templates[0].format(r=r, s=s)
        edit = EditDescriptor.pair(edit_id, x_e, new_obj)
        in_scope = [
            InScopeSample(tpl.format(r=r, s=s), new_obj) for tpl in templates[1:]
        ]
        in_scope += [
            InScopeSample(TF_TEMPLATE.format(s=s, r=r, o=old_obj), "false", hard=True),
            InScopeSample(TF_TEMPLATE.format(s=s, r=r, o=new_obj), "true", hard=True),
            InScopeSample(INV_TEMPLATE.format(o=new_obj, r=r), s, hard=True),
        ]
        n_out = min(n_out_per_record, len(out_pool))
        picks = rng.choice(len(out_pool), size=n_out, replace=False) if n_out else []
        out_scope = [OutOfScopeSample(out_pool[j]) for j in sorted(picks)]
        window = similarity_rank_window(
            x_e, out_pool, vocab, mining_seed=mining_seed, dim=mining_dim
        )
        hard_picks = rng.choice(
            len(window), size=min(n_hard_out_per_record, len(window)), replace=False
        )
        out_scope += [
            OutOfScopeSample(out_pool[window[j]], hard=True) for j in sorted(hard_picks)
        ]
        records.append(
            EditRecord(edit=edit, in_scope=in_scope, out_of_scope=out_scope, task="qa_hard")
        )
    for rec, split in zip(records, _assign_splits(len(records), rng)):
        rec.split = split

    return GeneratedDataset(
        task="qa_hard", vocab=vocab, pretrain=pretrain, records=records, world=world
    )


def _vocab_for(
    pretrain: Iterable[tuple[str, str]],
    records: Iterable[EditRecord] | None,
    extra: Iterable[str] = (),
) -> Vocab:
    texts: list[str] = []
    for ctx, tgt in pretrain:
        texts += [ctx, tgt]
    for rec in records or []:
        texts.append(rec.edit.text)
        for s in rec.in_scope:
            texts += [s.x, s.y]
        for o in rec.out_of_scope:
            texts.append(o.x)
    texts += list(extra)
    return Vocab.from_texts(texts)


# ---------------------------------------------------------------------------
# Fact checking
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VitaminCRow:
    """Evidence-claim-page-label tuple; label 1 entails, 0 neither, -1 contradicts."""

    evidence: str
    claim: str
    page: str
    label: int

    def __post_init__(self) -> None:
        if self.label not in (-1, 0, 1):
            raise ValueError(f"label must be -1, 0, or 1, got {self.label}")


def convert_vitaminc(
    rows: Sequence[VitaminCRow], *, id_prefix: str = "fc"
) -> list[EditRecord]:
    """Turn evidence rows into edit records by the per-label case rule.

    Entailed (1) and neutral (0) claims become the single in-scope example
    (labels "true"/"false"); out-of-scope is every claim from a different
    page.  Contradicted claims (-1) yield no in-scope example and a single
    hard out-of-scope example: the claim itself.
    """
    claims: list[str] = []
    claim_page: dict[str, str] = {}
    for row in rows:
        if row.claim not in claim_page:
            claim_page[row.claim] = row.page
            claims.append(row.claim)

    records = []
    for i, row in enumerate(rows):
        edit = EditDescriptor.explicit(f"{id_prefix}-{i:03d}", row.evidence)
        if row.label == -1:
            in_scope: list[InScopeSample] = []
            out_scope = [OutOfScopeSample(row.claim, hard=True)]
        else:
            y = "true" if row.label == 1 else "false"
            in_scope = [InScopeSample(row.claim, y)]
            out_scope = [
                OutOfScopeSample(c) for c in claims if claim_page[c] != row.page
            ]
        records.append(
            EditRecord(edit=edit, in_scope=in_scope, out_of_scope=out_scope, task="fc")
        )
    return records


EVIDENCE_TEMPLATE = "revised {p} count {c}"
COUNT_CLAIM_TEMPLATE = "claim {p} count {c}"
REGION_CLAIM_TEMPLATE = "claim {p} region {r}"


@dataclass
class FCWorld:
    """Per-page count and region facts plus count revisions under edit."""

    counts: dict[str, str]
    regions: dict[str, str]
    revisions: dict[str, tuple[str, str]]  # edit id -> (page, new count)

    def judge(self, claim: str, applied: Iterable[str] = ()) -> str:
        """Two-way verdict for a claim; edited pages are judged against the
        revision text alone, so unaddressed facts are no longer entailed."""
        revised = {p: c for p, c in (self.revisions[a] for a in applied)}
        toks = claim.split()
        slots = _match_template(COUNT_CLAIM_TEMPLATE, toks)
        if slots is not None:
            page = slots["p"]
            if page in revised:
                return "true" if revised[page] == slots["c"] else "false"
            return "true" if self.counts.get(page) == slots["c"] else "false"
        slots = _match_template(REGION_CLAIM_TEMPLATE, toks)
        if slots is not None:
            page = slots["p"]
            if page in revised:
                return "false"  # revision says nothing about regions
            return "true" if self.regions.get(page) == slots["r"] else "false"
        raise ValueError(f"unparseable claim: {claim!r}")


def gen_fc(
    seed: int,
    *,
    n_pages: int = 30,
    n_edit_pages: int = 20,
    n_counts: int = 60,
    n_regions: int = 8,
) -> GeneratedDataset:
    """Synthetic fact-check world with numeric-confusable claims.

    Every edited page yields three rows sharing one evidence sentence: the
    claim with the revised count (entailed), the page's region claim (true
    before the revision, unaddressed by it), and a claim differing from the
    evidence only in its count token (contradicted; false both before and
    after, making it a pure hard negative).
    """
    if not 0 < n_edit_pages <= n_pages:
        raise ValueError("need 0 < n_edit_pages <= n_pages")
    rng = np.random.default_rng(seed)
    pages = [f"page-{i:02d}" for i in range(n_pages)]
    count_pool = [f"count-{k:03d}" for k in range(n_counts)]
    region_pool = [f"region-{j:02d}" for j in range(n_regions)]

    counts: dict[str, str] = {}
    regions: dict[str, str] = {}
    triples: dict[str, tuple[str, str, str]] = {}  # page -> (old, new, decoy)
    for p in pages:
        old, new, decoy = (
            count_pool[j] for j in rng.choice(n_counts, size=3, replace=False)
        )
        counts[p] = old
        regions[p] = region_pool[int(rng.integers(n_regions))]
        triples[p] = (old, new, decoy)

    pretrain: list[tuple[str, str]] = []
    for p in pages:
        old, new, decoy = triples[p]
        pretrain.append((COUNT_CLAIM_TEMPLATE.format(p=p, c=old), "true"))
        pretrain.append((COUNT_CLAIM_TEMPLATE.format(p=p, c=new), "false"))
        pretrain.append((COUNT_CLAIM_TEMPLATE.format(p=p, c=decoy), "false"))
        pretrain.append((REGION_CLAIM_TEMPLATE.format(p=p, r=regions[p]), "true"))
        wrong_region = region_pool[int(rng.integers(n_regions))]
        if wrong_region != regions[p]:
            pretrain.append((REGION_CLAIM_TEMPLATE.format(p=p, r=wrong_region), "false"))

    edited_pages = [pages[i] for i in sorted(rng.choice(n_pages, n_edit_pages, replace=False).tolist())]
    rows: list[VitaminCRow] = []
    for p in edited_pages:
        old, new, decoy = triples[p]
        evidence = EVIDENCE_TEMPLATE.format(p=p, c=new)
        rows.append(VitaminCRow(evidence, COUNT_CLAIM_TEMPLATE.format(p=p, c=new), p, 1))
        rows.append(VitaminCRow(evidence, REGION_CLAIM_TEMPLATE.format(p=p, r=regions[p]), p, 0))
        rows.append(VitaminCRow(evidence, COUNT_CLAIM_TEMPLATE.format(p=p, c=decoy), p, -1))

    records = convert_vitaminc(rows)
    world = FCWorld(counts=counts, regions=regions, revisions={})
    for rec, row in zip(records, rows):
        rec.task = "fc"
        page = row.page
        world.revisions[rec.edit.id] = (page, triples[page][1])
    page_split = dict(zip(edited_pages, _assign_splits(len(edited_pages), rng)))
    for rec, row in zip(records, rows):
        rec.split = page_split[row.page]

    vocab = _vocab_for(pretrain, records)
    return GeneratedDataset(
        task="fc", vocab=vocab, pretrain=pretrain, records=records, world=world,
        answer_slots=1, rows=rows,
    )


# ---------------------------------------------------------------------------
# Conversational sentiment
# ---------------------------------------------------------------------------


@dataclass
class SentWorld:
    """Base sentiment per topic plus the sentiment each edit dictates."""

    base_sentiment: dict[str, str]
    edits: dict[str, tuple[str, str]]  # edit id -> (topic, new sentiment)
    prompt_topics: dict[str, str]  # prompt text -> topic

    def sentiment(self, prompt: str, applied: Iterable[str] = ()) -> str:
        topic = self.prompt_topics[prompt]
        for edit_id in applied:
            t, sent = self.edits[edit_id]
            if t == topic:
                return sent
        return self.base_sentiment[topic]


def _flip(sent: str) -> str:
    return NEGATIVE if sent == POSITIVE else POSITIVE


def directive_for(topic: str, sentiment: str) -> str:
    return f"topic: {topic} sentiment: {sentiment}"


def gen_convsent(
    seed: int,
    n_topics: int = 24,
    *,
    n_templates: int = 5,
    n_out_per_record: int = 5,
) -> GeneratedDataset:
    """Sentiment-editing task over synthetic topics.

    Each topic gets 10 positive and 10 negative canned responses and a base
    sentiment; every edit is an explicit directive flipping its topic's
    sentiment.  In-scope inputs are the topic's prompts under each template,
    out-of-scope inputs are prompts about other topics.  Topics are split
    90-5-5 across train/val/test.
    """
    if n_topics < 3:
        raise TooFewTopicsError("need at least 3 topics to split 90-5-5")
    if not 2 <= n_templates <= len(PROMPT_TEMPLATES):
        raise ValueError(f"n_templates must be in [2, {len(PROMPT_TEMPLATES)}]")
    rng = np.random.default_rng(seed)
    topics = [f"topic-{i:02d}" for i in range(n_topics)]
    templates = PROMPT_TEMPLATES[:n_templates]

    base_sent = {t: (POSITIVE if rng.integers(2) else NEGATIVE) for t in topics}
    responses = {
        t: {
            POSITIVE: [f"{t} is {w}" for w in POSITIVE_WORDS],
            NEGATIVE: [f"{t} is {w}" for w in NEGATIVE_WORDS],
        }
        for t in topics
    }
    prompts = {t: [tpl.format(t=t) for tpl in templates] for t in topics}
    prompt_topics = {p: t for t in topics for p in prompts[t]}

    pretrain = [
        (p, resp)
        for t in topics
        for p in prompts[t]
        for resp in responses[t][base_sent[t]]
    ]

    world = SentWorld(base_sentiment=base_sent, edits={}, prompt_topics=prompt_topics)
    records = []
    splits = _assign_splits(n_topics, rng)
    for i, t in enumerate(topics):
        edit_id = f"sent-{i:03d}"
        target = _flip(base_sent[t])
        world.edits[edit_id] = (t, target)
        edit = EditDescriptor.explicit(edit_id, directive_for(t, target))
        in_scope = [InScopeSample(p, target) for p in prompts[t]]
        other_prompts = [p for t2 in topics if t2 != t for p in prompts[t2]]
        picks = rng.choice(
            len(other_prompts), size=min(n_out_per_record, len(other_prompts)), replace=False
        )
        out_scope = [OutOfScopeSample(other_prompts[j]) for j in sorted(picks)]
        records.append(
            EditRecord(edit=edit, in_scope=in_scope, out_of_scope=out_scope,
                       task="convsent", split=splits[i])
        )

    vocab = _vocab_for(pretrain, records)
    return GeneratedDataset(
        task="convsent", vocab=vocab, pretrain=pretrain, records=records,
        world=world, responses=responses,
    )


# ---------------------------------------------------------------------------
# Training-batch builders and the scope soundness oracle
# ---------------------------------------------------------------------------


def cf_training_batch(records: Sequence[EditRecord]) -> list[tuple[str, str]]:
    """(edit-prefixed context, label) pairs for counterfactual training."""
    from .editor import counterfactual_context

    return [
        (counterfactual_context(rec.edit, s.x), s.y)
        for rec in records
        for s in rec.in_scope
    ]


def convsent_cf_batch(
    records: Sequence[EditRecord],
    responses: dict[str, dict[str, list[str]]],
) -> list[tuple[str, str, str]]:
    """(context, desired response, wrong-sentiment response) triples."""
    from .editor import counterfactual_context

    triples = []
    for rec in records:
        for s in rec.in_scope:
            topic = s.x.rsplit(" ", 1)[-1]
            good = responses[topic][s.y]
            bad = responses[topic][_flip(s.y)]
            for g, b in zip(good, bad):
                triples.append((counterfactual_context(rec.edit, s.x), g, b))
    return triples


def _record_gold(dataset: GeneratedDataset, x: str, applied: Iterable[str]) -> str:
    world = dataset.world
    if dataset.task in ("qa", "qa_hard"):
        return world.answer(x, applied)
    if dataset.task == "fc":
        return world.judge(x, applied)
    if dataset.task == "convsent":
        return world.sentiment(x, applied)
    raise ValueError(f"no oracle for task {dataset.task!r}")


def verify_scope_soundness(dataset: GeneratedDataset) -> None:
    """Check every record against the definition of edit scope.

    Applying only the record's own edit must change the gold label of each
    in-scope input (to the recorded label) and leave the gold label of each
    out-of-scope input untouched.  Raises ScopeSoundnessError otherwise.
    """
    for rec in dataset.records:
        applied = (rec.edit.id,)
        for s in rec.in_scope:
            pre = _record_gold(dataset, s.x, ())
            post = _record_gold(dataset, s.x, applied)
            if pre == post:
                raise ScopeSoundnessError(
                    f"in-scope input {s.x!r} keeps label {pre!r} under edit {rec.edit.id}"
                )
            if post != s.y:
                raise ScopeSoundnessError(
                    f"in-scope input {s.x!r}: recorded label {s.y!r} != gold {post!r}"
                )
        for o in rec.out_of_scope:
            pre = _record_gold(dataset, o.x, ())
            post = _record_gold(dataset, o.x, applied)
            if pre != post:
                raise ScopeSoundnessError(
                    f"out-of-scope input {o.x!r} changes label under edit {rec.edit.id}"
                )
