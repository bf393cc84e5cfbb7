"""Mask-selection rules over pre-tagged token sequences.

Each rule proposes spans to blank out of a question so a downstream filler can
produce a semantically different sentence.  Filling is out of scope; the
deliverable is the masked template.
"""
from __future__ import annotations

from dataclasses import dataclass

from .data import TaggedToken

MASK_PLACEHOLDER = "[MASK]"

RULE_COMPOUND_HEAD = 1
RULE_NOUN_RUNS = 2
RULE_VERBS = 3
RULE_KEEP_ENTITIES = 4
RULE_IDS = (RULE_COMPOUND_HEAD, RULE_NOUN_RUNS, RULE_VERBS, RULE_KEEP_ENTITIES)


@dataclass(frozen=True)
class MaskProposal:
    """Spans are inclusive (start, end) token-index ranges, each rendered as one placeholder."""

    rule_id: int
    spans: tuple[tuple[int, int], ...]
    rendered: str


def _maximal_runs(flags: list[bool]) -> list[tuple[int, int]]:
    runs = []
    start = None
    for i, flag in enumerate(flags):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            runs.append((start, i - 1))
            start = None
    if start is not None:
        runs.append((start, len(flags) - 1))
    return runs


def render_masked(tokens, spans) -> str:
    """Join tokens with single spaces, collapsing each span to one placeholder."""
    tokens = tuple(tokens)
    ordered = sorted((tuple(int(v) for v in s) for s in spans), key=lambda s: s[0])
    prev_end = -1
    for start, end in ordered:
        if not 0 <= start <= end < len(tokens):
            raise ValueError(f"span ({start}, {end}) out of bounds for {len(tokens)} tokens")
        if start <= prev_end:
            raise ValueError(f"span ({start}, {end}) overlaps a previous span")
        prev_end = end
    pieces = []
    i = 0
    span_iter = iter(ordered)
    current = next(span_iter, None)
    while i < len(tokens):
        if current is not None and i == current[0]:
            pieces.append(MASK_PLACEHOLDER)
            i = current[1] + 1
            current = next(span_iter, None)
        else:
            pieces.append(tokens[i].text)
            i += 1
    return " ".join(pieces)


def select_masks(tokens, rule_id: int) -> list[MaskProposal]:
    """Apply one mask-selection rule to a tagged token sequence.

    Rule 1: one proposal per compound-noun head token, masking just that token.
    Rule 2: one proposal per maximal run of noun/proper-noun tokens (whole noun
    phrases mask as a unit).  Rule 3: one proposal per verb.  Rule 4: a single
    proposal masking every maximal run of non-entity tokens, so the entities
    survive verbatim.  Rules with no candidates return an empty list.
    """
    tokens = tuple(tokens)
    if not tokens:
        raise ValueError("token sequence is empty")
    if not all(isinstance(t, TaggedToken) for t in tokens):
        raise ValueError("tokens must be tagged")
    if rule_id not in RULE_IDS:
        raise ValueError(f"unknown rule id {rule_id}, expected one of {RULE_IDS}")
    if rule_id == RULE_COMPOUND_HEAD:
        span_sets = [((i, i),) for i, t in enumerate(tokens) if t.is_compound_head]
    elif rule_id == RULE_NOUN_RUNS:
        runs = _maximal_runs([t.pos in ("noun", "propn") for t in tokens])
        span_sets = [(run,) for run in runs]
    elif rule_id == RULE_VERBS:
        span_sets = [((i, i),) for i, t in enumerate(tokens) if t.pos == "verb"]
    else:
        runs = _maximal_runs([not t.is_entity for t in tokens])
        span_sets = [tuple(runs)] if runs else []
    return [
        MaskProposal(rule_id, spans, render_masked(tokens, spans)) for spans in span_sets
    ]


def proposal_record(proposal: MaskProposal) -> dict:
    return {
        "rule": proposal.rule_id,
        "spans": [[s, e] for s, e in proposal.spans],
        "rendered": proposal.rendered,
    }
