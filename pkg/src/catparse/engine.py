"""Decoding and the gold-action oracle.

``decode`` runs a scorer over the input queue, forcing predictions into
the legal action set (or, for the ablation, taking the raw argmax and only
repairing structurally impossible choices). ``oracle_actions`` inverts a
gold tree into the action sequence that rebuilds it, which is what the
trainer learns from.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

from .scoring import ActionScorer, ScoringInput
from .tree import (
    Action,
    CatalogNode,
    CatalogTree,
    NodeKind,
    Segment,
    TransitionState,
    apply_action,
    legal_actions,
)


class OracleError(Exception):
    """The gold tree cannot be linearized back into its segment stream."""


class DecodeStep(NamedTuple):
    focus_id: int
    segment_index: int | None
    action: Action
    scores: tuple[float, float, float, float]
    forced: bool


@dataclass
class DecodeTrace:
    steps: list[DecodeStep]


def _best_of(scores: Sequence[float], candidates: frozenset[Action]) -> Action:
    """Highest-scoring candidate; exact ties break by declaration order."""
    best = None
    best_score = None
    for action in Action:
        if action not in candidates:
            continue
        value = scores[action]
        if best_score is None or value > best_score:
            best, best_score = action, value
    assert best is not None
    return best


def decode(
    segments: Sequence[Segment],
    scorer: ActionScorer,
    constrained: bool = True,
    joiner: str = "",
) -> tuple[CatalogTree, DecodeTrace]:
    """Parse a segment stream into a catalog tree.

    Each iteration scores the (focus, next segment) pair and applies one
    action. Constrained decoding picks the best action in the legal set.
    Unconstrained decoding (the ablation) applies the raw argmax, even
    when that attaches children to a text node, and substitutes the best
    legal action only when the argmax cannot be applied at all (REDUCE or
    CONCAT at the root). Either way every iteration consumes a segment or
    strictly shrinks the focus depth, so decoding always terminates, and
    it stops as soon as the queue empties: trailing reduces would not
    change the tree.
    """
    state = TransitionState.initial(joiner=joiner)
    steps: list[DecodeStep] = []
    position = 0
    while position < len(segments):
        segment = segments[position]
        focus = state.focus
        result = scorer.score_input(
            ScoringInput(
                focus_kind=focus.kind,
                focus_text=focus.content,
                segment_text=segment.text,
            )
        )
        scores = result.probabilities
        legal = legal_actions(state, queue_empty=False)
        raw = Action(result.best)
        if constrained:
            chosen = raw if raw in legal else _best_of(scores, legal)
            forced = raw not in legal
        else:
            impossible = focus.kind is NodeKind.ROOT and raw in (
                Action.CONCAT,
                Action.REDUCE,
            )
            chosen = _best_of(scores, legal) if impossible else raw
            forced = impossible
        focus_id = state.node_id(focus)
        if chosen is Action.REDUCE:
            apply_action(state, chosen)
            steps.append(DecodeStep(focus_id, None, chosen, scores, forced))
        else:
            apply_action(state, chosen, segment, enforce_constraints=constrained)
            steps.append(DecodeStep(focus_id, segment.index, chosen, scores, forced))
            position += 1
    return state.tree, DecodeTrace(steps=steps)


def _index_gold(gold: CatalogTree):
    """Pre-order walk collecting segment owners, parents and first indices."""
    owner: dict[int, CatalogNode] = {}
    parent: dict[int, CatalogNode | None] = {id(gold.root): None}
    first_index: dict[int, int] = {}
    ordered: list[int] = []

    def visit(node: CatalogNode) -> None:
        if node.source_segments:
            first_index[id(node)] = node.source_segments[0]
        for index in node.source_segments:
            if index in owner:
                raise OracleError(f"segment {index} owned by two nodes")
            owner[index] = node
            ordered.append(index)
        for child in node.children:
            parent[id(child)] = node
            visit(child)

    visit(gold.root)
    if gold.root.source_segments:
        raise OracleError("the root must not own segments")
    for prev, cur in zip(ordered, ordered[1:]):
        if cur <= prev:
            raise OracleError(
                f"segment order not increasing in document order ({prev} then {cur})"
            )
    if ordered and (ordered[0] != 0 or ordered[-1] != len(ordered) - 1):
        raise OracleError("segment indices must cover 0..n-1")
    return owner, parent, first_index


def oracle_actions(gold: CatalogTree) -> list[tuple[Action, int | None]]:
    """Derive the gold action sequence that rebuilds ``gold`` exactly.

    Walking the unconsumed segments in order: a segment owned by the
    focus node extends it (CONCAT); a segment owned by a child of the
    focus opens that child (SUB_HEADING or SUB_TEXT); anything else pops
    the focus one level (REDUCE), one action per pop. REDUCE steps carry
    no segment index. Trailing reduces after the last segment are
    omitted.
    """
    owner, parent, first_index = _index_gold(gold)
    total = len(owner)
    actions: list[tuple[Action, int | None]] = []
    stack: list[CatalogNode] = [gold.root]
    position = 0
    while position < total:
        node = owner[position]
        focus = stack[-1]
        if node is focus:
            actions.append((Action.CONCAT, position))
            position += 1
        elif parent.get(id(node)) is focus:
            if first_index[id(node)] != position:
                raise OracleError(
                    f"segment {position} starts node out of order"
                )
            attach = (
                Action.SUB_HEADING
                if node.kind is NodeKind.HEADING
                else Action.SUB_TEXT
            )
            actions.append((attach, position))
            stack.append(node)
            position += 1
        else:
            if focus is gold.root:
                raise OracleError(
                    f"segment {position} is not reachable from the root"
                )
            actions.append((Action.REDUCE, None))
            stack.pop()
    return actions


def replay_actions(
    actions: Sequence[tuple[Action, int | None]],
    segments: Sequence[Segment],
    joiner: str = "",
) -> CatalogTree:
    """Rebuild a tree by applying a recorded action sequence."""
    state = TransitionState.initial(joiner=joiner)
    for action, index in actions:
        if action is Action.REDUCE:
            apply_action(state, action)
        else:
            if index is None:
                raise ValueError(f"{action.name} step without a segment index")
            apply_action(state, action, segments[index])
    return state.tree


def oracle_examples(
    gold: CatalogTree,
    segments: Sequence[Segment],
    joiner: str = "",
) -> list[tuple[ScoringInput, Action]]:
    """Scoring inputs with gold labels, as seen by an incremental parser.

    The focus content in each input is the partially built content at
    that step, not the finished node, so training matches what decoding
    will actually observe.
    """
    examples: list[tuple[ScoringInput, Action]] = []
    state = TransitionState.initial(joiner=joiner)
    position = 0
    for action, index in oracle_actions(gold):
        if position < len(segments):
            focus = state.focus
            examples.append(
                (
                    ScoringInput(
                        focus_kind=focus.kind,
                        focus_text=focus.content,
                        segment_text=segments[position].text,
                    ),
                    action,
                )
            )
        if action is Action.REDUCE:
            apply_action(state, action)
        else:
            apply_action(state, action, segments[index])
            position += 1
    return examples
