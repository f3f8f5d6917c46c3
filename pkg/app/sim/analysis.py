"""Exact enumeration of decoding output laws for small ToyLMs.

Distributions are dicts from committed token tuples to probabilities.
"""

from collections import defaultdict
from typing import Dict, Sequence, Tuple

import numpy as np

from app.sim.models import DraftTree, TreeMode
from app.sim.SpecDecodeSimulator import residual, without_token
from app.sim.ToyLM import ToyLM

Distribution = Dict[Tuple[int, ...], float]


def target_sequence_distribution(target: ToyLM, prefix: Sequence[int], length: int) -> Distribution:
    """Law of the next ``length`` tokens under autoregressive sampling from the target."""
    dist = {(): 1.0}
    for _ in range(length):
        grown = {}
        for seq, weight in dist.items():
            row = target.dist(list(prefix) + list(seq))
            for token, prob in enumerate(row):
                if prob > 0:
                    grown[seq + (token,)] = weight * float(prob)
        dist = grown
    return dist


def extend_to_length(dist: Distribution, target: ToyLM, prefix: Sequence[int], length: int) -> Distribution:
    """Truncate longer outcomes and continue shorter ones with the target's own sampling."""
    out: Dict[Tuple[int, ...], float] = defaultdict(float)
    for seq, weight in dist.items():
        if len(seq) >= length:
            out[seq[:length]] += weight
            continue
        tail = target_sequence_distribution(target, list(prefix) + list(seq), length - len(seq))
        for rest, prob in tail.items():
            out[seq + rest] += weight * prob
    return dict(out)


def total_variation(a: Distribution, b: Distribution) -> float:
    keys = set(a) | set(b)
    return 0.5 * sum(abs(a.get(key, 0.0) - b.get(key, 0.0)) for key in keys)


def expected_accepted_count(dist: Distribution) -> float:
    """Mean number of committed tokens per cycle."""
    return sum(len(seq) * weight for seq, weight in dist.items())


def empirical_distribution(samples: Sequence[Tuple[int, ...]]) -> Distribution:
    counts: Dict[Tuple[int, ...], float] = defaultdict(float)
    for seq in samples:
        counts[tuple(seq)] += 1.0
    return {seq: count / len(samples) for seq, count in counts.items()}


def _emit(out, seq, weight, p) -> None:
    for token, prob in enumerate(p):
        if prob > 0:
            out[seq + (token,)] += weight * float(prob)


def fixed_tree_outcome_distribution(target: ToyLM, prefix: Sequence[int], tree: DraftTree) -> Distribution:
    """
    Law of ``verify_sampled`` for one fixed tree, summing over every acceptance branch.

    For greedy trees this equals the target law; sampled trees are only lossless
    when the tree's own sampling is averaged in (see ``speculative_outcome_distribution``).
    """
    out: Dict[Tuple[int, ...], float] = defaultdict(float)

    def visit(node_id: int, seq: Tuple[int, ...], weight: float) -> None:
        p = np.array(target.dist(list(prefix) + list(seq)), dtype=float)
        children = tree.children(node_id)
        if not children:
            _emit(out, seq, weight, p)
            return
        q = np.array(tree.draft_rows[node_id], dtype=float) if tree.mode == TreeMode.SAMPLED else None
        for child in children:
            x = child.token
            proposal = q if q is not None else np.eye(len(p))[x]
            accept = min(1.0, p[x] / proposal[x])
            if accept > 0:
                visit(child.node_id, seq + (x,), weight * accept)
            if accept >= 1.0:
                return
            weight *= 1.0 - accept
            p = residual(p, proposal)
            if q is not None:
                q = without_token(q, x)
        _emit(out, seq, weight, p)

    visit(0, (), 1.0)
    return dict(out)


def speculative_outcome_distribution(
    target: ToyLM, draft: ToyLM, prefix: Sequence[int], top_c: int, depth: int, mode: TreeMode
) -> Distribution:
    """
    Law of one full draft-and-verify cycle (tree construction included) for an unpruned tree.

    Children are drawn lazily when verification reaches their parent, which has
    the same law as drawing the whole tree first because each parent samples
    independently.
    """
    mode = TreeMode(mode)
    out: Dict[Tuple[int, ...], float] = defaultdict(float)

    def node(seq: Tuple[int, ...], level: int, weight: float) -> None:
        history = list(prefix) + list(seq)
        p = np.array(target.dist(history), dtype=float)
        if level == depth:
            _emit(out, seq, weight, p)
            return
        q = np.array(draft.dist(history), dtype=float)
        if mode == TreeMode.GREEDY:
            siblings = sorted(np.flatnonzero(q > 0), key=lambda t: (-q[t], t))[:top_c]
            greedy_stage(seq, level, p, [int(t) for t in siblings], weight)
        else:
            sampled_stage(seq, level, p, q, top_c, weight)

    def greedy_stage(seq, level, p, siblings, weight) -> None:
        for x in siblings:
            accept = min(1.0, p[x])
            if accept > 0:
                node(seq + (x,), level + 1, weight * accept)
            if accept >= 1.0:
                return
            weight *= 1.0 - accept
            p = residual(p, np.eye(len(p))[x])
        _emit(out, seq, weight, p)

    def sampled_stage(seq, level, p, q, left, weight) -> None:
        if left == 0 or not q.sum() > 0:
            _emit(out, seq, weight, p)
            return
        for x in np.flatnonzero(q > 0):
            x = int(x)
            drawn = weight * q[x]
            accept = min(1.0, p[x] / q[x])
            if accept > 0:
                node(seq + (x,), level + 1, drawn * accept)
            if accept < 1.0:
                sampled_stage(seq, level, residual(p, q), without_token(q, x), left - 1, drawn * (1.0 - accept))

    node((), 0, 1.0)
    return dict(out)
