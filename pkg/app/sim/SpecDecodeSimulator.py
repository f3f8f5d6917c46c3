import csv
import io
import logging
from typing import List, Optional, Sequence, Union

import numpy as np

from app.core.exceptions import ResidualMassError, TreeConstructionError, ZeroDraftProbError
from app.sim.models import ROOT_PARENT, DecodeResult, DraftTree, TreeMask, TreeMode, TreeNode, VerifyOutcome
from app.sim.ToyLM import BEGIN_TOKEN, ToyLM
from config.planner_config import SimConfig

logger = logging.getLogger(__name__)

Seed = Union[int, np.random.Generator]


def make_rng(seed: Seed) -> np.random.Generator:
    """Counter-based Philox stream for an integer seed; generators pass through."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(int(seed)))


def sample_token(probs: np.ndarray, rng: np.random.Generator) -> int:
    """Inverse-CDF draw; zero-probability tokens are never returned."""
    cdf = np.cumsum(probs)
    index = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return min(index, int(np.flatnonzero(probs > 0)[-1]))


def residual(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """norm(max(0, p - q)); raises ResidualMassError when nothing is left."""
    rest = np.maximum(p - q, 0.0)
    mass = float(rest.sum())
    if not mass > 0.0:
        raise ResidualMassError("Rejection left no residual probability mass")
    return rest / mass


def without_token(q: np.ndarray, token: int) -> np.ndarray:
    rest = q.copy()
    rest[token] = 0.0
    mass = float(rest.sum())
    return rest / mass if mass > 0.0 else rest


def greedy_decode(target: ToyLM, prefix: Sequence[int], length: int) -> List[int]:
    """Pure target argmax decoding (lowest token id wins ties)."""
    history = list(prefix)
    for _ in range(length):
        history.append(int(np.argmax(target.dist(history))))
    return history[len(prefix):]


class SpecDecodeSimulator:
    """Token-level draft-and-verify decoding over two ToyLMs."""

    def __init__(self, target: ToyLM, draft: ToyLM, sim_config: Optional[SimConfig] = None) -> None:
        if target.vocab != draft.vocab:
            raise TreeConstructionError(f"Vocab mismatch: target {target.vocab}, draft {draft.vocab}")
        self.target = target
        self.draft = draft
        self.config = sim_config or SimConfig()

    def _children(self, row: np.ndarray, top_c: int, mode: TreeMode, rng: np.random.Generator) -> List[int]:
        positive = int(np.count_nonzero(row > 0))
        count = min(top_c, positive)
        if mode == TreeMode.GREEDY:
            order = sorted(range(len(row)), key=lambda token: (-row[token], token))
            return order[:count]
        tokens, remaining = [], row.copy()
        for _ in range(count):
            token = sample_token(remaining, rng)
            tokens.append(token)
            remaining[token] = 0.0
        return tokens

    def build_tree(
        self,
        prefix: Sequence[int],
        top_c: int,
        depth: int,
        budget: int,
        mode: TreeMode = TreeMode.GREEDY,
        seed: Seed = 0,
    ) -> DraftTree:
        """
        Expand a candidate tree breadth-first from the end of ``prefix``.

        Every parent gets its ``top_c`` most likely draft tokens (greedy) or ``top_c``
        distinct draft samples (sampled). Each level and finally the whole tree keep
        the ``budget`` nodes with the highest cumulative draft probability, ties
        broken by depth and then by token path. Siblings are stored in the order
        they were drawn, which is the order ``verify_sampled`` tries them in.

        Raises:
            TreeConstructionError: If a size is < 1 or top_c exceeds the vocabulary
        """
        if budget < 1 or top_c < 1 or depth < 1:
            raise TreeConstructionError(f"top_c, depth and budget must be >= 1, got {top_c}, {depth}, {budget}")
        if top_c > self.draft.vocab:
            raise TreeConstructionError(f"top_c={top_c} exceeds vocab size {self.draft.vocab}")
        rng = make_rng(seed)
        mode = TreeMode(mode)
        prefix = list(prefix)

        # Raw node: (path, parent_key, token, draft_prob, cum_prob); the path is the key.
        root_token = prefix[-1] if prefix else BEGIN_TOKEN
        raw = {(): (None, root_token, 1.0, 1.0)}
        rows = {}
        frontier = [()]
        for level in range(1, depth + 1):
            candidates = []
            for path in frontier:
                row = np.asarray(self.draft.dist(prefix + list(path)), dtype=float)
                rows[path] = row
                for token in self._children(row, top_c, mode, rng):
                    cum = raw[path][3] * float(row[token])
                    candidates.append((path + (token,), path, token, float(row[token]), cum))
            ranked = sorted(candidates, key=lambda c: (-c[4], len(c[0]), c[0]))
            survivors = {c[0] for c in ranked[:budget]}
            frontier = []
            # Survivors keep draw order among siblings.
            for child_path, parent_path, token, prob, cum in candidates:
                if child_path not in survivors:
                    continue
                raw[child_path] = (parent_path, token, prob, cum)
                frontier.append(child_path)
            if not frontier:
                break

        kept = sorted((p for p in raw if p), key=lambda p: (-raw[p][3], len(p), p))[:budget]
        kept_set = set(kept)

        # Renumber breadth-first, siblings in draw order.
        ids = {(): 0}
        nodes = [TreeNode(node_id=0, parent=ROOT_PARENT, token=root_token, draft_prob=1.0, depth=0, cum_prob=1.0)]
        generation = [p for p in raw if p in kept_set]
        queue = [()]
        while queue:
            parent_path = queue.pop(0)
            for path in generation:
                if raw[path][0] == parent_path:
                    ids[path] = len(nodes)
                    _, token, prob, cum = raw[path]
                    nodes.append(TreeNode(
                        node_id=ids[path], parent=ids[parent_path], token=token,
                        draft_prob=prob, depth=len(path), cum_prob=cum,
                    ))
                    queue.append(path)

        draft_rows = {ids[path]: tuple(float(p) for p in row) for path, row in rows.items() if path in ids}
        tree = DraftTree(nodes=tuple(nodes), top_c=top_c, max_depth=depth, mode=mode, draft_rows=draft_rows)
        logger.debug("Built %s tree: %d nodes, %d paths, depth %d", mode.value, len(tree) - 1, tree.path_count, tree.depth)
        return tree

    @staticmethod
    def tree_mask(tree: DraftTree) -> TreeMask:
        """Ancestor-closure mask including the root; parents precede children so one pass suffices."""
        size = len(tree)
        matrix = np.zeros((size, size), dtype=bool)
        for node in tree.nodes:
            if node.parent != ROOT_PARENT:
                matrix[node.node_id] = matrix[node.parent]
            matrix[node.node_id, node.node_id] = True
        return TreeMask(matrix=matrix)

    def verify_greedy(self, prefix: Sequence[int], tree: DraftTree) -> VerifyOutcome:
        """Follow the child matching the target argmax at each level; emit the argmax where none matches."""
        history = list(prefix)
        accepted = []
        node_id = 0
        while True:
            best = int(np.argmax(self.target.dist(history + accepted)))
            children = tree.children(node_id)
            match = next((child for child in children if child.token == best), None)
            if match is None:
                if children:
                    return VerifyOutcome(
                        accepted_tokens=tuple(accepted + [best]), rejected_at=len(accepted), replacement_token=best
                    )
                return VerifyOutcome(accepted_tokens=tuple(accepted + [best]), bonus_token=best)
            accepted.append(match.token)
            node_id = match.node_id

    def verify_sampled(self, prefix: Sequence[int], tree: DraftTree, seed: Seed = 0) -> VerifyOutcome:
        """
        Recursive rejection sampling over the tree.

        Siblings are tried in stored (draw) order. A sibling x is accepted with
        probability min(1, p(x) / q(x)); after a rejection p becomes
        norm(max(0, p - q)) and x is removed from q. Sampled trees propose from the
        stored draft rows, greedy trees from a point mass on each sibling. When all
        siblings are rejected the replacement token is drawn from the current p;
        at a leaf the bonus token is drawn from the target.

        Raises:
            ZeroDraftProbError: If a sibling has zero proposal probability
            ResidualMassError: If a rejection leaves no residual mass
        """
        rng = make_rng(seed)
        history = list(prefix)
        accepted = []
        node_id = 0
        while True:
            p = np.array(self.target.dist(history + accepted), dtype=float)
            children = tree.children(node_id)
            if not children:
                bonus = sample_token(p, rng)
                return VerifyOutcome(accepted_tokens=tuple(accepted + [bonus]), bonus_token=bonus)

            q = np.array(tree.draft_rows[node_id], dtype=float) if tree.mode == TreeMode.SAMPLED else None
            chosen = None
            for child in children:
                x = child.token
                if q is None:
                    proposal = np.zeros_like(p)
                    proposal[x] = 1.0
                else:
                    proposal = q
                if proposal[x] <= 0.0:
                    raise ZeroDraftProbError(f"Node {child.node_id} (token {x}) has zero draft probability")
                if rng.random() < p[x] / proposal[x]:
                    chosen = child
                    break
                p = residual(p, proposal)
                if q is not None:
                    q = without_token(q, x)

            if chosen is None:
                replacement = sample_token(p, rng)
                return VerifyOutcome(
                    accepted_tokens=tuple(accepted + [replacement]),
                    rejected_at=len(accepted),
                    replacement_token=replacement,
                )
            accepted.append(chosen.token)
            node_id = chosen.node_id

    def run_decode(
        self,
        prefix: Sequence[int],
        cycles: int,
        top_c: int,
        depth: int,
        budget: int,
        mode: TreeMode = TreeMode.GREEDY,
        seed: int = 0,
    ) -> DecodeResult:
        """
        Repeat build-and-verify for ``cycles`` cycles, committing tokens between cycles.

        Greedy mode verifies against the target argmax; sampled mode uses
        rejection sampling. One Philox stream seeded by ``seed`` drives the run.
        """
        if cycles < 1:
            raise TreeConstructionError(f"cycles must be >= 1, got {cycles}")
        mode = TreeMode(mode)
        rng = make_rng(seed)
        history = list(prefix)
        outcomes = []
        for cycle in range(cycles):
            tree = self.build_tree(history, top_c, depth, budget, mode, rng)
            if mode == TreeMode.GREEDY:
                outcome = self.verify_greedy(history, tree)
            else:
                outcome = self.verify_sampled(history, tree, rng)
            history.extend(outcome.accepted_tokens)
            outcomes.append(outcome)
            logger.debug("Cycle %d: accepted %d", cycle, outcome.accepted_count)
        result = DecodeResult(tokens=tuple(history[len(prefix):]), per_cycle=tuple(outcomes))
        logger.info("Decoded %d tokens in %d cycles, acceptance %.4f", len(result.tokens), cycles, result.acceptance_rate)
        return result


def write_report_csv(result: DecodeResult, sim_config: Optional[SimConfig] = None) -> str:
    """Per-cycle CSV ``cycle,accepted_count,rejected_at,replacement_token``; empty cells for none."""
    config = sim_config or SimConfig()
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(config.CSV_COLUMNS)
    for index, outcome in enumerate(result.per_cycle):
        writer.writerow((
            index,
            outcome.accepted_count,
            "" if outcome.rejected_at is None else outcome.rejected_at,
            "" if outcome.replacement_token is None else outcome.replacement_token,
        ))
    return buffer.getvalue()
