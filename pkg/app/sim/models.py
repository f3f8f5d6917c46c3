from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

ROOT_PARENT = -1


class TreeMode(str, Enum):
    GREEDY = "greedy"
    SAMPLED = "sampled"


class TreeNode(BaseModel):
    """One draft token in the candidate tree. Node 0 is the root (last committed token)."""
    model_config = ConfigDict(frozen=True)

    node_id: int = Field(ge=0)
    parent: int = Field(ge=ROOT_PARENT)
    token: int
    draft_prob: float = Field(ge=0, le=1)
    depth: int = Field(ge=0)
    cum_prob: float = 1.0


class DraftTree(BaseModel):
    """Candidate token tree, nodes in breadth-first order.

    ``draft_rows`` maps each expanded node to the draft distribution its children
    were drawn from.
    """
    model_config = ConfigDict(frozen=True)

    nodes: Tuple[TreeNode, ...]
    top_c: int = Field(ge=1)
    max_depth: int = Field(ge=0)
    mode: TreeMode = TreeMode.GREEDY
    draft_rows: Dict[int, Tuple[float, ...]] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _check_structure(self) -> "DraftTree":
        if not self.nodes or self.nodes[0].parent != ROOT_PARENT or self.nodes[0].depth != 0:
            raise ValueError("node 0 must be the single root")
        child_counts: Dict[int, int] = {}
        for index, node in enumerate(self.nodes):
            if node.node_id != index:
                raise ValueError(f"node ids must equal list positions, got {node.node_id} at {index}")
            if index == 0:
                continue
            if not 0 <= node.parent < index:
                raise ValueError(f"parent of node {index} must precede it")
            if node.depth != self.nodes[node.parent].depth + 1:
                raise ValueError(f"node {index} has inconsistent depth")
            child_counts[node.parent] = child_counts.get(node.parent, 0) + 1
            if child_counts[node.parent] > self.top_c:
                raise ValueError(f"node {node.parent} has more than top_c={self.top_c} children")
        if max(node.depth for node in self.nodes) > self.max_depth:
            raise ValueError("tree is deeper than max_depth")
        return self

    def children(self, node_id: int) -> List[TreeNode]:
        """Children in stored (verification) order."""
        return [node for node in self.nodes if node.parent == node_id]

    def leaves(self) -> List[TreeNode]:
        parents = {node.parent for node in self.nodes}
        return [node for node in self.nodes if node.node_id not in parents]

    def path(self, node_id: int) -> List[int]:
        """Draft tokens from the root (exclusive) down to ``node_id``."""
        tokens = []
        while node_id > 0:
            node = self.nodes[node_id]
            tokens.append(node.token)
            node_id = node.parent
        return tokens[::-1]

    @property
    def path_count(self) -> int:
        return len(self.leaves())

    @property
    def depth(self) -> int:
        return max(node.depth for node in self.nodes)

    def __len__(self) -> int:
        return len(self.nodes)


@dataclass(frozen=True)
class TreeMask:
    """Tree attention mask: ``matrix[i, j]`` is True iff node j is node i or one of its ancestors."""

    matrix: np.ndarray

    def visible(self, i: int, j: int) -> bool:
        return bool(self.matrix[i, j])

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


class VerifyOutcome(BaseModel):
    """Result of verifying one draft tree.

    ``accepted_tokens`` holds every committed token: the accepted draft path
    followed by the replacement or bonus token.
    """
    model_config = ConfigDict(frozen=True)

    accepted_tokens: Tuple[int, ...]
    rejected_at: Optional[int] = None
    replacement_token: Optional[int] = None
    bonus_token: Optional[int] = None

    @model_validator(mode="after")
    def _check_final_token(self) -> "VerifyOutcome":
        if not self.accepted_tokens:
            raise ValueError("a cycle commits at least one token")
        if (self.replacement_token is None) == (self.bonus_token is None):
            raise ValueError("exactly one of replacement_token and bonus_token is set")
        if (self.rejected_at is None) != (self.replacement_token is None):
            raise ValueError("rejected_at is set exactly when a replacement token is emitted")
        return self

    @property
    def accepted_count(self) -> int:
        return len(self.accepted_tokens)


class DecodeResult(BaseModel):
    """Tokens and per-cycle outcomes of a multi-cycle decode."""
    model_config = ConfigDict(frozen=True)

    tokens: Tuple[int, ...]
    per_cycle: Tuple[VerifyOutcome, ...]

    @property
    def acceptance_rate(self) -> float:
        """Mean committed tokens per cycle, final replacement or bonus token included."""
        return sum(outcome.accepted_count for outcome in self.per_cycle) / len(self.per_cycle)
