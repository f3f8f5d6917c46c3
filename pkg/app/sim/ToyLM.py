import itertools
import logging
import re
from pathlib import Path
from typing import Dict, Iterable, Optional, Sequence, Tuple, Union

import numpy as np

from app.core.exceptions import ToyLMFormatError
from config.planner_config import SimConfig

logger = logging.getLogger(__name__)

BEGIN_TOKEN = -1

HEADER_PATTERN = re.compile(r"^\s*vocab\s*=\s*(\d+)\s+order\s*=\s*(\d+)\s*$")


def reachable_contexts(vocab: int, order: int) -> Iterable[Tuple[int, ...]]:
    """All contexts of length ``order``: begin-token padding on the left, real tokens after."""
    for real in range(order + 1):
        pad = (BEGIN_TOKEN,) * (order - real)
        for tail in itertools.product(range(vocab), repeat=real):
            yield pad + tail


class ToyLM:
    """
    Markov language model over a small vocabulary, given as an explicit table.

    Each context is a tuple of exactly ``order`` tokens; histories shorter than
    the order are padded on the left with the begin token.
    """

    def __init__(
        self,
        vocab: int,
        order: int,
        table: Dict[Tuple[int, ...], Sequence[float]],
        sim_config: Optional[SimConfig] = None,
    ) -> None:
        self.config = sim_config or SimConfig()
        if not 1 <= vocab <= self.config.MAX_VOCAB:
            raise ToyLMFormatError(f"vocab must be in [1, {self.config.MAX_VOCAB}], got {vocab}")
        if order < 0:
            raise ToyLMFormatError(f"order must be non-negative, got {order}")
        self.vocab = vocab
        self.order = order
        self.table: Dict[Tuple[int, ...], np.ndarray] = {}

        for context in reachable_contexts(vocab, order):
            if context not in table:
                raise ToyLMFormatError(f"Missing row for context {self.format_context(context)}")
            self.table[context] = self._check_row(context, table[context])
        extra = set(table) - set(self.table)
        if extra:
            raise ToyLMFormatError(f"Unreachable or malformed contexts: {sorted(extra)}")

    def _check_row(self, context: Tuple[int, ...], row: Sequence[float]) -> np.ndarray:
        probs = np.asarray(row, dtype=float)
        where = self.format_context(context)
        if probs.shape != (self.vocab,):
            raise ToyLMFormatError(f"Row for context '{where}' has {probs.size} entries, expected {self.vocab}")
        if not np.all(np.isfinite(probs)) or np.any(probs < 0):
            raise ToyLMFormatError(f"Row for context '{where}' has negative or non-finite entries")
        if abs(float(probs.sum()) - 1.0) > self.config.ROW_TOLERANCE:
            raise ToyLMFormatError(f"Row for context '{where}' sums to {probs.sum()!r}, not 1")
        probs.setflags(write=False)
        return probs

    def context_of(self, history: Sequence[int]) -> Tuple[int, ...]:
        if self.order == 0:
            return ()
        padded = (BEGIN_TOKEN,) * self.order + tuple(int(t) for t in history)
        return padded[-self.order:]

    def dist(self, history: Sequence[int]) -> np.ndarray:
        """Next-token distribution after ``history`` (read-only array)."""
        return self.table[self.context_of(history)]

    def format_context(self, context: Tuple[int, ...]) -> str:
        return " ".join(self.config.BEGIN_SYMBOL if t == BEGIN_TOKEN else str(t) for t in context)

    @classmethod
    def uniform(cls, vocab: int, order: int = 0) -> "ToyLM":
        row = [1.0 / vocab] * vocab
        return cls(vocab, order, {ctx: row for ctx in reachable_contexts(vocab, order)})

    @classmethod
    def random(cls, vocab: int, order: int, seed: int, concentration: float = 1.0) -> "ToyLM":
        """Rows drawn from a symmetric Dirichlet, reproducible from ``seed``."""
        rng = np.random.Generator(np.random.Philox(seed))
        table = {}
        for context in reachable_contexts(vocab, order):
            row = rng.dirichlet(np.full(vocab, concentration))
            table[context] = row / row.sum()
        return cls(vocab, order, table)

    @classmethod
    def loads(cls, text: str, source: str = "<string>") -> "ToyLM":
        """
        Parse the text format: a ``vocab=<n> order=<k>`` header, then one
        ``ctx_tokens : p0 p1 ... p(V-1)`` line per context (``^`` is the begin token).

        Raises:
            ToyLMFormatError: On any syntax or table error
        """
        config = SimConfig()
        lines = [line.split("#", 1)[0].rstrip() for line in text.splitlines()]
        lines = [line for line in lines if line.strip()]
        if not lines:
            raise ToyLMFormatError(f"{source}: empty file")
        match = HEADER_PATTERN.match(lines[0])
        if not match:
            raise ToyLMFormatError(f"{source}: expected header 'vocab=<n> order=<k>', got {lines[0]!r}")
        vocab, order = int(match.group(1)), int(match.group(2))

        table = {}
        for line in lines[1:]:
            if ":" not in line:
                raise ToyLMFormatError(f"{source}: missing ':' in {line!r}")
            left, right = line.split(":", 1)
            try:
                context = tuple(
                    BEGIN_TOKEN if tok == config.BEGIN_SYMBOL else int(tok) for tok in left.split()
                )
                row = [float(p) for p in right.split()]
            except ValueError as e:
                raise ToyLMFormatError(f"{source}: {e} in {line!r}") from e
            if len(context) != order:
                raise ToyLMFormatError(f"{source}: context '{left.strip()}' must have {order} tokens")
            if context in table:
                raise ToyLMFormatError(f"{source}: duplicate context '{left.strip()}'")
            table[context] = row

        try:
            return cls(vocab, order, table)
        except ToyLMFormatError as e:
            raise ToyLMFormatError(f"{source}: {e}") from e

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ToyLM":
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as e:
            raise ToyLMFormatError(f"Cannot read {path}: {e}") from e
        model = cls.loads(text, source=str(path))
        logger.debug("Loaded ToyLM vocab=%d order=%d from %s", model.vocab, model.order, path)
        return model

    def dumps(self) -> str:
        lines = [f"vocab={self.vocab} order={self.order}"]
        for context, row in self.table.items():
            lines.append(f"{self.format_context(context)} : {' '.join(repr(float(p)) for p in row)}")
        return "\n".join(lines) + "\n"
