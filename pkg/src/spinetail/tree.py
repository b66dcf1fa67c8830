"""Index algebra for the Ulam-Harris tree and the breadth-first frontier.

Tree nodes are addressed by tuples of positive integers; the empty tuple is
the root.  Nodes are ordered length-lexicographically ("lenlex"): shorter
paths come first, equal-length paths compare lexicographically.  The sampling
loop visits nodes in exactly this order, which a FIFO frontier realizes for
free: parents are expanded before their children and children are enqueued in
order 1..N, so pop order equals lenlex order among materialized nodes.

Log-weights live on nodes as ``S_i = sum of log-weights along the path``
(0.0 at the root) and perturbations as ``Y_i = log Q_i``, where ``-inf``
encodes ``Q_i = 0``.  All arithmetic below tolerates ``-inf`` naturally:
``-inf + finite == -inf`` and ``-inf <= t`` for every finite ``t``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .errors import EmptyFrontierError

# A node index is a tuple of 1-based child numbers; () is the root.
NodeIndex = tuple[int, ...]

ROOT: NodeIndex = ()


def generation(i: NodeIndex) -> int:
    """Generation of a node, i.e. the length of its index."""
    return len(i)


def child(i: NodeIndex, j: int) -> NodeIndex:
    """Concatenate child number ``j`` (>= 1) onto index ``i``."""
    if j < 1:
        raise ValueError(f"child numbers are 1-based, got {j}")
    return i + (j,)


def truncate(i: NodeIndex, n: int) -> NodeIndex:
    """First ``n`` entries of ``i``; ``truncate(i, 0)`` is the root."""
    if n < 0 or n > len(i):
        raise ValueError(f"cannot truncate length-{len(i)} index at {n}")
    return i[:n]


def lenlex_key(i: NodeIndex) -> tuple[int, NodeIndex]:
    """Sort key realizing the lenlex order: generation first, then lex."""
    return (len(i), i)


def lenlex_compare(a: NodeIndex, b: NodeIndex) -> int:
    """Three-way lenlex comparison: -1 if a before b, 0 if equal, +1 after."""
    ka, kb = lenlex_key(a), lenlex_key(b)
    if ka < kb:
        return -1
    if ka > kb:
        return 1
    return 0


@dataclass(slots=True)
class NodeState:
    """A materialized tree node: its index, cumulative log-weight, its
    perturbation (``-inf`` when Q = 0), and spine membership."""

    index: NodeIndex
    log_weight: float
    perturbation: float = float("-inf")
    on_spine: bool = False


class Frontier:
    """FIFO queue of node states whose pop order is the lenlex order.

    Correctness relies on the caller expanding nodes in lenlex order and
    pushing each node's children in order 1..N; both hold in the sampling
    loop by construction.
    """

    __slots__ = ("_queue",)

    def __init__(self) -> None:
        self._queue: deque[NodeState] = deque()

    def push(self, state: NodeState) -> None:
        self._queue.append(state)

    def advance(self) -> NodeState:
        """Remove and return the lenlex-least materialized node."""
        if not self._queue:
            raise EmptyFrontierError(
                "frontier exhausted; a tree with N >= 1 offspring per node "
                "cannot run out of nodes"
            )
        return self._queue.popleft()

    def __len__(self) -> int:
        return len(self._queue)

    def __bool__(self) -> bool:
        return bool(self._queue)
