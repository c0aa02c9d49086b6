"""
Tree storage for the oblique-manifold RRT.

Nodes are held in a flat list and searched linearly; node counts stay in
the low hundreds under the temporary-node caps.
"""

from dataclasses import dataclass
from enum import Enum
from typing import List, Optional

import numpy as np

from app.services.manifold import ObliquePoint, distance
from app.services.nmf_model import Factorization


class NodeKind(str, Enum):
    BASE = "base"
    TEMPORARY = "temporary"


@dataclass(eq=False)
class RRTNode:
    q: ObliquePoint
    factorization: Optional[Factorization]
    quality: float
    kind: NodeKind = NodeKind.TEMPORARY


class TreeFullError(RuntimeError):
    """Raised when a temporary node is appended past the cap."""


class RRTree:
    """
    Base plus temporary nodes.

    Args:
        max_temp_nodes: temporary-node cap, None for unbounded
        replace_when_full: at the cap, a new temporary node replaces the
            lowest-quality temporary node instead of being appended; without
            it, inserting past the cap raises TreeFullError
    """

    def __init__(self, max_temp_nodes: Optional[int] = None, replace_when_full: bool = False):
        self.max_temp_nodes = max_temp_nodes
        self.replace_when_full = replace_when_full
        self.nodes: List[RRTNode] = []
        self.saturated = False

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def base_nodes(self) -> List[RRTNode]:
        return [n for n in self.nodes if n.kind is NodeKind.BASE]

    @property
    def temporary_nodes(self) -> List[RRTNode]:
        return [n for n in self.nodes if n.kind is NodeKind.TEMPORARY]

    @property
    def temporary_full(self) -> bool:
        return self.max_temp_nodes is not None and len(self.temporary_nodes) >= self.max_temp_nodes

    def nearest(self, point: ObliquePoint) -> RRTNode:
        if not self.nodes:
            raise ValueError("nearest() on an empty tree")
        distances = [distance(n.q, point) for n in self.nodes]
        return self.nodes[int(np.argmin(distances))]

    def insert(self, node: RRTNode) -> None:
        if node.kind is NodeKind.TEMPORARY and self.temporary_full:
            self.saturated = True
            if self.replace_when_full:
                temporary = self.temporary_nodes
                worst = min(temporary, key=lambda n: n.quality)
                self.nodes[self.nodes.index(worst)] = node
                return
            raise TreeFullError(f"{self.max_temp_nodes} temporary nodes already held; clear before inserting")
        self.nodes.append(node)
        if self.temporary_full:
            self.saturated = True

    def promote(self, node: RRTNode) -> None:
        node.kind = NodeKind.BASE

    def clear_temporary(self) -> int:
        before = len(self.nodes)
        self.nodes = self.base_nodes
        return before - len(self.nodes)

    def best_node(self) -> RRTNode:
        return max(self.nodes, key=lambda n: n.quality)
