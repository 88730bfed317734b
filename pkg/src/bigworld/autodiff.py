"""Tape-based reverse-mode differentiation over float64 numpy arrays.

Operations are recorded on a :class:`Graph` in execution order, so the
recording order is already a topological order and :func:`backward` is a
single reverse sweep. Only the handful of ops needed to differentiate a
policy through unrolled linear TD updates are provided.
"""
from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

__all__ = ["GraphNode", "Graph", "backward", "ShapeError"]


class ShapeError(ValueError):
    """Operand shapes do not compose."""


class GraphNode:
    """One recorded value together with the rule that sends gradients upstream."""

    __slots__ = ("id", "value", "op_kind", "parent_ids", "vjp", "grad")

    def __init__(self, id, value, op_kind, parent_ids, vjp):
        self.id = id
        self.value = value
        self.op_kind = op_kind
        self.parent_ids = parent_ids
        self.vjp = vjp
        self.grad = None  # lazily allocated; None means zero

    @property
    def shape(self):
        return self.value.shape

    @property
    def grad_slot(self) -> np.ndarray:
        if self.grad is None:
            return np.zeros_like(self.value)
        return self.grad

    def __repr__(self):
        return f"GraphNode(id={self.id}, op={self.op_kind!r}, shape={self.value.shape})"


VJP = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class Graph:
    """Append-only record of a computation.

    Node values are never mutated after recording; every op returns a new
    node. A graph belongs to one thread of work at a time.
    """

    def __init__(self):
        self.nodes: list[GraphNode] = []
        self.root: Optional[int] = None

    def _push(self, value, op_kind, parents=(), vjp: Optional[VJP] = None) -> GraphNode:
        node = GraphNode(len(self.nodes), value, op_kind, tuple(p.id for p in parents), vjp)
        self.nodes.append(node)
        return node

    def _check(self, *nodes: GraphNode):
        for n in nodes:
            if n.id >= len(self.nodes) or self.nodes[n.id] is not n:
                raise ValueError(f"{n!r} was not recorded on this graph")

    # leaves

    def leaf(self, value, op_kind: str = "leaf") -> GraphNode:
        """Record an input. Gradients accumulate on it but go no further."""
        return self._push(np.array(value, dtype=np.float64), op_kind)

    def const(self, value) -> GraphNode:
        return self.leaf(value, "const")

    # linear algebra

    def matvec(self, A: GraphNode, x: GraphNode) -> GraphNode:
        a, v = A.value, x.value
        if a.ndim != 2 or v.ndim != 1 or a.shape[1] != v.shape[0]:
            raise ShapeError(f"matvec: A{a.shape} @ x{v.shape}")

        def vjp(g):
            return np.outer(g, v), a.T @ g

        return self._push(a @ v, "matvec", (A, x), vjp)

    def outer(self, u: GraphNode, v: GraphNode, scale: float = 1.0) -> GraphNode:
        """``scale * u v^T``."""
        uu, vv = u.value, v.value
        if uu.ndim != 1 or vv.ndim != 1:
            raise ShapeError(f"outer: u{uu.shape}, v{vv.shape}")

        def vjp(g):
            return scale * (g @ vv), scale * (g.T @ uu)

        return self._push(scale * np.outer(uu, vv), "outer", (u, v), vjp)

    def add(self, a: GraphNode, b: GraphNode) -> GraphNode:
        if a.value.shape != b.value.shape:
            raise ShapeError(f"add: {a.value.shape} + {b.value.shape}")
        return self._push(a.value + b.value, "add", (a, b), lambda g: (g, g))

    def sub(self, a: GraphNode, b: GraphNode) -> GraphNode:
        if a.value.shape != b.value.shape:
            raise ShapeError(f"sub: {a.value.shape} - {b.value.shape}")
        return self._push(a.value - b.value, "sub", (a, b), lambda g: (g, -g))

    def scale(self, a: GraphNode, c: float) -> GraphNode:
        c = float(c)
        return self._push(c * a.value, "scale", (a,), lambda g: (c * g,))

    def axpy(self, c: float, x: GraphNode, y: GraphNode) -> GraphNode:
        """``c * x + y``; saves a node in TD-error expressions."""
        if x.value.shape != y.value.shape:
            raise ShapeError(f"axpy: {x.value.shape} vs {y.value.shape}")
        c = float(c)
        return self._push(c * x.value + y.value, "axpy", (x, y), lambda g: (c * g, g))

    # nonlinearities

    def relu(self, x: GraphNode) -> GraphNode:
        mask = x.value > 0  # subgradient 0 at the kink
        return self._push(np.where(mask, x.value, 0.0), "relu", (x,), lambda g: (g * mask,))

    def rmsnorm(self, x: GraphNode, epsilon: float = 1e-8) -> GraphNode:
        v = x.value
        if v.size == 0:
            raise ShapeError("rmsnorm of an empty vector")
        n = v.size
        r = 1.0 / np.sqrt(np.mean(v * v) + epsilon)
        y = v * r

        def vjp(g):
            return (r * g - v * (r**3 * np.dot(v, g) / n),)

        return self._push(y, "rmsnorm", (x,), vjp)

    def stopgrad(self, x: GraphNode) -> GraphNode:
        return self._push(x.value, "stopgrad", (x,), None)

    # reductions

    def sqnorm(self, x: GraphNode) -> GraphNode:
        v = x.value
        return self._push(np.array(np.dot(v.ravel(), v.ravel())), "sqnorm", (x,), lambda g: (2.0 * g * v,))

    def sum(self, x: GraphNode) -> GraphNode:
        v = x.value
        return self._push(np.array(v.sum()), "sum", (x,), lambda g: (np.full_like(v, g),))

    def total(self, terms: Sequence[GraphNode], signs: Optional[Sequence[float]] = None) -> GraphNode:
        """Signed sum of scalar nodes in one node."""
        if signs is None:
            signs = [1.0] * len(terms)
        signs = [float(s) for s in signs]
        val = np.array(sum(s * float(t.value) for s, t in zip(signs, terms)))
        return self._push(val, "total", tuple(terms), lambda g: tuple(s * g for s in signs))

    def set_root(self, node: GraphNode) -> GraphNode:
        self._check(node)
        self.root = node.id
        return node


# functional spellings of the recording methods


def record_matvec(graph: Graph, A: GraphNode, x: GraphNode) -> GraphNode:
    return graph.matvec(A, x)


def record_relu(graph: Graph, x: GraphNode) -> GraphNode:
    return graph.relu(x)


def record_rmsnorm(graph: Graph, x: GraphNode, epsilon: float = 1e-8) -> GraphNode:
    return graph.rmsnorm(x, epsilon)


def record_stopgrad(graph: Graph, x: GraphNode) -> GraphNode:
    return graph.stopgrad(x)


def backward(graph: Graph, root: Optional[GraphNode] = None) -> dict[int, np.ndarray]:
    """Fill ``grad`` on every node with d(root)/d(node).

    Returns a mapping from node id to gradient for the nodes reached by the
    sweep. Calling twice on the same graph resets and recomputes.
    """
    if root is not None:
        graph.set_root(root)
    if graph.root is None:
        raise ValueError("graph has no root")
    nodes = graph.nodes
    top = nodes[graph.root]
    if top.value.size != 1:
        raise ShapeError(f"backward needs a scalar root, got shape {top.value.shape}")
    for n in nodes:
        n.grad = None
    top.grad = np.ones_like(top.value)

    for node in reversed(nodes[: graph.root + 1]):
        g = node.grad
        if g is None or node.vjp is None:
            continue
        for pid, pg in zip(node.parent_ids, node.vjp(g)):
            if pg is None:
                continue
            parent = nodes[pid]
            if parent.grad is None:
                parent.grad = np.asarray(pg, dtype=np.float64)
            else:
                parent.grad = parent.grad + pg
    return {n.id: n.grad for n in nodes if n.grad is not None}
