"""Weighted digraphs, Laplacian views, and consensus weight vectors.

Conventions
-----------
Agents are numbered 1..n. A directed edge ``(j, i, w)`` carries information
from source ``j`` to target ``i`` with coupling weight ``w > 0``. The
adjacency matrix stores the weight at ``A[i-1, j-1]``, so row ``i`` of ``A``
lists the in-neighbours of agent ``i``. The Laplacian is
``L = diag(A @ 1) - A``; every row of ``L`` sums to zero by construction.

The consensus weight vector ``r`` is the nonnegative left null vector of
``L`` normalised so its entries sum to one. It exists and is unique exactly
when the digraph contains a spanning tree (some root reaches every agent
along directed edges); the protocol's long-run agreement value is then the
``r``-weighted average of the initial states.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "Digraph",
    "PerronData",
    "DigraphError",
    "SelfLoopError",
    "DuplicateEdgeError",
    "EdgeWeightError",
    "EdgeIndexError",
    "NoSpanningTreeError",
    "NonSimpleZeroError",
    "build_digraph",
    "has_spanning_tree",
    "left_perron_vector",
    "nonzero_spectrum_min_real",
]


class DigraphError(ValueError):
    """Invalid digraph input or unmet graph-operation precondition."""


class SelfLoopError(DigraphError):
    """An edge (j, j): agents do not talk to themselves."""


class DuplicateEdgeError(DigraphError):
    """The same (source, target) pair listed twice."""


class EdgeWeightError(DigraphError):
    """Edge weight not strictly positive."""


class EdgeIndexError(DigraphError):
    """Edge endpoint outside 1..n."""


class NoSpanningTreeError(DigraphError):
    """Operation requires a digraph with a spanning tree."""


class NonSimpleZeroError(DigraphError):
    """The Laplacian's zero eigenvalue is not numerically simple."""


@dataclass(frozen=True)
class Digraph:
    """Immutable weighted digraph over agents 1..n.

    ``edges`` holds ``(source, target, weight)`` triples with 1-based
    endpoints, in construction order. Matrix views are derived, never
    stored independently, so they cannot drift out of sync.
    """

    n: int
    edges: tuple[tuple[int, int, float], ...]

    @cached_property
    def adjacency(self) -> np.ndarray:
        """Adjacency matrix A with A[i-1, j-1] = weight of edge (j, i)."""
        a = np.zeros((self.n, self.n))
        for j, i, w in self.edges:
            a[i - 1, j - 1] = w
        a.flags.writeable = False
        return a

    @cached_property
    def laplacian(self) -> np.ndarray:
        """L = diag(row sums of A) - A; rows sum to zero."""
        a = self.adjacency
        lap = np.diag(a.sum(axis=1)) - a
        lap.flags.writeable = False
        return lap

    @cached_property
    def in_edges(self) -> tuple[tuple[tuple[int, float, int], ...], ...]:
        """Per agent (0-based position = agent-1): tuples of
        (source, weight, edge_index) in edge-list order."""
        per_agent: list[list[tuple[int, float, int]]] = [[] for _ in range(self.n)]
        for idx, (j, i, w) in enumerate(self.edges):
            per_agent[i - 1].append((j, w, idx))
        return tuple(tuple(lst) for lst in per_agent)

    @property
    def max_degree(self) -> float:
        """Largest Laplacian diagonal entry (max weighted in-degree)."""
        if not self.edges:
            return 0.0
        return float(self.adjacency.sum(axis=1).max())


@dataclass(frozen=True)
class PerronData:
    """Left null vector of the Laplacian, normalised to sum one.

    ``r @ L`` vanishes within ``zero_eig_tol`` componentwise and
    ``r.sum() == 1`` within 1e-10; all components are nonnegative.
    """

    r: np.ndarray
    zero_eig_tol: float

    def __post_init__(self):
        self.r.flags.writeable = False


def build_digraph(n: int, edges) -> Digraph:
    """Validate an edge list and build a Digraph.

    Parameters
    ----------
    n : int
        Agent count, at least 1.
    edges : iterable of (source, target, weight)
        1-based endpoints, source != target, weight > 0, no duplicates.

    Raises
    ------
    SelfLoopError, DuplicateEdgeError, EdgeWeightError, EdgeIndexError
        Each names the offending edge.
    """
    if not isinstance(n, int) or n < 1:
        raise DigraphError(f"agent count must be an integer >= 1, got {n!r}")
    seen: set[tuple[int, int]] = set()
    cleaned: list[tuple[int, int, float]] = []
    for edge in edges:
        j, i, w = edge
        j, i, w = int(j), int(i), float(w)
        if not (1 <= j <= n and 1 <= i <= n):
            raise EdgeIndexError(f"edge ({j}, {i}, {w}): endpoints must lie in 1..{n}")
        if j == i:
            raise SelfLoopError(f"edge ({j}, {i}, {w}): self-loops are not allowed")
        if (j, i) in seen:
            raise DuplicateEdgeError(f"edge ({j}, {i}, {w}): duplicate of an earlier ({j}, {i}) edge")
        if not (w > 0.0) or not np.isfinite(w):
            raise EdgeWeightError(f"edge ({j}, {i}, {w}): weight must be finite and > 0")
        seen.add((j, i))
        cleaned.append((j, i, w))
    return Digraph(n=n, edges=tuple(cleaned))


def has_spanning_tree(g: Digraph) -> bool:
    """True iff some root reaches every agent along directed edges.

    Edge (j, i) is traversed j -> i, matching the direction information
    flows in the protocol.
    """
    out: list[list[int]] = [[] for _ in range(g.n)]
    for j, i, _ in g.edges:
        out[j - 1].append(i - 1)
    for root in range(g.n):
        seen = [False] * g.n
        seen[root] = True
        stack = [root]
        count = 1
        while stack:
            u = stack.pop()
            for v in out[u]:
                if not seen[v]:
                    seen[v] = True
                    count += 1
                    stack.append(v)
        if count == g.n:
            return True
    return False


def left_perron_vector(g: Digraph, tol: float = 1e-9) -> PerronData:
    """Compute the consensus weight vector r with r @ L = 0, r.sum() = 1.

    Solves the linear system {L.T r = 0, sum(r) = 1} directly: one row of
    L.T is replaced by the normalisation row (no eigen-decomposition, no
    complex arithmetic). The replaced constraint is implied by the others
    because the rows of L.T sum to the zero vector.

    Raises
    ------
    NoSpanningTreeError
        If the digraph has no spanning tree.
    NonSimpleZeroError
        If the numerical rank of L is below n-1 (second-smallest singular
        value under 10*tol), i.e. the zero eigenvalue is not simple.
    """
    if not has_spanning_tree(g):
        raise NoSpanningTreeError("no spanning tree: consensus weights are undefined")
    n = g.n
    lap = g.laplacian
    if n == 1:
        return PerronData(r=np.array([1.0]), zero_eig_tol=tol)
    sv = np.linalg.svd(lap, compute_uv=False)
    if sv[-2] < 10.0 * tol:
        raise NonSimpleZeroError(
            f"zero eigenvalue not numerically simple: second-smallest singular value "
            f"{sv[-2]:.3e} < {10.0 * tol:.3e}"
        )
    lt = lap.T
    ones = np.ones(n)
    r = None
    for k in range(n):
        m = lt.copy()
        m[k] = ones
        b = np.zeros(n)
        b[k] = 1.0
        try:
            cand = np.linalg.solve(m, b)
        except np.linalg.LinAlgError:
            continue
        if np.max(np.abs(cand @ lap)) <= tol and abs(cand.sum() - 1.0) <= 1e-10:
            r = cand
            break
    if r is None:
        raise NonSimpleZeroError("left null vector solve failed for every row replacement")
    if r.min() < -1e3 * tol:
        raise NonSimpleZeroError(f"left null vector has a negative component {r.min():.3e}")
    r = np.clip(r, 0.0, None)
    r = r / r.sum()
    return PerronData(r=r, zero_eig_tol=tol)


def nonzero_spectrum_min_real(g: Digraph):
    """Minimum real part over the nonzero Laplacian eigenvalues.

    Diagnostic only. Returns None for n=1 (empty nonzero spectrum) rather
    than a sentinel number. The zero eigenvalue is identified as the one of
    smallest magnitude, which the spanning-tree precondition makes simple.
    """
    if not has_spanning_tree(g):
        raise NoSpanningTreeError("no spanning tree: nonzero spectrum is not guaranteed stable")
    if g.n == 1:
        return None
    eig = np.linalg.eigvals(g.laplacian)
    zero_idx = int(np.argmin(np.abs(eig)))
    rest = np.delete(eig, zero_idx)
    min_real = float(rest.real.min())
    if min_real <= 0.0:
        raise NonSimpleZeroError(
            f"nonzero eigenvalue with nonpositive real part {min_real:.3e}; "
            "spectrum inconsistent with a spanning tree"
        )
    return min_real
