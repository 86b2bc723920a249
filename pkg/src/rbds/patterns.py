"""Proximity-pattern forests and their plug-in probability estimators.

A *pattern* is a forest of closeness relations among distinct i.i.d. draws:
each edge ``(i, j)`` stands for the event ``|u_i - u_j| < eps``.  Under
independence the probability of a forest factorizes over its connected
components, and every quantity the finite-sample variance formulas need is the
probability of such a forest.

Families used throughout (``l >= 1`` chain edges):

* ``chain(l)``      — path with ``l`` edges over ``l+1`` vertices;
* ``omega(l, r)``   — chain plus ``r`` pendant leaves attached at the first
  ``r`` chain vertices ``v_0 .. v_{r-1}`` (``0 <= r <= l+1``);
* ``eta(l)``        — chain with ``l+1`` edges plus ``l-1`` pendant leaves at
  the interior vertices ``v_1 .. v_{l-1}``;
* ``xi(l, kappa)``  — chain plus one pendant leaf at interior vertex
  ``v_kappa`` (``1 <= kappa <= l-1``).

Estimators:

* the production estimator is the V-statistic (all index assignments, repeats
  allowed, divided by ``T^n``), computed by rooted-tree message passing with a
  subtree-keyed vector cache (one matrix-vector product per distinct rooted
  subtree shape);
* exact distinct-index U-statistics are used for the one- and two-edge chains
  (closed forms from row counts);
* an exhaustive enumeration oracle returns both the V and U values for small
  ``T`` (ground truth for tests).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional

import numpy as np

from .core import ProximityStructure
from .errors import (
    InvalidPatternParams,
    OracleTooLarge,
    PatternTooLarge,
    SeriesTooShort,
)

__all__ = [
    "PatternGraph",
    "PatternKey",
    "EstimatorSet",
    "build_pattern",
    "chain",
    "omega",
    "eta",
    "xi",
    "canonical_form",
    "estimate_pattern_v",
    "enumerate_pattern_exact",
    "estimate_pattern_u_exact",
    "omega12_hat",
    "estimator_closure",
    "forest_from_edges",
]


# ---------------------------------------------------------------------------
# Pattern graphs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PatternGraph:
    """A labeled forest of proximity edges on vertices ``0 .. vertex_count-1``.

    Invariants: no self-loops, no duplicate edges, acyclic.  Isolated vertices
    are permitted (they contribute a neutral factor to every estimator).
    """

    vertex_count: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        norm = []
        seen = set()
        for a, b in self.edges:
            if a == b:
                raise InvalidPatternParams(f"self-loop at vertex {a}")
            e = (min(a, b), max(a, b))
            if e in seen:
                raise InvalidPatternParams(f"duplicate edge {e}")
            if e[0] < 0 or e[1] >= self.vertex_count:
                raise InvalidPatternParams(
                    f"edge {e} outside vertex range 0..{self.vertex_count - 1}"
                )
            seen.add(e)
            norm.append(e)
        norm.sort()
        object.__setattr__(self, "edges", tuple(norm))
        # forest check via union-find
        parent = list(range(self.vertex_count))

        def find(x: int) -> int:
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for a, b in self.edges:
            ra, rb = find(a), find(b)
            if ra == rb:
                raise InvalidPatternParams(
                    f"edges contain a cycle through ({a}, {b}); patterns must be forests"
                )
            parent[ra] = rb

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def components(self) -> list[list[int]]:
        """Connected components as sorted vertex lists (isolated included)."""
        adj = _adjacency(self)
        seen = [False] * self.vertex_count
        comps: list[list[int]] = []
        for v0 in range(self.vertex_count):
            if seen[v0]:
                continue
            stack = [v0]
            seen[v0] = True
            comp = []
            while stack:
                v = stack.pop()
                comp.append(v)
                for w in adj[v]:
                    if not seen[w]:
                        seen[w] = True
                        stack.append(w)
            comps.append(sorted(comp))
        return comps

    def component_subgraphs(self) -> list["PatternGraph"]:
        """Each connected component relabeled to ``0..n_c-1``."""
        out = []
        for comp in self.components():
            remap = {v: i for i, v in enumerate(comp)}
            edges = tuple(
                (remap[a], remap[b]) for a, b in self.edges if a in remap and b in remap
            )
            out.append(PatternGraph(vertex_count=len(comp), edges=edges))
        return out

    def canonical(self) -> str:
        return canonical_form(self)


def _adjacency(g: PatternGraph) -> list[list[int]]:
    adj: list[list[int]] = [[] for _ in range(g.vertex_count)]
    for a, b in g.edges:
        adj[a].append(b)
        adj[b].append(a)
    return adj


def forest_from_edges(edges: Iterable[tuple[int, int]]) -> PatternGraph:
    """Build a :class:`PatternGraph` from edges over arbitrary integer labels;
    vertices are relabeled ``0..n-1`` in sorted label order, and only labeled
    vertices that appear in an edge are kept."""
    edges = list(edges)
    labels = sorted({v for e in edges for v in e})
    remap = {v: i for i, v in enumerate(labels)}
    return PatternGraph(
        vertex_count=len(labels),
        edges=tuple((remap[a], remap[b]) for a, b in edges),
    )


# --- canonical forms (isomorphism-invariant tree encodings) ----------------


def _rooted_encoding(adj: list[list[int]], root: int, parent: int) -> str:
    subs = sorted(
        _rooted_encoding(adj, w, root) for w in adj[root] if w != parent
    )
    return "(" + "".join(subs) + ")"


def _tree_centers(adj: list[list[int]], comp: list[int]) -> list[int]:
    """Leaf-peeling: the last one or two surviving vertices of the tree."""
    if len(comp) <= 2:
        return list(comp)
    degree = {v: len(adj[v]) for v in comp}
    layer = [v for v in comp if degree[v] == 1]
    remaining = len(comp)
    while remaining > 2:
        remaining -= len(layer)
        nxt = []
        for v in layer:
            degree[v] = 0
            for w in adj[v]:
                if degree[w] > 1:
                    degree[w] -= 1
                    if degree[w] == 1:
                        nxt.append(w)
        layer = nxt
    return sorted(layer)


def canonical_form(g: PatternGraph) -> str:
    """Isomorphism-invariant encoding: per component, the minimal rooted-tree
    encoding over its center(s); components sorted and joined."""
    adj = _adjacency(g)
    keys = []
    for comp in g.components():
        centers = _tree_centers(adj, comp)
        keys.append(min(_rooted_encoding(adj, c, -1) for c in centers))
    return "|".join(sorted(keys))


# ---------------------------------------------------------------------------
# Pattern families
# ---------------------------------------------------------------------------


def chain(l: int) -> PatternGraph:
    """Path with ``l`` edges."""
    if l < 1:
        raise InvalidPatternParams(f"chain length l={l} must be >= 1")
    return PatternGraph(l + 1, tuple((j, j + 1) for j in range(l)))


def omega(l: int, r: int) -> PatternGraph:
    """Chain of ``l`` edges plus ``r`` pendant leaves at ``v_0 .. v_{r-1}``."""
    if l < 1:
        raise InvalidPatternParams(f"omega chain length l={l} must be >= 1")
    if not (0 <= r <= l + 1):
        raise InvalidPatternParams(f"omega pendant count r={r} outside 0..{l + 1}")
    edges = [(j, j + 1) for j in range(l)]
    edges += [(j, l + 1 + j) for j in range(r)]
    return PatternGraph(l + 1 + r, tuple(edges))


def eta(l: int) -> PatternGraph:
    """Chain of ``l+1`` edges plus ``l-1`` pendant leaves at ``v_1 .. v_{l-1}``."""
    if l < 1:
        raise InvalidPatternParams(f"eta chain parameter l={l} must be >= 1")
    edges = [(j, j + 1) for j in range(l + 1)]
    edges += [(1 + j, l + 2 + j) for j in range(l - 1)]
    return PatternGraph(l + 2 + max(0, l - 1), tuple(edges))


def xi(l: int, kappa: int) -> PatternGraph:
    """Chain of ``l`` edges plus one pendant leaf at interior ``v_kappa``."""
    if l < 2:
        raise InvalidPatternParams(f"xi chain length l={l} must be >= 2")
    if not (1 <= kappa <= l - 1):
        raise InvalidPatternParams(f"xi pendant position kappa={kappa} outside 1..{l - 1}")
    edges = [(j, j + 1) for j in range(l)] + [(kappa, l + 1)]
    return PatternGraph(l + 2, tuple(edges))


_FAMILIES = {"chain", "omega", "eta", "xi"}


@dataclass(frozen=True)
class PatternKey:
    """Memoization key for a pattern family instance; ``canonical_form`` is
    shared by isomorphic forests (e.g. ``omega(l, 1)`` and ``chain(l+1)``)."""

    family: str
    l: int
    r: int = 0
    kappa: int = 0

    def __post_init__(self) -> None:
        if self.family not in _FAMILIES:
            raise InvalidPatternParams(f"unknown pattern family {self.family!r}")

    def graph(self) -> PatternGraph:
        return build_pattern(self)

    @property
    def canonical_form(self) -> str:
        return canonical_form(self.graph())


def build_pattern(key: PatternKey) -> PatternGraph:
    """Materialize a family key as a labeled forest."""
    if key.family == "chain":
        return chain(key.l)
    if key.family == "omega":
        return omega(key.l, key.r)
    if key.family == "eta":
        return eta(key.l)
    return xi(key.l, key.kappa)


# ---------------------------------------------------------------------------
# Estimators
# ---------------------------------------------------------------------------


def _rooted_children(adj: list[list[int]], root: int) -> dict[int, list[int]]:
    """BFS orientation of one component from ``root``: vertex -> children."""
    children: dict[int, list[int]] = {root: []}
    order = [root]
    seen = {root}
    qi = 0
    while qi < len(order):
        v = order[qi]
        qi += 1
        for w in adj[v]:
            if w not in seen:
                seen.add(w)
                children[w] = []
                children[v].append(w)
                order.append(w)
    return children


def _up_message(
    mat: np.ndarray,
    children: Mapping[int, list[int]],
    v: int,
    cache: Optional[dict],
    enc: dict[int, str],
) -> np.ndarray:
    """Vector over sample indices: number of assignments of the subtree rooted
    at ``v`` given the value of ``v``'s parent, i.e. ``M @ (prod of children's
    up-messages)``.  Cached by the subtree's rooted encoding."""
    key = enc[v]
    if cache is not None and key in cache:
        return cache[key]
    prod = None
    for c in children[v]:
        msg = _up_message(mat, children, c, cache, enc)
        prod = msg if prod is None else prod * msg
    vec = mat.sum(axis=1) if prod is None else mat @ prod
    if cache is not None:
        cache[key] = vec
    return vec


def _rooted_encodings(children: Mapping[int, list[int]], root: int) -> dict[int, str]:
    enc: dict[int, str] = {}

    def rec(v: int) -> str:
        s = "(" + "".join(sorted(rec(c) for c in children[v])) + ")"
        enc[v] = s
        return s

    rec(root)
    return enc


def estimate_pattern_v(
    P: ProximityStructure,
    pattern: PatternGraph,
    cache: Optional[dict] = None,
) -> float:
    """V-statistic estimate: the sum over **all** vertex-to-index assignments
    (repeats allowed) of the product of edge indicators, divided by
    ``T^vertex_count``; computed by rooted-tree message passing in
    ``O(edges * T^2)``.

    ``cache`` (optional) maps rooted-subtree encodings to message vectors and
    may be shared across calls on the same proximity structure.
    """
    T = P.T
    if pattern.vertex_count > T:
        raise PatternTooLarge(
            f"pattern has {pattern.vertex_count} vertices but T={T}"
        )
    mat = P.float_matrix()
    adj = _adjacency(pattern)
    value = 1.0
    for comp in pattern.components():
        root = comp[0]  # lowest index; the value is root-independent
        if len(comp) == 1:
            value *= 1.0  # T assignments / T
            continue
        children = _rooted_children(adj, root)
        enc = _rooted_encodings(children, root)
        prod = None
        for c in children[root]:
            msg = _up_message(mat, children, c, cache, enc)
            prod = msg if prod is None else prod * msg
        # prod is not None because len(comp) > 1
        value *= float(prod.sum()) / float(T) ** len(comp)
    return value


def enumerate_pattern_exact(
    P: ProximityStructure, pattern: PatternGraph, chunk: int = 1 << 19
) -> tuple[float, float]:
    """Exhaustive ground truth: returns ``(v_value, u_value)`` where the V
    value sums over all ``T^n`` assignments and the U value over injective
    assignments only (normalized by ``T (T-1) ... (T-n+1)``).

    Guarded by ``T^n <= 1e8``; this is the test oracle, not a production path.
    """
    T = P.T
    n = pattern.vertex_count
    total = T**n
    if total > 10**8:
        raise OracleTooLarge(f"T^n = {total} exceeds the 1e8 enumeration guard")
    if n > T:
        raise PatternTooLarge(f"pattern has {n} vertices but T={T}")
    bits = P.bits
    radix = np.array([T**j for j in range(n)], dtype=np.int64)
    sum_all = 0
    sum_inj = 0
    for start in range(0, total, chunk):
        ids = np.arange(start, min(start + chunk, total), dtype=np.int64)
        coords = (ids[:, None] // radix[None, :]) % T
        ok = np.ones(ids.shape[0], dtype=bool)
        for a, b in pattern.edges:
            ok &= bits[coords[:, a], coords[:, b]]
        sum_all += int(ok.sum())
        inj = ok.copy()
        for a in range(n):
            for b in range(a + 1, n):
                inj &= coords[:, a] != coords[:, b]
        sum_inj += int(inj.sum())
    perms = 1
    for j in range(n):
        perms *= T - j
    return sum_all / float(total), sum_inj / float(perms)


def estimate_pattern_u_exact(P: ProximityStructure, pattern: PatternGraph) -> float:
    """Exact distinct-index U-statistic by exhaustive enumeration (oracle)."""
    return enumerate_pattern_exact(P, pattern)[1]


def omega12_hat(P: ProximityStructure) -> tuple[float, float]:
    """Exact distinct-index U-statistics for the one-edge and two-edge chains,
    in ``O(T^2)``: the close-pair rate over ``T(T-1)`` ordered pairs and the
    common-neighbor rate over ``T(T-1)(T-2)`` ordered triples (computed from
    diagonal-inclusive row counts)."""
    T = P.T
    if T < 3:
        raise SeriesTooShort(f"need T >= 3 for the triple estimate, got {T}")
    rows = P.row_counts.astype(np.float64)
    s1 = float(rows.sum())
    w1 = (s1 - T) / (T * (T - 1.0))
    n = rows - 1.0
    w2 = float((n * (n - 1.0)).sum()) / (T * (T - 1.0) * (T - 2.0))
    return w1, w2


# ---------------------------------------------------------------------------
# Estimator set
# ---------------------------------------------------------------------------

_CHAIN1_KEY = canonical_form(chain(1))
_CHAIN2_KEY = canonical_form(chain(2))


@dataclass
class EstimatorSet:
    """Memoized pattern-probability estimates keyed by canonical form.

    Built either from a proximity structure (plug-in estimates; lazy for
    shapes requested later) or from an explicit value function / mapping
    (ground-truth values for tests and validation).  Every stored value lies
    in ``[0, 1]``; provenance records how each entry was obtained
    (``v_statistic``, ``u_exact``, or ``external``).
    """

    values: dict[str, float] = field(default_factory=dict)
    provenance: dict[str, str] = field(default_factory=dict)
    P: Optional[ProximityStructure] = None
    truth_fn: Optional[Callable[[PatternGraph], float]] = None
    _msg_cache: dict = field(default_factory=dict, repr=False)

    # -- retrieval ----------------------------------------------------------

    def value(self, pattern: PatternGraph | PatternKey) -> float:
        """Estimated probability of the forest; forests factor over their
        connected components (each cached separately)."""
        if isinstance(pattern, PatternKey):
            pattern = pattern.graph()
        comps = pattern.component_subgraphs()
        if len(comps) > 1:
            out = 1.0
            for sub in comps:
                out *= self.value(sub)
            return out
        key = canonical_form(pattern)
        if key in self.values:
            return self.values[key]
        val, prov = self._estimate(pattern, key)
        self.values[key] = val
        self.provenance[key] = prov
        return val

    def _estimate(self, pattern: PatternGraph, key: str) -> tuple[float, str]:
        if pattern.edge_count == 0:
            return 1.0, "external"
        if self.P is not None:
            if key == _CHAIN1_KEY or key == _CHAIN2_KEY:
                w1, w2 = omega12_hat(self.P)
                self.values.setdefault(_CHAIN1_KEY, w1)
                self.provenance.setdefault(_CHAIN1_KEY, "u_exact")
                self.values.setdefault(_CHAIN2_KEY, w2)
                self.provenance.setdefault(_CHAIN2_KEY, "u_exact")
                return self.values[key], "u_exact"
            return (
                estimate_pattern_v(self.P, pattern, cache=self._msg_cache),
                "v_statistic",
            )
        if self.truth_fn is not None:
            return float(self.truth_fn(pattern)), "external"
        raise KeyError(
            f"no value for pattern {key!r} and no estimation source attached"
        )

    # -- convenience accessors ----------------------------------------------

    def omega(self, l: int, r: int = 0) -> float:
        return self.value(omega(l, r))

    def eta(self, l: int) -> float:
        return self.value(eta(l))

    def xi(self, l: int, kappa: int) -> float:
        return self.value(xi(l, kappa))

    def chain(self, l: int) -> float:
        return self.value(chain(l))

    # -- constructors ---------------------------------------------------------

    @classmethod
    def from_values(cls, mapping: Mapping[str, float]) -> "EstimatorSet":
        vals = dict(mapping)
        return cls(values=vals, provenance={k: "external" for k in vals})

    @classmethod
    def from_function(cls, fn: Callable[[PatternGraph], float]) -> "EstimatorSet":
        return cls(truth_fn=fn)


def closure_keys(m: int) -> list[PatternKey]:
    """Every family key the variance formulas consume for window length ``m``:
    for each ``k in 1..m-1`` with ``h = m // k`` the omega families of chain
    lengths ``h`` and ``h+1`` (pendant counts ``0..h+1``), the eta shape of the
    longer chain, the interior-pendant xi families; plus the short chains used
    by the close-pair covariance term and the far-pair shape classes (chains up
    to ``2m``)."""
    if m < 2:
        raise InvalidPatternParams(f"closure defined for m >= 2, got m={m}")
    keys: list[PatternKey] = []
    seen: set[tuple] = set()

    def add(key: PatternKey) -> None:
        sig = (key.family, key.l, key.r, key.kappa)
        if sig not in seen:
            seen.add(sig)
            keys.append(key)

    for j in range(1, 2 * m + 1):
        add(PatternKey("chain", j))
    for k in range(1, m):
        h = m // k
        for l in (h, h + 1):
            for r in range(0, min(l, h) + 2):
                add(PatternKey("omega", l, r=r))
        add(PatternKey("eta", h + 1))
        for kappa in range(1, h):
            add(PatternKey("xi", h, kappa=kappa))
        for kappa in range(1, h + 1):
            add(PatternKey("xi", h + 1, kappa=kappa))
    return keys


def estimator_closure(P: ProximityStructure, m: int) -> EstimatorSet:
    """Estimate every pattern the variance formulas for window length ``m``
    consume (canonical-form memoized; shapes requested later are estimated on
    demand with the same shared message cache)."""
    es = EstimatorSet(P=P)
    for key in closure_keys(m):
        es.value(key)
    return es
