"""Game graphs: representation, JSON parsing, validation, classification, DOT export.

A game graph is a finite directed graph in which every node of out-degree
zero ("terminal") carries a positive value.  Play starts at a non-terminal
node and walks edges until a terminal node is reached (if ever).  All edge
semantics come from player strategies, so edges are unweighted.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence


class GraphError(ValueError):
    """Raised for malformed or invalid game-graph input."""


class GraphKind(Enum):
    FAN = "fan"
    TREE = "tree"
    TERMINATING = "terminating"
    STRONGLY_CONNECTED_APERIODIC = "strongly_connected_aperiodic"
    UNSUPPORTED = "unsupported"


@dataclass(frozen=True)
class GraphClass:
    """Structural class of a game graph.

    Classification reports the most specific class: every fan is a tree and
    every tree is terminating.  ``reason`` is set only for UNSUPPORTED.
    """

    kind: GraphKind
    reason: Optional[str] = None

    @property
    def is_terminating(self) -> bool:
        return self.kind in (GraphKind.FAN, GraphKind.TREE, GraphKind.TERMINATING)

    @property
    def is_tree(self) -> bool:
        return self.kind in (GraphKind.FAN, GraphKind.TREE)

    def __str__(self) -> str:
        if self.kind is GraphKind.UNSUPPORTED:
            return f"unsupported ({self.reason})"
        return self.kind.value


@dataclass(frozen=True)
class GameGraph:
    """Immutable directed game graph.

    Nodes are dense integer indices 0..N-1 with string labels (insertion
    order of the input defines the index mapping).  ``successors[i]`` is the
    sorted tuple of successor indices of node i.  ``values`` maps every
    terminal node (out-degree 0) to its positive value; ``exact_values`` is
    present when every value was given exactly (integers or num/den pairs)
    and enables rational arithmetic downstream.  ``edge_labels`` optionally
    tags edges with move names (e.g. "truth"/"lie" for oracle games; a
    merged edge may carry "truth|lie").
    """

    labels: tuple[str, ...]
    successors: tuple[tuple[int, ...], ...]
    values: dict[int, float] = field(default_factory=dict)
    exact_values: Optional[dict[int, Fraction]] = None
    edge_labels: Optional[dict[tuple[int, int], str]] = None

    def __post_init__(self) -> None:
        _validate(self)

    # -- basic accessors -------------------------------------------------

    @property
    def num_nodes(self) -> int:
        return len(self.labels)

    def out_degree(self, i: int) -> int:
        return len(self.successors[i])

    def is_terminal(self, i: int) -> bool:
        return not self.successors[i]

    @property
    def terminals(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.num_nodes) if self.is_terminal(i))

    @property
    def nonterminals(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.num_nodes) if not self.is_terminal(i))

    def index_of(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise GraphError(f"unknown node label {label!r}") from None

    def edges(self) -> Iterable[tuple[int, int]]:
        for i, succ in enumerate(self.successors):
            for j in succ:
                yield (i, j)

    def predecessors(self, j: int) -> tuple[int, ...]:
        return tuple(i for i in range(self.num_nodes) if j in self.successors[i])

    # -- serialization ---------------------------------------------------

    def to_dict(self) -> dict:
        edges = [[self.labels[i], self.labels[j]] for i, j in self.edges()]
        values: dict[str, object] = {}
        for i in sorted(self.values):
            if self.exact_values is not None:
                frac = self.exact_values[i]
                values[self.labels[i]] = (
                    int(frac) if frac.denominator == 1 else [frac.numerator, frac.denominator]
                )
            else:
                values[self.labels[i]] = self.values[i]
        doc: dict = {"nodes": list(self.labels), "edges": edges, "values": values}
        if self.edge_labels:
            doc["edge_labels"] = [
                self.edge_labels.get((i, j)) for i, j in self.edges()
            ]
        return doc


def build_graph(
    labels: Sequence[str],
    edges: Iterable[tuple[str, str]],
    values: Mapping[str, object],
    edge_labels: Optional[Mapping[tuple[str, str], str]] = None,
) -> GameGraph:
    """Construct a validated GameGraph from labelled parts.

    Values may be int, float, Fraction, or (numerator, denominator) pairs;
    exact rational values are retained when every value is exact.
    """
    if not labels:
        raise GraphError("graph must contain at least one node")
    index: dict[str, int] = {}
    for lab in labels:
        lab = str(lab)
        if lab in index:
            raise GraphError(f"duplicate node label {lab!r}")
        index[lab] = len(index)

    succ: list[set[int]] = [set() for _ in labels]
    labelled: dict[tuple[int, int], str] = {}
    for a, b in edges:
        if a not in index:
            raise GraphError(f"edge references unknown node {a!r}")
        if b not in index:
            raise GraphError(f"edge references unknown node {b!r}")
        i, j = index[a], index[b]
        if j in succ[i]:
            raise GraphError(f"duplicate edge {a!r} -> {b!r}")
        succ[i].add(j)
    if edge_labels:
        for (a, b), lab in edge_labels.items():
            labelled[(index[a], index[b])] = lab

    float_values: dict[int, float] = {}
    exact: dict[int, Fraction] = {}
    all_exact = True
    for lab, raw in values.items():
        if lab not in index:
            raise GraphError(f"value assigned to unknown node {lab!r}")
        i = index[lab]
        frac: Optional[Fraction]
        if isinstance(raw, Fraction):
            frac = raw
        elif isinstance(raw, bool):
            raise GraphError(f"value for node {lab!r} must be a number")
        elif isinstance(raw, int):
            frac = Fraction(raw)
        elif isinstance(raw, float):
            frac = None
        elif isinstance(raw, (list, tuple)) and len(raw) == 2:
            num, den = raw
            if not isinstance(num, int) or not isinstance(den, int) or den == 0:
                raise GraphError(f"value for node {lab!r} is not a valid num/den pair")
            frac = Fraction(num, den)
        else:
            raise GraphError(f"value for node {lab!r} must be a number or [num, den] pair")
        if frac is not None:
            float_values[i] = float(frac)
            exact[i] = frac
        else:
            float_values[i] = float(raw)
            all_exact = False

    return GameGraph(
        labels=tuple(str(lab) for lab in labels),
        successors=tuple(tuple(sorted(s)) for s in succ),
        values=float_values,
        exact_values=exact if all_exact else None,
        edge_labels=labelled or None,
    )


def _validate(g: GameGraph) -> None:
    n = len(g.labels)
    if n == 0:
        raise GraphError("graph must contain at least one node")
    for i, succ in enumerate(g.successors):
        for j in succ:
            if not 0 <= j < n:
                raise GraphError(f"edge from {g.labels[i]!r} references unknown node index {j}")
        if len(set(succ)) != len(succ):
            raise GraphError(f"duplicate edge out of node {g.labels[i]!r}")
    for i in range(n):
        if g.is_terminal(i):
            if i not in g.values:
                raise GraphError(f"terminal node {g.labels[i]!r} lacks a value")
        elif i in g.values:
            raise GraphError(
                f"node {g.labels[i]!r} has a value but out-degree {g.out_degree(i)}; "
                "values belong to terminal nodes only"
            )
    for i, v in g.values.items():
        if not math.isfinite(v) or v <= 0:
            raise GraphError(f"terminal value of node {g.labels[i]!r} must be strictly positive")
    if g.exact_values is not None:
        if set(g.exact_values) != set(g.values):
            raise GraphError("exact values must cover exactly the terminal nodes")
        for i, frac in g.exact_values.items():
            if frac <= 0:
                raise GraphError(f"terminal value of node {g.labels[i]!r} must be strictly positive")


# -- JSON wire format ----------------------------------------------------


def parse_graph(text: str) -> GameGraph:
    """Parse the JSON graph document.

    Schema: {"nodes": [label, ...], "edges": [[from, to], ...],
    "values": {label: number-or-[num,den], ...}} with an optional
    "edge_labels" array aligned with "edges".
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphError(f"malformed JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise GraphError("graph document must be a JSON object")
    for key in ("nodes", "edges", "values"):
        if key not in doc:
            raise GraphError(f"graph document missing {key!r}")
    nodes = doc["nodes"]
    edges = doc["edges"]
    values = doc["values"]
    if not isinstance(nodes, list) or not all(isinstance(x, str) for x in nodes):
        raise GraphError("'nodes' must be a list of string labels")
    if not isinstance(edges, list):
        raise GraphError("'edges' must be a list of [from, to] pairs")
    pairs: list[tuple[str, str]] = []
    for e in edges:
        if not isinstance(e, list) or len(e) != 2:
            raise GraphError(f"edge {e!r} is not a [from, to] pair")
        pairs.append((e[0], e[1]))
    if not isinstance(values, dict):
        raise GraphError("'values' must be an object")
    edge_labels = None
    if "edge_labels" in doc and doc["edge_labels"] is not None:
        raw = doc["edge_labels"]
        if not isinstance(raw, list) or len(raw) != len(pairs):
            raise GraphError("'edge_labels' must align with 'edges'")
        edge_labels = {
            pair: lab for pair, lab in zip(pairs, raw) if lab is not None
        }
    return build_graph(nodes, pairs, values, edge_labels=edge_labels)


def serialize_graph(g: GameGraph, indent: int = 2) -> str:
    """Serialize to the JSON wire format; parse(serialize(g)) == g."""
    return json.dumps(g.to_dict(), indent=indent)


# -- classification ------------------------------------------------------


def _reverse_reachable(g: GameGraph, sources: Iterable[int]) -> set[int]:
    preds: list[list[int]] = [[] for _ in range(g.num_nodes)]
    for i, j in g.edges():
        preds[j].append(i)
    seen = set(sources)
    queue = deque(seen)
    while queue:
        j = queue.popleft()
        for i in preds[j]:
            if i not in seen:
                seen.add(i)
                queue.append(i)
    return seen


def _forward_reachable(g: GameGraph, source: int) -> set[int]:
    seen = {source}
    queue = deque([source])
    while queue:
        i = queue.popleft()
        for j in g.successors[i]:
            if j not in seen:
                seen.add(j)
                queue.append(j)
    return seen


def is_strongly_connected(g: GameGraph) -> bool:
    if g.num_nodes == 1:
        # A single node is strongly connected; play requires its self-loop,
        # but that is the terminal/value validation's concern.
        return True
    if len(_forward_reachable(g, 0)) != g.num_nodes:
        return False
    return len(_reverse_reachable(g, [0])) == g.num_nodes


def aperiodicity_gcd(g: GameGraph) -> int:
    """gcd of all cycle lengths of a strongly connected graph.

    Uses the BFS-level characterization: the gcd of |level(u)+1-level(v)|
    over all edges u->v equals the gcd of all cycle lengths.  A result of 1
    means the graph is aperiodic.
    """
    if g.terminals:
        raise GraphError("aperiodicity is defined for graphs without terminal nodes")
    if not is_strongly_connected(g):
        raise GraphError("aperiodicity requires a strongly connected graph")
    level = {0: 0}
    queue = deque([0])
    while queue:
        i = queue.popleft()
        for j in g.successors[i]:
            if j not in level:
                level[j] = level[i] + 1
                queue.append(j)
    gcd = 0
    for i, j in g.edges():
        gcd = math.gcd(gcd, abs(level[i] + 1 - level[j]))
    return gcd


def _tree_root(g: GameGraph) -> Optional[int]:
    """Root index if the graph is a rooted tree with a non-terminal root."""
    indeg = [0] * g.num_nodes
    for _, j in g.edges():
        indeg[j] += 1
    roots = [i for i in range(g.num_nodes) if indeg[i] == 0]
    if len(roots) != 1:
        return None
    root = roots[0]
    if g.is_terminal(root):
        return None
    if any(indeg[i] != 1 for i in range(g.num_nodes) if i != root):
        return None
    # in-degree profile admits a disjoint cycle; demand reachability from root
    if len(_forward_reachable(g, root)) != g.num_nodes:
        return None
    return root


def classify(g: GameGraph) -> GraphClass:
    """Most specific structural class, or UNSUPPORTED with a reason."""
    if g.terminals:
        reached = _reverse_reachable(g, g.terminals)
        if len(reached) != g.num_nodes:
            stuck = next(i for i in range(g.num_nodes) if i not in reached)
            return GraphClass(
                GraphKind.UNSUPPORTED,
                f"node {g.labels[stuck]!r} cannot reach any terminal node",
            )
        root = _tree_root(g)
        if root is not None:
            if all(g.is_terminal(j) for j in g.successors[root]):
                return GraphClass(GraphKind.FAN)
            return GraphClass(GraphKind.TREE)
        return GraphClass(GraphKind.TERMINATING)
    if not is_strongly_connected(g):
        return GraphClass(
            GraphKind.UNSUPPORTED,
            "no terminal nodes and the graph is not strongly connected",
        )
    period = aperiodicity_gcd(g)
    if period != 1:
        return GraphClass(
            GraphKind.UNSUPPORTED,
            f"periodic: every cycle length is a multiple of {period}",
        )
    return GraphClass(GraphKind.STRONGLY_CONNECTED_APERIODIC)


# -- DOT export ----------------------------------------------------------


def to_dot(g: GameGraph, profile=None) -> str:
    """Render the graph in Graphviz DOT form.

    When a strategy profile is supplied, non-terminal nodes are annotated
    with their wager and edges with the chooser/guesser probabilities.
    """
    if profile is not None:
        if set(profile.wagers) != set(g.nonterminals) or any(
            len(profile.chooser[i]) != g.out_degree(i) for i in g.nonterminals
        ):
            raise GraphError("strategy profile does not match the graph")
    lines = ["digraph game {", "  rankdir=LR;"]
    for i, lab in enumerate(g.labels):
        attrs = []
        if g.is_terminal(i):
            attrs.append("shape=doublecircle")
            attrs.append(f'label="{lab}\\nv={g.values[i]:.12g}"')
        else:
            attrs.append("shape=circle")
            if profile is not None:
                attrs.append(f'label="{lab}\\nw={profile.wagers[i]:.12g}"')
        lines.append(f'  "{lab}" [{", ".join(attrs)}];')
    for i, succ in enumerate(g.successors):
        for pos, j in enumerate(succ):
            parts = []
            if g.edge_labels and (i, j) in g.edge_labels:
                parts.append(g.edge_labels[(i, j)])
            if profile is not None:
                parts.append(f"p={profile.chooser[i][pos]:.12g}")
                parts.append(f"g={profile.guesser[i][pos]:.12g}")
            label = f' [label="{" ".join(parts)}"]' if parts else ""
            lines.append(f'  "{g.labels[i]}" -> "{g.labels[j]}"{label};')
    lines.append("}")
    return "\n".join(lines)
