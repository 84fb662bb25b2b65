"""Shared test corpus and brute-force oracles.

The corpus is deterministic (fixed seeds) and desk-scale: every graph has
at most 12 nodes, and randomly generated graphs are admitted only if the
depth-limited value iteration contracts fast enough for the fixed-depth
convergence checks used across the suite (residual < 1e-9 by step 200,
settling monotonically after a short transient).  The oracles here are
deliberately independent of the library's linear-algebra and automaton
code paths: cycle gcds come from explicit simple-cycle enumeration, string
languages from exhaustive enumeration, and root references from scipy's
root finder.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass

import numpy as np

from pathwager import (
    GameGraph,
    GraphKind,
    build_graph,
    build_stopping_variant,
    build_window_game,
    classify,
    solve,
    stopping_analysis,
    truncated_values,
)

_VALUE_POOL = [0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 8.0]


@dataclass(frozen=True)
class Entry:
    name: str
    graph: GameGraph


def _converges_fast(graph: GameGraph) -> bool:
    series = truncated_values(graph, 400)
    res = series.residuals
    if res[200] > 1e-9 or res[400] > 1e-10:
        return False
    settle = 25
    if not all(res[s + 1] <= res[s] * 1.001 + 1e-15 for s in range(settle, 400)):
        return False
    # absorption must also be fast (the value residual is blind to it on
    # fair graphs, where the series starts at the fixed point)
    if classify(graph).is_terminating and graph.nonterminals:
        stats = stopping_analysis(solve(graph), graph, t_max=500)
        if stats.tail_mass.max() > 1e-10:
            return False
        partial = stats.stop_dist.T @ np.arange(1.0, 501.0)
        if np.abs(partial - stats.tau).max() > 1e-9:
            return False
    return True


def _random_fan(rng: random.Random, tag: int) -> Entry:
    n = rng.randint(2, 6)
    leaves = [f"leaf{i}" for i in range(n)]
    values = {leaf: rng.choice(_VALUE_POOL) for leaf in leaves}
    g = build_graph(["root"] + leaves, [("root", leaf) for leaf in leaves], values)
    return Entry(f"fan_{tag}", g)


def _random_tree(rng: random.Random, tag: int) -> Entry:
    labels = ["n0"]
    edges = []
    values = {}
    frontier = [("n0", 0)]
    count = 1
    while frontier:
        node, depth = frontier.pop()
        if depth >= 3 or (depth > 0 and rng.random() < 0.35) or count >= 10:
            values[node] = rng.choice(_VALUE_POOL)
            continue
        kids = rng.randint(1, 3)
        for _ in range(kids):
            child = f"n{count}"
            count += 1
            labels.append(child)
            edges.append((node, child))
            frontier.append((child, depth + 1))
    g = build_graph(labels, edges, values)
    return Entry(f"tree_{tag}", g)


def _random_terminating(rng: random.Random, tag: int, fair: bool) -> Entry | None:
    n_total = rng.randint(4, 12)
    n_term = rng.randint(1, 2) if not fair else 1
    labels = [f"v{i}" for i in range(n_total)]
    terminals = labels[-n_term:]
    edges = set()
    for i in range(n_total - n_term):
        degree = rng.randint(2, 3) if fair else rng.randint(1, 3)
        targets = rng.sample(range(n_total), k=min(degree, n_total))
        for j in targets:
            edges.add((labels[i], labels[j]))
    values = {t: (1 if fair else rng.choice(_VALUE_POOL)) for t in terminals}
    try:
        g = build_graph(labels, sorted(edges), values)
    except Exception:
        return None
    cls = classify(g)
    if cls.kind not in (GraphKind.TERMINATING, GraphKind.TREE, GraphKind.FAN):
        return None
    if fair and any(g.out_degree(i) < 2 for i in g.nonterminals):
        return None
    if not _converges_fast(g):
        return None
    return Entry(f"{'fair_term' if fair else 'term'}_{tag}", g)


def _random_strongly_connected(rng: random.Random, tag: int, fair: bool) -> Entry | None:
    n = rng.randint(2, 10)
    labels = [f"s{i}" for i in range(n)]
    edges = {(labels[i], labels[(i + 1) % n]) for i in range(n)}
    edges.add((labels[0], labels[0]))  # loop forces aperiodicity
    extra = rng.randint(0, 2 * n)
    for _ in range(extra):
        i, j = rng.randrange(n), rng.randrange(n)
        edges.add((labels[i], labels[j]))
    if fair:
        for i in range(n):
            out = [e for e in edges if e[0] == labels[i]]
            while len(out) < 2:
                j = rng.randrange(n)
                edge = (labels[i], labels[j])
                if edge not in edges:
                    edges.add(edge)
                    out.append(edge)
    try:
        g = build_graph(labels, sorted(edges), {})
    except Exception:
        return None
    if classify(g).kind is not GraphKind.STRONGLY_CONNECTED_APERIODIC:
        return None
    if not _converges_fast(g):
        return None
    return Entry(f"{'fair_sc' if fair else 'sc'}_{tag}", g)


def _named_entries() -> list[Entry]:
    entries = [
        Entry("fan24", build_graph(["root", "a", "b"],
                                   [("root", "a"), ("root", "b")], {"a": 2, "b": 4})),
        Entry("fan_uniform", build_graph(["root", "a", "b", "c"],
                                         [("root", x) for x in "abc"],
                                         {x: 3 for x in "abc"})),
        Entry("fan11", build_graph(["root", "a", "b"],
                                   [("root", "a"), ("root", "b")], {"a": 1, "b": 1})),
        Entry("chain", build_graph(["root", "mid", "leaf"],
                                   [("root", "mid"), ("mid", "leaf")], {"leaf": 1})),
        Entry("loop_exit", build_graph(["1", "t"], [("1", "1"), ("1", "t")], {"t": 1})),
        Entry("height2_tree", build_graph(
            ["r", "x", "y", "a", "b", "c", "d"],
            [("r", "x"), ("r", "y"), ("x", "a"), ("x", "b"), ("y", "c"), ("y", "d")],
            {"a": 2, "b": 4, "c": 2, "d": 4})),
        Entry("complete3", build_graph(
            ["p", "q", "r"],
            [("p", "q"), ("p", "r"), ("q", "p"), ("q", "r"), ("r", "p"), ("r", "q")], {})),
        # degenerate single-node games
        Entry("lone_terminal", build_graph(["end"], [], {"end": 2})),
        Entry("lone_loop", build_graph(["spin"], [("spin", "spin")], {})),
    ]
    for n in range(2, 7):
        entries.append(Entry(f"window_{n}_1", build_window_game(n, 1)))
        entries.append(Entry(f"stop_{n}", build_stopping_variant(n)))
    entries.append(Entry("window_3_2", build_window_game(3, 2)))
    entries.append(Entry("window_4_2", build_window_game(4, 2)))
    entries.append(Entry("window_4_3", build_window_game(4, 3)))
    return entries


_CORPUS: list[Entry] | None = None
_RANDOM_COUNT = {"fan": 14, "tree": 8, "term": 14, "fair_term": 6, "sc": 10, "fair_sc": 4}


def full_corpus() -> list[Entry]:
    """Named special graphs plus >= 50 random graphs, all <= 12 nodes."""
    global _CORPUS
    if _CORPUS is not None:
        return _CORPUS
    rng = random.Random(20260811)
    entries = _named_entries()
    for i in range(_RANDOM_COUNT["fan"]):
        entries.append(_random_fan(rng, i))
    for i in range(_RANDOM_COUNT["tree"]):
        entries.append(_random_tree(rng, i))
    for group, fair in (("term", False), ("fair_term", True)):
        made = 0
        while made < _RANDOM_COUNT[group]:
            entry = _random_terminating(rng, made, fair)
            if entry is not None:
                entries.append(entry)
                made += 1
    for group, fair in (("sc", False), ("fair_sc", True)):
        made = 0
        while made < _RANDOM_COUNT[group]:
            entry = _random_strongly_connected(rng, made, fair)
            if entry is not None:
                entries.append(entry)
                made += 1
    _CORPUS = entries
    return entries


def random_corpus() -> list[Entry]:
    prefixes = ("fan_", "tree_", "term_", "fair_term_", "sc_", "fair_sc_")
    return [e for e in full_corpus() if e.name.startswith(prefixes)]


def terminating_corpus() -> list[Entry]:
    return [e for e in full_corpus() if classify(e.graph).is_terminating]


def sc_corpus() -> list[Entry]:
    return [
        e
        for e in full_corpus()
        if classify(e.graph).kind is GraphKind.STRONGLY_CONNECTED_APERIODIC
    ]


def fan_corpus() -> list[Entry]:
    return [e for e in full_corpus() if classify(e.graph).kind is GraphKind.FAN
            and e.graph.out_degree(e.graph.nonterminals[0]) >= 2]


# -- brute-force oracles -----------------------------------------------------


def simple_cycle_lengths(graph: GameGraph) -> set[int]:
    """All simple-cycle lengths, by DFS rooted at each cycle's minimal node."""
    lengths: set[int] = set()

    def extend(start: int, node: int, visited: set[int], depth: int) -> None:
        for nxt in graph.successors[node]:
            if nxt == start:
                lengths.add(depth + 1)
            elif nxt > start and nxt not in visited:
                extend(start, nxt, visited | {nxt}, depth + 1)

    for start in range(graph.num_nodes):
        extend(start, start, {start}, 0)
    return lengths


def gcd_of_cycles(graph: GameGraph) -> int:
    acc = 0
    for length in simple_cycle_lengths(graph):
        acc = math.gcd(acc, length)
    return acc


def window_legal(bits: tuple[int, ...], n: int, k: int) -> bool:
    """At most k ones in every window of n (whole string when shorter)."""
    if len(bits) < n:
        return sum(bits) <= k
    return all(sum(bits[i:i + n]) <= k for i in range(len(bits) - n + 1))


def legal_window_strings(n: int, k: int, max_len: int) -> set[str]:
    out = set()
    for length in range(1, max_len + 1):
        for bits in itertools.product((0, 1), repeat=length):
            if window_legal(bits, n, k):
                out.add("".join("L" if b else "T" for b in bits))
    return out


def legal_pattern_strings(patterns: list[str], max_len: int) -> set[str]:
    out = set()
    for length in range(1, max_len + 1):
        for combo in itertools.product("TL", repeat=length):
            s = "".join(combo)
            if not any(p in s for p in patterns):
                out.add(s)
    return out


def realizable_strings(graph: GameGraph, max_len: int) -> set[str]:
    """Edge-label strings readable from the start node (index 0)."""
    symbol_char = {"truth": "T", "lie": "L"}
    table: list[dict[str, int]] = [dict() for _ in range(graph.num_nodes)]
    for (i, j), label in (graph.edge_labels or {}).items():
        for sym in label.split("|"):
            table[i][symbol_char[sym]] = j
    out: set[str] = set()

    def walk(state: int, prefix: str) -> None:
        if len(prefix) == max_len:
            return
        for ch, nxt in table[state].items():
            word = prefix + ch
            out.add(word)
            walk(nxt, word)

    walk(0, "")
    return out
