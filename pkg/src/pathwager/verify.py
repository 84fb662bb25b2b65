"""Independent correctness oracles for solved games.

A solved game is certified by checking the saddle condition from both
sides: against the guesser's profile every chooser move yields the game
value, and against the chooser's mix no (guess, wager) pair beats it.
Small terminating games are additionally bracketed by depth-limited
backward induction that is entirely independent of the linear-algebra
solvers, and the limit theory is audited by iterating the propagation
matrix directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .graph import GameGraph
from .strategy import StrategyProfile
from .values import (
    GameSolution,
    UnsupportedGraphError,
    build_propagation_matrix,
    solve,
)

GAIN_TOL = 1e-9
RESIDUAL_TOL = 1e-8


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)


@dataclass
class Certificate:
    """Outcome of a verification pass: fails loudly, never silently."""

    checks: list[CheckResult]
    max_chooser_gain: float = 0.0
    max_guesser_gain: float = 0.0
    residual: float = 0.0

    @property
    def passed(self) -> bool:
        return (
            all(c.passed for c in self.checks)
            and self.max_chooser_gain <= GAIN_TOL
            and self.max_guesser_gain <= GAIN_TOL
            and self.residual <= RESIDUAL_TOL
        )

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "max_chooser_gain": self.max_chooser_gain,
            "max_guesser_gain": self.max_guesser_gain,
            "residual": self.residual,
            "checks": [
                {"name": c.name, "passed": c.passed, **c.detail} for c in self.checks
            ],
        }


def certify_fan(values: Sequence[float], profile: StrategyProfile, grid: int = 1001) -> Certificate:
    """Equilibrium certificate for a one-level game with n >= 2 leaves.

    (a) every chooser move earns exactly the root value against the guesser
    profile; (b) no (guess, wager) pair beats the root value against the
    chooser mix, wagers on a uniform grid; (c) the per-move expectations
    divided by the leaf values sum to n.
    """
    vals = np.asarray(values, dtype=float)
    n = len(vals)
    if n < 2:
        raise ValueError("fan certificates need at least two leaves")
    if 0 not in profile.chooser or len(profile.chooser[0]) != n:
        raise ValueError("profile does not match the fan")
    p = profile.chooser[0]
    g = profile.guesser[0]
    w = profile.wagers[0]
    root_value = n / (1.0 / vals).sum()

    # (a) chooser side: E[F | move to j] = v_j (w (n g_j - 1) + 1)
    per_move = vals * (w * (n * g - 1.0) + 1.0)
    chooser_gain = float(root_value - per_move.min())
    checks = [
        CheckResult(
            "chooser_moves_all_equal_value",
            bool(np.abs(per_move - root_value).max() <= GAIN_TOL),
            {"per_move": per_move.tolist(), "value": root_value},
        )
    ]

    # (b) guesser side: sweep the (guess, wager) grid against the chooser mix
    wagers = np.linspace(0.0, 1.0, grid)
    base = float(p @ vals)
    stakes = n * p * vals
    best = float(np.max((1.0 - wagers)[None, :] * base + wagers[None, :] * stakes[:, None]))
    guesser_gain = float(best - root_value)
    checks.append(
        CheckResult(
            "no_guesser_deviation_beats_value",
            guesser_gain <= GAIN_TOL,
            {"best_deviation_value": best, "value": root_value},
        )
    )

    # (c) sum identity: sum_j E[F | move j] / v_j = n, for any guesser play
    total = float((per_move / vals).sum())
    checks.append(
        CheckResult(
            "per_move_sum_identity",
            abs(total - n) <= 1e-12 * n,
            {"sum": total, "expected": n},
        )
    )
    return Certificate(
        checks=checks,
        max_chooser_gain=max(chooser_gain, 0.0),
        max_guesser_gain=max(guesser_gain, 0.0),
    )


@dataclass
class BruteForceBounds:
    """Per-node value brackets from depth-limited backward induction."""

    lower: np.ndarray
    upper: np.ndarray
    depth: int
    converged: bool

    @property
    def width(self) -> float:
        return float((self.upper - self.lower).max())


def brute_force_value(
    graph: GameGraph, wager_grid: int = 1001, depth_limit: int = 60
) -> BruteForceBounds:
    """Bracket the game values without solving any linear system.

    Backward induction over the depth-limited game: each sweep replaces a
    node's bracket with the one-level game value over its successors'
    brackets.  The upper sweep uses the exact one-level optimum; the lower
    sweep restricts the guesser's wager to the grid and scores her
    equalizing mix by its worst case against the chooser, which
    under-estimates, so the true value stays inside the bracket.  Starting
    anchors are rigid bounds: v_min(terminals) and N^N * v_max(terminals).
    """
    from .graph import classify

    cls = classify(graph)
    if not cls.is_terminating:
        raise UnsupportedGraphError("brute force bounds require a terminating graph")
    n_nodes = graph.num_nodes
    v_term = np.array([graph.values[k] for k in graph.terminals])
    lower = np.full(n_nodes, float(v_term.min()))
    upper = np.full(n_nodes, float(n_nodes) ** n_nodes * float(v_term.max()))
    for k in graph.terminals:
        lower[k] = upper[k] = graph.values[k]
    wagers = np.linspace(0.0, 1.0, wager_grid)

    converged = False
    for _ in range(depth_limit):
        new_lower = lower.copy()
        new_upper = upper.copy()
        for i in graph.nonterminals:
            succ = list(graph.successors[i])
            new_upper[i] = _fan_value(upper[succ])
            new_lower[i] = _fan_value_grid(lower[succ], wagers)
        shift = max(
            float(np.abs(new_lower - lower).max()),
            float(np.abs(new_upper - upper).max()),
        )
        lower, upper = new_lower, new_upper
        if shift == 0.0:
            converged = True
            break
    return BruteForceBounds(lower=lower, upper=upper, depth=depth_limit, converged=converged)


def _fan_value(vals: np.ndarray) -> float:
    if len(vals) == 1:
        return 2.0 * float(vals[0])
    return len(vals) / float((1.0 / vals).sum())


def _fan_value_grid(vals: np.ndarray, wagers: np.ndarray) -> float:
    """Guesser's guaranteed one-level value with wagers restricted to a grid.

    For each wager w she plays the equalizing mix, g_j proportional to
    max(H/v_j - (1-w), 0); the score is that mix's worst case over chooser
    moves, which never over-states, so the result is a valid lower bound.
    """
    n = len(vals)
    if n == 1:
        return (1.0 + float(wagers.max())) * float(vals[0])
    h = _fan_value(vals)
    pos = wagers[wagers > 0.0]
    raw = np.clip((h / vals)[:, None] - (1.0 - pos)[None, :], 0.0, None)  # (n, W)
    totals = raw.sum(axis=0)
    ok = totals > 0.0
    w_ok = pos[ok]
    g = raw[:, ok] / totals[ok]
    per_move = vals[:, None] * (w_ok[None, :] * (n * g - 1.0) + 1.0)
    best = float(per_move.min(axis=0).max(initial=0.0))
    if (wagers <= 0.0).any():
        best = max(best, float(vals.min()))  # zero wager: chooser exits via the worst leaf
    return best


def audit_convergence(graph: GameGraph, steps: int = 400) -> Certificate:
    """Check that iterating the propagation matrix reaches its limit.

    Terminating: M^s approaches [[0, (I-A)^{-1} B], [0, I]].  Strongly
    connected: r^{-s} M^s approaches the positive rank-one matrix
    x y^T / (x . y).
    """
    solution = solve(graph)
    prop = build_propagation_matrix(graph)
    m = prop.matrix
    n = graph.num_nodes
    if solution.graph_class.is_terminating:
        nt, t = list(prop.nt), list(prop.t)
        limit = np.zeros((n, n))
        for k in t:
            limit[k, k] = 1.0
        if nt:
            block = np.linalg.solve(np.eye(len(nt)) - prop.A, prop.B)
            limit[np.ix_(nt, t)] = block
        power = np.eye(n)
        for _ in range(steps):
            power = power @ m
        residual = float(np.abs(power - limit).max())
        checks = [
            CheckResult(
                "power_limit_absorbing",
                residual <= RESIDUAL_TOL,
                {"steps": steps, "residual": residual},
            )
        ]
        if nt:
            upper_left = float(np.abs(power[np.ix_(nt, nt)]).max())
            checks.append(
                CheckResult(
                    "transient_block_vanishes",
                    upper_left <= RESIDUAL_TOL,
                    {"max_entry": upper_left},
                )
            )
        return Certificate(checks=checks, residual=residual)

    spectral = solution.spectral
    x, y = spectral.right_vec, spectral.left_vec
    limit = np.outer(x, y) / (x @ y)
    power = np.eye(n)
    for _ in range(steps):
        power = (power @ m) / spectral.radius
    residual = float(np.abs(power - limit).max())
    checks = [
        CheckResult(
            "scaled_power_limit",
            residual <= RESIDUAL_TOL,
            {"steps": steps, "residual": residual},
        ),
        CheckResult(
            "limit_strictly_positive",
            bool(limit.min() > 0.0),
            {"min_entry": float(limit.min())},
        ),
    ]
    return Certificate(checks=checks, residual=residual)


def certify_graph(
    graph: GameGraph,
    solution: GameSolution,
    betas: Sequence[float] = (0.0, 0.5, 1.0),
    grid: int = 1001,
    depth: int = 60,
    audit_steps: int = 400,
) -> Certificate:
    """Composite certificate used by the command-line ``verify``.

    Runs the convergence audit, both-sided deviation searches (terminating
    graphs) under each beta, and the backward-induction bracket on small
    graphs.
    """
    from .graph import GraphKind
    from .simulate import exploit_search

    checks: list[CheckResult] = []
    max_c = max_g = 0.0

    audit = audit_convergence(graph, steps=audit_steps)
    checks.extend(audit.checks)
    residual = audit.residual

    if solution.graph_class.is_terminating and graph.nonterminals:
        for beta in betas:
            dev_c = exploit_search(graph, solution, fixed_side="guesser", grid=grid, beta=beta)
            dev_g = exploit_search(graph, solution, fixed_side="chooser", grid=grid, beta=beta)
            max_c = max(max_c, dev_c.gain)
            max_g = max(max_g, dev_g.gain)
            checks.append(
                CheckResult(
                    f"no_profitable_deviation_beta_{beta:g}",
                    dev_c.gain <= GAIN_TOL and dev_g.gain <= GAIN_TOL,
                    {"chooser_gain": dev_c.gain, "guesser_gain": dev_g.gain},
                )
            )
        if graph.num_nodes <= 8:
            bounds = brute_force_value(graph, wager_grid=grid, depth_limit=depth)
            slack = 1e-9 * (1.0 + float(np.abs(solution.values).max()))
            inside = bool(
                np.all(solution.values >= bounds.lower - slack)
                and np.all(solution.values <= bounds.upper + slack)
            )
            checks.append(
                CheckResult(
                    "backward_induction_brackets_contain_values",
                    inside,
                    {"max_width": bounds.width, "depth": bounds.depth},
                )
            )
    elif solution.graph_class.kind is GraphKind.STRONGLY_CONNECTED_APERIODIC:
        # eigen-equation residual doubles as the optimality certificate here
        m = build_propagation_matrix(graph).matrix
        eig_res = float(
            np.abs(m @ solution.reciprocals - solution.spectral.radius * solution.reciprocals).max()
        )
        checks.append(
            CheckResult(
                "reciprocal_values_solve_eigen_equation",
                eig_res <= 1e-10,
                {"residual": eig_res},
            )
        )
    return Certificate(
        checks=checks,
        max_chooser_gain=max_c,
        max_guesser_gain=max_g,
        residual=residual,
    )
