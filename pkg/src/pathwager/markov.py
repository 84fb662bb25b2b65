"""Play dynamics under the limiting strategies.

For terminating graphs: expected stopping times, the stopping-time
distribution, and terminal-hit probabilities, all in closed matrix form
from the propagation blocks A, B and the value diagonal V:

    tau = V_nt (I - A)^{-1} V_nt^{-1} 1
    q_t = V_nt A^{t-1} B V_t^{-1} 1
    rho = V_nt (I - A)^{-1} B V_t^{-1}

For strongly connected aperiodic graphs: the invariant measure of the
position walk (entrywise product of the scaled Perron eigenvectors) and the
shape of the steady-state discounted fortunes, proportional to mu_j / v_j.
A game is fair (value 1 everywhere) exactly when every terminal value is 1
and every non-terminal out-degree is at least 2 (terminating case), or
every out-degree is at least 2 (strongly connected case).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .graph import GameGraph, GraphKind
from .strategy import chooser_transition_matrix
from .values import GameSolution, UnsupportedGraphError, build_propagation_matrix

_VALUE_FAIR_TOL = 1e-10
_STATIONARY_TOL = 1e-10


@dataclass
class StoppingStats:
    tau: np.ndarray             # expected stopping times, per non-terminal node
    stop_dist: np.ndarray       # q[t-1, i] = P(T = t | start i), t = 1..t_max
    terminal_probs: np.ndarray  # rho[i, k] over (non-terminal, terminal)
    tail_mass: np.ndarray       # 1 - sum_t q_t per start node (truncation error)


@dataclass
class FairnessVerdict:
    fair: bool
    reason: str
    value_route_fair: bool      # independent verdict from the computed values


@dataclass
class SteadyStateFortunes:
    shape: np.ndarray           # mu_j / v_j, normalized to sum 1
    c_estimate: Optional[float] = None
    c_stderr: Optional[float] = None


@dataclass
class MarkovReport:
    transition: np.ndarray
    fairness: FairnessVerdict
    stopping: Optional[StoppingStats] = None
    invariant: Optional[np.ndarray] = None
    steady_fortunes: Optional[SteadyStateFortunes] = None
    t_max: int = 0
    warnings: list = field(default_factory=list)

    def to_dict(self, graph: GameGraph) -> dict:
        labels = graph.labels
        doc: dict = {
            "node_order": list(labels),
            "fair": self.fairness.fair,
            "fairness_reason": self.fairness.reason,
        }
        if self.stopping is not None:
            nt = graph.nonterminals
            t = graph.terminals
            doc["expected_stopping_times"] = {
                labels[i]: float(x) for i, x in zip(nt, self.stopping.tau)
            }
            doc["terminal_probabilities"] = {
                labels[i]: {labels[k]: float(p) for k, p in zip(t, row)}
                for i, row in zip(nt, self.stopping.terminal_probs)
            }
            doc["stopping_tail_mass"] = {
                labels[i]: float(x) for i, x in zip(nt, self.stopping.tail_mass)
            }
            doc["t_max"] = self.t_max
        if self.invariant is not None:
            doc["invariant_measure"] = {
                lab: float(x) for lab, x in zip(labels, self.invariant)
            }
        if self.steady_fortunes is not None:
            doc["steady_fortune_shape"] = {
                lab: float(x) for lab, x in zip(labels, self.steady_fortunes.shape)
            }
            if self.steady_fortunes.c_estimate is not None:
                doc["c_estimate"] = self.steady_fortunes.c_estimate
                doc["c_stderr"] = self.steady_fortunes.c_stderr
        if self.warnings:
            doc["warnings"] = list(self.warnings)
        return doc


def stopping_analysis(solution: GameSolution, graph: GameGraph, t_max: int) -> StoppingStats:
    """Exact stopping-time and terminal-hit statistics on a terminating graph."""
    if t_max < 1:
        raise ValueError("t_max must be at least 1")
    if not solution.graph_class.is_terminating:
        raise UnsupportedGraphError("stopping analysis requires a terminating graph")
    prop = build_propagation_matrix(graph)
    nt, t = list(prop.nt), list(prop.t)
    a, b = prop.A, prop.B
    v_nt = solution.values[nt]
    u_t = solution.reciprocals[t]

    eye = np.eye(len(nt))
    tau = v_nt * np.linalg.solve(eye - a, 1.0 / v_nt)

    # q_t = V_nt A^{t-1} (B u_t); iterate the core vector
    core = b @ u_t
    stop_dist = np.empty((t_max, len(nt)))
    for step in range(t_max):
        stop_dist[step] = v_nt * core
        core = a @ core
    tail_mass = 1.0 - stop_dist.sum(axis=0)

    rho = v_nt[:, None] * np.linalg.solve(eye - a, b * u_t[None, :])
    return StoppingStats(tau=tau, stop_dist=stop_dist, terminal_probs=rho, tail_mass=tail_mass)


def fairness_check(solution: GameSolution, graph: GameGraph) -> FairnessVerdict:
    """Structural fairness verdict, with the value-based verdict alongside.

    The two routes are mathematically equivalent; both are reported so that
    they can be cross-checked.
    """
    if solution.graph_class.is_terminating:
        value_fair = bool(np.abs(solution.values - 1.0).max() <= _VALUE_FAIR_TOL)
        for i in graph.nonterminals:
            if graph.out_degree(i) == 1:
                return FairnessVerdict(
                    False,
                    f"node {graph.labels[i]!r} has out-degree 1",
                    value_fair,
                )
        for i in graph.terminals:
            if graph.values[i] != 1:
                return FairnessVerdict(
                    False,
                    f"terminal node {graph.labels[i]!r} has value {graph.values[i]:.12g} != 1",
                    value_fair,
                )
        return FairnessVerdict(
            True,
            "all terminal values are 1 and every non-terminal out-degree is >= 2",
            value_fair,
        )
    if solution.graph_class.kind is GraphKind.STRONGLY_CONNECTED_APERIODIC:
        value_fair = bool(abs(solution.spectral.radius - 1.0) <= _VALUE_FAIR_TOL)
        for i in range(graph.num_nodes):
            if graph.out_degree(i) == 1:
                return FairnessVerdict(
                    False,
                    f"node {graph.labels[i]!r} has out-degree 1",
                    value_fair,
                )
        return FairnessVerdict(True, "every out-degree is >= 2", value_fair)
    raise UnsupportedGraphError("fairness is defined for supported graph classes only")


def invariant_measure(solution: GameSolution) -> np.ndarray:
    """Stationary distribution of the position walk on a strongly connected graph.

    mu_i = x_i y_i / (x . y) for the Perron eigenvectors x, y of the
    propagation matrix; stationarity P^T mu = mu is verified before return.
    """
    if solution.spectral is None:
        raise UnsupportedGraphError("invariant measure requires a strongly connected graph")
    x, y = solution.spectral.right_vec, solution.spectral.left_vec
    mu = x * y / (x @ y)
    mu = mu / mu.sum()
    p = chooser_transition_matrix(solution, solution.graph)
    drift = float(np.abs(p.T @ mu - mu).max())
    if drift > _STATIONARY_TOL:
        raise RuntimeError(f"invariant measure fails stationarity check: drift {drift:.3e}")
    return mu


def steady_state_fortunes(solution: GameSolution, simulation=None) -> SteadyStateFortunes:
    """Shape of the long-run discounted fortunes across positions.

    The steady-state discounted fortune mass at node j (the occupancy-
    weighted fortune E[D_t; X_t = j] under the invariant start) is
    proportional to mu_j / v_j.  Equivalently, the fortune conditioned on
    being at j is proportional to 1/v_j alone, and the occupancy weight
    mu_j supplies the rest.  The proportionality constant has no closed
    form; when a simulation with discounted checkpoints is supplied it is
    estimated (with a standard error) by least squares of the per-
    replication masked fortunes against the shape.
    """
    mu = invariant_measure(solution)
    shape = mu / solution.values
    shape = shape / shape.sum()
    c_est = c_se = None
    if simulation is not None:
        if simulation.config.graph != solution.graph:
            raise ValueError("simulation does not belong to this graph")
        if not simulation.checkpoints:
            raise ValueError("simulation carries no discounted checkpoints")
        last = max(simulation.checkpoints)
        nodes, fortunes = simulation.checkpoints[last]
        # per-replication least-squares regressand: D * shape[X] / |shape|^2
        w = fortunes * shape[nodes] / float(shape @ shape)
        c_est = float(w.mean())
        c_se = float(w.std(ddof=1) / np.sqrt(len(w))) if len(w) > 1 else None
    return SteadyStateFortunes(shape=shape, c_estimate=c_est, c_stderr=c_se)


def analyze(solution: GameSolution, t_max: int = 500, simulation=None) -> MarkovReport:
    """Full dynamics report for a solved graph."""
    graph = solution.graph
    p = chooser_transition_matrix(solution, graph)
    fairness = fairness_check(solution, graph)
    report = MarkovReport(transition=p, fairness=fairness, t_max=t_max)
    if solution.graph_class.is_terminating:
        if graph.nonterminals:
            report.stopping = stopping_analysis(solution, graph, t_max)
            worst_tail = float(report.stopping.tail_mass.max())
            if worst_tail > 1e-8:
                report.warnings.append(
                    f"stopping-time distribution truncated at t_max={t_max} "
                    f"with tail mass {worst_tail:.3e}"
                )
    else:
        report.invariant = invariant_measure(solution)
        report.steady_fortunes = steady_state_fortunes(solution, simulation)
    return report
