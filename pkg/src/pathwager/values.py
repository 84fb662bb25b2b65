"""Node values for game graphs.

The value v_i of a node is the guesser's expected final fortune under
optimal play starting at i with one dollar.  All solvers work with the
reciprocal values u_i = 1/v_i, which propagate linearly:

    u_i = u_j / 2                      out-degree 1, edge i -> j
    u_i = (1/n_i) * sum_{j: i->j} u_j  out-degree n_i >= 2

Terminating graphs pin u at the terminal nodes and the interior solves a
dense linear system; strongly connected aperiodic graphs have no terminals
and the reciprocal values are the Perron eigenvector of the propagation
matrix, with the maximal eigenvalue doubling as the optimal per-step
discount factor.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .graph import GameGraph, GraphClass, GraphKind, classify

_EIGENVALUE_RTOL = 1e-13   # successive Rayleigh-quotient estimates
_EIGENVECTOR_TOL = 1e-12   # successive iterates, 1-norm
_RESIDUAL_TOL = 1e-14      # ||M x - r x||_inf at acceptance
_STAGNATION_WINDOW = 200   # accept the best iterate if the residual stops improving
_MAX_POWER_ITERATIONS = 10**6


class UnsupportedGraphError(ValueError):
    """Raised when an operation is asked to solve an unsupported graph."""


class ConvergenceError(RuntimeError):
    """Power iteration failed to converge within the iteration budget."""


class FanSolution(NamedTuple):
    root_value: object          # float, or Fraction in exact mode
    chooser_probs: tuple


@dataclass
class PropagationMatrix:
    """Dense propagation matrix M with its terminal/non-terminal split.

    M[i, j] = 1 if i is terminal and i == j, 1/2 if out-degree(i) == 1 and
    i -> j, 1/n_i if out-degree(i) >= 2 and i -> j, else 0.  Rows are kept
    in native node order; ``nt`` and ``t`` index the blocks, so that after
    permuting nodes to (nt, t) order M takes the form [[A, B], [0, I]].
    """

    matrix: np.ndarray
    nt: tuple[int, ...]
    t: tuple[int, ...]

    @property
    def A(self) -> np.ndarray:
        return self.matrix[np.ix_(self.nt, self.nt)]

    @property
    def B(self) -> np.ndarray:
        return self.matrix[np.ix_(self.nt, self.t)]


@dataclass
class SpectralData:
    """Perron data of the propagation matrix of a strongly connected graph."""

    radius: float               # maximal eigenvalue r, in [1/2, 1]
    right_vec: np.ndarray       # strictly positive, M x = r x
    left_vec: np.ndarray        # strictly positive, M^T y = r y
    discount: float             # optimal per-step discount factor, = radius


@dataclass
class GameSolution:
    """Values and reciprocal values for every node of a solved graph."""

    graph: GameGraph
    graph_class: GraphClass
    values: np.ndarray
    reciprocals: np.ndarray
    spectral: Optional[SpectralData] = None
    exact_values: Optional[list[Fraction]] = None

    def to_dict(self) -> dict:
        doc: dict = {
            "class": str(self.graph_class),
            "node_order": list(self.graph.labels),
            "values": {},
            "reciprocal_values": {},
        }
        for i, lab in enumerate(self.graph.labels):
            if self.exact_values is not None:
                frac = self.exact_values[i]
                doc["values"][lab] = (
                    int(frac) if frac.denominator == 1 else [frac.numerator, frac.denominator]
                )
                inv = 1 / frac
                doc["reciprocal_values"][lab] = (
                    int(inv) if inv.denominator == 1 else [inv.numerator, inv.denominator]
                )
            else:
                doc["values"][lab] = float(self.values[i])
                doc["reciprocal_values"][lab] = float(self.reciprocals[i])
        if self.spectral is not None:
            doc["r"] = self.spectral.radius
            doc["discount"] = self.spectral.discount
        return doc


@dataclass
class TruncationSeries:
    """Reciprocal values of the depth-limited game, step by step.

    ``vectors[s]`` holds the reciprocal values of the game stopped after s
    steps; ``residuals[s]`` is the sup-norm distance to the limiting
    reciprocal values.
    """

    steps: int
    vectors: list[np.ndarray]
    residuals: np.ndarray


def solve_fan(leaf_values: Sequence, exact: bool = False) -> FanSolution:
    """Value and optimal chooser mix for a one-level game.

    With a single leaf the root is worth twice the leaf (the guesser doubles
    a sure bet); with n >= 2 leaves the root value is the harmonic mean
    n / sum(1/v_k) and the chooser picks leaf j with probability
    (1/v_j) / sum(1/v_k).
    """
    if len(leaf_values) == 0:
        raise ValueError("a fan needs at least one leaf value")
    if exact:
        vals = [Fraction(v) for v in leaf_values]
    else:
        vals = [float(v) for v in leaf_values]
    if any(v <= 0 for v in vals):
        raise ValueError("leaf values must be strictly positive")
    if len(vals) == 1:
        return FanSolution(2 * vals[0], (_one(exact),))
    recips = [1 / v for v in vals]
    total = sum(recips)
    root = len(vals) / total
    probs = tuple(r / total for r in recips)
    return FanSolution(root, probs)


def _one(exact: bool):
    return Fraction(1) if exact else 1.0


def build_propagation_matrix(graph: GameGraph) -> PropagationMatrix:
    """Propagation matrix of a supported graph (terminal self-loops added here)."""
    cls = classify(graph)
    if cls.kind is GraphKind.UNSUPPORTED:
        raise UnsupportedGraphError(cls.reason)
    n = graph.num_nodes
    m = np.zeros((n, n))
    for i in range(n):
        deg = graph.out_degree(i)
        if deg == 0:
            m[i, i] = 1.0
        elif deg == 1:
            m[i, graph.successors[i][0]] = 0.5
        else:
            for j in graph.successors[i]:
                m[i, j] = 1.0 / deg
    return PropagationMatrix(matrix=m, nt=graph.nonterminals, t=graph.terminals)


def solve_tree(graph: GameGraph, exact: bool = False) -> GameSolution:
    """Bottom-up value recursion for fans and trees.

    In exact mode all arithmetic is rational; this requires the graph's
    terminal values to have been given exactly.
    """
    cls = classify(graph)
    if not cls.is_tree:
        raise UnsupportedGraphError(f"solve_tree requires a fan or tree, got {cls}")
    if exact and graph.exact_values is None:
        raise UnsupportedGraphError("exact mode requires exact (rational) terminal values")

    u: list = [None] * graph.num_nodes
    for i in graph.terminals:
        u[i] = 1 / graph.exact_values[i] if exact else 1.0 / graph.values[i]

    # children before parents: reversed BFS order from the root
    order: list[int] = []
    root = next(i for i in graph.nonterminals if not graph.predecessors(i))
    queue = [root]
    seen = {root}
    while queue:
        i = queue.pop(0)
        order.append(i)
        for j in graph.successors[i]:
            if j not in seen:
                seen.add(j)
                queue.append(j)
    for i in reversed(order):
        if graph.is_terminal(i):
            continue
        succ = graph.successors[i]
        if len(succ) == 1:
            u[i] = u[succ[0]] / 2
        else:
            total = sum(u[j] for j in succ)
            u[i] = total / len(succ)

    if exact:
        exact_vals = [Fraction(1) / ui for ui in u]
        values = np.array([float(v) for v in exact_vals])
        recips = np.array([float(ui) for ui in u])
        return GameSolution(graph, cls, values, recips, exact_values=exact_vals)
    recips = np.array(u, dtype=float)
    return GameSolution(graph, cls, 1.0 / recips, recips)


def solve_terminating(graph: GameGraph) -> GameSolution:
    """Limiting values on a terminating graph via the absorbing linear system.

    Solves (I - A) u_nt = B u_t with a dense partial-pivoting factorization;
    no matrix inverse is formed.
    """
    cls = classify(graph)
    if not cls.is_terminating:
        raise UnsupportedGraphError(f"solve_terminating requires a terminating graph, got {cls}")
    prop = build_propagation_matrix(graph)
    nt, t = prop.nt, prop.t
    u = np.zeros(graph.num_nodes)
    for i in t:
        u[i] = 1.0 / graph.values[i]
    if nt:
        a, b = prop.A, prop.B
        try:
            u_nt = np.linalg.solve(np.eye(len(nt)) - a, b @ u[list(t)])
        except np.linalg.LinAlgError as exc:  # impossible for valid input
            raise ConvergenceError(
                f"singular system while solving terminating graph: {exc}"
            ) from exc
        u[list(nt)] = u_nt
    if np.any(u <= 0):
        raise ConvergenceError("computed reciprocal values are not strictly positive")
    return GameSolution(graph, cls, 1.0 / u, u)


def _power_iteration(mat: np.ndarray) -> tuple[float, np.ndarray]:
    """Perron pair of a primitive nonnegative matrix.

    Deterministic all-ones start, 1-norm normalization.  Converged when the
    Rayleigh quotient is stable to 1e-13 (relative), the iterate is stable
    to 1e-12 (1-norm), and the eigen-residual is at the rounding floor
    (below 1e-14, or no longer improving).  Returns the best iterate seen.
    """
    n = mat.shape[0]
    x = np.ones(n) / n
    r = float(x @ (mat @ x) / (x @ x))
    best = (np.inf, r, x)
    since_improvement = 0
    for _ in range(_MAX_POWER_ITERATIONS):
        y = mat @ x
        norm = float(np.abs(y).sum())
        if norm == 0.0:
            raise ConvergenceError("power iteration collapsed to zero")
        x_new = y / norm
        r_new = float(x_new @ (mat @ x_new) / (x_new @ x_new))
        drift = float(np.abs(x_new - x).sum())
        residual = float(np.abs(mat @ x_new - r_new * x_new).max())
        x, r_prev, r = x_new, r, r_new
        if residual < best[0]:
            best = (residual, r, x)
            since_improvement = 0
        else:
            since_improvement += 1
        settled = (
            abs(r - r_prev) <= _EIGENVALUE_RTOL * max(abs(r), 1e-300)
            and drift <= _EIGENVECTOR_TOL
        )
        if settled and (residual <= _RESIDUAL_TOL or since_improvement >= _STAGNATION_WINDOW):
            _, r_best, x_best = best
            return r_best, x_best
    raise ConvergenceError(
        f"power iteration did not converge in {_MAX_POWER_ITERATIONS} steps; "
        f"best residual {best[0]:.3e}"
    )


def solve_strongly_connected(graph: GameGraph) -> GameSolution:
    """Perron solve for strongly connected aperiodic graphs.

    Power iteration on M gives the maximal eigenvalue r (in [1/2, 1]) and
    the right eigenvector x; iteration on M^T gives the left eigenvector y.
    The reciprocal value vector is normalized to the truncation limit,
    u = x * sum(y) / (x . y), so the depth-limited values r^{-s} M^s 1
    converge to u without rescaling.  The optimal discount factor equals r.
    """
    cls = classify(graph)
    if cls.kind is not GraphKind.STRONGLY_CONNECTED_APERIODIC:
        raise UnsupportedGraphError(
            f"solve_strongly_connected requires a strongly connected aperiodic graph, got {cls}"
        )
    m = build_propagation_matrix(graph).matrix
    r, x = _power_iteration(m)
    r_left, y = _power_iteration(m.T)
    radius = 0.5 * (r + r_left)
    u = x * (y.sum() / (x @ y))
    if np.any(u <= 0) or np.any(x <= 0) or np.any(y <= 0):
        raise ConvergenceError("Perron vectors are not strictly positive")
    spectral = SpectralData(radius=radius, right_vec=x, left_vec=y, discount=radius)
    return GameSolution(graph, cls, 1.0 / u, u, spectral=spectral)


def solve(graph: GameGraph, exact: bool = False) -> GameSolution:
    """Dispatch to the solver for the graph's class."""
    cls = classify(graph)
    if cls.is_tree:
        return solve_tree(graph, exact=exact)
    if exact:
        raise UnsupportedGraphError("exact mode is supported for fans and trees only")
    if cls.kind is GraphKind.TERMINATING:
        return solve_terminating(graph)
    if cls.kind is GraphKind.STRONGLY_CONNECTED_APERIODIC:
        return solve_strongly_connected(graph)
    raise UnsupportedGraphError(cls.reason)


def truncated_values(graph: GameGraph, steps: int) -> TruncationSeries:
    """Reciprocal values of the s-step games for s = 0..steps.

    Terminating graphs iterate u_{s+1} = M u_s from the leaf vector (ones on
    non-terminal nodes, pre-assigned reciprocals on terminals); strongly
    connected graphs iterate the discount-scaled form (1/r) M from all-ones.
    """
    if steps < 0:
        raise ValueError("step count must be nonnegative")
    solution = solve(graph)
    m = build_propagation_matrix(graph).matrix
    limit = solution.reciprocals
    if solution.graph_class.is_terminating:
        u = np.ones(graph.num_nodes)
        for i in graph.terminals:
            u[i] = 1.0 / graph.values[i]
        scale = 1.0
    else:
        u = np.ones(graph.num_nodes)
        scale = 1.0 / solution.spectral.radius
    vectors = [u.copy()]
    residuals = [float(np.abs(u - limit).max())]
    for _ in range(steps):
        u = scale * (m @ u)
        vectors.append(u.copy())
        residuals.append(float(np.abs(u - limit).max()))
    return TruncationSeries(steps=steps, vectors=vectors, residuals=np.array(residuals))
