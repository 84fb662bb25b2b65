"""Monte Carlo engine for the wagering game.

One play step at node i: the guesser draws a guess from her profile and
wagers the fraction w_i of her fortune, the chooser independently draws the
next node, and the fortune is multiplied by

    1 + (n_i - 1) w_i   correct guess, out-degree n_i >= 2
    1 + w_i             correct guess, out-degree 1
    1 - w_i             incorrect guess.

Reaching a terminal node multiplies the fortune by that node's value and
ends the game.

Randomness is counter-based (Philox 4x32, 10 rounds): the pair of uniforms
consumed at step t of replication k is a pure function of (seed, k, t), so
replications are independent streams and results are bit-identical whether
replications run serially or concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .graph import GameGraph, GraphKind, classify
from .strategy import StrategyProfile
from .values import GameSolution, UnsupportedGraphError

_PHILOX_M0 = np.uint64(0xD2511F53)
_PHILOX_M1 = np.uint64(0xCD9E8D57)
_LO32 = np.uint64(0xFFFFFFFF)
_DEFAULT_MAX_STEPS = 10**5
_CENSOR_WARN_RATE = 0.01


def _philox_block(c0, c1, c2, c3, k0: int, k1: int):
    """One Philox 4x32-10 block per counter entry; counters are uint32 arrays."""
    for _ in range(10):
        prod0 = _PHILOX_M0 * c0.astype(np.uint64)
        prod1 = _PHILOX_M1 * c2.astype(np.uint64)
        hi0 = (prod0 >> np.uint64(32)).astype(np.uint32)
        lo0 = (prod0 & _LO32).astype(np.uint32)
        hi1 = (prod1 >> np.uint64(32)).astype(np.uint32)
        lo1 = (prod1 & _LO32).astype(np.uint32)
        c0, c1, c2, c3 = hi1 ^ c1 ^ np.uint32(k0), lo1, hi0 ^ c3 ^ np.uint32(k1), lo0
        k0 = (k0 + 0x9E3779B9) & 0xFFFFFFFF
        k1 = (k1 + 0xBB67AE85) & 0xFFFFFFFF
    return c0, c1, c2, c3


def step_uniforms(seed: int, reps: np.ndarray, step: int) -> tuple[np.ndarray, np.ndarray]:
    """Two independent uniforms in [0, 1) per replication for a given step.

    The counter is (step, rep_low, rep_high, 0) and the key is the 64-bit
    seed, so every (seed, replication, step) triple owns its own block.
    Each uniform packs 53 bits from two 32-bit output words.
    """
    reps = np.asarray(reps, dtype=np.uint64)
    c0 = np.full(reps.shape, np.uint32(step & 0xFFFFFFFF), dtype=np.uint32)
    c1 = (reps & _LO32).astype(np.uint32)
    c2 = (reps >> np.uint64(32)).astype(np.uint32)
    c3 = np.zeros(reps.shape, dtype=np.uint32)
    seed = seed % (1 << 64)
    w0, w1, w2, w3 = _philox_block(c0, c1, c2, c3, seed & 0xFFFFFFFF, seed >> 32)
    u1 = ((w0 >> np.uint32(5)).astype(np.float64) * 67108864.0
          + (w1 >> np.uint32(6)).astype(np.float64)) / 9007199254740992.0
    u2 = ((w2 >> np.uint32(5)).astype(np.float64) * 67108864.0
          + (w3 >> np.uint32(6)).astype(np.float64)) / 9007199254740992.0
    return u1, u2


@dataclass
class StepRng:
    """Stream position for scalar play: replication ``rep`` of ``seed``."""

    seed: int
    rep: int = 0
    step: int = 0

    def next_pair(self) -> tuple[float, float]:
        u1, u2 = step_uniforms(self.seed, np.array([self.rep]), self.step)
        self.step += 1
        return float(u1[0]), float(u2[0])


@dataclass
class SimulationConfig:
    graph: GameGraph
    profile: StrategyProfile
    start: int
    replications: int
    max_steps: int = _DEFAULT_MAX_STEPS
    seed: int = 0
    discount: Optional[float] = None
    checkpoints: Optional[tuple[int, ...]] = None
    track_occupancy: bool = True

    def __post_init__(self) -> None:
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.graph.is_terminal(self.start):
            raise ValueError("start node must be non-terminal")
        if self.discount is not None and not 0.0 < self.discount <= 1.0:
            raise ValueError("discount must lie in (0, 1]")
        if set(self.profile.wagers) != set(self.graph.nonterminals) or any(
            len(self.profile.chooser[i]) != self.graph.out_degree(i)
            for i in self.graph.nonterminals
        ):
            raise ValueError("strategy profile does not match the graph")


@dataclass
class SimulationResult:
    config: SimulationConfig
    kind: GraphKind
    final_fortunes: np.ndarray
    stopping_times: np.ndarray            # steps played (terminating: hitting time)
    terminal_nodes: np.ndarray            # -1 where censored or non-terminating
    censored: np.ndarray
    checkpoints: dict[int, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)
    occupancy: Optional[np.ndarray] = None  # visit counts per (replication, node)
    warnings: list = field(default_factory=list)

    def summary(self) -> dict:
        graph = self.config.graph
        out: dict = {"replications": int(len(self.final_fortunes))}
        if self.kind is GraphKind.STRONGLY_CONNECTED_APERIODIC:
            out["horizon"] = int(self.config.max_steps)
            out["discount"] = self.config.discount
            out["discounted_checkpoints"] = {}
            for t in sorted(self.checkpoints):
                _, fortune = self.checkpoints[t]
                out["discounted_checkpoints"][str(t)] = {
                    "mean": float(fortune.mean()),
                    "se": _se(fortune),
                }
            if self.occupancy is not None:
                freq = self.occupancy.sum(axis=0) / self.occupancy.sum()
                out["occupancy"] = {
                    lab: float(f) for lab, f in zip(graph.labels, freq)
                }
        else:
            live = ~self.censored
            out["censored"] = int(self.censored.sum())
            fortunes = self.final_fortunes[live]
            times = self.stopping_times[live]
            out["mean_fortune"] = float(fortunes.mean()) if fortunes.size else None
            out["se_fortune"] = _se(fortunes)
            out["mean_stopping_time"] = float(times.mean()) if times.size else None
            out["se_stopping_time"] = _se(times.astype(float))
            hits: dict[str, float] = {}
            if fortunes.size:
                for k in graph.terminals:
                    hits[graph.labels[k]] = float((self.terminal_nodes[live] == k).mean())
            out["terminal_frequencies"] = hits
            counts = np.bincount(times) if times.size else np.array([], dtype=int)
            out["stopping_histogram"] = {
                str(t): int(c) for t, c in enumerate(counts) if c
            }
        if self.warnings:
            out["warnings"] = list(self.warnings)
        return out


def _se(x: np.ndarray) -> Optional[float]:
    if x.size < 2:
        return None
    return float(x.std(ddof=1) / np.sqrt(x.size))


def play_step(
    graph: GameGraph,
    profile: StrategyProfile,
    node: int,
    fortune: float,
    rng: StepRng,
) -> tuple[int, float]:
    """One round at a non-terminal node; returns (next node, new fortune).

    The guess is drawn before the choice from the same counter block; the
    two draws are independent.  Landing on a terminal node multiplies the
    fortune by that node's value.
    """
    succ = graph.successors[node]
    if not succ:
        raise ValueError("cannot play from a terminal node")
    u_guess, u_choice = rng.next_pair()
    guess = succ[_pick(profile.guesser[node], u_guess)]
    choice = succ[_pick(profile.chooser[node], u_choice)]
    n = len(succ)
    w = profile.wagers[node]
    if guess == choice:
        mult = 1.0 + (n - 1) * w if n >= 2 else 1.0 + w
    else:
        mult = 1.0 - w
    fortune *= mult
    if graph.is_terminal(choice):
        fortune *= graph.values[choice]
    return choice, fortune


def _pick(probs: np.ndarray, u: float) -> int:
    cdf = np.cumsum(probs)
    return min(int(np.searchsorted(cdf, u, side="right")), len(probs) - 1)


def run(config: SimulationConfig) -> SimulationResult:
    """Run all replications; deterministic given (seed, config)."""
    kind = classify(config.graph).kind
    if kind is GraphKind.UNSUPPORTED:
        raise UnsupportedGraphError(classify(config.graph).reason)
    if kind is GraphKind.STRONGLY_CONNECTED_APERIODIC:
        if config.discount is None:
            raise ValueError(
                "simulating a strongly connected graph requires a discount factor"
            )
        return _run_fixed_horizon(config)
    return _run_terminating(config, kind)


def _node_tables(graph: GameGraph, profile: StrategyProfile):
    """Per-node successor arrays, CDFs, wagers, and payoff multipliers."""
    tables = {}
    for i in graph.nonterminals:
        succ = np.array(graph.successors[i])
        n = len(succ)
        w = profile.wagers[i]
        win = 1.0 + (n - 1) * w if n >= 2 else 1.0 + w
        tables[i] = (
            succ,
            np.cumsum(profile.guesser[i]),
            np.cumsum(profile.chooser[i]),
            win,
            1.0 - w,
        )
    return tables


def _run_terminating(config: SimulationConfig, kind: GraphKind) -> SimulationResult:
    graph = config.graph
    tables = _node_tables(graph, config.profile)
    terminal_value = np.zeros(graph.num_nodes)
    is_terminal = np.zeros(graph.num_nodes, dtype=bool)
    for k in graph.terminals:
        terminal_value[k] = graph.values[k]
        is_terminal[k] = True

    reps = config.replications
    state = np.full(reps, config.start, dtype=np.int64)
    fortune = np.ones(reps)
    stop_time = np.zeros(reps, dtype=np.int64)
    terminal_node = np.full(reps, -1, dtype=np.int64)
    active_ids = np.arange(reps, dtype=np.int64)

    for t in range(config.max_steps):
        if active_ids.size == 0:
            break
        u_guess, u_choice = step_uniforms(config.seed, active_ids, t)
        nodes = state[active_ids]
        nxt = np.empty(active_ids.size, dtype=np.int64)
        mult = np.empty(active_ids.size)
        for i in np.unique(nodes):
            sel = nodes == i
            succ, g_cdf, p_cdf, win, lose = tables[int(i)]
            gi = np.minimum(np.searchsorted(g_cdf, u_guess[sel], side="right"), len(succ) - 1)
            ci = np.minimum(np.searchsorted(p_cdf, u_choice[sel], side="right"), len(succ) - 1)
            nxt[sel] = succ[ci]
            mult[sel] = np.where(gi == ci, win, lose)
        fortune[active_ids] *= mult
        state[active_ids] = nxt
        absorbed = is_terminal[nxt]
        if absorbed.any():
            done = active_ids[absorbed]
            fortune[done] *= terminal_value[nxt[absorbed]]
            stop_time[done] = t + 1
            terminal_node[done] = nxt[absorbed]
            active_ids = active_ids[~absorbed]

    censored = np.zeros(reps, dtype=bool)
    censored[active_ids] = True
    stop_time[active_ids] = config.max_steps
    result = SimulationResult(
        config=config,
        kind=kind,
        final_fortunes=fortune,
        stopping_times=stop_time,
        terminal_nodes=terminal_node,
        censored=censored,
    )
    rate = censored.mean()
    if rate > _CENSOR_WARN_RATE:
        result.warnings.append(
            f"{rate:.2%} of replications were censored at max_steps={config.max_steps}; "
            "fortune statistics exclude them"
        )
    return result


def _run_fixed_horizon(config: SimulationConfig) -> SimulationResult:
    graph = config.graph
    tables = _node_tables(graph, config.profile)
    reps = config.replications
    discount = float(config.discount)
    checkpoints = tuple(sorted(set(config.checkpoints or (config.max_steps,))))
    if any(t < 1 or t > config.max_steps for t in checkpoints):
        raise ValueError("checkpoints must lie in 1..max_steps")

    state = np.full(reps, config.start, dtype=np.int64)
    discounted = np.ones(reps)     # discount^t * fortune, updated in place
    rep_ids = np.arange(reps, dtype=np.int64)
    occupancy = (
        np.zeros((reps, graph.num_nodes), dtype=np.int64) if config.track_occupancy else None
    )
    records: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    for t in range(config.max_steps):
        u_guess, u_choice = step_uniforms(config.seed, rep_ids, t)
        nxt = np.empty(reps, dtype=np.int64)
        mult = np.empty(reps)
        for i in np.unique(state):
            sel = state == i
            succ, g_cdf, p_cdf, win, lose = tables[int(i)]
            gi = np.minimum(np.searchsorted(g_cdf, u_guess[sel], side="right"), len(succ) - 1)
            ci = np.minimum(np.searchsorted(p_cdf, u_choice[sel], side="right"), len(succ) - 1)
            nxt[sel] = succ[ci]
            mult[sel] = np.where(gi == ci, win, lose)
        discounted *= discount * mult
        state = nxt
        if occupancy is not None:
            np.add.at(occupancy, (rep_ids, state), 1)
        if (t + 1) in checkpoints:
            records[t + 1] = (state.copy(), discounted.copy())

    return SimulationResult(
        config=config,
        kind=GraphKind.STRONGLY_CONNECTED_APERIODIC,
        final_fortunes=discounted,
        stopping_times=np.full(reps, config.max_steps, dtype=np.int64),
        terminal_nodes=np.full(reps, -1, dtype=np.int64),
        censored=np.zeros(reps, dtype=bool),
        checkpoints=records,
        occupancy=occupancy,
    )


# -- best-response search --------------------------------------------------


@dataclass
class ExploitReport:
    """Best achievable values when one side deviates from the profile.

    ``values[i]`` is the deviating side's optimal expected final fortune
    from node i against the fixed opponent; ``gain`` is the largest
    improvement over the game value across nodes (positive means the fixed
    profile is exploitable).  ``deviation`` maps each non-terminal node to
    the deviating action: a successor index (chooser) or a
    (successor, wager) pair (guesser).
    """

    fixed_side: str
    values: np.ndarray
    gain: float
    deviation: dict[int, object]
    converged: bool


def exploit_search(
    graph: GameGraph,
    solution: GameSolution,
    fixed_side: str,
    grid: int = 1001,
    beta: float = 1.0,
    profile: Optional[StrategyProfile] = None,
) -> ExploitReport:
    """Search pure positional deviations against one side's fixed strategy.

    Uses exact expectation recursion (no sampling): dynamic-programming
    sweeps with the engine values as the tail, iterated to a fixed point.
    The chooser deviates over pure successor choices; the guesser over
    (successor, wager) pairs with wagers on a uniform grid in [0, 1].
    The fixed side plays the limiting strategy at ``beta`` unless an
    explicit (possibly off-equilibrium) profile is supplied; the gain is
    always reported relative to the game value.
    """
    from .strategy import build_profile

    if fixed_side not in ("chooser", "guesser"):
        raise ValueError("fixed_side must be 'chooser' or 'guesser'")
    if not solution.graph_class.is_terminating:
        raise UnsupportedGraphError("exploit search requires a terminating graph")
    if profile is None:
        profile = build_profile(solution, graph, beta=beta)
    values = solution.values.copy()
    wagers = np.linspace(0.0, 1.0, grid)
    best_action: dict[int, object] = {}
    max_sweeps = 10 * graph.num_nodes + 50
    converged = False
    for _ in range(max_sweeps):
        new = values.copy()
        for i in graph.nonterminals:
            succ = graph.successors[i]
            n = len(succ)
            cont = values[list(succ)]
            if fixed_side == "guesser":
                # chooser picks the successor minimizing her expected fortune
                g = profile.guesser[i]
                w = profile.wagers[i]
                win = 1.0 + (n - 1) * w if n >= 2 else 1.0 + w
                per_move = (g * win + (1.0 - g) * (1.0 - w)) * cont
                k = int(np.argmin(per_move))
                new[i] = per_move[k]
                best_action[i] = succ[k]
            else:
                # guesser picks (guess, wager) maximizing expected fortune
                p = profile.chooser[i]
                base = float(p @ cont)
                if n == 1:
                    # forced move: best wager is the largest on the grid
                    w = wagers[-1]
                    new[i] = (1.0 + w) * cont[0]
                    best_action[i] = (succ[0], float(w))
                    continue
                # value(j, w) = (1-w) * base + w * n * p_j * cont_j
                stake = n * p * cont
                j = int(np.argmax(stake))
                vals_w = (1.0 - wagers) * base + wagers * stake[j]
                k = int(np.argmax(vals_w))
                new[i] = vals_w[k]
                best_action[i] = (succ[j], float(wagers[k]))
        if float(np.abs(new - values).max()) <= 1e-14 * max(1.0, float(np.abs(new).max())):
            values = new
            converged = True
            break
        values = new
    if fixed_side == "guesser":
        gain = float((solution.values - values)[list(graph.nonterminals)].max(initial=0.0))
    else:
        gain = float((values - solution.values)[list(graph.nonterminals)].max(initial=0.0))
    return ExploitReport(
        fixed_side=fixed_side,
        values=values,
        gain=gain,
        deviation=best_action,
        converged=converged,
    )
