"""Command-line surface: solve, strategy, analyze, simulate, generate, verify,
play, export-dot.

Reports are JSON (CSV where it makes sense) and every report embeds a run
manifest: the resolved configuration, input digests, tool version, and
seed, so equal manifests reproduce equal outputs.  Exit codes: 0 success,
1 validation error, 2 verification failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .graph import GameGraph, GraphError, GraphKind, classify, parse_graph, serialize_graph, to_dot
from .markov import analyze
from .oracle import OracleBuildError, parse_oracle_spec
from .simulate import SimulationConfig, StepRng, run
from .strategy import StrategyError, build_profile
from .values import ConvergenceError, UnsupportedGraphError, solve, truncated_values
from .verify import certify_graph

SEED_ENV_VAR = "PATHWAGER_SEED"


@dataclass
class RunManifest:
    subcommand: str
    config: dict
    input_digests: dict
    version: str = __version__
    seed: int | None = None
    timestamp: str = field(
        default_factory=lambda: datetime.now(timezone.utc).isoformat()
    )


def _digest(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        h.update(fh.read())
    return h.hexdigest()


def _load_graph(path: str) -> GameGraph:
    with open(path) as fh:
        return parse_graph(fh.read())


def _resolve_seed(args) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise GraphError(f"{SEED_ENV_VAR} must be an integer, got {env!r}")
    return 0


def _manifest(args, subcommand: str, extra: dict | None = None) -> RunManifest:
    config = {
        k: v for k, v in vars(args).items() if k not in ("func",) and v is not None
    }
    if extra:
        config.update(extra)
    digests = {}
    graph_path = config.get("graph")
    if graph_path and os.path.exists(graph_path):
        digests[graph_path] = _digest(graph_path)
    return RunManifest(
        subcommand=subcommand,
        config={k: v for k, v in sorted(config.items())},
        input_digests=digests,
        seed=config.get("seed"),
    )


def _emit(report: dict, args) -> None:
    text = json.dumps(report, indent=2, default=_jsonable)
    if getattr(args, "out", None):
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _fmt(x: float) -> str:
    return f"{x:.12g}"


# -- subcommand handlers ----------------------------------------------------


def _cmd_solve(args) -> int:
    graph = _load_graph(args.graph)
    solution = solve(graph, exact=args.exact)
    report = solution.to_dict()
    if args.truncate is not None:
        series = truncated_values(graph, args.truncate)
        report["residuals"] = series.residuals.tolist()
    report["manifest"] = asdict(_manifest(args, "solve"))
    _emit(report, args)
    return 0


def _cmd_strategy(args) -> int:
    graph = _load_graph(args.graph)
    solution = solve(graph)
    profile = build_profile(solution, graph, beta=args.beta)
    report = profile.to_dict(graph)
    report["manifest"] = asdict(_manifest(args, "strategy"))
    _emit(report, args)
    return 0


def _cmd_analyze(args) -> int:
    graph = _load_graph(args.graph)
    solution = solve(graph)
    report_obj = analyze(solution, t_max=args.tmax)
    if args.format == "csv":
        if report_obj.stopping is None:
            raise UnsupportedGraphError("CSV output is for stopping-time series (terminating graphs)")
        lines = ["t," + ",".join(graph.labels[i] for i in graph.nonterminals)]
        for t, row in enumerate(report_obj.stopping.stop_dist, start=1):
            lines.append(f"{t}," + ",".join(_fmt(x) for x in row))
        text = "\n".join(lines)
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(text + "\n")
        else:
            print(text)
        return 0
    report = report_obj.to_dict(graph)
    report["manifest"] = asdict(_manifest(args, "analyze"))
    _emit(report, args)
    return 0


def _cmd_simulate(args) -> int:
    graph = _load_graph(args.graph)
    solution = solve(graph)
    profile = build_profile(solution, graph, beta=args.beta)
    seed = _resolve_seed(args)
    start = graph.index_of(args.start) if args.start else graph.nonterminals[0]
    kind = classify(graph).kind
    discount = None
    horizon = args.horizon
    if kind is GraphKind.STRONGLY_CONNECTED_APERIODIC:
        discount = solution.spectral.discount
        if horizon is None:
            horizon = 100  # exact horizon; every replication runs this long
    elif horizon is None:
        horizon = 10**5  # censoring cap; replications stop at absorption
    config = SimulationConfig(
        graph=graph,
        profile=profile,
        start=start,
        replications=args.reps,
        max_steps=horizon,
        seed=seed,
        discount=discount,
    )
    result = run(config)
    if args.format == "csv":
        lines = ["rep,stopping_time,terminal,final_fortune,censored"]
        for rep in range(args.reps):
            term = result.terminal_nodes[rep]
            lines.append(
                ",".join(
                    [
                        str(rep),
                        str(int(result.stopping_times[rep])),
                        graph.labels[term] if term >= 0 else "",
                        _fmt(float(result.final_fortunes[rep])),
                        str(int(result.censored[rep])),
                    ]
                )
            )
        text = "\n".join(lines)
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(text + "\n")
        else:
            print(text)
        return 0
    report = {
        "summary": result.summary(),
        "start": graph.labels[start],
        "value_at_start": float(solution.values[start]),
        "manifest": asdict(_manifest(args, "simulate", {"seed": seed})),
    }
    _emit(report, args)
    return 0


def _cmd_generate(args) -> int:
    spec = parse_oracle_spec(args.oracle)
    graph = spec.build()
    text = serialize_graph(graph)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 0


def _cmd_verify(args) -> int:
    graph = _load_graph(args.graph)
    solution = solve(graph)
    betas = (args.beta,) if args.beta is not None else (0.0, 0.5, 1.0)
    certificate = certify_graph(
        graph, solution, betas=betas, grid=args.grid, depth=args.depth
    )
    report = certificate.to_dict()
    report["manifest"] = asdict(_manifest(args, "verify"))
    _emit(report, args)
    return 0 if certificate.passed else 2


def _cmd_export_dot(args) -> int:
    graph = _load_graph(args.graph)
    profile = None
    if args.beta is not None:
        solution = solve(graph)
        profile = build_profile(solution, graph, beta=args.beta)
    text = to_dot(graph, profile)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 0


# -- interactive play ---------------------------------------------------------


def play_repl(
    graph: GameGraph,
    human_side: str,
    beta: float = 1.0,
    seed: int = 0,
    in_stream=None,
    out_stream=None,
    max_rounds: int | None = None,
) -> dict:
    """Line-oriented match against the optimal opponent.

    Protocol per round: the wager is announced, the guess is committed
    (hidden), the chooser moves, the guess is revealed, and the payoff is
    applied.  Entering "quit" (or closing the input) ends the session;
    illegal entries re-prompt.  Returns the transcript (also printed),
    which carries the seed so a session can be replayed.
    """
    if human_side not in ("chooser", "guesser"):
        raise ValueError("human side must be 'chooser' or 'guesser'")
    stdin = in_stream if in_stream is not None else sys.stdin
    stdout = out_stream if out_stream is not None else sys.stdout

    def say(msg: str) -> None:
        print(msg, file=stdout)

    def ask(prompt: str) -> str:
        print(prompt, end="", file=stdout, flush=True)
        line = stdin.readline()
        if not line:
            raise _QuitSession
        line = line.strip()
        if line.lower() in ("q", "quit", "exit"):
            raise _QuitSession
        return line

    solution = solve(graph)
    profile = build_profile(solution, graph, beta=beta)
    rng = StepRng(seed=seed)
    node = graph.nonterminals[0]
    fortune = 1.0
    rounds: list[dict] = []
    say(f"you are the {human_side}; play starts at node {graph.labels[node]!r} with $1")

    while True:
        if max_rounds is not None and len(rounds) >= max_rounds:
            break
        succ = graph.successors[node]
        n = len(succ)
        names = [graph.labels[j] for j in succ]
        say(f"\nnode {graph.labels[node]!r}: moves {names}, fortune {_fmt(fortune)}")

        u_guess, u_choice = rng.next_pair()
        try:
            if human_side == "guesser":
                wager = _ask_wager(ask, say)
                guess = _ask_move(ask, say, graph, succ, "your guess: ")
                say(f"wager announced: {_fmt(wager)}")
                cdf = np.cumsum(profile.chooser[node])
                choice = succ[min(int(np.searchsorted(cdf, u_choice, side="right")), n - 1)]
                say(f"chooser moves to {graph.labels[choice]!r}")
            else:
                wager = profile.wagers[node]
                say(f"guesser announces wager {_fmt(wager)} (guess is written down)")
                cdf = np.cumsum(profile.guesser[node])
                guess = succ[min(int(np.searchsorted(cdf, u_guess, side="right")), n - 1)]
                choice = _ask_move(ask, say, graph, succ, "your move: ")
                say(f"guesser's committed guess was {graph.labels[guess]!r}")
        except _QuitSession:
            say("session ended")
            break

        correct = guess == choice
        if correct:
            mult = 1.0 + (n - 1) * wager if n >= 2 else 1.0 + wager
        else:
            mult = 1.0 - wager
        fortune *= mult
        say(f"guess {'correct' if correct else 'incorrect'}: fortune x {_fmt(mult)} -> {_fmt(fortune)}")
        rounds.append(
            {
                "node": graph.labels[node],
                "wager": wager,
                "guess": graph.labels[guess],
                "move": graph.labels[choice],
                "multiplier": mult,
                "fortune": fortune,
            }
        )
        node = choice
        if graph.is_terminal(node):
            fortune *= graph.values[node]
            say(
                f"terminal node {graph.labels[node]!r}: fortune x {_fmt(graph.values[node])}"
                f" -> final fortune {_fmt(fortune)}"
            )
            break

    transcript = {
        "seed": seed,
        "beta": beta,
        "human_side": human_side,
        "rounds": rounds,
        "final_fortune": fortune,
    }
    say(f"\nfinal fortune: {_fmt(fortune)}")
    return transcript


class _QuitSession(Exception):
    pass


def _ask_wager(ask, say) -> float:
    while True:
        raw = ask("your wager fraction [0,1]: ")
        try:
            w = float(raw)
        except ValueError:
            say(f"not a number: {raw!r}")
            continue
        if 0.0 <= w <= 1.0:
            return w
        say("wager must lie in [0, 1]")


def _ask_move(ask, say, graph: GameGraph, succ, prompt: str) -> int:
    names = {graph.labels[j]: j for j in succ}
    while True:
        raw = ask(prompt)
        if raw in names:
            return names[raw]
        say(f"illegal move {raw!r}; legal moves: {sorted(names)}")


def _cmd_play(args) -> int:
    graph = _load_graph(args.graph)
    seed = _resolve_seed(args)
    transcript = play_repl(graph, args.side, beta=args.beta, seed=seed)
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(transcript, fh, indent=2)
            fh.write("\n")
    return 0


# -- argument parsing ---------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pathwager",
        description="solve, analyze, simulate, and generate path-guessing wagering games",
    )
    parser.add_argument("--version", action="version", version=f"pathwager {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p, graph_required=True):
        p.add_argument("--graph", required=graph_required, help="game graph JSON file")
        p.add_argument("--out", help="write the report to this file instead of stdout")
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--seed", type=int, default=None,
                       help=f"RNG seed (fallback: ${SEED_ENV_VAR}, then 0)")

    p = sub.add_parser("solve", help="compute node values")
    common(p)
    p.add_argument("--exact", action="store_true", help="rational arithmetic (fans/trees)")
    p.add_argument("--truncate", type=int, default=None, metavar="S",
                   help="also report depth-limited value residuals up to S steps")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("strategy", help="optimal strategy profile")
    common(p)
    p.add_argument("--beta", type=float, default=1.0, help="risk parameter in [0,1]")
    p.set_defaults(func=_cmd_strategy)

    p = sub.add_parser("analyze", help="Markov dynamics under optimal play")
    common(p)
    p.add_argument("--tmax", type=int, default=500, help="stopping-time horizon")
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("simulate", help="Monte Carlo play")
    common(p)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--reps", type=int, default=10000)
    p.add_argument("--horizon", type=int, default=None,
                   help="max steps; default 1e5 on terminating graphs (a censoring "
                        "cap), 100 on strongly connected ones (an exact horizon)")
    p.add_argument("--start", default=None, help="start node label")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("generate", help="generate a lying-oracle game graph")
    p.add_argument("--oracle", required=True,
                   help="window:N,K | patterns:FILE | window-stop:N")
    p.add_argument("--out", help="output graph file")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("verify", help="equilibrium and convergence certificates")
    common(p)
    p.add_argument("--beta", type=float, default=None,
                   help="certify a single beta (default: 0, 0.5, 1)")
    p.add_argument("--depth", type=int, default=60)
    p.add_argument("--grid", type=int, default=1001)
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("play", help="interactive match against the optimal opponent")
    common(p)
    p.add_argument("--as", dest="side", choices=("chooser", "guesser"), required=True)
    p.add_argument("--beta", type=float, default=1.0)
    p.set_defaults(func=_cmd_play)

    p = sub.add_parser("export-dot", help="Graphviz rendering of a game graph")
    common(p)
    p.add_argument("--beta", type=float, default=None,
                   help="annotate with the optimal profile at this beta")
    p.set_defaults(func=_cmd_export_dot)
    return parser


def dispatch(argv=None) -> int:
    """Run one subcommand; returns the exit code (0 ok, 1 input error, 2 verify fail)."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on bad flags; that code is ours
        return 0 if exc.code == 0 else 1
    try:
        return args.func(args)
    except (
        GraphError,
        UnsupportedGraphError,
        StrategyError,
        OracleBuildError,
        ConvergenceError,
        FileNotFoundError,
        ValueError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch())
