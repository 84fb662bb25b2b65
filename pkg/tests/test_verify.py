"""Verification oracles: certificates, brute-force brackets, audits."""

import numpy as np
import pytest

from pathwager import (
    StrategyProfile,
    build_graph,
    build_profile,
    build_stopping_variant,
    build_window_game,
    exploit_search,
    solve,
)
from pathwager.verify import (
    audit_convergence,
    brute_force_value,
    certify_fan,
    certify_graph,
)


def fan24():
    return build_graph(["root", "a", "b"], [("root", "a"), ("root", "b")], {"a": 2, "b": 4})


def test_certify_fan_passes_at_optimum():
    g = fan24()
    sol = solve(g)
    for beta in (0.0, 0.5, 1.0):
        cert = certify_fan([2, 4], build_profile(sol, g, beta=beta))
        assert cert.passed, beta
        assert cert.max_chooser_gain <= 1e-12
        assert cert.max_guesser_gain <= 1e-12


def test_certify_fan_flags_bad_wager():
    # right guess support, wrong wager: moving to the high-value leaf pays
    # only 4 * (1 - 0.9) = 0.4, far below the value
    bad = StrategyProfile(
        beta=1.0,
        chooser={0: np.array([2 / 3, 1 / 3])},
        guesser={0: np.array([1.0, 0.0])},
        wagers={0: 0.9},
        p_min={0: 1 / 3},
    )
    cert = certify_fan([2, 4], bad)
    assert not cert.passed
    assert cert.max_chooser_gain > 2.0
    per_move = cert.checks[0].detail["per_move"]
    assert abs(per_move[1] - 0.4) < 1e-12


def test_certify_fan_uniform_always_passes():
    g = build_graph(["r", "a", "b", "c"], [("r", x) for x in "abc"], {x: 5 for x in "abc"})
    sol = solve(g)
    for beta in (0.0, 0.3, 1.0):
        cert = certify_fan([5, 5, 5], build_profile(sol, g, beta=beta))
        assert cert.passed


def test_certify_fan_validates_input():
    g = fan24()
    profile = build_profile(solve(g), g)
    with pytest.raises(ValueError):
        certify_fan([2], profile)
    with pytest.raises(ValueError):
        certify_fan([2, 4, 8], profile)


def test_certificates_on_corpus_fans(fan_corpus):
    for entry in fan_corpus:
        g = entry.graph
        sol = solve(g)
        leaf_values = [g.values[j] for j in g.successors[g.nonterminals[0]]]
        for beta in (0.0, 0.5, 1.0):
            cert = certify_fan(leaf_values, build_profile(sol, g, beta=beta))
            assert cert.passed, (entry.name, beta)


def test_perturbation_sensitivity_on_fans(fan_corpus):
    for entry in fan_corpus:
        g = entry.graph
        root = g.nonterminals[0]
        leaf_values = [g.values[j] for j in g.successors[root]]
        if len(set(leaf_values)) < 2:
            continue
        sol = solve(g)
        base = build_profile(sol, g, beta=1.0)
        for pos in range(len(leaf_values)):
            for delta in (0.01, -0.01):
                skew = base.chooser[root].copy()
                if skew[pos] + delta <= 0:
                    continue
                skew[pos] += delta
                skew /= skew.sum()
                bad = StrategyProfile(beta=1.0, chooser={root: skew},
                                      guesser=base.guesser, wagers=base.wagers,
                                      p_min=base.p_min)
                report = exploit_search(g, sol, fixed_side="chooser", profile=bad)
                assert report.gain > 1e-4, (entry.name, pos, delta)


def test_brute_force_collapses_on_fans():
    bounds = brute_force_value(fan24(), wager_grid=1001, depth_limit=5)
    assert abs(bounds.lower[0] - 8 / 3) < 1e-12
    assert abs(bounds.upper[0] - 8 / 3) < 1e-12
    assert bounds.converged


def test_brute_force_height_two_tree():
    g = build_graph(
        ["r", "x", "y", "a", "b", "c", "d"],
        [("r", "x"), ("r", "y"), ("x", "a"), ("x", "b"), ("y", "c"), ("y", "d")],
        {"a": 2, "b": 4, "c": 2, "d": 4},
    )
    bounds = brute_force_value(g, wager_grid=1001, depth_limit=60)
    assert bounds.width < 1e-6
    assert bounds.lower[0] - 1e-12 <= 8 / 3 <= bounds.upper[0] + 1e-12


def test_brute_force_loop_graph_geometric():
    g = build_graph(["1", "t"], [("1", "1"), ("1", "t")], {"t": 1})
    bounds = brute_force_value(g, wager_grid=1001, depth_limit=60)
    assert bounds.width < 1e-9
    assert bounds.lower[0] - 1e-12 <= 1.0 <= bounds.upper[0] + 1e-12


def test_brute_force_brackets_contain_engine_values(terminating_corpus):
    for entry in terminating_corpus:
        g = entry.graph
        if g.num_nodes > 8:
            continue
        sol = solve(g)
        bounds = brute_force_value(g, wager_grid=1001, depth_limit=60)
        slack = 1e-9 * (1 + np.abs(sol.values).max())
        assert np.all(sol.values >= bounds.lower - slack), entry.name
        assert np.all(sol.values <= bounds.upper + slack), entry.name


def test_brute_force_requires_terminating():
    with pytest.raises(Exception):
        brute_force_value(build_window_game(2, 1))


def test_audit_convergence_fan_is_exact():
    cert = audit_convergence(fan24(), steps=1)
    assert cert.passed
    assert cert.residual < 1e-15


def test_audit_convergence_window_game():
    cert = audit_convergence(build_window_game(2, 1), steps=200)
    assert cert.passed
    assert cert.residual < 1e-8
    positive = next(c for c in cert.checks if c.name == "limit_strictly_positive")
    assert positive.passed


def test_audit_convergence_stopping_variant_blocks():
    cert = audit_convergence(build_stopping_variant(3), steps=400)
    assert cert.passed
    block = next(c for c in cert.checks if c.name == "transient_block_vanishes")
    assert block.passed


def test_audit_convergence_across_corpus(corpus):
    for entry in corpus:
        cert = audit_convergence(entry.graph, steps=400)
        assert cert.passed, (entry.name, cert.residual)


def test_certify_graph_composite(terminating_corpus, sc_corpus):
    for entry in terminating_corpus[:6] + sc_corpus[:3]:
        sol = solve(entry.graph)
        cert = certify_graph(entry.graph, sol, grid=201, depth=40)
        assert cert.passed, entry.name
        doc = cert.to_dict()
        assert doc["passed"] and doc["checks"]
