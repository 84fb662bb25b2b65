"""Oracle game generation: automata, languages, and closed-form references."""

import math

import numpy as np
import pytest
import scipy.optimize

import support
from pathwager import (
    GraphKind,
    build_forbidden_pattern_game,
    build_profile,
    build_stopping_variant,
    build_window_game,
    chooser_transition_matrix,
    classify,
    gn1_reference,
    invariant_measure,
    solve,
    stop_probability_formula,
)
from pathwager.oracle import OracleBuildError, OracleSpec, parse_pattern_lines

PHI = (1 + math.sqrt(5)) / 2


def brentq_lambda(n):
    return scipy.optimize.brentq(lambda x: x**n - x ** (n - 1) - 1, 1.0, 2.0, xtol=1e-15)


def test_window_two_one_topology():
    g = build_window_game(2, 1)
    assert g.labels == ("1", "2")
    assert g.successors == ((0, 1), (0,))
    assert g.edge_labels == {(0, 0): "truth", (0, 1): "lie", (1, 0): "truth"}


def test_window_one_lie_family_is_cycle_plus_loop():
    for n in range(2, 8):
        g = build_window_game(n, 1)
        assert g.num_nodes == n
        assert g.successors[0] == (0, 1)
        for i in range(1, n - 1):
            assert g.successors[i] == (i + 1,)
        assert g.successors[n - 1] == (0,)


def test_window_zero_budget_single_loop():
    for n in (1, 2, 5):
        g = build_window_game(n, 0)
        assert g.num_nodes == 1
        assert g.successors == ((0,),)
        assert g.edge_labels == {(0, 0): "truth"}


def test_window_rejects_bad_parameters():
    with pytest.raises(OracleBuildError):
        build_window_game(0, 0)
    with pytest.raises(OracleBuildError):
        build_window_game(3, 3)
    with pytest.raises(OracleBuildError):
        build_window_game(3, -1)


def test_window_language_matches_brute_force():
    for n in range(1, 5):
        for k in range(0, n):
            g = build_window_game(n, k)
            got = support.realizable_strings(g, 12)
            want = support.legal_window_strings(n, k, 12)
            assert got == want, (n, k)


def test_minimization_never_grows_states():
    # raw reachable histories bound the minimized count
    for n in range(1, 6):
        for k in range(0, n):
            g = build_window_game(n, k)
            assert g.num_nodes <= 2 ** max(n - 1, 0)


def test_pattern_game_equals_window_game():
    g = build_forbidden_pattern_game(["LL"])
    w = build_window_game(2, 1)
    assert support.realizable_strings(g, 12) == support.realizable_strings(w, 12)


def test_pattern_game_single_truth_loop():
    g = build_forbidden_pattern_game(["L"])
    assert g.num_nodes == 1
    assert g.edge_labels == {(0, 0): "truth"}


def test_pattern_game_two_patterns_language():
    patterns = ["LL", "LTL"]
    g = build_forbidden_pattern_game(patterns)
    got = support.realizable_strings(g, 12)
    want = support.legal_pattern_strings(patterns, 12)
    assert got == want


def test_pattern_game_rejects_unreduced_sets():
    with pytest.raises(OracleBuildError, match="reduced"):
        build_forbidden_pattern_game(["L", "LL"])


def test_pattern_game_rejects_impossible_sets():
    with pytest.raises(OracleBuildError, match="forbids everything"):
        build_forbidden_pattern_game(["T", "L"])


def test_pattern_game_rejects_unsupported_structure():
    # avoiding "LT" strands play in a lie-only loop: not strongly connected
    with pytest.raises(OracleBuildError):
        build_forbidden_pattern_game(["LT"])


def test_parse_pattern_lines():
    assert parse_pattern_lines("L L\nT L T\n") == ["LL", "TLT"]
    with pytest.raises(OracleBuildError):
        parse_pattern_lines("L X\n")
    with pytest.raises(OracleBuildError):
        parse_pattern_lines("\n\n")


def test_oracle_spec_builders(tmp_path):
    assert OracleSpec(kind="window", n=3, k=1).build().num_nodes == 3
    assert OracleSpec(kind="window-stop", n=3).build().num_nodes == 4
    assert OracleSpec(kind="patterns", patterns=("LL",)).build().num_nodes == 2
    with pytest.raises(OracleBuildError):
        OracleSpec(kind="nope").build()


def test_stopping_variant_structure_and_probabilities():
    g = build_stopping_variant(3)
    assert classify(g).kind is GraphKind.TERMINATING
    stop = g.index_of("stop")
    assert g.values[stop] == 1.0
    # no stop move from the just-lied node
    assert stop not in g.successors[1]
    sol = solve(g)
    p = chooser_transition_matrix(sol, g)
    assert abs(p[0, stop] - 7 / 15) < 1e-12
    assert p[1, stop] == 0.0
    assert abs(p[2, stop] - 7 / 12) < 1e-12


def test_stopping_variant_formula_range():
    assert abs(stop_probability_formula(2, 1) - 0.5) < 1e-15
    assert stop_probability_formula(5, 2) == 0.0
    with pytest.raises(ValueError):
        stop_probability_formula(3, 4)
    with pytest.raises(OracleBuildError):
        build_stopping_variant(1)


def test_stopping_variant_matches_formula():
    for n in range(2, 11):
        g = build_stopping_variant(n)
        sol = solve(g)
        p = chooser_transition_matrix(sol, g)
        stop = g.index_of("stop")
        for i in range(1, n + 1):
            want = stop_probability_formula(n, i)
            assert abs(p[g.index_of(str(i)), stop] - want) <= 1e-10, (n, i)


def test_stopping_probability_limit():
    g = build_stopping_variant(20)
    sol = solve(g)
    p = chooser_transition_matrix(sol, g)
    assert abs(p[0, g.index_of("stop")] - 4 / 9) < 0.01


def test_reference_root_and_monotonicity():
    ref = gn1_reference(2)
    assert abs(ref.lam - PHI) < 1e-12
    lams = [gn1_reference(n).lam for n in range(2, 31)]
    assert all(b < a for a, b in zip(lams, lams[1:]))
    assert lams[-1] > 1.0
    with pytest.raises(ValueError):
        gn1_reference(1)


def test_reference_internal_identities():
    for n in range(2, 11):
        ref = gn1_reference(n)
        assert abs(ref.lam - brentq_lambda(n)) < 1e-12, n
        assert 1.0 <= ref.lam <= 2.0
        assert abs(ref.truth_prob + ref.lie_prob - 1.0) <= 1e-12
        assert abs(ref.invariant.sum() - 1.0) <= 1e-12
        # eigen identities against the cycle-plus-loop adjacency
        a = np.zeros((n, n))
        a[0, 0] = a[0, 1] = 1.0
        for i in range(1, n - 1):
            a[i, i + 1] = 1.0
        a[n - 1, 0] = 1.0
        assert np.abs(a @ ref.right_vec - ref.lam * ref.right_vec).max() < 1e-9, n
        assert np.abs(a.T @ ref.left_vec - ref.lam * ref.left_vec).max() < 1e-9, n


def test_solver_reproduces_reference_family():
    for n in range(2, 11):
        g = build_window_game(n, 1)
        sol = solve(g)
        ref = gn1_reference(n)
        assert abs(sol.spectral.radius - ref.radius) < 1e-10, n
        profile = build_profile(sol, g, beta=1.0)
        assert abs(profile.chooser[0][0] - ref.truth_prob) < 1e-10, n
        assert abs(profile.chooser[0][1] - ref.lie_prob) < 1e-10, n
        assert abs(profile.wagers[0] - ref.wager) < 1e-10, n
        assert np.allclose(profile.guesser[0], [1.0, 0.0], atol=1e-10)
        mu = invariant_measure(sol)
        assert np.abs(mu - ref.invariant).max() < 1e-10, n
