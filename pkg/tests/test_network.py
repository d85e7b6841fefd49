import itertools
import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from hetnet.exceptions import HypothesisError
from hetnet.network import (
    SENTINEL_INFINITE,
    EquilibriumSpec,
    derive_constants,
    load_network,
    make_network,
    network_from_dict,
    principal_sequence,
    resonances,
    validate_hypotheses,
)


def three_node(mu2_contracting=0.9):
    eqs = [
        EquilibriumSpec("p1", (1.0,), (1.7, 2.9)),
        EquilibriumSpec("p2", (1.0,), (mu2_contracting, 3.1)),
        EquilibriumSpec("p3", (1.0,), (1.9, 3.3)),
    ]
    return make_network(eqs, [("p1", "p2"), ("p2", "p3"), ("p3", "p1")])


@pytest.mark.parametrize(
    "exp, con, want",
    [
        ((2, 1), (3, 4), (2.0, 0.5, 1.5, 1.25)),
        ((3, 2, 1), (4, 5), (1.5, 2 / 3, 4 / 3, 7 / 6)),
    ],
)
def test_derive_constants_by_substitution(exp, con, want):
    c = derive_constants(EquilibriumSpec("p", exp, con))
    assert (c.alpha, c.beta, c.mu, c.rho) == pytest.approx(want, rel=1e-15)


def test_single_expanding_direction_has_infinite_alpha():
    c = derive_constants(EquilibriumSpec("p", (1,), (2,)))
    assert c.alpha == SENTINEL_INFINITE and math.isinf(c.alpha)
    assert c.beta == 0.0
    assert (c.mu, c.rho) == (2.0, 1.5)


@pytest.mark.parametrize("exp, con", [((), (1,)), ((1, 2), (3,)), ((1,), (3, 2)), ((-1,), (2,)), ((0.0,), (2,))])
def test_derive_constants_rejects_malformed_lists(exp, con):
    with pytest.raises(ValueError):
        derive_constants(EquilibriumSpec("p", exp, con))


def test_valid_three_node_cycle_passes():
    rep = validate_hypotheses(three_node(mu2_contracting=1.3))
    assert rep.passed and rep.violations == []
    assert set(rep.saddle_values) == {"p1", "p2", "p3"}


def test_small_saddle_value_is_tagged_h4_on_that_node():
    rep = validate_hypotheses(three_node(mu2_contracting=0.9))
    assert not rep.passed
    assert [(t, d.split(":")[0]) for t, d in rep.violations] == [("H4", "p2")]


def test_zero_eigenvalue_is_tagged_h1():
    net = make_network(
        [EquilibriumSpec("p1", (1.0,), (0.0, 2.0)), EquilibriumSpec("p2", (1.0,), (2.0, 3.0))],
        [("p1", "p2"), ("p2", "p1")],
    )
    assert "H1" in validate_hypotheses(net).tags()


def test_missing_strong_connection_is_tagged_h3():
    net = three_node(1.3)
    broken = make_network(net.equilibria, [("p1", "p2"), ("p3", "p1")])
    rep = validate_hypotheses(broken)
    assert rep.tags() == {"H3"}
    assert any("p2->p3" in d for _, d in rep.violations)


def test_mixed_dimensions_and_resonance_are_tagged_h2():
    net = make_network(
        [EquilibriumSpec("p1", (1.0,), (2.0, 3.0)), EquilibriumSpec("p2", (1.0,), (2.0,))],
        [("p1", "p2"), ("p2", "p1")],
    )
    assert "H2" in validate_hypotheses(net).tags()
    res = EquilibriumSpec("p", (1.0,), (2.0, 3.0))  # 1 + (-3) == -2
    assert resonances(res)


def test_non_resonant_spectrum_passes_screen():
    assert resonances(EquilibriumSpec("p", (1.0,), (1.7, 2.9))) == []


def test_principal_sequence_follows_strong_edges_only():
    net = three_node(1.3)
    assert principal_sequence(net) == ["p1", "p2", "p3"]
    with_weak = make_network(
        [EquilibriumSpec("p1", (1.0, 0.5), (1.7,)), *net.equilibria[1:]],
        [("p1", "p2"), ("p2", "p3"), ("p3", "p1"), ("p1", "p3", 2)],
    )
    assert principal_sequence(with_weak) == ["p1", "p2", "p3"]


def test_broken_chain_raises_h3():
    net = three_node(1.3)
    broken = make_network(net.equilibria, [("p1", "p2"), ("p3", "p1")])
    with pytest.raises(HypothesisError) as info:
        principal_sequence(broken)
    assert info.value.tag == "H3"


def test_shorter_principal_cycle_gets_a_note():
    eqs = [EquilibriumSpec(f"p{k}", (1.0,), (1.7, 2.9)) for k in range(1, 4)]
    net = make_network(eqs, [("p1", "p2"), ("p2", "p1"), ("p2", "p3", 1)], principal_length=2)
    rep = validate_hypotheses(net)
    assert rep.notes


def test_json_round_trip_and_fingerprint(tmp_path, configs):
    net = load_network(configs / "mixed_u2_network.json")
    again = network_from_dict(json.loads(json.dumps(net.to_dict())))
    assert again == net
    assert again.fingerprint() == net.fingerprint()
    assert len(net.fingerprint()) == 64


rates = st.lists(st.floats(0.05, 20.0), min_size=1, max_size=4, unique=True)


@given(rates, rates)
def test_rho_is_midpoint_of_one_and_mu(exp, con):
    eq = EquilibriumSpec("p", tuple(sorted(exp, reverse=True)), tuple(sorted(con)))
    c = derive_constants(eq)
    assert c.rho == (1.0 + c.mu) / 2.0
    if eq.u >= 2:
        assert c.alpha * c.beta == pytest.approx(1.0, rel=1e-15)


@given(st.lists(st.floats(0.1, 10.0), min_size=2, max_size=4, unique=True))
def test_any_non_identity_permutation_of_expanding_fails(values):
    ordered = tuple(sorted(values, reverse=True))
    for perm in itertools.permutations(ordered):
        if perm == ordered:
            continue
        net = make_network([EquilibriumSpec("p", perm, (50.0,) * 1)], [("p", "p")])
        assert "H2" in validate_hypotheses(net).tags()


@given(st.floats(0.5, 2.0))
def test_validation_is_idempotent_and_pure(c):
    net = three_node(c)
    before = net.to_dict()
    a, b = validate_hypotheses(net), validate_hypotheses(net)
    assert a.to_dict() == b.to_dict()
    assert net.to_dict() == before
