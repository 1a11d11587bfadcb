import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ltcd.circuit import (
    LTF,
    STAR,
    Restriction,
    ThresholdCircuit,
    ThresholdNetwork,
    acceptance_count,
    closeness,
    dumps_circuit,
    eval_circuit,
    eval_ltf,
    identity_layer,
    loads_circuit,
    points,
    rejection_count,
    restrict_circuit,
    restrict_ltf,
    truth_table,
)
from ltcd.errors import BudgetExceeded, MalformedCircuit

from strategies import circuits, ltfs, restrictions


def brute_eval(phi, x):
    s = sum(w * v for w, v in zip(phi.weights, x))
    return 1 if s - phi.threshold >= 0 else -1


def test_sign_of_zero_is_plus_one():
    assert eval_ltf(LTF((1, 1), 0), (1, -1)) == 1
    assert eval_ltf(LTF((1, 1), Fraction(1, 2)), (1, -1)) == -1


def test_constant_gates():
    assert all(LTF.constant(-1, 3)(x) == -1 for x in itertools.product((-1, 1), repeat=3))
    assert all(LTF.constant(1, 3)(x) == 1 for x in itertools.product((-1, 1), repeat=3))
    with pytest.raises(ValueError):
        LTF.constant(0)


def test_points_order_msb_first():
    X = points(3)
    assert X[0].tolist() == [1, 1, 1]
    assert X[1].tolist() == [1, 1, -1]
    assert X[4].tolist() == [-1, 1, 1]


def test_majority_counts():
    assert acceptance_count(LTF.majority(3)) == 4
    # even arity: ties go to +1
    assert acceptance_count(LTF.majority(4)) == 5


def test_arity_mismatch_rejected():
    with pytest.raises(MalformedCircuit):
        ThresholdCircuit(3, ((LTF((1, 1), 0),),))
    with pytest.raises(MalformedCircuit):
        ThresholdCircuit(2, ((LTF((1, 1), 0), LTF((1, 1), 0)),))
    with pytest.raises(ValueError):
        eval_ltf(LTF((1, 1), 0), (1,))


def test_budget_guard():
    with pytest.raises(BudgetExceeded):
        acceptance_count(LTF.majority(12), budget=100)


def test_network_then_and_identity():
    net = ThresholdNetwork(3, (identity_layer(3),))
    C = net.then(ThresholdNetwork(3, ((LTF.majority(3),),)))
    assert isinstance(C, ThresholdCircuit)
    assert np.array_equal(C.outputs(points(3)), truth_table(LTF.majority(3)))


def test_large_weights_use_exact_arithmetic():
    big = 1 << 70
    phi = LTF((big, big + 1), Fraction(1, 2))
    X = points(2)
    expected = [brute_eval(phi, x) for x in X.tolist()]
    assert truth_table(phi).tolist() == expected


@given(ltfs())
def test_ltf_batch_matches_scalar(phi):
    X = points(phi.n)
    assert truth_table(phi).tolist() == [brute_eval(phi, x) for x in X.tolist()]


@given(circuits())
def test_counts_partition_the_cube(C):
    assert acceptance_count(C) + rejection_count(C) == 1 << C.n


@given(circuits())
def test_batch_matches_scalar_circuit(C):
    X = points(C.n)
    assert C.outputs(X).tolist() == [eval_circuit(C, x) for x in X.tolist()]


@given(circuits())
def test_circuit_json_round_trip(C):
    text = dumps_circuit(C, {"tag": "x"})
    D = loads_circuit(text)
    assert D == C
    assert dumps_circuit(D, {"tag": "x"}) == text


@given(circuits(), st.data())
def test_eval_through_restriction(C, data):
    rho = data.draw(restrictions(C.n))
    R = restrict_circuit(C, rho)
    X = points(rho.num_live)
    assert np.array_equal(R.outputs(X), C.outputs(rho.extend_points(X)))


@given(ltfs(), st.data())
def test_restriction_composition(phi, data):
    outer = data.draw(restrictions(phi.n))
    inner = data.draw(restrictions(outer.num_live))
    assert restrict_ltf(restrict_ltf(phi, outer), inner) == restrict_ltf(phi, outer.refine(inner))


@given(circuits())
def test_negation_complements_off_threshold(C):
    X = points(C.n)
    values = X
    for layer in C.layers[:-1]:
        values = ThresholdNetwork(values.shape[1], (layer,)).evaluate_all(values)
    gate = C.output_gate
    on_threshold = values.astype(object) @ np.array(gate.weights, dtype=object) == gate.threshold
    out, neg = C.outputs(X), C.negated().outputs(X)
    assert np.all((out == -neg) | on_threshold)


def test_closeness_identity_and_constants():
    phi = LTF.majority(5)
    assert closeness(phi, phi) == 1
    assert closeness(phi, -1, 5) + closeness(phi, 1, 5) == 1


def test_restriction_strings():
    rho = Restriction.from_string("*+-*")
    assert rho.live == (0, 3)
    assert rho.fixed == {1: 1, 2: -1}
    assert str(rho) == "*+-*"
    assert rho.extend((-1, 1)) == (-1, 1, -1, 1)
    assert Restriction.identity(3).values == (STAR,) * 3


def test_malformed_documents():
    with pytest.raises(MalformedCircuit):
        loads_circuit("{not json")
    with pytest.raises(MalformedCircuit):
        loads_circuit('{"n": 2, "layers": [[{"weights": ["a"], "theta": "0"}]]}')
