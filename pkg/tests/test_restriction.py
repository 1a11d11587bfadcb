import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ltcd.circuit import LTF, ThresholdCircuit, points
from ltcd.errors import ParameterInfeasible, StageFailure
from ltcd.instances import random_circuit, random_depth2
from ltcd.restriction import (
    LayerReductionParams,
    RestrictionSources,
    desk_overrides,
    fix_high_fanout,
    greedy_independent_set,
    harness_bias_preservation,
    harness_single_ltf_lemma,
    reduce_layer,
    restrict_full,
    restrict_with_bits,
    total_loss,
)
from ltcd.sources import UniformSource


def test_derived_parameters_respect_their_window():
    params = LayerReductionParams.derive(2**20, Fraction(1, 40))
    assert 10 * params.eps < params.beta < params.alpha
    assert params.p == Fraction(1, 1 << params.q)
    assert params.kprime >= params.fanout_cap * params.small_fanin_cap


def test_derive_rejects_impossible_windows():
    with pytest.raises(ParameterInfeasible):
        LayerReductionParams.derive(16, Fraction(1, 100))
    with pytest.raises(ParameterInfeasible):
        LayerReductionParams.derive(1, Fraction(1, 10))
    with pytest.raises(ParameterInfeasible):
        LayerReductionParams.derive(16, Fraction(1, 10), p=Fraction(1, 3))
    with pytest.raises(TypeError):
        LayerReductionParams.derive(16, Fraction(1, 10), p=Fraction(1, 2), bogus=1)


def test_overrides_switch_to_desk_mode():
    C = random_depth2(8, 3, 3, seed=1)
    params = LayerReductionParams.derive(8, Fraction(1, 10), **desk_overrides(C))
    assert params.desk_mode and params.p == Fraction(1, 2) and params.q == 1


@given(st.integers(2, 14), st.integers(0, 8), st.integers(1, 4), st.integers(0, 10**6))
def test_greedy_independent_set_is_independent_and_large(n, gates, fan_in, seed):
    rng = random.Random(seed)
    small = [rng.sample(range(n), min(fan_in, n)) for _ in range(gates)]
    load = [sum(v in g for g in small) for v in range(n)]
    cap = max(1, max(load, default=0))
    kprime = cap * fan_in
    chosen = greedy_independent_set(range(n), small, kprime, cap, fan_in)
    for g in small:
        assert len(set(g) & set(chosen)) <= 1
    assert len(chosen) >= -(-n // kprime)


def test_greedy_rejects_cap_violations():
    with pytest.raises(ValueError):
        greedy_independent_set([0, 1, 2], [[0, 1, 2]], kprime=4, small_fanin_cap=2)
    with pytest.raises(ValueError):
        greedy_independent_set([0, 1], [[0, 1], [0, 1]], kprime=4, fanout_cap=1)


def test_fix_high_fanout_keeps_low_fanout_variables():
    C = ThresholdCircuit(4, ((LTF((1, 1, 0, 0), 0), LTF((1, 0, 1, 0), 0), LTF((1, 0, 0, 1), 0)), (LTF((1, 1, 1), 0),)))
    rho, sub, trace = fix_high_fanout(C, UniformSource(4), 0, fanout_cap=2)
    assert rho.live == (1, 2, 3)
    X = points(3)
    assert np.array_equal(sub.outputs(X), C.outputs(rho.extend_points(X)))


def _check_reduction(C, rho, phi_or_circuit):
    X = points(rho.num_live)
    reduced = phi_or_circuit if isinstance(phi_or_circuit, ThresholdCircuit) else ThresholdCircuit.from_ltf(phi_or_circuit)
    assert np.array_equal(reduced.outputs(X), C.outputs(rho.extend_points(X)))


@settings(max_examples=40)
@given(st.integers(6, 10), st.integers(2, 4), st.integers(2, 4), st.integers(0, 10**6))
def test_reduce_layer_is_sound_whenever_it_succeeds(n, gates, fan_in, seed):
    C = random_depth2(n, gates, fan_in, seed)
    params = LayerReductionParams.derive(n, Fraction(1, 10), **desk_overrides(C))
    rng = random.Random(seed)
    try:
        rho, reduced, trace = reduce_layer(C, params, rng.getrandbits(n), rng.getrandbits(n), RestrictionSources.uniform())
    except StageFailure as exc:
        assert exc.stage in ("rho1", "rho2", "rho3", "rho4")
        return
    assert reduced.depth == 1 and trace.success
    assert reduced.n == rho.num_live
    _check_reduction(C, rho, reduced)


def test_restrict_full_depth_three_is_sound():
    successes = 0
    for seed in range(80):
        C = random_circuit(12, [4, 2, 1], 2, seed)
        rng = random.Random(seed)

        def provider(level, n, q):
            return [rng.getrandbits(1) for _ in range(q * n)], [rng.getrandbits(1) for _ in range(n)]

        try:
            rho, phi, trace = restrict_with_bits(C, Fraction(1, 100), provider, params=desk_overrides(C))
        except StageFailure:
            continue
        successes += 1
        assert len(trace.levels) == 2
        _check_reduction(C, rho, phi)
    assert successes > 0


def test_restrict_full_seeds_match_bit_provider():
    C = random_depth2(8, 3, 2, seed=2)
    params = desk_overrides(C)
    sources = RestrictionSources.uniform()
    for y, z in [(0xFF, 3), (0xA5, 200), (0x3C, 17)]:
        def provider(level, n, q):
            return UniformSource(n).generate(y), UniformSource(n).generate(z)

        try:
            direct = restrict_full(C, Fraction(1, 10), [(y, z)], params=params, sources=sources)
        except StageFailure as exc:
            with pytest.raises(StageFailure) as again:
                restrict_with_bits(C, Fraction(1, 10), provider, params)
            assert again.value.stage == exc.stage
            continue
        via_bits = restrict_with_bits(C, Fraction(1, 10), provider, params)
        assert direct[0] == via_bits[0] and direct[1] == via_bits[1]


def test_restrict_full_refuses_total_loss_at_least_one():
    C = random_circuit(8, [2, 2, 1], 2, 0)
    assert total_loss(3, Fraction(1, 10)) >= 1
    with pytest.raises(ParameterInfeasible):
        restrict_full(C, Fraction(1, 10), [(0, 0), (0, 0)])


def test_single_ltf_lemma_harness_is_reproducible():
    phi = LTF.majority(16)
    args = (phi, Fraction(1, 4), 2, UniformSource(32), UniformSource(16), 300)
    a, b = harness_single_ltf_lemma(*args, seed=3), harness_single_ltf_lemma(*args, seed=3)
    assert a == b and 0 <= a.rate <= 1


def test_bias_preservation_exhaustive():
    phi = LTF((1,) * 8, 4)  # accepts unless sum >= 4
    res = harness_bias_preservation(phi, -1, [0, 1, 2], UniformSource(5), Fraction(1, 4), Fraction(1, 2))
    # direct count over the 32 fixings
    hits = 0
    for s in range(32):
        z = [(s >> (4 - k)) & 1 for k in range(5)]
        shift = sum(1 - 2 * b for b in z)
        sub = LTF((1, 1, 1), 4 - shift)
        acc = sum(1 for x in points(3) if sub(tuple(x)) == -1)
        hits += Fraction(acc, 8) >= Fraction(1, 2)
    assert res.hits == hits and res.trials == 32
