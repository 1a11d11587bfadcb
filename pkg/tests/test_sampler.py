import random
from fractions import Fraction

import numpy as np
import pytest

from ltcd.circuit import LTF, ThresholdCircuit, points
from ltcd.errors import ParameterInfeasible
from ltcd.sampler import (
    build_reduction_circuit,
    check_extractor_equivalence,
    codeword,
    composed_outputs,
    derive_sampler_params,
    desk_sampler_spec,
    direct_composition,
    max_bias,
    output_histograms,
    sample_output,
    sample_table,
    verify_sampler,
)


@pytest.fixture(scope="module")
def spec():
    return desk_sampler_spec()


@pytest.fixture(scope="module")
def histograms(spec):
    return output_histograms(spec)


def _bits(x, n):
    return np.array([(x >> (n - 1 - i)) & 1 for i in range(n)], dtype=np.uint8)


def test_desk_instance_shape(spec):
    assert (spec.n, spec.m, spec.ell, spec.t, spec.rho) == (8, 2, 5, 9, 2)
    assert max_bias(spec.code) <= Fraction(1, 4)
    assert spec.code.distance > 0


def test_slow_path_matches_table(spec):
    table = sample_table(spec)
    rng = random.Random(0)
    for _ in range(100):
        x, z = rng.randrange(1 << spec.n), rng.randrange(1 << spec.t)
        out = sample_output(_bits(x, spec.n), z, spec)
        assert int(out[0]) * 2 + int(out[1]) == table[x, z]
        # by hand: output i reads the codeword at the address spelled by z on S_i
        word = codeword(spec, _bits(x, spec.n))
        for i, S in enumerate(spec.design.sets):
            addr = int("".join(str((z >> (spec.t - 1 - p)) & 1) for p in S), 2)
            assert out[i] == word[addr]


def test_seeds_agreeing_on_the_design_give_equal_outputs(spec):
    used = set().union(*spec.design.sets)
    free = [p for p in range(spec.t) if p not in used]
    rng = random.Random(1)
    for _ in range(50):
        x = _bits(rng.randrange(1 << spec.n), spec.n)
        z = rng.randrange(1 << spec.t)
        z2 = z
        for p in free:
            if rng.random() < 0.5:
                z2 ^= 1 << (spec.t - 1 - p)
        assert np.array_equal(sample_output(x, z, spec), sample_output(x, z2, spec))


def test_bad_seed_raises(spec):
    with pytest.raises(IndexError):
        sample_output(np.zeros(spec.n, dtype=np.uint8), 1 << spec.t, spec)


def test_trivial_tests_have_no_bad_inputs(spec, histograms):
    report = verify_sampler(spec, Fraction(1, 100), 0, [(), (0, 1, 2, 3)], H=histograms)
    assert report.worst_bad_fraction == 0


def test_histogram_rows_count_every_seed(spec, histograms):
    assert np.all(histograms.sum(axis=1) == 1 << spec.t)


def test_single_output_reads_one_coordinate():
    spec = desk_sampler_spec(n=6, m=1, ell=5)
    (S,) = spec.design.sets
    for x in (1, 17, 63):
        xb = _bits(x, 6)
        word = codeword(spec, xb)
        for z in range(0, 1 << spec.t, 37):
            addr = int("".join(str((z >> (spec.t - 1 - p)) & 1) for p in S), 2)
            assert sample_output(xb, z, spec).tolist() == [word[addr]]


def test_derived_parameters_feasible_and_infeasible():
    spec = derive_sampler_params(2**80, 1, Fraction(1, 80), 1)
    assert (spec.t, spec.ell, spec.alpha) == (176, 92, Fraction(21, 92))
    assert spec.condition_slack() > 0
    assert (1 - spec.alpha) * spec.ell == int((1 - spec.alpha) * spec.ell)
    with pytest.raises(ParameterInfeasible):
        derive_sampler_params(2**80, 1, Fraction(1, 80), Fraction(1, 2))
    with pytest.raises(ParameterInfeasible):
        derive_sampler_params(2**80, 1, Fraction(1, 5), 1)
    with pytest.raises(ParameterInfeasible):
        derive_sampler_params(2**10, 1, Fraction(1, 80), 1)


def test_extractor_cross_check(spec):
    result = check_extractor_equivalence(spec, 2, Fraction(1, 4), Fraction(1, 64))
    assert result["consistent"] and result["one_sided_below_2^k"]


def test_constant_circuit_stays_constant(spec):
    for value in (1, -1):
        C = ThresholdCircuit.constant(value, spec.m)
        R = build_reduction_circuit(C, spec)
        assert np.all(R.circuit.outputs(points(spec.n)) == value)


def test_reduction_equals_composition_depth_one(spec):
    C = ThresholdCircuit.from_ltf(LTF((1, 2), Fraction(1, 2)))
    R = build_reduction_circuit(C, spec)
    assert R.depth == 5 and R.copies == 1 << spec.t
    out = R.circuit.outputs(points(spec.n))
    assert np.array_equal(out, composed_outputs(C, spec))
    for x in (0, 5, 200):
        assert out[x] == direct_composition(C, spec, _bits(x, spec.n))
