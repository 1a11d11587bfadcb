import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ltcd.circuit import LTF, acceptance_probability
from ltcd.derand import (
    BernoulliSelection,
    Depth2Generator,
    PartitionSelection,
    depth2_selection_exponent,
    derandomize_depth2,
    enumerate_decision_tree,
    harness_kw_restriction,
    kw_bound,
    live_threshold,
    quantified_derandomize,
)
from ltcd.errors import BudgetExceeded, NoSuccessfulSeed
from ltcd.instances import curated_family, near_constant_circuit, random_patterns
from ltcd.restriction import RestrictionSources, desk_overrides
from ltcd.sources import AlmostKwiseSource, UniformSource


def test_decision_tree_masses_partition_the_space():
    def run(bits):
        a = bits("a", 3)
        if a[0]:
            return ("deep", a[1], a[2], bits("b", 2)[1])
        return ("shallow",)

    leaves = list(enumerate_decision_tree(run))
    assert sum(Fraction(1, 1 << d) for d, _ in leaves) == 1
    assert len(leaves) == 1 + 8
    assert sorted(d for d, _ in leaves) == [1] + [4] * 8


@given(st.lists(st.integers(0, 1), min_size=1, max_size=6))
def test_decision_tree_matches_full_enumeration(pattern):
    # outcome = number of leading bits equal to the pattern
    k = len(pattern)

    def run(bits):
        b = bits("x", k)
        for i in range(k):
            if b[i] != pattern[i]:
                return i
        return k

    mass = {}
    for d, r in enumerate_decision_tree(run):
        mass[r] = mass.get(r, 0) + Fraction(1, 1 << d)
    expected = {}
    for s in range(1 << k):
        bits = [(s >> (k - 1 - i)) & 1 for i in range(k)]
        r = next((i for i in range(k) if bits[i] != pattern[i]), k)
        expected[r] = expected.get(r, 0) + Fraction(1, 1 << k)
    assert mass == expected


def test_decision_tree_budget():
    with pytest.raises(BudgetExceeded):
        list(enumerate_decision_tree(lambda bits: bits("x", 10).read_int(), budget=100))


def test_live_threshold():
    assert live_threshold(10, 2, Fraction(1, 10), exceptions=0) == 0
    assert live_threshold(10, 2, Fraction(1, 10), exceptions=1) == 4
    assert live_threshold(10, 2, Fraction(1, 10), exceptions=3) == 5


def _derand(inst):
    C = inst.circuit
    return quantified_derandomize(
        C,
        Fraction(1, 10),
        RestrictionSources.uniform(),
        UniformSource,
        params=desk_overrides(C),
        exceptions=inst.exceptions,
        keep_outcomes=True,
    )


@pytest.mark.parametrize("inst", curated_family(6), ids=lambda i: i.name)
def test_curated_instances_decided_correctly(inst):
    verdict = _derand(inst)
    assert verdict.decision == inst.expected
    assert sum(o.mass for o in verdict.outcomes) == 1
    assert verdict.success_mass + sum(v for k, v in verdict.failures.items() if k != "too-few-live") == 1


def test_negation_flips_the_decision():
    C = near_constant_circuit(6, random_patterns(6, 2, seed=5))
    kw = dict(restriction_sources=RestrictionSources.uniform(), ltf_family=UniformSource, exceptions=2)
    a = quantified_derandomize(C, Fraction(1, 10), params=desk_overrides(C), **kw)
    b = quantified_derandomize(C.negated(), Fraction(1, 10), params=desk_overrides(C), **kw)
    assert {a.decision, b.decision} == {"accept", "reject"}
    assert a.eligible_mass == b.eligible_mass


def test_no_successful_seed_is_reported():
    C = near_constant_circuit(6, [])
    with pytest.raises(NoSuccessfulSeed):
        quantified_derandomize(
            C, Fraction(1, 10), RestrictionSources.uniform(), UniformSource, params=desk_overrides(C), exceptions=10**6
        )


def test_depth2_exponent_window():
    q, delta = depth2_selection_exponent(8, Fraction(3, 5))
    assert Fraction(3, 10) < delta < Fraction(2, 5) and q == 2
    with pytest.raises(Exception):
        depth2_selection_exponent(8, Fraction(1, 100))


def test_depth2_uniform_average_is_exact():
    gen = Depth2Generator.build(8, Fraction(3, 5), UniformSource(16), UniformSource(8), UniformSource)
    for inst in curated_family(8, (0, 1, 3)):
        verdict = derandomize_depth2(inst.circuit, Fraction(3, 5), gen)
        assert verdict.acceptance == acceptance_probability(inst.circuit)
        assert verdict.decision == inst.expected


def test_generator_outputs_agree_with_restriction():
    y, z = AlmostKwiseSource(16, 4, Fraction(1, 16)), AlmostKwiseSource(8, 3, Fraction(1, 8))
    gen = Depth2Generator.build(8, Fraction(3, 5), y, z, UniformSource)
    rng = random.Random(0)
    for _ in range(50):
        seed = rng.getrandbits(gen.seed_len)
        ys, zs, xs = gen.split_seed(seed)
        rho = gen.restriction(ys, zs)
        out = gen.output(seed)
        for i, v in rho.fixed.items():
            assert out[i] == v
        assert set(np.unique(out)) <= {-1, 1}


@pytest.mark.parametrize("family", [BernoulliSelection(Fraction(1, 4)), PartitionSelection(Fraction(1, 4))])
def test_selection_families_are_pair_bounded(family):
    m = 16
    single, pair = family.pair_probabilities(m)
    assert single <= family.p and pair <= family.p**2
    rng = random.Random(1)
    counts = np.zeros(m)
    trials = 4000
    for _ in range(trials):
        for i in family.sample(m, rng):
            counts[i] += 1
    assert np.all(counts / trials < float(family.p) + 0.05)


def test_kw_harness_on_a_dictator_never_hits():
    phi = LTF((1,) + (0,) * 7, 0)
    res = harness_kw_restriction(phi, BernoulliSelection(Fraction(1, 2)), UniformSource(8), 200)
    assert res.hits == 0


def test_kw_bound_exact_for_powers_of_four():
    assert kw_bound(10, Fraction(1, 16)) == Fraction(8 * 10, 64)
