import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ltcd.circuit import LTF, STAR, points
from ltcd.ltf import sum_distribution
from ltcd.sources import (
    AlmostKwiseSource,
    UniformSource,
    bits_to_signs,
    check_concentration_equivalence,
    concentration_gap,
    decode_selection,
    default_fooling_source,
    is_irreducible,
    kwise_distance,
    ltf_fooling_gap,
    projection_distance,
    restriction_from_bits,
    smallest_irreducible,
    source_acceptance,
)


def brute_irreducible(f):
    deg = f.bit_length() - 1
    for g in range(2, 1 << (deg // 2 + 1)):
        if g.bit_length() - 1 < 1:
            continue
        # polynomial long division over GF(2)
        r = f
        while r and r.bit_length() >= g.bit_length():
            r ^= g << (r.bit_length() - g.bit_length())
        if r == 0 and g != f:
            return False
    return True


def test_irreducibility_matches_trial_division():
    for f in range(4, 1 << 9):
        assert is_irreducible(f) == brute_irreducible(f), bin(f)
    assert smallest_irreducible(8) == 0x11B


def test_uniform_source_outputs_every_string_once():
    src = UniformSource(6)
    block = src.generate_block(0, 64)
    assert len({tuple(r) for r in block}) == 64
    assert list(src.generate(5)) == [0, 0, 0, 1, 0, 1]
    assert np.array_equal(bits_to_signs(block), points(6))
    with pytest.raises(ValueError):
        src.generate(64)


@given(st.integers(2, 10), st.integers(1, 4), st.sampled_from([Fraction(1, 2), Fraction(1, 8)]), st.data())
def test_block_generation_matches_single_seeds(n, k, delta, data):
    src = AlmostKwiseSource(n, k, delta)
    start = data.draw(st.integers(0, src.num_seeds - 1))
    stop = min(src.num_seeds, start + data.draw(st.integers(1, 40)))
    block = src.generate_block(start, stop)
    for offset, row in enumerate(block):
        assert np.array_equal(row, src.generate(start + offset))


def test_almost_kwise_meets_its_declared_distance():
    for n, k, delta in [(6, 2, Fraction(1, 4)), (8, 3, Fraction(1, 8)), (7, 7, Fraction(1, 2))]:
        src = AlmostKwiseSource(n, k, delta)
        assert kwise_distance(src, k) <= delta


def test_projection_distance_by_hand():
    # constant-zero generator: every projection is as far from uniform as possible
    class Zero(UniformSource):
        def generate_block(self, start, stop):
            return np.zeros((stop - start, self.out_len), dtype=np.uint8)

        def histogram(self, budget=None):
            h = np.zeros(1 << self.out_len, dtype=np.int64)
            h[0] = self.num_seeds
            return h

    z = Zero(4)
    assert projection_distance(z, (0,)) == Fraction(1, 2)
    assert projection_distance(z, (0, 1, 2)) == Fraction(7, 8)
    assert projection_distance(UniformSource(4), (1, 3)) == 0


@given(st.integers(1, 5), st.integers(1, 3))
def test_selection_all_ones_blocks_are_live(n, q):
    for bits in itertools.product((0, 1), repeat=n * q):
        live = decode_selection(bits, n, q)
        expected = tuple(i for i in range(n) if all(bits[i * q : (i + 1) * q]))
        assert live == expected
        if n * q > 8:
            break


def test_restriction_from_bits():
    rho = restriction_from_bits([1, 1, 0, 1, 1, 1], [0, 1, 1], 3, 2)
    assert rho.values == (STAR, -1, STAR)
    with pytest.raises(ValueError):
        decode_selection([1, 1], 3, 1)


def test_uniform_source_fools_every_gate():
    src = UniformSource(5)
    for w in itertools.product((-2, 1, 3), repeat=2):
        phi = LTF(w + (1, 1, 1), 0)
        assert ltf_fooling_gap(src, phi) == 0


def test_fooling_source_gap_within_declared_error():
    src = default_fooling_source(6, Fraction(1, 4))
    for w in [(1,) * 6, (1, 2, 4, 8, 16, 32), (3, -1, 2, 0, 1, -2)]:
        for theta in range(-8, 9, 3):
            assert ltf_fooling_gap(src, LTF(w, theta)) <= src.eps


def test_source_acceptance_matches_enumeration():
    src = AlmostKwiseSource(6, 2, Fraction(1, 2))
    phi = LTF((1, 1, 1, 1, 1, 1), 1)
    hits = sum(1 for s in range(src.num_seeds) if phi(tuple(bits_to_signs(src.generate(s)))) == -1)
    assert source_acceptance(src, phi) == Fraction(hits, src.num_seeds)


@given(st.lists(st.integers(-4, 4), min_size=6, max_size=6))
def test_concentration_equivalence_against_direct_search(w):
    src = AlmostKwiseSource(6, 2, Fraction(1, 2))
    check = check_concentration_equivalence(src, w)
    assert check.fooling_implies_concentration and check.concentration_implies_fooling
    sums = sorted(sum_distribution(w))
    direct = max((concentration_gap(src, w, (a, b)) for a, b in itertools.combinations_with_replacement(sums, 2)), default=0)
    assert check.interval_gap == direct
    ltf_direct = Fraction(0)
    halves = [Fraction(2 * s - 1, 2) for s in sums] + [Fraction(2 * sums[-1] + 1, 2)]
    for theta in halves:
        ltf_direct = max(ltf_direct, ltf_fooling_gap(src, LTF(tuple(w), theta)))
        neg = tuple(-v for v in w)
        ltf_direct = max(ltf_direct, ltf_fooling_gap(src, LTF(neg, -theta)))
    assert check.ltf_gap == ltf_direct
