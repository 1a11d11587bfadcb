"""Seeded bit sources, restriction sampling and exact pseudorandomness checks.

A source maps an integer seed in ``[0, 2**seed_len)`` to ``out_len`` bits.
Bits become signs via ``b -> (-1) ** b``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .circuit import LTF, STAR, Restriction, ltf_outputs, points
from .errors import charge
from .ltf import acceptance_count_ltf, sum_distribution

HISTOGRAM_LIMIT = 22


def bits_to_signs(bits) -> np.ndarray:
    return (1 - 2 * np.asarray(bits, dtype=np.int8)).astype(np.int8)


def _pattern_index(bits: np.ndarray) -> np.ndarray:
    """Row bits (MSB first) packed into integers; matches `points` ordering."""
    n = bits.shape[1]
    weights = (1 << np.arange(n - 1, -1, -1, dtype=np.int64)) if n else np.zeros(0, dtype=np.int64)
    return bits.astype(np.int64) @ weights


class SeededSource:
    kind = "abstract"
    construction_id = ""

    def __init__(self, out_len: int, seed_len: int):
        self.out_len = int(out_len)
        self.seed_len = int(seed_len)

    @property
    def num_seeds(self) -> int:
        return 1 << self.seed_len

    @property
    def params(self) -> dict:
        return {}

    def descriptor(self) -> dict:
        return {
            "kind": self.kind,
            "n": self.out_len,
            "params": self.params,
            "seed_len": self.seed_len,
            "construction_id": self.construction_id,
        }

    def generate(self, seed: int) -> np.ndarray:
        return self.generate_block(seed, seed + 1)[0]

    def signs(self, seed: int) -> np.ndarray:
        return bits_to_signs(self.generate(seed))

    def generate_block(self, start: int, stop: int) -> np.ndarray:
        """Outputs for seeds start..stop-1 as a (count, out_len) uint8 array."""
        raise NotImplementedError

    def _check_seed(self, seed: int):
        if not 0 <= seed < self.num_seeds:
            raise ValueError(f"seed {seed} outside [0, 2**{self.seed_len})")

    def blocks(self, budget: int | None = None, block: int = 1 << 16):
        charge(self.num_seeds, budget, f"{self.kind} seed enumeration")
        for start in range(0, self.num_seeds, block):
            yield self.generate_block(start, min(self.num_seeds, start + block))

    def histogram(self, budget: int | None = None) -> np.ndarray:
        """Number of seeds producing each output pattern (index = packed bits)."""
        cache = self.__dict__.setdefault("_histograms", {})
        if "h" not in cache:
            if self.out_len > HISTOGRAM_LIMIT:
                raise ValueError("output too long for a full histogram")
            h = np.zeros(1 << self.out_len, dtype=np.int64)
            for out in self.blocks(budget):
                h += np.bincount(_pattern_index(out), minlength=1 << self.out_len)
            cache["h"] = h
        return cache["h"]

    def __repr__(self):
        return f"{type(self).__name__}(out_len={self.out_len}, seed_len={self.seed_len})"


class UniformSource(SeededSource):
    """The identity generator: seed bits are the output bits."""

    kind = "uniform-exhaustive"
    construction_id = "identity"

    def __init__(self, n: int):
        super().__init__(n, n)

    def generate(self, seed: int) -> np.ndarray:
        self._check_seed(seed)
        n = self.out_len
        raw = np.frombuffer(int(seed).to_bytes((n + 7) // 8 or 1, "big"), dtype=np.uint8)
        return np.unpackbits(raw)[-n:] if n else np.zeros(0, dtype=np.uint8)

    def generate_block(self, start, stop):
        if start < 0 or stop > self.num_seeds:
            raise ValueError("seed range out of bounds")
        return ((1 - points(self.out_len, start, stop)) // 2).astype(np.uint8)

    def histogram(self, budget=None):
        charge(self.num_seeds, budget, "uniform histogram")
        return np.ones(1 << self.out_len, dtype=np.int64)


# GF(2^m) arithmetic on Python ints and numpy arrays


def _poly_mulmod(a: int, b: int, poly: int, m: int) -> int:
    r = 0
    while b:
        if b & 1:
            r ^= a
        b >>= 1
        a <<= 1
        if a >> m & 1:
            a ^= poly
    return r


def _poly_mod(a: int, f: int) -> int:
    df = f.bit_length() - 1
    while a and a.bit_length() - 1 >= df:
        a ^= f << (a.bit_length() - 1 - df)
    return a


def _poly_gcd(a: int, b: int) -> int:
    while b:
        a, b = b, _poly_mod(a, b)
    return a


def is_irreducible(f: int) -> bool:
    """Ben-Or test over GF(2) for the polynomial encoded by the bits of f."""
    m = f.bit_length() - 1
    if m < 1:
        return False
    x = 0b10
    power = x
    for _ in range(m // 2):
        power = _poly_mulmod(power, power, f, m)
        if _poly_gcd(f, power ^ x) != 1:
            return False
    return True


def smallest_irreducible(m: int) -> int:
    for low in range(1, 1 << m, 2):
        f = (1 << m) | low
        if is_irreducible(f):
            return f
    raise ValueError(f"no irreducible polynomial of degree {m}")  # pragma: no cover


def _gf_mul_vec(a: np.ndarray, b: np.ndarray, poly: int, m: int) -> np.ndarray:
    a = a.astype(np.uint64).copy()
    b = np.broadcast_to(b.astype(np.uint64), a.shape).copy()
    result = np.zeros_like(a)
    top = np.uint64(1 << m)
    p = np.uint64(poly)
    for _ in range(m):
        result ^= np.where(b & np.uint64(1), a, np.uint64(0))
        b >>= np.uint64(1)
        a <<= np.uint64(1)
        a = np.where(a & top, a ^ p, a)
    return result


class AlmostKwiseSource(SeededSource):
    """Small-bias powering construction over GF(2^m).

    Seed (a, b) in GF(2^m)^2; output bit i is the inner product of the bit
    vectors of a**i and b.  Its bias is at most (n-1)/2^m, so every projection
    on k coordinates is within 2**(k/2 - 1) * (n-1) / 2**m of uniform.  The
    default m is the smallest integer making that bound at most delta.
    """

    kind = "almost-kwise"

    def __init__(self, n: int, k: int, delta, field_bits: int | None = None):
        if n < 1 or k < 1:
            raise ValueError("n and k must be positive")
        self.k = int(k)
        self.delta = Fraction(delta)
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if field_bits is None:
            field_bits = max(1, self.required_field_bits(n, self.k, self.delta))
        self.m = int(field_bits)
        self.poly = smallest_irreducible(self.m)
        super().__init__(n, 2 * self.m)
        self.construction_id = f"aghp-powering/gf2^{self.m}/poly=0x{self.poly:x}"

    @staticmethod
    def required_field_bits(n: int, k: int, delta: Fraction) -> int:
        # smallest m with 2^(k/2-1) * (n-1) / 2^m <= delta
        if n <= 1:
            return 1
        target = Fraction(n - 1) / Fraction(delta)
        m = 0
        # compare 2^(2m) >= 2^(k-2) * target^2 to stay rational
        while Fraction(4) ** m < Fraction(2) ** (k - 2) * target * target:
            m += 1
        return m

    @property
    def params(self):
        return {"k": self.k, "delta": str(self.delta), "field_bits": self.m}

    @cached_property
    def _powers(self) -> np.ndarray:
        a = np.arange(1 << self.m, dtype=np.uint64)
        table = np.empty((1 << self.m, self.out_len), dtype=np.uint64)
        table[:, 0] = 1
        for i in range(1, self.out_len):
            table[:, i] = _gf_mul_vec(table[:, i - 1], a, self.poly, self.m)
        return table

    def generate(self, seed: int) -> np.ndarray:
        self._check_seed(seed)
        a, b = seed >> self.m, seed & ((1 << self.m) - 1)
        out = np.empty(self.out_len, dtype=np.uint8)
        power = 1
        for i in range(self.out_len):
            out[i] = bin(power & b).count("1") & 1
            power = _poly_mulmod(power, a, self.poly, self.m)
        return out

    def generate_block(self, start, stop):
        if start < 0 or stop > self.num_seeds:
            raise ValueError("seed range out of bounds")
        seeds = np.arange(start, stop, dtype=np.uint64)
        a = (seeds >> np.uint64(self.m)).astype(np.int64)
        b = seeds & np.uint64((1 << self.m) - 1)
        masked = self._powers[a] & b[:, None]
        return (np.bitwise_count(masked) & 1).astype(np.uint8)


class LtfFoolingSource(SeededSource):
    """Wraps a generator together with a declared LTF-fooling error."""

    kind = "ltf-fooling"

    def __init__(self, base: SeededSource, eps):
        super().__init__(base.out_len, base.seed_len)
        self.base = base
        self.eps = Fraction(eps)
        self.construction_id = f"wrap:{base.construction_id}"

    @property
    def params(self):
        return {"eps": str(self.eps), "base": self.base.descriptor()}

    def generate(self, seed):
        return self.base.generate(seed)

    def generate_block(self, start, stop):
        return self.base.generate_block(start, stop)

    def histogram(self, budget=None):
        return self.base.histogram(budget)


def default_fooling_source(n: int, eps) -> LtfFoolingSource:
    """A fooling stand-in whose declared error is provable at desk scale.

    Full n-wise delta-almost independence means the output is eps-close to
    uniform in statistical distance, which bounds the gap for every gate.
    """
    return LtfFoolingSource(AlmostKwiseSource(n, n, eps), eps)


def default_almost_kwise(n: int, p) -> AlmostKwiseSource:
    """Defaults for selection strings: k = ceil(4 log2(1/p)), delta = n^-4."""
    k = max(1, math.ceil(4 * math.log2(1 / Fraction(p))))
    return AlmostKwiseSource(n, k, Fraction(1, n**4))


SourceFamily = Callable[[int], SeededSource]


def uniform_family(n: int) -> SeededSource:
    return UniformSource(n)


# checks


def projection_distance(source: SeededSource, subset: Sequence[int], budget: int | None = None) -> Fraction:
    """Exact statistical distance of the projection on `subset` from uniform."""
    k = len(subset)
    if source.out_len <= HISTOGRAM_LIMIT:
        h = source.histogram(budget).reshape((2,) * source.out_len)
        keep = set(subset)
        others = tuple(i for i in range(source.out_len) if i not in keep)
        # the distance is invariant under reordering the kept axes
        counts = (h.sum(axis=others) if others else h).reshape(-1)
    else:
        counts = np.zeros(1 << k, dtype=np.int64)
        for out in source.blocks(budget):
            counts += np.bincount(_pattern_index(out[:, list(subset)]), minlength=1 << k)
    total = int(counts.sum())
    dev = sum(abs(int(c) * (1 << k) - total) for c in counts)
    return Fraction(dev, 2 * total * (1 << k))


def kwise_distance(source: SeededSource, k: int, budget: int | None = None) -> Fraction:
    """Largest projection distance over all coordinate sets of size at most k."""
    worst = Fraction(0)
    for size in range(1, min(k, source.out_len) + 1):
        for subset in itertools.combinations(range(source.out_len), size):
            worst = max(worst, projection_distance(source, subset, budget))
    return worst


def check_kwise(source: SeededSource, k: int, delta, budget: int | None = None) -> bool:
    return kwise_distance(source, k, budget) <= Fraction(delta)


def decode_selection(y_bits, n: int, q: int) -> tuple:
    """Live variables: those whose q-bit block of y is all ones."""
    if len(y_bits) != q * n:
        raise ValueError(f"selection string has {len(y_bits)} bits, expected {q * n}")
    return tuple(i for i in range(n) if all(y_bits[i * q + j] for j in range(q)))


def restriction_from_bits(y_bits, z_bits, n: int, q: int) -> Restriction:
    if len(z_bits) != n:
        raise ValueError(f"value string has {len(z_bits)} bits, expected {n}")
    values = []
    for i in range(n):
        block_live = True
        for j in range(q):
            if not y_bits[i * q + j]:
                block_live = False
                break
        values.append(STAR if block_live else (-1 if z_bits[i] else 1))
    return Restriction(tuple(values))


def sample_restriction(y_source: SeededSource, z_source: SeededSource, n: int, q: int, y_seed: int, z_seed: int) -> Restriction:
    if y_source.out_len != q * n:
        raise ValueError("selection source must output q*n bits")
    if z_source.out_len != n:
        raise ValueError("value source must output n bits")
    return restriction_from_bits(y_source.generate(y_seed), z_source.generate(z_seed), n, q)


def source_acceptance(source: SeededSource, phi: LTF, budget: int | None = None) -> Fraction:
    """Exact Pr over seeds that phi outputs -1 on the source's output."""
    if phi.n != source.out_len:
        raise ValueError("gate arity differs from source output length")
    if source.out_len <= HISTOGRAM_LIMIT:
        h = source.histogram(budget)
        accept = ltf_outputs(phi, points(source.out_len)) == -1
        return Fraction(int(h[accept].sum()), int(h.sum()))
    hits = 0
    for out in source.blocks(budget):
        hits += int(np.count_nonzero(ltf_outputs(phi, bits_to_signs(out)) == -1))
    return Fraction(hits, source.num_seeds)


def ltf_fooling_gap(source: SeededSource, phi: LTF, budget: int | None = None) -> Fraction:
    uniform = Fraction(acceptance_count_ltf(phi), 1 << phi.n)
    return abs(source_acceptance(source, phi, budget) - uniform)


def _interval_probability_uniform(w, a, b) -> Fraction:
    dist = sum_distribution(w)
    return Fraction(sum(c for s, c in dist.items() if a <= s <= b), 1 << len(w))


def concentration_gap(source: SeededSource, w: Sequence[int], interval, budget: int | None = None) -> Fraction:
    a, b = (Fraction(v) for v in interval)
    w = tuple(int(v) for v in w)
    if len(w) != source.out_len:
        raise ValueError("weight length differs from source output length")
    sums = points(len(w)).astype(np.int64) @ np.array(w, dtype=np.int64)
    inside = np.array([a <= int(s) <= b for s in sums], dtype=bool)
    h = source.histogram(budget)
    p_source = Fraction(int(h[inside].sum()), int(h.sum()))
    return abs(p_source - _interval_probability_uniform(w, a, b))


def _sum_masses(source: SeededSource, w: Sequence[int], budget: int | None = None) -> tuple:
    """Achievable sums of <w, x> in increasing order, with source and uniform probabilities."""
    w = tuple(int(v) for v in w)
    if len(w) != source.out_len:
        raise ValueError("weight length differs from source output length")
    uniform = sum_distribution(w)
    sums = sorted(uniform)
    index = {s: i for i, s in enumerate(sums)}
    h = source.histogram(budget)
    all_sums = points(len(w)).astype(np.int64) @ np.array(w, dtype=np.int64)
    counts = [0] * len(sums)
    for s, c in zip(all_sums.tolist(), h.tolist()):
        if c:
            counts[index[s]] += c
    total = int(h.sum())
    src = [Fraction(c, total) for c in counts]
    uni = [Fraction(uniform[s], 1 << len(w)) for s in sums]
    return sums, src, uni


@dataclass
class ConcentrationCheck:
    weights: tuple
    interval_gap: Fraction  # max over intervals with achievable-sum endpoints
    ltf_gap: Fraction  # max over gates with weights +-w and every threshold
    worst_interval: tuple
    worst_threshold: tuple

    @property
    def fooling_implies_concentration(self) -> bool:
        return self.interval_gap <= 2 * self.ltf_gap

    @property
    def concentration_implies_fooling(self) -> bool:
        return self.ltf_gap <= self.interval_gap


def check_concentration_equivalence(source: SeededSource, w: Sequence[int], budget: int | None = None) -> ConcentrationCheck:
    """Exact interval and LTF gaps of the source for one weight vector.

    An interval [a, b] meets the achievable sums in a contiguous run, so
    runs between achievable sums cover every interval.  A gate
    sgn(<w,x> - theta) accepts a prefix of the sums and sgn(-<w,x> + theta)
    a suffix (sgn(0) = +1), so prefixes and suffixes cover every threshold.
    """
    sums, src, uni = _sum_masses(source, w, budget)
    diff = [a - b for a, b in zip(src, uni)]
    prefix = [Fraction(0)]
    for v in diff:
        prefix.append(prefix[-1] + v)
    K = len(sums)
    best_int, arg_int = Fraction(0), (None, None)
    for i in range(K):
        for j in range(i + 1, K + 1):
            gap = abs(prefix[j] - prefix[i])
            if gap > best_int:
                best_int, arg_int = gap, (sums[i], sums[j - 1])
    best_ltf, arg_ltf = Fraction(0), (None, None)
    for j in range(K + 1):
        # accept S < theta (prefix j) or S > theta (suffix from j)
        for side, gap in (("below", abs(prefix[j])), ("above", abs(prefix[K] - prefix[j]))):
            if gap > best_ltf:
                theta = sums[j] if j < K else sums[-1] + 1
                best_ltf, arg_ltf = gap, (side, theta)
    return ConcentrationCheck(tuple(int(v) for v in w), best_int, best_ltf, arg_int, arg_ltf)
