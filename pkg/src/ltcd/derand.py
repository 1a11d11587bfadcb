"""Deciding near-constant circuits deterministically.

`quantified_derandomize` runs the full restriction procedure for every
restriction seed, estimates each resulting gate's acceptance probability
under a fooling source, and takes a majority vote.  `prg_depth2` and
`derandomize_depth2` give the generator-based procedure for depth 2.
`harness_kw_restriction` measures how often a restricted gate still depends
on two or more inputs.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .circuit import LTF, STAR, Restriction, ThresholdCircuit, ltf_outputs, points, restrict_circuit, restrict_ltf
from .errors import BudgetExceeded, NoSuccessfulSeed, ParameterInfeasible, StageFailure, resolve_budget
from .ltf import literal_form, relevant_variables
from .restriction import RestrictionSources, restrict_with_bits, total_loss
from .seeding import python_rng
from .sources import (
    AlmostKwiseSource,
    SeededSource,
    UniformSource,
    bits_to_signs,
    default_fooling_source,
    restriction_from_bits,
)

ACCEPT, REJECT = "accept", "reject"
ESTIMATE_THRESHOLD = Fraction(3, 5)


class _LazyBits:
    """Bit string whose entries are fixed on first read and logged."""

    __slots__ = ("tag", "length", "assignment", "log")

    def __init__(self, tag, length: int, assignment: dict, log: list):
        self.tag, self.length, self.assignment, self.log = tag, length, assignment, log

    def __len__(self):
        return self.length

    def __getitem__(self, i):
        if not 0 <= i < self.length:
            raise IndexError(i)
        key = (self.tag, i)
        value = self.assignment.get(key)
        if value is None:
            self.assignment[key] = 0
            self.log.append(key)
            return 0
        return value

    def read_int(self) -> int:
        value = 0
        for i in range(self.length):
            value = (value << 1) | self[i]
        return value


def enumerate_decision_tree(run: Callable, budget: int | None = None):
    """Enumerate every outcome of `run` over independent uniform bits.

    `run(bits)` receives a factory bits(tag, length) and may read any bits in
    any data-dependent order.  Yields (depth, result): the outcome has
    probability 2^-depth, and the outcomes partition the probability space.
    """
    limit = resolve_budget(budget)
    stack = [{}]
    leaves = 0
    while stack:
        fixed = stack.pop()
        assignment = dict(fixed)
        log: list = []
        result = run(lambda tag, length: _LazyBits(tag, length, assignment, log))
        leaves += 1
        if leaves > limit:
            raise BudgetExceeded(leaves, limit, "restriction decision tree")
        yield len(assignment), result
        prefix = dict(fixed)
        for key in log:
            branch = dict(prefix)
            branch[key] = 1
            stack.append(branch)
            prefix[key] = 0


def exceptional_budget(n: int, d: int, eps) -> float:
    """B(n) = 2^(n^(1-delta)) / 10 with delta = d*30^(d-1)*eps."""
    delta = float(total_loss(d, eps))
    return 2 ** (n ** (1 - delta)) / 10


def live_threshold(n: int, d: int, eps, exceptions=None) -> int:
    """Least live count L with 2^L >= 10*B; B is given explicitly or by formula."""
    if exceptions is not None:
        target = 10 * Fraction(exceptions)
        if target <= 1:
            return 0
        L = 0
        while (1 << L) < target:
            L += 1
        return L
    delta = float(total_loss(d, eps))
    return max(0, math.ceil(n ** (1 - delta) - 1e-12))


def _fooling_family(eps) -> Callable[[int], SeededSource]:
    def family(m: int) -> SeededSource:
        return UniformSource(m) if m < 2 else default_fooling_source(m, eps)

    return family


def estimate_acceptance(phi: LTF, source: SeededSource, budget: int | None = None) -> Fraction:
    """Fraction of source seeds on which phi outputs -1."""
    if source.out_len != phi.n:
        raise ValueError("source length must match gate arity")
    accepted = 0
    for block in source.blocks(budget):
        accepted += int(np.count_nonzero(ltf_outputs(phi, bits_to_signs(block)) == -1))
    return Fraction(accepted, source.num_seeds)


@dataclass
class SeedOutcome:
    mass: Fraction
    live: int
    estimate: Fraction | None
    failure: str | None = None

    def to_dict(self) -> dict:
        return {
            "mass": str(self.mass),
            "live": self.live,
            "estimate": None if self.estimate is None else str(self.estimate),
            "failure": self.failure,
        }


@dataclass
class DerandVerdict:
    decision: str
    n: int
    d: int
    eps: Fraction
    delta: Fraction
    exceptions: Fraction | None
    live_threshold: int
    success_mass: Fraction
    eligible_mass: Fraction
    good_mass: Fraction
    failures: dict = field(default_factory=dict)
    outcomes: list = field(default_factory=list)
    enumeration: str = ""
    leaves: int = 0

    @property
    def good_fraction(self) -> Fraction:
        return self.good_mass / self.eligible_mass if self.eligible_mass else Fraction(0)

    @property
    def failure_mass(self) -> Fraction:
        return 1 - self.success_mass

    def to_dict(self, with_outcomes: bool = False) -> dict:
        out = {
            "decision": self.decision,
            "n": self.n,
            "d": self.d,
            "eps": str(self.eps),
            "delta": str(self.delta),
            "B": None if self.exceptions is None else str(self.exceptions),
            "B_formula": exceptional_budget(self.n, self.d, self.eps) if self.delta < 1 else None,
            "live_threshold": self.live_threshold,
            "success_fraction": str(self.success_mass),
            "eligible_fraction": str(self.eligible_mass),
            "good_fraction": str(self.good_fraction),
            "failures": {k: str(v) for k, v in sorted(self.failures.items())},
            "enumeration": self.enumeration,
            "leaves": self.leaves,
        }
        estimates = Counter()
        for o in self.outcomes:
            if o.estimate is not None:
                estimates[str(o.estimate)] += o.mass
        out["estimate_histogram"] = {k: str(v) for k, v in sorted(estimates.items())}
        if with_outcomes:
            out["outcomes"] = [o.to_dict() for o in self.outcomes]
        return out


def _restriction_provider(sources: RestrictionSources, bits: Callable):
    """Hand restrict_with_bits lazily read strings: raw for uniform sources, seeds otherwise."""

    def provider(level, n, q):
        y_source, z_source = sources.for_layer(n, q)
        out = []
        for name, src in (("y", y_source), ("z", z_source)):
            if isinstance(src, UniformSource):
                out.append(bits((name, level), src.out_len))
            else:
                seed = bits((name + "-seed", level), src.seed_len).read_int()
                out.append(src.generate(seed))
        return tuple(out)

    return provider


def quantified_derandomize(
    C: ThresholdCircuit,
    eps,
    restriction_sources: RestrictionSources | None = None,
    ltf_family: Callable[[int], SeededSource] | None = None,
    params=None,
    exceptions=None,
    budget: int | None = None,
    keep_outcomes: bool = True,
) -> DerandVerdict:
    """Accept or reject a circuit that is close to constant.

    Every restriction seed is enumerated (as a decision tree over the bits
    actually read).  A seed is eligible when restriction succeeds with at
    least log2(10*B) live variables; its gate is then estimated over every
    seed of `ltf_family(live)`.  Accept iff the estimate is >= 3/5 on a strict
    majority (by probability mass) of eligible seeds.
    """
    eps = Fraction(eps)
    sources = restriction_sources or RestrictionSources.default()
    family = ltf_family or _fooling_family(Fraction(1, 5))
    d = C.depth
    threshold = live_threshold(C.n, d, eps, exceptions)
    memo: dict = {}

    def run(bits):
        try:
            rho, phi, trace = restrict_with_bits(C, eps, _restriction_provider(sources, bits), params)
        except StageFailure as exc:
            return ("fail", exc.stage)
        return ("ok", phi)

    success = eligible = good = Fraction(0)
    failures: Counter = Counter()
    outcomes = []
    leaves = 0
    for depth, result in enumerate_decision_tree(run, budget):
        leaves += 1
        mass = Fraction(1, 1 << depth)
        if result[0] == "fail":
            failures[result[1]] += mass
            if keep_outcomes:
                outcomes.append(SeedOutcome(mass, 0, None, result[1]))
            continue
        phi = result[1]
        success += mass
        if phi.n < threshold:
            failures["too-few-live"] += mass
            if keep_outcomes:
                outcomes.append(SeedOutcome(mass, phi.n, None, "too-few-live"))
            continue
        if phi not in memo:
            memo[phi] = estimate_acceptance(phi, family(phi.n), budget)
        estimate = memo[phi]
        eligible += mass
        if estimate >= ESTIMATE_THRESHOLD:
            good += mass
        if keep_outcomes:
            outcomes.append(SeedOutcome(mass, phi.n, estimate))
    if not eligible:
        raise NoSuccessfulSeed(f"no restriction seed left {threshold} live variables (failures: {dict(failures)})")
    decision = ACCEPT if 2 * good > eligible else REJECT
    return DerandVerdict(
        decision,
        C.n,
        d,
        eps,
        total_loss(d, eps),
        None if exceptions is None else Fraction(exceptions),
        threshold,
        success,
        eligible,
        good,
        dict(failures),
        outcomes,
        "decision-tree",
        leaves,
    )


# depth-2 generator


def depth2_selection_exponent(n: int, eps) -> tuple:
    """(q, delta) with p = 2^-q = n^-(1-delta) and eps/2 < delta < 2*eps/3."""
    eps = float(eps)
    log_n = math.log2(n)
    lo, hi = eps / 2, 2 * eps / 3
    candidates = []
    for q in range(1, max(2, math.ceil(log_n)) + 1):
        delta = 1 - q / log_n
        if lo < delta < hi:
            candidates.append((abs(delta - 7 * eps / 12), q, delta))
    if not candidates:
        raise ParameterInfeasible(f"no power-of-two p = n^-(1-delta) with delta in ({lo:.4g}, {hi:.4g}) at n={n}")
    _, q, delta = min(candidates)
    return q, delta


@dataclass
class Depth2Generator:
    """Seed -> n-bit output: a restriction completed by a fooling string on its live part."""

    n: int
    eps: Fraction
    q: int
    delta: float
    y_source: SeededSource
    z_source: SeededSource
    fill_family: Callable[[int], SeededSource]

    @classmethod
    def build(cls, n: int, eps, y_source=None, z_source=None, fill_family=None) -> "Depth2Generator":
        eps = Fraction(eps)
        q, delta = depth2_selection_exponent(n, eps)
        if y_source is None:
            y_source = default_selection_source(n, q)
        if z_source is None:
            z_source = default_fooling_source(n, Fraction(1, n * n))
        if fill_family is None:
            fill_family = _fooling_family(Fraction(1, n * n))
        if y_source.out_len != q * n or z_source.out_len != n:
            raise ValueError("selection must have q*n bits and values n bits")
        return cls(n, eps, q, delta, y_source, z_source, fill_family)

    @property
    def p(self) -> Fraction:
        return Fraction(1, 1 << self.q)

    @property
    def fill_seed_len(self) -> int:
        return max(self.fill_family(m).seed_len for m in range(self.n + 1))

    @property
    def seed_len(self) -> int:
        return self.y_source.seed_len + self.z_source.seed_len + self.fill_seed_len

    def split_seed(self, seed: int) -> tuple:
        x_len, z_len = self.fill_seed_len, self.z_source.seed_len
        if not 0 <= seed < 1 << self.seed_len:
            raise ValueError("seed out of range")
        return seed >> (x_len + z_len), (seed >> x_len) & ((1 << z_len) - 1), seed & ((1 << x_len) - 1)

    def restriction(self, y_seed: int, z_seed: int) -> Restriction:
        return restriction_from_bits(self.y_source.generate(y_seed), self.z_source.generate(z_seed), self.n, self.q)

    def output(self, seed: int) -> np.ndarray:
        y_seed, z_seed, x_seed = self.split_seed(seed)
        rho = self.restriction(y_seed, z_seed)
        fill = self.fill_family(rho.num_live)
        # the low bits of a uniform seed are uniform over the shorter seed space
        x = bits_to_signs(fill.generate(x_seed & (fill.num_seeds - 1)))
        return np.asarray(rho.extend(x), dtype=np.int8)


def default_selection_source(n: int, q: int) -> SeededSource:
    """(1/n^4)-almost ceil(4 log2 n)-wise independent bits, q per variable."""
    return AlmostKwiseSource(q * n, max(2, math.ceil(4 * math.log2(n))), Fraction(1, n**4))


def prg_depth2(n: int, eps, seed: int, generator: Depth2Generator | None = None) -> np.ndarray:
    gen = generator or Depth2Generator.build(n, eps)
    if gen.n != n:
        raise ValueError("generator built for a different n")
    return gen.output(seed)


@dataclass
class Depth2Verdict:
    decision: str
    acceptance: Fraction
    n: int
    eps: Fraction
    q: int
    delta: float
    trivial_bottom_fraction: Fraction
    distinct_restrictions: int

    def to_dict(self) -> dict:
        return {
            "decision": self.decision,
            "acceptance": str(self.acceptance),
            "n": self.n,
            "eps": str(self.eps),
            "p": f"1/{1 << self.q}",
            "delta": self.delta,
            "trivial_bottom_fraction": str(self.trivial_bottom_fraction),
            "distinct_restrictions": self.distinct_restrictions,
        }


def _live_sets(gen: Depth2Generator, budget) -> Counter:
    counts: Counter = Counter()
    q, n = gen.q, gen.n
    for block in gen.y_source.blocks(budget):
        alive = block.reshape(len(block), n, q).all(axis=2)
        packed = np.packbits(alive, axis=1, bitorder="big")
        keys, freq = np.unique(packed, axis=0, return_counts=True)
        for key, c in zip(keys, freq):
            mask = np.unpackbits(key, bitorder="big")[:n]
            counts[tuple(int(i) for i in np.flatnonzero(mask))] += int(c)
    return counts


def _is_successful(C: ThresholdCircuit, rho: Restriction, min_live) -> bool:
    """Sufficient test: enough live variables and every bottom gate constant or a literal."""
    if rho.num_live < min_live:
        return False
    sub = restrict_circuit(C, rho)
    return all(literal_form(g) is not None for g in sub.layers[0])


def derandomize_depth2(C: ThresholdCircuit, eps, generator: Depth2Generator | None = None, budget: int | None = None) -> Depth2Verdict:
    """Average C over every generator seed; accept iff the average acceptance exceeds 1/2.

    The average is taken as E_y E_z E_x, which equals the flat average over
    packed seeds because each stage's seed space is a power of two.
    """
    if C.depth != 2:
        raise ValueError("derandomize_depth2 needs a depth-2 circuit")
    gen = generator or Depth2Generator.build(C.n, eps)
    if gen.n != C.n:
        raise ValueError("generator built for a different n")
    limit = resolve_budget(budget)
    n = C.n
    spent = 0
    fills = {}
    accept_total = Fraction(0)
    trivial_total = Fraction(0)
    distinct = 0
    min_live = gen.p * n / 2
    live_sets = _live_sets(gen, budget)
    for live, y_count in live_sets.items():
        fixed = [i for i in range(n) if i not in set(live)]
        groups: Counter = Counter()
        for block in gen.z_source.blocks(budget):
            sub = block[:, fixed] if fixed else np.zeros((len(block), 0), dtype=np.uint8)
            keys, freq = np.unique(sub, axis=0, return_counts=True)
            for key, c in zip(keys, freq):
                groups[tuple(int(b) for b in key)] += int(c)
        m = len(live)
        if m not in fills:
            fills[m] = bits_to_signs(np.concatenate(list(gen.fill_family(m).blocks(budget))))
        X = fills[m]
        inner = Fraction(0)
        trivial = Fraction(0)
        for zbits, z_count in groups.items():
            values = [STAR] * n
            for i, b in zip(fixed, zbits):
                values[i] = 1 - 2 * b
            rho = Restriction(tuple(values))
            spent += len(X)
            if spent > limit:
                raise BudgetExceeded(spent, limit, "depth-2 generator sweep")
            out = C.outputs(rho.extend_points(X))
            inner += Fraction(int(np.count_nonzero(out == -1)) * z_count, len(X))
            if _is_successful(C, rho, min_live):
                trivial += z_count
            distinct += 1
        accept_total += Fraction(y_count, gen.y_source.num_seeds) * inner / gen.z_source.num_seeds
        trivial_total += Fraction(y_count, gen.y_source.num_seeds) * trivial / gen.z_source.num_seeds
    decision = ACCEPT if accept_total > Fraction(1, 2) else REJECT
    return Depth2Verdict(decision, accept_total, n, Fraction(eps), gen.q, gen.delta, trivial_total, distinct)


# selection families that are p-bounded in pairs


@dataclass(frozen=True)
class BernoulliSelection:
    """Each variable alive independently with probability p."""

    p: Fraction

    def sample(self, m: int, rng) -> tuple:
        p = float(self.p)
        return tuple(i for i in range(m) if rng.random() < p)

    def pair_probabilities(self, m: int) -> tuple:
        return Fraction(self.p), Fraction(self.p) ** 2


@dataclass(frozen=True)
class PartitionSelection:
    """Split [m] into floor(p*m) consecutive blocks and keep one uniform variable per block."""

    p: Fraction

    def blocks(self, m: int) -> list:
        count = math.floor(Fraction(self.p) * m)
        if count == 0:
            return []
        bounds = [round(k * m / count) for k in range(count + 1)]
        return [range(bounds[k], bounds[k + 1]) for k in range(count)]

    def sample(self, m: int, rng) -> tuple:
        return tuple(rng.choice(b) for b in self.blocks(m))

    def pair_probabilities(self, m: int) -> tuple:
        """Largest singleton and pair inclusion probabilities."""
        blocks = self.blocks(m)
        if not blocks:
            return Fraction(0), Fraction(0)
        smallest = min(len(b) for b in blocks)
        single = Fraction(1, smallest)
        pair = single * single if len(blocks) > 1 else Fraction(0)
        return single, pair


def _depends_on_two(sub: LTF, exhaustive_limit: int) -> bool:
    m = sub.n
    if m < 2:
        return False
    if m <= exhaustive_limit:
        table = ltf_outputs(sub, points(m)).reshape((2,) * m)
        relevant = 0
        for axis in range(m):
            if np.any(np.take(table, 0, axis=axis) != np.take(table, 1, axis=axis)):
                relevant += 1
                if relevant >= 2:
                    return True
        return False
    return len(relevant_variables(sub)) >= 2


def harness_kw_restriction(
    phi: LTF,
    y_dist,
    z_source: SeededSource,
    trials: int,
    seed: int = 0,
    exhaustive_limit: int = 12,
):
    """Monte-Carlo rate at which the restricted gate depends on two or more inputs."""
    from .restriction import HarnessResult

    if not isinstance(y_dist, (BernoulliSelection, PartitionSelection)):
        raise TypeError("selection must be a bundled p-bounded-in-pairs family")
    if trials < 1:
        raise ValueError("trials must be positive")
    m = phi.n
    if z_source.out_len != m:
        raise ValueError("value source must cover all variables")
    rng = python_rng(seed, "kw-restriction")
    hits = 0
    sizes = Counter()
    for _ in range(trials):
        live = set(y_dist.sample(m, rng))
        z = z_source.generate(rng.getrandbits(z_source.seed_len))
        values = tuple(STAR if i in live else 1 - 2 * int(z[i]) for i in range(m))
        sub = restrict_ltf(phi, Restriction(values))
        sizes[len(live)] += 1
        if _depends_on_two(sub, exhaustive_limit):
            hits += 1
    return HarnessResult(
        Fraction(hits, trials),
        hits,
        trials,
        seed,
        {"p": str(y_dist.p), "family": type(y_dist).__name__, "live_sizes": dict(sorted(sizes.items()))},
    )


def kw_bound(m: int, p, slack: int = 8) -> Fraction:
    """slack * m * p^(3/2) for p a power of four, else a float."""
    p = Fraction(p)
    root = math.isqrt(p.denominator)
    if p.numerator == 1 and root * root == p.denominator:
        return slack * m * p / root
    return slack * m * float(p) ** 1.5
