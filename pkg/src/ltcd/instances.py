"""Small hand-built circuits and gates used by tests, harnesses and the CLI."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .circuit import LTF, ThresholdCircuit
from .seeding import python_rng


def pattern_gate(pattern: Sequence[int]) -> LTF:
    """+1 exactly on `pattern` (a ±1 vector), -1 elsewhere."""
    pattern = tuple(int(v) for v in pattern)
    if any(v not in (-1, 1) for v in pattern):
        raise ValueError("pattern entries must be ±1")
    return LTF(pattern, Fraction(2 * len(pattern) - 1, 2))


def and_of_rejections(k: int) -> LTF:
    """Top gate that accepts iff all k inputs accept."""
    return LTF((1,) * k, Fraction(-2 * k + 1, 2))


def near_constant_circuit(n: int, rejected: Sequence[Sequence[int]]) -> ThresholdCircuit:
    """Depth-2 circuit rejecting exactly the listed ±1 points."""
    rejected = [tuple(p) for p in rejected]
    if not rejected:
        # one gate that is -1 everywhere, passed through
        return ThresholdCircuit(n, ((LTF((1,) * n, Fraction(2 * n + 1, 2)),), (LTF((1,), 0),)))
    if any(len(p) != n for p in rejected):
        raise ValueError("pattern length must equal n")
    bottom = tuple(pattern_gate(p) for p in dict.fromkeys(rejected))
    return ThresholdCircuit(n, (bottom, (and_of_rejections(len(bottom)),)))


def random_patterns(n: int, count: int, seed: int) -> list:
    rng = python_rng(seed, "patterns", n, count)
    chosen = set()
    while len(chosen) < min(count, 1 << n):
        chosen.add(tuple(rng.choice((-1, 1)) for _ in range(n)))
    return sorted(chosen)


def random_depth2(n: int, gates: int, fan_in: int, seed: int, max_weight: int = 3) -> ThresholdCircuit:
    rng = python_rng(seed, "depth2", n, gates, fan_in)
    bottom = []
    for _ in range(gates):
        support = rng.sample(range(n), min(fan_in, n))
        w = [0] * n
        for i in support:
            w[i] = rng.choice([v for v in range(-max_weight, max_weight + 1) if v])
        bottom.append(LTF(tuple(w), rng.randint(-max_weight, max_weight)))
    top = LTF(tuple(rng.choice((-1, 1)) for _ in range(gates)), rng.randint(-1, 1))
    return ThresholdCircuit(n, (tuple(bottom), (top,)))


def random_circuit(n: int, widths: Sequence[int], fan_in: int, seed: int, max_weight: int = 3) -> ThresholdCircuit:
    """Random layered circuit; `widths` lists gate counts per layer, ending with 1."""
    if not widths or widths[-1] != 1:
        raise ValueError("the last layer must have exactly one gate")
    rng = python_rng(seed, "circuit", n, tuple(widths), fan_in)
    layers, arity = [], n
    for width in widths:
        layer = []
        for _ in range(width):
            support = rng.sample(range(arity), min(fan_in, arity))
            w = [0] * arity
            for i in support:
                w[i] = rng.choice([v for v in range(-max_weight, max_weight + 1) if v])
            layer.append(LTF(tuple(w), rng.randint(-max_weight, max_weight)))
        layers.append(tuple(layer))
        arity = width
    return ThresholdCircuit(n, tuple(layers))


def majority_weights(n: int) -> LTF:
    return LTF.majority(n)


def geometric_ltf(n: int, ratio: int = 2) -> LTF:
    """Weights ratio^(n-1), ..., 1: the critical index is as large as it gets."""
    return LTF(tuple(ratio ** (n - 1 - i) for i in range(n)), 0)


@dataclass(frozen=True)
class CuratedInstance:
    name: str
    circuit: ThresholdCircuit
    expected: str  # "accept" or "reject"
    exceptions: int  # inputs on the minority side

    @property
    def n(self) -> int:
        return self.circuit.n


def curated_family(n: int, counts: Sequence[int] = (0, 1, 3), seed: int = 0) -> list:
    """Depth-2 circuits accepting all but a few inputs, plus their negations."""
    out = []
    for k in counts:
        C = near_constant_circuit(n, random_patterns(n, k, seed) if k else [])
        out.append(CuratedInstance(f"accept-all-but-{k}", C, "accept", k))
        out.append(CuratedInstance(f"reject-all-but-{k}", C.negated(), "reject", k))
    return out
