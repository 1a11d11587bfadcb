"""Structural analysis of threshold gates: regularity, critical index, balance.

Norm comparisons are made between squares so everything stays rational.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .circuit import LTF


@dataclass(frozen=True)
class RegularityReport:
    epsilon: Fraction
    regular: bool
    witness: int | None = None  # 0-based index of the first violating coordinate

    def __post_init__(self):
        if self.regular != (self.witness is None):
            raise ValueError("witness must be present exactly when not regular")


@dataclass(frozen=True)
class CriticalIndexResult:
    h: int
    order: tuple  # original indices sorted by decreasing magnitude

    def head(self) -> tuple:
        return self.order[: self.h]

    def tail(self) -> tuple:
        return self.order[self.h :]


def _check_nonzero(w: Sequence[int]):
    if not any(w):
        raise ValueError("all-zero weight vector")


def is_regular(w: Sequence[int], eps) -> RegularityReport:
    w = [int(v) for v in w]
    _check_nonzero(w)
    eps = Fraction(eps)
    bound = eps * eps * sum(v * v for v in w)
    for i, v in enumerate(w):
        if v * v > bound:
            return RegularityReport(eps, False, i)
    return RegularityReport(eps, True)


def _suffix_regular(squares: list, start: int, suffix_norm: int, eps_sq: Fraction) -> bool:
    # squares sorted descending, so the suffix maximum is its first entry
    if start >= len(squares):
        return True
    return squares[start] <= eps_sq * suffix_norm


def critical_index(w: Sequence[int], eps) -> CriticalIndexResult:
    w = [int(v) for v in w]
    _check_nonzero(w)
    eps_sq = Fraction(eps) ** 2
    order = tuple(sorted(range(len(w)), key=lambda i: (-abs(w[i]), i)))
    squares = [w[i] * w[i] for i in order]
    suffix = sum(squares)
    for h in range(1, len(w) + 1):
        suffix -= squares[h - 1]
        if _suffix_regular(squares, h, suffix, eps_sq):
            return CriticalIndexResult(h, order)
    raise AssertionError("unreachable: the empty suffix is regular")


def norm_sq(phi: LTF) -> int:
    return sum(w * w for w in phi.weights)


def is_t_balanced(phi: LTF, t) -> bool:
    t = Fraction(t)
    return is_balanced_sq(phi, t * t)


def is_balanced_sq(phi: LTF, t_squared) -> bool:
    """Balance test given t**2 directly (for irrational t with rational square)."""
    ns = norm_sq(phi)
    if ns == 0:
        raise ValueError("all-zero weight vector")
    theta = phi.threshold
    return theta * theta <= Fraction(t_squared) * ns


def imbalanced_majority_value(phi: LTF) -> int:
    if phi.threshold == 0:
        raise ValueError("threshold 0: no majority value for an imbalanced gate")
    return -1 if phi.threshold > 0 else 1


def sum_distribution(w: Sequence[int]) -> Counter:
    """Map each achievable value of <w, x> to the number of x in {-1,1}^n reaching it."""
    dist = Counter({0: 1})
    for v in w:
        v = int(v)
        if v == 0:
            dist = Counter({s: 2 * c for s, c in dist.items()})
            continue
        nxt = Counter()
        for s, c in dist.items():
            nxt[s + v] += c
            nxt[s - v] += c
        dist = nxt
    return dist


def achievable_sums(w: Sequence[int]) -> list:
    return sorted(sum_distribution(w))


def acceptance_count_ltf(phi: LTF) -> int:
    """Count of x with <w,x> < theta, computed from the sum distribution."""
    return sum(c for s, c in sum_distribution(phi.weights).items() if s < phi.threshold)


def constant_value(phi: LTF) -> int | None:
    """The constant a gate computes, or None if it takes both values.

    With sgn(0) = +1 the gate is constant +1 iff theta <= -|w|_1 and constant
    -1 iff theta > |w|_1.
    """
    l1 = sum(abs(w) for w in phi.weights)
    if phi.threshold > l1:
        return -1
    if phi.threshold <= -l1:
        return 1
    return None


def is_relevant(phi: LTF, i: int) -> bool:
    """Exact test whether flipping coordinate i can change the output."""
    wi = abs(phi.weights[i])
    if wi == 0:
        return False
    rest = phi.weights[:i] + phi.weights[i + 1 :]
    theta = phi.threshold
    # output differs iff some achievable s satisfies s - wi < theta <= s + wi
    return any(theta - wi <= s < theta + wi for s in sum_distribution(rest))


def relevant_variables(phi: LTF) -> tuple:
    return tuple(i for i in range(phi.n) if is_relevant(phi, i))


def literal_form(phi: LTF) -> tuple | None:
    """Describe a gate that depends on at most one variable.

    Returns ("const", value) or ("var", index, sign) where the gate equals
    sign * x[index]; None when the gate depends on two or more variables.
    """
    const = constant_value(phi)
    if const is not None:
        return ("const", const)
    support = phi.support
    if len(support) == 1:
        i = support[0]
        w = phi.weights[i]
        hi = 1 if w - phi.threshold >= 0 else -1
        lo = 1 if -w - phi.threshold >= 0 else -1
        if hi == lo:
            return ("const", hi)
        return ("var", i, hi)
    relevant = relevant_variables(phi)
    if len(relevant) >= 2:
        return None
    # a non-constant gate has at least one relevant variable
    i = relevant[0]
    x = [1] * phi.n
    s = sum(w * v for w, v in zip(phi.weights, x))
    return ("var", i, 1 if s >= phi.threshold else -1)
