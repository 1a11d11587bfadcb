"""Weak combinatorial designs built greedily and checked with exact integers."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .errors import ParameterInfeasible


def design_universe(ell: int, alpha) -> int:
    """t = ceil((1 + 4*alpha) * ell), exactly."""
    return math.ceil((1 + 4 * Fraction(alpha)) * ell)


def design_rho(ell: int, alpha) -> int:
    """rho = 2^((1-alpha)*ell); the exponent has to be an integer."""
    exponent = (1 - Fraction(alpha)) * ell
    if exponent.denominator != 1:
        raise ParameterInfeasible(f"(1-alpha)*ell = {exponent} is not an integer")
    return 1 << int(exponent)


def check_design_params(ell: int, alpha) -> tuple:
    alpha = Fraction(alpha)
    if not 0 < alpha < Fraction(1, 4):
        raise ParameterInfeasible("alpha must lie in (0, 1/4)")
    if ell < 1:
        raise ParameterInfeasible("ell must be positive")
    t = design_universe(ell, alpha)
    rho = design_rho(ell, alpha)
    if t > 2 * ell:
        raise ParameterInfeasible(f"t = {t} exceeds 2*ell = {2 * ell}")
    return t, rho


def design_blocks(ell: int, t: int) -> list:
    """t-ell pairs {2j, 2j+1} followed by 2*ell-t singletons."""
    pairs = t - ell
    return [(2 * j, 2 * j + 1) for j in range(pairs)] + [(pairs + j,) for j in range(pairs, ell)]


def selection(ell: int, t: int, choice: int) -> tuple:
    """The set picking, in pair j, element 2j + (bit j of `choice`, block 0 most significant)."""
    pairs = t - ell
    chosen = [2 * j + ((choice >> (pairs - 1 - j)) & 1) for j in range(pairs)]
    chosen.extend(range(2 * pairs, t))
    return tuple(chosen)


def intersection_sum(sets, i: int) -> int:
    """sum over j < i of 2^|S_i & S_j|."""
    target = set(sets[i])
    return sum(1 << len(target.intersection(sets[j])) for j in range(i))


@dataclass(frozen=True)
class WeakDesign:
    m: int
    ell: int
    t: int
    alpha: Fraction
    rho: int
    sets: tuple

    def certificate(self) -> list:
        return [intersection_sum(self.sets, i) for i in range(self.m)]

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "ell": self.ell,
            "t": self.t,
            "alpha": str(self.alpha),
            "rho": self.rho,
            "sets": [list(s) for s in self.sets],
            "certificate": self.certificate(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "WeakDesign":
        design = cls(
            int(doc["m"]),
            int(doc["ell"]),
            int(doc["t"]),
            Fraction(doc["alpha"]),
            int(doc["rho"]),
            tuple(tuple(sorted(int(v) for v in s)) for s in doc["sets"]),
        )
        if "certificate" in doc and list(doc["certificate"]) != design.certificate():
            raise ValueError("stored certificate does not match the sets")
        return design


def build_weak_design(m: int, ell: int, alpha, rho: int | None = None) -> WeakDesign:
    """Greedy first-hit construction over one-element-per-block selections.

    `rho` overrides 2^((1-alpha)*ell) with a tighter intersection budget
    (used by tiny sampler instances); the search fails loudly if it is too tight.
    """
    if m < 1:
        raise ParameterInfeasible("m must be positive")
    alpha = Fraction(alpha)
    t, default_rho = check_design_params(ell, alpha)
    if rho is None:
        rho = default_rho
    elif rho < 1:
        raise ParameterInfeasible("rho must be positive")
    sets = []
    for i in range(m):
        bound = i * rho
        for choice in range(1 << (t - ell)):
            candidate = selection(ell, t, choice)
            cs = set(candidate)
            if sum(1 << len(cs.intersection(s)) for s in sets) <= bound:
                sets.append(candidate)
                break
        else:
            raise ParameterInfeasible(f"no selection satisfies the prefix bound for set {i} with rho = {rho}")
    return WeakDesign(m, ell, t, alpha, rho, tuple(sets))


def verify_weak_design(D: WeakDesign, form: str = "prefix") -> bool:
    """Exact check of sizes, ranges and intersection sums.

    form="prefix" requires sum_{j<i} 2^|S_i & S_j| <= (i-1)*rho for the i-th set
    (1-based); form="total" only requires <= (m-1)*rho.
    """
    if form not in ("prefix", "total"):
        raise ValueError("form must be 'prefix' or 'total'")
    if len(D.sets) != D.m:
        return False
    for s in D.sets:
        if len(set(s)) != D.ell or len(s) != D.ell or any(not 0 <= v < D.t for v in s):
            return False
    for i in range(D.m):
        bound = (i if form == "prefix" else D.m - 1) * D.rho
        if intersection_sum(D.sets, i) > bound:
            return False
    return True


def feasible_grid(ells=(4, 5, 8, 10), alphas=(Fraction(1, 5), Fraction(1, 8)), ms=(1, 2, 8, 64)):
    """Split a parameter grid into feasible points and (point, reason) rejects."""
    ok, rejected = [], []
    for ell in ells:
        for alpha in alphas:
            try:
                check_design_params(ell, alpha)
            except ParameterInfeasible as exc:
                rejected.extend(((m, ell, Fraction(alpha)), str(exc)) for m in ms)
                continue
            ok.extend((m, ell, Fraction(alpha)) for m in ms)
    return ok, rejected
