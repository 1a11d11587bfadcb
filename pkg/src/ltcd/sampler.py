"""Averaging samplers over weak designs, and the majority-of-samples reduction circuit.

Samp(x, z) reads m codeword coordinates of ECC(x); coordinate i is addressed
by the bits of the seed z inside the i-th design set (first element most
significant).
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable

import numpy as np

from .circuit import LTF, ThresholdCircuit, ThresholdNetwork
from .codes import LinearCode, all_messages, emit_linear_circuit
from .designs import WeakDesign, build_weak_design, check_design_params
from .errors import ParameterInfeasible, charge
from .seeding import numpy_rng


def _exact_log2(value: int) -> float:
    if value > 0 and value & (value - 1) == 0:
        return value.bit_length() - 1
    return math.log2(value)


@dataclass(eq=False)
class SamplerSpec:
    n: int
    m: int
    k: int
    eps: Fraction
    delta_code: Fraction
    ell: int
    alpha: Fraction
    t: int
    rho: int
    d: int | None = None
    gamma: Fraction | None = None
    beta: Fraction | None = None
    c: int | None = None
    c_prime: int | None = None
    design: WeakDesign | None = None
    code: LinearCode | None = None
    mode: str = "derived"
    notes: dict = field(default_factory=dict)

    @property
    def code_length(self) -> int:
        return 1 << self.ell

    def condition_slack(self) -> Fraction:
        """(k - 3*log2(m/eps) - t - 3)/m - rho; exact when m/eps is a power of two."""
        ratio = Fraction(self.m) / self.eps
        if ratio.denominator == 1 and ratio.numerator & (ratio.numerator - 1) == 0:
            log_term = Fraction(ratio.numerator.bit_length() - 1)
        else:
            log_term = Fraction(math.log2(ratio))
        return Fraction(self.k - 3 * log_term - self.t - 3, self.m) - self.rho

    @property
    def design_condition_ok(self) -> bool:
        return self.condition_slack() >= 0

    def to_dict(self) -> dict:
        out = {
            "mode": self.mode,
            "n": _big(self.n),
            "m": _big(self.m),
            "k": _big(self.k),
            "eps": str(self.eps),
            "delta_code": str(self.delta_code),
            "ell": self.ell,
            "alpha": str(self.alpha),
            "t": self.t,
            "rho": _big(self.rho),
            "design_condition_ok": self.design_condition_ok,
            "notes": self.notes,
        }
        for key in ("d", "gamma", "beta", "c", "c_prime"):
            value = getattr(self, key)
            if value is not None:
                out[key] = str(value)
        if self.design is not None:
            out["design"] = self.design.to_dict()
            out["design_ref"] = content_hash(out["design"])
        if self.code is not None:
            out["code"] = self.code.to_dict()
            out["code_ref"] = content_hash(out["code"])
        return out


def content_hash(doc) -> str:
    """sha256 of the canonical JSON text, shortened to 16 hex digits."""
    text = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _big(value: int):
    """Ints beyond 2^53 go out as strings, with a log2 for readability."""
    if abs(value) < 1 << 53:
        return value
    return {"value": str(value), "log2": _exact_log2(value)}


def derive_sampler_params(n: int, d: int, gamma, beta, c: int = 2, c_prime: int = 2) -> SamplerSpec:
    """Asymptotic sampler parameters, with integrality fixed by rounding.

    m = 2^floor(gamma*log2 n), k = 2^floor(beta*log2 n), eps = 1/m,
    delta_code = eps/4m, block length padded to 2^ell with
    ell = ceil(log2 n) + 2*c_prime*3^d*log2 m, and alpha raised to the next
    value making (1 - alpha)*ell an integer.
    """
    gamma, beta = Fraction(gamma), Fraction(beta)
    if beta < Fraction(4, 5) or beta > 1:
        raise ParameterInfeasible("beta must lie in [4/5, 1]")
    if not 0 < gamma <= Fraction(1, c * d * 3**d):
        raise ParameterInfeasible(f"gamma must lie in (0, 1/(c*d*3^d)] = (0, 1/{c * d * 3**d}]")
    if n < 2:
        raise ParameterInfeasible("n must be at least 2")
    log_n = _exact_log2(n)
    log_m = math.floor(gamma * log_n)
    if log_m < 1:
        raise ParameterInfeasible(f"m = n^gamma < 2 at n = 2^{log_n}")
    m = 1 << log_m
    k = 1 << math.floor(beta * log_n)
    eps = Fraction(1, m)
    delta_code = eps / (4 * m)
    # block length n * (m/eps)^(c' 3^d) = n * m^(2 c' 3^d), padded to a power of two
    ell = math.ceil(log_n) + 2 * c_prime * 3**d * log_m
    alpha_formula = 1 - beta + c * 3 ** (d + 1) * gamma
    alpha = 1 - Fraction(math.floor((1 - alpha_formula) * ell), ell)
    notes = {"alpha_formula": str(alpha_formula), "alpha_rounded_up": alpha != alpha_formula}
    if not 0 < alpha < Fraction(1, 4):
        raise ParameterInfeasible(f"alpha = {alpha} is outside (0, 1/4)")
    t, rho = check_design_params(ell, alpha)
    spec = SamplerSpec(n, m, k, eps, delta_code, ell, alpha, t, rho, d, gamma, beta, c, c_prime, mode="derived", notes=notes)
    notes["outputs_log2"] = t
    notes["outputs_exponent"] = t / log_n
    notes["exponent_target_factor"] = str(5 - 4 * beta)
    if not spec.design_condition_ok:
        raise ParameterInfeasible(
            f"design condition rho <= (k - 3 log(m/eps) - t - 3)/m fails by {float(-spec.condition_slack()):.4g}"
        )
    return spec


def max_bias(code: LinearCode, budget: int | None = None) -> Fraction:
    """max over nonzero messages of |weight/length - 1/2|."""
    words = (all_messages(code.r, budget).astype(np.int64) @ code.generator.astype(np.int64)) % 2
    weights = words.sum(axis=1)[1:]
    return Fraction(int(np.abs(2 * weights - code.rbar).max()), 2 * code.rbar)


def low_bias_code(n: int, length: int, seed: int = 0, tries: int = 300) -> LinearCode:
    """Best of `tries` seeded random [length, n] codes by maximal bias."""
    rng = numpy_rng(seed, "sampler-code", n, length)
    best, best_bias = None, None
    for _ in range(tries):
        G = rng.integers(0, 2, size=(n, length), dtype=np.uint8)
        code = LinearCode.certify(G)
        if code.distance == 0:
            continue
        b = max_bias(code)
        if best is None or b < best_bias:
            best, best_bias = code, b
    if best is None:
        raise ParameterInfeasible("no injective code found")
    return best


def _tightest_design(m: int, ell: int, alpha) -> WeakDesign:
    _, default_rho = check_design_params(ell, alpha)
    rho = 1
    while rho < default_rho:
        try:
            return build_weak_design(m, ell, alpha, rho)
        except ParameterInfeasible:
            rho *= 2
    return build_weak_design(m, ell, alpha)


def desk_sampler_spec(n: int = 8, m: int = 2, ell: int = 5, alpha=Fraction(1, 5), eps=Fraction(1, 4), k: int = 2, rho="auto", code: LinearCode | None = None, seed: int = 0) -> SamplerSpec:
    """A tiny sampler decoupled from the asymptotic formulas.

    The code is a low-bias random code of length 2^ell and the design uses
    the intersection budget `rho`: None keeps 2^((1-alpha)*ell), "auto" takes
    the smallest power of two for which the greedy design exists.
    """
    alpha = Fraction(alpha)
    code = code or low_bias_code(n, 1 << ell, seed)
    if code.r != n or code.rbar != 1 << ell:
        raise ValueError("code must map n bits to 2^ell bits")
    design = _tightest_design(m, ell, alpha) if rho == "auto" else build_weak_design(m, ell, alpha, rho)
    eps = Fraction(eps)
    spec = SamplerSpec(n, m, k, eps, eps / (4 * m), ell, alpha, design.t, design.rho, design=design, code=code, mode="desk")
    spec.notes["design_condition_slack"] = str(spec.condition_slack())
    spec.notes["code_bias"] = str(max_bias(code))
    spec.notes["error_2^(k-n)"] = str(Fraction(1 << k, 1 << n))
    return spec


def pad_code(code: LinearCode, length: int) -> LinearCode:
    """Append zero coordinates up to `length` and re-certify the distance."""
    if length < code.rbar:
        raise ValueError("padding cannot shorten a code")
    G = np.zeros((code.r, length), dtype=np.uint8)
    G[:, : code.rbar] = code.generator
    return LinearCode.certify(G)


def pad_network(net: ThresholdNetwork, length: int) -> ThresholdNetwork:
    """Extend the output layer with constant +1 gates (bit 0) up to `length` outputs."""
    if length < net.width:
        raise ValueError("padding cannot drop outputs")
    if length == net.width:
        return net
    arity = len(net.layers[-2]) if net.depth > 1 else net.n
    last = net.layers[-1] + tuple(LTF.constant(1, arity) for _ in range(length - net.width))
    return ThresholdNetwork(net.n, net.layers[:-1] + (last,))


def seed_addresses(spec: SamplerSpec) -> np.ndarray:
    """(2^t, m) table: codeword coordinate read by output i under seed z."""
    if spec.design is None:
        raise ValueError("spec has no concrete design")
    t = spec.t
    z = np.arange(1 << t, dtype=np.int64)
    cols = []
    for S in spec.design.sets:
        addr = np.zeros(1 << t, dtype=np.int64)
        for pos in S:
            addr = (addr << 1) | ((z >> (t - 1 - pos)) & 1)
        cols.append(addr)
    return np.stack(cols, axis=1)


@lru_cache(maxsize=4096)
def _codeword(code_key: bytes, shape: tuple, x_key: bytes) -> np.ndarray:
    G = np.frombuffer(code_key, dtype=np.uint8).reshape(shape)
    x = np.frombuffer(x_key, dtype=np.uint8)
    word = ((x.astype(np.int64) @ G.astype(np.int64)) % 2).astype(np.uint8)
    word.setflags(write=False)
    return word


def codeword(spec: SamplerSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.uint8)
    G = spec.code.generator
    return _codeword(G.tobytes(), G.shape, x.tobytes())


def _address(spec: SamplerSpec, z: int, S) -> int:
    if not 0 <= z < 1 << spec.t:
        raise IndexError(f"seed {z} outside [0, 2^{spec.t})")
    a = 0
    for pos in S:
        a = (a << 1) | ((z >> (spec.t - 1 - pos)) & 1)
    return a


def sample_output(x, z: int, spec: SamplerSpec) -> np.ndarray:
    """m output bits for message x and seed z (an int whose bit t-1-j is z_j)."""
    x = np.asarray(x, dtype=np.uint8)
    if len(x) != spec.n:
        raise IndexError("message length does not match the sampler")
    word = codeword(spec, x)
    return np.array([word[_address(spec, z, S)] for S in spec.design.sets], dtype=np.uint8)


def _packed_outputs(words: np.ndarray, addr: np.ndarray) -> np.ndarray:
    out = np.zeros((words.shape[0], addr.shape[0]), dtype=np.int64)
    for i in range(addr.shape[1]):
        out = (out << 1) | words[:, addr[:, i]]
    return out


def sample_table(spec: SamplerSpec, budget: int | None = None) -> np.ndarray:
    """(2^n, 2^t) table of outputs packed as integers (output bit 0 most significant)."""
    charge((1 << spec.n) * (1 << spec.t), budget, "sampler table")
    words = (all_messages(spec.n, budget).astype(np.int64) @ spec.code.generator.astype(np.int64)) % 2
    return _packed_outputs(words, seed_addresses(spec))


def output_histograms(spec: SamplerSpec, budget: int | None = None, chunk_cells: int = 1 << 22) -> np.ndarray:
    """H[x, o] = number of seeds z with Samp(x, z) = o, built in chunks of x."""
    charge((1 << spec.n) * (1 << spec.t), budget, "sampler histogram")
    addr = seed_addresses(spec)
    G = spec.code.generator.astype(np.int64)
    size = 1 << spec.m
    N = 1 << spec.n
    H = np.zeros((N, size), dtype=np.int64)
    step = max(1, chunk_cells >> spec.t)
    shifts = np.arange(spec.n - 1, -1, -1)
    for lo in range(0, N, step):
        xs = np.arange(lo, min(N, lo + step))
        msgs = (xs[:, None] >> shifts) & 1
        out = _packed_outputs((msgs @ G) % 2, addr)
        rows = np.arange(len(xs))[:, None] * size
        H[lo : lo + len(xs)] = np.bincount((rows + out).ravel(), minlength=len(xs) * size).reshape(len(xs), size)
    return H


def _mask(test_set, m: int) -> np.ndarray:
    mask = np.zeros(1 << m, dtype=bool)
    for o in test_set:
        if not 0 <= o < 1 << m:
            raise ValueError("test set element out of range")
        mask[o] = True
    return mask


@dataclass
class SamplerReport:
    eps: Fraction
    delta: Fraction
    per_set: list
    worst_bad_fraction: Fraction

    @property
    def ok(self) -> bool:
        return self.worst_bad_fraction <= self.delta

    def to_dict(self) -> dict:
        return {
            "eps": str(self.eps),
            "delta": str(self.delta),
            "sets": len(self.per_set),
            "worst_bad_fraction": str(self.worst_bad_fraction),
            "ok": self.ok,
            "per_set": [{"T": list(T), "bad": str(b)} for T, b in self.per_set],
        }


def bad_fraction(H: np.ndarray, test_set, m: int, t: int, eps) -> Fraction:
    """Fraction of x with |Pr_z[Samp(x,z) in T] - |T|/2^m| > eps, exactly."""
    mask = _mask(test_set, m)
    hits = H[:, mask].sum(axis=1)  # Pr = hits / 2^t
    density = Fraction(int(mask.sum()), 1 << m)
    # |hits/2^t - density| > eps  <=>  |hits*den - num*2^t| * eps.den > eps.num * den * 2^t
    eps = Fraction(eps)
    lhs = np.abs(hits.astype(object) * density.denominator - density.numerator * (1 << t)) * eps.denominator
    rhs = eps.numerator * density.denominator * (1 << t)
    return Fraction(int(np.count_nonzero(lhs > rhs)), H.shape[0])


def random_test_sets(m: int, count: int, seed: int = 0) -> list:
    rng = numpy_rng(seed, "test-sets", m)
    sets = []
    for _ in range(count):
        keep = rng.integers(0, 2, size=1 << m).astype(bool)
        sets.append(tuple(int(o) for o in np.flatnonzero(keep)))
    return sets


def all_test_sets(m: int) -> list:
    size = 1 << m
    return [tuple(o for o in range(size) if mask >> o & 1) for mask in range(1 << size)]


def verify_sampler(spec: SamplerSpec, eps, delta, test_sets: Iterable, budget: int | None = None, H: np.ndarray | None = None) -> SamplerReport:
    H = output_histograms(spec, budget) if H is None else H
    per_set = []
    worst = Fraction(0)
    for T in test_sets:
        T = tuple(sorted(set(T)))
        b = bad_fraction(H, T, spec.m, spec.t, eps)
        per_set.append((T, b))
        worst = max(worst, b)
    return SamplerReport(Fraction(eps), Fraction(delta), per_set, worst)


def extractor_error(H: np.ndarray, m: int, t: int, support: int) -> Fraction:
    """Worst statistical distance from uniform over flat sources with `support` points.

    For a test T the extreme flat sources are the `support` inputs with the
    largest or smallest Pr_z[Samp(x,z) in T]; all 2^(2^m) tests are tried.
    """
    N = H.shape[0]
    if not 1 <= support <= N:
        raise ValueError("flat source size out of range")
    worst = Fraction(0)
    for T in all_test_sets(m):
        mask = _mask(T, m)
        hits = np.sort(H[:, mask].sum(axis=1))
        density = Fraction(int(mask.sum()), 1 << m)
        top = Fraction(int(hits[N - support :].sum()), support << t)
        bottom = Fraction(int(hits[:support].sum()), support << t)
        worst = max(worst, top - density, density - bottom)
    return worst


def side_counts(H: np.ndarray, m: int, t: int, eps) -> int:
    """Largest number of x on one side (above or below) beyond accuracy eps, over all tests."""
    eps = Fraction(eps)
    worst = 0
    for T in all_test_sets(m):
        mask = _mask(T, m)
        hits = H[:, mask].sum(axis=1).astype(object)
        density = Fraction(int(mask.sum()), 1 << m)
        scaled = hits * density.denominator * eps.denominator
        centre = density.numerator * (1 << t) * eps.denominator
        slack = eps.numerator * density.denominator * (1 << t)
        worst = max(worst, int(np.count_nonzero(scaled - centre > slack)), int(np.count_nonzero(centre - scaled > slack)))
    return worst


def check_extractor_equivalence(spec: SamplerSpec, k: int, eps, delta, budget: int | None = None) -> dict:
    """Cross-check the sampler verdict with exact extractor errors.

    Direction 1: with e = extractor error at min-entropy k, fewer than 2^k
    inputs sit beyond accuracy e on either side of any test.  Direction 2:
    an (eps, delta) sampler must be a (n - log2(eps/delta), 2*eps) extractor.
    """
    if not 0 <= k <= spec.n:
        raise ValueError("min-entropy must lie in [0, n]")
    H = output_histograms(spec, budget)
    m, t, n = spec.m, spec.t, spec.n
    err_k = extractor_error(H, m, t, 1 << k)
    per_side = side_counts(H, m, t, err_k)
    report_k = verify_sampler(spec, err_k, Fraction(1 << k, 1 << n), all_test_sets(m), H=H)
    eps, delta = Fraction(eps), Fraction(delta)
    sampler = verify_sampler(spec, eps, delta, all_test_sets(m), H=H)
    k2 = n - math.log2(eps / delta) if delta > 0 else float("-inf")
    support2 = max(1, math.ceil(2 ** k2 - 1e-9)) if k2 > -1 else 1
    support2 = min(support2, 1 << n)
    err2 = extractor_error(H, m, t, support2)
    return {
        "k": k,
        "extractor_error": str(err_k),
        "max_one_sided_bad": per_side,
        "one_sided_below_2^k": per_side < (1 << k),
        "sampler_bad_at_extractor_error": str(report_k.worst_bad_fraction),
        "total_within_2^(k-n)": report_k.ok,
        "sampler_ok": sampler.ok,
        "sampler_worst_bad": str(sampler.worst_bad_fraction),
        "implied_min_entropy": k2,
        "implied_source_size": support2,
        "implied_extractor_error": str(err2),
        "implied_within_2eps": err2 <= 2 * eps,
        "consistent": per_side < (1 << k) and (not sampler.ok or err2 <= 2 * eps),
    }


# reduction circuit


@dataclass
class ReductionCircuit:
    circuit: ThresholdCircuit
    sampler_depth: int
    copies: int
    notes: dict = field(default_factory=dict)

    @property
    def depth(self) -> int:
        return self.circuit.depth

    def to_dict(self) -> dict:
        return {
            "depth": self.depth,
            "sampler_depth": self.sampler_depth,
            "copies": self.copies,
            "wires": self.circuit.wire_count,
            "gates": self.circuit.size,
            **self.notes,
        }


def sampler_network(spec: SamplerSpec, code_network: ThresholdNetwork | None = None) -> ThresholdNetwork:
    """Code circuit followed by one pass-through gate per (seed, output) pair."""
    net = code_network or emit_linear_circuit(spec.code.generator.T)
    if net.n != spec.n or net.width != spec.code_length:
        raise ValueError("code network does not match the sampler code")
    addr = seed_addresses(spec)
    width = spec.code_length
    projection = []
    for z in range(1 << spec.t):
        for i in range(spec.m):
            w = [0] * width
            w[int(addr[z, i])] = 1
            projection.append(LTF(tuple(w), 0))
    return ThresholdNetwork(spec.n, net.layers + (tuple(projection),))


def _copies(C: ThresholdCircuit, copies: int) -> tuple:
    """Layers running `copies` disjoint copies of C side by side."""
    layers = []
    width = C.n
    for layer in C.layers:
        out = []
        total = width * copies
        for c in range(copies):
            offset = c * width
            for g in layer:
                w = [0] * total
                w[offset : offset + width] = g.weights
                out.append(LTF(tuple(w), g.threshold))
        layers.append(tuple(out))
        width = len(layer)
    return tuple(layers)


def build_reduction_circuit(C: ThresholdCircuit, spec: SamplerSpec, code_network: ThresholdNetwork | None = None, budget: int | None = None) -> ReductionCircuit:
    """C'(x) = MAJ over seeds z of C(Samp(x, z)); ties go to +1."""
    if C.n != spec.m:
        raise ValueError(f"circuit arity {C.n} != sampler output length {spec.m}")
    copies = 1 << spec.t
    charge(copies * max(1, C.wire_count), budget, "reduction circuit wires")
    samp = sampler_network(spec, code_network)
    top = (LTF.majority(copies),)
    circuit = ThresholdCircuit(spec.n, samp.layers + _copies(C, copies) + (top,))
    notes = {
        "code_depth": samp.depth - 1,
        "inner_depth": C.depth,
        "sampler_wires": samp.wire_count,
        "wires_log_n": math.log(circuit.wire_count, spec.n) if spec.n > 1 else None,
    }
    return ReductionCircuit(circuit, samp.depth, copies, notes)


def direct_composition(C: ThresholdCircuit, spec: SamplerSpec, x) -> int:
    """MAJ_z C(Samp(x, z)) computed directly, ties to +1."""
    total = 0
    for z in range(1 << spec.t):
        bits = sample_output(x, z, spec)
        total += C(tuple(1 - 2 * int(b) for b in bits))
    return 1 if total >= 0 else -1


def composed_outputs(C: ThresholdCircuit, spec: SamplerSpec, budget: int | None = None) -> np.ndarray:
    """MAJ_z C(Samp(x, z)) for every x, from the sample table and C's truth table."""
    table = sample_table(spec, budget)
    size = 1 << spec.m
    shifts = np.arange(spec.m - 1, -1, -1)
    values = C.outputs(1 - 2 * ((np.arange(size)[:, None] >> shifts) & 1))
    totals = values[table].sum(axis=1)
    return np.where(totals >= 0, 1, -1)
