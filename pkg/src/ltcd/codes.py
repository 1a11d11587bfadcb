"""Linear codes with threshold-circuit encoders.

Bits are numpy uint8 arrays.  In circuits a bit b travels as the sign (-1)^b,
so parity becomes a product of signs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .circuit import LTF, ThresholdNetwork, points
from .errors import ParameterInfeasible, charge
from .seeding import numpy_rng


def _bits(x) -> np.ndarray:
    arr = np.asarray(x, dtype=np.uint8)
    if arr.ndim != 1 or np.any(arr > 1):
        raise ValueError("expected a 1-d array of bits")
    return arr


def all_messages(r: int, budget: int | None = None) -> np.ndarray:
    """Every r-bit message as rows, lexicographic with bit 0 most significant."""
    charge(1 << r, budget, "message enumeration")
    return ((1 - points(r)) // 2).astype(np.uint8)


def min_relative_weight(generator: np.ndarray, budget: int | None = None) -> Fraction:
    """Least relative weight over nonzero codewords, by enumeration."""
    r, length = generator.shape
    if r == 0:
        return Fraction(1)
    msgs = all_messages(r, budget)[1:]
    weights = (msgs.astype(np.int64) @ generator.astype(np.int64)) % 2
    return Fraction(int(weights.sum(axis=1).min()), length)


@dataclass(frozen=True, eq=False)
class LinearCode:
    """Code spanned by the rows of `generator` (r x rbar over GF(2))."""

    generator: np.ndarray
    distance: Fraction

    @property
    def r(self) -> int:
        return self.generator.shape[0]

    @property
    def rbar(self) -> int:
        return self.generator.shape[1]

    def encode(self, x) -> np.ndarray:
        x = _bits(x)
        if len(x) != self.r:
            raise ValueError(f"message length {len(x)} != {self.r}")
        return ((x.astype(np.int64) @ self.generator.astype(np.int64)) % 2).astype(np.uint8)

    @classmethod
    def certify(cls, generator, budget: int | None = None) -> "LinearCode":
        G = np.asarray(generator, dtype=np.uint8) % 2
        return cls(G, min_relative_weight(G, budget))

    def to_dict(self) -> dict:
        return {
            "r": self.r,
            "rbar": self.rbar,
            "rows": ["".join(str(int(b)) for b in row) for row in self.generator],
            "distance": str(self.distance),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "LinearCode":
        G = np.array([[int(c) for c in row] for row in doc["rows"]], dtype=np.uint8)
        code = cls.certify(G)
        if "distance" in doc and Fraction(doc["distance"]) > code.distance:
            raise ValueError("stored distance exceeds the certified one")
        return code


def find_base_code(r: int, seed: int = 0, length: int | None = None, target=Fraction(1, 3), attempts: int = 20000) -> LinearCode:
    """Seeded random search for a systematic [length, r] code of relative distance >= target."""
    length = 2 * r if length is None else length
    if length < r:
        raise ParameterInfeasible("block length below message length")
    target = Fraction(target)
    rng = numpy_rng(seed, "base-code", r, length)
    eye = np.eye(r, dtype=np.uint8)
    for _ in range(attempts):
        G = np.concatenate([eye, rng.integers(0, 2, size=(r, length - r), dtype=np.uint8)], axis=1)
        code = LinearCode.certify(G)
        if code.distance >= target:
            return code
    raise ParameterInfeasible(f"no [{length},{r}] code with distance {target} found in {attempts} attempts")


# tensor codes


def tensor_encode(x, base: LinearCode, d: int) -> np.ndarray:
    """Encode along each of the d axes of x viewed as an r x ... x r tensor (zero padded)."""
    if base.distance < Fraction(1, 3):
        raise ValueError("base code distance is not certified to 1/3")
    x = _bits(x)
    r = base.r
    size = r**d
    if len(x) > size:
        raise ValueError(f"message of length {len(x)} does not fit r^d = {size}")
    M = np.zeros(size, dtype=np.int64)
    M[: len(x)] = x
    M = M.reshape((r,) * d)
    G = base.generator.astype(np.int64)
    for axis in range(d):
        M = np.moveaxis(np.tensordot(M, G, axes=([axis], [0])), -1, axis) % 2
    return M.reshape(-1).astype(np.uint8)


def tensor_generator(base: LinearCode, d: int) -> np.ndarray:
    """Kronecker power of the base generator; row-major flattening matches tensor_encode."""
    G = np.ones((1, 1), dtype=np.int64)
    for _ in range(d):
        G = np.kron(G, base.generator.astype(np.int64)) % 2
    return G.astype(np.uint8)


# expanders and walk amplification


def _circulant_spectrum(vertices: int, connections: Sequence[int]) -> np.ndarray:
    j = np.arange(vertices)[:, None]
    s = np.asarray(connections)[None, :]
    return (np.exp(2j * np.pi * j * s / vertices).sum(axis=1) / len(connections)).real


def _is_symmetric(vertices: int, connections: Sequence[int]) -> bool:
    forward = sorted(c % vertices for c in connections)
    return forward == sorted((-c) % vertices for c in connections)


@dataclass(frozen=True)
class ExpanderSpec:
    """Circulant graph on Z_N: v is joined to v + s for each offset s (a symmetric multiset)."""

    vertices: int
    connections: tuple
    lambda_bound: Fraction
    tolerance: float = 1e-9

    @property
    def degree(self) -> int:
        return len(self.connections)

    def neighbours(self, v: int) -> list:
        return [(v + s) % self.vertices for s in self.connections]

    def second_eigenvalue(self) -> float:
        """Largest |eigenvalue| of the walk matrix off the constant vector."""
        if self.vertices == 1:
            return 0.0
        spectrum = _circulant_spectrum(self.vertices, self.connections)
        return float(np.abs(spectrum[1:]).max())

    def adjacency(self) -> np.ndarray:
        A = np.zeros((self.vertices, self.vertices))
        for v in range(self.vertices):
            for u in self.neighbours(v):
                A[v, u] += 1
        return A / self.degree

    @classmethod
    def circulant(cls, vertices: int, connections: Sequence[int], tolerance: float = 1e-9) -> "ExpanderSpec":
        connections = tuple(int(c) % vertices for c in connections)
        if not connections:
            raise ValueError("need at least one offset")
        if not _is_symmetric(vertices, connections):
            raise ValueError("offsets must be closed under negation")
        probe = cls(vertices, connections, Fraction(1), tolerance)
        lam = probe.second_eigenvalue()
        scale = 1 << 30
        bound = min(Fraction(1), Fraction(math.ceil((lam + tolerance) * scale), scale))
        return cls(vertices, connections, bound, tolerance)

    def certify(self) -> bool:
        """Regular, symmetric, and the stored bound dominates the dense eigen-solver's value."""
        if not _is_symmetric(self.vertices, self.connections):
            return False
        A = self.adjacency()
        if not np.allclose(A.sum(axis=1), 1.0):
            return False
        eig = np.sort(np.abs(np.linalg.eigvalsh(A)))[::-1]
        second = float(eig[1]) if self.vertices > 1 else 0.0
        return second <= float(self.lambda_bound) + self.tolerance and self.lambda_bound < 1

    def to_dict(self) -> dict:
        return {
            "vertices": self.vertices,
            "connections": list(self.connections),
            "degree": self.degree,
            "lambda_bound": str(self.lambda_bound),
            "tolerance": self.tolerance,
        }


def walk_length(rho, eps, lam, max_length: int = 64) -> int:
    """Least ell >= 1 with (1 - rho*(1 - lam))^(ell-1) <= eps, in exact arithmetic."""
    rho, eps, lam = Fraction(rho), Fraction(eps), Fraction(lam)
    base = 1 - rho * (1 - lam)
    value = Fraction(1)
    for ell in range(1, max_length + 1):
        if value <= eps:
            return ell
        value *= base
    raise ParameterInfeasible(f"no walk length up to {max_length} reaches eps={eps}")


def amplified_length(vertices: int, degree: int, ell: int) -> int:
    return vertices * degree ** (ell - 1) * (1 << ell)


def choose_expander(vertices: int, rho, eps, max_length: int = 64) -> tuple:
    """Circulant graph on `vertices` minimizing the amplified code length.

    Tries every offset set closed under negation; returns (spec, ell).
    """
    orbits = sorted({tuple(sorted({s, (-s) % vertices})) for s in range(vertices)})
    best = None
    for mask in range(1, 1 << len(orbits)):
        offsets = tuple(s for k, orbit in enumerate(orbits) if mask >> k & 1 for s in orbit)
        spec = ExpanderSpec.circulant(vertices, offsets)
        if spec.lambda_bound >= 1:
            continue
        try:
            ell = walk_length(rho, eps, spec.lambda_bound, max_length)
        except ParameterInfeasible:
            continue
        key = (amplified_length(vertices, spec.degree, ell), spec.degree, offsets)
        if best is None or key < best[0]:
            best = (key, spec, ell)
    if best is None:
        raise ParameterInfeasible(f"no connected circulant graph on {vertices} vertices reaches eps={eps}")
    return best[1], best[2]


def walks(G: ExpanderSpec, ell: int) -> np.ndarray:
    """All walks with ell vertices, lexicographic by (start, step choices)."""
    W = np.arange(G.vertices, dtype=np.int64)[:, None]
    offsets = np.asarray(G.connections, dtype=np.int64)
    for _ in range(ell - 1):
        nxt = (W[:, -1:] + offsets[None, :]) % G.vertices
        W = np.concatenate([np.repeat(W, G.degree, axis=0), nxt.reshape(-1, 1)], axis=1)
    return W


def _subset_matrix(ell: int) -> np.ndarray:
    masks = np.arange(1 << ell, dtype=np.int64)
    return ((masks[:, None] >> np.arange(ell)[None, :]) & 1).astype(np.int64)


def amplify_encode(xhat, G: ExpanderSpec, eps=None, rho=None, ell: int | None = None, budget: int | None = None) -> np.ndarray:
    """Coordinate (W, S) is the parity of xhat over the positions S of walk W.

    Coordinates run over walks in lexicographic order, then subset bitmasks
    (bit j selects walk position j).  Give either ell or (eps, rho).
    """
    xhat = _bits(xhat)
    if len(xhat) != G.vertices:
        raise ValueError("input length must equal the vertex count")
    if ell is None:
        ell = walk_length(rho, eps, G.lambda_bound)
    charge(amplified_length(G.vertices, G.degree, ell), budget, "amplified codeword")
    vals = xhat.astype(np.int64)[walks(G, ell)]
    return ((vals @ _subset_matrix(ell).T) % 2).astype(np.uint8).reshape(-1)


def amplified_weight(xhat, G: ExpanderSpec, ell: int) -> Fraction:
    """Relative weight of the amplified codeword: half the fraction of walks hitting the support."""
    xhat = _bits(xhat)
    hits = xhat[walks(G, ell)].any(axis=1)
    return Fraction(int(hits.sum()), 2 * len(hits))


def amplify_matrix(G: ExpanderSpec, ell: int) -> np.ndarray:
    """The amplifier as an (outputs x vertices) GF(2) matrix."""
    W = walks(G, ell)
    S = _subset_matrix(ell)
    M = np.zeros((len(W) * len(S), G.vertices), dtype=np.uint8)
    row = 0
    for walk in W:
        for subset in S:
            for pos in np.flatnonzero(subset):
                M[row, walk[pos]] ^= 1
            row += 1
    return M


@dataclass(frozen=True, eq=False)
class BalancedCode:
    """Tensor code followed by walk amplification with rho = 3^-d."""

    n: int
    d: int
    eps: Fraction
    base: LinearCode
    expander: ExpanderSpec
    ell: int

    @property
    def rho(self) -> Fraction:
        return Fraction(1, 3**self.d)

    @property
    def inner_length(self) -> int:
        return self.base.rbar**self.d

    @property
    def length(self) -> int:
        return amplified_length(self.expander.vertices, self.expander.degree, self.ell)

    @classmethod
    def build(cls, n: int, eps, d: int, base: LinearCode | None = None, seed: int = 0) -> "BalancedCode":
        eps = Fraction(eps)
        if not 0 < eps < Fraction(1, 2):
            raise ParameterInfeasible("eps must lie in (0, 1/2)")
        if base is None:
            r = 1
            while r**d < n:
                r += 1
            base = find_base_code(r, seed)
        if base.r**d < n:
            raise ParameterInfeasible("base code too short for the message")
        inner = base.rbar**d
        rho = Fraction(1, 3**d)
        expander, ell = choose_expander(inner, rho, eps)
        return cls(n, d, eps, base, expander, ell)

    def inner(self, x) -> np.ndarray:
        return tensor_encode(x, self.base, self.d)

    def encode(self, x, budget: int | None = None) -> np.ndarray:
        return amplify_encode(self.inner(x), self.expander, ell=self.ell, budget=budget)

    def weight(self, x) -> Fraction:
        return amplified_weight(self.inner(x), self.expander, self.ell)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "d": self.d,
            "eps": str(self.eps),
            "rho": str(self.rho),
            "base": self.base.to_dict(),
            "expander": self.expander.to_dict(),
            "ell": self.ell,
            "inner_length": self.inner_length,
            "length": self.length,
        }


def balanced_encode(x, eps, d: int, code: BalancedCode | None = None) -> np.ndarray:
    x = _bits(x)
    code = code or BalancedCode.build(len(x), eps, d)
    return code.encode(x)


@dataclass(frozen=True)
class JohnsonParams:
    delta: Fraction
    eps: Fraction
    list_bound: int

    @property
    def radius(self) -> Fraction:
        return Fraction(1, 2) - self.delta


def johnson_params(delta) -> JohnsonParams:
    delta = Fraction(delta)
    if not 0 < delta < Fraction(1, 2):
        raise ValueError("delta must lie in (0, 1/2)")
    return JohnsonParams(delta, delta * delta, math.floor(1 / (delta * delta)))


def ball_counts(codewords: np.ndarray, radius, centers: np.ndarray) -> np.ndarray:
    """Number of codewords within relative distance `radius` of each center."""
    length = codewords.shape[1]
    limit = Fraction(radius) * length
    dist = (codewords[None, :, :] != centers[:, None, :]).sum(axis=2)
    return (dist <= limit).sum(axis=1)


# threshold circuits for linear maps


def parity_gadget(k: int) -> tuple:
    """Depth-2 gates computing parity of k sign inputs (output -1 iff an odd number are -1).

    Layer one: g_j = sgn(sum(x) - (k - 2j + 1)) for j = 1..k, which is +1 iff
    fewer than j inputs are -1.  The alternating sum of the g_j then
    identifies the parity.
    """
    if k < 1:
        raise ValueError("parity gadget needs at least one input")
    if k == 1:
        return (LTF((1,), 0),), LTF((1,), 0)
    first = tuple(LTF((1,) * k, k - 2 * j + 1) for j in range(1, k + 1))
    out = LTF(tuple((-1) ** (j + 1) for j in range(1, k + 1)), (k % 2) - 1)
    return first, out


def gadget_wire_bound(k: int) -> int:
    return 2 * k * k + 2 * k


def linear_map_matrix(f: Callable, n: int, checks: int = 64, seed: int = 0) -> np.ndarray:
    """Matrix of a GF(2)-linear bit map given as a callable; raises on non-linearity."""
    zero = _bits(f(np.zeros(n, dtype=np.uint8)))
    if zero.any():
        raise ValueError("non-linear map: f(0) != 0")
    eye = np.eye(n, dtype=np.uint8)
    cols = [_bits(f(eye[i])) for i in range(n)]
    M = np.stack(cols, axis=1) if cols else np.zeros((len(zero), 0), dtype=np.uint8)
    rng = numpy_rng(seed, "linearity")
    for _ in range(checks):
        x = rng.integers(0, 2, size=n, dtype=np.uint8)
        if not np.array_equal(_bits(f(x)), (M.astype(np.int64) @ x) % 2):
            raise ValueError("non-linear map")
    return M


def emit_linear_circuit(spec, n: int | None = None) -> ThresholdNetwork:
    """Depth-2 threshold network computing y = M x over GF(2), in signs.

    `spec` is an (outputs x n) 0/1 matrix or a callable bit map (then `n` is
    required and linearity is checked).
    """
    if callable(spec):
        if n is None:
            raise ValueError("input length required for a callable map")
        M = linear_map_matrix(spec, n)
    else:
        M = np.asarray(spec, dtype=np.uint8) % 2
    outputs, n = M.shape
    first, top = [], []
    for row in M:
        support = [int(i) for i in np.flatnonzero(row)]
        if not support:
            first.append(LTF.constant(1, n))
            top_weights = {len(first) - 1: 1}
            top_threshold = 0
        else:
            local_first, local_out = parity_gadget(len(support))
            offset = len(first)
            for g in local_first:
                w = [0] * n
                for pos, var in enumerate(support):
                    w[var] = g.weights[pos]
                first.append(LTF(tuple(w), g.threshold))
            top_weights = {offset + j: w for j, w in enumerate(local_out.weights)}
            top_threshold = local_out.threshold
        top.append((top_weights, top_threshold))
    width = len(first)
    second = []
    for weights, threshold in top:
        w = [0] * width
        for j, v in weights.items():
            w[j] = v
        second.append(LTF(tuple(w), threshold))
    return ThresholdNetwork(n, (tuple(first), tuple(second)))


def tensor_stage_matrix(base: LinearCode, d: int, stage: int) -> np.ndarray:
    """Stage i (0-based) of the tensor encoder as an (out x in) matrix."""
    left = np.eye(base.rbar**stage, dtype=np.int64)
    right = np.eye(base.r ** (d - stage - 1), dtype=np.int64)
    return (np.kron(np.kron(left, base.generator.T.astype(np.int64)), right) % 2).astype(np.uint8)


def tensor_code_circuit(base: LinearCode, d: int) -> ThresholdNetwork:
    """Depth-2d network: one emitted linear stage per tensor axis."""
    net = None
    for stage in range(d):
        part = emit_linear_circuit(tensor_stage_matrix(base, d, stage))
        net = part if net is None else net.then(part)
    return net


def bits_to_sign_array(bits) -> np.ndarray:
    return (1 - 2 * np.asarray(bits, dtype=np.int8)).astype(np.int8)


def signs_to_bits(signs) -> np.ndarray:
    return ((1 - np.asarray(signs, dtype=np.int8)) // 2).astype(np.uint8)
