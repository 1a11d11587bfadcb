"""Linear threshold functions, layered threshold circuits and restrictions.

Conventions used throughout the package:

* inputs are vectors over {-1, +1}; a gate outputs ``sgn(<w, x> - theta)``
  with ``sgn(0) = +1``;
* an input is *accepted* when the output is -1;
* bit ``b`` corresponds to the sign ``(-1) ** b`` (0 -> +1, 1 -> -1);
* variables are indexed from 0.

Weights are Python integers and thresholds are ``Fraction`` values, so
evaluation is exact.  Batch evaluation goes through numpy with int64 when
the magnitudes provably fit and falls back to object arrays otherwise.
"""

from __future__ import annotations

import json
import operator
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Callable, Iterable, Sequence, Union

import numpy as np

from .errors import MalformedCircuit, charge

STAR = 0
_INT64_SAFE = 1 << 62
CHUNK = 1 << 16


def _as_fraction(value) -> Fraction:
    if isinstance(value, str):
        return Fraction(value.strip())
    return Fraction(value)


@dataclass(frozen=True)
class LTF:
    weights: tuple
    threshold: Fraction

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(operator.index(w) for w in self.weights))
        object.__setattr__(self, "threshold", _as_fraction(self.threshold))

    @property
    def n(self) -> int:
        return len(self.weights)

    @property
    def fan_in(self) -> int:
        return sum(1 for w in self.weights if w)

    @property
    def support(self) -> tuple:
        return tuple(i for i, w in enumerate(self.weights) if w)

    def __call__(self, x) -> int:
        return eval_ltf(self, x)

    def negated(self) -> "LTF":
        """The complement gate; exact whenever <w, x> never equals theta."""
        return LTF(tuple(-w for w in self.weights), -self.threshold)

    @classmethod
    def constant(cls, value: int, n: int = 0) -> "LTF":
        if value not in (-1, 1):
            raise ValueError("constant value must be -1 or +1")
        return cls((0,) * n, Fraction(1) if value == -1 else Fraction(-1))

    @classmethod
    def majority(cls, n: int) -> "LTF":
        return cls((1,) * n, 0)


def eval_ltf(phi: LTF, x: Sequence[int]) -> int:
    if len(x) != len(phi.weights):
        raise ValueError(f"input length {len(x)} != gate arity {len(phi.weights)}")
    s = 0
    for w, xi in zip(phi.weights, x):
        if w:
            s += w * int(xi)
    return 1 if s >= phi.threshold else -1


class _LayerKernel:
    """A layer of gates compiled into matrices for batch evaluation."""

    def __init__(self, gates: Sequence[LTF], width: int):
        self.num = [g.threshold.numerator for g in gates]
        self.den = [g.threshold.denominator for g in gates]
        bound = 0
        for g, num, den in zip(gates, self.num, self.den):
            bound = max(bound, sum(abs(w) for w in g.weights) * den + abs(num))
        self.exact_int64 = bound < _INT64_SAFE
        dtype = np.int64 if self.exact_int64 else object
        self.matrix = np.zeros((width, len(gates)), dtype=dtype)
        for j, g in enumerate(gates):
            for i, w in enumerate(g.weights):
                if w:
                    self.matrix[i, j] = w
        self.num_arr = np.array(self.num, dtype=dtype)
        self.den_arr = np.array(self.den, dtype=dtype)

    def __call__(self, values: np.ndarray) -> np.ndarray:
        if self.exact_int64:
            sums = values.astype(np.int64) @ self.matrix
        else:
            sums = values.astype(object) @ self.matrix
        out = np.where(sums * self.den_arr >= self.num_arr, 1, -1)
        return out.astype(np.int8)


def ltf_outputs(phi: LTF, X: np.ndarray) -> np.ndarray:
    """Evaluate one gate on every row of a (N, n) array of signs."""
    X = np.asarray(X)
    if X.ndim != 2 or X.shape[1] != phi.n:
        raise ValueError("point array does not match gate arity")
    return _LayerKernel([phi], phi.n)(X)[:, 0]


@dataclass(frozen=True)
class ThresholdNetwork:
    """Layered threshold gates with any number of outputs."""

    n: int
    layers: tuple

    def __post_init__(self):
        layers = tuple(tuple(layer) for layer in self.layers)
        object.__setattr__(self, "layers", layers)
        if self.n < 0:
            raise MalformedCircuit("negative input arity")
        if not layers:
            raise MalformedCircuit("circuit has no layers")
        width = self.n
        for depth, layer in enumerate(layers, start=1):
            if not layer:
                raise MalformedCircuit(f"layer {depth} is empty")
            for j, gate in enumerate(layer):
                if not isinstance(gate, LTF):
                    raise MalformedCircuit(f"gate {j} of layer {depth} is not an LTF")
                if gate.n != width:
                    raise MalformedCircuit(
                        f"gate {j} of layer {depth} has {gate.n} weights, previous layer has {width} outputs"
                    )
            width = len(layer)

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def width(self) -> int:
        return len(self.layers[-1])

    @cached_property
    def wire_count(self) -> int:
        return sum(g.fan_in for layer in self.layers for g in layer)

    @property
    def bottom(self) -> tuple:
        return self.layers[0]

    @property
    def size(self) -> int:
        return sum(len(layer) for layer in self.layers)

    def fan_out(self, variable: int) -> int:
        return sum(1 for g in self.layers[0] if g.weights[variable])

    @cached_property
    def _kernels(self):
        kernels, width = [], self.n
        for layer in self.layers:
            kernels.append(_LayerKernel(layer, width))
            width = len(layer)
        return kernels

    def evaluate_all(self, X: np.ndarray) -> np.ndarray:
        """All top-layer values for each row of X, as an (N, width) sign array."""
        X = np.asarray(X)
        if X.ndim != 2 or X.shape[1] != self.n:
            raise ValueError("point array does not match circuit arity")
        values = X
        for kernel in self._kernels:
            values = kernel(values)
        return values

    def then(self, other: "ThresholdNetwork") -> "ThresholdNetwork":
        """Feed this network's outputs into `other`."""
        if other.n != self.width:
            raise MalformedCircuit(f"cannot feed {self.width} outputs into {other.n} inputs")
        cls = ThresholdCircuit if other.width == 1 else ThresholdNetwork
        return cls(self.n, self.layers + other.layers)


def identity_layer(n: int) -> tuple:
    """n pass-through gates sgn(x_i)."""
    return tuple(LTF(tuple(1 if k == i else 0 for k in range(n)), 0) for i in range(n))


@dataclass(frozen=True)
class ThresholdCircuit(ThresholdNetwork):
    """A network with a single output gate."""

    def __post_init__(self):
        super().__post_init__()
        if len(self.layers[-1]) != 1:
            raise MalformedCircuit("top layer must hold exactly one output gate")

    @property
    def output_gate(self) -> LTF:
        return self.layers[-1][0]

    def __call__(self, x) -> int:
        return eval_circuit(self, x)

    def outputs(self, X: np.ndarray) -> np.ndarray:
        return self.evaluate_all(X)[:, 0]

    @classmethod
    def from_ltf(cls, phi: LTF) -> "ThresholdCircuit":
        return cls(phi.n, ((phi,),))

    @classmethod
    def constant(cls, value: int, n: int) -> "ThresholdCircuit":
        return cls(n, ((LTF.constant(value, n),),))

    def negated(self) -> "ThresholdCircuit":
        top = self.output_gate.negated()
        return ThresholdCircuit(self.n, self.layers[:-1] + ((top,),))


def eval_circuit(C: ThresholdCircuit, x: Sequence[int]) -> int:
    if len(x) != C.n:
        raise ValueError(f"input length {len(x)} != circuit arity {C.n}")
    values = tuple(int(v) for v in x)
    for layer in C.layers:
        values = tuple(eval_ltf(g, values) for g in layer)
    return values[0]


Evaluable = Union[LTF, ThresholdCircuit, int, Callable]


def batch_eval(f: Evaluable, X: np.ndarray) -> np.ndarray:
    """Evaluate an LTF, circuit, constant (+1/-1) or point callable on rows of X."""
    if isinstance(f, (LTF, ThresholdCircuit)):
        return f.outputs(X) if isinstance(f, ThresholdCircuit) else ltf_outputs(f, X)
    if isinstance(f, (int, np.integer)) and not isinstance(f, bool):
        if f not in (-1, 1):
            raise ValueError("constant functions must be -1 or +1")
        return np.full(len(X), f, dtype=np.int8)
    if callable(f):
        return np.array([f(tuple(int(v) for v in row)) for row in X], dtype=np.int8)
    raise TypeError(f"cannot evaluate {type(f).__name__}")


def points(n: int, start: int = 0, stop: int | None = None) -> np.ndarray:
    """Rows are the points of {-1,1}^n with indices in [start, stop).

    Point index i has coordinate j equal to -1 iff bit (n-1-j) of i is set,
    so the enumeration is lexicographic with +1 before -1.
    """
    stop = (1 << n) if stop is None else stop
    idx = np.arange(start, stop, dtype=np.int64)
    if n == 0:
        return np.zeros((len(idx), 0), dtype=np.int8)
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    bits = (idx[:, None] >> shifts) & 1
    return (1 - 2 * bits).astype(np.int8)


def _chunks(n: int):
    total = 1 << n
    for start in range(0, total, CHUNK):
        yield points(n, start, min(total, start + CHUNK))


def acceptance_count(C: Evaluable, n: int | None = None, budget: int | None = None) -> int:
    """Exact number of inputs on which C outputs -1."""
    n = _arity(C, n)
    charge(1 << n, budget, "acceptance_count")
    return sum(int(np.count_nonzero(batch_eval(C, X) == -1)) for X in _chunks(n))


def rejection_count(C: Evaluable, n: int | None = None, budget: int | None = None) -> int:
    n = _arity(C, n)
    charge(1 << n, budget, "rejection_count")
    return sum(int(np.count_nonzero(batch_eval(C, X) == 1)) for X in _chunks(n))


def acceptance_probability(C: Evaluable, n: int | None = None, budget: int | None = None) -> Fraction:
    n = _arity(C, n)
    return Fraction(acceptance_count(C, n, budget), 1 << n)


def closeness(f: Evaluable, g: Evaluable, n: int | None = None, budget: int | None = None) -> Fraction:
    """Exact fraction of inputs on which f and g agree."""
    if n is None:
        n = _arity(f, None) if isinstance(f, (LTF, ThresholdCircuit)) else _arity(g, None)
    charge(1 << n, budget, "closeness")
    agree = 0
    for X in _chunks(n):
        agree += int(np.count_nonzero(batch_eval(f, X) == batch_eval(g, X)))
    return Fraction(agree, 1 << n)


def truth_table(f: Evaluable, n: int | None = None, budget: int | None = None) -> np.ndarray:
    n = _arity(f, n)
    charge(1 << n, budget, "truth_table")
    return np.concatenate([batch_eval(f, X) for X in _chunks(n)]) if n else batch_eval(f, points(0))


def _arity(f, n):
    if n is not None:
        return n
    if isinstance(f, (LTF, ThresholdCircuit)):
        return f.n
    raise ValueError("arity required for this evaluable")


@dataclass(frozen=True)
class Restriction:
    """Partial assignment: each entry is -1, +1 or STAR (0) for a live variable."""

    values: tuple

    def __post_init__(self):
        vals = tuple(int(v) for v in self.values)
        if any(v not in (-1, 0, 1) for v in vals):
            raise ValueError("restriction entries must be -1, +1 or STAR")
        object.__setattr__(self, "values", vals)

    @classmethod
    def identity(cls, n: int) -> "Restriction":
        return cls((STAR,) * n)

    @classmethod
    def from_string(cls, text: str) -> "Restriction":
        table = {"*": STAR, "+": 1, "-": -1}
        return cls(tuple(table[c] for c in text))

    @classmethod
    def from_parts(cls, n: int, live: Iterable[int], z: Sequence[int]) -> "Restriction":
        live = set(live)
        return cls(tuple(STAR if i in live else int(z[i]) for i in range(n)))

    @property
    def n(self) -> int:
        return len(self.values)

    @cached_property
    def live(self) -> tuple:
        return tuple(i for i, v in enumerate(self.values) if v == STAR)

    @property
    def num_live(self) -> int:
        return len(self.live)

    @cached_property
    def fixed(self) -> dict:
        return {i: v for i, v in enumerate(self.values) if v != STAR}

    def extend(self, x: Sequence[int]) -> tuple:
        if len(x) != self.num_live:
            raise ValueError("point length differs from the number of live variables")
        it = iter(x)
        return tuple(int(next(it)) if v == STAR else v for v in self.values)

    def extend_points(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X)
        out = np.empty((X.shape[0], self.n), dtype=np.int8)
        for i, v in enumerate(self.values):
            if v != STAR:
                out[:, i] = v
        if self.live:
            out[:, list(self.live)] = X
        return out

    def refine(self, inner: "Restriction") -> "Restriction":
        """Apply `inner` to the live variables of this restriction."""
        if inner.n != self.num_live:
            raise ValueError("inner restriction must cover exactly the live variables")
        it = iter(inner.values)
        return Restriction(tuple(next(it) if v == STAR else v for v in self.values))

    def __str__(self) -> str:
        return "".join("*" if v == STAR else ("+" if v == 1 else "-") for v in self.values)


def restrict_ltf(phi: LTF, rho: Restriction) -> LTF:
    if rho.n != phi.n:
        raise ValueError("restriction length differs from gate arity")
    shift = 0
    live_weights = []
    for w, v in zip(phi.weights, rho.values):
        if v == STAR:
            live_weights.append(w)
        elif w:
            shift += w * v
    return LTF(tuple(live_weights), phi.threshold - shift)


def restrict_circuit(C: ThresholdCircuit, rho: Restriction) -> ThresholdCircuit:
    if rho.n != C.n:
        raise ValueError("restriction length differs from circuit arity")
    bottom = tuple(restrict_ltf(g, rho) for g in C.layers[0])
    return ThresholdCircuit(rho.num_live, (bottom,) + C.layers[1:])


# interchange format


def _fraction_text(q: Fraction) -> str:
    return f"{q.numerator}/{q.denominator}"


def circuit_document(C: ThresholdCircuit, meta: dict | None = None) -> dict:
    doc = {
        "n": C.n,
        "depth": C.depth,
        "layers": [
            [{"weights": [str(w) for w in g.weights], "theta": _fraction_text(g.threshold)} for g in layer]
            for layer in C.layers
        ],
    }
    if meta:
        doc["meta"] = meta
    return doc


def dumps_circuit(C: ThresholdCircuit, meta: dict | None = None) -> str:
    return json.dumps(circuit_document(C, meta), separators=(",", ":")) + "\n"


def circuit_from_document(doc: dict) -> ThresholdCircuit:
    try:
        n = int(doc["n"])
        layers = tuple(
            tuple(LTF(tuple(int(w) for w in gate["weights"]), _as_fraction(gate["theta"])) for gate in layer)
            for layer in doc["layers"]
        )
    except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
        raise MalformedCircuit(f"bad circuit document: {exc}") from exc
    C = ThresholdCircuit(n, layers)
    if "depth" in doc and int(doc["depth"]) != C.depth:
        raise MalformedCircuit("declared depth does not match layers")
    return C


def loads_circuit(text: str) -> ThresholdCircuit:
    return loads_circuit_document(text)[0]


def loads_circuit_document(text: str) -> tuple:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedCircuit(f"not a circuit document: {exc}") from exc
    return circuit_from_document(doc), doc.get("meta", {})
