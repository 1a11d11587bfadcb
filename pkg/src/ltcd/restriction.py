"""Pseudorandom restrictions that collapse a threshold circuit layer by layer.

`reduce_layer` removes the bottom layer of a depth-d circuit in four stages:

1. fix every variable with large fan-out;
2. keep each remaining variable alive according to a selection string and
   fix the rest, then replace far-from-balanced large gates by constants;
3. fix every input of the large gates that stayed balanced;
4. keep a conflict-free set of variables for the small gates, so each small
   gate ends with at most one live input and can be spliced into the layer
   above as a constant or a (possibly negated) variable.

`restrict_full` applies it repeatedly until one gate remains.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .circuit import LTF, STAR, Restriction, ThresholdCircuit, restrict_ltf
from .errors import ParameterInfeasible, StageFailure, charge
from .ltf import acceptance_count_ltf, constant_value, imbalanced_majority_value, is_balanced_sq, literal_form
from .seeding import python_rng
from .sources import SeededSource, UniformSource, default_almost_kwise, restriction_from_bits


def _log2(x) -> float:
    return math.log2(x)


def _t_squared_for(q: int) -> Fraction:
    # t = p^(-1/5) with p = 2^-q, so t^2 = 2^(2q/5)
    if (2 * q) % 5 == 0:
        return Fraction(2) ** (2 * q // 5)
    return Fraction(2 ** (2 * q / 5)).limit_denominator(10**9)


@dataclass(frozen=True)
class LayerReductionParams:
    n: int
    eps: Fraction
    alpha: float
    beta: float
    p: Fraction
    t_squared: Fraction
    fanout_cap: int
    small_fanin_cap: int
    kprime: int
    balanced_wire_cap: int
    closeness_exponent: Fraction = Fraction(1)
    live_factor: Fraction = Fraction(1, 2)
    exact_live_counts: bool = False
    fold_constants: bool = False
    overrides: tuple = ()

    @property
    def q(self) -> int:
        q = self.p.denominator.bit_length() - 1
        return q

    @property
    def t(self) -> float:
        return math.sqrt(self.t_squared)

    @classmethod
    def derive(cls, n: int, eps, **overrides) -> "LayerReductionParams":
        """Parameters for an n-variable layer; keyword overrides switch to desk mode."""
        if n < 2:
            raise ParameterInfeasible("layer reduction needs at least two variables")
        eps = Fraction(eps)
        if eps <= 0:
            raise ParameterInfeasible("eps must be positive")
        log_n = _log2(n)
        alpha = 12 * float(eps)
        if "p" in overrides:
            p = Fraction(overrides["p"])
            q = p.denominator.bit_length() - 1
            if p.numerator != 1 or p.denominator != 1 << q or q < 1:
                raise ParameterInfeasible(f"p = {p} is not a negative power of two")
            beta = q / log_n
        else:
            target = 11 * float(eps) * log_n
            candidates = sorted({max(1, math.floor(target)), max(1, math.ceil(target))}, key=lambda c: abs(c - target))
            chosen = [c for c in candidates if 10 * float(eps) < c / log_n < alpha]
            if not chosen:
                raise ParameterInfeasible(
                    f"no power-of-two p = n^-beta with 10*eps < beta < 12*eps at n={n}, eps={eps}"
                )
            q = chosen[0]
            beta = q / log_n
            p = Fraction(1, 1 << q)
        fields = dict(
            n=n,
            eps=eps,
            alpha=alpha,
            beta=beta,
            p=p,
            t_squared=_t_squared_for(q),
            fanout_cap=math.floor(2 * n ** float(eps)),
            small_fanin_cap=math.floor(n**alpha),
            kprime=math.floor(2 * n ** (alpha + float(eps))),
            balanced_wire_cap=math.floor(4 * log_n**2 * n ** (float(eps) - beta / 10) * n ** (1 - beta)),
        )
        extra = {k: v for k, v in overrides.items() if k != "p"}
        unknown = set(extra) - set(cls.__dataclass_fields__)
        if unknown:
            raise TypeError(f"unknown parameter override(s): {sorted(unknown)}")
        fields.update(extra)
        for key in ("t_squared", "live_factor", "closeness_exponent"):
            if key in fields:
                fields[key] = Fraction(fields[key])
        params = cls(**fields, overrides=tuple(sorted(overrides)))
        params.validate()
        return params

    @property
    def desk_mode(self) -> bool:
        return bool(self.overrides)

    def validate(self):
        if self.fanout_cap < 1 or self.small_fanin_cap < 1:
            raise ParameterInfeasible("fan-out and small fan-in caps must be at least 1")
        if self.kprime < self.fanout_cap * self.small_fanin_cap:
            raise ParameterInfeasible("kprime must dominate fanout_cap * small_fanin_cap")
        if not self.desk_mode and not (10 * float(self.eps) < self.beta < self.alpha):
            raise ParameterInfeasible("need 10*eps < beta < alpha")

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "eps": str(self.eps),
            "alpha": self.alpha,
            "beta": self.beta,
            "p": str(self.p),
            "t_squared": str(self.t_squared),
            "fanout_cap": self.fanout_cap,
            "small_fanin_cap": self.small_fanin_cap,
            "kprime": self.kprime,
            "balanced_wire_cap": self.balanced_wire_cap,
            "closeness_exponent": str(self.closeness_exponent),
            "live_factor": str(self.live_factor),
            "exact_live_counts": self.exact_live_counts,
            "fold_constants": self.fold_constants,
            "overrides": list(self.overrides),
        }

    def for_arity(self, n: int) -> "LayerReductionParams":
        return replace(self, n=n)


@dataclass
class StageRecord:
    stage: str
    fixed: tuple = ()
    live_after: int = 0
    wires_after: int = 0
    ok: bool = True
    notes: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "stage": self.stage,
            "fixed": list(self.fixed),
            "live_after": self.live_after,
            "wires_after": self.wires_after,
            "ok": self.ok,
            "notes": self.notes,
        }


@dataclass
class ReductionTrace:
    n: int
    params: LayerReductionParams | None = None
    stages: list = field(default_factory=list)
    constified: dict = field(default_factory=dict)  # bottom gate index -> constant
    spliced: dict = field(default_factory=dict)  # bottom gate index -> literal description
    success: bool = False
    failure: tuple | None = None
    wire_bound_ok: bool | None = None

    @property
    def live_counts(self) -> list:
        return [s.live_after for s in self.stages]

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "params": self.params.to_dict() if self.params else None,
            "stages": [s.to_dict() for s in self.stages],
            "constified": {str(k): v for k, v in sorted(self.constified.items())},
            "spliced": {str(k): list(v) for k, v in sorted(self.spliced.items())},
            "success": self.success,
            "failure": list(self.failure) if self.failure else None,
            "wire_bound_ok": self.wire_bound_ok,
        }


class _BottomState:
    """Bottom layer of a circuit under a growing restriction."""

    def __init__(self, C: ThresholdCircuit):
        self.C = C
        self.n = C.n
        self.values = [STAR] * C.n
        bottom = C.layers[0]
        self.weights = [g.weights for g in bottom]
        self.thresholds = [g.threshold for g in bottom]
        self.shift = [0] * len(bottom)
        self.support = [set(g.support) for g in bottom]
        self.fanout = [[] for _ in range(C.n)]
        for j, g in enumerate(bottom):
            for i in g.support:
                self.fanout[i].append(j)
        self.num_live = C.n

    def fix(self, i: int, value: int):
        self.values[i] = value
        self.num_live -= 1
        for j in self.fanout[i]:
            self.shift[j] += self.weights[j][i] * value
            self.support[j].discard(i)

    def live(self) -> list:
        return [i for i, v in enumerate(self.values) if v == STAR]

    def wires(self) -> int:
        return sum(len(s) for s in self.support)

    def threshold(self, j: int) -> Fraction:
        return self.thresholds[j] - self.shift[j]

    def gate(self, j: int) -> LTF:
        """Gate j restricted to its live support, as an LTF over that support (ascending)."""
        sup = sorted(self.support[j])
        return LTF(tuple(self.weights[j][i] for i in sup), self.threshold(j))

    def restriction(self) -> Restriction:
        return Restriction(tuple(self.values))


def _sign(bit) -> int:
    return -1 if bit else 1


def _pad(state: _BottomState, target: int, z_bits, record: StageRecord):
    """Fix live variables in ascending order until exactly `target` remain."""
    extra = []
    for i in state.live():
        if state.num_live <= target:
            break
        state.fix(i, _sign(z_bits[i]))
        extra.append(i)
    if extra:
        record.fixed = record.fixed + tuple(extra)
        record.notes["padding"] = extra


def _stage_high_fanout(state: _BottomState, fanout_cap: int, z_bits) -> StageRecord:
    record = StageRecord("rho1")
    fixed = []
    for i in range(state.n):
        if state.values[i] == STAR and len(state.fanout[i]) > fanout_cap:
            fixed.append(i)
    for i in fixed:
        state.fix(i, _sign(z_bits[i]))
    record.fixed = tuple(fixed)
    return record


def fix_high_fanout(C: ThresholdCircuit, z_source: SeededSource, seed: int, fanout_cap: int):
    """Fix every variable feeding more than `fanout_cap` bottom gates."""
    if z_source.out_len != C.n:
        raise ValueError("value source must output one bit per variable")
    state = _BottomState(C)
    record = _stage_high_fanout(state, fanout_cap, z_source.generate(seed))
    record.live_after, record.wires_after = state.num_live, state.wires()
    rho = state.restriction()
    from .circuit import restrict_circuit

    trace = ReductionTrace(C.n, stages=[record], success=True)
    return rho, restrict_circuit(C, rho), trace


def greedy_independent_set(
    live_vars: Sequence[int],
    small_gates: Sequence,
    kprime: int,
    fanout_cap: int | None = None,
    small_fanin_cap: int | None = None,
) -> tuple:
    """Ascending greedy independent set in the graph joining variables that share a small gate."""
    live = sorted(set(live_vars))
    live_set = set(live)
    gates = [sorted(set(g) & live_set) for g in small_gates]
    if small_fanin_cap is not None and any(len(g) > small_fanin_cap for g in gates):
        raise ValueError("a small gate exceeds the small fan-in cap")
    neighbours = {v: set() for v in live}
    load = {v: 0 for v in live}
    for g in gates:
        for v in g:
            load[v] += 1
            neighbours[v].update(g)
    if fanout_cap is not None and any(c > fanout_cap for c in load.values()):
        raise ValueError("a live variable exceeds the fan-out cap")
    for v in live:
        neighbours[v].discard(v)
        if len(neighbours[v]) > kprime:
            raise ValueError(f"conflict degree {len(neighbours[v])} exceeds kprime={kprime}")
    chosen, blocked = [], set()
    for v in live:
        if v not in blocked:
            chosen.append(v)
            blocked.add(v)
            blocked.update(neighbours[v])
    bound = -(-len(live) // kprime) if kprime else len(live)
    if fanout_cap is not None and small_fanin_cap is not None and len(chosen) < bound:
        raise AssertionError("greedy independent set below its guaranteed size")  # pragma: no cover
    return tuple(chosen)


def _splice(C: ThresholdCircuit, forms: list, live: list) -> ThresholdCircuit:
    """Fold constant/literal bottom gates into the layer above."""
    position = {v: k for k, v in enumerate(live)}
    new_layer = []
    for gate in C.layers[1]:
        weights = [0] * len(live)
        theta = gate.threshold
        for j, u in enumerate(gate.weights):
            if not u:
                continue
            form = forms[j]
            if form[0] == "const":
                theta -= u * form[1]
            else:
                _, var, sign = form
                weights[position[var]] += u * sign
        new_layer.append(LTF(tuple(weights), theta))
    return ThresholdCircuit(len(live), (tuple(new_layer),) + C.layers[2:])


def _reduce_core(C: ThresholdCircuit, params: LayerReductionParams, y_bits, z_bits: Sequence):
    """Run the four stages reading bits lazily; z_bits holds one accessor per stage."""
    if C.depth < 2:
        raise ValueError("reduce_layer needs depth at least 2")
    n = C.n
    q = params.q
    trace = ReductionTrace(n, params)
    state = _BottomState(C)

    def fail(stage, condition):
        trace.success = False
        trace.failure = (stage, condition)
        raise StageFailure(stage, condition, trace)

    # stage 1
    rec1 = _stage_high_fanout(state, params.fanout_cap, z_bits[0])
    if params.exact_live_counts:
        _pad(state, -(-n // 2), z_bits[0], rec1)
    rec1.live_after, rec1.wires_after = state.num_live, state.wires()
    trace.stages.append(rec1)
    n1 = state.num_live
    if 2 * n1 < n:
        fail("rho1", f"only {n1} of {n} variables survive the fan-out cap")

    fanin_before = [len(s) for s in state.support]
    large = [j for j, f in enumerate(fanin_before) if f > params.small_fanin_cap]
    small = [j for j, f in enumerate(fanin_before) if 0 < f <= params.small_fanin_cap]

    # stage 2: selection string decides who stays alive
    rec2 = StageRecord("rho2")
    fixed2 = []
    for i in state.live():
        base = i * q
        alive = True
        for b in range(q):
            if not y_bits[base + b]:
                alive = False
                break
        if not alive:
            fixed2.append(i)
    for i in fixed2:
        state.fix(i, _sign(z_bits[1][i]))
    rec2.fixed = tuple(fixed2)
    if params.exact_live_counts:
        _pad(state, math.ceil(params.p * n1 / 2), z_bits[1], rec2)
    rec2.live_after, rec2.wires_after = state.num_live, state.wires()
    trace.stages.append(rec2)
    if state.num_live < params.live_factor * params.p * n1:
        rec2.ok = False
        fail("rho2", f"{state.num_live} live variables < {params.live_factor}*p*{n1}")
    for j in large:
        if len(state.support[j]) > 2 * params.p * fanin_before[j]:
            rec2.ok = False
            fail("rho2", f"large gate {j} kept fan-in {len(state.support[j])} > 2p*{fanin_before[j]}")

    forms: list = [None] * len(C.layers[0])
    balanced = []
    for j in large:
        phi = state.gate(j)
        if phi.n == 0:
            forms[j] = ("const", 1 if phi.threshold <= 0 else -1)
            continue
        if params.fold_constants:
            const = constant_value(phi)
            if const is not None:
                forms[j] = ("const", const)
                continue
        if is_balanced_sq(phi, params.t_squared):
            balanced.append(j)
        else:
            sigma = imbalanced_majority_value(phi)
            forms[j] = ("const", sigma)
            trace.constified[j] = sigma
    balanced_wires = sum(len(state.support[j]) for j in balanced)
    rec2.notes.update(large=len(large), small=len(small), balanced=list(balanced), balanced_wires=balanced_wires)
    if balanced_wires > params.balanced_wire_cap:
        rec2.ok = False
        fail("rho2", f"{balanced_wires} wires into balanced large gates > cap {params.balanced_wire_cap}")

    # stage 3: kill the balanced large gates
    rec3 = StageRecord("rho3")
    fixed3 = sorted({i for j in balanced for i in state.support[j]})
    for i in fixed3:
        state.fix(i, _sign(z_bits[2][i]))
    rec3.fixed = tuple(fixed3)
    rec3.live_after, rec3.wires_after = state.num_live, state.wires()
    trace.stages.append(rec3)
    n3 = state.num_live

    # stage 4: independent set for the small gates
    rec4 = StageRecord("rho4")
    live3 = state.live()
    keep = greedy_independent_set(
        live3,
        [state.support[j] for j in small],
        params.kprime,
        params.fanout_cap,
        params.small_fanin_cap,
    )
    keep_set = set(keep)
    fixed4 = [i for i in live3 if i not in keep_set]
    for i in fixed4:
        state.fix(i, _sign(z_bits[3][i]))
    rec4.fixed = tuple(fixed4)
    if params.exact_live_counts:
        _pad(state, math.ceil(n3 / params.kprime), z_bits[3], rec4)
    trace.stages.append(rec4)

    live = state.live()
    for j in range(len(forms)):
        if forms[j] is not None:
            continue
        phi = state.gate(j)
        if phi.n > 1:
            raise AssertionError(f"bottom gate {j} still reads {phi.n} live variables")  # pragma: no cover
        form = literal_form(phi)
        if form[0] == "var":
            form = ("var", sorted(state.support[j])[form[1]], form[2])
        forms[j] = form
        trace.spliced[j] = form
    reduced = _splice(C, forms, live)
    rec4.live_after, rec4.wires_after = state.num_live, reduced.wire_count
    exponent = 1 + 30 * float(params.eps)
    trace.wire_bound_ok = reduced.wire_count <= (len(live) ** exponent if live else 0)
    trace.success = True
    return state.restriction(), reduced, trace


def _stage_bits(z_bits):
    # four per-stage accessors, as opposed to one bit string that happens to have length 4
    if isinstance(z_bits, (list, tuple)) and len(z_bits) == 4 and all(hasattr(b, "__getitem__") for b in z_bits):
        return list(z_bits)
    return [z_bits] * 4


@dataclass
class RestrictionSources:
    """Source families for one layer: selection strings and fixed values."""

    y_family: Callable[[int, int], SeededSource]
    z_family: Callable[[int], SeededSource]

    @classmethod
    def uniform(cls) -> "RestrictionSources":
        return cls(lambda n, q: UniformSource(q * n), UniformSource)

    @classmethod
    def default(cls) -> "RestrictionSources":
        return cls(lambda n, q: _default_selection(n, q), UniformSource)

    def for_layer(self, n: int, q: int):
        return self.y_family(n, q), self.z_family(n)


def _default_selection(n: int, q: int) -> SeededSource:
    return default_almost_kwise(q * n, Fraction(1, 1 << q)) if n > 1 else UniformSource(q * n)


def reduce_layer(C: ThresholdCircuit, params: LayerReductionParams, y_seed: int, z_seeds, sources: RestrictionSources | None = None):
    """One application of the four-stage reduction.

    `z_seeds` is either one seed (its output serves all four stages, which fix
    disjoint variables) or a tuple of four seeds.  Returns the restriction, the
    depth-(d-1) circuit over the live variables and the trace; raises
    StageFailure when a success condition fails.
    """
    sources = sources or RestrictionSources.default()
    y_source, z_source = sources.for_layer(C.n, params.q)
    y_bits = y_source.generate(y_seed)
    if isinstance(z_seeds, (int, np.integer)):
        z_bits = [z_source.generate(int(z_seeds))] * 4
    else:
        if len(z_seeds) != 4:
            raise ValueError("need one value seed or four")
        z_bits = [z_source.generate(int(s)) for s in z_seeds]
    return _reduce_core(C, params.for_arity(C.n), y_bits, z_bits)


@dataclass
class FullTrace:
    n: int
    depth: int
    eps_schedule: list
    delta: Fraction
    levels: list = field(default_factory=list)
    live: int = 0
    desk_mode: bool = False

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "depth": self.depth,
            "eps_schedule": [str(e) for e in self.eps_schedule],
            "delta": str(self.delta),
            "levels": [t.to_dict() for t in self.levels],
            "live": self.live,
            "desk_mode": self.desk_mode,
        }


def eps_schedule(d: int, eps) -> list:
    return [Fraction(eps) * 30**i for i in range(d - 1)]


def total_loss(d: int, eps) -> Fraction:
    return d * 30 ** (d - 1) * Fraction(eps)


def layer_params(n: int, eps_i, params):
    """Pick the parameters for one level: derived, or a desk override.

    `params` may be None, a LayerReductionParams applied at every level, a
    list (one per level), or a dict of overrides passed to `derive`.
    """
    if params is None:
        return LayerReductionParams.derive(n, eps_i)
    if isinstance(params, dict):
        return LayerReductionParams.derive(n, eps_i, **params)
    return params.for_arity(n)


def restrict_with_bits(C: ThresholdCircuit, eps, provider: Callable, params=None):
    """Collapse C to a single gate reading restriction bits from `provider`.

    provider(level, n, q) returns (y_bits, z_bits) for a level with n
    variables and selection blocks of q bits; z_bits is one accessor or four.
    Anything indexable works, which lets callers enumerate bits lazily.
    """
    d = C.depth
    delta = total_loss(d, eps)
    desk = params is not None
    if not desk and delta >= 1:
        raise ParameterInfeasible(f"d*30^(d-1)*eps = {delta} must be below 1")
    schedule = eps_schedule(d, eps)
    trace = FullTrace(C.n, d, schedule, delta, desk_mode=desk)
    rho = Restriction.identity(C.n)
    current = C
    for level, eps_i in enumerate(schedule):
        if current.n < 2:
            layer_trace = ReductionTrace(current.n, failure=("rho1", f"only {current.n} variables left"))
            trace.levels.append(layer_trace)
            raise StageFailure("rho1", layer_trace.failure[1], trace)
        level_params = params[level] if isinstance(params, (list, tuple)) else params
        p_level = layer_params(current.n, eps_i, level_params)
        y_bits, z_bits = provider(level, current.n, p_level.q)
        try:
            step, current, layer_trace = _reduce_core(current, p_level, y_bits, _stage_bits(z_bits))
        except StageFailure as exc:
            trace.levels.append(exc.trace)
            exc.trace = trace
            raise
        trace.levels.append(layer_trace)
        rho = rho.refine(step)
    trace.live = current.n
    return rho, current.output_gate, trace


def restrict_full(C: ThresholdCircuit, eps, seeds: Sequence, params=None, sources: RestrictionSources | None = None):
    """Collapse C to a single gate. `seeds` holds one (y_seed, z_seeds) pair per level."""
    if len(seeds) < C.depth - 1:
        raise ValueError(f"need {C.depth - 1} seed pairs, got {len(seeds)}")
    sources = sources or RestrictionSources.default()

    def provider(level, n, q):
        y_source, z_source = sources.for_layer(n, q)
        y_seed, z_seeds = seeds[level]
        if isinstance(z_seeds, (int, np.integer)):
            return y_source.generate(y_seed), z_source.generate(int(z_seeds))
        return y_source.generate(y_seed), [z_source.generate(int(s)) for s in z_seeds]

    return restrict_with_bits(C, eps, provider, params)


# statistical harnesses


@dataclass(frozen=True)
class HarnessResult:
    rate: Fraction
    hits: int
    trials: int
    seed: int
    notes: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"rate": str(self.rate), "hits": self.hits, "trials": self.trials, "seed": self.seed, "notes": self.notes}


def _q_of(p) -> int:
    p = Fraction(p)
    q = p.denominator.bit_length() - 1
    if p.numerator != 1 or p.denominator != 1 << q:
        raise ValueError("p must be a power of two")
    return q


def restricted_is_balanced(phi: LTF, t_squared) -> bool:
    """Balance with the no-live-variable case read as theta' == 0."""
    if not any(phi.weights):
        return phi.threshold == 0
    return is_balanced_sq(phi, t_squared)


def harness_single_ltf_lemma(phi: LTF, p, t, y_source: SeededSource, z_source: SeededSource, trials: int, seed: int = 0) -> HarnessResult:
    """Monte-Carlo rate at which a restricted gate stays t-balanced."""
    if trials < 1:
        raise ValueError("trials must be positive")
    q = _q_of(p)
    n = phi.n
    rng = python_rng(seed, "single-ltf-lemma")
    t_sq = Fraction(t) ** 2
    hits = 0
    for _ in range(trials):
        y = y_source.generate(rng.getrandbits(y_source.seed_len))
        z = z_source.generate(rng.getrandbits(z_source.seed_len))
        rho = restriction_from_bits(y, z, n, q)
        if restricted_is_balanced(restrict_ltf(phi, rho), t_sq):
            hits += 1
    return HarnessResult(Fraction(hits, trials), hits, trials, seed, {"p": str(Fraction(p)), "t": str(Fraction(t))})


def harness_bias_preservation(
    phi: LTF,
    sigma: int,
    live: Sequence[int],
    z_source: SeededSource,
    delta,
    delta_prime,
    trials: int | None = None,
    seed: int = 0,
    budget: int | None = None,
) -> HarnessResult:
    """Rate of value strings for the fixed variables that keep phi delta'-close to sigma.

    The z source supplies values for the variables outside `live` in
    ascending order.  With `trials=None` every seed is enumerated.
    """
    n = phi.n
    live = sorted(live)
    if len(live) > 20:
        raise ValueError("live set too large for exhaustive closeness")
    fixed = [i for i in range(n) if i not in set(live)]
    if z_source.out_len != len(fixed):
        raise ValueError("value source must cover exactly the fixed variables")
    charge(1 << n, budget, "closeness oracle")
    agree = acceptance_count_ltf(phi) if sigma == -1 else (1 << n) - acceptance_count_ltf(phi)
    if Fraction(agree, 1 << n) < 1 - Fraction(delta):
        raise ValueError("phi is not delta-close to sigma")
    target = 1 - Fraction(delta_prime)

    def survives(zbits) -> bool:
        values = [STAR] * n
        for i, b in zip(fixed, zbits):
            values[i] = _sign(b)
        sub = restrict_ltf(phi, Restriction(tuple(values)))
        acc = acceptance_count_ltf(sub)
        agree_sub = acc if sigma == -1 else (1 << sub.n) - acc
        return Fraction(agree_sub, 1 << sub.n) >= target

    hits = 0
    if trials is None:
        total = z_source.num_seeds
        for block in z_source.blocks(budget):
            hits += sum(1 for row in block if survives(row))
    else:
        rng = python_rng(seed, "bias-preservation")
        total = trials
        for _ in range(trials):
            if survives(z_source.generate(rng.getrandbits(z_source.seed_len))):
                hits += 1
    return HarnessResult(Fraction(hits, total), hits, total, seed, {"delta": str(Fraction(delta)), "delta_prime": str(Fraction(delta_prime))})


def desk_overrides(C: ThresholdCircuit) -> dict:
    """Layer overrides that keep restriction meaningful on tiny circuits.

    p = 1/2, t^2 = 2 ln(10 r) for r bottom gates (a union bound over gates
    for the imbalance tail), one-variable small gates, caps at r, and the
    balanced wire cap at n.
    """
    r = max(1, len(C.bottom))
    return {
        "p": Fraction(1, 2),
        "t_squared": Fraction(2 * math.log(10 * r)).limit_denominator(1000),
        "fanout_cap": r,
        "small_fanin_cap": 1,
        "kprime": r,
        "balanced_wire_cap": C.n,
    }
