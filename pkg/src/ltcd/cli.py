"""Command-line entry point: every command writes one canonical JSON report.

Exit status: 0 when every embedded verification passes, 2 when one fails,
3 for infeasible parameters, 4 when the enumeration budget is exceeded and
1 for malformed input.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import codes, designs, instances, sampler
from .circuit import (
    LTF,
    ThresholdCircuit,
    acceptance_count,
    circuit_document,
    circuit_from_document,
    points,
)
from .derand import (
    BernoulliSelection,
    PartitionSelection,
    harness_kw_restriction,
    kw_bound,
    quantified_derandomize,
)
from .errors import BudgetExceeded, LtcdError, MalformedCircuit, NoSuccessfulSeed, ParameterInfeasible, parse_budget, resolve_budget
from .restriction import RestrictionSources, desk_overrides, harness_single_ltf_lemma
from .sources import AlmostKwiseSource, UniformSource, check_concentration_equivalence, default_fooling_source
from .seeding import derive_seed, python_rng

EXIT_OK, EXIT_INPUT, EXIT_VERIFY, EXIT_INFEASIBLE, EXIT_BUDGET = 0, 1, 2, 3, 4
ENUMERABLE_TRUTH = 20


def code_version() -> str:
    """sha256 over the package sources, so reports pin the code that made them."""
    h = hashlib.sha256()
    for path in sorted(Path(__file__).parent.glob("*.py")):
        h.update(path.name.encode())
        h.update(path.read_bytes())
    return h.hexdigest()[:16]


def _jsonable(value):
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (set, frozenset, tuple)):
        return list(value)
    raise TypeError(f"cannot serialize {type(value).__name__}")


def canonical_json(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=2, default=_jsonable) + "\n"


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a rational number: {text}") from exc


def _budget(text: str) -> int:
    try:
        return parse_budget(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad budget: {text}") from exc


def _rho(text: str):
    return text if text == "auto" else int(text)


def _overrides(text: str | None) -> dict:
    if not text:
        return {}
    if text.startswith("@"):
        text = Path(text[1:]).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedCircuit(f"--override-params is not JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise MalformedCircuit("--override-params must be a JSON object")
    return doc


def _load_circuit(path: str) -> tuple:
    """A circuit document, or a gen/reduce report carrying one under result.circuit."""
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedCircuit(f"not a circuit document: {exc}") from exc
    if isinstance(doc, dict) and isinstance(doc.get("result"), dict) and "circuit" in doc["result"]:
        doc = doc["result"]["circuit"]
    C = circuit_from_document(doc)
    return C, doc.get("meta", {})


def _bit_string(bits) -> str:
    return "".join(str(int(b)) for b in bits)


def _parse_bits(text: str | None, length: int) -> np.ndarray:
    if text is None:
        return np.zeros(length, dtype=np.uint8)
    if len(text) != length or set(text) - {"0", "1"}:
        raise MalformedCircuit(f"message must be {length} characters of 0/1")
    return np.array([int(c) for c in text], dtype=np.uint8)


# commands; each returns (result dict, verified flag)


def cmd_gen(args, budget):
    family = args.family
    n = args.n
    if family == "near-constant":
        patterns = instances.random_patterns(n, args.exceptions, derive_seed(args.seed, "gen")) if args.exceptions else []
        C = instances.near_constant_circuit(n, patterns)
        expected_accepts = (1 << n) - len(patterns)
    elif family == "constant":
        C = instances.near_constant_circuit(n, [])
        expected_accepts = 1 << n
    elif family == "majority-tower":
        C = majority_tower(args.depth, args.arity)
        expected_accepts = None
    elif family == "geometric":
        C = ThresholdCircuit.from_ltf(instances.geometric_ltf(n))
        expected_accepts = None
    else:
        C = instances.random_depth2(n, args.gates, args.fan_in, derive_seed(args.seed, "gen"))
        expected_accepts = None
    if args.negate:
        C = C.negated()
        if expected_accepts is not None:
            expected_accepts = (1 << C.n) - expected_accepts
    accepts = acceptance_count(C, budget=budget)
    meta = {
        "family": family,
        "negated": args.negate,
        "acceptance_count": accepts,
        "rejection_count": (1 << C.n) - accepts,
        "exceptions": min(accepts, (1 << C.n) - accepts),
    }
    verified = expected_accepts is None or accepts == expected_accepts
    return {"circuit": circuit_document(C, meta)}, verified


def majority_tower(depth: int, arity: int = 3) -> ThresholdCircuit:
    """depth layers of arity-way majorities over arity^depth inputs."""
    if depth < 1 or arity < 1 or arity % 2 == 0:
        raise ParameterInfeasible("majority tower needs depth >= 1 and odd arity")
    width = arity**depth
    layers = []
    while width > 1:
        gates = []
        for b in range(width // arity):
            w = [0] * width
            w[b * arity : (b + 1) * arity] = [1] * arity
            gates.append(LTF(tuple(w), 0))
        layers.append(tuple(gates))
        width //= arity
    if not layers:
        layers.append((LTF((1,), 0),))
    return ThresholdCircuit(arity**depth, tuple(layers))


def cmd_derand(args, budget):
    C, meta = _load_circuit(args.circuit)
    params = desk_overrides(C) if args.desk else None
    extra = _overrides(args.override_params)
    if extra:
        params = {**(params or {}), **extra}
    sources = RestrictionSources.uniform() if args.sources == "uniform" else RestrictionSources.default()
    family = UniformSource if args.sources == "uniform" else None
    exceptions = args.exceptions if args.exceptions is not None else meta.get("exceptions")
    result = {"circuit_n": C.n, "circuit_depth": C.depth, "params": {k: str(v) for k, v in sorted((params or {}).items())}}
    try:
        verdict = quantified_derandomize(C, args.eps, sources, family, params, exceptions, budget, keep_outcomes=False)
    except NoSuccessfulSeed as exc:
        result["decision"] = "no-successful-seed"
        result["message"] = str(exc)
        return result, False
    result["verdict"] = verdict.to_dict()
    result["decision"] = verdict.decision
    verified = True
    if C.n <= ENUMERABLE_TRUTH:
        accepts = acceptance_count(C, budget=budget)
        truth = "accept" if 2 * accepts > 1 << C.n else "reject"
        result["ground_truth"] = {"acceptance_count": accepts, "majority": truth}
        verified = truth == verdict.decision
    return result, verified


def cmd_design(args, budget):
    D = designs.build_weak_design(args.m, args.ell, args.alpha, args.rho)
    checks = {form: designs.verify_weak_design(D, form) for form in ("prefix", "total")}
    return {"design": D.to_dict(), "verify": checks}, all(checks.values())


def cmd_encode(args, budget):
    if args.kind == "tensor":
        r = args.r or 3
        base = codes.find_base_code(r, derive_seed(args.seed, "base-code"))
        x = _parse_bits(args.message, r**args.d)
        word = codes.tensor_encode(x, base, args.d)
        generator = codes.tensor_generator(base, args.d)
        direct = (x.astype(np.int64) @ generator.astype(np.int64)) % 2
        result = {"base": base.to_dict(), "d": args.d, "length": len(word), "codeword": _bit_string(word)}
        verified = bool(np.array_equal(word, direct))
        if x.any():
            weight = Fraction(int(word.sum()), len(word))
            result["relative_weight"] = weight
            verified = verified and weight >= base.distance**args.d
        return result, verified
    base = codes.find_base_code(args.r, derive_seed(args.seed, "base-code")) if args.r else None
    code = codes.BalancedCode.build(args.n, args.eps, args.d, base=base, seed=derive_seed(args.seed, "base-code"))
    x = _parse_bits(args.message, code.base.r**args.d)
    word = code.encode(x, budget)
    result = {"code": code.to_dict(), "codeword_hex": np.packbits(word).tobytes().hex(), "length": len(word)}
    verified = True
    if x.any():
        weight = Fraction(int(word.sum()), len(word))
        walk_weight = code.weight(x)
        result["relative_weight"] = weight
        verified = weight == walk_weight and abs(weight - Fraction(1, 2)) <= code.eps
    return result, verified


def _desk_spec(args):
    return sampler.desk_sampler_spec(
        n=args.n, m=args.m, ell=args.ell, alpha=args.alpha, eps=args.accuracy, k=args.k, rho=args.rho, seed=derive_seed(args.seed, "sampler")
    )


def cmd_sampler(args, budget):
    if args.mode == "derived":
        spec = sampler.derive_sampler_params(1 << args.log_n, args.d, args.gamma, args.beta, args.c, args.c_prime)
        return {"spec": spec.to_dict()}, spec.design_condition_ok
    spec = _desk_spec(args)
    delta = args.error if args.error is not None else Fraction(1 << spec.k, 1 << spec.n)
    tests = sampler.all_test_sets(spec.m) if args.all_tests else sampler.random_test_sets(spec.m, args.tests, derive_seed(args.seed, "tests"))
    report = sampler.verify_sampler(spec, spec.eps, delta, tests, budget)
    equivalence = sampler.check_extractor_equivalence(spec, spec.k, spec.eps, delta, budget)
    result = {"spec": spec.to_dict(), "verify": report.to_dict(), "extractor": equivalence}
    return result, report.ok and equivalence["consistent"]


def cmd_reduce(args, budget):
    C, _ = _load_circuit(args.circuit)
    args.m = C.n
    spec = _desk_spec(args)
    built = sampler.build_reduction_circuit(C, spec, budget=budget)
    X = points(spec.n)
    got = built.circuit.outputs(X)
    expected = sampler.composed_outputs(C, spec, budget)
    rng = python_rng(args.seed, "reduce-spot")
    spot = [rng.randrange(1 << spec.n) for _ in range(min(20, 1 << spec.n))]
    bits = (1 - X) // 2
    spot_ok = all(sampler.direct_composition(C, spec, bits[i]) == got[i] for i in spot)
    depth_ok = built.depth == built.sampler_depth + C.depth + 1
    result = {
        "reduction": built.to_dict(),
        "spec": spec.to_dict(),
        "agrees_on_all_inputs": bool(np.array_equal(got, expected)),
        "spot_checks": len(spot),
        "spot_checks_ok": spot_ok,
        "depth_accounting_ok": depth_ok,
        "depth_is_3d_plus_2": built.depth == 3 * C.depth + 2,
        "circuit": circuit_document(built.circuit),
    }
    return result, bool(np.array_equal(got, expected)) and spot_ok and depth_ok


def cmd_harness(args, budget):
    seed = derive_seed(args.seed, "harness", args.kind)
    if args.kind == "ltf-lemma":
        phi = LTF.majority(args.n)
        q = Fraction(args.p).denominator.bit_length() - 1
        res = harness_single_ltf_lemma(phi, args.p, args.t, UniformSource(q * args.n), UniformSource(args.n), args.trials, seed)
        bound = 8 * float(args.p) ** 0.5
        return {"result": res.to_dict(), "bound": bound}, float(res.rate) <= bound
    if args.kind == "kw":
        phi = LTF.majority(args.n)
        family = BernoulliSelection(args.p) if args.family == "bernoulli" else PartitionSelection(args.p)
        res = harness_kw_restriction(phi, family, UniformSource(args.n), args.trials, seed)
        bound = kw_bound(args.n, args.p)
        return {"result": res.to_dict(), "bound": str(bound)}, res.rate <= bound
    # concentration
    n = args.n
    source = {
        "uniform": lambda: UniformSource(n),
        "almost-kwise": lambda: AlmostKwiseSource(n, 3, Fraction(1, 8)),
        "fooling": lambda: default_fooling_source(n, Fraction(1, 4)),
    }[args.source]()
    rng = python_rng(seed, "weights")
    rows, ok = [], True
    for _ in range(args.trials):
        w = tuple(rng.randint(-args.max_weight, args.max_weight) for _ in range(n))
        if not any(w):
            continue
        c = check_concentration_equivalence(source, w, budget)
        ok = ok and c.fooling_implies_concentration and c.concentration_implies_fooling
        rows.append({"w": list(w), "interval_gap": c.interval_gap, "ltf_gap": c.ltf_gap})
    return {"source": source.descriptor(), "checks": rows}, ok


COMMANDS = {
    "gen": cmd_gen,
    "derand": cmd_derand,
    "design": cmd_design,
    "encode": cmd_encode,
    "sampler": cmd_sampler,
    "reduce": cmd_reduce,
    "harness": cmd_harness,
}

MODULE_OF = {
    "gen": "cli-harness",
    "derand": "quantified-derand",
    "design": "designs",
    "encode": "codes",
    "sampler": "sampler-reduce",
    "reduce": "sampler-reduce",
    "harness": "restriction-engine",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # keep exit status 2 for failed verification
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _add_desk_sampler(p, with_m=True):
    p.add_argument("--n", type=int, default=8)
    if with_m:
        p.add_argument("--m", type=int, default=2)
    p.add_argument("--ell", type=int, default=5)
    p.add_argument("--alpha", type=_fraction, default=Fraction(1, 5))
    p.add_argument("--rho", type=_rho, default="auto", help='design intersection budget, an integer or "auto"')
    p.add_argument("--k", type=int, default=2, help="min-entropy for the extractor check")
    p.add_argument("--accuracy", type=_fraction, default=Fraction(1, 4))


def _global_options(parser, suppress: bool):
    default = (lambda value: argparse.SUPPRESS) if suppress else (lambda value: value)
    parser.add_argument("--seed", type=int, default=default(0), help="64-bit master seed")
    parser.add_argument("--budget", type=_budget, default=default(None), help="enumeration budget (default $LTCD_BUDGET or 2^22)")
    parser.add_argument("--workers", type=int, default=default(1), help="recorded; computation is single-process")
    parser.add_argument("--out", default=default(None), help="report path (default stdout)")
    parser.add_argument("--override-params", default=default(None), help="JSON object or @file with parameter overrides")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ltcd", description=__doc__.splitlines()[0])
    _global_options(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _global_options(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    add = sub.add_parser

    def sub_parser(name, **kw):
        return add(name, parents=[common], **kw)

    p = sub_parser("gen", help="emit a curated instance with its acceptance count")
    p.add_argument("family", choices=["near-constant", "constant", "majority-tower", "geometric", "random-depth2"])
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--exceptions", type=int, default=1)
    p.add_argument("--negate", action="store_true")
    p.add_argument("--depth", type=int, default=2)
    p.add_argument("--arity", type=int, default=3)
    p.add_argument("--gates", type=int, default=4)
    p.add_argument("--fan-in", type=int, default=3)

    p = sub_parser("derand", help="run the quantified derandomizer on a circuit file")
    p.add_argument("circuit")
    p.add_argument("--eps", type=_fraction, default=Fraction(1, 10))
    p.add_argument("--sources", choices=["uniform", "default"], default="uniform")
    p.add_argument("--exceptions", type=int, default=None, help="B; defaults to the circuit metadata")
    p.add_argument("--desk", action="store_true", help="use tiny-circuit layer overrides")

    p = sub_parser("design", help="build and verify a weak design")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--ell", type=int, required=True)
    p.add_argument("--alpha", type=_fraction, required=True)
    p.add_argument("--rho", type=int, default=None)

    p = sub_parser("encode", help="encode a message with the tensor or balanced code")
    p.add_argument("kind", choices=["tensor", "balanced"])
    p.add_argument("--r", type=int, default=None, help="base code message length (tensor default 3; balanced default: smallest r with r^d >= n)")
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--eps", type=_fraction, default=Fraction(1, 8))
    p.add_argument("--message", default=None, help="0/1 string (default all zeros)")

    p = sub_parser("sampler", help="derive or verify an averaging sampler")
    p.add_argument("mode", choices=["desk", "derived"])
    _add_desk_sampler(p)
    p.add_argument("--error", type=_fraction, default=None, help="delta (default 2^(k-n))")
    p.add_argument("--tests", type=int, default=50)
    p.add_argument("--all-tests", action="store_true")
    p.add_argument("--log-n", type=int, default=160)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--gamma", type=_fraction, default=Fraction(1, 80))
    p.add_argument("--beta", type=_fraction, default=Fraction(1))
    p.add_argument("--c", type=int, default=2)
    p.add_argument("--c-prime", type=int, default=2)

    p = sub_parser("reduce", help="build MAJ_z C(Samp(x, z)) for a circuit file")
    p.add_argument("circuit")
    _add_desk_sampler(p, with_m=False)

    p = sub_parser("harness", help="restriction statistics and concentration checks")
    p.add_argument("kind", choices=["ltf-lemma", "kw", "concentration"])
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--p", type=_fraction, default=Fraction(1, 16))
    p.add_argument("--t", type=_fraction, default=Fraction(1))
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--family", choices=["bernoulli", "partition"], default="bernoulli")
    p.add_argument("--source", choices=["uniform", "almost-kwise", "fooling"], default="almost-kwise")
    p.add_argument("--max-weight", type=int, default=5)
    return parser


def _config(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("out",)}


def run(argv=None) -> tuple:
    """Parse, execute and return (exit status, report dict, output path)."""
    args = build_parser().parse_args(argv)
    budget = resolve_budget(args.budget)
    report = {"command": args.command, "config": _config(args), "budget": budget, "code_version": code_version()}
    try:
        result, verified = COMMANDS[args.command](args, budget)
    except (LtcdError, ValueError, OSError) as exc:
        if isinstance(exc, ParameterInfeasible):
            status = EXIT_INFEASIBLE
        elif isinstance(exc, BudgetExceeded):
            status = EXIT_BUDGET
        else:
            status = EXIT_INPUT
        report["error"] = {"module": MODULE_OF[args.command], "type": type(exc).__name__, "message": str(exc)}
        report["verified"] = False
        return status, report, args.out
    report["result"] = result
    report["verified"] = bool(verified)
    return (EXIT_OK if verified else EXIT_VERIFY), report, args.out


def main(argv=None) -> int:
    status, report, out = run(argv)
    text = canonical_json(report)
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)
    return status


if __name__ == "__main__":
    sys.exit(main())
