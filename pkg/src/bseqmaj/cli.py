"""Text formats and the ``bseqmaj`` command line.

Exit codes: 0 success (including NO answers), 2 parse or validation error,
3 budget exceeded, 4 witness divergence.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from . import gadgets
from .circuits import (
    AND, INPUT, NOT, OR, Circuit, CircuitError, Gate, TuringMachine, flatten_depth1, monotonize, synchronize,
    tm_to_circuit,
)
from .gadgets import CompileError, Witness
from .netcore import (
    DEFAULT_STEP_BUDGET, BudgetExceeded, Graph, Network, NetworkError, Rule, UpdateScheme, as_config, config_str,
    find_limit_cycle, normalize_scheme, trajectory,
)
from .solvers import (
    CONDITIONAL, FULL, MODES, InstanceError, PredictionInstance, WitnessError, predict_conditional, solve,
    verify_witness,
)

EXIT_OK, EXIT_INVALID, EXIT_BUDGET, EXIT_DIVERGED = 0, 2, 3, 4
DEFAULT_SEED = 0
MOVES = {"L": -1, "S": 0, "R": 1}


class ParseError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line


def _lines(text: str):
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield no, line.split()


def _int(tok: str, no: int) -> int:
    try:
        return int(tok)
    except ValueError:
        raise ParseError(f"expected an integer, got {tok!r}", no) from None


def _arity(fields, k: int, no: int) -> None:
    if len(fields) != k:
        raise ParseError(f"{fields[0]} takes {k - 1} argument(s)", no)


# ---------------------------------------------------------------------------
# networks


@dataclass
class NetworkFile:
    network: Network
    init: np.ndarray
    target: int | None = None


def parse_network(text: str) -> NetworkFile:
    n = None
    threshold = Fraction(1, 2)
    edges: list[tuple[int, int]] = []
    seen_edges: set[tuple[int, int]] = set()
    blocks: dict[int, int] = {}
    init: dict[int, int] = {}
    clocks: dict[int, str] = {}
    target = None

    def vertex(tok, no):
        v = _int(tok, no)
        if n is None:
            raise ParseError("'nodes' must come first", no)
        if not 0 <= v < n:
            raise ParseError(f"vertex {v} out of range 0..{n - 1}", no)
        return v

    for no, f in _lines(text):
        key = f[0]
        if key == "nodes":
            _arity(f, 2, no)
            if n is not None:
                raise ParseError("duplicate 'nodes'", no)
            n = _int(f[1], no)
            if n < 0:
                raise ParseError("negative vertex count", no)
        elif key == "rule":
            if f[1:] == ["majority"]:
                threshold = Fraction(1, 2)
            elif len(f) == 3 and f[1] == "portion":
                try:
                    a, b = (int(t) for t in f[2].split("/"))
                    threshold = Fraction(a, b)
                except (ValueError, ZeroDivisionError):
                    raise ParseError(f"bad threshold {f[2]!r}", no) from None
                if not 0 < threshold < 1:
                    raise ParseError("threshold must lie in (0, 1)", no)
            else:
                raise ParseError("expected 'rule majority' or 'rule portion a/b'", no)
        elif key == "edge":
            _arity(f, 3, no)
            u, v = vertex(f[1], no), vertex(f[2], no)
            if u == v:
                raise ParseError(f"self-loop at {u}", no)
            e = (min(u, v), max(u, v))
            if e in seen_edges:
                raise ParseError(f"duplicate edge {u} {v}", no)
            seen_edges.add(e)
            edges.append(e)
        elif key == "block":
            _arity(f, 3, no)
            v, k = vertex(f[1], no), _int(f[2], no)
            if k < 1:
                raise ParseError("block indices are positive", no)
            blocks[v] = k
        elif key == "init":
            _arity(f, 3, no)
            v = vertex(f[1], no)
            if f[2] not in ("0", "1"):
                raise ParseError("state must be 0 or 1", no)
            init[v] = int(f[2])
        elif key == "clock":
            _arity(f, 3, no)
            v = vertex(f[1], no)
            if len(f[2]) != 3 or not set(f[2]) <= set("U01"):
                raise ParseError(f"bad clock word {f[2]!r}", no)
            clocks[v] = f[2]
        elif key == "target":
            _arity(f, 2, no)
            target = vertex(f[1], no)
        else:
            raise ParseError(f"unknown directive {key!r}", no)
    if n is None:
        raise ParseError("missing 'nodes'")
    scheme = normalize_scheme([blocks.get(v, 1) for v in range(n)]) if n else UpdateScheme(())
    clock_words = tuple(clocks.get(v, "UUU") for v in range(n)) if clocks else None
    try:
        net = Network(Graph.from_edges(n, edges), Rule(threshold, clock_words), scheme)
    except NetworkError as exc:
        raise ParseError(str(exc)) from None
    x = np.zeros(n, dtype=np.uint8)
    for v, b in init.items():
        x[v] = b
    return NetworkFile(net, x, target)


def serialize_network(net: Network, init=None, target: int | None = None) -> str:
    out = [f"nodes {net.n}"]
    t = net.rule.threshold
    out.append("rule majority" if net.rule.is_majority else f"rule portion {t.numerator}/{t.denominator}")
    out.extend(f"edge {u} {v}" for u, v in net.graph.edges())
    if not net.scheme.is_synchronous:
        out.extend(f"block {v} {k}" for v, k in enumerate(net.scheme.block_of))
    if init is not None:
        out.extend(f"init {v} 1" for v, b in enumerate(init) if b)
    if net.rule.clocks is not None:
        out.extend(f"clock {v} {w}" for v, w in enumerate(net.rule.clocks) if w != "UUU")
    if target is not None:
        out.append(f"target {target}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# circuits

_KINDS = {INPUT, AND, OR, NOT}


def parse_circuit(text: str) -> Circuit:
    n = None
    ids: dict[int, int] = {}
    gates: list[Gate] = []
    outputs: dict[int, int] = {}
    for no, f in _lines(text):
        key = f[0]
        if key == "inputs":
            _arity(f, 2, no)
            n = _int(f[1], no)
        elif key == "gate":
            if len(f) < 3:
                raise ParseError("gate needs an id and a kind", no)
            gid, kind = _int(f[1], no), f[2].upper()
            if kind not in _KINDS:
                raise ParseError(f"unknown gate kind {f[2]!r}", no)
            if gid in ids:
                raise ParseError(f"duplicate gate id {gid}", no)
            srcs = []
            for tok in f[3:]:
                s = _int(tok, no)
                if s not in ids:
                    raise ParseError(f"source {s} used before its definition", no)
                srcs.append(ids[s])
            try:
                gates.append(Gate(kind, tuple(srcs)))
            except CircuitError as exc:
                raise ParseError(str(exc), no) from None
            ids[gid] = len(gates) - 1
        elif key == "output":
            _arity(f, 3, no)
            j, gid = _int(f[1], no), _int(f[2], no)
            if gid not in ids:
                raise ParseError(f"unknown gate {gid}", no)
            if j in outputs:
                raise ParseError(f"duplicate output {j}", no)
            outputs[j] = ids[gid]
        else:
            raise ParseError(f"unknown directive {key!r}", no)
    if sorted(outputs) != list(range(len(outputs))):
        raise ParseError("output indices must be 0..m-1")
    try:
        C = Circuit(tuple(gates), tuple(outputs[j] for j in range(len(outputs))))
    except CircuitError as exc:
        raise ParseError(str(exc)) from None
    if n is not None and n != C.n:
        raise ParseError(f"declared {n} inputs, found {C.n}")
    return C


def serialize_circuit(C: Circuit) -> str:
    out = [f"inputs {C.n}"]
    for g, gate in enumerate(C.gates):
        out.append(" ".join(["gate", str(g), gate.kind, *map(str, gate.sources)]))
    out.extend(f"output {j} {g}" for j, g in enumerate(C.outputs))
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Turing machines


def parse_tm(text: str) -> TuringMachine:
    fields: dict[str, list[str]] = {}
    delta = {}
    for no, f in _lines(text):
        key = f[0]
        if key == "delta":
            if len(f) != 7 or f[3] != "->" or f[6] not in MOVES:
                raise ParseError("expected 'delta q a -> q2 a2 L|S|R'", no)
            if (f[1], f[2]) in delta:
                raise ParseError(f"duplicate transition for ({f[1]}, {f[2]})", no)
            delta[(f[1], f[2])] = (f[4], f[5], MOVES[f[6]])
        elif key in ("states", "alphabet", "input", "blank", "start", "final"):
            fields[key] = f[1:]
        else:
            raise ParseError(f"unknown directive {key!r}", no)
    missing = {"states", "alphabet", "input", "blank", "start", "final"} - set(fields)
    if missing:
        raise ParseError(f"missing {', '.join(sorted(missing))}")
    try:
        return TuringMachine(tuple(fields["states"]), tuple(fields["alphabet"]), tuple(fields["input"]), delta,
                             fields["blank"][0], fields["start"][0], fields["final"][0])
    except CircuitError as exc:
        raise ParseError(str(exc)) from None


def serialize_tm(M: TuringMachine) -> str:
    names = {v: k for k, v in MOVES.items()}
    out = [
        "states " + " ".join(M.states), "alphabet " + " ".join(M.tape_alphabet), "input " + " ".join(M.input_alphabet),
        f"blank {M.blank}", f"start {M.initial}", f"final {M.final}",
    ]
    for q in M.states:
        for a in M.tape_alphabet:
            q2, a2, mv = M.delta[(q, a)]
            out.append(f"delta {q} {a} -> {q2} {a2} {names[mv]}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# witnesses


def serialize_witness(w: Witness) -> str:
    out = [f"kind {w.kind}", f"P={w.P} r={w.r}"]
    if w.iterations is not None:
        out.append(f"iterations {w.iterations}")
    if w.target is not None:
        out.append(f"target {w.target}")
    out.extend(f"lift {s} {c} {int(neg)}" for s, c, neg in w.lift)
    out.extend(f"observe {s} {c}" for s, c in w.observe)
    if w.initial is not None:
        out.append(f"initial {config_str(w.initial) or '-'}")
    for name, entries in w.maps.items():
        out.extend(f"map {name} {json.dumps(list(e))}" for e in entries)
    out.extend(f"stat {k} {json.dumps(v)}" for k, v in w.stats.items())
    out.extend(f"note {note}" for note in w.notes)
    return "\n".join(out) + "\n"


def parse_witness(text: str) -> Witness:
    w = Witness("unknown")
    for no, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip() or raw.lstrip().startswith("#"):
            continue
        key, _, rest = raw.strip().partition(" ")
        try:
            if key == "kind":
                w.kind = rest
            elif key.startswith("P="):
                p, r = raw.split()
                w.P, w.r = int(p[2:]), int(r.removeprefix("r="))
            elif key == "iterations":
                w.iterations = int(rest)
            elif key == "target":
                w.target = int(rest)
            elif key == "lift":
                s, c, neg = rest.split()
                w.lift.append((int(s), int(c), neg == "1"))
            elif key == "observe":
                s, c = rest.split()
                w.observe.append((int(s), int(c)))
            elif key == "initial":
                w.initial = as_config("" if rest == "-" else rest)
            elif key == "map":
                name, _, payload = rest.partition(" ")
                w.maps.setdefault(name, []).append(tuple(json.loads(payload)))
            elif key == "stat":
                name, _, payload = rest.partition(" ")
                w.stats[name] = json.loads(payload)
            elif key == "note":
                w.notes.append(rest)
            else:
                raise ParseError(f"unknown directive {key!r}", no)
        except (ValueError, json.JSONDecodeError) as exc:
            if isinstance(exc, ParseError):
                raise
            raise ParseError(str(exc), no) from None
    return w


# ---------------------------------------------------------------------------
# traces


def trace_lines(configs: Sequence[np.ndarray], start: int = 0) -> list[str]:
    return [f"t={start + k} {config_str(x)}" for k, x in enumerate(configs)]


def parse_trace(text: str) -> tuple[list[np.ndarray], tuple[int, int] | None]:
    configs, cycle = [], None
    for no, f in _lines(text):
        if f[0].startswith("t="):
            configs.append(as_config(f[1] if len(f) > 1 else ""))
        elif f[0] == "cycle":
            kv = dict(tok.split("=") for tok in f[1:])
            cycle = (int(kv["transient"]), int(kv["period"]))
        else:
            raise ParseError(f"unknown trace line {f[0]!r}", no)
    return configs, cycle


# ---------------------------------------------------------------------------
# commands


def _read(path: str) -> str:
    return sys.stdin.read() if path == "-" else Path(path).read_text()


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _bits(s: str, n: int) -> np.ndarray:
    try:
        return as_config(s, n)
    except (NetworkError, ValueError) as exc:
        raise ParseError(f"bad bitstring {s!r}: {exc}") from None


def _load_source(path: str):
    """Network file, circuit file, or ``-`` for none (clock witnesses)."""
    if path == "-":
        return None
    text = Path(path).read_text()
    for _, f in _lines(text):
        return parse_network(text).network if f[0] == "nodes" else parse_circuit(text)
    raise ParseError(f"{path} is empty")


def cmd_simulate(args) -> int:
    nf = parse_network(_read(args.network))
    if args.until_cycle:
        rep = find_limit_cycle(nf.network, nf.init, budget=args.budget)
        configs = trajectory(nf.network, nf.init, rep.transient + rep.period)
        lines = trace_lines(configs) + [f"cycle transient={rep.transient} period={rep.period}"]
    else:
        lines = trace_lines(trajectory(nf.network, nf.init, args.steps))
    _write(args.trace, "\n".join(lines) + "\n")
    return EXIT_OK


def _emit(args, text: str, w: Witness | None) -> None:
    _write(args.out, text)
    if args.witness and w is not None:
        Path(args.witness).write_text(serialize_witness(w))


def cmd_compile(args) -> int:
    kind = args.kind
    if kind == "clock":
        net, w = gadgets.build_clock()
        _emit(args, serialize_network(net, w.initial), w)
        return EXIT_OK
    text = _read(args.infile)
    if kind == "tm":
        M = parse_tm(text)
        C, x0, halt, enc = tm_to_circuit(M, list(args.input), args.K)
        w = Witness("tm", initial=x0, target=halt, notes=enc.notes(), stats={"gates": C.size, "width": C.n})
        _emit(args, serialize_circuit(C), w)
        return EXIT_OK
    if kind in ("gates", "clocked", "bseq", "flatten", "monotone"):
        C = parse_circuit(text)
        if kind == "gates":
            net, w = gadgets.compile_circuit_to_majority(C)
            _emit(args, serialize_network(net, w.initial), w)
        elif kind == "clocked":
            x = _bits(args.input, C.n) if args.input else np.zeros(C.n, dtype=np.uint8)
            net, w = gadgets.compile_circuit_to_clocked(C)
            _emit(args, serialize_network(net, w.lift_state(x)), w)
        elif kind == "bseq":
            x = _bits(args.input, C.n)
            if not 0 <= args.target < C.n:
                raise ParseError(f"target {args.target} out of range")
            net, cfg, target, w = gadgets.compile_bseq_instance(C, x, args.target)
            _emit(args, serialize_network(net, cfg, target), w)
        elif kind == "monotone":
            M, rails = monotonize(C)
            iterable = C.is_iterable
            lift = [(i, i, False) for i in range(C.n)] + [(i, C.n + i, True) for i in range(C.n)]
            w = Witness("monotone", lift=lift, observe=[(j, j) for j in range(C.m)],
                        initial=np.zeros(M.n, dtype=np.uint8), iterations=None if iterable else 1,
                        maps={"rails": [(g, p, q) for g, (p, q) in enumerate(rails.rails)]})
            _emit(args, serialize_circuit(M), w)
        else:
            L = synchronize(C)
            F, emb = flatten_depth1(L)
            w = Witness("flatten", P=emb.dilation, lift=[(i, i, False) for i in range(C.n)],
                        observe=[(i, i) for i in range(C.n)], initial=np.zeros(F.n, dtype=np.uint8),
                        stats={"depth": L.depth, "width": L.width, "quiet_off_phase": True})
            _emit(args, serialize_circuit(F), w)
        return EXIT_OK
    nf = parse_network(text)
    if kind == "amplify":
        net, w = gadgets.amplify(nf.network, args.k)
    elif kind == "portion":
        net, w = gadgets.to_portion(nf.network, Fraction(args.p))
    elif kind == "eventual":
        net, w = gadgets.attach_eventual_gadget(nf.network, args.vertex)
    elif kind == "full":
        net, w = gadgets.build_full_instance(nf.network, args.d or _odd_at_least(nf.network.graph.max_degree),
                                             args.vertex)
    else:
        net, w = gadgets.compile_clocked_to_majority(nf.network)
    _emit(args, serialize_network(net, w.lift_state(nf.init), w.target), w)
    return EXIT_OK


def _odd_at_least(d: int) -> int:
    d = max(d, 3)
    return d if d % 2 else d + 1


def cmd_predict(args) -> int:
    nf = parse_network(_read(args.network))
    if args.mode != FULL and nf.target is None:
        raise ParseError("network file has no 'target' line")
    if args.mode == CONDITIONAL:
        free = {int(t) for t in args.free.split(",") if t} if args.free else set()
        if any(not 0 <= v < nf.network.n for v in free):
            raise ParseError("free vertex out of range")
        fixed = {v: int(b) for v, b in enumerate(nf.init) if v not in free}
        inst = PredictionInstance(nf.network, nf.init, nf.target, CONDITIONAL, fixed)
        verdict = predict_conditional(inst, bound=args.bound, budget=args.budget)
    else:
        inst = PredictionInstance(nf.network, nf.init, nf.target, args.mode)
        verdict = solve(inst, budget=args.budget)
    line = verdict.line()
    if verdict.completion is not None and args.mode == CONDITIONAL and verdict.answer:
        line += f" completion={config_str(verdict.completion)}"
    print(line)
    return EXIT_OK


def cmd_verify(args) -> int:
    w = parse_witness(_read(args.witness))
    source = _load_source(args.source)
    compiled = _load_source(args.compiled)
    report = verify_witness(source, compiled, w, samples=args.samples, steps=args.steps, seed=args.seed)
    print("\n".join(report.lines()))
    return EXIT_OK if report.ok else EXIT_DIVERGED


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bseqmaj", description="Majority networks under block-sequential updating.")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="simulate a network file and emit a trace")
    s.add_argument("network")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--steps", type=int)
    g.add_argument("--until-cycle", action="store_true")
    s.add_argument("--trace", help="trace output path (default stdout)")
    s.add_argument("--budget", type=int, default=DEFAULT_STEP_BUDGET)
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("compile", help="run one of the reduction compilers")
    kinds = c.add_subparsers(dest="kind", required=True)

    def kind(name: str, help: str, infile: bool = True) -> argparse.ArgumentParser:
        k = kinds.add_parser(name, help=help)
        if infile:
            k.add_argument("infile")
        k.add_argument("--out", help="compiled file (default stdout)")
        k.add_argument("--witness", help="witness output path")
        k.set_defaults(func=cmd_compile)
        return k

    kind("gates", "monotone circuit -> sequential majority network")
    kind("clock", "the 12-vertex clock", infile=False)
    kind("amplify", "(2k+1)-fold amplification of a network").add_argument("-k", type=int, default=1)
    kind("clocked", "depth-1 monotone circuit -> clocked network").add_argument("--input", help="initial bits")
    kind("clocked-majority", "clocked network -> plain majority network")
    k = kind("bseq", "iterable circuit + input + target -> one-vertex prediction instance")
    k.add_argument("--input", required=True)
    k.add_argument("--target", type=int, required=True)
    kind("flatten", "monotone iterable circuit -> depth-1 circuit")
    kind("monotone", "dual-rail monotone circuit")
    kind("portion", "majority network -> portion-p network").add_argument("-p", default="1/3", help="threshold a/b")
    kind("eventual", "attach the latch gadget").add_argument("--vertex", type=int, required=True)
    k = kind("full", "all-active instance for vertex --vertex")
    k.add_argument("--vertex", type=int, required=True)
    k.add_argument("-d", type=int, help="odd degree bound (default: smallest odd >= max(3, max degree))")
    k = kind("tm", "linear-bounded machine -> iterable circuit")
    k.add_argument("--input", required=True, help="input word, one symbol per character")
    k.add_argument("-K", type=int, default=1, help="space factor")

    p = sub.add_parser("predict", help="solve a prediction problem")
    p.add_argument("network")
    p.add_argument("--mode", choices=MODES, default="once")
    p.add_argument("--free", help="comma-separated free vertices for --mode conditional")
    p.add_argument("--budget", type=int, default=DEFAULT_STEP_BUDGET)
    p.add_argument("--bound", type=int, default=20, help="maximum number of free vertices")
    p.set_defaults(func=cmd_predict)

    v = sub.add_parser("verify", help="check a witness by side-by-side simulation")
    v.add_argument("witness")
    v.add_argument("source", help="source network or circuit file, '-' for none")
    v.add_argument("compiled")
    v.add_argument("--samples", type=int, default=20)
    v.add_argument("--steps", type=int)
    v.add_argument("--seed", type=int, default=DEFAULT_SEED)
    v.set_defaults(func=cmd_verify)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BudgetExceeded as exc:
        print(f"error: budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (ParseError, NetworkError, CircuitError, CompileError, InstanceError, WitnessError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
