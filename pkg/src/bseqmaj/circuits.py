"""Boolean circuits and the circuit-level rewrites used by the reductions.

A circuit is a list of gates in which every source index precedes the gate
that reads it, so the list order is a topological order.  ``INPUT`` gates are
numbered as inputs in order of appearance.  Buffers are one-input ``OR``
gates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from math import ceil, log2
from typing import Sequence

import numpy as np

from .netcore import BudgetExceeded

INPUT, AND, OR, NOT = "INPUT", "AND", "OR", "NOT"
GATE_KINDS = (INPUT, AND, OR, NOT)

DEFAULT_REACH_BUDGET = 2**22
DEFAULT_CIRCUIT_BUDGET = 200_000


class CircuitError(ValueError):
    pass


@dataclass(frozen=True)
class Gate:
    kind: str
    sources: tuple[int, ...] = ()

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise CircuitError(f"unknown gate kind {self.kind!r}")
        object.__setattr__(self, "sources", tuple(self.sources))
        if self.kind == INPUT and self.sources:
            raise CircuitError("INPUT gates take no sources")
        if self.kind == NOT and len(self.sources) != 1:
            raise CircuitError("NOT gates take exactly one source")
        if self.kind in (AND, OR) and not self.sources:
            raise CircuitError(f"{self.kind} gate needs at least one source")


@dataclass(frozen=True)
class Circuit:
    gates: tuple[Gate, ...]
    outputs: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        object.__setattr__(self, "outputs", tuple(self.outputs))
        for g, gate in enumerate(self.gates):
            for s in gate.sources:
                if not 0 <= s < g:
                    raise CircuitError(f"gate {g} reads {s}, which does not precede it")
        for o in self.outputs:
            if not 0 <= o < len(self.gates):
                raise CircuitError(f"output refers to missing gate {o}")

    # -- structure -------------------------------------------------------

    @cached_property
    def inputs(self) -> tuple[int, ...]:
        return tuple(g for g, gate in enumerate(self.gates) if gate.kind == INPUT)

    @property
    def n(self) -> int:
        return len(self.inputs)

    @property
    def m(self) -> int:
        return len(self.outputs)

    @property
    def size(self) -> int:
        return len(self.gates)

    @property
    def is_iterable(self) -> bool:
        return self.n == self.m

    @property
    def is_monotone(self) -> bool:
        return all(g.kind != NOT for g in self.gates)

    @cached_property
    def consumers(self) -> tuple[tuple[int, ...], ...]:
        out: list[list[int]] = [[] for _ in self.gates]
        for g, gate in enumerate(self.gates):
            for s in gate.sources:
                out[s].append(g)
        return tuple(tuple(c) for c in out)

    def in_degree(self, g: int) -> int:
        return len(self.gates[g].sources)

    def out_degree(self, g: int, count_outputs: bool = False) -> int:
        d = len(self.consumers[g])
        if count_outputs:
            d += sum(1 for o in self.outputs if o == g)
        return d

    def max_degree(self, count_outputs: bool = False) -> int:
        """Largest in-degree + out-degree over all gates (inputs included)."""
        return max((self.in_degree(g) + self.out_degree(g, count_outputs) for g in range(self.size)), default=0)

    @cached_property
    def layer_index(self) -> tuple[int, ...]:
        """Length of the shortest path from an input to each gate."""
        lay = []
        for gate in self.gates:
            lay.append(0 if gate.kind == INPUT else 1 + min(lay[s] for s in gate.sources))
        return tuple(lay)

    @cached_property
    def level(self) -> tuple[int, ...]:
        """Length of the longest path from an input to each gate."""
        lev = []
        for gate in self.gates:
            lev.append(0 if gate.kind == INPUT else 1 + max(lev[s] for s in gate.sources))
        return tuple(lev)

    @property
    def depth(self) -> int:
        return max((self.level[o] for o in self.outputs), default=0)


class CircuitBuilder:
    """Append-only helper that keeps the sources-precede-gates invariant."""

    def __init__(self):
        self.gates: list[Gate] = []

    def add(self, kind: str, *sources: int) -> int:
        self.gates.append(Gate(kind, tuple(sources)))
        return len(self.gates) - 1

    def input(self) -> int:
        return self.add(INPUT)

    def buffer(self, src: int) -> int:
        return self.add(OR, src)

    def build(self, outputs: Sequence[int]) -> Circuit:
        return Circuit(tuple(self.gates), tuple(outputs))


# ---------------------------------------------------------------------------
# evaluation


def _check_inputs(C: Circuit, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=bool)
    if X.shape[-1] != C.n:
        raise CircuitError(f"circuit has {C.n} inputs, got {X.shape[-1]} bits")
    return X


def evaluate_gates(C: Circuit, X) -> np.ndarray:
    """Value of every gate; ``X`` has shape (n,) or (batch, n)."""
    X = _check_inputs(C, X)
    single = X.ndim == 1
    X2 = X[None, :] if single else X
    vals = np.zeros((X2.shape[0], C.size), dtype=bool)
    k = 0
    for g, gate in enumerate(C.gates):
        if gate.kind == INPUT:
            vals[:, g] = X2[:, k]
            k += 1
        elif gate.kind == NOT:
            vals[:, g] = ~vals[:, gate.sources[0]]
        elif gate.kind == AND:
            vals[:, g] = vals[:, list(gate.sources)].all(axis=1)
        else:
            vals[:, g] = vals[:, list(gate.sources)].any(axis=1)
    return vals[0] if single else vals


def evaluate(C: Circuit, x) -> np.ndarray:
    """Output bits C(x) as uint8 (batched if ``x`` is 2-D)."""
    vals = evaluate_gates(C, x)
    return vals[..., list(C.outputs)].astype(np.uint8)


def iterate(C: Circuit, x, t: int) -> np.ndarray:
    if not C.is_iterable:
        raise CircuitError(f"circuit with {C.n} inputs and {C.m} outputs is not iterable")
    y = np.asarray(x, dtype=np.uint8)
    _check_inputs(C, y)
    for _ in range(t):
        y = evaluate(C, y)
    return y


def all_inputs(n: int) -> np.ndarray:
    """All 2^n input vectors, row r has bit i = (r >> i) & 1."""
    r = np.arange(1 << n, dtype=np.int64)
    return ((r[:, None] >> np.arange(n)) & 1).astype(np.uint8)


@dataclass
class ReachResult:
    answer: bool
    time: int | None = None
    transient: int | None = None
    period: int | None = None

    def __bool__(self):
        return self.answer


def reach_oracle(C: Circuit, x, i: int, budget: int = DEFAULT_REACH_BUDGET) -> ReachResult:
    """Does some t >= 1 have C^t(x)_i = 1?  Brute-force iteration until a state repeats."""
    if not C.is_iterable:
        raise CircuitError("reach_oracle needs an iterable circuit")
    y = np.asarray(x, dtype=np.uint8)
    _check_inputs(C, y)
    seen = {y.tobytes(): 0}
    t = 0
    while True:
        y = evaluate(C, y)
        t += 1
        if y[i]:
            return ReachResult(True, time=t)
        key = y.tobytes()
        if key in seen:
            return ReachResult(False, transient=seen[key], period=t - seen[key])
        if len(seen) >= budget:
            raise BudgetExceeded(f"no repeat within {budget} circuit states")
        seen[key] = t


# ---------------------------------------------------------------------------
# dual-rail monotonization


@dataclass(frozen=True)
class RailMap:
    """(positive rail, negative rail) gate ids of the monotone circuit, per original gate."""

    rails: tuple[tuple[int, int], ...]

    def __getitem__(self, g: int) -> tuple[int, int]:
        return self.rails[g]

    def __len__(self):
        return len(self.rails)


def monotonize(C: Circuit, iterable: bool | None = None) -> tuple[Circuit, RailMap]:
    """De Morgan dual-rail translation.

    Inputs become (x_0+ .. x_{n-1}+, x_0- .. x_{n-1}-).  Outputs are the
    positive rails, followed by the negative rails when ``iterable`` (default:
    whenever ``C`` itself is iterable), so the state of the iterated monotone
    circuit is (y, not y).
    """
    if iterable is None:
        iterable = C.is_iterable
    b = CircuitBuilder()
    pos_in = [b.input() for _ in range(C.n)]
    neg_in = [b.input() for _ in range(C.n)]
    rails: list[tuple[int, int]] = []
    k = 0
    for gate in C.gates:
        if gate.kind == INPUT:
            rails.append((pos_in[k], neg_in[k]))
            k += 1
        elif gate.kind == NOT:
            p, q = rails[gate.sources[0]]
            rails.append((q, p))
        else:
            ps = [rails[s][0] for s in gate.sources]
            ns = [rails[s][1] for s in gate.sources]
            dual = OR if gate.kind == AND else AND
            rails.append((b.add(gate.kind, *ps), b.add(dual, *ns)))
    outputs = [rails[o][0] for o in C.outputs]
    if iterable:
        outputs += [rails[o][1] for o in C.outputs]
    return b.build(outputs), RailMap(tuple(rails))


def dual_rail_state(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.uint8)
    return np.concatenate([x, 1 - x])


# ---------------------------------------------------------------------------
# degree bounding


def _split_tree(b: CircuitBuilder, kind: str, srcs: list[int], root: bool = True) -> int:
    if len(srcs) == 1 and not root:
        return srcs[0]
    if len(srcs) <= 2:
        return b.add(kind, *srcs)
    half = (len(srcs) + 1) // 2
    return b.add(kind, _split_tree(b, kind, srcs[:half], False), _split_tree(b, kind, srcs[half:], False))


def _copy_slots(b: CircuitBuilder, src: int, count: int) -> list[int]:
    if count <= 2:
        return [src] * count
    half = (count + 1) // 2
    return _copy_slots(b, b.buffer(src), half) + _copy_slots(b, b.buffer(src), count - half)


def bound_degree(C: Circuit) -> Circuit:
    """Equivalent circuit whose gates all have in-degree <= 2 and out-degree <= 2.

    Output references count toward the out-degree.  A circuit that already
    satisfies the bound is returned unchanged.
    """
    if not C.is_monotone:
        raise CircuitError("bound_degree expects a monotone circuit")
    if all(C.in_degree(g) <= 2 and C.out_degree(g, True) <= 2 for g in range(C.size)):
        return C
    # each reference (consumer source slot or output) gets its own slot
    refs: list[list[tuple]] = [[] for _ in C.gates]
    for g, gate in enumerate(C.gates):
        for pos, s in enumerate(gate.sources):
            refs[s].append(("gate", g, pos))
    for j, o in enumerate(C.outputs):
        refs[o].append(("out", j))
    slot_of: dict[tuple, int] = {}
    new_id: list[int] = []
    b = CircuitBuilder()
    for g, gate in enumerate(C.gates):
        if gate.kind == INPUT:
            root = b.input()
        else:
            srcs = [slot_of[("gate", g, pos)] for pos in range(len(gate.sources))]
            root = _split_tree(b, gate.kind, srcs)
        new_id.append(root)
        for ref, slot in zip(refs[g], _copy_slots(b, root, len(refs[g]))):
            slot_of[ref] = slot
    return b.build([slot_of[("out", j)] for j in range(C.m)])


# ---------------------------------------------------------------------------
# synchronization and depth-1 flattening


@dataclass(frozen=True)
class LayeredCircuit:
    """A synchronous circuit together with its layer table.

    ``layers[l]`` lists the gate ids of layer ``l`` in position order; layer 0
    is the inputs (original ones first, then ``zero_inputs`` always-0
    columns) and the last layer is the outputs in order.
    """

    circuit: Circuit
    layers: tuple[tuple[int, ...], ...]
    original_inputs: int
    zero_inputs: int

    @property
    def depth(self) -> int:
        return len(self.layers) - 1

    @property
    def width(self) -> int:
        return len(self.layers[0])

    def pad_input(self, x) -> np.ndarray:
        return np.concatenate([np.asarray(x, dtype=np.uint8), np.zeros(self.zero_inputs, dtype=np.uint8)])


def _live_gates(C: Circuit) -> list[bool]:
    live = [False] * C.size
    for o in C.outputs:
        live[o] = True
    for g in range(C.size - 1, -1, -1):
        if live[g]:
            for s in C.gates[g].sources:
                live[s] = True
    for g in C.inputs:
        live[g] = True
    return live


def is_synchronous(C: Circuit) -> bool:
    """Every wire spans one level, inputs at level 0, outputs all on the last level."""
    lev = C.level
    for gate in C.gates:
        if gate.kind != INPUT:
            levels = {lev[s] for s in gate.sources}
            if len(levels) != 1:
                return False
    D = C.depth
    if len(set(C.outputs)) != len(C.outputs) or any(lev[o] != D for o in C.outputs):
        return False
    return all(lev[g] < D or g in C.outputs for g in range(C.size))


def synchronize(C: Circuit) -> LayeredCircuit:
    """Insert buffers so that every wire spans exactly one layer and pad to equal widths.

    Dead gates (not reaching an output) are dropped.  Padding gates are
    buffers of an always-0 chain rooted at extra input columns; the extra
    columns are also appended as outputs, so an iterable circuit stays
    iterable.  Each padding gate feeds at most two others.
    """
    if not C.is_monotone:
        raise CircuitError("synchronize expects a monotone circuit")
    live = _live_gates(C)
    lev = C.level
    out_levels = [lev[o] for o in C.outputs]
    D = max(out_levels, default=0)
    counts: dict[int, int] = {}
    for o in C.outputs:
        counts[o] = counts.get(o, 0) + 1
    if any(lev[o] == D and c > 1 for o, c in counts.items()):
        D += 1
    D = max(D, 1)

    b = CircuitBuilder()
    # collect a plan first; gates are emitted layer by layer at the end
    plan: list[tuple[str, tuple[int, ...], int]] = []  # (kind, sources as plan ids, layer)

    def emit(kind, srcs, layer):
        plan.append((kind, tuple(srcs), layer))
        return len(plan) - 1

    new_of: dict[int, int] = {}
    for g, gate in enumerate(C.gates):
        if gate.kind == INPUT:
            new_of[g] = emit(INPUT, (), 0)
    for g, gate in enumerate(C.gates):
        if gate.kind == INPUT or not live[g]:
            continue
        srcs = []
        for s in gate.sources:
            node = new_of[s]
            for layer in range(lev[s] + 1, lev[g]):
                node = emit(OR, (node,), layer)
            srcs.append(node)
        new_of[g] = emit(gate.kind, srcs, lev[g])
    used_as_output: set[int] = set()
    out_nodes = []
    for o in C.outputs:
        node = new_of[o]
        if lev[o] == D and node not in used_as_output:
            out_nodes.append(node)
        else:
            for layer in range(lev[o] + 1, D + 1):
                node = emit(OR, (node,), layer)
            out_nodes.append(node)
        used_as_output.add(node)

    real_width = [0] * (D + 1)
    for kind, _, layer in plan:
        real_width[layer] += 1
    W = max(real_width)

    def zeros_needed(W):
        return [W - w for w in real_width]

    def feasible(z):
        if any(z[l] > 0 for l in range(1, D + 1)) and z[0] == 0:
            return False
        return all(z[l] <= 2 * z[l - 1] for l in range(1, D + 1))

    while not feasible(zeros_needed(W)):
        W += 1
    z = zeros_needed(W)
    zero_nodes: list[list[int]] = [[emit(INPUT, (), 0) for _ in range(z[0])]]
    for layer in range(1, D + 1):
        prev = zero_nodes[-1]
        zero_nodes.append([emit(OR, (prev[k // 2],), layer) for k in range(z[layer])])

    # order: layer by layer; layer 0 = original inputs then zero inputs,
    # last layer = outputs then zero outputs, other layers in plan order
    original_inputs = [new_of[g] for g in C.inputs]
    order_by_layer: list[list[int]] = []
    for layer in range(D + 1):
        if layer == 0:
            order = original_inputs + zero_nodes[0]
        elif layer == D:
            order = out_nodes + zero_nodes[D]
        else:
            order = [p for p, (_, _, l) in enumerate(plan) if l == layer]
        order_by_layer.append(order)
    placed = {p for order in order_by_layer for p in order}
    stray = [p for p in range(len(plan)) if p not in placed]
    if stray:
        raise AssertionError(f"synchronize left {len(stray)} unplaced gates")
    final: dict[int, int] = {}
    for order in order_by_layer:
        for p in order:
            kind, srcs, _ = plan[p]
            final[p] = b.add(kind, *(final[s] for s in srcs))
    table = [tuple(final[p] for p in order) for order in order_by_layer]
    circuit = b.build([final[p] for p in order_by_layer[D]])
    return LayeredCircuit(circuit, tuple(table), C.n, z[0])


@dataclass(frozen=True)
class FlatEmbedding:
    """x -> (x, 0^{(D-1)W}); coordinate i stays i; one source step is ``dilation`` steps."""

    width: int
    dilation: int

    def embed(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.uint8)
        out = np.zeros(self.width * self.dilation, dtype=np.uint8)
        out[: len(x)] = x
        return out


def flatten_depth1(L: LayeredCircuit | Circuit) -> tuple[Circuit, FlatEmbedding]:
    """Rewire a synchronous circuit of depth D and width W into a depth-1 circuit on D*W coordinates.

    Coordinate l*W + k holds gate k of layer l (l < D); the output gate for
    coordinate c is gate k of layer l+1 where c = ((l+1)*W + k) mod D*W.
    """
    if isinstance(L, Circuit):
        if not is_synchronous(L):
            raise CircuitError("flatten_depth1 needs a synchronous circuit")
        L = _layers_of_synchronous(L)
    C = L.circuit
    D, W = L.depth, L.width
    if any(len(layer) != W for layer in L.layers):
        raise CircuitError("flatten_depth1 needs layers of equal width")
    if not C.is_monotone:
        raise CircuitError("flatten_depth1 expects a monotone circuit")
    pos: dict[int, tuple[int, int]] = {}
    for l, layer in enumerate(L.layers):
        for k, g in enumerate(layer):
            pos[g] = (l, k)
    b = CircuitBuilder()
    coords = [b.input() for _ in range(D * W)]
    out_gate = [0] * (D * W)
    for l in range(1, D + 1):
        for k, g in enumerate(L.layers[l]):
            gate = C.gates[g]
            srcs = []
            for s in gate.sources:
                ls, ks = pos[s]
                if ls != l - 1:
                    raise CircuitError(f"gate {g} on layer {l} reads layer {ls}")
                srcs.append(coords[ls * W + ks])
            out_gate[(l * W + k) % (D * W)] = b.add(gate.kind, *srcs)
    return b.build(out_gate), FlatEmbedding(W, D)


def _layers_of_synchronous(C: Circuit) -> LayeredCircuit:
    D = C.depth
    layers: list[list[int]] = [list(C.inputs)] + [[] for _ in range(D)]
    outs = set(C.outputs)
    for g, gate in enumerate(C.gates):
        if gate.kind != INPUT and g not in outs:
            layers[C.level[g]].append(g)
    layers[D] = list(C.outputs)
    return LayeredCircuit(C, tuple(tuple(l) for l in layers), C.n, 0)


# ---------------------------------------------------------------------------
# Turing machines


@dataclass(frozen=True)
class TuringMachine:
    states: tuple[str, ...]
    tape_alphabet: tuple[str, ...]
    input_alphabet: tuple[str, ...]
    delta: dict = field(hash=False, compare=True)
    blank: str = "B"
    initial: str = "q0"
    final: str = "qf"

    def __post_init__(self):
        if self.blank not in self.tape_alphabet or self.blank in self.input_alphabet:
            raise CircuitError("blank must be a tape symbol outside the input alphabet")
        if not set(self.input_alphabet) <= set(self.tape_alphabet):
            raise CircuitError("input alphabet must be a subset of the tape alphabet")
        for q in (self.initial, self.final):
            if q not in self.states:
                raise CircuitError(f"unknown state {q!r}")
        for q in self.states:
            for a in self.tape_alphabet:
                if (q, a) not in self.delta:
                    raise CircuitError(f"transition missing for ({q}, {a})")
                q2, a2, mv = self.delta[(q, a)]
                if q2 not in self.states or a2 not in self.tape_alphabet or mv not in (-1, 0, 1):
                    raise CircuitError(f"bad transition for ({q}, {a})")

    def step_rule(self, q: str, a: str) -> tuple[str, str, int]:
        """Transition with the final state frozen (halted machines stay put)."""
        if q == self.final:
            return q, a, 0
        return self.delta[(q, a)]


@dataclass
class TMConfig:
    tape: list[str]
    head: int
    state: str

    def key(self):
        return (tuple(self.tape), self.head, self.state)


def tm_initial(M: TuringMachine, w: Sequence[str], K: int) -> TMConfig:
    cells = K * len(w)
    return TMConfig(list(w) + [M.blank] * (cells - len(w)), 0, M.initial)


def tm_step(M: TuringMachine, c: TMConfig) -> TMConfig:
    """One step on a tape of fixed length; the head is clamped at both ends."""
    q2, a2, mv = M.step_rule(c.state, c.tape[c.head])
    tape = list(c.tape)
    tape[c.head] = a2
    head = min(max(c.head + mv, 0), len(tape) - 1)
    return TMConfig(tape, head, q2)


def tm_accepts(M: TuringMachine, w: Sequence[str], K: int, budget: int = DEFAULT_REACH_BUDGET) -> ReachResult:
    """Direct simulation: does the machine reach its final state at some t >= 1?"""
    c = tm_initial(M, w, K)
    seen = {c.key(): 0}
    t = 0
    while True:
        c = tm_step(M, c)
        t += 1
        if c.state == M.final:
            return ReachResult(True, time=t)
        if c.key() in seen:
            return ReachResult(False, transient=seen[c.key()], period=t - seen[c.key()])
        if len(seen) >= budget:
            raise BudgetExceeded("TM simulation budget exceeded")
        seen[c.key()] = t


@dataclass(frozen=True)
class TMEncoding:
    """Layout of the circuit state: tape bits (cell-major), one-hot head, state bits, halt flag."""

    cells: int
    symbol_bits: int
    state_bits: int
    symbols: tuple[str, ...]
    states: tuple[str, ...]

    @property
    def head_offset(self) -> int:
        return self.cells * self.symbol_bits

    @property
    def state_offset(self) -> int:
        return self.head_offset + self.cells

    @property
    def halt_index(self) -> int:
        return self.state_offset + self.state_bits

    @property
    def width(self) -> int:
        return self.halt_index + 1

    def encode(self, c: TMConfig, halted: bool = False) -> np.ndarray:
        x = np.zeros(self.width, dtype=np.uint8)
        for j, a in enumerate(c.tape):
            code = self.symbols.index(a)
            for k in range(self.symbol_bits):
                x[j * self.symbol_bits + k] = (code >> k) & 1
        x[self.head_offset + c.head] = 1
        code = self.states.index(c.state)
        for k in range(self.state_bits):
            x[self.state_offset + k] = (code >> k) & 1
        x[self.halt_index] = int(halted)
        return x

    def decode(self, x) -> tuple[TMConfig, bool]:
        x = np.asarray(x)
        tape = []
        for j in range(self.cells):
            code = sum(int(x[j * self.symbol_bits + k]) << k for k in range(self.symbol_bits))
            tape.append(self.symbols[code])
        heads = np.flatnonzero(x[self.head_offset:self.state_offset])
        if len(heads) != 1:
            raise CircuitError(f"head register is not one-hot: {heads.tolist()}")
        code = sum(int(x[self.state_offset + k]) << k for k in range(self.state_bits))
        return TMConfig(tape, int(heads[0]), self.states[code]), bool(x[self.halt_index])

    def notes(self) -> list[str]:
        return [
            f"tape: {self.cells} cells x {self.symbol_bits} bits, little-endian symbol codes {list(self.symbols)}",
            f"head: one-hot over {self.cells} cells at offset {self.head_offset}",
            f"state: {self.state_bits} bits at offset {self.state_offset}, codes {list(self.states)}",
            f"halt flag at {self.halt_index}",
        ]


def tm_to_circuit(M: TuringMachine, w: Sequence[str], K: int, budget: int = DEFAULT_CIRCUIT_BUDGET):
    """Iterable circuit performing one machine step per application.

    Returns ``(circuit, x0, halt_index, encoding)``.  The halt flag is set
    once the state after a step is final and then stays set.
    """
    if len(w) < 1:
        raise CircuitError("input word must be non-empty")
    if any(a not in M.input_alphabet for a in w):
        raise CircuitError("input word uses symbols outside the input alphabet")
    cells = K * len(w)
    sb = max(1, ceil(log2(len(M.tape_alphabet))))
    qb = max(1, ceil(log2(len(M.states))))
    enc = TMEncoding(cells, sb, qb, tuple(M.tape_alphabet), tuple(M.states))
    estimate = cells * len(M.states) * len(M.tape_alphabet) * 4 + cells * (sb + 4)
    if estimate > budget:
        raise BudgetExceeded(f"TM circuit would need about {estimate} gates (budget {budget})")

    b = CircuitBuilder()
    x = [b.input() for _ in range(enc.width)]
    neg = {}

    def lit(i, value):
        if value:
            return x[i]
        if i not in neg:
            neg[i] = b.add(NOT, x[i])
        return neg[i]

    zero = b.add(AND, x[0], lit(0, 0))
    is_state = {}
    for code, q in enumerate(M.states):
        is_state[q] = b.add(AND, *(lit(enc.state_offset + k, (code >> k) & 1) for k in range(qb)))
    # fired[(j, q, a)] = head at j, state q, symbol a under the head
    fired = {}
    for j in range(cells):
        for code, a in enumerate(M.tape_alphabet):
            sym = b.add(AND, *(lit(j * sb + k, (code >> k) & 1) for k in range(sb)))
            for q in M.states:
                fired[(j, q, a)] = b.add(AND, x[enc.head_offset + j], is_state[q], sym)

    def big_or(terms):
        return b.add(OR, *terms) if terms else zero

    out = [0] * enc.width
    for j in range(cells):
        keep = lit(enc.head_offset + j, 0)
        for k in range(sb):
            written = [fired[(j, q, a)] for q in M.states for a in M.tape_alphabet
                       if (M.tape_alphabet.index(M.step_rule(q, a)[1]) >> k) & 1]
            out[j * sb + k] = b.add(OR, b.add(AND, keep, x[j * sb + k]), big_or(written))
    for j in range(cells):
        terms = []
        for (j0, q, a), g in fired.items():
            if min(max(j0 + M.step_rule(q, a)[2], 0), cells - 1) == j:
                terms.append(g)
        out[enc.head_offset + j] = big_or(terms)
    for k in range(qb):
        terms = [g for (j0, q, a), g in fired.items() if (M.states.index(M.step_rule(q, a)[0]) >> k) & 1]
        out[enc.state_offset + k] = big_or(terms)
    to_final = [g for (j0, q, a), g in fired.items() if M.step_rule(q, a)[0] == M.final]
    out[enc.halt_index] = b.add(OR, x[enc.halt_index], big_or(to_final))
    C = b.build(out)
    if C.size > budget:
        raise BudgetExceeded(f"TM circuit has {C.size} gates (budget {budget})")
    x0 = enc.encode(tm_initial(M, w, K))
    return C, x0, enc.halt_index, enc
