"""Reduction compilers: source object -> network + witness.

Every compiler returns the compiled :class:`Network` and a :class:`Witness`
recording how a source state is written into the compiled network
(``lift``), which compiled vertices mirror which source coordinates
(``observe``), the time dilation ``P`` and observation phase ``r``, and the
base configuration of all auxiliary vertices (``initial``).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from math import ceil
from typing import Any, Sequence

import numpy as np

from .circuits import (
    AND, INPUT, Circuit, CircuitBuilder, bound_degree, flatten_depth1, monotonize, synchronize,
)
from .netcore import Graph, Network, Rule, UpdateScheme, as_config


class CompileError(ValueError):
    pass


@dataclass
class Witness:
    kind: str
    P: int = 1
    r: int = 0
    lift: list[tuple[int, int, bool]] = field(default_factory=list)
    observe: list[tuple[int, int]] = field(default_factory=list)
    initial: np.ndarray | None = None
    target: int | None = None
    maps: dict[str, list[tuple]] = field(default_factory=dict)
    iterations: int | None = None
    notes: list[str] = field(default_factory=list)
    stats: dict[str, Any] = field(default_factory=dict)

    def validate(self, compiled_size: int | None = None) -> None:
        if self.P < 1 or not 0 <= self.r < self.P:
            raise CompileError(f"bad timing P={self.P} r={self.r}")
        for name, pairs in (("lift", [(s, c) for s, c, _ in self.lift]), ("observe", self.observe)):
            dsts = [c for _, c in pairs]
            if len(set(dsts)) != len(dsts):
                raise CompileError(f"{name} map is not injective")
            if compiled_size is not None and any(not 0 <= c < compiled_size for c in dsts):
                raise CompileError(f"{name} map leaves the compiled vertex set")

    def lift_state(self, x) -> np.ndarray:
        """Compiled initial configuration for source state ``x``."""
        y = np.array(self.initial, dtype=np.uint8)
        x = np.asarray(x, dtype=np.uint8)
        for s, c, neg in self.lift:
            y[c] = x[s] ^ neg
        return y

    def observe_vertices(self, coord: int) -> list[int]:
        return [c for s, c in self.observe if s == coord]


def compose(first: Witness, second: Witness, kind: str | None = None) -> Witness:
    """Witness of ``second`` applied after ``first`` (source -> mid -> compiled)."""
    lift = [(s, c, n1 ^ n2) for s, m, n1 in first.lift for m2, c, n2 in second.lift if m2 == m]
    observe = [(s, c) for s, m in first.observe for m2, c in second.observe if m2 == m]
    initial = second.lift_state(first.initial) if first.initial is not None else second.initial
    target = None
    if first.target is not None:
        hits = [c for m, c in second.observe if m == first.target]
        target = hits[0] if hits else None
    w = Witness(
        kind=kind or f"{first.kind}+{second.kind}",
        P=first.P * second.P,
        r=first.r * second.P + second.r,
        lift=lift,
        observe=observe,
        initial=initial,
        target=target,
        maps={**first.maps, **second.maps},
        notes=first.notes + second.notes,
        stats={**first.stats, **second.stats},
    )
    return w


def _identity_witness(kind: str, n: int, size: int, P: int = 1) -> Witness:
    return Witness(kind, P=P, lift=[(i, i, False) for i in range(n)], observe=[(i, i) for i in range(n)],
                   initial=np.zeros(size, dtype=np.uint8))


class _NetBuilder:
    def __init__(self):
        self.n = 0
        self.edges: set[tuple[int, int]] = set()
        self.init: list[int] = []
        self.clock: list[str] = []
        self.tags: list[str] = []

    def vertex(self, state: int = 0, clock: str = "UUU", tag: str = "") -> int:
        self.init.append(state)
        self.clock.append(clock)
        self.tags.append(tag)
        self.n += 1
        return self.n - 1

    def edge(self, u: int, v: int) -> None:
        if u == v:
            raise CompileError(f"self-loop at {u}")
        e = (min(u, v), max(u, v))
        if e in self.edges:
            raise CompileError(f"duplicate edge {u}-{v}")
        self.edges.add(e)

    def graph(self) -> Graph:
        return Graph.from_edges(self.n, sorted(self.edges))


# ---------------------------------------------------------------------------
# monotone circuits as sequential majority networks


def prepare_for_gadgets(C: Circuit) -> Circuit:
    """Normalize a monotone circuit for the gate gadgets.

    Outputs that are inputs or repeat an earlier output get their own
    buffer, duplicate sources are merged, and every input gets out-degree
    exactly one (fan-out goes through a tree of buffers of out-degree <= 2).
    """
    if not C.is_monotone:
        raise CompileError("gate gadgets need a monotone circuit")
    b = CircuitBuilder()
    for gate in C.gates:
        b.add(gate.kind, *dict.fromkeys(gate.sources))
    outputs = []
    for o in C.outputs:
        outputs.append(b.buffer(o) if C.gates[o].kind == INPUT or o in outputs else o)
    C1 = b.build(outputs)

    b = CircuitBuilder()
    new: dict[int, int] = {}
    slots: dict[tuple[int, int], int] = {}
    for g, gate in enumerate(C1.gates):
        if gate.kind == INPUT:
            new[g] = b.input()
            users = C1.consumers[g]
            if len(users) > 1:
                for u, leaf in zip(users, _buffer_leaves(b, b.buffer(new[g]), len(users))):
                    slots[(g, u)] = leaf
        else:
            new[g] = b.add(gate.kind, *(slots.get((s, g), new[s]) for s in gate.sources))
    return b.build([new[o] for o in C1.outputs])


def _buffer_leaves(b: CircuitBuilder, root: int, count: int) -> list[int]:
    if count <= 2:
        return [root] * count
    half = (count + 1) // 2
    return _buffer_leaves(b, b.buffer(root), half) + _buffer_leaves(b, b.buffer(root), count - half)


def _gate_degrees(C: Circuit) -> int:
    return max((len(g.sources) + len(set(C.consumers[i])) for i, g in enumerate(C.gates)), default=0)


def _embed_circuit(nb: _NetBuilder, C: Circuit, input_vertex: Sequence[int], extra_consumers: dict[int, int],
                   gate_clock: str = "UUU", const_clocks: bool = False):
    """Add the gate gadgets of ``C`` to ``nb``; returns (gate vertex ids, aux ids).

    ``extra_consumers[g]`` counts neighbors outside the circuit that read gate
    ``g`` and are inactive whenever ``g`` updates.
    """
    vid: list[int] = [0] * C.size
    aux: list[int] = []
    ins = iter(input_vertex)
    for g, gate in enumerate(C.gates):
        if gate.kind == INPUT:
            vid[g] = next(ins)
        else:
            vid[g] = nb.vertex(0, gate_clock, f"gate:{g}")
    for g, gate in enumerate(C.gates):
        if gate.kind == INPUT:
            continue
        srcs = sorted(set(gate.sources))
        for s in srcs:
            nb.edge(vid[s], vid[g])
        n_in = len(srcs)
        m_out = len(set(C.consumers[g])) + extra_consumers.get(g, 0)
        if gate.kind == AND:
            count = abs(n_in - m_out - 1)
            value = 0 if n_in - m_out - 1 >= 0 else 1
        else:
            count = n_in + m_out - 1
            value = 1
        clock = (str(value) * 3) if const_clocks else "UUU"
        group = [nb.vertex(value, clock, f"aux:{g}") for _ in range(count)]
        for a in group:
            nb.edge(vid[g], a)
        for a in group[1:]:
            nb.edge(group[0], a)
        aux.extend(group)
    return vid, aux


def compile_circuit_to_majority(C: Circuit, d: int | None = None) -> tuple[Network, Witness]:
    """Sequential majority network computing C in one global step."""
    P = prepare_for_gadgets(C)
    d_eff = _gate_degrees(P)
    if d is not None and d_eff > max(d, 3):
        raise CompileError(f"circuit degree {d_eff} exceeds the declared bound {d}")
    nb = _NetBuilder()
    inputs = [nb.vertex(0, tag=f"input:{i}") for i in range(P.n)]
    vid, aux = _embed_circuit(nb, P, inputs, {})
    gates = [vid[g] for g, gate in enumerate(P.gates) if gate.kind != INPUT]
    order = gates + aux + inputs
    net = Network(nb.graph(), Rule.majority(), UpdateScheme.sequential(order))
    bound = 2 * max(d_eff, 1) - 1
    if net.graph.max_degree > bound:
        raise AssertionError(f"compiled degree {net.graph.max_degree} exceeds {bound}")
    outs = [vid[o] for o in P.outputs]
    w = Witness(
        "gates", P=1, r=0,
        lift=[(i, v, False) for i, v in enumerate(inputs)],
        observe=[(j, v) for j, v in enumerate(outs)],
        initial=np.array(nb.init, dtype=np.uint8),
        iterations=1,
        maps={"input": list(enumerate(inputs)), "output": list(enumerate(outs))},
        stats={"vertices": net.n, "max_degree": net.graph.max_degree, "gate_degree": d_eff, "degree_bound": bound},
    )
    w.validate(net.n)
    return net, w


# ---------------------------------------------------------------------------
# the clock

CLOCK_LABELS = ("001", "110", "010", "101", "100", "011", None, None, None, "111", None, "000")
_CLOCK_EDGES = [(0, 2), (2, 4), (4, 6), (1, 3), (3, 5), (5, 7), (0, 1), (2, 3), (4, 5), (6, 7), (0, 6), (1, 7),
                (8, 9), (10, 11)]
_CLOCK_BLOCKS = (1, 1, 2, 2, 3, 3, 4, 4, 4, 4, 4, 4)
_CLOCK_INIT = (0, 1, 0, 1, 1, 0, 0, 1, 1, 1, 0, 0)


def build_clock() -> tuple[Network, Witness]:
    """12-vertex majority network whose vertex labelled s is in state s[t mod 3] at time t.

    Two 4-cycles joined by rungs (a cube) updated column by column in three
    blocks, plus a constant-active and a constant-inactive pair.
    """
    g = Graph.from_edges(12, _CLOCK_EDGES)
    net = Network(g, Rule.majority(), UpdateScheme(_CLOCK_BLOCKS))
    labels = [(s, v) for v, s in enumerate(CLOCK_LABELS) if s is not None]
    w = Witness("clock", P=3, r=0, initial=np.array(_CLOCK_INIT, dtype=np.uint8),
                maps={"label": labels}, stats={"max_degree": g.max_degree})
    return net, w


def clock_vertex(label: str) -> int:
    return CLOCK_LABELS.index(label)


# ---------------------------------------------------------------------------
# amplification


def amplify(net: Network, k: int) -> tuple[Network, Witness]:
    """Replace every vertex by 2k+1 copies; copies of adjacent vertices are fully joined."""
    if k < 0:
        raise CompileError("k must be non-negative")
    even = [v for v in range(net.n) if net.graph.degree(v) % 2 == 0]
    if even:
        raise CompileError(f"vertex {even[0]} has even degree {net.graph.degree(even[0])}; amplification needs odd degrees")
    c = 2 * k + 1
    edges = [(u * c + i, v * c + j) for u, v in net.graph.edges() for i in range(c) for j in range(c)]
    g = Graph.from_edges(net.n * c, edges)
    block = tuple(net.scheme.block_of[v] for v in range(net.n) for _ in range(c))
    clocks = None if net.rule.clocks is None else tuple(net.rule.clocks[v] for v in range(net.n) for _ in range(c))
    out = Network(g, Rule(net.rule.threshold, clocks), UpdateScheme(block))
    phi = [(v * c + i, v) for v in range(net.n) for i in range(c)]
    w = Witness("amplify", P=1, r=0,
                lift=[(v, x, False) for x, v in phi], observe=[(v, x) for x, v in phi],
                initial=np.zeros(out.n, dtype=np.uint8), maps={"phi": phi},
                stats={"copies": c, "max_degree": g.max_degree})
    w.validate(out.n)
    return out, w


# ---------------------------------------------------------------------------
# clocked cylinder

_BOTTOM, _MIDDLE, _TOP, _CIRCUIT, _ALWAYS = "00U", "0U0", "00U", "U00", "111"


def compile_circuit_to_clocked(C: Circuit, x=None, max_degree: int | None = 7) -> tuple[Network, Witness]:
    """Clocked sequential network that applies C once every three steps.

    Layout per coordinate i: a bottom vertex, a middle vertex, the circuit's
    output gate, and a top vertex that is also circuit input i; bottom,
    middle and top each carry an always-active companion, and top_i is
    joined back to bottom_i.  Update order: bottom row, middle row, circuit
    in topological order (output gates last among gates), auxiliaries, top
    row.  Starting with x on the top and bottom rows and everything else
    inactive, the rows hold C(x) again after three steps.
    """
    if not C.is_iterable:
        raise CompileError("clocked cylinder needs an iterable circuit")
    if not C.is_monotone:
        raise CompileError("clocked cylinder needs a monotone circuit")
    n = C.n
    x = np.zeros(n, dtype=np.uint8) if x is None else as_config(x, n)
    P = prepare_for_gadgets(C)
    nb = _NetBuilder()
    bottom, middle, top, companions = [], [], [], []
    for i in range(n):
        bottom.append(nb.vertex(int(x[i]), _BOTTOM, f"bottom:{i}"))
    for i in range(n):
        middle.append(nb.vertex(0, _MIDDLE, f"middle:{i}"))
    for i in range(n):
        top.append(nb.vertex(int(x[i]), _TOP, f"top:{i}"))
    for row in (bottom, middle, top):
        for v in row:
            a = nb.vertex(1, _ALWAYS, "always")
            nb.edge(v, a)
            companions.append(a)
    extra = {o: 1 for o in P.outputs}
    vid, aux = _embed_circuit(nb, P, top, extra, gate_clock=_CIRCUIT, const_clocks=True)
    outs = [vid[o] for o in P.outputs]
    for i in range(n):
        nb.edge(top[i], bottom[i])
        nb.edge(bottom[i], middle[i])
        nb.edge(middle[i], outs[i])
    gates = [vid[g] for g, gate in enumerate(P.gates) if gate.kind != INPUT]
    out_set = set(outs)
    gates = [v for v in gates if v not in out_set] + [v for v in gates if v in out_set]
    # output gates may feed other gates in a general circuit; keep topological order then
    if any(set(P.consumers[o]) for o in P.outputs):
        gates = [vid[g] for g, gate in enumerate(P.gates) if gate.kind != INPUT]
    order = bottom + middle + gates + companions + aux + top
    net = Network(nb.graph(), Rule.majority(nb.clock), UpdateScheme.sequential(order))
    if max_degree is not None and net.graph.max_degree > max_degree:
        raise CompileError(f"clocked network has degree {net.graph.max_degree} > {max_degree}")
    w = Witness(
        "clocked", P=3, r=0,
        lift=[(i, top[i], False) for i in range(n)] + [(i, bottom[i], False) for i in range(n)],
        observe=[(i, top[i]) for i in range(n)],
        initial=np.array(nb.init, dtype=np.uint8),
        maps={"top": list(enumerate(top)), "bottom": list(enumerate(bottom)), "middle": list(enumerate(middle)),
              "output_gate": list(enumerate(outs))},
        stats={"clocked_vertices": net.n, "clocked_max_degree": net.graph.max_degree,
               "circuit_blocks": len(gates), "quiet_off_phase": True},
    )
    w.initial[top] = 0
    w.initial[bottom] = 0
    w.validate(net.n)
    return net, w


# ---------------------------------------------------------------------------
# clocked -> plain majority


def compile_clocked_to_majority(clocked: Network) -> tuple[Network, Witness]:
    """Replace every clock word by attached copies of an amplified clock gadget.

    Vertex v with clock word c and degree d_v gets its own
    max(1, ceil(d_v/2))-amplified clock; d_v + 1 copies of the clock vertex
    labelled c with U->0, and d_v + 1 of the one with U->1 (once if equal),
    are joined to v.  Clocks are updated after the original vertices, one
    clock at a time.
    """
    if not clocked.scheme.is_sequential:
        raise CompileError("compile_clocked_to_majority expects a sequential scheme")
    if not clocked.rule.is_majority:
        raise CompileError("compile_clocked_to_majority expects the majority rule")
    base = clocked.graph
    clock_net, clock_w = build_clock()
    n0 = base.n
    edges = list(base.edges())
    blocks = list(clocked.scheme.block_of)
    next_block = clocked.scheme.num_blocks + 1
    init = [0] * n0
    total = n0
    attached = []
    clock_degree = 0
    clock_block_sizes = []
    for v in range(n0):
        word = clocked.rule.clock(v)
        if word == "UUU":
            continue
        dv = base.degree(v)
        k = max(1, ceil(dv / 2))
        c = 2 * k + 1
        amp, _ = amplify(clock_net, k)
        offset = total
        total += amp.n
        edges.extend((offset + a, offset + b) for a, b in amp.graph.edges())
        blocks.extend(next_block + (b - 1) for b in amp.scheme.block_of)
        clock_block_sizes.extend(len(bl) for bl in amp.scheme.blocks())
        next_block += amp.scheme.num_blocks
        init.extend(int(clock_w.initial[i // c]) for i in range(amp.n))
        low, high = word.replace("U", "0"), word.replace("U", "1")
        targets = [low] if low == high else [low, high]
        for label in targets:
            base_vertex = clock_vertex(label)
            for i in range(dv + 1):
                copy = offset + base_vertex * c + i
                edges.append((v, copy))
                attached.append((v, copy))
    g = Graph.from_edges(total, edges)
    scheme = UpdateScheme(tuple(blocks))
    net = Network(g, Rule.majority(), scheme)
    orig_deg = max((g.degree(v) for v in range(n0)), default=0)
    clock_degree = max((g.degree(v) for v in range(n0, total)), default=0)
    w = Witness(
        "clock-attach", P=1, r=0,
        lift=[(v, v, False) for v in range(n0)], observe=[(v, v) for v in range(n0)],
        initial=np.array(init, dtype=np.uint8),
        maps={"attached": attached},
        stats={
            "vertices": total,
            "max_degree": g.max_degree,
            "max_degree_original": orig_deg,
            "max_degree_clock": clock_degree,
            "degree_bound_3d+2": 3 * base.max_degree + 2,
            "max_block_size": max(len(b) for b in scheme.blocks()) if total else 0,
            "max_clock_block_size": max(clock_block_sizes, default=0),
            "blocks": scheme.num_blocks,
        },
    )
    w.validate(total)
    return net, w


# ---------------------------------------------------------------------------
# whole pipeline


def compile_bseq_instance(C: Circuit, x, i: int) -> tuple[Network, np.ndarray, int, Witness]:
    """Iterated circuit reachability instance -> one-vertex majority prediction instance.

    Returns (network, initial configuration, target vertex, witness).  The
    target is ever active iff some C^t(x)_i = 1.
    """
    x = np.asarray(x, dtype=np.uint8)
    if not C.is_iterable:
        raise CompileError("compile_bseq_instance needs an iterable circuit")
    if x[i]:
        raise CompileError("target coordinate must start inactive")
    n = C.n
    M, rails = monotonize(C, iterable=True)
    w_mono = Witness("monotone", P=1,
                     lift=[(j, j, False) for j in range(n)] + [(j, n + j, True) for j in range(n)],
                     observe=[(j, j) for j in range(n)], initial=np.zeros(2 * n, dtype=np.uint8),
                     target=i)
    B = bound_degree(M)
    L = synchronize(B)
    w_sync = _identity_witness("synchronize", 2 * n, L.width)
    F, emb = flatten_depth1(L)
    w_flat = _identity_witness("flatten", L.width, L.width * L.depth, P=emb.dilation)
    clocked, w_clk = compile_circuit_to_clocked(F)
    net, w_maj = compile_clocked_to_majority(clocked)
    w = w_mono
    for nxt in (w_sync, w_flat, w_clk, w_maj):
        w = compose(w, nxt)
    w.kind = "bseq"
    w.stats.update({
        "monotone_gates": M.size, "bounded_gates": B.size, "sync_depth": L.depth, "sync_width": L.width,
        "flat_coordinates": F.n, "P": w.P,
    })
    w.notes.append("coordinate i is observed on the top row every 3*D steps; intermediate steps keep it inactive")
    w.validate(net.n)
    cfg = w.lift_state(x)
    return net, cfg, w.target, w


# ---------------------------------------------------------------------------
# section-4 gadgets


def _require_plain(net: Network) -> None:
    if net.rule.is_clocked:
        raise CompileError("gadget expects an unclocked network")
    if not net.rule.is_majority:
        raise CompileError("gadget expects the majority rule")


def attach_eventual_gadget(net: Network, v: int) -> tuple[Network, Witness]:
    """Add a latch that turns active once v does and stays active.

    The latch output (``witness.target``) is one of two new inactive
    vertices; four new always-active vertices hold it.  New vertices form a
    final block of their own.
    """
    _require_plain(net)
    if not 0 <= v < net.n:
        raise CompileError(f"no vertex {v}")
    n0 = net.n
    b, c, d, e, f, g = range(n0, n0 + 6)
    new_edges = [(v, b), (v, c), (v, f), (v, g), (e, f), (e, g), (e, b), (e, c), (e, d), (c, b), (c, d), (g, f)]
    graph = Graph.from_edges(n0 + 6, list(net.graph.edges()) + new_edges)
    scheme = UpdateScheme(net.scheme.block_of + (net.scheme.num_blocks + 1,) * 6)
    out = Network(graph, Rule.majority(), scheme)
    initial = np.zeros(n0 + 6, dtype=np.uint8)
    initial[[b, c, d, e]] = 1
    w = Witness("eventual", lift=[(u, u, False) for u in range(n0)], observe=[(u, u) for u in range(n0)],
                initial=initial, target=f, maps={"latch": [(v, f), (v, g)], "holders": [(0, b), (1, c), (2, d), (3, e)]})
    w.validate(out.n)
    return out, w


def build_full_instance(net: Network, d: int, v: int) -> tuple[Network, Witness]:
    """Network that reaches all-active iff v is ever active in ``net``.

    Per original vertex v_i: an inactive clique of size d and an active one
    of size 3d-1, wired so that activation of v ripples around the ring of
    inactive cliques.
    """
    _require_plain(net)
    if d < 3 or d % 2 == 0:
        raise CompileError("d must be odd and at least 3")
    if net.graph.max_degree > d:
        raise CompileError(f"network degree {net.graph.max_degree} exceeds d = {d}")
    if net.n < 3:
        raise CompileError("the clique ring needs at least three vertices")
    if not 0 <= v < net.n:
        raise CompileError(f"no vertex {v}")
    n0 = net.n
    order = [v] + [u for u in range(n0) if u != v]
    k = len(order)
    edges = list(net.graph.edges())
    total = n0
    K0, K1 = [], []
    for _ in range(k):
        K0.append(list(range(total, total + d)))
        total += d
        K1.append(list(range(total, total + 3 * d - 1)))
        total += 3 * d - 1
    for idx, vi in enumerate(order):
        for clique in (K0[idx], K1[idx]):
            edges.extend(itertools.combinations(clique, 2))
        nxt = K0[(idx + 1) % k]
        partners = K1[idx] if idx == 0 else K1[idx][:2 * d]
        for a in K0[idx]:
            edges.append((a, vi))
            edges.extend((a, b) for b in nxt)
            edges.extend((a, b) for b in partners)
        edges.extend((b, vi) for b in K1[idx][:d])
    graph = Graph.from_edges(total, edges)
    B = net.scheme.num_blocks
    scheme = UpdateScheme(net.scheme.block_of + tuple(B + 1 + j for j in range(total - n0)))
    out = Network(graph, Rule.majority(), scheme)
    initial = np.zeros(total, dtype=np.uint8)
    for clique in K1:
        initial[clique] = 1
    w = Witness("full", lift=[(u, u, False) for u in range(n0)], observe=[(u, u) for u in range(n0)],
                initial=initial, maps={"order": list(enumerate(order))},
                notes=["all-active is reachable iff the special vertex is ever active in the source"],
                stats={"vertices": total, "max_degree": graph.max_degree})
    w.validate(out.n)
    return out, w


# ---------------------------------------------------------------------------
# moving the threshold


def _floor_mul(p: Fraction, k: int) -> int:
    return (p.numerator * k) // p.denominator


def padding_count(p: Fraction, degree: int) -> int:
    """Smallest n >= 0 equating the portion-p threshold on degree+n neighbors with majority."""
    half = degree // 2
    for n in itertools.count():
        if p < Fraction(1, 2):
            if _floor_mul(p, degree + n) == half:
                return n
        elif _floor_mul(p, degree + n) - n == half:
            return n
        if n > 4 * (degree + 2) * p.denominator:
            raise AssertionError("padding search diverged")


def to_portion(net: Network, p: Fraction | str) -> tuple[Network, Witness]:
    """Portion-p network whose original vertices follow the majority dynamics of ``net``.

    Each vertex w gets a clique of constant vertices (inactive for p < 1/2,
    active for p > 1/2), n(w) of which are joined to w.
    """
    p = Fraction(p)
    if not 0 < p < 1:
        raise CompileError("p must lie in (0, 1)")
    if p == Fraction(1, 2):
        raise CompileError("p = 1/2 is the majority rule itself")
    _require_plain(net)
    low = p < Fraction(1, 2)
    n0 = net.n
    edges = list(net.graph.edges())
    total = n0
    min_clique = (ceil(1 / p) if low else ceil(1 / (1 - p))) + 1
    pads = []
    cliques = []
    for w_ in range(n0):
        nw = padding_count(p, net.graph.degree(w_))
        size = max(nw, min_clique)
        clique = list(range(total, total + size))
        total += size
        edges.extend(itertools.combinations(clique, 2))
        edges.extend((w_, c) for c in clique[:nw])
        pads.append((w_, nw))
        cliques.append(clique)
    graph = Graph.from_edges(total, edges)
    scheme = UpdateScheme(net.scheme.block_of + (net.scheme.num_blocks + 1,) * (total - n0))
    out = Network(graph, Rule.portion(p), scheme)
    initial = np.zeros(total, dtype=np.uint8)
    if not low:
        initial[n0:] = 1
    w = Witness("portion", lift=[(u, u, False) for u in range(n0)], observe=[(u, u) for u in range(n0)],
                initial=initial, maps={"padding": pads},
                stats={"p": str(p), "vertices": total, "max_degree": graph.max_degree})
    w.validate(out.n)
    return out, w
