"""Seeded random instances for tests, the acceptance suite and ``verify``."""

from __future__ import annotations

import random

import numpy as np

from .circuits import AND, NOT, OR, Circuit, CircuitBuilder, TuringMachine
from .netcore import Graph, Network, Rule, UpdateScheme, normalize_scheme


def random_circuit(rng: random.Random, n: int, gates: int, m: int | None = None, monotone: bool = False,
                   max_fanin: int = 3, max_degree: int | None = None) -> Circuit:
    """Random circuit; with ``max_degree`` gates keep in-degree + consumers + output references <= max_degree
    whenever the random choices allow it."""
    m = n if m is None else m
    b = CircuitBuilder()
    for _ in range(n):
        b.input()
    out_deg = [0] * n
    in_deg = [0] * n
    kinds = [AND, OR] if monotone else [AND, OR, NOT]
    for _ in range(gates):
        kind = rng.choice(kinds)
        k = 1 if kind == NOT else rng.randint(1, max_fanin)
        pool = list(range(len(b.gates)))
        if max_degree is not None:
            pool = [g for g in pool if in_deg[g] + out_deg[g] < max_degree]
            k = min(k, max_degree - 1)
        if not pool:
            break
        srcs = rng.sample(pool, min(k, len(pool)))
        g = b.add(kind, *srcs)
        in_deg.append(len(srcs))
        out_deg.append(0)
        for s in srcs:
            out_deg[s] += 1
    outputs = []
    for _ in range(m):
        pool = range(len(b.gates))
        if max_degree is not None:
            # output references count toward the out-degree
            pool = [g for g in pool if in_deg[g] + out_deg[g] < max_degree] or list(pool)
        g = rng.choice(list(pool))
        out_deg[g] += 1
        outputs.append(g)
    return b.build(outputs)


def random_depth1_circuit(rng: random.Random, n: int, monotone: bool = True, max_in: int = 2,
                          max_out: int = 2) -> Circuit:
    """Iterable depth-1 circuit: n inputs, n output gates, in/out-degree bounded."""
    b = CircuitBuilder()
    ins = [b.input() for _ in range(n)]
    out_deg = [0] * n
    outs = []
    for _ in range(n):
        pool = [i for i in range(n) if out_deg[i] < max_out]
        if not pool:
            pool = [min(range(n), key=lambda i: out_deg[i])]
        k = min(rng.randint(1, max_in), len(pool))
        srcs = rng.sample(pool, k)
        for s in srcs:
            out_deg[s] += 1
        outs.append(b.add(rng.choice([AND, OR]), *(ins[s] for s in srcs)))
    return b.build(outs)


def random_graph(rng: random.Random, n: int, p: float = 0.3, connected: bool = False,
                 max_degree: int | None = None) -> Graph:
    while True:
        edges = []
        deg = [0] * n
        pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
        rng.shuffle(pairs)
        for u, v in pairs:
            if rng.random() < p and (max_degree is None or (deg[u] < max_degree and deg[v] < max_degree)):
                edges.append((u, v))
                deg[u] += 1
                deg[v] += 1
        g = Graph.from_edges(n, edges)
        if not connected or g.is_connected():
            return g


def random_odd_degree_graph(rng: random.Random, n: int, max_degree: int = 3) -> Graph:
    """Graph in which every vertex has odd degree (n must be even)."""
    if n % 2:
        raise ValueError("odd-degree graphs need an even vertex count")
    while True:
        g = random_graph(rng, n, p=0.4, max_degree=max_degree)
        edges = set(g.edges())
        even = [v for v in range(n) if g.degree(v) % 2 == 0]
        rng.shuffle(even)
        # toggling the edge between two even-degree vertices makes both odd
        while even:
            u = even.pop()
            v = even.pop()
            e = (min(u, v), max(u, v))
            if e in edges:
                edges.remove(e)
            else:
                edges.add(e)
        g2 = Graph.from_edges(n, sorted(edges))
        if all(g2.degree(v) % 2 == 1 for v in range(n)) and g2.max_degree <= max_degree + 1:
            return g2


def random_scheme(rng: random.Random, n: int, blocks: int | None = None) -> UpdateScheme:
    if blocks is None:
        blocks = rng.randint(1, max(1, n))
    return normalize_scheme([rng.randint(1, blocks) for _ in range(n)])


def random_network(rng: random.Random, n: int, p: float = 0.35, connected: bool = False, blocks: int | None = None,
                   rule: Rule | None = None, max_degree: int | None = None) -> Network:
    g = random_graph(rng, n, p, connected, max_degree)
    return Network(g, rule or Rule.majority(), random_scheme(rng, n, blocks))


def random_config(rng: random.Random, n: int) -> np.ndarray:
    return np.array([rng.randint(0, 1) for _ in range(n)], dtype=np.uint8)


def random_tm(rng: random.Random, states: int = 3, halting_bias: float = 0.2) -> TuringMachine:
    names = tuple(f"q{i}" for i in range(states - 1)) + ("qf",)
    gamma = ("0", "1", "B")
    delta = {}
    for q in names:
        for a in gamma:
            q2 = "qf" if rng.random() < halting_bias else rng.choice(names)
            delta[(q, a)] = (q2, rng.choice(gamma), rng.choice((-1, 0, 1)))
    return TuringMachine(names, gamma, ("0", "1"), delta, "B", names[0], "qf")
