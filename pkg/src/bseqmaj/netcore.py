"""Majority / portion-p automata networks under block-sequential updating.

Configurations are numpy ``uint8`` vectors (one state per vertex).  They are
bit-packed with :func:`pack_config` whenever they are stored or hashed, e.g.
in the visited set of :func:`find_limit_cycle`.

A global step applies the blocks of the scheme in increasing order; inside a
block every vertex reads the configuration as it was before the block.  The
engine compiles the block order into *stages*: consecutive blocks that do not
read each other's fresh values are merged, which leaves the map unchanged but
turns thousands of singleton blocks into a handful of sparse mat-vecs.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

DEFAULT_STEP_BUDGET = 2**22
DEFAULT_EXHAUSTIVE_BOUND = 20
CLOCK_SYMBOLS = frozenset("U01")


class NetworkError(ValueError):
    """Malformed graph, scheme, rule or configuration."""


class BudgetExceeded(RuntimeError):
    """A caller-supplied resource budget ran out before an answer was found."""


# ---------------------------------------------------------------------------
# data model


@dataclass(frozen=True)
class Graph:
    n: int
    adjacency: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if len(self.adjacency) != self.n:
            raise NetworkError(f"adjacency has {len(self.adjacency)} rows, expected {self.n}")
        for v, nbrs in enumerate(self.adjacency):
            if list(nbrs) != sorted(set(nbrs)):
                raise NetworkError(f"neighbors of {v} must be sorted and duplicate-free")
            for u in nbrs:
                if not 0 <= u < self.n:
                    raise NetworkError(f"vertex {v} has out-of-range neighbor {u}")
                if u == v:
                    raise NetworkError(f"self-loop at vertex {v}")
        # symmetry
        for v, nbrs in enumerate(self.adjacency):
            for u in nbrs:
                if v not in self._neighbor_sets[u]:
                    raise NetworkError(f"edge {v}-{u} is not symmetric")

    @cached_property
    def _neighbor_sets(self) -> list[frozenset]:
        return [frozenset(a) for a in self.adjacency]

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]], allow_duplicates: bool = False) -> "Graph":
        adj: list[set[int]] = [set() for _ in range(n)]
        for u, v in edges:
            if not (0 <= u < n and 0 <= v < n):
                raise NetworkError(f"edge {u}-{v} out of range for {n} vertices")
            if u == v:
                raise NetworkError(f"self-loop at vertex {u}")
            if v in adj[u] and not allow_duplicates:
                raise NetworkError(f"duplicate edge {u}-{v}")
            adj[u].add(v)
            adj[v].add(u)
        return cls(n, tuple(tuple(sorted(a)) for a in adj))

    def neighbors(self, v: int) -> tuple[int, ...]:
        return self.adjacency[v]

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.array([len(a) for a in self.adjacency], dtype=np.int64)

    @property
    def max_degree(self) -> int:
        return int(self.degrees.max()) if self.n else 0

    def edges(self) -> list[tuple[int, int]]:
        return [(u, v) for u, nbrs in enumerate(self.adjacency) for v in nbrs if u < v]

    def has_edge(self, u: int, v: int) -> bool:
        return v in self._neighbor_sets[u]

    @cached_property
    def csr(self) -> sp.csr_matrix:
        indptr = np.zeros(self.n + 1, dtype=np.int64)
        indptr[1:] = np.cumsum(self.degrees)
        indices = np.fromiter((u for nbrs in self.adjacency for u in nbrs), dtype=np.int64, count=int(indptr[-1]))
        data = np.ones(len(indices), dtype=np.int32)
        return sp.csr_matrix((data, indices, indptr), shape=(self.n, self.n))

    def is_connected(self) -> bool:
        if self.n == 0:
            return True
        k, _ = connected_components(self.csr, directed=False)
        return k == 1


@dataclass(frozen=True)
class UpdateScheme:
    """Block index (1-based, contiguous) for every vertex."""

    block_of: tuple[int, ...]

    def __post_init__(self):
        used = set(self.block_of)
        if used and used != set(range(1, max(used) + 1)):
            raise NetworkError("block indices must be contiguous 1..B")

    @property
    def n(self) -> int:
        return len(self.block_of)

    @property
    def num_blocks(self) -> int:
        return max(self.block_of, default=0)

    @property
    def is_synchronous(self) -> bool:
        return self.num_blocks <= 1

    @property
    def is_sequential(self) -> bool:
        return self.num_blocks == self.n

    def blocks(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.num_blocks)]
        for v, b in enumerate(self.block_of):
            out[b - 1].append(v)
        return out

    @classmethod
    def synchronous(cls, n: int) -> "UpdateScheme":
        return cls((1,) * n)

    @classmethod
    def sequential(cls, order: Sequence[int]) -> "UpdateScheme":
        """Vertices updated one at a time in the given order."""
        block = [0] * len(order)
        for k, v in enumerate(order):
            block[v] = k + 1
        return cls(tuple(block))

    @classmethod
    def from_blocks(cls, n: int, blocks: Sequence[Iterable[int]]) -> "UpdateScheme":
        raw = {}
        for k, members in enumerate(blocks):
            for v in members:
                if v in raw:
                    raise NetworkError(f"vertex {v} appears in two blocks")
                raw[v] = k + 1
        return normalize_scheme(raw, n)


def normalize_scheme(raw: Mapping[int, int] | Sequence[int], n: int | None = None) -> UpdateScheme:
    """Order-preserving compaction of arbitrary positive block labels to 1..B."""
    if isinstance(raw, Mapping):
        n = len(raw) if n is None else n
        missing = [v for v in range(n) if v not in raw]
        if missing:
            raise NetworkError(f"no block assigned to vertex {missing[0]}")
        values = [raw[v] for v in range(n)]
    else:
        values = list(raw)
        if n is not None and len(values) != n:
            raise NetworkError(f"scheme covers {len(values)} vertices, expected {n}")
    if any(int(x) < 1 for x in values):
        raise NetworkError("block labels must be positive integers")
    rank = {val: k + 1 for k, val in enumerate(sorted(set(values)))}
    return UpdateScheme(tuple(rank[val] for val in values))


@dataclass(frozen=True)
class Rule:
    """Activation threshold ``a/b`` plus optional per-vertex clock words.

    A vertex activates iff ``b * (active neighbors) > a * degree``; ties stay
    inactive.  Majority is the threshold 1/2.
    """

    threshold: Fraction = Fraction(1, 2)
    clocks: tuple[str, ...] | None = None

    def __post_init__(self):
        t = Fraction(self.threshold)
        object.__setattr__(self, "threshold", t)
        if not 0 < t < 1:
            raise NetworkError(f"threshold {t} outside (0, 1)")
        if self.clocks is not None:
            for w in self.clocks:
                if len(w) != 3 or not set(w) <= CLOCK_SYMBOLS:
                    raise NetworkError(f"bad clock word {w!r}")

    @classmethod
    def majority(cls, clocks: Sequence[str] | None = None) -> "Rule":
        return cls(Fraction(1, 2), None if clocks is None else tuple(clocks))

    @classmethod
    def portion(cls, p: Fraction | str, clocks: Sequence[str] | None = None) -> "Rule":
        return cls(Fraction(p), None if clocks is None else tuple(clocks))

    @property
    def is_majority(self) -> bool:
        return self.threshold == Fraction(1, 2)

    @property
    def is_clocked(self) -> bool:
        return self.clocks is not None and any(w != "UUU" for w in self.clocks)

    def clock(self, v: int) -> str:
        return "UUU" if self.clocks is None else self.clocks[v]


@dataclass(frozen=True)
class Network:
    graph: Graph
    rule: Rule = field(default_factory=Rule)
    scheme: UpdateScheme | None = None

    def __post_init__(self):
        if self.scheme is None:
            object.__setattr__(self, "scheme", UpdateScheme.synchronous(self.graph.n))
        if self.scheme.n != self.graph.n:
            raise NetworkError(f"scheme covers {self.scheme.n} vertices, graph has {self.graph.n}")
        if self.rule.clocks is not None and len(self.rule.clocks) != self.graph.n:
            raise NetworkError("clock words must cover every vertex")

    @property
    def n(self) -> int:
        return self.graph.n

    @cached_property
    def _engine(self) -> "_Engine":
        return _Engine(self)

    def with_scheme(self, scheme: UpdateScheme) -> "Network":
        return Network(self.graph, self.rule, scheme)

    def with_rule(self, rule: Rule) -> "Network":
        return Network(self.graph, rule, self.scheme)


@dataclass
class CycleReport:
    transient: int
    period: int
    cycle_configs: list[np.ndarray]
    start_phase: int = 0

    @property
    def steps(self) -> int:
        return self.transient + self.period


# ---------------------------------------------------------------------------
# configurations


def as_config(cfg, n: int | None = None) -> np.ndarray:
    if isinstance(cfg, str):
        cfg = [int(c) for c in cfg]
    x = np.asarray(cfg, dtype=np.uint8)
    if x.ndim != 1:
        raise NetworkError("configuration must be one-dimensional")
    if n is not None and len(x) != n:
        raise NetworkError(f"configuration has length {len(x)}, network has {n} vertices")
    if x.size and x.max() > 1:
        raise NetworkError("configuration entries must be 0 or 1")
    return x


def pack_config(cfg: np.ndarray) -> bytes:
    return np.packbits(cfg.astype(np.uint8, copy=False)).tobytes()


def unpack_config(data: bytes, n: int) -> np.ndarray:
    return np.unpackbits(np.frombuffer(data, dtype=np.uint8), count=n)


def config_str(cfg: np.ndarray) -> str:
    return "".join("1" if b else "0" for b in cfg)


# ---------------------------------------------------------------------------
# single-vertex rule (reference semantics)


def local_rule(net: Network, cfg: np.ndarray, v: int, phase: int = 0) -> int:
    """New state of ``v`` read from ``cfg`` at step phase ``phase`` (t mod 3)."""
    sym = net.rule.clock(v)[phase % 3]
    if sym != "U":
        return int(sym)
    nbrs = net.graph.adjacency[v]
    active = sum(int(cfg[u]) for u in nbrs)
    t = net.rule.threshold
    return int(t.denominator * active > t.numerator * len(nbrs))


def global_step_reference(net: Network, cfg: np.ndarray, phase: int = 0) -> np.ndarray:
    """Block-by-block application of :func:`local_rule`; slow, used as an oracle."""
    x = np.array(cfg, dtype=np.uint8)
    for block in net.scheme.blocks():
        new = [local_rule(net, x, v, phase) for v in block]
        x[block] = new
    return x


# ---------------------------------------------------------------------------
# staged engine


def stage_levels(graph: Graph, scheme: UpdateScheme) -> np.ndarray:
    """Earliest stage at which each vertex can be updated.

    A vertex must run after every neighbor from an earlier block and together
    with its neighbors from its own block.  Non-adjacent vertices commute, so
    any assignment obeying those two constraints reproduces the block order.
    """
    n = graph.n
    level = np.zeros(n, dtype=np.int64)
    if n == 0:
        return level
    block = np.asarray(scheme.block_of, dtype=np.int64)
    A = graph.csr.tocoo()
    same = block[A.row] == block[A.col]
    inner = sp.csr_matrix((np.ones(int(same.sum())), (A.row[same], A.col[same])), shape=(n, n))
    _, comp = connected_components(inner, directed=False)
    indptr, indices = graph.csr.indptr, graph.csr.indices
    order = np.argsort(block, kind="stable")
    bounds = np.searchsorted(block[order], np.arange(1, scheme.num_blocks + 2))
    for b in range(scheme.num_blocks):
        verts = order[bounds[b]:bounds[b + 1]]
        starts, ends = indptr[verts], indptr[verts + 1]
        lens = ends - starts
        best = np.zeros(len(verts), dtype=np.int64)
        nz = lens > 0
        if nz.any():
            idx = np.concatenate([indices[s:e] for s, e in zip(starts[nz], ends[nz])])
            best[nz] = np.maximum.reduceat(level[idx], np.concatenate([[0], np.cumsum(lens[nz])[:-1]]))
        labels, inv = np.unique(comp[verts], return_inverse=True)
        comp_best = np.zeros(len(labels), dtype=np.int64)
        np.maximum.at(comp_best, inv, best)
        level[verts] = comp_best[inv] + 1
    return level


class _Engine:
    def __init__(self, net: Network):
        g = net.graph
        t = net.rule.threshold
        self.num = t.numerator
        self.den = t.denominator
        levels = stage_levels(g, net.scheme)
        csr = g.csr
        self.stages = []
        clocks = net.rule.clocks if net.rule.is_clocked else None
        for lvl in range(1, int(levels.max(initial=0)) + 1):
            idx = np.flatnonzero(levels == lvl)
            if len(idx) == 0:
                continue
            sub = csr[idx]
            rhs = self.num * g.degrees[idx]
            forced = None
            if clocks is not None:
                forced = []
                for ph in range(3):
                    syms = np.array([clocks[v][ph] for v in idx])
                    mask = syms != "U"
                    forced.append((mask, (syms == "1").astype(np.int32)) if mask.any() else None)
            self.stages.append((idx, sub, rhs, forced))

    def step(self, x: np.ndarray, phase: int) -> np.ndarray:
        """``x`` is int32 of shape (n,) or (n, batch); returns a new array."""
        y = x.copy()
        for idx, sub, rhs, forced in self.stages:
            counts = sub @ y
            if y.ndim == 1:
                new = (self.den * counts > rhs).astype(np.int32)
            else:
                new = (self.den * counts > rhs[:, None]).astype(np.int32)
            if forced is not None and forced[phase % 3] is not None:
                mask, val = forced[phase % 3]
                if y.ndim == 1:
                    new = np.where(mask, val, new)
                else:
                    new = np.where(mask[:, None], val[:, None], new)
            y[idx] = new
        return y


def global_step(net: Network, cfg: np.ndarray, phase: int = 0) -> np.ndarray:
    """One full sweep F_S; ``phase`` is the step index t mod 3 for clocked vertices."""
    x = as_config(cfg, net.n).astype(np.int32)
    return net._engine.step(x, phase).astype(np.uint8)


def global_step_batch(net: Network, configs: np.ndarray, phase: int = 0) -> np.ndarray:
    """Apply F_S to every row of ``configs`` (shape (batch, n))."""
    X = np.asarray(configs, dtype=np.int32).T.copy()
    return net._engine.step(X, phase).T.astype(np.uint8)


def trajectory(net: Network, cfg, max_steps: int, start: int = 0) -> list[np.ndarray]:
    if max_steps < 0:
        raise ValueError("max_steps must be non-negative")
    x = as_config(cfg, net.n).astype(np.int32)
    eng = net._engine
    out = [x.astype(np.uint8)]
    for t in range(start, start + max_steps):
        x = eng.step(x, t)
        out.append(x.astype(np.uint8))
    return out


def iter_trajectory(net: Network, cfg, start: int = 0):
    """Endless generator of (t, configuration)."""
    x = as_config(cfg, net.n).astype(np.int32)
    eng = net._engine
    t = start
    while True:
        yield t, x.astype(np.uint8)
        x = eng.step(x, t)
        t += 1


def _state_key(x: np.ndarray, t: int, clocked: bool) -> bytes:
    key = pack_config(x)
    return key + bytes([t % 3]) if clocked else key


def find_limit_cycle(net: Network, cfg, budget: int = DEFAULT_STEP_BUDGET, start: int = 0) -> CycleReport:
    """Visited-set cycle detection.

    For clocked networks the state is the pair (configuration, t mod 3).
    """
    clocked = net.rule.is_clocked
    seen: dict[bytes, int] = {}
    history: list[np.ndarray] = []
    for t, x in iter_trajectory(net, cfg, start):
        key = _state_key(x, t, clocked)
        first = seen.get(key)
        if first is not None:
            tau = first - start
            return CycleReport(tau, t - first, history[tau:], start_phase=first % 3)
        if len(seen) >= budget:
            raise BudgetExceeded(f"no repeat within {budget} stored configurations")
        seen[key] = t
        history.append(x)
    raise AssertionError("unreachable")


# ---------------------------------------------------------------------------
# exhaustive analysis


def _index_to_configs(idx: np.ndarray, n: int) -> np.ndarray:
    return ((idx[:, None] >> np.arange(n, dtype=np.int64)) & 1).astype(np.uint8)


def _configs_to_index(X: np.ndarray) -> np.ndarray:
    n = X.shape[1]
    return (X.astype(np.int64) << np.arange(n, dtype=np.int64)).sum(axis=1)


def successor_table(net: Network, chunk: int = 1 << 14) -> np.ndarray:
    """Functional graph of F_S on all 2^n configurations (indexed by bit v = vertex v).

    Clocked networks get the phase-augmented graph on nodes ``phase * 2^n + index``.
    """
    n = net.n
    size = 1 << n
    phases = 3 if net.rule.is_clocked else 1
    succ = np.empty(phases * size, dtype=np.int64)
    for ph in range(phases):
        for lo in range(0, size, chunk):
            idx = np.arange(lo, min(size, lo + chunk), dtype=np.int64)
            Y = global_step_batch(net, _index_to_configs(idx, n), ph)
            succ[ph * size + idx] = ((ph + 1) % phases) * size + _configs_to_index(Y)
    return succ


def transients_from_successors(succ: np.ndarray) -> np.ndarray:
    """Distance of every node of a functional graph to its cycle (peeling in-degree-0 layers)."""
    m = len(succ)
    indeg = np.bincount(succ, minlength=m)
    alive = np.ones(m, dtype=bool)
    layers = []
    frontier = np.flatnonzero(indeg == 0)
    while len(frontier):
        layers.append(frontier)
        alive[frontier] = False
        targets = succ[frontier]
        np.subtract.at(indeg, targets, 1)
        cand = np.unique(targets)
        frontier = cand[(indeg[cand] == 0) & alive[cand]]
    tr = np.zeros(m, dtype=np.int64)
    for layer in reversed(layers):
        tr[layer] = tr[succ[layer]] + 1
    return tr


def transient_length_network(net: Network, bound: int = DEFAULT_EXHAUSTIVE_BOUND) -> int:
    """Max transient over all 2^n initial configurations (started at t = 0)."""
    if net.n > bound:
        raise BudgetExceeded(f"{net.n} vertices exceeds exhaustive bound {bound}")
    tr = transients_from_successors(successor_table(net))
    return int(tr[: 1 << net.n].max())


def map_batch(func, items: Sequence, workers: int | None = None) -> list:
    """Order-preserving map, optionally on a thread pool; results never depend on scheduling."""
    if not workers or workers <= 1:
        return [func(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))
