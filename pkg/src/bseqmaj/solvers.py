"""Prediction problems on majority networks and the witness verification harness."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from .circuits import Circuit, evaluate
from .gadgets import Witness
from .netcore import (
    DEFAULT_STEP_BUDGET, BudgetExceeded, Network, as_config, iter_trajectory, map_batch, pack_config, trajectory,
    unpack_config,
)

ONCE, EVENTUAL, FULL, CONDITIONAL = "once", "eventual", "full", "conditional"
MODES = (ONCE, EVENTUAL, FULL, CONDITIONAL)
DEFAULT_ENUMERATION_BOUND = 20


class InstanceError(ValueError):
    pass


@dataclass
class PredictionInstance:
    network: Network
    x: np.ndarray
    target: int | None = None
    mode: str = ONCE
    fixed: Mapping[int, int] | None = None  # W -> y for the conditional problem

    def __post_init__(self):
        self.x = as_config(self.x, self.network.n)
        if self.mode not in MODES:
            raise InstanceError(f"unknown mode {self.mode!r}")
        if self.mode == FULL:
            return
        v = self.target
        if v is None or not 0 <= v < self.network.n:
            raise InstanceError("target vertex missing or out of range")
        if self.mode == CONDITIONAL:
            fixed = dict(self.fixed or {})
            if v not in fixed or fixed[v] != 0:
                raise InstanceError("conditional target must be fixed to 0")
            if any(not 0 <= u < self.network.n or b not in (0, 1) for u, b in fixed.items()):
                raise InstanceError("bad partial configuration")
        elif self.x[v]:
            raise InstanceError("target must start inactive")

    @property
    def free(self) -> list[int]:
        fixed = self.fixed or {}
        return [u for u in range(self.network.n) if u not in fixed]


@dataclass
class Verdict:
    answer: bool
    time: int | None = None
    transient: int | None = None
    period: int | None = None
    cycle: list[np.ndarray] = field(default_factory=list)
    steps: int = 0
    completion: np.ndarray | None = None

    def line(self) -> str:
        if self.answer:
            return f"YES t={self.time}"
        return f"NO transient={self.transient} period={self.period}"


def _fast_path(net: Network) -> bool:
    return not net.rule.is_clocked and (net.scheme.is_synchronous or net.scheme.is_sequential)


def _scan(net: Network, x: np.ndarray, hit, budget: int) -> Verdict:
    """Run until ``hit(x)`` or a repeated state; NO verdicts carry the limit cycle."""
    if _fast_path(net):
        # period <= 2 under synchronous updating, fixed points under sequential updating
        recent: list[np.ndarray] = []
        for t, y in iter_trajectory(net, x):
            if hit(y):
                return Verdict(True, time=t, steps=t)
            for p, old in enumerate(reversed(recent), start=1):
                if np.array_equal(old, y):
                    cycle = recent[len(recent) - p:]
                    return Verdict(False, transient=t - p, period=p, cycle=cycle, steps=t)
            if t >= budget:
                raise BudgetExceeded(f"no repeat within {budget} steps")
            recent = (recent + [y])[-2:]
    clocked = net.rule.is_clocked
    seen: dict[bytes, int] = {}
    packed: list[bytes] = []
    for t, y in iter_trajectory(net, x):
        if hit(y):
            return Verdict(True, time=t, steps=t)
        key = pack_config(y)
        full_key = key + bytes([t % 3]) if clocked else key
        first = seen.get(full_key)
        if first is not None:
            cycle = [unpack_config(k, net.n) for k in packed[first:]]
            return Verdict(False, transient=first, period=t - first, cycle=cycle, steps=t)
        if len(seen) >= budget:
            raise BudgetExceeded(f"no repeat within {budget} stored configurations")
        seen[full_key] = t
        packed.append(key)
    raise AssertionError("unreachable")


def predict_once(inst: PredictionInstance, budget: int = DEFAULT_STEP_BUDGET) -> Verdict:
    """Is the target ever active along the trajectory?"""
    v = inst.target
    return _scan(inst.network, inst.x, lambda y: bool(y[v]), budget)


def predict_full(inst: PredictionInstance, budget: int = DEFAULT_STEP_BUDGET) -> Verdict:
    """Does the trajectory reach the all-active configuration?"""
    return _scan(inst.network, inst.x, lambda y: bool(y.all()), budget)


def predict_eventual(inst: PredictionInstance, budget: int = DEFAULT_STEP_BUDGET) -> Verdict:
    """Is the target active at every step from some time on?

    YES evidence is the first time from which the target stays active.
    """
    net, v = inst.network, inst.target
    clocked = net.rule.is_clocked
    seen: dict[bytes, int] = {}
    history: list[bytes] = []
    active: list[bool] = []
    for t, y in iter_trajectory(net, inst.x):
        key = pack_config(y)
        full_key = key + bytes([t % 3]) if clocked else key
        first = seen.get(full_key)
        if first is not None:
            cycle = [unpack_config(k, net.n) for k in history[first:]]
            if all(active[first:]):
                t0 = first
                while t0 > 0 and active[t0 - 1]:
                    t0 -= 1
                return Verdict(True, time=t0, transient=first, period=t - first, cycle=cycle, steps=t)
            return Verdict(False, transient=first, period=t - first, cycle=cycle, steps=t)
        if len(seen) >= budget:
            raise BudgetExceeded(f"no repeat within {budget} stored configurations")
        seen[full_key] = t
        history.append(key)
        active.append(bool(y[v]))
    raise AssertionError("unreachable")


def predict_conditional(inst: PredictionInstance, bound: int = DEFAULT_ENUMERATION_BOUND,
                        budget: int = DEFAULT_STEP_BUDGET, workers: int | None = None) -> Verdict:
    """Is there a completion of the partial configuration under which the target activates?

    Completions are enumerated lexicographically over the free vertices
    (first free vertex most significant); the smallest YES index wins.
    """
    fixed = dict(inst.fixed if inst.fixed is not None else {u: int(b) for u, b in enumerate(inst.x)})
    free = [u for u in range(inst.network.n) if u not in fixed]
    if len(free) > bound:
        raise BudgetExceeded(f"{len(free)} free vertices exceeds enumeration bound {bound}")
    base = np.zeros(inst.network.n, dtype=np.uint8)
    for u, b in fixed.items():
        base[u] = b
    f = len(free)

    def completion(idx: int) -> np.ndarray:
        x = base.copy()
        for j, u in enumerate(free):
            x[u] = (idx >> (f - 1 - j)) & 1
        return x

    def run(idx: int) -> Verdict:
        x = completion(idx)
        return predict_once(PredictionInstance(inst.network, x, inst.target), budget)

    last = None
    chunk = max(1, workers or 1)
    for lo in range(0, 1 << f, chunk):
        for idx, verdict in zip(range(lo, min(1 << f, lo + chunk)),
                                map_batch(run, range(lo, min(1 << f, lo + chunk)), workers)):
            verdict.completion = completion(idx)
            if verdict.answer:
                return verdict
            last = verdict
    return last


def solve(inst: PredictionInstance, budget: int = DEFAULT_STEP_BUDGET) -> Verdict:
    if inst.mode == ONCE:
        return predict_once(inst, budget)
    if inst.mode == EVENTUAL:
        return predict_eventual(inst, budget)
    if inst.mode == FULL:
        return predict_full(inst, budget)
    return predict_conditional(inst, budget=budget)


def recheck(inst: PredictionInstance, verdict: Verdict) -> bool:
    """Independently re-simulate a verdict's evidence."""
    net = inst.network
    x = verdict.completion if verdict.completion is not None else inst.x
    mode = ONCE if inst.mode == CONDITIONAL else inst.mode
    v = inst.target

    def good(y):
        return bool(y.all()) if mode == FULL else bool(y[v])

    if verdict.answer and mode != EVENTUAL:
        return good(trajectory(net, x, verdict.time)[-1])
    tr = trajectory(net, x, verdict.transient + verdict.period)
    if not np.array_equal(tr[verdict.transient], tr[-1]):
        return False
    if verdict.period % 3 and net.rule.is_clocked:
        return False
    cyc = tr[verdict.transient:-1]
    if any(not np.array_equal(a, b) for a, b in zip(cyc, verdict.cycle)):
        return False
    if mode == EVENTUAL:
        if not verdict.answer:
            return not all(y[v] for y in cyc)
        return all(y[v] for y in tr[verdict.time:])
    return not any(good(y) for y in tr[:-1])


# ---------------------------------------------------------------------------
# witness verification


@dataclass
class VerifyReport:
    ok: bool
    samples: int
    passed: list[bool]
    checks: int
    divergence: dict[str, Any] | None = None
    stats: dict[str, Any] = field(default_factory=dict)

    def lines(self) -> list[str]:
        out = [f"sample {i}: {'pass' if p else 'FAIL'}" for i, p in enumerate(self.passed)]
        if self.divergence:
            out.append("divergence " + " ".join(f"{k}={v}" for k, v in self.divergence.items()))
        out.extend(f"stat {k}={v}" for k, v in sorted(self.stats.items()))
        out.append(f"{'OK' if self.ok else 'FAILED'} checks={self.checks}")
        return out


class WitnessError(ValueError):
    pass


def _compiled_size(compiled) -> int:
    return compiled.n


def _compiled_states(compiled, y0: np.ndarray, steps: int) -> list[np.ndarray]:
    if isinstance(compiled, Network):
        return trajectory(compiled, y0, steps)
    if not compiled.is_iterable:
        raise WitnessError("compiled circuit is not iterable")
    out = [np.asarray(y0, dtype=np.uint8)]
    for _ in range(steps):
        out.append(evaluate(compiled, out[-1]))
    return out


def _source_size(source, witness: Witness) -> int:
    if isinstance(source, Network):
        return source.n
    if isinstance(source, Circuit):
        return source.n
    return 0


def _sample_source(rng: random.Random, size: int, witness: Witness) -> np.ndarray:
    x = np.array([rng.randint(0, 1) for _ in range(size)], dtype=np.uint8)
    v = witness.maps.get("latch", [(None,)])[0][0]
    if witness.kind == "full":
        v = witness.maps["order"][0][1]
    if v is not None:
        x[v] = 0
    return x


def verify_witness(source, compiled, witness: Witness, samples: int = 20, steps: int | None = None,
                   seed: int = 0, workers: int | None = None) -> VerifyReport:
    """Simulate source and compiled objects side by side and compare them through the witness.

    ``steps`` counts compiled steps; observation happens at t = u*P + r.
    """
    size = _compiled_size(compiled)
    try:
        witness.validate(size)
    except ValueError as exc:
        raise WitnessError(str(exc)) from exc
    if witness.initial is None or len(witness.initial) != size:
        raise WitnessError("witness base configuration does not match the compiled object")
    if steps is None:
        steps = max(20, 8 * witness.P)
    rng = random.Random(seed)
    if witness.kind == "clock":
        inputs = [None]
    else:
        inputs = [_sample_source(rng, _source_size(source, witness), witness) for _ in range(samples)]

    def check(x):
        return _check_one(source, compiled, witness, x, steps)

    results = map_batch(check, inputs, workers)
    passed = [d is None for d, _ in results]
    divergence = None
    for i, (d, _) in enumerate(results):
        if d is not None:
            divergence = {"sample": i, **d}
            break
    stats = dict(witness.stats)
    if isinstance(compiled, Network):
        stats["compiled_max_degree"] = compiled.graph.max_degree
        stats["compiled_max_block"] = max((len(b) for b in compiled.scheme.blocks()), default=0)
        stats["compiled_vertices"] = compiled.n
    return VerifyReport(divergence is None, len(inputs), passed, sum(c for _, c in results), divergence, stats)


def _check_one(source, compiled, w: Witness, x, steps: int):
    """Returns (divergence or None, number of comparisons)."""
    checks = 0
    if w.kind == "clock":
        ys = _compiled_states(compiled, w.initial, steps)
        for t, y in enumerate(ys):
            for label, c in w.maps["label"]:
                checks += 1
                if y[c] != int(label[t % 3]):
                    return {"t": t, "vertex": c, "label": label, "expected": label[t % 3], "got": int(y[c])}, checks
        return None, checks
    y0 = w.lift_state(x)
    if isinstance(source, Circuit) and w.iterations == 1:
        expected = evaluate(source, x)
        ys = _compiled_states(compiled, y0, w.P)
        for s, c in w.observe:
            checks += 1
            if ys[w.P][c] != expected[s]:
                return {"t": w.P, "coordinate": s, "vertex": c, "expected": int(expected[s]),
                        "got": int(ys[w.P][c]), "input": "".join(map(str, x))}, checks
        return None, checks
    ys = _compiled_states(compiled, y0, steps)
    horizon = steps // w.P + 1
    if isinstance(source, Circuit):
        src_tr = [np.asarray(x, dtype=np.uint8)]
        for _ in range(horizon):
            src_tr.append(evaluate(source, src_tr[-1]))
    else:
        src_tr = trajectory(source, x, horizon)
    src = src_tr.__getitem__
    quiet = w.stats.get("quiet_off_phase", False)
    if w.kind == "eventual":
        return _check_eventual(source, w, x, ys, src, checks)
    if w.kind == "full":
        return _check_full(source, compiled, w, x, y0)
    constant = [c for c in range(len(y0)) if c not in {c for _, c in w.observe}] if w.kind == "portion" else []
    for t, y in enumerate(ys):
        if (t - w.r) % w.P == 0 and t >= w.r:
            u = (t - w.r) // w.P
            sx = src(u)
            for s, c in w.observe:
                checks += 1
                if y[c] != sx[s]:
                    return {"t": t, "source_step": u, "coordinate": s, "vertex": c, "expected": int(sx[s]),
                            "got": int(y[c])}, checks
        elif quiet:
            for s, c in w.observe:
                checks += 1
                if y[c]:
                    return {"t": t, "coordinate": s, "vertex": c, "expected": 0, "got": 1, "off_phase": True}, checks
        for c in constant:
            checks += 1
            if y[c] != y0[c]:
                return {"t": t, "vertex": c, "expected": int(y0[c]), "got": int(y[c]), "constant": True}, checks
    return None, checks


def _check_eventual(source: Network, w: Witness, x, ys, src, checks):
    v, f = w.maps["latch"][0]
    fired = False
    for t, y in enumerate(ys):
        if t >= 1 and y[v]:
            fired = True
        if not fired:
            sx = src(t)
            for s, c in w.observe:
                checks += 1
                if y[c] != sx[s]:
                    return {"t": t, "coordinate": s, "vertex": c, "expected": int(sx[s]), "got": int(y[c])}, checks
        checks += 1
        if bool(y[f]) != fired:
            return {"t": t, "vertex": f, "expected": int(fired), "got": int(y[f]), "latch": True}, checks
    return None, checks


def _check_full(source: Network, compiled: Network, w: Witness, x, y0):
    v = w.maps["order"][0][1]
    a = predict_once(PredictionInstance(source, x, v)).answer
    b = predict_full(PredictionInstance(compiled, y0, mode=FULL)).answer
    if a != b:
        return {"source_once": a, "compiled_full": b, "input": "".join(map(str, x))}, 1
    return None, 1
