"""Acceptance criteria, one test each.

Every criterion prints a single ``PASS``/``FAIL`` line whether or not pytest
captures output.  ``python tests/test_acceptance.py`` runs the same checks
without pytest.
"""

import random
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from bseqmaj.circuits import (  # noqa: E402
    all_inputs, bound_degree, dual_rail_state, evaluate, flatten_depth1, is_synchronous, iterate, monotonize,
    reach_oracle, synchronize, tm_accepts, tm_initial, tm_step, tm_to_circuit,
)
from bseqmaj.gadgets import (  # noqa: E402
    amplify, attach_eventual_gadget, build_clock, build_full_instance, compile_bseq_instance,
    compile_circuit_to_clocked, compile_circuit_to_majority, to_portion,
)
from bseqmaj.generators import (  # noqa: E402
    random_circuit, random_config, random_depth1_circuit, random_graph, random_network, random_odd_degree_graph,
    random_scheme, random_tm,
)
from bseqmaj.netcore import (  # noqa: E402
    Graph, Network, Rule, UpdateScheme, find_limit_cycle, global_step_batch, trajectory,
    transient_length_network,
)
from bseqmaj.solvers import (  # noqa: E402
    PredictionInstance, predict_conditional, predict_eventual, predict_full, predict_once,
)

from oracles import naive_run  # noqa: E402

STAR_START = [1] + [0] * 8


def star(scheme):
    g = Graph.from_edges(9, [(0, i) for i in range(1, 9)])
    blocks = {"sync": UpdateScheme.synchronous(9), "seq": UpdateScheme.sequential(list(range(1, 9)) + [0]),
              "two": UpdateScheme((1,) + (2,) * 8)}[scheme]
    return Network(g, Rule.majority(), blocks)


def bits(x):
    return "".join(str(int(b)) for b in x)


# -- criteria ------------------------------------------------------------------

def criterion_1():
    sync = [bits(y) for y in trajectory(star("sync"), STAR_START, 4)]
    assert sync == ["100000000", "011111111"] * 2 + ["100000000"]
    seq = [bits(y) for y in trajectory(star("seq"), STAR_START, 3)]
    assert seq == ["100000000"] + ["111111111"] * 3
    two = [bits(y) for y in trajectory(star("two"), STAR_START, 3)]
    assert two == ["100000000"] + ["000000000"] * 3
    cycles = [(r.transient, r.period) for r in (find_limit_cycle(star(s), STAR_START) for s in ("sync", "seq", "two"))]
    assert cycles == [(0, 2), (1, 1), (1, 1)]
    return "period-2 flip, all-active and all-inactive fixed points"


def criterion_2():
    net, w = build_clock()
    tr = naive_run(net, w.initial, 100)
    labels = w.maps["label"]
    assert len(labels) == 8
    for label, v in labels:
        assert all(tr[t][v] == int(label[t % 3]) for t in range(101)), label
    rep = find_limit_cycle(net, w.initial)
    assert (rep.transient, rep.period) == (0, 3)
    assert net.graph.max_degree <= 3
    return f"8 labels x 101 steps, transient 0, period 3, max degree {net.graph.max_degree}"


def criterion_3():
    r = random.Random(3)
    done = worst = tight = 0
    while done < 100:
        n = r.randint(1, 6)
        C = random_circuit(r, n, r.randint(1, 20), m=r.randint(1, 4), monotone=True, max_degree=4)
        d_actual = C.max_degree(count_outputs=True)
        if d_actual > 4:
            continue
        d = 4
        net, w = compile_circuit_to_majority(C, d=d)
        assert net.graph.max_degree <= 2 * d - 1
        worst = max(worst, net.graph.max_degree)
        tight += net.graph.max_degree > 2 * d_actual - 1
        X = all_inputs(n)
        Y = evaluate(C, X)
        lifted = np.array([w.lift_state(x) for x in X])
        out = global_step_batch(net, lifted)
        obs = [c for _, c in w.observe]
        assert np.array_equal(out[:, obs], Y)
        done += 1
    return (f"{done} circuits, d = 4, compiled max degree {worst} <= 7; "
            f"{tight} exceed 2*d_actual-1 (degree-2 buffers)")


def criterion_4():
    r = random.Random(4)
    depths = []
    for _ in range(50):
        n = r.randint(1, 6)
        C = random_circuit(r, n, r.randint(1, 14))
        M, _ = monotonize(C, iterable=True)
        B = bound_degree(M)
        L = synchronize(B)
        assert is_synchronous(L.circuit)
        X = all_inputs(n)
        dual = np.concatenate([X, 1 - X], axis=1)
        ref = evaluate(M, dual)
        assert np.array_equal(ref[:, :n], evaluate(C, X))
        assert np.array_equal(evaluate(B, dual), ref)
        padded = np.array([L.pad_input(d) for d in dual])
        assert np.array_equal(evaluate(L.circuit, padded)[:, : 2 * n], ref)
        F, emb = flatten_depth1(L)
        D = emb.dilation
        depths.append(D)
        x = random_config(r, n)
        state = emb.embed(L.pad_input(dual_rail_state(x)))
        for step in range(6 * D + 1):
            t, phase = divmod(step, D)
            if phase == 0:
                assert np.array_equal(state[: 2 * n], dual_rail_state(iterate(C, x, t)))
            else:
                assert not state[: 2 * n].any()
            state = evaluate(F, state)
    return f"50 circuits, exhaustive equivalence, t <= 6, dilation up to {max(depths)}"


def criterion_5():
    r = random.Random(5)
    checks = 0
    for _ in range(50):
        n = 2 * r.randint(1, 4)
        net = Network(random_odd_degree_graph(r, n), Rule.majority(), random_scheme(r, n))
        k = r.randint(1, 3)
        amp, w = amplify(net, k)
        edges = list(amp.graph.edges())
        extra = []
        for a in range(amp.n):
            for _ in range(r.randint(0, k)):
                edges.append((a, amp.n + len(extra)))
                extra.append(amp.n + len(extra))
        blocks = amp.scheme.block_of + (amp.scheme.num_blocks + 1,) * len(extra)
        H = Network(Graph.from_edges(amp.n + len(extra), edges), Rule.majority(), UpdateScheme(blocks))
        X = np.array([random_config(r, n) for _ in range(50)])
        Y = np.zeros((50, H.n), dtype=np.uint8)
        Y[:, : amp.n] = [w.lift_state(x) for x in X]
        phi = np.array(w.maps["phi"])
        for _ in range(20):
            X = global_step_batch(net, X)
            Y[:, extra] = [[r.randint(0, 1) for _ in extra] for _ in range(50)]
            Y = global_step_batch(H, Y)
            assert np.array_equal(Y[:, phi[:, 0]], X[:, phi[:, 1]])
            checks += 50
    return f"50 networks, k <= 3, {checks} configuration-steps with adversaries"


def criterion_6():
    r = random.Random(6)
    worst = 0
    for _ in range(50):
        n = r.randint(1, 6)
        C = random_depth1_circuit(r, n)
        assert C.max_degree() <= 4
        x = random_config(r, n)
        net, w = compile_circuit_to_clocked(C, x)
        worst = max(worst, net.graph.max_degree)
        assert net.graph.max_degree <= 7
        top = [c for _, c in w.observe]
        tr = trajectory(net, w.lift_state(x), 24)
        for u in range(9):
            assert tr[3 * u][top].tolist() == iterate(C, x, u).tolist()
    return f"50 circuits, u <= 8, max degree {worst} <= 7"


def criterion_7():
    r = random.Random(7)
    deg = blk = clk = yes = cdeg = 0
    for _ in range(100):
        n = r.randint(1, 5)
        C = random_circuit(r, n, r.randint(1, 8))
        x = random_config(r, n)
        i = r.randrange(n)
        x[i] = 0
        net, cfg, v, w = compile_bseq_instance(C, x, i)
        got = predict_once(PredictionInstance(net, cfg, v)).answer
        want = reach_oracle(C, x, i).answer
        assert got == want
        yes += want
        assert w.stats["clocked_max_degree"] <= 7
        assert net.graph.max_degree <= 23
        cdeg = max(cdeg, w.stats["clocked_max_degree"])
        deg = max(deg, net.graph.max_degree)
        blk = max(blk, w.stats["max_block_size"])
        clk = max(clk, w.stats["max_clock_block_size"])
    return (f"100 instances ({yes} YES), clocked degree {cdeg} <= 7, max degree {deg} <= 23,"
            f" max block size {blk}, max clock block size {clk}")


def criterion_8():
    r = random.Random(8)
    worst = 0.0
    for _ in range(200):
        n = r.randint(2, 12)
        g = random_graph(r, n, r.uniform(0.2, 0.6), connected=True)
        order = list(range(n))
        r.shuffle(order)
        for scheme in (UpdateScheme.synchronous(n), UpdateScheme.sequential(order)):
            net = Network(g, Rule.majority(), scheme)
            for _ in range(10):
                rep = find_limit_cycle(net, random_config(r, n))
                assert rep.period in ((1, 2) if scheme.is_synchronous else (1,))
            tau = transient_length_network(net)
            assert tau <= 4 * n * n
            worst = max(worst, tau / (n * n))
    return f"200 networks x 2 schemes, max transient / n^2 = {worst:.3f}"


def criterion_9():
    r = random.Random(9)
    nets = 0
    for p in (Fraction(1, 3), Fraction(2, 5), Fraction(3, 4)):
        for _ in range(30):
            n = r.randint(1, 9)
            net0 = random_network(r, n, p=0.4)
            net, w = to_portion(net0, p)
            for _ in range(5):
                x = random_config(r, n)
                a = trajectory(net0, x, 20)
                b = trajectory(net, w.lift_state(x), 20)
                for t in range(21):
                    assert np.array_equal(b[t][:n], a[t])
                    assert np.array_equal(b[t][n:], w.initial[n:])
            nets += 1
    return f"{nets} networks over p in {{1/3, 2/5, 3/4}}, 5 configurations x 20 steps each"


def criterion_10():
    r = random.Random(10)
    counts = [0, 0, 0]
    while min(counts) < 30:
        n = r.randint(3, 7)
        net0 = random_network(r, n, p=0.45, max_degree=5)
        x = random_config(r, n)
        v = r.randrange(n)
        x[v] = 0
        once = predict_once(PredictionInstance(net0, x, v))
        net, w = attach_eventual_gadget(net0, v)
        assert predict_eventual(PredictionInstance(net, w.lift_state(x), w.target, "eventual")).answer == once.answer
        counts[0] += 1
        d = max(3, net0.graph.max_degree) | 1
        net, w = build_full_instance(net0, d, v)
        assert predict_full(PredictionInstance(net, w.lift_state(x), mode="full")).answer == once.answer
        counts[1] += 1
        cond = predict_conditional(PredictionInstance(net0, x, v, "conditional", {u: int(b) for u, b in enumerate(x)}))
        assert cond.line() == once.line()
        assert cond.time == once.time and len(cond.cycle) == len(once.cycle)
        assert all(np.array_equal(a, b) for a, b in zip(cond.cycle, once.cycle))
        counts[2] += 1
    return f"eventual {counts[0]}, full {counts[1]}, conditional {counts[2]} instances"


def criterion_11():
    r = random.Random(11)
    halting = 0
    for _ in range(20):
        M = random_tm(r, states=r.randint(2, 4))
        word = [r.choice("01") for _ in range(r.randint(1, 3))]
        K = r.randint(1, 2)
        C, x, halt, enc = tm_to_circuit(M, word, K)
        conf = tm_initial(M, word, K)
        halted = False
        for _ in range(20):
            x = evaluate(C, x)
            conf = tm_step(M, conf)
            halted = halted or conf.state == M.final
            got, flag = enc.decode(x)
            assert got.key() == conf.key() and flag == halted
        want = tm_accepts(M, word, K).answer
        assert reach_oracle(C, enc.encode(tm_initial(M, word, K)), halt).answer == want
        halting += want
    return f"20 machines x 20 steps, {halting} reach the final state"


CRITERIA = [
    (1, "star golden traces", criterion_1),
    (2, "clock gadget", criterion_2),
    (3, "gate gadget faithfulness", criterion_3),
    (4, "monotone/degree/synchronize/flatten pipeline", criterion_4),
    (5, "amplification robustness", criterion_5),
    (6, "clocked cylinder", criterion_6),
    (7, "end-to-end block-sequential pipeline", criterion_7),
    (8, "synchronous and sequential structure", criterion_8),
    (9, "portion-p threshold shift", criterion_9),
    (10, "eventual / full / conditional reductions", criterion_10),
    (11, "Turing machine front-end", criterion_11),
]


def run_criterion(number, title, fn):
    start = time.perf_counter()
    try:
        detail = fn()
    except Exception as exc:  # reported, then re-raised by the caller
        return False, f"criterion {number:2d} FAIL {title}: {type(exc).__name__}: {exc}", exc
    elapsed = time.perf_counter() - start
    return True, f"criterion {number:2d} PASS {title}: {detail} [{elapsed:.1f}s]", None


@pytest.mark.parametrize("number, title, fn", CRITERIA, ids=[f"criterion_{c[0]}" for c in CRITERIA])
def test_acceptance(number, title, fn, capsys):
    ok, line, exc = run_criterion(number, title, fn)
    with capsys.disabled():
        print("\n" + line)
    if not ok:
        raise exc


if __name__ == "__main__":
    failures = 0
    for number, title, fn in CRITERIA:
        ok, line, _ = run_criterion(number, title, fn)
        print(line, flush=True)
        failures += not ok
    sys.exit(1 if failures else 0)
