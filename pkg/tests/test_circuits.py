import random
from itertools import product

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bseqmaj.circuits import (
    AND, INPUT, NOT, OR, Circuit, CircuitBuilder, CircuitError, Gate, all_inputs, bound_degree, evaluate,
    evaluate_gates, flatten_depth1, is_synchronous, iterate, monotonize, reach_oracle, synchronize, tm_accepts, tm_initial,
    TuringMachine, tm_step, tm_to_circuit,
)
from bseqmaj.generators import random_circuit, random_config, random_tm

from oracles import naive_eval, naive_reach

seeds = st.integers(0, 2**32 - 1)


def identity(n):
    b = CircuitBuilder()
    ins = [b.input() for _ in range(n)]
    return b.build([b.buffer(i) for i in ins])


def regression_circuit():
    b = CircuitBuilder()
    a0, a1, a2 = b.input(), b.input(), b.input()
    g3 = b.add(AND, a0, a1)
    g4 = b.add(NOT, a2)
    g5 = b.add(OR, g3, g4)
    g6 = b.add(AND, g5, a2, a0)
    g7 = b.add(OR, g6, a1)
    return b.build([g5, g6, g7])


def test_evaluate_small_gates():
    b = CircuitBuilder()
    x0, x1 = b.input(), b.input()
    C = b.build([b.add(AND, x0, x1)])
    assert evaluate(C, [1, 1]).tolist() == [1]
    assert evaluate(C, [1, 0]).tolist() == [0]
    b = CircuitBuilder()
    C = b.build([b.add(NOT, b.input())])
    assert evaluate(C, [0]).tolist() == [1]


def test_regression_circuit_golden():
    # hand evaluation recorded once; inputs (x0, x1, x2) with x0 most significant
    golden = {
        (0, 0, 0): "100", (0, 0, 1): "000", (0, 1, 0): "101", (0, 1, 1): "001",
        (1, 0, 0): "100", (1, 0, 1): "000", (1, 1, 0): "101", (1, 1, 1): "111",
    }
    C = regression_circuit()
    for x, y in golden.items():
        assert "".join(map(str, evaluate(C, x))) == y


def test_evaluate_arity_mismatch():
    with pytest.raises(CircuitError):
        evaluate(regression_circuit(), [0, 1])


def test_gate_validation():
    with pytest.raises(CircuitError):
        Gate(NOT, (0, 1))
    with pytest.raises(CircuitError):
        Gate(AND, ())
    with pytest.raises(CircuitError):
        Circuit((Gate(INPUT), Gate(OR, (2,)), Gate(INPUT)), (1,))


def test_iterate_basics():
    C = identity(3)
    assert iterate(C, [1, 0, 1], 0).tolist() == [1, 0, 1]
    assert iterate(C, [1, 0, 1], 7).tolist() == [1, 0, 1]
    b = CircuitBuilder()
    x0, x1 = b.input(), b.input()
    with pytest.raises(CircuitError):
        iterate(b.build([b.add(AND, x0, x1)]), [0, 0], 1)


@given(seeds)
def test_iterate_composes(seed):
    r = random.Random(seed)
    n = r.randint(1, 6)
    C = random_circuit(r, n, r.randint(1, 12))
    x = random_config(r, n)
    a, b = r.randint(0, 4), r.randint(0, 4)
    assert iterate(C, x, a + b).tolist() == iterate(C, iterate(C, x, a), b).tolist()


@given(seeds)
def test_evaluate_matches_recursive_oracle(seed):
    r = random.Random(seed)
    n = r.randint(1, 6)
    C = random_circuit(r, n, r.randint(1, 15), m=r.randint(1, 4))
    X = all_inputs(n)
    Y = evaluate(C, X)
    assert Y.tolist() == [naive_eval(C, x) for x in X]


def test_reach_oracle_examples():
    b = CircuitBuilder()
    x0, x1 = b.input(), b.input()
    C = b.build([b.buffer(x1), b.buffer(x0)])
    res = reach_oracle(C, [1, 0], 1)
    assert res.answer and res.time == 1
    res = reach_oracle(identity(2), [1, 0], 1)
    assert not res.answer


@given(seeds)
def test_reach_oracle_matches_recursive(seed):
    r = random.Random(seed)
    n = r.randint(1, 8)
    C = random_circuit(r, n, r.randint(1, 14), monotone=r.random() < 0.5)
    x = random_config(r, n)
    i = r.randrange(n)
    assert reach_oracle(C, x, i).answer == naive_reach(C, x, i)


def test_monotonize_not_swaps_rails():
    b = CircuitBuilder()
    C = b.build([b.add(NOT, b.input())])
    M, rails = monotonize(C)
    assert M.is_monotone
    for xp, xn in product((0, 1), repeat=2):
        assert evaluate(M, [xp, xn]).tolist()[0] == xn


def test_monotonize_rails_complement_and_positive_rail():
    r = random.Random(7)
    for _ in range(20):
        C = random_circuit(r, 4, 10, m=3)
        M, rails = monotonize(C)
        X = all_inputs(4)
        dual = np.concatenate([X, 1 - X], axis=1)
        G = evaluate_gates(M, dual)
        orig = evaluate_gates(C, X)
        for g, (p, q) in enumerate(rails.rails):
            assert np.array_equal(G[:, p], orig[:, g])
            assert np.array_equal(G[:, q], 1 - orig[:, g])
        assert np.array_equal(evaluate(M, dual), evaluate(C, X))


def test_monotonize_iterable_state():
    r = random.Random(8)
    C = random_circuit(r, 3, 9)
    M, _ = monotonize(C, iterable=True)
    x = np.array([1, 0, 1], dtype=np.uint8)
    y = np.concatenate([x, 1 - x])
    for t in range(6):
        assert np.array_equal(y[:3], iterate(C, x, t))
        assert np.array_equal(y[3:], 1 - y[:3])
        y = evaluate(M, y)


def test_bound_degree_wide_and():
    b = CircuitBuilder()
    ins = [b.input() for _ in range(5)]
    C = b.build([b.add(AND, *ins)])
    B = bound_degree(C)
    assert sum(1 for g in B.gates if g.kind == AND) == 4
    assert np.array_equal(evaluate(B, all_inputs(5)), evaluate(C, all_inputs(5)))
    assert B.max_degree(True) <= 4


def test_bound_degree_fanout_and_identity():
    b = CircuitBuilder()
    x = b.input()
    C = b.build([b.add(OR, x)] * 1 + [b.add(AND, x), b.add(OR, x), b.add(AND, x)])
    B = bound_degree(C)
    assert all(B.in_degree(g) <= 2 and B.out_degree(g, True) <= 2 for g in range(B.size))
    small = identity(3)
    assert bound_degree(small) is small
    with pytest.raises(CircuitError):
        bound_degree(regression_circuit())


def _depth2_width3():
    b = CircuitBuilder()
    x = [b.input() for _ in range(3)]
    l1 = [b.add(AND, x[0], x[1]), b.add(OR, x[1], x[2]), b.add(OR, x[2], x[0])]
    l2 = [b.add(OR, l1[0], l1[1]), b.add(AND, l1[1], l1[2]), b.add(AND, l1[2], l1[0])]
    return b.build(l2)


def test_synchronize_already_synchronous_keeps_widths():
    C = _depth2_width3()
    assert is_synchronous(C)
    L = synchronize(C)
    assert [len(layer) for layer in L.layers] == [3, 3, 3]
    assert L.zero_inputs == 0


def test_synchronize_skip_wire_gets_one_buffer():
    b = CircuitBuilder()
    x0, x1 = b.input(), b.input()
    g = b.add(AND, x0, x1)
    h = b.add(OR, g, x1)  # x1 skips layer 1
    C = b.build([h])
    L = synchronize(C)
    assert L.depth == 2
    buffers = [gt for gt in L.circuit.gates if gt.kind == OR and len(gt.sources) == 1]
    # one buffer carries x1 to layer 1; padding buffers belong to the zero chain
    assert sum(1 for gt in buffers if gt.sources == (1,)) == 1


@given(seeds)
def test_pipeline_equivalence_exhaustive(seed):
    r = random.Random(seed)
    n = r.randint(1, 6)
    C = random_circuit(r, n, r.randint(1, 14))
    M, _ = monotonize(C, iterable=True)
    B = bound_degree(M)
    L = synchronize(B)
    assert is_synchronous(L.circuit)
    assert len({len(layer) for layer in L.layers}) == 1
    X = all_inputs(n)
    dual = np.concatenate([X, 1 - X], axis=1)
    ref = evaluate(M, dual)
    assert np.array_equal(evaluate(B, dual), ref)
    padded = np.array([L.pad_input(d) for d in dual])
    assert np.array_equal(evaluate(L.circuit, padded)[:, : 2 * n], ref)
    assert not evaluate(L.circuit, padded)[:, 2 * n:].any()


def test_flatten_depth2_width3():
    F, emb = flatten_depth1(_depth2_width3())
    assert F.n == 6 and F.m == 6 and F.depth == 1
    assert emb.dilation == 2


def test_flatten_depth1_identity():
    b = CircuitBuilder()
    x = [b.input() for _ in range(3)]
    D1 = b.build([b.add(AND, x[0], x[1]), b.add(OR, x[2]), b.add(OR, x[0], x[2])])
    F, emb = flatten_depth1(D1)
    assert F.gates == D1.gates and F.outputs == D1.outputs
    assert emb.dilation == 1


def test_flatten_rejects_unsynchronized():
    b = CircuitBuilder()
    x0, x1 = b.input(), b.input()
    g = b.add(AND, x0, x1)
    with pytest.raises(CircuitError):
        flatten_depth1(b.build([b.add(OR, g, x1), g]))


@given(seeds)
def test_flatten_identity_and_quiet_phases(seed):
    r = random.Random(seed)
    n = r.randint(1, 4)
    C = random_circuit(r, n, r.randint(1, 10), monotone=True)
    L = synchronize(bound_degree(C))
    if L.depth > 3:
        return
    F, emb = flatten_depth1(L)
    x = random_config(r, n)
    state = emb.embed(L.pad_input(x))
    D = emb.dilation
    for step in range(6 * D + 1):
        t, phase = divmod(step, D)
        if phase == 0:
            assert np.array_equal(state[:n], iterate(C, x, t))
        else:
            assert not state[:n].any()
        state = evaluate(F, state)


# -- Turing machines --------------------------------------------------------

def _halting_machine():
    states = ("q0", "qf")
    gamma = ("0", "1", "B")
    delta = {(q, a): ("qf", a, 0) for q in states for a in gamma}
    return TuringMachine(states, gamma, ("0", "1"), delta, "B", "q0", "qf")


def _right_mover():
    states = ("q0", "qf")
    gamma = ("0", "1", "B")
    delta = {("q0", a): ("q0", a, 1) for a in gamma}
    delta.update({("qf", a): ("qf", a, 0) for a in gamma})
    return TuringMachine(states, gamma, ("0", "1"), delta, "B", "q0", "qf")


def test_tm_halting_machine_flag():
    C, x0, halt, enc = tm_to_circuit(_halting_machine(), ["1", "0"], 2)
    for t in range(1, 6):
        assert iterate(C, x0, t)[halt] == 1
    assert x0[halt] == 0


def test_tm_right_mover_never_halts():
    M = _right_mover()
    C, x0, halt, enc = tm_to_circuit(M, ["0", "1"], 2)
    assert not reach_oracle(C, x0, halt).answer
    assert not tm_accepts(M, ["0", "1"], 2).answer


def test_tm_single_step_write():
    states = ("q0", "qf")
    gamma = ("0", "1", "B")
    delta = {("q0", "0"): ("q0", "1", 1), ("q0", "1"): ("q0", "0", 1), ("q0", "B"): ("qf", "B", 0)}
    delta.update({("qf", a): ("qf", a, 0) for a in gamma})
    M = TuringMachine(states, gamma, ("0", "1"), delta, "B", "q0", "qf")
    w = ["0", "1", "1"]
    C, x0, halt, enc = tm_to_circuit(M, w, 1)
    conf, halted = enc.decode(evaluate(C, x0))
    ref = tm_step(M, tm_initial(M, w, 1))
    assert conf.tape == ref.tape == ["1", "1", "1"]
    assert (conf.head, conf.state, halted) == (ref.head, ref.state, False)


def test_tm_rejects_bad_word():
    with pytest.raises(CircuitError):
        tm_to_circuit(_halting_machine(), ["B"], 1)


@given(seeds)
def test_tm_circuit_tracks_simulator(seed):
    r = random.Random(seed)
    M = random_tm(r, states=r.randint(2, 4))
    w = [r.choice("01") for _ in range(r.randint(1, 3))]
    K = r.randint(1, 2)
    C, x, halt, enc = tm_to_circuit(M, w, K)
    conf = tm_initial(M, w, K)
    halted = False
    for _ in range(20):
        x = evaluate(C, x)
        conf = tm_step(M, conf)
        halted = halted or conf.state == M.final
        got, flag = enc.decode(x)
        assert got.key() == conf.key() and flag == halted
    assert reach_oracle(C, enc.encode(tm_initial(M, w, K)), halt).answer == tm_accepts(M, w, K).answer
