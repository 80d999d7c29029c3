import numpy as np
import pytest

from cssr import even_process, iid_process, markov_process, seven_state_process
from cssr.machine import MachineError
from cssr.sources import load_spec, named_source, random_machine, shipped_spec_path, suffix_defined_process
from cssr.spec_format import SpecError, parse_spec, read_spec


def test_shipped_even_spec_equals_builtin():
    a, b = load_spec("even.spec"), even_process()
    assert np.array_equal(a.emissions, b.emissions)
    assert np.array_equal(a.transitions, b.transitions)


def test_even_is_not_finite_order_markov():
    # P(A | B^m A) alternates with the parity of m
    m = even_process()
    for L in range(2, 8):
        w = m.word_distribution(L + 1)
        ctx = ("A",) + ("B",) * (L - 1)
        p_a = w.get(ctx + ("A",), 0.0) / (w.get(ctx + ("A",), 0.0) + w[ctx + ("B",)])
        assert p_a == pytest.approx(0.0 if (L - 1) % 2 else 0.5)


def test_even_fails_suffix_validator():
    with pytest.raises(SpecError):
        suffix_defined_process(read_spec(shipped_spec_path("even.spec")))


def test_order_one_chain_as_suffix_spec():
    spec = parse_spec("""
        alphabet: A B
        state a A
        state b B
        a A 0.9 a
        a B 0.1 b
        b A 0.4 a
        b B 0.6 b
    """)
    m = suffix_defined_process(spec)
    assert m.n_states == 2 and m.is_strongly_connected()


def test_suffix_validator_catches_wrong_target():
    spec = parse_spec("""
        alphabet: A B
        state a A
        state b B
        a A 0.9 b
        a B 0.1 b
        b A 0.4 a
        b B 0.6 b
    """)
    with pytest.raises(SpecError, match="concatenation"):
        suffix_defined_process(spec)


def test_seven_state_spec():
    m = seven_state_process()
    assert m.n_states == 7 and m.is_unifilar() and m.is_strongly_connected()
    assert all(len(ws) == 1 and len(ws[0]) <= 3 for ws in m.suffixes)
    # every probability is a multiple of 1/16
    assert np.allclose(m.emissions * 16, np.round(m.emissions * 16))


def test_iid():
    m = iid_process([0.5, 0.5])
    assert m.n_states == 1
    with pytest.raises(MachineError):
        iid_process([0.5, 0.6])


def test_markov_identical_rows_collapse_to_iid():
    assert markov_process(1, [[0.3, 0.7], [0.3, 0.7]]).n_states == 1


def test_markov_order_two_distinct_rows():
    m = markov_process(2, [[0.1, 0.9], [0.2, 0.8], [0.3, 0.7], [0.4, 0.6]])
    assert m.n_states == 4


def test_markov_kernel_validation():
    with pytest.raises(MachineError):
        markov_process(2, [[0.5, 0.5]])
    with pytest.raises(MachineError):
        markov_process(1, [[1.0, 0.0], [0.0, 1.0]])  # two absorbing contexts


def test_random_machines_are_valid():
    rng = np.random.default_rng(0)
    for n in range(1, 7):
        m = random_machine(n, 3, rng)
        assert m.n_states == n and m.is_unifilar() and m.is_strongly_connected()


def test_named_sources(tmp_path):
    assert named_source("even").n_states == 2
    assert named_source("seven_state").n_states == 7
    assert named_source("iid").n_states == 1
    p = tmp_path / "x.spec"
    p.write_text(even_process().to_text())
    assert named_source(str(p)).n_states == 2
