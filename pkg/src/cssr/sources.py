"""Exact generating processes, all expressed as causal-state machines."""

from __future__ import annotations

from importlib import resources

import numpy as np

from .graph import recurrent_classes
from .machine import CausalStateMachine, MachineError, minimize
from .sequence import Alphabet
from .spec_format import ProcessSpec, SpecError, parse_spec, read_spec
from .stats import Distribution

__all__ = [
    "ProcessSpec",
    "even_process",
    "seven_state_process",
    "iid_process",
    "markov_process",
    "suffix_defined_process",
    "random_machine",
    "load_spec",
    "shipped_spec_path",
    "named_source",
]

AB = Alphabet(("A", "B"))


def shipped_spec_path(name: str):
    """Path of a spec file shipped with the package (``even.spec``, ...)."""
    return resources.files("cssr") / "data" / name


def load_spec(path_or_name) -> CausalStateMachine:
    """Machine from a spec file path, or from the name of a shipped spec."""
    path = shipped_spec_path(path_or_name) if str(path_or_name) in _SHIPPED else path_or_name
    return CausalStateMachine.from_spec(read_spec(path))


_SHIPPED = {"even.spec", "seven_state.spec"}


def even_process() -> CausalStateMachine:
    """Blocks of B's between A's have even length.

    State 1 emits A (staying) or B (moving to 2) with probability 1/2 each;
    state 2 always emits B and returns to 1.
    """
    E = [[0.5, 0.5], [0.0, 1.0]]
    T = [[0, 1], [-1, 0]]
    return CausalStateMachine(AB, E, T, names=["1", "2"])


def seven_state_process() -> CausalStateMachine:
    """The shipped seven-state suffix-defined process (``seven_state.spec``)."""
    return suffix_defined_process(read_spec(shipped_spec_path("seven_state.spec")))


def iid_process(dist, alphabet: Alphabet | None = None) -> CausalStateMachine:
    p = dist.probs if isinstance(dist, Distribution) else np.asarray(dist, dtype=float)
    if (p < 0).any() or abs(p.sum() - 1) > 1e-12:
        raise MachineError(f"not a probability vector: {p}")
    alphabet = alphabet or _default_alphabet(len(p))
    T = np.zeros((1, len(p)), dtype=np.int64)
    return CausalStateMachine(alphabet, p[None, :], T, suffixes=[[()]])


def _default_alphabet(k: int) -> Alphabet:
    return AB if k == 2 else Alphabet(tuple(str(i) for i in range(k)))


def markov_process(order: int, kernel, alphabet: Alphabet | None = None) -> CausalStateMachine:
    """Finite-order Markov chain as a minimized machine.

    ``kernel`` has one row per context of length ``order`` in lexicographic
    order (oldest symbol most significant) and one column per symbol.
    """
    K = np.asarray(kernel, dtype=float)
    if K.ndim != 2:
        raise MachineError("kernel must be a 2-d array")
    k = K.shape[1]
    if K.shape[0] != k ** order:
        raise MachineError(f"kernel needs {k ** order} rows for order {order}, got {K.shape[0]}")
    if (K < 0).any() or np.abs(K.sum(axis=1) - 1).max() > 1e-12:
        raise MachineError("kernel rows must be probability vectors")
    alphabet = alphabet or _default_alphabet(k)
    n = k ** order
    T = (np.arange(n)[:, None] * k + np.arange(k)[None, :]) % n
    edges = [(s, int(T[s, b])) for s in range(n) for b in range(k) if K[s, b] > 0]
    classes = recurrent_classes(n, edges)
    if len(classes) != 1:
        raise MachineError(f"kernel has {len(classes)} closed classes; need exactly one")
    keep = classes[0]
    pos = {s: i for i, s in enumerate(keep)}
    E = K[keep]
    Tk = np.array([[pos.get(int(T[s, b]), -1) if K[s, b] > 0 else -1 for b in range(k)] for s in keep])
    suffixes = [[_context(s, order, k)] for s in keep]
    return minimize(CausalStateMachine(alphabet, E, Tk, suffixes=suffixes))


def _context(code: int, order: int, k: int) -> tuple[int, ...]:
    out = []
    for _ in range(order):
        code, r = divmod(code, k)
        out.append(r)
    return tuple(reversed(out))


def suffix_defined_process(spec: ProcessSpec) -> CausalStateMachine:
    """Machine whose states are each identified by a single suffix.

    Each transition must agree with suffix concatenation: the successor of
    state ``s`` on ``b`` is the state whose suffix is the longest one matching
    the end of ``suffix(s) + b``.
    """
    missing = [s for s in spec.states if len(spec.suffixes.get(s, [])) != 1]
    if missing:
        raise SpecError(f"states {missing} are not defined by exactly one suffix")
    by_suffix = {spec.suffixes[s][0]: s for s in spec.states}
    if len(by_suffix) != len(spec.states):
        raise SpecError("two states share a suffix")
    for src, sym, p, dst in spec.rows:
        if p == 0:
            continue
        word = spec.suffixes[src][0] + (sym,)
        match = next((by_suffix[word[i:]] for i in range(len(word) + 1) if word[i:] in by_suffix), None)
        if match != dst:
            raise SpecError(
                f"transition {src} --{sym}--> {dst} disagrees with suffix concatenation "
                f"(expected {match})"
            )
    return CausalStateMachine.from_spec(spec)


def random_machine(n_states: int, k: int, rng, sparsity: float = 0.2, max_tries: int = 1000) -> CausalStateMachine:
    """Random strongly connected unifilar machine.

    Each emission is zeroed with probability ``sparsity`` (at least one symbol
    per state survives); remaining weights are Dirichlet(1).
    """
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    alphabet = _default_alphabet(k)
    for _ in range(max_tries):
        T = rng.integers(0, n_states, size=(n_states, k))
        E = rng.dirichlet(np.ones(k), size=n_states)
        mask = rng.random((n_states, k)) < sparsity
        mask[np.arange(n_states), rng.integers(0, k, n_states)] = False
        E[mask] = 0.0
        E /= E.sum(axis=1, keepdims=True)
        T[E == 0] = -1
        try:
            return CausalStateMachine(alphabet, E, T)
        except MachineError:
            continue
    raise RuntimeError("could not draw a strongly connected machine")


def named_source(name: str) -> CausalStateMachine:
    """Source by name: ``even``, ``seven_state``, ``iid`` (fair coin) or a
    path to a spec file."""
    if name == "even":
        return even_process()
    if name == "seven_state":
        return seven_state_process()
    if name == "iid":
        return iid_process([0.5, 0.5])
    return load_spec(name)
