"""Unifilar causal-state machines: prediction, simulation and exact statistics."""

from __future__ import annotations

from pathlib import Path

import numba
import numpy as np

from .graph import is_strongly_connected
from .sequence import Alphabet, Word
from .spec_format import ProcessSpec, format_word, parse_spec
from .stats import Distribution

# stationary solves switch from a dense linear solve to power iteration above this size
POWER_ITERATION_THRESHOLD = 1000


class MachineError(ValueError):
    """A machine violates unifilarity, normalization or recurrence."""


class UnsynchronizedError(LookupError):
    """No state can be assigned to a history.

    ``fallback`` carries the stationary single-symbol distribution, which is
    the best available prediction without synchronization.
    """

    def __init__(self, history, fallback: Distribution):
        super().__init__(f"cannot synchronize to history {history!r}")
        self.history = history
        self.fallback = fallback


def stationary_vector(P: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Stationary distribution of a row-stochastic matrix.

    Solves pi (P - I) = 0 with one equation replaced by sum(pi) = 1.  Falls
    back to averaged power iteration for large or reducible chains.
    """
    P = np.asarray(P, dtype=float)
    n = P.shape[0]
    if n == 1:
        return np.ones(1)
    if n <= POWER_ITERATION_THRESHOLD:
        A = P.T - np.eye(n)
        A[-1, :] = 1.0
        b = np.zeros(n)
        b[-1] = 1.0
        try:
            pi = np.linalg.solve(A, b)
            if np.all(pi > -1e-12) and np.abs(pi @ P - pi).max() <= 1e-10:
                pi = np.clip(pi, 0.0, None)
                return pi / pi.sum()
        except np.linalg.LinAlgError:
            pass
    # Cesaro-averaged iteration converges for periodic and reducible chains too
    pi = np.full(n, 1.0 / n)
    avg = pi.copy()
    for it in range(1, 200_000):
        pi = pi @ P
        new_avg = avg + (pi - avg) / (it + 1)
        if np.abs(new_avg - avg).max() < tol and np.abs(new_avg @ P - new_avg).max() < 1e-10:
            avg = new_avg
            break
        avg = new_avg
    return avg / avg.sum()


@numba.njit(cache=True)
def _simulate_path(cum, trans, start, u):
    n = u.shape[0]
    k = cum.shape[1]
    out = np.empty(n, dtype=np.int64)
    s = start
    for t in range(n):
        r = u[t]
        b = 0
        while b < k - 1 and r >= cum[s, b]:
            b += 1
        out[t] = b
        s = trans[s, b]
    return out


class CausalStateMachine:
    """A recurrent, unifilar hidden-Markov predictor with edge emissions.

    Parameters
    ----------
    alphabet : Alphabet
    emissions : array, shape (n_states, k)
        ``emissions[s, b]`` is the probability of emitting ``b`` from ``s``.
    transitions : int array, shape (n_states, k)
        Successor state after emitting ``b`` from ``s``; -1 where undefined.
        Every positive-probability emission must have a successor.
    suffixes : list of lists of words, optional
        Histories (tuples of symbol indices, oldest first) that identify each
        state.  Machines defined analytically may leave this out; histories
        are then mapped to states by filtering.
    names : list of str, optional
        State labels, used when serializing.
    """

    def __init__(self, alphabet: Alphabet, emissions, transitions, suffixes=None, names=None):
        self.alphabet = alphabet
        E = np.array(emissions, dtype=float)
        T = np.array(transitions, dtype=np.int64)
        if E.ndim != 2 or E.shape != T.shape or E.shape[1] != alphabet.size:
            raise MachineError("emission and transition tables must both have shape (n_states, k)")
        if E.shape[0] == 0:
            raise MachineError("machine has no states")
        E.setflags(write=False)
        T.setflags(write=False)
        self.emissions = E
        self.transitions = T
        n = E.shape[0]
        self.names = [str(i) for i in range(n)] if names is None else [str(x) for x in names]
        if suffixes is None:
            self.suffixes = None
            self._index = None
            self.max_suffix_length = None
        else:
            if len(suffixes) != n:
                raise MachineError("need one suffix list per state")
            self.suffixes = [sorted((tuple(w) for w in ws), key=lambda w: (len(w), w)) for ws in suffixes]
            self._index = {}
            for s, ws in enumerate(self.suffixes):
                for w in ws:
                    if w in self._index:
                        raise MachineError(f"suffix {w} assigned to two states")
                    self._index[w] = s
            self.max_suffix_length = max((len(w) for w in self._index), default=0)
        self._pi = None
        self._validate()

    def _validate(self):
        E, T = self.emissions, self.transitions
        if (E < 0).any() or np.abs(E.sum(axis=1) - 1.0).max() > 1e-12:
            raise MachineError("emission rows must be probability vectors")
        n = self.n_states
        if ((T < -1) | (T >= n)).any():
            raise MachineError("transition targets out of range")
        if ((E > 0) & (T < 0)).any():
            s, b = np.argwhere((E > 0) & (T < 0))[0]
            raise MachineError(f"state {s} emits symbol {b} with no successor (not unifilar)")
        if not is_strongly_connected(n, self.edges()):
            raise MachineError("machine is not strongly connected")

    @property
    def n_states(self) -> int:
        return self.emissions.shape[0]

    @property
    def k(self) -> int:
        return self.emissions.shape[1]

    def __len__(self) -> int:
        return self.n_states

    def __repr__(self) -> str:
        return f"CausalStateMachine(n_states={self.n_states}, alphabet={self.alphabet.symbols})"

    def edges(self) -> list[tuple[int, int]]:
        return [(int(s), int(self.transitions[s, b])) for s, b in np.argwhere(self.emissions > 0)]

    def is_unifilar(self) -> bool:
        """Every positive-probability emission has exactly one successor."""
        return not ((self.emissions > 0) & (self.transitions < 0)).any()

    def is_strongly_connected(self) -> bool:
        return is_strongly_connected(self.n_states, self.edges())

    def symbol_matrices(self) -> np.ndarray:
        """Array of shape (k, n, n): entry [b, s, t] = P(b | s) if T(s, b) = t."""
        n, k = self.n_states, self.k
        out = np.zeros((k, n, n))
        for s, b in np.argwhere(self.emissions > 0):
            out[b, s, self.transitions[s, b]] = self.emissions[s, b]
        return out

    def state_matrix(self) -> np.ndarray:
        return self.symbol_matrices().sum(axis=0)

    def stationary_distribution(self) -> np.ndarray:
        if self._pi is None:
            pi = stationary_vector(self.state_matrix())
            pi.setflags(write=False)
            self._pi = pi
        return self._pi

    def symbol_marginal(self) -> Distribution:
        p = self.stationary_distribution() @ self.emissions
        return Distribution(p / p.sum())

    def entropy_rate(self) -> float:
        """Entropy rate in bits per symbol."""
        E = self.emissions
        with np.errstate(divide="ignore", invalid="ignore"):
            h = -np.where(E > 0, E * np.log2(E), 0.0).sum(axis=1)
        return float(self.stationary_distribution() @ h)

    def word_probabilities(self, L: int) -> np.ndarray:
        """Probabilities of all k**L words, indexed lexicographically
        (oldest symbol most significant)."""
        if L < 0:
            raise ValueError("L must be nonnegative")
        mats = self.symbol_matrices()
        alpha = self.stationary_distribution()[None, :]
        for _ in range(L):
            alpha = np.einsum("ws,bst->wbt", alpha, mats).reshape(-1, self.n_states)
        return alpha.sum(axis=1)

    def word_distribution(self, L: int) -> dict[tuple[str, ...], float]:
        """Positive word probabilities keyed by tuples of symbols."""
        probs = self.word_probabilities(L)
        k, syms = self.k, self.alphabet.symbols
        out = {}
        for code in np.flatnonzero(probs > 0).tolist():
            word = []
            c = code
            for _ in range(L):
                c, r = divmod(c, k)
                word.append(syms[r])
            out[tuple(reversed(word))] = float(probs[code])
        return out

    def _encode_history(self, history) -> Word:
        if isinstance(history, (str, list, tuple)) and all(isinstance(x, str) for x in history):
            return self.alphabet.word(history)
        return tuple(int(x) for x in history)

    def epsilon_map(self, history) -> int | None:
        """State of a history, or None when it cannot be synchronized.

        With suffix sets, the state holding the longest suffix of the
        history.  Without them, the unique state consistent with the history
        when all states are taken as possible starting points.
        """
        h = self._encode_history(history)
        if self._index is not None:
            for start in range(max(0, len(h) - self.max_suffix_length), len(h) + 1):
                s = self._index.get(h[start:])
                if s is not None:
                    return s
            return None
        possible = set(range(self.n_states))
        for b in h:
            possible = {int(self.transitions[s, b]) for s in possible if self.emissions[s, b] > 0}
            if not possible:
                return None
        return possible.pop() if len(possible) == 1 else None

    def predict_next(self, history) -> Distribution:
        s = self.epsilon_map(history)
        if s is None:
            raise UnsynchronizedError(history, self.symbol_marginal())
        return Distribution(self.emissions[s])

    def step(self, state: int, symbol: int) -> int | None:
        t = int(self.transitions[state, symbol])
        return None if t < 0 or self.emissions[state, symbol] <= 0 else t

    def simulate(self, n: int, seed=None) -> np.ndarray:
        """Sample ``n`` symbols starting from a stationary-sampled state.

        ``seed`` is an int, a :class:`numpy.random.SeedSequence` or a
        :class:`numpy.random.Generator` (PCG64 by default).
        """
        if n < 0:
            raise ValueError("n must be nonnegative")
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        start = int(rng.choice(self.n_states, p=self.stationary_distribution()))
        u = rng.random(n)
        cum = np.cumsum(self.emissions, axis=1)
        for s in range(self.n_states):
            last = np.flatnonzero(self.emissions[s] > 0)[-1]
            cum[s, last:] = np.inf
        return _simulate_path(cum, np.asarray(self.transitions), start, u)

    def to_text(self) -> str:
        lines = ["# causal state machine", "alphabet: " + " ".join(self.alphabet.symbols)]
        syms = self.alphabet.symbols
        if self.suffixes is not None:
            for s, ws in enumerate(self.suffixes):
                words = " ".join(format_word([syms[i] for i in w]) for w in ws)
                lines.append(f"state {self.names[s]} {words}".rstrip())
        for s in range(self.n_states):
            for b in range(self.k):
                p = self.emissions[s, b]
                if p > 0:
                    lines.append(f"{self.names[s]} {syms[b]} {p:.17g} {self.names[self.transitions[s, b]]}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_spec(cls, spec: ProcessSpec) -> "CausalStateMachine":
        alpha = spec.alphabet
        idx = {name: i for i, name in enumerate(spec.states)}
        n = len(spec.states)
        E = np.zeros((n, alpha.size))
        T = np.full((n, alpha.size), -1, dtype=np.int64)
        for (src, sym), (p, dst) in spec.probability_table().items():
            E[idx[src], alpha.index(sym)] = float(p)
            T[idx[src], alpha.index(sym)] = idx[dst]
        for s, name in enumerate(spec.states):
            total = sum(p for (src, _), (p, _) in spec.probability_table().items() if src == name)
            if abs(float(total) - 1.0) > 1e-12:
                raise MachineError(f"probabilities out of state {name!r} sum to {float(total)}")
        suffixes = None
        if spec.suffixes and all(spec.suffixes.get(name) for name in spec.states):
            suffixes = [[alpha.word(w) for w in spec.suffixes[name]] for name in spec.states]
        return cls(alpha, E, T, suffixes=suffixes, names=spec.states)

    @classmethod
    def from_text(cls, text: str) -> "CausalStateMachine":
        return cls.from_spec(parse_spec(text))

    def save(self, path):
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path) -> "CausalStateMachine":
        return cls.from_text(Path(path).read_text())


def stationary_distribution(m: CausalStateMachine) -> np.ndarray:
    return m.stationary_distribution()


def word_distribution(m: CausalStateMachine, L: int) -> dict[tuple[str, ...], float]:
    return m.word_distribution(L)


def epsilon_map(m: CausalStateMachine, history) -> int | None:
    return m.epsilon_map(history)


def predict_next(m: CausalStateMachine, history) -> Distribution:
    return m.predict_next(history)


def simulate(m: CausalStateMachine, n: int, seed=None) -> np.ndarray:
    return m.simulate(n, seed)


def entropy_rate(m: CausalStateMachine) -> float:
    return m.entropy_rate()


def minimize(m: CausalStateMachine) -> CausalStateMachine:
    """Merge states with identical emission rows and successor blocks.

    Moore-style partition refinement iterated to a fixpoint; suffix sets of
    merged states are unioned.
    """
    n, k = m.n_states, m.k
    rows = [tuple(m.emissions[s].tolist()) for s in range(n)]
    block = {}
    labels = [block.setdefault(r, len(block)) for r in rows]
    while True:
        sig = {}
        new = []
        for s in range(n):
            succ = tuple(labels[m.transitions[s, b]] if m.emissions[s, b] > 0 else -1 for b in range(k))
            new.append(sig.setdefault((labels[s], succ), len(sig)))
        if len(sig) == len(set(labels)):
            break
        labels = new
    # renumber blocks by first member so the result is deterministic
    order = {}
    for s in range(n):
        order.setdefault(labels[s], len(order))
    nb = len(order)
    E = np.zeros((nb, k))
    T = np.full((nb, k), -1, dtype=np.int64)
    suffixes = [[] for _ in range(nb)] if m.suffixes is not None else None
    names = [None] * nb
    for s in range(n):
        c = order[labels[s]]
        if names[c] is None:
            names[c] = m.names[s]
            E[c] = m.emissions[s]
            for b in range(k):
                if m.emissions[s, b] > 0:
                    T[c, b] = order[labels[m.transitions[s, b]]]
        if suffixes is not None:
            suffixes[c].extend(m.suffixes[s])
    return CausalStateMachine(m.alphabet, E, T, suffixes=suffixes, names=names)
