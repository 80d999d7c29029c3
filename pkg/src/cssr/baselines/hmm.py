"""Fully connected HMMs trained by Baum-Welch, with cross-validated size selection."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from ..machine import CausalStateMachine, stationary_vector
from ..sequence import Alphabet


@dataclass
class DenseHmm:
    """Hidden Markov model with emissions attached to states.

    ``transition`` is M x M, ``emission`` is M x k, ``initial`` has length M;
    all rows are probability vectors.  ``log_likelihoods`` records the
    training trace when the model came out of :func:`em_train`.
    """

    transition: np.ndarray
    emission: np.ndarray
    initial: np.ndarray
    log_likelihoods: tuple = field(default=(), repr=False)

    def __post_init__(self):
        self.transition = np.asarray(self.transition, dtype=float)
        self.emission = np.asarray(self.emission, dtype=float)
        self.initial = np.asarray(self.initial, dtype=float)
        M = self.transition.shape[0]
        if self.transition.shape != (M, M) or self.emission.shape[0] != M or self.initial.shape != (M,):
            raise ValueError("inconsistent HMM shapes")
        for name, arr in (("transition", self.transition), ("emission", self.emission)):
            if (arr < 0).any() or np.abs(arr.sum(axis=1) - 1).max() > 1e-12:
                raise ValueError(f"{name} rows must be probability vectors")
        if (self.initial < 0).any() or abs(self.initial.sum() - 1) > 1e-12:
            raise ValueError("initial distribution must be a probability vector")

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def k(self) -> int:
        return self.emission.shape[1]

    def stationary(self) -> np.ndarray:
        return stationary_vector(self.transition)

    def to_text(self, alphabet: Alphabet | None = None) -> str:
        """Text form: alphabet header, then ``initial``, ``transition <i>``
        and ``emission <i>`` rows of 17-digit probabilities."""
        alphabet = alphabet or Alphabet(tuple(str(i) for i in range(self.k)))
        fmt = lambda row: " ".join(f"{p:.17g}" for p in row)  # noqa: E731
        lines = ["# dense hmm", "alphabet: " + " ".join(alphabet.symbols), f"states: {self.n_states}",
                 "initial: " + fmt(self.initial)]
        lines += [f"transition {i}: " + fmt(r) for i, r in enumerate(self.transition)]
        lines += [f"emission {i}: " + fmt(r) for i, r in enumerate(self.emission)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "DenseHmm":
        fields = {}
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if line:
                key, _, value = line.partition(":")
                fields[key.strip()] = value.split()
        M = int(fields["states"][0])
        row = lambda key: [float(v) for v in fields[key]]  # noqa: E731
        return cls(np.array([row(f"transition {i}") for i in range(M)]),
                   np.array([row(f"emission {i}") for i in range(M)]),
                   np.array(row("initial")))


@numba.njit(cache=True)
def _forward(pi, A, B, obs):
    n = obs.shape[0]
    M = pi.shape[0]
    alpha = np.empty((n, M))
    scale = np.empty(n)
    for i in range(M):
        alpha[0, i] = pi[i] * B[i, obs[0]]
    for t in range(n):
        if t > 0:
            for j in range(M):
                acc = 0.0
                for i in range(M):
                    acc += alpha[t - 1, i] * A[i, j]
                alpha[t, j] = acc * B[j, obs[t]]
        c = 0.0
        for j in range(M):
            c += alpha[t, j]
        scale[t] = c
        if c <= 0.0:
            return alpha, scale, t
        for j in range(M):
            alpha[t, j] /= c
    return alpha, scale, -1


@numba.njit(cache=True)
def _backward_stats(A, B, obs, alpha, scale):
    n = obs.shape[0]
    M = A.shape[0]
    k = B.shape[1]
    beta = np.ones(M)
    nxt = np.empty(M)
    xi = np.zeros((M, M))
    emit = np.zeros((M, k))
    for j in range(M):
        emit[j, obs[n - 1]] += alpha[n - 1, j]
    for t in range(n - 2, -1, -1):
        o = obs[t + 1]
        for j in range(M):
            nxt[j] = B[j, o] * beta[j] / scale[t + 1]
        for i in range(M):
            acc = 0.0
            for j in range(M):
                w = A[i, j] * nxt[j]
                xi[i, j] += alpha[t, i] * w
                acc += w
            beta[i] = acc
        for i in range(M):
            emit[i, obs[t]] += alpha[t, i] * beta[i]
    gamma0 = alpha[0] * beta
    return xi, emit, gamma0


def log_likelihood(hmm: DenseHmm, seq) -> float:
    """Log-likelihood (nats) of a sequence under the model."""
    obs = np.asarray(seq, dtype=np.int64)
    _, scale, bad = _forward(hmm.initial, hmm.transition, hmm.emission, obs)
    if bad >= 0:
        return -math.inf
    return float(np.log(scale).sum())


def em_train(hmm: DenseHmm, seq, max_iters: int = 500, tol: float = 1e-6) -> DenseHmm:
    """Baum-Welch with scaled forward-backward passes.

    Stops when the per-symbol log-likelihood gain drops below ``tol`` or
    after ``max_iters`` iterations.  The log-likelihood is checked to be
    nondecreasing (within 1e-9 per symbol) at every iteration.

    Raises
    ------
    FloatingPointError
        If a forward pass underflows despite scaling.
    """
    obs = np.asarray(seq, dtype=np.int64)
    if obs.size == 0:
        raise ValueError("cannot train on an empty sequence")
    n = obs.size
    pi, A, B = hmm.initial.copy(), hmm.transition.copy(), hmm.emission.copy()
    trace = []
    for it in range(max_iters + 1):
        alpha, scale, bad = _forward(pi, A, B, obs)
        if bad >= 0:
            raise FloatingPointError(f"forward pass underflowed at step {bad} in iteration {it}")
        ll = float(np.log(scale).sum())
        if trace and ll / n < trace[-1] / n - 1e-9:
            raise RuntimeError(f"EM log-likelihood decreased at iteration {it}: {trace[-1]} -> {ll}")
        trace.append(ll)
        if len(trace) > 1 and (trace[-1] - trace[-2]) / n < tol:
            break
        if it == max_iters:
            break
        xi, emit, gamma0 = _backward_stats(A, B, obs, alpha, scale)
        rows = xi.sum(axis=1)
        used = rows > 0
        A[used] = xi[used] / rows[used, None]
        occ = emit.sum(axis=1)
        used = occ > 0
        B[used] = emit[used] / occ[used, None]
        pi = gamma0 / gamma0.sum()
    return DenseHmm(A, B, pi, tuple(trace))


def random_dense_hmm(M: int, k: int, rng, noise: float = 0.1) -> DenseHmm:
    """Fully connected HMM: uniform rows perturbed by up to ``noise``
    relative error, then renormalized."""
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)

    def rows(r, c):
        x = (1.0 + noise * rng.uniform(-1, 1, size=(r, c))) / c
        return x / x.sum(axis=1, keepdims=True)

    return DenseHmm(rows(M, M), rows(M, k), rows(1, M)[0])


@dataclass
class CrossValidation:
    model: DenseHmm
    n_states: int
    test_log_likelihood: dict
    train_log_likelihood: dict


def cross_validate(seq_train, seq_test, M_range=range(1, 11), restarts: int = 5, seed=0,
                   k: int | None = None, max_iters: int = 500, tol: float = 1e-6) -> CrossValidation:
    """Pick the HMM size with the best held-out log-likelihood.

    Every size in ``M_range`` is trained from ``restarts`` perturbed-uniform
    starts; the best training fit per size is scored on ``seq_test``.  Ties
    go to the smaller size.
    """
    M_range = list(M_range)
    if not M_range:
        raise ValueError("M_range is empty")
    train = np.asarray(seq_train, dtype=np.int64)
    test = np.asarray(seq_test, dtype=np.int64)
    if k is None:
        k = int(max(train.max(), test.max())) + 1
    entropy = seed.entropy if isinstance(seed, np.random.SeedSequence) else seed
    best_by_M, train_ll, test_ll = {}, {}, {}
    for M in M_range:
        best = None
        for r in range(restarts):
            rng = np.random.default_rng(np.random.SeedSequence(entropy, spawn_key=(M, r)))
            fitted = em_train(random_dense_hmm(M, k, rng), train, max_iters, tol)
            if best is None or fitted.log_likelihoods[-1] > best.log_likelihoods[-1]:
                best = fitted
        best_by_M[M] = best
        train_ll[M] = best.log_likelihoods[-1]
        test_ll[M] = log_likelihood(best, test)
    chosen = max(M_range, key=lambda M: (test_ll[M], -M))
    return CrossValidation(best_by_M[chosen], chosen, test_ll, train_ll)


def hmm_word_probabilities(hmm: DenseHmm, L: int, initial=None) -> np.ndarray:
    """Exact probabilities of all k**L words (lexicographic order), starting
    from the stationary distribution of the hidden chain by default."""
    pi = hmm.stationary() if initial is None else np.asarray(initial, dtype=float)
    if L == 0:
        return np.ones(1)
    B = hmm.emission
    alpha = pi[None, :] * B.T  # (k, M): first symbol
    for _ in range(L - 1):
        alpha = (alpha @ hmm.transition)[:, None, :] * B.T[None, :, :]
        alpha = alpha.reshape(-1, hmm.n_states)
    return alpha.sum(axis=1)


def hmm_word_distribution(hmm: DenseHmm, L: int, alphabet: Alphabet | None = None) -> dict:
    alphabet = alphabet or Alphabet(tuple(str(i) for i in range(hmm.k)))
    probs = hmm_word_probabilities(hmm, L)
    out = {}
    for code in np.flatnonzero(probs > 0).tolist():
        word, c = [], code
        for _ in range(L):
            c, r = divmod(c, hmm.k)
            word.append(alphabet.symbols[r])
        out[tuple(reversed(word))] = float(probs[code])
    return out


def machine_to_hmm(m: CausalStateMachine) -> DenseHmm:
    """State-emitting HMM equivalent to an edge-emitting machine.

    Hidden states are the (state, symbol) edges with positive probability,
    read as "just emitted symbol from state"; each emits its symbol.
    """
    edges = [(int(s), int(b)) for s, b in np.argwhere(m.emissions > 0)]
    pos = {e: i for i, e in enumerate(edges)}
    n = len(edges)
    A = np.zeros((n, n))
    B = np.zeros((n, m.k))
    for (s, b), i in pos.items():
        B[i, b] = 1.0
        t = int(m.transitions[s, b])
        for b2 in np.flatnonzero(m.emissions[t] > 0):
            A[i, pos[t, int(b2)]] = m.emissions[t, b2]
    pi = m.stationary_distribution()
    init = np.array([pi[s] * m.emissions[s, b] for s, b in edges])
    return DenseHmm(A, B, init / init.sum())
