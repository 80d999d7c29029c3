"""Independent reference computations used by several test modules."""

import itertools

import numpy as np


def eigen_stationary(machine):
    """Stationary distribution from the unit eigenvector of the state matrix."""
    P = np.zeros((machine.n_states, machine.n_states))
    for s in range(machine.n_states):
        for b in range(machine.k):
            if machine.emissions[s, b] > 0:
                P[s, machine.transitions[s, b]] += machine.emissions[s, b]
    w, v = np.linalg.eig(P.T)
    vec = np.real(v[:, np.argmin(np.abs(w - 1))])
    return vec / vec.sum()


def brute_force_words(machine, L):
    """P(w) for every word of length L, by following each start state's path."""
    pi = eigen_stationary(machine)
    out = {}
    for word in itertools.product(range(machine.k), repeat=L):
        total = 0.0
        for start in range(machine.n_states):
            p, s = float(pi[start]), start
            for b in word:
                p *= float(machine.emissions[s, b])
                if p == 0.0:
                    break
                s = int(machine.transitions[s, b])
            total += p
        out[word] = total
    return out
