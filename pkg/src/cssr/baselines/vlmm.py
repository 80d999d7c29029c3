"""Context-tree variable-length Markov model learner.

Every state of a VLMM is a single history suffix.  A context ``w`` is
replaced by its one-symbol-older extensions ``a + w`` whenever some
extension predicts differently from ``w`` itself.  Extensions are compared
with their parent only, never with other contexts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..machine import CausalStateMachine
from ..sequence import Alphabet, ParseTree, Word
from ..sources import markov_process
from ..stats import KS, Distribution, two_sample_test


@dataclass
class ContextTree:
    """Leaves of a complete suffix tree with their next-symbol distributions.

    ``contexts`` maps each context (oldest symbol first) to a probability
    vector.  ``observed`` records which contexts had their own data; the
    others inherited their parent's estimate.
    """

    k: int
    contexts: dict
    observed: dict

    def __len__(self) -> int:
        return len(self.contexts)

    @property
    def depth(self) -> int:
        return max(len(c) for c in self.contexts)

    def match(self, history: Word) -> Word:
        """The unique context that is a suffix of ``history``.

        ``history`` must be at least as long as the matched context.
        """
        history = tuple(history)
        for start in range(max(0, len(history) - self.depth), len(history) + 1):
            if history[start:] in self.contexts:
                return history[start:]
        raise LookupError(f"history {history} is too short to select a context")

    def predict(self, history: Word) -> Distribution:
        return Distribution(self.contexts[self.match(history)])

    def is_suffix_free(self) -> bool:
        ctx = set(self.contexts)
        return not any(c[i:] in ctx for c in ctx for i in range(1, len(c) + 1))

    def is_complete(self) -> bool:
        """Every history of length ``depth`` matches exactly one context."""
        D = self.depth
        for code in range(self.k ** D):
            h = tuple(int(d) for d in np.unravel_index(code, (self.k,) * D)) if D else ()
            if sum(h[i:] in self.contexts for i in range(D + 1)) != 1:
                return False
        return True


def vlmm_learn(tree: ParseTree, L_max: int, alpha: float = 1e-3, test_kind: str = KS,
               min_count: int = 1) -> ContextTree:
    """Fit a context tree with contexts of length at most ``L_max``.

    A context ``w`` is split into all of its one-symbol-older extensions when
    some extension with ``min_count`` or more observations rejects, at level
    ``alpha``, the hypothesis of sharing ``w``'s next-symbol distribution, or
    is itself split.  The tree is therefore the smallest one containing every
    significant child-versus-parent difference down to depth ``L_max``.
    Extensions with too little data keep the parent's estimate.
    """
    if L_max >= tree.depth:
        raise ValueError(f"parse tree only supports contexts up to length {tree.depth - 1}")
    root = tree.next_counts(())
    if root is None:
        raise ValueError("need at least two symbols of data")
    k = tree.k

    def grow(w, counts):
        # leaves below w as {context: (counts, observed)}, or None if w stays a leaf
        if len(w) == L_max:
            return None
        leaves, split = {}, False
        for a in range(k):
            child = (a,) + w
            c = tree.next_counts(child)
            if c is not None and c.sum() >= min_count:
                sub = grow(child, c)
                if sub is not None:
                    split = True
                    leaves.update(sub)
                else:
                    split = split or two_sample_test(c, counts, alpha, test_kind).reject
                    leaves[child] = (c, True)
            else:
                leaves[child] = (counts, False)
        return leaves if split else None

    leaves = grow((), root) or {(): (root, True)}
    contexts = {w: c / c.sum() for w, (c, _) in sorted(leaves.items())}
    observed = {w: own for w, (_, own) in sorted(leaves.items())}
    return ContextTree(k, contexts, observed)


def context_count(ct: ContextTree) -> int:
    return len(ct)


def vlmm_to_machine(ct: ContextTree, alphabet: Alphabet | None = None) -> CausalStateMachine:
    """Unifilar machine generating the same process as the VLMM.

    The VLMM is expanded to a Markov chain whose order is the longest context
    length, restricted to its recurrent part and minimized.
    """
    D = ct.depth
    kernel = np.empty((ct.k ** D, ct.k))
    for code in range(ct.k ** D):
        h = tuple(int(d) for d in np.unravel_index(code, (ct.k,) * D)) if D else ()
        kernel[code] = ct.contexts[ct.match(h)]
    return markov_process(D, kernel, alphabet)
