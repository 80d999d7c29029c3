"""Causal-state splitting reconstruction.

Histories are tuples of symbol indices, oldest symbol first.  Phase II grows
suffixes at the old end (``a + x``); Phase III extends them at the new end
(``x + b``) to read off transitions.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .graph import recurrent_classes
from .machine import CausalStateMachine
from .sequence import Alphabet, ParseTree, Word, build_parse_tree
from .stats import KS, TEST_KINDS, Distribution, tv_distance, two_sample_test


@dataclass(frozen=True)
class CssrConfig:
    """Parameters of a reconstruction run.

    ``lmax`` is the longest history considered, ``alpha`` the size of every
    hypothesis test, ``test`` one of ``"ks"`` or ``"chi2"`` and ``min_count``
    the number of observed continuations a history needs before it is tested.
    """

    lmax: int
    alpha: float = 1e-3
    test: str = KS
    min_count: int = 1

    def __post_init__(self):
        if self.lmax < 0:
            raise ValueError("lmax must be nonnegative")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.test not in TEST_KINDS:
            raise ValueError(f"test must be one of {TEST_KINDS}")
        if self.min_count < 1:
            raise ValueError("min_count must be at least 1")


@dataclass
class Diagnostics:
    null_tests: int = 0
    null_rejections: int = 0
    joined_parent: int = 0
    moved: int = 0
    created: int = 0
    skipped: int = 0
    unassigned_parents: int = 0
    transient_states_removed: int = 0
    determinization_splits: int = 0
    dropped_transitions: int = 0
    created_at_lmax: list = field(default_factory=list)
    phase_seconds: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)


class SuffixState:
    """A working state: a set of suffixes and their summed next-symbol counts."""

    __slots__ = ("id", "suffixes", "counts")

    def __init__(self, sid: int, k: int):
        self.id = sid
        self.suffixes: dict[Word, None] = {}  # insertion-ordered set
        self.counts = np.zeros(k, dtype=np.int64)

    @property
    def distribution(self) -> Distribution:
        return Distribution.from_counts(self.counts)

    def __repr__(self) -> str:
        return f"SuffixState({self.id}, {list(self.suffixes)})"


class StateSet:
    """The partition of observed suffixes into states, with a suffix index.

    With ``validate`` set, every move re-checks the partition and count
    invariants (slow; meant for tests).
    """

    def __init__(self, tree: ParseTree, validate: bool = False):
        self.tree = tree
        self.validate = validate
        self.k = tree.k
        self.states: dict[int, SuffixState] = {}
        self.index: dict[Word, int] = {}
        self._next_id = 0

    def __len__(self) -> int:
        return len(self.states)

    def __iter__(self):
        return iter(list(self.states.values()))

    def __getitem__(self, sid: int) -> SuffixState:
        return self.states[sid]

    def new_state(self) -> SuffixState:
        s = SuffixState(self._next_id, self.k)
        self._next_id += 1
        self.states[s.id] = s
        return s

    def add(self, word: Word, sid: int):
        if word in self.index:
            raise ValueError(f"suffix {word} already assigned")
        s = self.states[sid]
        s.suffixes[word] = None
        counts = self.tree.next_counts_view(word)
        if counts is not None:
            s.counts += counts
        self.index[word] = sid

    def move(self, word: Word, sid: int):
        """Move a suffix to another state, re-estimating both; an emptied
        state is deleted and its id never reused."""
        old = self.states[self.index.pop(word)]
        del old.suffixes[word]
        counts = self.tree.next_counts_view(word)
        if counts is not None:
            old.counts -= counts
        if not old.suffixes:
            del self.states[old.id]
        self.add(word, sid)
        if self.validate:
            self.check()

    def remove_state(self, sid: int):
        for w in self.states.pop(sid).suffixes:
            del self.index[w]

    def lookup(self, word: Word) -> tuple[int | None, bool]:
        """State of the longest indexed suffix of ``word``; the flag says
        whether ``word`` itself is indexed."""
        for start in range(len(word) + 1):
            sid = self.index.get(word[start:])
            if sid is not None:
                return sid, start == 0
        return None, False

    def check(self):
        """Assert the partition and count invariants."""
        seen = {}
        for s in self.states.values():
            assert s.suffixes, f"empty state {s.id}"
            total = np.zeros(self.k, dtype=np.int64)
            for w in s.suffixes:
                assert w not in seen, f"suffix {w} in two states"
                seen[w] = s.id
                c = self.tree.next_counts_view(w)
                if c is not None:
                    total += c
            assert np.array_equal(total, s.counts), f"stale counts in state {s.id}"
        assert seen == self.index, "suffix index out of date"


def phase1_initialize(tree: ParseTree, validate: bool = False) -> StateSet:
    """One state holding only the empty suffix."""
    states = StateSet(tree, validate)
    states.add((), states.new_state().id)
    return states


def test_subroutine(states: StateSet, child_counts, child: Word, parent_sid: int,
                    config: CssrConfig, diag: Diagnostics | None = None) -> str:
    """Place ``child`` by testing its next-symbol counts.

    Returns ``"null"`` when it joins the parent's state, ``"moved"`` when the
    restricted alternative places it in another existing state (the one
    closest in total variation, ties to the lowest id), and ``"new"`` when a
    fresh state is created for it.
    """
    diag = diag if diag is not None else Diagnostics()
    parent = states[parent_sid]
    diag.null_tests += 1
    if not two_sample_test(child_counts, parent.counts, config.alpha, config.test).reject:
        states.add(child, parent_sid)
        diag.joined_parent += 1
        return "null"
    diag.null_rejections += 1
    p_child = Distribution.from_counts(child_counts)
    best = None
    for s in states:
        if s.id == parent_sid:
            continue
        if not two_sample_test(child_counts, s.counts, config.alpha, config.test).reject:
            key = (tv_distance(p_child, s.distribution), s.id)
            if best is None or key < best:
                best = key
    if best is not None:
        states.add(child, best[1])
        diag.moved += 1
        return "moved"
    states.add(child, states.new_state().id)
    diag.created += 1
    return "new"


def phase2_sufficiency(tree: ParseTree, config: CssrConfig, diag: Diagnostics | None = None,
                       validate: bool = False) -> StateSet:
    """Grow suffixes one symbol at a time, splitting states whenever a longer
    history predicts the next symbol significantly differently."""
    diag = diag if diag is not None else Diagnostics()
    if tree.depth < config.lmax + 1:
        raise ValueError(f"parse tree depth {tree.depth} too shallow for lmax={config.lmax}")
    states = phase1_initialize(tree, validate)
    k = tree.k
    for L in range(config.lmax):
        frontier = [(s.id, [x for x in s.suffixes if len(x) == L]) for s in states]
        assigned_parents = {x for _, xs in frontier for x in xs}
        diag.unassigned_parents += sum(1 for x in tree.histories(L) if x not in assigned_parents)
        for _, parents in frontier:
            for x in parents:
                for a in range(k):
                    child = (a,) + x
                    counts = tree.next_counts_view(child)
                    if counts is None or counts.sum() < config.min_count:
                        diag.skipped += 1
                        continue
                    if test_subroutine(states, counts, child, states.index[x], config, diag) == "new" \
                            and L + 1 == config.lmax:
                        diag.created_at_lmax.append(states.index[child])
    return states


def _successors(states: StateSet, s: SuffixState, b: int, exact_first: bool = False) -> list[tuple[Word, int]]:
    """Member suffixes of ``s`` observed to be followed by ``b``, with the
    state of each extension (its longest indexed suffix).

    With ``exact_first``, members whose extension is itself indexed take
    precedence and the truncated lookups are dropped whenever any exist.
    Truncation can discard the symbol that synchronizes a history, so the
    transient structure is read from exact extensions.
    """
    exact, approx = [], []
    tree = states.tree
    for x in s.suffixes:
        counts = tree.next_counts_view(x)
        if counts is None or counts[b] == 0:
            continue
        target, is_exact = states.lookup(x + (b,))
        if target is None:
            continue
        (exact if is_exact or not exact_first else approx).append((x, target))
    return exact if exact else approx


def _transition_edges(states: StateSet):
    ids = list(states.states)
    pos = {sid: i for i, sid in enumerate(ids)}
    edges = set()
    for s in states:
        for b in range(states.k):
            for _, t in _successors(states, s, b, exact_first=True):
                edges.add((pos[s.id], pos[t]))
    return ids, sorted(edges)


def remove_transients(states: StateSet, diag: Diagnostics | None = None) -> StateSet:
    """Keep only the recurrent part of the state-transition graph.

    If the graph has several closed classes, the one backed by the most
    observations is kept.
    """
    diag = diag if diag is not None else Diagnostics()
    ids, edges = _transition_edges(states)
    classes = recurrent_classes(len(ids), edges)
    if not classes:
        raise RuntimeError("no recurrent states: the transition map is malformed")
    if len(classes) > 1:
        diag.warnings.append(f"{len(classes)} closed classes found; keeping the best-supported one")
    keep = max(classes, key=lambda c: (sum(int(states[ids[i]].counts.sum()) for i in c), -min(c)))
    keep_ids = {ids[i] for i in keep}
    for sid in ids:
        if sid not in keep_ids:
            states.remove_state(sid)
            diag.transient_states_removed += 1
    return states


def phase3_determinize(states: StateSet, diag: Diagnostics | None = None) -> StateSet:
    """Split states until every (state, symbol) pair has a single successor.

    Members never seen followed by the splitting symbol carry no evidence
    about it; each joins the group of its longest suffix that does (the
    same inheritance used for unassigned histories).  The best-supported
    group stays in place and the others become new states.  After each
    split the scan restarts from the first state.
    """
    diag = diag if diag is not None else Diagnostics()
    tree = states.tree
    changed = True
    while changed:
        changed = False
        for s in states:
            for b in range(states.k):
                succ = _successors(states, s, b)
                groups: dict[int, list[Word]] = {}
                for x, t in succ:
                    groups.setdefault(t, []).append(x)
                if len(groups) < 2:
                    continue
                support = {t: sum(int(tree.next_counts_view(x).sum()) for x in xs) for t, xs in groups.items()}
                # first-seen order breaks support ties, so runs stay reproducible
                stay = max(groups, key=lambda t: support[t])
                group_of = {x: t for x, t in succ}
                for x in sorted((x for x in s.suffixes if x not in group_of), key=len):
                    t = next((group_of[x[i:]] for i in range(1, len(x) + 1) if x[i:] in group_of), stay)
                    group_of[x] = t
                    if t != stay:
                        groups[t].append(x)
                for t, members in groups.items():
                    if t == stay:
                        continue
                    new = states.new_state()
                    for y in members:
                        states.move(y, new.id)
                diag.determinization_splits += len(groups) - 1
                changed = True
                break
            if changed:
                break
    return states


def to_machine(states: StateSet, alphabet: Alphabet, diag: Diagnostics | None = None) -> CausalStateMachine:
    """Freeze a deterministic, recurrent state set into a machine.

    Symbols seen from a state but with no successor among the surviving
    states are dropped from its emission estimate.
    """
    diag = diag if diag is not None else Diagnostics()
    while True:
        ids = list(states.states)
        pos = {sid: i for i, sid in enumerate(ids)}
        n, k = len(ids), states.k
        E = np.zeros((n, k))
        T = np.full((n, k), -1, dtype=np.int64)
        dropped = 0
        for s in states:
            counts = s.counts.astype(float)
            for b in range(k):
                if counts[b] == 0:
                    continue
                succ = _successors(states, s, b)
                if succ:
                    T[pos[s.id], b] = pos[succ[0][1]]
                else:
                    counts[b] = 0
                    dropped += 1
            if counts.sum() > 0:
                E[pos[s.id]] = counts / counts.sum()
        diag.dropped_transitions += dropped
        edges = [(i, int(T[i, b])) for i in range(n) for b in range(k) if E[i, b] > 0]
        classes = recurrent_classes(n, edges)
        if len(classes) == 1 and len(classes[0]) == n and (E.sum(axis=1) > 0).all():
            break
        # dropping edges disconnected the machine; prune to the recurrent part and re-split
        remove_transients(states, diag)
        phase3_determinize(states, diag)
    suffixes = [list(states[sid].suffixes) for sid in ids]
    return CausalStateMachine(alphabet, E, T, suffixes=suffixes)


@dataclass
class CssrResult:
    machine: CausalStateMachine
    states: StateSet
    diagnostics: Diagnostics


def reconstruct(tree: ParseTree, config: CssrConfig, alphabet: Alphabet | None = None,
                validate: bool = False) -> CssrResult:
    """Run all three phases on a prebuilt parse tree.

    ``validate`` re-checks the state-set invariants after every move.
    """
    if alphabet is None:
        alphabet = Alphabet(tuple(str(i) for i in range(tree.k)))
    alphabet.check_inference()
    if tree.N < 2:
        raise ValueError("need at least two symbols of data")
    diag = Diagnostics()
    t0 = time.perf_counter()
    states = phase2_sufficiency(tree, config, diag, validate)
    t1 = time.perf_counter()
    remove_transients(states, diag)
    while True:
        marks = (diag.determinization_splits, diag.transient_states_removed)
        phase3_determinize(states, diag)
        remove_transients(states, diag)
        if marks == (diag.determinization_splits, diag.transient_states_removed):
            break
    machine = to_machine(states, alphabet, diag)
    t2 = time.perf_counter()
    diag.phase_seconds.update(sufficiency=t1 - t0, recursion=t2 - t1)
    alive = {s.id for s in states}
    if any(sid in alive for sid in diag.created_at_lmax):
        diag.warnings.append(
            f"states first distinguished at the longest history length {config.lmax} survive; "
            "longer histories may still be informative, consider a larger lmax"
        )
    return CssrResult(machine, states, diag)


def run_cssr(seq, config: CssrConfig, alphabet: Alphabet | None = None) -> CssrResult:
    """Reconstruct a causal-state machine from one or more encoded sequences.

    Parameters
    ----------
    seq : numpy.ndarray or list of numpy.ndarray
        Symbol indices.  Separate arrays are independent sequences.
    config : CssrConfig
    alphabet : Alphabet, optional
        Defaults to symbols named ``"0"``, ``"1"``, ... sized from the data.

    Returns
    -------
    CssrResult
        The machine, the final state set and run diagnostics.
    """
    seqs = [seq] if isinstance(seq, np.ndarray) and seq.ndim == 1 else list(seq)
    if alphabet is None:
        k = int(max(int(np.max(s)) for s in seqs if len(s))) + 1
        alphabet = Alphabet(tuple(str(i) for i in range(max(k, 2))))
    alphabet.check_inference()
    k = alphabet.size
    t0 = time.perf_counter()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        tree = build_parse_tree(seqs, config.lmax, k=k)
    t1 = time.perf_counter()
    result = reconstruct(tree, config, alphabet)
    diag = result.diagnostics
    diag.phase_seconds["parse_tree"] = t1 - t0
    diag.warnings.extend(str(w.message) for w in caught)
    if tree.N < 10 * k ** config.lmax:
        diag.warnings.append(f"only {tree.N} symbols for {k ** config.lmax} possible histories of length {config.lmax}")
    for w in caught:
        warnings.warn(w.message, stacklevel=2)
    return result
