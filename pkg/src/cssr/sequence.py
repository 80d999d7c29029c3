"""Alphabets, symbol sequences and the parse tree of word counts.

Every later stage of reconstruction queries the parse tree instead of the raw
data, so the tree is the only structure whose construction cost depends on the
sequence length.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

Word = tuple[int, ...]

# above this many possible words per length, fall back to sorting instead of a dense bincount
_DENSE_LIMIT = 1 << 22


class AlphabetError(ValueError):
    """Raised for degenerate or inconsistent alphabets."""


@dataclass(frozen=True)
class Alphabet:
    """An ordered set of distinct symbols.

    The ordering is fixed at construction; it defines the column order of all
    count vectors, the CDF ordering of the KS test and the order in which words
    are enumerated.
    """

    symbols: tuple[str, ...]
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        symbols = tuple(str(s) for s in self.symbols)
        if len(set(symbols)) != len(symbols):
            raise AlphabetError(f"duplicate symbols in alphabet {symbols!r}")
        if not symbols:
            raise AlphabetError("alphabet is empty")
        for s in symbols:
            if not s or s == "()" or any(c.isspace() or c in ",#" for c in s):
                raise AlphabetError(f"symbol {s!r} is empty, '()' or contains whitespace, ',' or '#'")
        object.__setattr__(self, "symbols", symbols)
        object.__setattr__(self, "_index", {s: i for i, s in enumerate(symbols)})

    @classmethod
    def infer(cls, tokens: Iterable[str]) -> "Alphabet":
        """Alphabet of the distinct tokens, sorted lexically."""
        return cls(tuple(sorted(set(tokens))))

    @property
    def size(self) -> int:
        return len(self.symbols)

    def __len__(self) -> int:
        return len(self.symbols)

    def __contains__(self, symbol) -> bool:
        return symbol in self._index

    def index(self, symbol: str) -> int:
        try:
            return self._index[symbol]
        except KeyError:
            raise AlphabetError(f"symbol {symbol!r} not in alphabet {self.symbols!r}") from None

    @property
    def single_char(self) -> bool:
        return all(len(s) == 1 for s in self.symbols)

    def encode(self, tokens: Iterable[str]) -> np.ndarray:
        return np.fromiter((self.index(t) for t in tokens), dtype=np.int64)

    def decode(self, data: Iterable[int]) -> list[str]:
        return [self.symbols[i] for i in data]

    def word(self, symbols: str | Sequence[str]) -> Word:
        """Convert a word given as a string (single-character alphabets) or a
        sequence of symbols into a tuple of symbol indices."""
        if isinstance(symbols, str):
            if symbols == "":
                return ()
            if not self.single_char:
                symbols = symbols.split()
        return tuple(self.index(s) for s in symbols)

    def spell(self, word: Word, sep: str = "") -> str:
        return sep.join(self.symbols[i] for i in word)

    def check_inference(self):
        """Reconstruction needs at least two symbols."""
        if self.size < 2:
            raise AlphabetError(f"alphabet {self.symbols!r} has fewer than two symbols")


def parse_text(text: str, tokens: bool = False, alphabet: Alphabet | None = None):
    """Split text into sequences, one per nonblank line.

    Parameters
    ----------
    text : str
        Input data.
    tokens : bool
        If true, symbols are whitespace-separated tokens; otherwise every
        non-whitespace character is a symbol.
    alphabet : Alphabet, optional
        Declared alphabet.  Inferred from the data (sorted lexically) when
        omitted.

    Returns
    -------
    alphabet : Alphabet
    sequences : list of numpy.ndarray
        Encoded sequences.  Windows never span two lines.
    """
    lines = []
    for line in text.splitlines():
        syms = line.split() if tokens else [c for c in line if not c.isspace()]
        if syms:
            lines.append(syms)
    if not lines:
        raise ValueError("input contains no symbols")
    if alphabet is None:
        alphabet = Alphabet.infer(s for line in lines for s in line)
    return alphabet, [alphabet.encode(line) for line in lines]


def read_sequences(path, tokens: bool = False, alphabet: Alphabet | None = None):
    """Read a text file of sequences; see :func:`parse_text`."""
    return parse_text(Path(path).read_text(), tokens=tokens, alphabet=alphabet)


def max_safe_L(N: int, k: int) -> int:
    """Largest history length for which word-probability estimates are
    guaranteed to converge, using log k as the bound on the entropy rate.

    Equal to floor(log N / log k), computed in exact integer arithmetic.
    """
    if N < 1 or k < 2:
        raise ValueError("need N >= 1 and k >= 2")
    L, power = 0, k
    while power <= N:
        L += 1
        power *= k
    return L


def _window_codes(x: np.ndarray, length: int, k: int, prev: np.ndarray | None) -> np.ndarray:
    # base-k code of every window x[i:i+length], oldest symbol most significant
    if prev is None:
        return x.astype(np.int64, copy=True)
    return prev[:-1] * k + x[length - 1:]


def _decode(code: int, length: int, k: int) -> Word:
    out = [0] * length
    for i in range(length - 1, -1, -1):
        code, out[i] = divmod(code, k)
    return tuple(out)


class ParseTree:
    """Occurrence counts of every word of length at most ``depth``.

    Counts are over overlapping windows; each input sequence contributes its
    own windows and no window crosses from one sequence into the next.
    Words that never occur are simply absent.

    Parameters
    ----------
    sequences : array or list of arrays
        Encoded symbol sequences.
    k : int
        Alphabet size.
    depth : int
        Longest word length counted (``L_max + 1`` for reconstruction).
    """

    def __init__(self, sequences, k: int, depth: int):
        if isinstance(sequences, np.ndarray) and sequences.ndim == 1:
            sequences = [sequences]
        sequences = [np.asarray(s, dtype=np.int64) for s in sequences]
        if depth < 1:
            raise ValueError("depth must be at least 1")
        self.k = int(k)
        self.depth = int(depth)
        if self.k ** self.depth >= 1 << 62:
            raise ValueError("k ** depth too large for integer word codes")
        self.N = int(sum(len(s) for s in sequences))
        if self.N == 0:
            raise ValueError("cannot build a parse tree from an empty sequence")
        for s in sequences:
            if len(s) and (s.min() < 0 or s.max() >= self.k):
                raise ValueError("sequence contains indices outside the alphabet")
        self._counts: list[dict[Word, int]] = [{(): self.N}]
        self._next: dict[Word, np.ndarray] = {}
        self._lengths = [len(s) for s in sequences]
        self._build(sequences)
        self.check()

    def _build(self, sequences):
        k = self.k
        prev = [None] * len(sequences)
        for length in range(1, self.depth + 1):
            n_words = k ** length
            dense = n_words <= min(_DENSE_LIMIT, max(1 << 16, 4 * self.N))
            table = np.zeros(n_words, dtype=np.int64) if dense else {}
            for i, x in enumerate(sequences):
                if len(x) < length:
                    continue
                codes = _window_codes(x, length, k, prev[i])
                prev[i] = codes
                if dense:
                    table += np.bincount(codes, minlength=n_words)
                else:
                    uniq, cnt = np.unique(codes, return_counts=True)
                    for c, n in zip(uniq.tolist(), cnt.tolist()):
                        table[c] = table.get(c, 0) + n
            if dense:
                nz = np.flatnonzero(table)
                items = zip(nz.tolist(), table[nz].tolist())
            else:
                items = sorted(table.items())
            level = {}
            for code, n in items:
                level[_decode(code, length, k)] = n
            self._counts.append(level)
            # next-symbol vectors for words one shorter
            if dense:
                rows = table.reshape(-1, k)
                for r in np.flatnonzero(rows.sum(axis=1)).tolist():
                    self._next[_decode(r, length - 1, k)] = rows[r].copy()
            else:
                for w, n in level.items():
                    vec = self._next.setdefault(w[:-1], np.zeros(k, dtype=np.int64))
                    vec[w[-1]] += n

    def check(self):
        """Assert that no word is counted less often than its extensions and
        that each nonzero length holds one count per overlapping window."""
        for length, level in enumerate(self._counts[1:], start=1):
            windows = sum(max(0, n - length + 1) for n in self._lengths)
            if sum(level.values()) != windows:
                raise AssertionError(f"length-{length} counts do not sum to {windows}")
        for w, vec in self._next.items():
            if vec.sum() > self._counts[len(w)].get(w, 0):
                raise AssertionError(f"extensions of {w} outnumber the word itself")

    @property
    def max_length(self) -> int:
        return self.depth

    def count(self, word: Word) -> int:
        word = tuple(word)
        if len(word) > self.depth:
            raise ValueError(f"word longer than tree depth {self.depth}")
        return self._counts[len(word)].get(word, 0)

    def words(self, length: int) -> list[Word]:
        """Observed words of the given length, in lexicographic order."""
        return sorted(self._counts[length])

    def next_counts(self, history: Word) -> np.ndarray | None:
        """Counts of each symbol following ``history``, or None when the
        history was never followed by anything."""
        history = tuple(history)
        if len(history) >= self.depth:
            raise ValueError(f"history longer than {self.depth - 1}")
        vec = self._next.get(history)
        return None if vec is None else vec.copy()

    def next_counts_view(self, history: Word) -> np.ndarray | None:
        """Like :meth:`next_counts` but returns the stored array itself; callers must not modify it."""
        return self._next.get(history)

    def histories(self, length: int) -> list[Word]:
        """Histories of the given length with at least one observed successor."""
        return sorted(w for w in self._next if len(w) == length)

    def __len__(self) -> int:
        return sum(len(level) for level in self._counts)


def build_parse_tree(seq, L_max: int, k: int | None = None) -> ParseTree:
    """Count all words of length up to ``L_max + 1`` in one pass per length.

    ``seq`` is an encoded sequence or a list of them.  ``k`` defaults to one
    more than the largest symbol index present.  Emits a warning when
    ``L_max`` exceeds :func:`max_safe_L` for the data size.
    """
    if L_max < 0:
        raise ValueError("L_max must be nonnegative")
    seqs = [seq] if isinstance(seq, np.ndarray) and seq.ndim == 1 else list(seq)
    if k is None:
        k = int(max((int(np.max(s)) for s in seqs if len(s)), default=0)) + 1
    tree = ParseTree(seqs, k, L_max + 1)
    if k >= 2 and L_max > max_safe_L(tree.N, k):
        warnings.warn(
            f"L_max={L_max} exceeds the safe history length {max_safe_L(tree.N, k)} "
            f"for N={tree.N}, k={k}; word-probability estimates may not converge",
            stacklevel=2,
        )
    return tree


def conditional_counts(tree: ParseTree, history: Word) -> np.ndarray | None:
    """Per-symbol counts following ``history`` (None when unobserved)."""
    return tree.next_counts(history)
