"""Incremental Factor Oracle automaton.

States are ``0..n`` after ``n`` symbols. Each new symbol adds a spine
transition ``n-1 -> n``, then walks the suffix-link chain adding forward
transitions until a state already has one for the symbol (Allauzen,
Crochemore and Raffinot's online construction).
"""

from __future__ import annotations

import json
from typing import Iterable, Sequence


class OracleError(Exception):
    pass


class InvalidSymbol(OracleError):
    pass


class InvalidState(OracleError):
    pass


class FactorOracle:
    def __init__(self, alphabet: tuple[int, int] | None = None):
        self.alphabet = alphabet
        self.sigma: list[int] = []
        self.trans: list[dict[int, int]] = [{}]
        self.suffix_links: list[int] = [-1]

    @classmethod
    def build(cls, symbols: Iterable[int], alphabet: tuple[int, int] | None = None):
        fo = cls(alphabet)
        for s in symbols:
            fo.add_symbol(s)
        return fo

    @property
    def n(self) -> int:
        return len(self.sigma)

    def add_symbol(self, s: int) -> list[tuple[int, int]]:
        """Append ``s``; returns the new transitions as ``(source, symbol)`` pairs."""
        if not isinstance(s, int) or isinstance(s, bool):
            raise InvalidSymbol(f"symbol must be an integer, got {s!r}")
        if self.alphabet is not None and not self.alphabet[0] <= s <= self.alphabet[1]:
            lo, hi = self.alphabet
            raise InvalidSymbol(f"symbol {s} outside alphabet {lo}..{hi}")
        m = self.n
        new = m + 1
        self.sigma.append(s)
        self.trans.append({})
        self.trans[m][s] = new
        added = [(m, s)]
        k = self.suffix_links[m]
        while k > -1 and s not in self.trans[k]:
            self.trans[k][s] = new
            added.append((k, s))
            k = self.suffix_links[k]
        self.suffix_links.append(0 if k == -1 else self.trans[k][s])
        return added

    def _check(self, state: int) -> None:
        if not 0 <= state <= self.n:
            raise InvalidState(f"state {state} outside 0..{self.n}")

    def suffix(self, i: int) -> int:
        self._check(i)
        return self.suffix_links[i]

    def delta(self, k: int, s: int) -> int | None:
        self._check(k)
        return self.trans[k].get(s)

    def from_set(self, k: int) -> frozenset[int]:
        self._check(k)
        return frozenset(self.trans[k])

    def symbol(self, i: int) -> int:
        """The ``i``-th learned symbol, 1-based."""
        if not 1 <= i <= self.n:
            raise InvalidState(f"no symbol at position {i}")
        return self.sigma[i - 1]

    def is_factor(self, word: Sequence[int]) -> bool:
        state = 0
        for s in word:
            state = self.trans[state].get(s)
            if state is None:
                return False
        return True

    def records(self) -> list[dict]:
        return [
            {"state": i, "suffix": self.suffix_links[i],
             "outgoing": {str(s): t for s, t in sorted(self.trans[i].items())}}
            for i in range(self.n + 1)
        ]

    def dump(self) -> str:
        """Deterministic JSON Lines listing, one state per line."""
        return "".join(json.dumps(r, sort_keys=True, separators=(",", ":")) + "\n"
                       for r in self.records())

    def __eq__(self, other: object) -> bool:
        return (isinstance(other, FactorOracle) and self.sigma == other.sigma
                and self.trans == other.trans and self.suffix_links == other.suffix_links)

    def __repr__(self) -> str:
        return f"FactorOracle(n={self.n}, sigma={self.sigma})"
