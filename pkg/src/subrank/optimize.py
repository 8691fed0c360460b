"""Greedy, r-Split and ratio-greedy routines plus exhaustive reference solvers.

A set function here is anything with ``.n`` and ``__call__(mask)``.  Ties go
to the smallest element inside a run and to the smallest mask across runs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable

import numpy as np

from .errors import DomainError, SizeGuardError
from .lattice import (Restriction, SetFunctionTable, bit, elements_of, masks_of_size,
                      popcount, popcounts, restricted, submasks)

EXHAUSTIVE_MAX_N = 16
EXHAUSTIVE_CARD_MAX_N = 20


class MatroidOracle:
    """Independence oracle on ``[n]``: ``feasible(mask)``; must be downward closed."""

    def __init__(self, n: int, predicate: Callable[[int], bool], check: bool = False, seed: int = 0):
        self.n = n
        self._predicate = predicate
        if not predicate(0):
            raise ValueError("the empty set must be independent")
        if check:
            self._spot_check(seed)

    def feasible(self, S: int) -> bool:
        return bool(self._predicate(S))

    def __contains__(self, S: int) -> bool:
        return self.feasible(S)

    def contract(self, A: int, B: int) -> "MatroidOracle":
        """``{C over V - B : lift(C) | A independent}``."""
        R = Restriction(A, B, self.n)
        return ContractedMatroid(self, R)

    def _spot_check(self, seed: int, trials: int = 200):
        rng = np.random.default_rng(seed)
        for _ in range(trials):
            S = int(rng.integers(0, 1 << self.n))
            if not self.feasible(S):
                continue
            for e in elements_of(S):
                if not self.feasible(S & ~bit(e)):
                    raise ValueError("independence oracle is not downward closed")


class CardinalityMatroid(MatroidOracle):
    def __init__(self, n: int, m: int):
        if m < 0:
            raise ValueError("cardinality bound must be non-negative")
        self.m = m
        super().__init__(n, lambda S: popcount(S) <= m)

    def contract(self, A: int, B: int) -> "CardinalityMatroid":
        Restriction(A, B, self.n)  # validates A <= B
        return CardinalityMatroid(self.n - popcount(B), self.m - popcount(A))

    def __repr__(self):
        return f"CardinalityMatroid(n={self.n}, m={self.m})"


class ContractedMatroid(MatroidOracle):
    def __init__(self, base: MatroidOracle, restriction: Restriction):
        self.base = base
        self.restriction = restriction
        super().__init__(restriction.size, lambda C: base.feasible(restriction.lift(C)))


class PartitionMatroid(MatroidOracle):
    """At most ``caps[k]`` elements from block ``blocks[k]`` (blocks are masks)."""

    def __init__(self, n: int, blocks, caps):
        self.blocks = tuple(int(b) for b in blocks)
        self.caps = tuple(int(c) for c in caps)
        super().__init__(n, lambda S: all(popcount(S & b) <= c for b, c in zip(self.blocks, self.caps)))


@dataclass
class RunTrace:
    chosen: int
    value: float
    log: list = field(default_factory=list)     # (element, gain) or (element, ratio)
    subproblem: tuple | None = None             # (A, B) when found on a split
    algorithm: str = "greedy"
    extra: dict = field(default_factory=dict)

    @property
    def elements(self) -> list[int]:
        return elements_of(self.chosen)

    def to_dict(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "chosen": self.chosen,
            "elements": self.elements,
            "value": self.value,
            "log": [list(x) for x in self.log],
            "subproblem": list(self.subproblem) if self.subproblem else None,
            **self.extra,
        }


def _best(candidates):
    """Max value, then smallest mask."""
    return min(candidates, key=lambda t: (-t.value, t.chosen))


def seeded_greedy(f, M: MatroidOracle, seed: int = 0) -> RunTrace:
    """Add the best-gain feasible element until none is feasible, starting at ``seed``."""
    if not M.feasible(seed):
        raise DomainError("seed set is not independent")
    n = f.n
    S = seed
    cur = f(S)
    log = []
    while True:
        best_e, best_val = 0, -math.inf
        for e in range(1, n + 1):
            b = bit(e)
            if S & b or not M.feasible(S | b):
                continue
            val = f(S | b)
            if val > best_val:
                best_e, best_val = e, val
        if not best_e:
            break
        log.append((best_e, best_val - cur))
        S |= bit(best_e)
        cur = best_val
    return RunTrace(S, float(cur), log, algorithm="greedy" if seed == 0 else "seeded_greedy")


def greedy(f, M: MatroidOracle) -> RunTrace:
    return seeded_greedy(f, M, 0)


def best_seeded_greedy(f, M: MatroidOracle, r: int) -> RunTrace:
    """Seeded greedy from every independent ``r``-subset; best result wins."""
    runs = [seeded_greedy(f, M, s) for s in masks_of_size(f.n, r) if M.feasible(s)]
    return _best(runs or [greedy(f, M)])


def r_split(f, r: int, M: MatroidOracle, subroutine=greedy) -> RunTrace:
    """Run ``subroutine`` on every ``f_{A,B}`` with ``|B| = r`` and on ``f`` itself.

    Subproblems use the contracted constraint; splits with ``A`` dependent are
    skipped.  Candidates are compared by ``f`` on the lifted set.
    """
    n = f.n
    if not 0 <= r <= n:
        raise DomainError(f"split size r={r} outside 0..{n}")
    plain = subroutine(f, M)
    cands = [RunTrace(plain.chosen, float(f(plain.chosen)), plain.log, None, "r_split")]
    if r > 0:
        for B in masks_of_size(n, r):
            for A in submasks(B):
                if not M.feasible(A):
                    continue
                R = Restriction(A, B, n)
                sub = subroutine(restricted(f, A, B), M.contract(A, B))
                S = R.lift(sub.chosen)
                cands.append(RunTrace(S, float(f(S)), sub.log, (A, B), "r_split"))
    out = _best(cands)
    out.extra = {"r": r, "candidates": len(cands)}
    return out


# -- ratios -----------------------------------------------------------------------

def ratio_greedy(f, g) -> RunTrace:
    """Greedy for ``min f/g``; returns the best iterate ``S_i`` with ``i >= 1``."""
    n = f.n
    if g.n != n:
        raise ValueError("f and g disagree on n")
    S = 0
    R = [v for v in range(1, n + 1) if g(bit(v)) > 0]
    if not R:
        raise DomainError("g vanishes on every singleton; ratio undefined")
    log = []
    best = None
    while R:
        u, ru = 0, math.inf
        for v in R:
            T = S | bit(v)
            q = f(T) / g(T)
            if q < ru:
                u, ru = v, q
        S |= bit(u)
        log.append((u, ru))
        if best is None or ru < best[1]:
            best = (S, ru)
        R = [v for v in R if not S & bit(v) and g(S | bit(v)) > 0]
    chosen, ratio = best
    return RunTrace(chosen, float(ratio), log, algorithm="ratio_greedy",
                    extra={"f": float(f(chosen)), "g": float(g(chosen))})


def r_split_ratio(f, g, r: int, mode: str = "split-f") -> RunTrace:
    """Ratio greedy on every pair ``(f_{A,B}, g_{A,B})`` with ``|B| = r`` plus the plain pair.

    Both modes search the same candidates; ``mode`` only records which
    guarantee the caller intends to certify.
    """
    if mode not in ("split-f", "split-both"):
        raise ValueError(f"unknown mode {mode!r}")
    n = f.n
    if not 0 <= r <= n:
        raise DomainError(f"split size r={r} outside 0..{n}")
    plain = ratio_greedy(f, g)
    cands = [(plain.value, plain.chosen, None, plain.log)]
    if r > 0:
        for B in masks_of_size(n, r):
            for A in submasks(B):
                R = Restriction(A, B, n)
                if R.size == 0:
                    S = A
                    gs = g(S)
                    if gs > 0:
                        cands.append((f(S) / gs, S, (A, B), []))
                    continue
                try:
                    sub = ratio_greedy(restricted(f, A, B), restricted(g, A, B))
                except DomainError:
                    continue
                S = R.lift(sub.chosen)
                gs = g(S)
                if gs > 0:
                    cands.append((f(S) / gs, S, (A, B), sub.log))
    val, S, split, log = min(cands, key=lambda t: (t[0], t[1]))
    return RunTrace(S, float(val), log, split, "r_split_ratio",
                    extra={"r": r, "mode": mode, "candidates": len(cands),
                           "f": float(f(S)), "g": float(g(S))})


# -- exhaustive references ------------------------------------------------------------

def _all_values(f) -> np.ndarray:
    if isinstance(f, SetFunctionTable):
        return f.values
    return np.array([f(S) for S in range(1 << f.n)])


def exhaustive_max(f, M: MatroidOracle) -> RunTrace:
    """True constrained maximum; ties go to the smallest mask."""
    n = f.n
    if isinstance(M, CardinalityMatroid):
        if n > EXHAUSTIVE_CARD_MAX_N:
            raise SizeGuardError(f"exhaustive_max refused for n={n} > {EXHAUSTIVE_CARD_MAX_N}")
        if isinstance(f, SetFunctionTable):
            vals = f.values
            ok = popcounts(n) <= M.m
            idx = np.flatnonzero(ok)
            k = idx[int(np.argmax(vals[idx]))]
            return RunTrace(int(k), float(vals[k]), algorithm="exhaustive")
        best_S, best_v = 0, f(0)
        for size in range(1, min(M.m, n) + 1):
            for combo in combinations(range(n), size):
                S = sum(1 << i for i in combo)
                v = f(S)
                if v > best_v or (v == best_v and S < best_S):
                    best_S, best_v = S, v
        return RunTrace(best_S, float(best_v), algorithm="exhaustive")
    if n > EXHAUSTIVE_MAX_N:
        raise SizeGuardError(f"exhaustive_max refused for n={n} > {EXHAUSTIVE_MAX_N}")
    vals = _all_values(f)
    feas = np.array([M.feasible(S) for S in range(1 << n)])
    idx = np.flatnonzero(feas)
    k = idx[int(np.argmax(vals[idx]))]
    return RunTrace(int(k), float(vals[k]), algorithm="exhaustive")


def exhaustive_ratio_min(f, g) -> RunTrace:
    n = f.n
    if n > EXHAUSTIVE_MAX_N:
        raise SizeGuardError(f"exhaustive_ratio_min refused for n={n} > {EXHAUSTIVE_MAX_N}")
    fv, gv = _all_values(f), _all_values(g)
    ok = gv > 0
    ok[0] = False
    if not ok.any():
        raise DomainError("g is not positive on any nonempty set")
    idx = np.flatnonzero(ok)
    q = fv[idx] / gv[idx]
    k = idx[int(np.argmin(q))]
    return RunTrace(int(k), float(fv[k] / gv[k]), algorithm="exhaustive_ratio",
                    extra={"f": float(fv[k]), "g": float(gv[k])})
