"""Elementary imset inequalities and the cones they cut out.

For a pair ``i < j`` and a mask ``z`` avoiding both, the imset row is

    f(z) + f(z | {i,j}) - f(z | {i}) - f(z | {j})

and the pi-supermodular cone with sign vector ``tau`` asks ``tau_i tau_j * row >= 0``
on every row.  A pattern ``xi`` in ``{-1, 0, +1}`` per pair generalizes this;
Minkowski sums of such cones are again of this form, with ``xi`` zeroed where
the summands disagree.  The rank searches below rely on that fact and never
build a Minkowski sum explicitly.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations, product
from typing import Sequence

import numpy as np

from .errors import SizeGuardError
from .lattice import SetFunctionTable, bit, masks_of_size, restrict, submasks

DEFAULT_TOL = 1e-9
RANK_MAX_N = 6


@dataclass(frozen=True, order=True)
class PairIndex:
    i: int
    j: int

    def __post_init__(self):
        if not 1 <= self.i < self.j:
            raise ValueError(f"pair needs 1 <= i < j, got ({self.i}, {self.j})")

    def position(self, n: int) -> int:
        return pair_position(n, self.i, self.j)


@lru_cache(maxsize=None)
def pairs(n: int) -> tuple[PairIndex, ...]:
    """All pairs ``i < j`` of ``[n]`` in lexicographic order."""
    return tuple(PairIndex(i, j) for i, j in combinations(range(1, n + 1), 2))


def pair_position(n: int, i: int, j: int) -> int:
    if i > j:
        i, j = j, i
    if not 1 <= i < j <= n:
        raise ValueError(f"invalid pair ({i}, {j}) for n={n}")
    # pairs starting with 1..i-1 come first
    return (i - 1) * n - (i - 1) * i // 2 + (j - i - 1)


@dataclass(frozen=True)
class ImsetConstraint:
    """One signed row: ``orientation * (f(z) + f(zij) - f(zi) - f(zj)) >= 0``."""

    pair: PairIndex
    z: int
    orientation: int = 1

    @property
    def plus(self) -> tuple[int, int]:
        return self.z, self.z | bit(self.pair.i) | bit(self.pair.j)

    @property
    def minus(self) -> tuple[int, int]:
        return self.z | bit(self.pair.i), self.z | bit(self.pair.j)

    def value(self, f: SetFunctionTable) -> float:
        (a, b), (c, d) = self.plus, self.minus
        return f(a) + f(b) - f(c) - f(d)


@lru_cache(maxsize=None)
def _row_masks(n: int) -> np.ndarray:
    """``(npairs, 4, 2**(n-2))`` masks ``z, z|ij, z|i, z|j`` per pair, z ascending."""
    if n < 2:
        return np.zeros((0, 4, 0), dtype=np.int64)
    out = np.empty((len(pairs(n)), 4, 1 << (n - 2)), dtype=np.int64)
    all_masks = np.arange(1 << n, dtype=np.int64)
    for p, pr in enumerate(pairs(n)):
        bi, bj = bit(pr.i), bit(pr.j)
        z = all_masks[(all_masks & (bi | bj)) == 0]
        out[p] = (z, z | bi | bj, z | bi, z | bj)
    out.flags.writeable = False
    return out


def imset_rows(n: int, i: int, j: int) -> list[ImsetConstraint]:
    """The ``2**(n-2)`` rows of the ``(ij)`` elementary imset matrix, ascending in ``z``."""
    if i == j:
        raise ValueError("imset rows need two distinct elements")
    p = pair_position(n, i, j)
    pr = pairs(n)[p]
    return [ImsetConstraint(pr, int(z)) for z in _row_masks(n)[p, 0]]


def imset_matrix(n: int, i: int, j: int) -> np.ndarray:
    """Dense ``A^(ij)`` as a ``(2**(n-2), 2**n)`` integer matrix."""
    rows = _row_masks(n)[pair_position(n, i, j)]
    A = np.zeros((rows.shape[1], 1 << n), dtype=np.int64)
    r = np.arange(rows.shape[1])
    A[r, rows[0]] += 1
    A[r, rows[1]] += 1
    A[r, rows[2]] -= 1
    A[r, rows[3]] -= 1
    return A


def imset_values(f: SetFunctionTable) -> np.ndarray:
    """Row values for all pairs at once, shape ``(npairs, 2**(n-2))``."""
    rm = _row_masks(f.n)
    v = f.values
    return v[rm[:, 0]] + v[rm[:, 1]] - v[rm[:, 2]] - v[rm[:, 3]]


def imset_evaluate(f: SetFunctionTable, i: int, j: int) -> np.ndarray:
    """Values of the ``(ij)`` imset rows of ``f``."""
    if i == j:
        raise ValueError("imset rows need two distinct elements")
    return imset_values(f)[pair_position(f.n, i, j)]


# -- sign vectors and xi patterns --------------------------------------------

@dataclass(frozen=True)
class SignVector:
    """``tau`` in ``{+1,-1}^n``, stored with ``tau_1 = +1`` (a global flip gives the same cone)."""

    taus: tuple[int, ...]

    def __post_init__(self):
        t = tuple(int(x) for x in self.taus)
        if not t or any(x not in (1, -1) for x in t):
            raise ValueError(f"sign vector entries must be +1/-1, got {self.taus!r}")
        if t[0] == -1:
            t = tuple(-x for x in t)
        object.__setattr__(self, "taus", t)

    @property
    def n(self) -> int:
        return len(self.taus)

    def xi(self) -> "XiPattern":
        return XiPattern(self.n, tuple(self.taus[p.i - 1] * self.taus[p.j - 1] for p in pairs(self.n)))

    @classmethod
    def parse(cls, text: str) -> "SignVector":
        return cls(tuple(int(t) for t in text.replace(" ", "").split(",")))


@lru_cache(maxsize=None)
def canonical_sign_vectors(n: int) -> tuple[SignVector, ...]:
    """The ``2**(n-1)`` distinct cones; ``+1`` sorts before ``-1`` entrywise."""
    return tuple(SignVector((1,) + rest) for rest in product((1, -1), repeat=n - 1))


def elementary_sign_vector(n: int, i: int) -> SignVector:
    """Sign vector flipped only at ``i``."""
    return SignVector(tuple(-1 if k == i else 1 for k in range(1, n + 1)))


@dataclass(frozen=True)
class XiPattern:
    """Per-pair orientation in ``{-1, 0, +1}``; ``L_xi = {f : xi_ij * A^(ij) f >= 0}``."""

    n: int
    xi: tuple[int, ...]

    def __post_init__(self):
        x = tuple(int(v) for v in self.xi)
        if len(x) != len(pairs(self.n)):
            raise ValueError(f"xi needs {len(pairs(self.n))} entries for n={self.n}, got {len(x)}")
        if any(v not in (-1, 0, 1) for v in x):
            raise ValueError("xi entries must be -1, 0 or +1")
        object.__setattr__(self, "xi", x)

    @classmethod
    def zeros(cls, n: int) -> "XiPattern":
        return cls(n, (0,) * len(pairs(n)))

    @classmethod
    def supermodular(cls, n: int) -> "XiPattern":
        return cls(n, (1,) * len(pairs(n)))

    @classmethod
    def submodular(cls, n: int) -> "XiPattern":
        return cls(n, (-1,) * len(pairs(n)))

    @classmethod
    def from_pairs(cls, n: int, entries: dict) -> "XiPattern":
        """Build from ``{(i, j): sign}``; unlisted pairs get 0."""
        xi = [0] * len(pairs(n))
        for (i, j), s in entries.items():
            xi[pair_position(n, i, j)] = s
        return cls(n, tuple(xi))

    @classmethod
    def elementary_sum(cls, n: int, B: int) -> "XiPattern":
        """The cone ``-L_(1..1) + sum over i in B of the {i}-submodular cones``."""
        return cls(n, tuple(0 if (bit(p.i) | bit(p.j)) & B else -1 for p in pairs(n)))

    def __neg__(self) -> "XiPattern":
        return XiPattern(self.n, tuple(-v for v in self.xi))

    def __getitem__(self, ij) -> int:
        return self.xi[pair_position(self.n, *ij)]

    def as_array(self) -> np.ndarray:
        return np.array(self.xi, dtype=np.int64)

    def nonzero_pairs(self) -> list[PairIndex]:
        return [p for p, v in zip(pairs(self.n), self.xi) if v]

    def constraints(self) -> list[ImsetConstraint]:
        """All signed rows of ``L_xi``, pair-major, ``z`` ascending within a pair."""
        rm = _row_masks(self.n)
        return [ImsetConstraint(p, int(z), s)
                for k, (p, s) in enumerate(zip(pairs(self.n), self.xi)) if s
                for z in rm[k, 0]]


def xi_from_taus(taus: Sequence[SignVector]) -> XiPattern:
    """Facets shared by all the cones ``L_tau``: the pattern of their Minkowski sum."""
    taus = list(taus)
    if not taus:
        raise ValueError("need at least one sign vector")
    n = taus[0].n
    if any(t.n != n for t in taus):
        raise ValueError("sign vectors disagree on n")
    per = [t.xi().xi for t in taus]
    xi = tuple(col[0] if all(c == col[0] for c in col) else 0 for col in zip(*per))
    return XiPattern(n, xi)


# -- classification ------------------------------------------------------------

class PairClass(enum.Enum):
    ALL_GEQ = "all_geq"
    ALL_LEQ = "all_leq"
    ALL_EQ = "all_eq"
    MIXED = "mixed"


@dataclass(frozen=True)
class SignPattern:
    """Per-pair min/max row values and the sign class they imply at ``tol``."""

    n: int
    tol: float
    mins: np.ndarray
    maxs: np.ndarray

    @property
    def geq_ok(self) -> np.ndarray:
        return self.mins >= -self.tol

    @property
    def leq_ok(self) -> np.ndarray:
        return self.maxs <= self.tol

    @property
    def classes(self) -> list[PairClass]:
        out = []
        for g, l in zip(self.geq_ok, self.leq_ok):
            if g and l:
                out.append(PairClass.ALL_EQ)
            elif g:
                out.append(PairClass.ALL_GEQ)
            elif l:
                out.append(PairClass.ALL_LEQ)
            else:
                out.append(PairClass.MIXED)
        return out

    def by_pair(self) -> dict[tuple[int, int], PairClass]:
        return {(p.i, p.j): c for p, c in zip(pairs(self.n), self.classes)}

    def compatible(self, xi: XiPattern) -> bool:
        x = xi.as_array()
        return bool(np.all(((x != 1) | self.geq_ok) & ((x != -1) | self.leq_ok)))


def sign_pattern(f: SetFunctionTable, tol: float = DEFAULT_TOL) -> SignPattern:
    if tol < 0:
        raise ValueError("tol must be non-negative")
    vals = imset_values(f)
    if vals.shape[0] == 0:
        empty = np.zeros(0)
        return SignPattern(f.n, tol, empty, empty)
    return SignPattern(f.n, tol, vals.min(axis=1), vals.max(axis=1))


def cone_membership(f: SetFunctionTable, xi: XiPattern, tol: float = DEFAULT_TOL) -> bool:
    """Whether ``xi_ij * row >= -tol`` on every row of every pair with ``xi_ij != 0``."""
    if xi.n != f.n:
        raise ValueError("pattern and function disagree on n")
    return sign_pattern(f, tol).compatible(xi)


def witness_interior(xi: XiPattern) -> SetFunctionTable:
    """A point strictly inside ``L_xi`` on nonzero pairs and modular on the rest.

    Each nonzero pair contributes a function of ``(l_i, l_j)`` alone with row
    value ``2 * xi_ij``; such a term leaves every other pair's rows at zero.
    """
    n = xi.n
    masks = np.arange(1 << n, dtype=np.int64)
    vals = np.zeros(1 << n)
    for p, s in zip(pairs(n), xi.xi):
        if not s:
            continue
        li = (masks >> (p.i - 1)) & 1
        lj = (masks >> (p.j - 1)) & 1
        same = li == lj
        # xi=+1: c00=c11=1, c01=c10=0; xi=-1: the reverse
        vals += np.where(same, 1.0, 0.0) if s > 0 else np.where(same, 0.0, 1.0)
    return SetFunctionTable(n, vals)


# -- rank searches -------------------------------------------------------------

def _pair_bits(xi_rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    weights = np.int64(1) << np.arange(xi_rows.shape[1], dtype=np.int64)
    need_geq = ((xi_rows == 1) * weights).sum(axis=1).astype(np.int64)
    need_leq = ((xi_rows == -1) * weights).sum(axis=1).astype(np.int64)
    return need_geq, need_leq


@lru_cache(maxsize=None)
def _sum_candidates(n: int, r: int):
    """Distinct patterns of ``r``-fold sums of canonical cones.

    Returns ``(need_geq, need_leq, combos)`` where each candidate's pair-bit
    requirements sit in the first two arrays and ``combos[k]`` is the
    lexicographically first tuple of sign-vector indices producing it.
    """
    taus = canonical_sign_vectors(n)
    prods = np.array([t.xi().xi for t in taus], dtype=np.int64).reshape(len(taus), -1)
    idx = np.array(list(combinations(range(len(taus)), r)), dtype=np.int64)
    stack = prods[idx]                                        # (C, r, npairs)
    agree = np.all(stack == stack[:, :1, :], axis=1)
    xis = np.where(agree, stack[:, 0, :], 0)
    uniq, first = np.unique(xis, axis=0, return_index=True)
    order = np.argsort(first)
    uniq, first = uniq[order], first[order]
    need_geq, need_leq = _pair_bits(uniq)
    return need_geq, need_leq, [tuple(idx[k]) for k in first]


def _fits(geq_bits, leq_bits, need_geq, need_leq):
    """``(N, M)`` feasibility of M candidates for N patterns."""
    return (((need_geq[None, :] & ~geq_bits[:, None]) == 0)
            & ((need_leq[None, :] & ~leq_bits[:, None]) == 0))


def _pattern_bits(sp: SignPattern) -> tuple[int, int]:
    w = 1 << np.arange(len(sp.mins), dtype=np.int64)
    return int((sp.geq_ok * w).sum()), int((sp.leq_ok * w).sum())


def supermodular_rank(f: SetFunctionTable, tol: float = DEFAULT_TOL) -> tuple[int, list[SignVector]]:
    """Fewest pi-supermodular summands of ``f``, with a witnessing list of sign vectors.

    A candidate sum is feasible exactly when its pattern leaves mixed pairs free
    and agrees with the sign of every constrained pair.  Witness ties go to the
    lexicographically first tuple in ``canonical_sign_vectors`` order.
    """
    n = f.n
    if n > RANK_MAX_N:
        raise SizeGuardError(f"supermodular_rank is exhaustive; n={n} exceeds {RANK_MAX_N}")
    geq, leq = _pattern_bits(sign_pattern(f, tol))
    geq_a, leq_a = np.array([geq]), np.array([leq])
    taus = canonical_sign_vectors(n)
    r = 1
    while True:
        need_geq, need_leq, combos = _sum_candidates(n, r)
        ok = _fits(geq_a, leq_a, need_geq, need_leq)[0]
        if ok.any():
            k = int(np.argmax(ok))
            return r, [taus[c] for c in combos[k]]
        r += 1


def submodular_rank(f: SetFunctionTable, tol: float = DEFAULT_TOL) -> tuple[int, list[SignVector]]:
    """Fewest pi-submodular summands; the witnesses name cones ``-L_tau``."""
    return supermodular_rank(-f, tol)


@lru_cache(maxsize=None)
def _elementary_candidates(n: int, r: int):
    """``(B masks ascending, need_leq pair bits)`` for every ``|B| = r``."""
    Bs = np.array(masks_of_size(n, r), dtype=np.int64)
    xis = np.array([XiPattern.elementary_sum(n, int(B)).xi for B in Bs],
                   dtype=np.int64).reshape(len(Bs), -1)
    return Bs, _pair_bits(xis)[1]


def elementary_submodular_rank(f: SetFunctionTable, tol: float = DEFAULT_TOL) -> tuple[int, int]:
    """Smallest ``r+1`` such that some ``|B| = r`` splits ``f`` into submodular pieces.

    Returns ``(r + 1, B)`` with ``B`` the smallest mask among minimal witnesses.
    Pieces ``f_{A,B}`` are all submodular exactly when every pair avoiding
    ``B`` has only non-positive rows, which is what gets checked.
    """
    n = f.n
    _, leq = _pattern_bits(sign_pattern(f, tol))
    for r in range(n):
        Bs, need_leq = _elementary_candidates(n, r)
        ok = (need_leq & ~leq) == 0
        if ok.any():
            return r + 1, int(Bs[int(np.argmax(ok))])
    raise AssertionError("unreachable: |B| = n-1 leaves no constrained pair")


def restrictions_submodular(f: SetFunctionTable, B: int, tol: float = DEFAULT_TOL) -> bool:
    """Check every piece ``f_{A,B}`` against the submodular cone directly."""
    for A in submasks(B):
        g = restrict(f, A, B)
        if g.n >= 2 and not cone_membership(g, XiPattern.submodular(g.n), tol):
            return False
    return True


def max_rank_bounds(n: int) -> tuple[int, int]:
    """``(ceil(log2 n) + 1, n)``: the largest supermodular and elementary submodular ranks."""
    if n < 3:
        raise ValueError("maximum rank formulas hold for n >= 3")
    return math.ceil(math.log2(n)) + 1, n


def facet_rows(n: int, tau: SignVector) -> list[ImsetConstraint]:
    """All ``C(n,2) * 2**(n-2)`` signed rows cutting out ``L_tau``."""
    if tau.n != n:
        raise ValueError("sign vector length differs from n")
    return tau.xi().constraints()


# -- batched variants used by the volume estimator ------------------------------

def batch_pattern_bits(values: np.ndarray, n: int, tol: float = DEFAULT_TOL):
    """Pair bitmasks ``(geq_ok, leq_ok)`` for each row of a ``(N, 2**n)`` sample block."""
    rm = _row_masks(n)
    N = values.shape[0]
    geq = np.zeros(N, dtype=np.int64)
    leq = np.zeros(N, dtype=np.int64)
    for p in range(rm.shape[0]):
        rows = (values[:, rm[p, 0]] + values[:, rm[p, 1]]
                - values[:, rm[p, 2]] - values[:, rm[p, 3]])
        geq |= (rows.min(axis=1) >= -tol).astype(np.int64) << p
        leq |= (rows.max(axis=1) <= tol).astype(np.int64) << p
    return geq, leq


def batch_supermodular_rank(geq: np.ndarray, leq: np.ndarray, n: int, r_cap: int | None = None) -> np.ndarray:
    """Supermodular rank per sample from its pattern bits.

    Samples still undecided after ``r_cap`` get ``r_cap + 1``.
    """
    N = geq.shape[0]
    out = np.zeros(N, dtype=np.int64)
    todo = np.arange(N)
    r = 1
    cap = r_cap if r_cap is not None else len(canonical_sign_vectors(n))
    while todo.size and r <= cap:
        need_geq, need_leq, _ = _sum_candidates(n, r)
        block = max(1, (1 << 22) // max(1, len(need_geq)))
        hit = np.zeros(todo.size, dtype=bool)
        for s in range(0, todo.size, block):
            sl = todo[s:s + block]
            hit[s:s + block] = _fits(geq[sl], leq[sl], need_geq, need_leq).any(axis=1)
        out[todo[hit]] = r
        todo = todo[~hit]
        r += 1
    out[todo] = cap + 1
    return out


def batch_elementary_rank(leq: np.ndarray, n: int) -> np.ndarray:
    N = leq.shape[0]
    out = np.full(N, n, dtype=np.int64)
    todo = np.arange(N)
    for r in range(n):
        if not todo.size:
            break
        _, need_leq = _elementary_candidates(n, r)
        hit = ((need_leq[None, :] & ~leq[todo][:, None]) == 0).any(axis=1)
        out[todo[hit]] = r + 1
        todo = todo[~hit]
    return out
