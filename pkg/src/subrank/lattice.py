"""Subsets of a ground set as bitmasks, and dense set-function tables.

Element ``k`` of the ground set ``{1, ..., n}`` is bit ``k - 1`` of a mask, so
the table index of a subset is its mask value.  Everything here is pure; a
``SetFunctionTable`` never changes after construction.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import DomainError

MAX_N = 24


def check_n(n: int, *, allow_empty: bool = False) -> int:
    lo = 0 if allow_empty else 1
    if not isinstance(n, (int, np.integer)) or not lo <= n <= MAX_N:
        raise ValueError(f"ground-set size must be an integer in [{lo}, {MAX_N}], got {n!r}")
    return int(n)


def bit(e: int) -> int:
    """Mask of the singleton ``{e}`` (elements are 1-based)."""
    return 1 << (e - 1)


def mask_of(elements: Iterable[int]) -> int:
    m = 0
    for e in elements:
        if e < 1:
            raise ValueError(f"elements are 1-based, got {e}")
        m |= bit(e)
    return m


def elements_of(mask: int) -> list[int]:
    out = []
    k = 1
    while mask:
        if mask & 1:
            out.append(k)
        mask >>= 1
        k += 1
    return out


def popcount(mask: int) -> int:
    return int(mask).bit_count()


@lru_cache(maxsize=None)
def popcounts(n: int) -> np.ndarray:
    """``popcounts(n)[mask] == |mask|`` for every mask over ``n`` elements."""
    pc = np.zeros(1 << n, dtype=np.int64)
    for k in range(n):
        pc[1 << k: 1 << (k + 1)] = pc[: 1 << k] + 1
    pc.flags.writeable = False
    return pc


@lru_cache(maxsize=None)
def bit_matrix(n: int) -> np.ndarray:
    """Boolean ``(2**n, n)`` matrix; entry ``[mask, k]`` says element ``k+1`` is in ``mask``."""
    masks = np.arange(1 << n, dtype=np.int64)
    bits = ((masks[:, None] >> np.arange(n)) & 1).astype(bool)
    bits.flags.writeable = False
    return bits


def masks_of_size(n: int, k: int) -> list[int]:
    """All ``k``-subsets of ``[n]`` as masks, ascending."""
    return sorted(mask_of(c) for c in combinations(range(1, n + 1), k))


def submasks(mask: int):
    """Yield every submask of ``mask`` in ascending order."""
    subs = [0]
    for e in elements_of(mask):
        b = bit(e)
        subs += [s | b for s in subs]
    yield from sorted(subs)


@dataclass(frozen=True)
class GroundSet:
    """The ground set ``{1, ..., n}`` with ``1 <= n <= 24``."""

    n: int

    def __post_init__(self):
        check_n(self.n)

    @property
    def full_mask(self) -> int:
        return (1 << self.n) - 1

    @property
    def size(self) -> int:
        return 1 << self.n

    def contains(self, mask: int) -> bool:
        return 0 <= mask < self.size

    def masks(self) -> range:
        return range(self.size)


class SetFunctionTable:
    """Dense table of ``2**n`` finite reals, ``values[mask] = f(S(mask))``.

    Tables on the empty ground set (``n = 0``) only arise as restrictions that
    fix every element; user-facing constructors go through ``GroundSet``.
    """

    __slots__ = ("_n", "_values")

    def __init__(self, n: int, values):
        n = check_n(n, allow_empty=True)
        arr = np.array(values, dtype=np.float64)
        if arr.shape != (1 << n,):
            raise ValueError(f"expected {1 << n} values for n={n}, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("set-function values must be finite")
        arr.flags.writeable = False
        self._n = n
        self._values = arr

    @classmethod
    def from_callable(cls, n: int, fn: Callable[[int], float]) -> "SetFunctionTable":
        """Materialize ``fn(mask)`` for every mask."""
        n = check_n(n, allow_empty=True)
        return cls(n, [fn(m) for m in range(1 << n)])

    @property
    def n(self) -> int:
        return self._n

    @property
    def values(self) -> np.ndarray:
        return self._values

    def __len__(self):
        return self._values.shape[0]

    def __call__(self, mask: int) -> float:
        if not 0 <= mask < self._values.shape[0]:
            raise DomainError(f"mask {mask} out of range for n={self._n}")
        return float(self._values[mask])

    def __eq__(self, other):
        if not isinstance(other, SetFunctionTable):
            return NotImplemented
        return self._n == other._n and np.array_equal(self._values, other._values)

    def __hash__(self):
        return hash((self._n, self._values.tobytes()))

    def __repr__(self):
        return f"SetFunctionTable(n={self._n}, values={self._values.tolist()!r})"

    def _coerce(self, other):
        if isinstance(other, SetFunctionTable):
            if other._n != self._n:
                raise ValueError("set functions live on different ground sets")
            return other._values
        return float(other)

    def __add__(self, other):
        return SetFunctionTable(self._n, self._values + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return SetFunctionTable(self._n, self._values - self._coerce(other))

    def __rsub__(self, other):
        return SetFunctionTable(self._n, self._coerce(other) - self._values)

    def __neg__(self):
        return SetFunctionTable(self._n, -self._values)

    def __mul__(self, scalar):
        return SetFunctionTable(self._n, self._values * float(scalar))

    __rmul__ = __mul__

    def normalized(self) -> "SetFunctionTable":
        """Shift so that ``f(empty) = 0``."""
        return SetFunctionTable(self._n, self._values - self._values[0])

    def to_dict(self) -> dict:
        return {"n": self._n, "values": self._values.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "SetFunctionTable":
        return cls(int(data["n"]), data["values"])


def eval(f: SetFunctionTable, S: int) -> float:  # noqa: A001 - operation name
    """Value of ``f`` at the subset with mask ``S``."""
    return f(S)


def discrete_derivative(f, e: int, S: int) -> float:
    """``f(S | {e}) - f(S)``; zero when ``e`` is already in ``S``."""
    if not 1 <= e <= f.n:
        raise DomainError(f"element {e} not in ground set of size {f.n}")
    b = bit(e)
    if S & b:
        # still range-check S
        f(S)
        return 0.0
    return f(S | b) - f(S)


def marginal_gains(f: SetFunctionTable, e: int) -> np.ndarray:
    """Vector ``d[mask] = f(mask | {e}) - f(mask)`` over all masks (zero where ``e`` is in mask)."""
    v = f.values
    b = bit(e)
    masks = np.arange(len(v))
    out = v[masks | b] - v
    return out


def _deposit(codes: np.ndarray, targets: Sequence[int]) -> np.ndarray:
    """Map bit ``k`` of each code onto bit ``targets[k] - 1`` of the result."""
    out = np.zeros_like(codes)
    for k, e in enumerate(targets):
        out |= ((codes >> k) & 1) << (e - 1)
    return out


@dataclass(frozen=True)
class Restriction:
    """The piece ``f_{A,B}`` of a set function on sets ``C`` with ``C & B == A``.

    Surviving elements (those outside ``B``) are renumbered ``1..n-|B|`` in
    increasing original order; ``free[k-1]`` is the original label of new
    element ``k``.
    """

    A: int
    B: int
    n: int

    def __post_init__(self):
        if self.A & ~self.B:
            raise ValueError(f"A={self.A:#b} is not a subset of B={self.B:#b}")
        if self.B >> self.n:
            raise DomainError(f"B={self.B:#b} lies outside a ground set of size {self.n}")

    @property
    def free(self) -> tuple[int, ...]:
        return tuple(e for e in range(1, self.n + 1) if not self.B & bit(e))

    @property
    def size(self) -> int:
        return self.n - popcount(self.B)

    def lift(self, C: int) -> int:
        """Original mask of ``C | A`` for a mask ``C`` over the surviving elements."""
        out = self.A
        for k, e in enumerate(self.free):
            if C >> k & 1:
                out |= bit(e)
        return out

    def lift_free(self, C: int) -> int:
        """Original mask of ``C`` alone (without ``A``)."""
        return self.lift(C) & ~self.A

    def lower(self, mask: int) -> int:
        """Inverse of ``lift_free`` on masks disjoint from ``B``."""
        out = 0
        for k, e in enumerate(self.free):
            if mask & bit(e):
                out |= 1 << k
        return out

    def index_map(self) -> np.ndarray:
        """``index_map()[C]`` is the original mask ``lift(C)``, for every ``C``."""
        codes = np.arange(1 << self.size, dtype=np.int64)
        return _deposit(codes, self.free) | self.A

    def apply(self, f: SetFunctionTable) -> SetFunctionTable:
        if f.n != self.n:
            raise ValueError("restriction and function disagree on n")
        return SetFunctionTable(self.size, f.values[self.index_map()])


def restrict(f: SetFunctionTable, A: int, B: int) -> SetFunctionTable:
    """Table ``g`` on ``V \\ B`` with ``g(C) = f(C | A)``; requires ``A`` subset of ``B``."""
    return Restriction(A, B, f.n).apply(f)


class RestrictedFunction:
    """Lazy ``f_{A,B}`` for oracle-backed functions too large to tabulate."""

    def __init__(self, base, A: int, B: int):
        self.base = base
        self.restriction = Restriction(A, B, base.n)
        self.n = self.restriction.size
        self._free_bits = [bit(e) for e in self.restriction.free]

    def __call__(self, C: int) -> float:
        out = self.restriction.A
        k = 0
        while C:
            if C & 1:
                out |= self._free_bits[k]
            C >>= 1
            k += 1
        return self.base(out)


def restricted(f, A: int, B: int):
    """``f_{A,B}``: eager for tables, lazy for anything else callable on masks."""
    if isinstance(f, SetFunctionTable):
        return restrict(f, A, B)
    return RestrictedFunction(f, A, B)


def is_monotone(f: SetFunctionTable, tol: float = 0.0) -> bool:
    """``f(S) <= f(S | {e}) + tol`` over all covers ``S < S | {e}``."""
    v = f.values
    masks = np.arange(len(v))
    for k in range(f.n):
        lo = masks[(masks >> k & 1) == 0]
        if np.any(v[lo] > v[lo | (1 << k)] + tol):
            return False
    return True


def is_normalized(f: SetFunctionTable) -> bool:
    return f.values[0] == 0.0


def is_positive(f: SetFunctionTable) -> bool:
    return bool(np.all(f.values[1:] > 0))


def modular_from_weights(w: Sequence[float], c0: float = 0.0) -> SetFunctionTable:
    """``f(S) = c0 + sum of w_k over k in S``."""
    w = np.asarray(w, dtype=np.float64)
    n = check_n(len(w))
    return SetFunctionTable(n, c0 + bit_matrix(n) @ w)


# -- file formats -------------------------------------------------------------

def dumps_json(f: SetFunctionTable) -> str:
    return json.dumps(f.to_dict())


def loads_json(text: str) -> SetFunctionTable:
    data = json.loads(text)
    GroundSet(int(data["n"]))
    return SetFunctionTable.from_dict(data)


def dumps_csv(f: SetFunctionTable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["mask", "value"])
    for m, val in enumerate(f.values.tolist()):
        w.writerow([m, repr(val)])
    return buf.getvalue()


def loads_csv(text: str) -> SetFunctionTable:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or [c.strip() for c in rows[0]] != ["mask", "value"]:
        raise ValueError("CSV set function must start with header 'mask,value'")
    body = [r for r in rows[1:] if r]
    masks = [int(r[0]) for r in body]
    if masks != list(range(len(masks))):
        raise ValueError("CSV masks must be ascending 0..2^n-1")
    size = len(masks)
    n = size.bit_length() - 1
    if size == 0 or size != 1 << n:
        raise ValueError(f"CSV holds {size} rows, not a power of two")
    GroundSet(n)
    return SetFunctionTable(n, [float(r[1]) for r in body])


def save(f: SetFunctionTable, path, fmt: str | None = None) -> None:
    path = Path(path)
    fmt = fmt or ("csv" if path.suffix.lower() == ".csv" else "json")
    text = dumps_csv(f) if fmt == "csv" else dumps_json(f)
    path.write_text(text)


def load(path) -> SetFunctionTable:
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".csv":
        return loads_csv(text)
    return loads_json(text)
