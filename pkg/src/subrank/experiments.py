"""Experiment runners: cone volumes, metric curves, low-rank error curves and split studies.

Trial ``t`` of a run with master seed ``s`` draws from ``PCG64(s).jumped(t)``, so
each output row can be regenerated from its own ``seed`` and ``trial`` fields.
"""
from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import cones
from .approximation import ProjectionOptions, best_elementary_rank_r_approximation
from .errors import SizeGuardError
from .lattice import SetFunctionTable, is_monotone
from .metrics import (alpha_r, bound_bian, gamma_r, generalized_curvature,
                      submodularity_ratio)
from .objectives import CachedObjective, TableObjective, make_instance
from .optimize import CardinalityMatroid, exhaustive_max, greedy, r_split

VOLUME_MAX_N = 5
VOLUME_FAMILIES = ("supermodular-rank", "submodular-rank", "elementary-rank", "single-cone")


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed).jumped(trial))


# -- result container -----------------------------------------------------------

def _parse_cell(text: str):
    if text == "":
        return None
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    if text in ("True", "False"):
        return text == "True"
    return text


def _fmt_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclass
class ExperimentResult:
    name: str
    params: dict
    rows: list = field(default_factory=list)

    def columns(self) -> list[str]:
        cols: dict = {}
        for row in self.rows:
            for k in row:
                cols.setdefault(k, None)
        return list(cols)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = self.columns()
        w.writerow(cols)
        for row in self.rows:
            w.writerow([_fmt_cell(row.get(c)) for c in cols])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, name: str = "", params: dict | None = None) -> "ExperimentResult":
        r = csv.reader(io.StringIO(text))
        header = next(r)
        rows = [{k: _parse_cell(v) for k, v in zip(header, line)} for line in r]
        return cls(name, params or {}, rows)

    def to_json(self) -> str:
        return json.dumps({"name": self.name, "params": self.params, "rows": self.rows}, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentResult":
        d = json.loads(text)
        return cls(d["name"], d["params"], d["rows"])

    def column(self, key: str, **where) -> list:
        return [row[key] for row in self.rows if all(row.get(k) == v for k, v in where.items())]

    def summary(self, key: str, by: str) -> dict:
        """Mean and standard error of ``key`` grouped by ``by``."""
        groups: dict = {}
        for row in self.rows:
            if row.get(key) is None:
                continue
            groups.setdefault(row[by], []).append(row[key])
        out = {}
        for g, vals in groups.items():
            a = np.asarray(vals, dtype=float)
            se = float(a.std(ddof=1) / math.sqrt(a.size)) if a.size > 1 else 0.0
            out[g] = (float(a.mean()), se)
        return out


# -- volumes ------------------------------------------------------------------------

@dataclass(frozen=True)
class VolumeRequest:
    n: int
    family: str
    r: int = 1
    samples: int = 500_000
    seed: int = 0
    chunk: int = 50_000
    tol: float = 0.0

    def __post_init__(self):
        if self.family not in VOLUME_FAMILIES:
            raise ValueError(f"unknown volume family {self.family!r}")
        if not 2 <= self.n:
            raise ValueError("volumes need n >= 2")
        if self.n > VOLUME_MAX_N:
            raise SizeGuardError(f"volume sweeps refused for n={self.n} > {VOLUME_MAX_N}")
        if self.samples < 1 or self.chunk < 1:
            raise ValueError("samples and chunk must be positive")


@dataclass(frozen=True)
class VolumeEstimate:
    fraction: float
    stderr: float
    hits: int
    samples: int

    @classmethod
    def from_counts(cls, hits: int, samples: int) -> "VolumeEstimate":
        p = hits / samples
        return cls(p, math.sqrt(p * (1 - p) / samples), int(hits), int(samples))


def _chunks(n: int, samples: int, seed: int, chunk: int):
    """Standard-Gaussian sample blocks; block ``k`` comes from ``PCG64(seed).jumped(k)``."""
    done, k = 0, 0
    while done < samples:
        size = min(chunk, samples - done)
        yield trial_rng(seed, k).standard_normal((size, 1 << n))
        done += size
        k += 1


def volume_counts(n: int, samples: int = 500_000, seed: int = 0, chunk: int = 50_000,
                  tol: float = 0.0) -> dict:
    """Per-sample ranks for every family from one sign-pattern pass.

    Returns ``{family: array of counts}`` where entry ``r - 1`` counts samples of
    rank exactly ``r`` (single-cone holds one count: members).
    """
    if n > VOLUME_MAX_N:
        raise SizeGuardError(f"volume sweeps refused for n={n} > {VOLUME_MAX_N}")
    sup_cap = len(cones.canonical_sign_vectors(n))
    out = {"supermodular-rank": np.zeros(sup_cap + 1, dtype=np.int64),
           "submodular-rank": np.zeros(sup_cap + 1, dtype=np.int64),
           "elementary-rank": np.zeros(n, dtype=np.int64),
           "single-cone": np.zeros(1, dtype=np.int64)}
    everything = (1 << len(cones.pairs(n))) - 1
    for block in _chunks(n, samples, seed, chunk):
        geq, leq = cones.batch_pattern_bits(block, n, tol)
        sup = cones.batch_supermodular_rank(geq, leq, n)
        sub = cones.batch_supermodular_rank(leq, geq, n)
        elem = cones.batch_elementary_rank(leq, n)
        out["supermodular-rank"] += np.bincount(sup - 1, minlength=sup_cap + 1)[:sup_cap + 1]
        out["submodular-rank"] += np.bincount(sub - 1, minlength=sup_cap + 1)[:sup_cap + 1]
        out["elementary-rank"] += np.bincount(elem - 1, minlength=n)[:n]
        out["single-cone"][0] += int(np.count_nonzero(geq == everything))
    return out


def volume_estimate(req: VolumeRequest) -> VolumeEstimate:
    """Fraction of Gaussian tables whose rank in ``req.family`` is at most ``req.r``."""
    counts = volume_counts(req.n, req.samples, req.seed, req.chunk, req.tol)[req.family]
    hits = int(counts[0]) if req.family == "single-cone" else int(counts[:req.r].sum())
    return VolumeEstimate.from_counts(hits, req.samples)


def volume_table(n: int, samples: int = 500_000, seed: int = 0, chunk: int = 50_000) -> ExperimentResult:
    t0 = time.perf_counter()
    counts = volume_counts(n, samples, seed, chunk)
    elapsed = time.perf_counter() - t0
    res = ExperimentResult("volume", {"n": n, "samples": samples, "seed": seed})
    for fam, c in counts.items():
        top = 1 if fam == "single-cone" else int(np.max(np.flatnonzero(c), initial=0)) + 1
        for r in range(1, top + 1):
            hits = int(c[0]) if fam == "single-cone" else int(c[:r].sum())
            est = VolumeEstimate.from_counts(hits, samples)
            res.rows.append({"n": n, "family": fam, "r": r, "samples": samples, "seed": seed,
                             "hits": hits, "fraction": est.fraction, "stderr": est.stderr,
                             "seconds": elapsed})
    return res


def volume_bound(n: int) -> float:
    return 0.85 ** (1 << n)


def volume_bound_check(n: int, measured: float, stderr: float = 0.0) -> bool:
    """Single-cone volume against ``0.85 ** (2 ** n)`` with a 3 s.e. allowance."""
    return measured <= volume_bound(n) + 3 * stderr


# -- metric / approximation curves -----------------------------------------------------

def _table_instance(family: str, n: int, rng, preset: str) -> SetFunctionTable:
    inst = make_instance(family, n, rng, preset)
    return inst if isinstance(inst, SetFunctionTable) else inst.table()


def run_metric_curves(family: str, n: int, r_max: int = 4, trials: int = 5, seed: int = 0) -> ExperimentResult:
    """``alpha_r``, ``gamma_r`` and the greedy guarantee they certify, for ``r = 0..r_max``."""
    if n > 8:
        raise SizeGuardError(f"metric curves refused for n={n} > 8")
    res = ExperimentResult("metric_curves", {"family": family, "n": n, "r_max": r_max,
                                             "trials": trials, "seed": seed})
    for t in range(trials):
        f = _table_instance(family, n, trial_rng(seed, t), "curves")
        for r in range(r_max + 1):
            t0 = time.perf_counter()
            a, g = alpha_r(f, r), gamma_r(f, r)
            res.rows.append({"family": family, "n": n, "seed": seed, "trial": t, "r": r,
                             "alpha_r": a, "gamma_r": g, "bound": bound_bian(a, g),
                             "seconds": time.perf_counter() - t0})
    return res


def run_approx_curves(family: str, n: int, trials: int = 5, seed: int = 0,
                      opts: ProjectionOptions | None = None) -> ExperimentResult:
    """Relative error of the best elementary rank ``r+1`` approximation, ``r = 0..n-1``."""
    if n > 8:
        raise SizeGuardError(f"approximation curves refused for n={n} > 8")
    opts = opts or ProjectionOptions()
    res = ExperimentResult("approx_curves", {"family": family, "n": n, "trials": trials, "seed": seed})
    for t in range(trials):
        f = _table_instance(family, n, trial_rng(seed, t), "approx")
        for r in range(n):
            t0 = time.perf_counter()
            out = best_elementary_rank_r_approximation(f, r, opts)
            res.rows.append({"family": family, "n": n, "seed": seed, "trial": t, "r": r,
                             "B": out.B, "rel_error": out.rel_error, "converged": out.converged,
                             "iterations": out.iterations, "seconds": time.perf_counter() - t0})
    return res


# -- split study -------------------------------------------------------------------------

def _oracle(family: str, n: int, rng, preset: str):
    inst = make_instance(family, n, rng, preset)
    if isinstance(inst, SetFunctionTable):
        inst = TableObjective(inst, family)
    return CachedObjective(inst)


def run_split_study(family: str, n: int, m: int, r_list=(1, 2, 3), trials: int = 5, seed: int = 0,
                    preset: str | None = None, with_opt: bool | None = None) -> ExperimentResult:
    """Greedy vs r-Split greedy under ``|S| <= m``.

    OPT is exhaustive when ``n <= 20`` and ``m <= 10``; the Bian guarantee is
    attached only when ``n <= 12`` so that exact metrics are available.
    """
    preset = preset or ("split" if n <= 20 else "large")
    if with_opt is None:
        with_opt = n <= 20 and m <= 10
    elif with_opt and not (n <= 20 and m <= 10):
        raise SizeGuardError("exhaustive OPT needs n <= 20 and m <= 10")
    res = ExperimentResult("split_study", {"family": family, "n": n, "m": m, "r_list": list(r_list),
                                           "trials": trials, "seed": seed, "preset": preset})
    M = CardinalityMatroid(n, m)
    for t in range(trials):
        f = _oracle(family, n, trial_rng(seed, t), preset)
        t0 = time.perf_counter()
        base = greedy(f, M)
        opt = exhaustive_max(f, M).value if with_opt else None
        bound = None
        if n <= 12:
            tab = f.table()
            if is_monotone(tab):
                bound = bound_bian(generalized_curvature(tab), submodularity_ratio(tab))
        common = {"family": family, "n": n, "m": m, "seed": seed, "trial": t, "preset": preset,
                  "opt": opt, "bound_bian": bound}
        res.rows.append({**common, "algorithm": "greedy", "r": 0, "value": base.value,
                         "chosen": base.chosen,
                         "ratio": base.value / opt if opt else None,
                         "found_opt": (base.value >= opt * (1 - 1e-12)) if opt is not None else None,
                         "seconds": time.perf_counter() - t0})
        for r in r_list:
            t1 = time.perf_counter()
            tr = r_split(f, r, M)
            res.rows.append({**common, "algorithm": "r_split", "r": r, "value": tr.value,
                             "chosen": tr.chosen,
                             "ratio": tr.value / opt if opt else None,
                             "found_opt": (tr.value >= opt * (1 - 1e-12)) if opt is not None else None,
                             "seconds": time.perf_counter() - t1})
    return res
