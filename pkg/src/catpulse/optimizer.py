"""One-dimensional maximization of the simulated fidelity over kappa_ex.

A 9-point log-spaced coarse scan locates the global maximum, then a
golden-section search in log(kappa_ex) refines it between the neighbouring
scan points.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .analytics import optimal_kappa_ex
from .errors import OptimizationError
from .model import SystemParams
from .protocol import TARGETS, simulate_cat
from .pulses import PulsePlan

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
COARSE_POINTS = 9


class NonUnimodalWarning(UserWarning):
    """The coarse scan found more than one local maximum."""


@dataclass
class SweepResult:
    """Every evaluated ``(kappa_ex, F)`` pair (sorted) and the best one.

    ``candidate`` is an analytic optimum to compare with and ``ratio`` is
    ``best_kappa_ex / candidate`` (both None when no candidate was given).
    """

    kappa_ex: np.ndarray
    fidelity: np.ndarray
    best_kappa_ex: float
    best_fidelity: float
    bracket: tuple[float, float]
    candidate: float | None = None
    ratio: float | None = None
    coarse_kappa_ex: np.ndarray = field(default_factory=lambda: np.zeros(0))
    warnings: list[str] = field(default_factory=list)

    @property
    def n_evaluations(self) -> int:
        return int(self.kappa_ex.size)

    @property
    def at_bracket_edge(self) -> bool:
        lo, hi = self.bracket
        return bool(np.isclose(self.best_kappa_ex, lo, rtol=1e-12) or np.isclose(self.best_kappa_ex, hi, rtol=1e-12))

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("kappa_ex", "fidelity", "coarse_kappa_ex"):
            d[key] = [float(v) for v in d[key]]
        d["bracket"] = [float(v) for v in self.bracket]
        d["n_evaluations"] = self.n_evaluations
        return d

    def to_json(self, path=None, **kwargs) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True, **kwargs)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text

    def to_csv(self, path):
        """Columns ``kappa_ex,fidelity`` in increasing kappa_ex."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["kappa_ex", "fidelity"])
            for k, f in zip(self.kappa_ex, self.fidelity):
                w.writerow([repr(float(k)), repr(float(f))])


def _local_maxima(values) -> int:
    v = np.asarray(values)
    count = 0
    for i in range(v.size):
        left = v[i - 1] if i > 0 else -np.inf
        right = v[i + 1] if i < v.size - 1 else -np.inf
        if v[i] > left and v[i] >= right:
            count += 1
    return count


def maximize_over_kappa_ex(objective: Callable[[float], float], bracket: tuple[float, float], rel_tol: float = 0.01,
                           candidate: float | None = None, threads: int = 1) -> SweepResult:
    """Maximize ``objective(kappa_ex)`` on ``bracket``.

    Parameters
    ----------
    objective : callable
        Must be reentrant when ``threads > 1`` (the coarse scan runs concurrently).
    bracket : (lo, hi)
        Search interval, ``0 < lo < hi``.
    rel_tol : float
        Golden-section stops once ``hi/lo - 1 <= rel_tol``.
    candidate : float, optional
        Analytic optimum stored for comparison.
    threads : int
        Workers for the coarse scan; refinement is sequential.

    Raises
    ------
    OptimizationError
        An objective evaluation failed; ``kappa_ex`` names the point.
    """
    lo, hi = map(float, bracket)
    if not 0 < lo < hi:
        raise ValueError(f"bracket must satisfy 0 < lo < hi, got {bracket}")
    if not rel_tol > 0:
        raise ValueError("rel_tol must be positive")
    cache: dict[float, float] = {}

    def evaluate(k):
        try:
            value = float(objective(k))
        except Exception as exc:
            raise OptimizationError(f"objective failed at kappa_ex = {k:.6g}: {exc}", k) from exc
        if not math.isfinite(value):
            raise OptimizationError(f"objective returned {value} at kappa_ex = {k:.6g}", k)
        return value

    coarse = np.exp(np.linspace(math.log(lo), math.log(hi), COARSE_POINTS))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            values = list(pool.map(evaluate, coarse))
    else:
        values = [evaluate(k) for k in coarse]
    cache.update(zip(coarse.tolist(), values))
    notes = []
    if _local_maxima(values) > 1:
        msg = f"coarse scan over {bracket} has {_local_maxima(values)} local maxima; refining around the global one"
        warnings.warn(msg, NonUnimodalWarning, stacklevel=2)
        notes.append(msg)

    i = int(np.argmax(values))
    a = math.log(coarse[max(i - 1, 0)])
    b = math.log(coarse[min(i + 1, coarse.size - 1)])
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc = evaluate(math.exp(c))
    fd = evaluate(math.exp(d))
    cache[math.exp(c)] = fc
    cache[math.exp(d)] = fd
    tol = math.log1p(rel_tol)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = evaluate(math.exp(c))
            cache[math.exp(c)] = fc
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = evaluate(math.exp(d))
            cache[math.exp(d)] = fd

    ks = np.array(sorted(cache))
    fs = np.array([cache[k] for k in ks])
    j = int(np.argmax(fs))
    best_k, best_f = float(ks[j]), float(fs[j])
    ratio = None if candidate is None else best_k / candidate
    return SweepResult(ks, fs, best_k, best_f, (lo, hi), candidate, ratio, coarse, notes)


def default_bracket(params: SystemParams) -> tuple[float, float]:
    """(0.1 kappa_in, 1e4 kappa_in)."""
    if params.kappa_in <= 0:
        raise ValueError("the default bracket is defined relative to kappa_in > 0")
    return 0.1 * params.kappa_in, 1e4 * params.kappa_in


def fidelity_objective(params: SystemParams, pulse: PulsePlan, target: str = "two-cat", **sim_options) -> Callable[[float], float]:
    """Closure ``kappa_ex -> F`` that re-derives the drives and simulates the protocol.

    The pulse keeps its length in units of ``1/kappa`` when it was built with
    ``kappa_tau``. The closure holds no mutable state, so concurrent calls are safe.
    """
    if target not in TARGETS:
        raise ValueError(f"target must be one of {TARGETS}, got {target!r}")

    def objective(kappa_ex: float) -> float:
        p = params.replace(kappa_ex=float(kappa_ex))
        return simulate_cat(p, pulse.rederive(p), target, **sim_options).fidelity

    return objective


def optimize_kappa_ex(params: SystemParams, pulse: PulsePlan, target: str = "two-cat", bracket=None,
                      rel_tol: float = 0.01, threads: int = 1, **sim_options) -> SweepResult:
    """Numerically optimal kappa_ex with the analytic candidate attached."""
    variant = "four-cat" if target == "four-cat" else "two-cat"
    candidate = optimal_kappa_ex(params, variant)
    bracket = default_bracket(params) if bracket is None else bracket
    objective = fidelity_objective(params, pulse, target, **sim_options)
    return maximize_over_kappa_ex(objective, bracket, rel_tol, candidate=candidate, threads=threads)
