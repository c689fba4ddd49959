"""Closed-form predictions used as oracles and optimization targets.

All functions take a :class:`~catpulse.model.SystemParams` so every rate is
read in one consistent unit.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.integrate import simpson

from .errors import InvalidRateError, UnboundedOptimumError
from .model import SystemParams

# g^2/(kappa |Delta|) above this makes the omega0 ~ 0 approximation questionable
OMEGA0_WARN_RATIO = 0.01
# tau below this multiple of tau_c is flagged as non-adiabatic
ADIABATIC_FACTOR = 10.0


class ValidityWarning(UserWarning):
    """An analytic approximation is used outside its regime."""


def mode_match(params: SystemParams) -> float:
    """M = (kappa_ex/kappa) * 2C/(1+2C)."""
    C = params.cooperativity
    purcell = 1.0 if math.isinf(C) else 2 * C / (1 + 2 * C)
    return params.kappa_ex / params.kappa * purcell


def f_min(alpha: complex, M: float) -> float:
    """Fidelity lower bound exp(-(1/M - 1)|alpha|^2)."""
    if not 0 < M <= 1:
        raise ValueError(f"mode-match factor must lie in (0, 1], got {M}")
    return math.exp(-(1.0 / M - 1.0) * abs(alpha) ** 2)


def no_jump_prefactor(alpha: complex, params: SystemParams) -> float:
    """Amplitude exp(-(1/M - 1)|alpha|^2 / 2) of the no-jump output state."""
    M = mode_match(params)
    return math.exp(-0.5 * (1.0 / M - 1.0) * abs(alpha) ** 2)


def optimal_kappa_ex(params: SystemParams, variant: str = "two-cat") -> float:
    """kappa_in sqrt(1 + 2 C_in) (two-cat) or the empirical kappa_in sqrt(1 + 3 C_in) (four-cat)."""
    if params.kappa_in == 0:
        raise UnboundedOptimumError("without internal loss the escape efficiency grows with kappa_ex forever")
    if params.gamma == 0:
        raise UnboundedOptimumError("without emitter decay the cooperativity never limits kappa_ex")
    factor = {"two-cat": 2.0, "four-cat": 3.0}.get(variant)
    if factor is None:
        raise ValueError(f"variant must be 'two-cat' or 'four-cat', got {variant!r}")
    return params.kappa_in * math.sqrt(1.0 + factor * params.internal_cooperativity)


def f_min_at_optimum(alpha: complex, params: SystemParams) -> float:
    """exp(-2|alpha|^2 / (sqrt(1 + 2 C_in) - 1)), F_min at the optimal kappa_ex."""
    root = math.sqrt(1.0 + 2.0 * params.internal_cooperativity)
    return math.exp(-2.0 * abs(alpha) ** 2 / (root - 1.0))


def tau_c(params: SystemParams) -> float:
    """Shortest admissible pulse scale max(1/kappa, kappa/g^2)."""
    return max(1.0 / params.kappa, params.kappa / params.g**2)


def decay_probability(lam, params: SystemParams, T: float, samples: int = 20001) -> float:
    """1 - exp(-(2 gamma/g^2) int_0^T |lambda|^2 dt).

    ``lam`` is a callable accepting an array of times (e.g. ``DriveWaveform.lam``).
    """
    if params.gamma == 0:
        return 0.0
    t = np.linspace(0.0, T, samples)
    integral = simpson(np.abs(np.asarray(lam(t))) ** 2, x=t)
    return float(-math.expm1(-2 * params.gamma / params.g**2 * integral))


def pe_estimate(alpha: float, params: SystemParams, tau: float) -> float:
    """(alpha^2/2) (kappa^2/(g^2 kappa_ex tau)) (1 + 1/(2 (kappa tau)^2)) for a Gaussian pulse."""
    k = params.kappa
    return 0.5 * alpha**2 * k**2 / (params.g**2 * params.kappa_ex * tau) * (1 + 1 / (2 * (k * tau) ** 2))


def validity_warnings(params: SystemParams, tau: float | None = None) -> list[str]:
    """Messages for approximations used outside their regime (empty when all hold)."""
    out = []
    ratio = params.g**2 / (params.kappa * abs(params.delta))
    if ratio > OMEGA0_WARN_RATIO:
        out.append(f"|omega0|/kappa = g^2/(kappa |Delta|) = {ratio:.3g} > {OMEGA0_WARN_RATIO}; "
                   "the omega0 ~ 0 estimates degrade")
    if tau is not None:
        tc = tau_c(params)
        if tau < ADIABATIC_FACTOR * tc:
            out.append(f"pulse length tau = {tau:.4g} violates τ ≫ τ_c (tau >> tau_c) with tau_c = {tc:.4g}; "
                       f"ratio {tau / tc:.3g} < {ADIABATIC_FACTOR:g}")
    return out


@dataclass
class AnalyticReport:
    C: float
    C_in: float
    M: float
    F_min: float
    kappa_ex_opt: float | None
    tau_c: float
    P_decay: float | None
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        return {k: (None if isinstance(v, float) and math.isinf(v) else v) for k, v in d.items()}

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kwargs)


def analytic_report(params: SystemParams, alpha: complex, tau: float | None = None, lam=None, T: float | None = None,
                    variant: str = "two-cat", warn: bool = True) -> AnalyticReport:
    """Collect the closed-form figures of merit for one parameter set.

    ``lam`` and ``T`` (drive and window) are needed only for P_decay. With
    ``warn`` every validity message is also emitted as a :class:`ValidityWarning`.
    """
    M = mode_match(params)
    try:
        k_opt = optimal_kappa_ex(params, variant)
    except UnboundedOptimumError:
        k_opt = None
    msgs = validity_warnings(params, tau)
    if warn:
        for m in msgs:
            warnings.warn(m, ValidityWarning, stacklevel=2)
    p_dec = None if lam is None or T is None else decay_probability(lam, params, T)
    if M <= 0:
        raise InvalidRateError("mode-match factor vanished")
    return AnalyticReport(params.cooperativity, params.internal_cooperativity, M, f_min(alpha, M), k_opt,
                          tau_c(params), p_dec, msgs)
