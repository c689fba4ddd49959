"""Temporal-mode envelopes and the drive laws derived from them.

An envelope ``v(t)`` is the normalized wave packet of the emitted pulse. The
drive law maps it to the complex coupling ``lambda_i(t)`` of each emitter (and
the Rabi frequency ``Omega_i = -lambda_i * Delta / g``) such that the cavity
field follows ``c(t) = v(t) * sum_i alpha_i sigma_x,i / sqrt(2 kappa_ex)``.
"""

from __future__ import annotations

import cmath
import itertools
import math
from dataclasses import dataclass, field
from numbers import Real
from typing import TYPE_CHECKING, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid, simpson
from scipy.special import erfc

from .errors import BoundaryViolationError, InvalidRateError, ModelError
from .policy import get_policy

if TYPE_CHECKING:
    from .model import SystemParams

_SQRT_PI = math.sqrt(math.pi)


def _is_scalar(t) -> bool:
    return isinstance(t, Real)


@dataclass(frozen=True, eq=False)
class Envelope:
    """Normalized temporal mode on ``[0, T]``.

    ``kind`` is ``"gaussian"`` (closed form, exact derivative and cumulative
    norm) or ``"sampled"`` (linear interpolation of user samples, derivative
    by central differences on the sample grid).
    """

    kind: str
    T: float
    times: np.ndarray
    samples: np.ndarray
    tau: float | None = None
    t0: float | None = None
    _deriv: np.ndarray | None = field(default=None, repr=False)
    _cumulative: np.ndarray | None = field(default=None, repr=False)

    # -- evaluation ---------------------------------------------------------

    def __call__(self, t):
        return self.value(t)

    def value(self, t):
        if self.kind == "gaussian":
            if _is_scalar(t):
                x = (t - self.t0) / self.tau
                return math.exp(-0.5 * x * x) / math.sqrt(_SQRT_PI * self.tau)
            x = (np.asarray(t, dtype=float) - self.t0) / self.tau
            return np.exp(-0.5 * x**2) / np.sqrt(_SQRT_PI * self.tau)
        return self._interp(t, self.samples)

    def derivative(self, t):
        if self.kind == "gaussian":
            return -(t - self.t0) / self.tau**2 * self.value(t)
        return self._interp(t, self._deriv)

    def cumulative_norm(self, t):
        """int_0^t |v(s)|^2 ds."""
        if self.kind == "gaussian":
            a = (self.t0 - np.asarray(t, dtype=float)) / self.tau
            out = 0.5 * (erfc(a) - erfc(self.t0 / self.tau))
            return float(out) if _is_scalar(t) else out
        out = np.interp(t, self.times, self._cumulative)
        return float(out) if _is_scalar(t) else out

    def _interp(self, t, values):
        re = np.interp(t, self.times, values.real, left=0.0, right=0.0)
        if np.iscomplexobj(values) and np.any(values.imag):
            im = np.interp(t, self.times, values.imag, left=0.0, right=0.0)
            out = re + 1j * im
            return complex(out) if _is_scalar(t) else out
        return float(re) if _is_scalar(t) else re

    # -- diagnostics --------------------------------------------------------

    def norm_on_grid(self) -> float:
        return float(simpson(np.abs(self.samples) ** 2, x=self.times))

    def derivative_norm(self) -> float:
        """int |dv/dt|^2 dt on the sample grid."""
        if self.kind == "gaussian":
            return 1.0 / (2.0 * self.tau**2)
        return float(simpson(np.abs(self._deriv) ** 2, x=self.times))

    @property
    def peak(self) -> float:
        return float(np.max(np.abs(self.samples)))


def _check_envelope(env: Envelope):
    pol = get_policy()
    vmax = env.peak
    edge = max(abs(env.samples[0]), abs(env.samples[-1]))
    if edge > pol.envelope_boundary_rtol * vmax:
        raise BoundaryViolationError(
            f"envelope edge value {edge:.3g} exceeds {pol.envelope_boundary_rtol:g} x peak {vmax:.3g}; "
            "widen the time window"
        )
    norm = env.norm_on_grid()
    if abs(norm - 1.0) > pol.envelope_norm_atol:
        raise BoundaryViolationError(f"envelope norm on grid is {norm:.9f}, expected 1")


def gaussian_envelope(tau: float, t0: float | None = None, T: float | None = None, grid: int = 2001) -> Envelope:
    """Gaussian mode ``(sqrt(pi) tau)^(-1/2) exp(-(t - t0)^2 / (2 tau^2))``.

    Defaults: ``t0 = 5 tau`` and ``T = 10 tau``.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    t0 = 5.0 * tau if t0 is None else float(t0)
    T = 2.0 * t0 if T is None else float(T)
    if grid < 200:
        raise ValueError(f"grid must have at least 200 points, got {grid}")
    if t0 < 4 * tau or T < t0 + 4 * tau:
        raise BoundaryViolationError(f"window too tight: need t0 >= 4 tau and T >= t0 + 4 tau (tau={tau}, t0={t0}, T={T})")
    times = np.linspace(0.0, T, grid)
    x = (times - t0) / tau
    samples = np.exp(-0.5 * x**2) / np.sqrt(_SQRT_PI * tau)
    env = Envelope("gaussian", T, times, samples, tau=float(tau), t0=t0)
    _check_envelope(env)
    return env


def sampled_envelope(times, values, normalize: bool = False) -> Envelope:
    """Envelope from samples ``v(t_k)`` on a monotone grid starting at 0."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values)
    if times.ndim != 1 or times.shape != values.shape or times.size < 200:
        raise ValueError("need matching 1-D time and value arrays with at least 200 samples")
    if np.any(np.diff(times) <= 0):
        raise ValueError("time grid must be strictly increasing")
    if abs(times[0]) > 1e-12:
        raise ValueError("time grid must start at t = 0")
    values = values.astype(complex) if np.iscomplexobj(values) else values.astype(float)
    if normalize:
        values = values / math.sqrt(simpson(np.abs(values) ** 2, x=times))
    deriv = np.gradient(values, times, edge_order=1)
    cumulative = cumulative_trapezoid(np.abs(values) ** 2, times, initial=0.0)
    env = Envelope("sampled", float(times[-1]), times, values, _deriv=deriv, _cumulative=cumulative)
    _check_envelope(env)
    return env


def load_envelope(path, normalize: bool = False) -> Envelope:
    """Read a two-column ``t v`` (or three-column ``t Re(v) Im(v)``) text file."""
    data = np.loadtxt(path, ndmin=2)
    if data.shape[1] == 2:
        values = data[:, 1]
    elif data.shape[1] == 3:
        values = data[:, 1] + 1j * data[:, 2]
    else:
        raise ValueError(f"{path}: expected 2 or 3 columns, found {data.shape[1]}")
    return sampled_envelope(data[:, 0], values, normalize=normalize)


def save_envelope(path, env: Envelope):
    if np.iscomplexobj(env.samples) and np.any(env.samples.imag):
        cols = np.column_stack([env.times, env.samples.real, env.samples.imag])
        header = "t re_v im_v"
    else:
        cols = np.column_stack([env.times, np.real(env.samples)])
        header = "t v"
    np.savetxt(path, cols, header=header)


@dataclass(frozen=True, eq=False)
class DriveWaveform:
    """Drive of one emitter: ``lambda(t)`` and its Rabi frequency ``Omega(t)``."""

    envelope: Envelope
    alpha: complex
    omega0: float
    kappa: float
    kappa_ex: float
    n_emitters: int = 1
    delta_over_g: float | None = None

    def lam(self, t):
        env = self.envelope
        pref = 1j * self.alpha / math.sqrt(2.0 * self.kappa_ex)
        rate = 1j * self.n_emitters * self.omega0 + self.kappa
        if _is_scalar(t):
            return complex(pref * (env.derivative(t) + rate * env.value(t)))
        return pref * (env.derivative(t) + rate * env.value(t))

    def lam_conj(self, t):
        return np.conj(self.lam(t)) if not _is_scalar(t) else self.lam(t).conjugate()

    def lam_abs2(self, t):
        lam = self.lam(t)
        return lam.real**2 + lam.imag**2

    def rabi(self, t):
        """Omega(t) = -lambda(t) Delta / g."""
        if self.delta_over_g is None:
            raise ModelError("Rabi frequency needs Delta/g; build the waveform with delta_over_g")
        return -self.lam(t) * self.delta_over_g

    def rabi_conj(self, t):
        out = self.rabi(t)
        return out.conjugate() if _is_scalar(t) else np.conj(out)

    def sampled(self):
        """``(times, lambda, Omega)`` on the envelope grid; Omega is None without Delta/g."""
        t = self.envelope.times
        lam = self.lam(t)
        rabi = None if self.delta_over_g is None else -lam * self.delta_over_g
        return t, lam, rabi


def drive_lambda(env: Envelope, alpha: complex, omega0: float, kappa: float, kappa_ex: float,
                 n_emitters: int = 1, delta_over_g: float | None = None) -> DriveWaveform:
    """lambda_i(t) = i alpha_i / sqrt(2 kappa_ex) [dv/dt + (i N omega0 + kappa) v]."""
    if not kappa_ex > 0:
        raise InvalidRateError(f"kappa_ex must be positive, got {kappa_ex}")
    if kappa < kappa_ex:
        raise InvalidRateError(f"kappa = {kappa} is smaller than kappa_ex = {kappa_ex}")
    if n_emitters < 1:
        raise ValueError("n_emitters must be >= 1")
    return DriveWaveform(env, complex(alpha), float(omega0), float(kappa), float(kappa_ex),
                         int(n_emitters), None if delta_over_g is None else float(delta_over_g))


def drive_for(params: "SystemParams", env: Envelope, alpha: complex) -> DriveWaveform:
    """Drive law with every rate taken from ``params``."""
    return drive_lambda(env, alpha, params.omega0, params.kappa, params.kappa_ex,
                        params.n_emitters, params.delta / params.g)


class VirtualCoupling:
    """g_v(t) = -v*(t) / sqrt(max(int_0^t |v|^2, eps)), the absorbing-cavity coupling."""

    def __init__(self, env: Envelope, epsilon: float | None = None):
        self.envelope = env
        self.epsilon = get_policy().virtual_epsilon if epsilon is None else float(epsilon)

    def __call__(self, t):
        v = self.envelope.value(t)
        denom = np.sqrt(np.maximum(self.envelope.cumulative_norm(t), self.epsilon))
        if _is_scalar(t):
            return -complex(v).conjugate() / float(denom)
        return -np.conj(v) / denom

    def conj(self, t):
        out = self(t)
        return out.conjugate() if _is_scalar(t) else np.conj(out)

    def abs2(self, t):
        out = self(t)
        return out.real**2 + out.imag**2


def virtual_coupling(env: Envelope, epsilon: float | None = None) -> VirtualCoupling:
    return VirtualCoupling(env, epsilon)


def four_cat_amplitudes(beta: complex) -> tuple[complex, complex]:
    """(beta e^{i pi/4} / sqrt2, beta e^{-i pi/4} / sqrt2) for the two-emitter four-component cat."""
    beta = complex(beta)
    return (beta * cmath.exp(0.25j * math.pi) / math.sqrt(2.0),
            beta * cmath.exp(-0.25j * math.pi) / math.sqrt(2.0))


@dataclass(frozen=True, eq=False)
class PulsePlan:
    """Target mode, target amplitudes and the derived per-emitter drives.

    With ``kappa_tau`` set, :meth:`rederive` rescales the Gaussian so the
    pulse length stays fixed in units of ``1/kappa``; otherwise the envelope is
    kept as is.
    """

    envelope: Envelope
    amplitudes: tuple[complex, ...]
    drives: tuple[DriveWaveform, ...]
    kappa_tau: float | None = None
    t0_over_tau: float = 5.0
    T_over_tau: float = 10.0
    grid: int = 2001

    @property
    def total_amplitude(self) -> float:
        """Largest output amplitude |sum_i +-alpha_i| over all sign patterns."""
        return float(max(abs(sum(s * a for s, a in zip(signs, self.amplitudes)))
                         for signs in itertools.product((1, -1), repeat=len(self.amplitudes))))

    def rederive(self, params: "SystemParams") -> "PulsePlan":
        return make_pulse_plan(params, self.amplitudes, kappa_tau=self.kappa_tau,
                               t0_over_tau=self.t0_over_tau, T_over_tau=self.T_over_tau,
                               grid=self.grid, envelope=None if self.kappa_tau else self.envelope)


def make_pulse_plan(params: "SystemParams", amplitudes: Sequence[complex], *, tau: float | None = None,
                    kappa_tau: float | None = None, t0_over_tau: float = 5.0, T_over_tau: float = 10.0,
                    grid: int = 2001, envelope: Envelope | None = None) -> PulsePlan:
    """Build a Gaussian (or given) envelope and one drive per emitter."""
    amplitudes = tuple(complex(a) for a in amplitudes)
    if len(amplitudes) != params.n_emitters:
        raise ModelError(f"{len(amplitudes)} amplitudes for {params.n_emitters} emitters")
    if envelope is None:
        if (tau is None) == (kappa_tau is None):
            raise ValueError("give exactly one of tau or kappa_tau")
        if tau is None:
            tau = kappa_tau / params.kappa
        envelope = gaussian_envelope(tau, t0_over_tau * tau, T_over_tau * tau, grid)
    drives = tuple(drive_for(params, envelope, a) for a in amplitudes)
    return PulsePlan(envelope, amplitudes, drives, kappa_tau, t0_over_tau, T_over_tau, grid)
