"""Target states, fidelity, postselection and phase-space diagnostics.

Quadrature convention: ``x = (a + a^dag)/sqrt(2)``, ``p = (a - a^dag)/(i sqrt(2))``,
so a coherent state ``|alpha>`` sits at ``x + i p = sqrt(2) alpha`` and the
vacuum Wigner function is ``exp(-x^2 - p^2)/pi``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid
from scipy.special import gammainc, gammaln

from .algebra import Operator, QuantumState, SpaceLayout, embed, ptrace
from .errors import (DegenerateStateError, InvalidStateError, LayoutError, TruncationError,
                     WignerGridError, WrongModelError, ZeroProbabilityError)
from .model import CAVITY, DOWN, UP, VIRTUAL
from .policy import get_policy


def coherent_tail(dim: int, alpha: complex) -> float:
    """Probability that a coherent state has ``n >= dim`` photons."""
    return float(gammainc(dim, abs(alpha) ** 2)) if alpha != 0 else 0.0


def coherent_vector(dim: int, alpha: complex) -> np.ndarray:
    """Normalized truncated coherent amplitudes ``e^{-|a|^2/2} a^n / sqrt(n!)``."""
    tail = coherent_tail(dim, alpha)
    if tail > get_policy().coherent_tail_max:
        raise TruncationError(f"coherent state alpha={alpha} loses {tail:.3g} of its norm at dim={dim}")
    n = np.arange(dim)
    if alpha == 0:
        v = np.zeros(dim, dtype=complex)
        v[0] = 1.0
        return v
    alpha = complex(alpha)
    logmag = n * math.log(abs(alpha)) - 0.5 * gammaln(n + 1) - 0.5 * abs(alpha) ** 2
    v = np.exp(logmag) * np.exp(1j * n * np.angle(alpha))
    return v / np.linalg.norm(v)


def coherent(dim: int, alpha: complex, label: str = "mode") -> QuantumState:
    """Truncated coherent state; raises TruncationError if the lost tail exceeds policy."""
    return QuantumState.pure(SpaceLayout.single(label, dim), coherent_vector(dim, alpha))


def min_fock_dim(alpha: complex, floor: int = 2) -> int:
    """Smallest truncation whose coherent tail is within policy for amplitude ``alpha``."""
    tol = get_policy().coherent_tail_max
    n = max(floor, 2)
    while coherent_tail(n, alpha) > tol:
        n += 1
    return n


@dataclass(frozen=True)
class CatSpec:
    """Cat-state recipe.

    ``components=2`` builds ``|a> +- |-a>``; ``components=4`` builds
    ``|b> + |-b> + |ib> + |-ib>`` (parity is ignored).
    """

    amplitude: complex
    components: int = 2
    parity: str = "even"
    fock_dim: int = 30
    label: str = "mode"

    def __post_init__(self):
        if self.components not in (2, 4):
            raise ValueError(f"components must be 2 or 4, got {self.components}")
        if self.parity not in ("even", "odd"):
            raise ValueError(f"parity must be 'even' or 'odd', got {self.parity!r}")
        if int(self.fock_dim) != self.fock_dim or self.fock_dim < 2:
            raise ValueError(f"fock_dim must be an integer >= 2, got {self.fock_dim}")


def cat_normalization(alpha: complex, parity: str = "even") -> float:
    """N_+- = sqrt(2 (1 +- exp(-2|alpha|^2)))."""
    sign = 1.0 if parity == "even" else -1.0
    return math.sqrt(2.0 * (1.0 + sign * math.exp(-2.0 * abs(alpha) ** 2)))


def cat_state(spec: CatSpec) -> QuantumState:
    a, dim = complex(spec.amplitude), int(spec.fock_dim)
    if spec.components == 2:
        if spec.parity == "odd" and a == 0:
            raise DegenerateStateError("odd cat with zero amplitude is the zero vector")
        sign = 1.0 if spec.parity == "even" else -1.0
        v = coherent_vector(dim, a) + sign * coherent_vector(dim, -a)
    else:
        v = sum(coherent_vector(dim, ph * a) for ph in (1, -1, 1j, -1j))
    norm = np.linalg.norm(v)
    if norm < 1e-12:
        raise DegenerateStateError("cat superposition cancels to zero")
    return QuantumState.pure(SpaceLayout.single(spec.label, dim), v / norm)


def _spin_x_states(dim: int):
    """(|0>, |1>) = ((|down> + |up>)/sqrt2, (|down> - |up>)/sqrt2) inside a ``dim``-level emitter."""
    plus = np.zeros(dim)
    minus = np.zeros(dim)
    plus[[DOWN, UP]] = [1.0, 1.0]
    minus[[DOWN, UP]] = [1.0, -1.0]
    return plus / math.sqrt(2.0), minus / math.sqrt(2.0)


def ideal_output_state(layout: SpaceLayout, amplitudes, emitters=None) -> QuantumState:
    """Lossless protocol output from all emitters in ``|down>``.

    ``sum_s 2^{-N/2} |s_1 .. s_N> |0>_c |sum_i s_i alpha_i>_v`` over the
    sigma_x eigenbasis ``s_i = +-1``. Factors other than the emitters, the
    cavity and the virtual cavity are not allowed.
    """
    amplitudes = [complex(a) for a in amplitudes]
    if emitters is None:
        emitters = [lab for lab in layout.labels if lab not in (CAVITY, VIRTUAL)]
    if len(emitters) != len(amplitudes):
        raise LayoutError(f"{len(amplitudes)} amplitudes for emitters {emitters}")
    if VIRTUAL not in layout:
        raise LayoutError("ideal output needs a virtual-cavity factor")
    n_v = layout.dim_of(VIRTUAL)
    out = np.zeros(layout.total_dim, dtype=complex)
    for signs in itertools.product((0, 1), repeat=len(amplitudes)):
        amp = sum((1 - 2 * s) * a for s, a in zip(signs, amplitudes))
        parts = {}
        for lab, s in zip(emitters, signs):
            parts[lab] = _spin_x_states(layout.dim_of(lab))[s]
        if CAVITY in layout:
            vac = np.zeros(layout.dim_of(CAVITY))
            vac[0] = 1.0
            parts[CAVITY] = vac
        parts[VIRTUAL] = coherent_vector(n_v, amp)
        missing = [lab for lab in layout.labels if lab not in parts]
        if missing:
            raise LayoutError(f"ideal output does not define factors {missing}")
        vec = np.ones(1, dtype=complex)
        for lab in layout.labels:
            vec = np.kron(vec, parts[lab])
        out += vec
    out /= 2.0 ** (len(amplitudes) / 2)
    return QuantumState.pure(layout, out)


def two_cat_target(layout: SpaceLayout, alpha: complex) -> QuantumState:
    """|0>_c (|0>|alpha> + |1>|-alpha>)/sqrt2 on an emitter, cavity and virtual layout."""
    return ideal_output_state(layout, [alpha])


def four_cat_target(beta: complex, dim: int, label: str = VIRTUAL) -> QuantumState:
    return cat_state(CatSpec(beta, components=4, fock_dim=dim, label=label))


def fidelity(rho: QuantumState, target: QuantumState) -> float:
    """<psi|rho|psi> (``|<psi|phi>|^2`` for pure ``rho``), clipped to [0, 1]."""
    if rho.layout != target.layout:
        raise LayoutError(f"layout mismatch: [{rho.layout}] vs [{target.layout}]")
    if not target.is_pure:
        raise InvalidStateError("fidelity target must be a pure state")
    if abs(target.norm() - 1.0) > 1e-9:
        raise InvalidStateError(f"fidelity target is not normalized (norm {target.norm():.12g})")
    psi = target.data
    if rho.is_pure:
        value = abs(np.vdot(psi, rho.data)) ** 2
    else:
        value = np.vdot(psi, rho.data @ psi).real
    return float(min(1.0, max(0.0, value)))


def postselect(rho: QuantumState, projector: Operator) -> tuple[QuantumState, float]:
    """Condition ``rho`` on the outcome ``projector``.

    A projector acting on a subset of the factors is embedded, and those
    factors are traced out of the conditioned state. A projector on the full
    layout keeps the layout.

    Returns
    -------
    state : QuantumState
        Normalized conditional state.
    probability : float
        ``Tr[P rho P]``.
    """
    P = projector.matrix
    scale = max(1.0, float(np.max(np.abs(P))))
    if np.max(np.abs(P @ P - P)) > 1e-10 * scale:
        raise InvalidStateError("projector is not idempotent")
    full = projector.layout == rho.layout
    big = projector if full else embed(projector, rho.layout)
    dm = rho.to_density().data
    cond = big.matrix @ dm @ big.matrix.conj().T
    prob = float(np.trace(cond).real)
    if prob < 1e-12:
        raise ZeroProbabilityError(f"postselection probability {prob:.3g} is below 1e-12")
    cond = cond / prob
    cond = 0.5 * (cond + cond.conj().T)
    state = QuantumState.density(rho.layout, cond)
    if not full:
        keep = [lab for lab in rho.layout.labels if lab not in projector.layout.labels]
        state = ptrace(state, keep)
    return state, prob


# --- Wigner function ---------------------------------------------------------

def nyquist_spacing(mean_photons: float) -> float:
    """Largest grid spacing that resolves cat interference fringes of size sqrt(<n>)."""
    return math.pi / (2.0 * math.sqrt(2.0) * max(math.sqrt(max(mean_photons, 0.0)), 1.0))


def default_wigner_grid(amplitude: float, points: int = 121, bounds=None) -> tuple[np.ndarray, np.ndarray]:
    """Square grid reaching ``sqrt(2)|amplitude| + 4`` in x and p (or explicit ``(x_min, x_max, p_min, p_max)``)."""
    reach = math.sqrt(2.0) * abs(amplitude) + 4.0
    x_min, x_max, p_min, p_max = (-reach, reach, -reach, reach) if bounds is None else bounds
    return np.linspace(x_min, x_max, int(points)), np.linspace(p_min, p_max, int(points))


def _single_mode(state: QuantumState, label: str | None) -> np.ndarray:
    if len(state.layout.factors) == 1:
        return state.to_density().data
    if label is None:
        raise LayoutError(f"state has factors {state.layout.labels}; name the bosonic factor with label=")
    return ptrace(state, [label]).data


def wigner(state: QuantumState, x, p, label: str | None = None, check_grid: bool = True) -> np.ndarray:
    """Wigner function ``W[i, j] = W(x_i, p_j)`` of one bosonic factor.

    Evaluated with the exact Laguerre recursion for the truncated density
    matrix, which equals the displaced-parity expectation
    ``Tr[rho D(a) P D(a)^dag]/pi`` for a density matrix supported on the
    retained Fock levels.

    Raises
    ------
    WignerGridError
        Grid spacing coarser than :func:`nyquist_spacing` of the state.
    """
    rho = _single_mode(state, label)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    p = np.atleast_1d(np.asarray(p, dtype=float))
    dim = rho.shape[0]
    if check_grid:
        nbar = float(np.dot(np.arange(dim), np.diag(rho).real))
        limit = nyquist_spacing(nbar)
        for name, g in (("x", x), ("p", p)):
            if g.size > 1 and np.max(np.abs(np.diff(g))) > limit * (1 + 1e-12):
                raise WignerGridError(
                    f"{name} grid spacing {np.max(np.abs(np.diff(g))):.4g} exceeds {limit:.4g} needed for <n>={nbar:.3g}")
    X, Pm = np.meshgrid(x, p, indexing="ij")
    A = (X + 1j * Pm) / math.sqrt(2.0)
    # W = sum_{m<=n} 2 Re[rho_mn w_mn] (m<n) + rho_nn w_nn with
    # w_mn = (-1)^m (2 A)^{n-m} sqrt(m!/n!) L_m^{n-m}(4|A|^2) e^{-2|A|^2} / pi, built by recursion.
    w = [np.exp(-2.0 * np.abs(A) ** 2) / math.pi]
    for n in range(1, dim):
        w.append(2.0 * A * w[n - 1] / math.sqrt(n))
    W = rho[0, 0].real * w[0].real
    for n in range(1, dim):
        W += 2.0 * np.real(rho[0, n] * w[n])
    for m in range(1, dim):
        prev = w[m]
        w[m] = (2.0 * np.conj(A) * prev - math.sqrt(m) * w[m - 1]) / math.sqrt(m)
        W += rho[m, m].real * w[m].real
        for n in range(m + 1, dim):
            nxt = (2.0 * A * w[n - 1] - math.sqrt(m) * prev) / math.sqrt(n)
            prev = w[n]
            w[n] = nxt
            W += 2.0 * np.real(rho[m, n] * w[n])
    return W


def wigner_norm(W: np.ndarray, x, p) -> float:
    """Trapezoidal quadrature of W over the grid."""
    return float(trapezoid(trapezoid(W, p, axis=1), x))


def save_wigner_csv(path, x, p, W):
    """Write ``x,p,W`` rows (x outer, p inner)."""
    X, Pm = np.meshgrid(x, p, indexing="ij")
    np.savetxt(path, np.column_stack([X.ravel(), Pm.ravel(), np.asarray(W).ravel()]),
               delimiter=",", header="x,p,W", comments="", fmt="%.12e")


# --- excited-state diagnostics ------------------------------------------------

EXCITED_OBSERVABLE = "P_e"


def excited_population_avg(traj, params, tau: float, observable: str = EXCITED_OBSERVABLE) -> float:
    """Time average ``(1/tau) int P_e(t) dt`` from a full-model trajectory.

    ``traj`` must carry the excited-state projector expectation under
    ``observable`` (see :func:`catpulse.model.excited_projector`); it is
    integrated with the trapezoidal rule on the accepted-step grid.
    """
    if traj.model_kind != "full":
        raise WrongModelError(f"excited populations need a full-model trajectory, got {traj.model_kind!r}")
    n_emitters = sum(1 for lab in traj.layout.labels if lab not in (CAVITY, VIRTUAL))
    if params is not None and params.n_emitters != n_emitters:
        raise WrongModelError(f"trajectory has {n_emitters} emitters, params say {params.n_emitters}")
    if observable not in traj.observables:
        raise KeyError(f"trajectory has no {observable!r} record; integrate with observables={{{observable!r}: "
                       "excited_projector(model)}")
    if not tau > 0:
        raise ValueError("tau must be positive")
    return float(trapezoid(np.real(traj.observables[observable]), traj.times) / tau)
