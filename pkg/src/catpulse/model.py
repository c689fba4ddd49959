"""Full four-level model, adiabatically-eliminated model and virtual-cavity extension.

Emitter basis for the full model is ``(|down>, |up>, |e1>, |e2>)``; the
effective model keeps only ``(|down>, |up>)``. Every model is a
:class:`TimeDependentModel`: a Hamiltonian and a list of Lindblad operators,
each a sum of constant operators times scalar time functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .algebra import Operator, SpaceLayout, destroy, embed, identity, ket_bra
from .errors import InvalidRateError, ModelError
from .policy import get_policy
from .pulses import DriveWaveform

DOWN, UP, E1, E2 = 0, 1, 2, 3
CAVITY = "cavity"
VIRTUAL = "virtual"


def emitter_label(i: int) -> str:
    return f"emitter{i + 1}"


@dataclass(frozen=True)
class SystemParams:
    """Physical rates (angular frequencies, hbar = 1) and the emitter count.

    Rates are plain numbers in whatever reference unit the caller picked
    (usually ``gamma = 1`` or ``g = 1``).
    """

    g: float
    delta: float
    gamma: float
    kappa_ex: float
    kappa_in: float = 0.0
    delta_g: float = 0.0
    delta_e: float = 0.0
    r1: float = 0.5
    r2: float = 0.5
    n_emitters: int = 1

    def __post_init__(self):
        for name in ("gamma", "kappa_ex", "kappa_in"):
            if getattr(self, name) < 0:
                raise InvalidRateError(f"{name} must be non-negative, got {getattr(self, name)}")
        if not self.g > 0:
            raise InvalidRateError(f"g must be positive, got {self.g}")
        if self.delta == 0:
            raise InvalidRateError("detuning Delta must be nonzero")
        if not self.kappa > 0:
            raise InvalidRateError("total cavity decay kappa_ex + kappa_in must be positive")
        for name in ("r1", "r2"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise InvalidRateError(f"branching ratio {name} must lie in [0, 1]")
        if int(self.n_emitters) != self.n_emitters or self.n_emitters < 1:
            raise ModelError(f"n_emitters must be a positive integer, got {self.n_emitters}")

    @property
    def kappa(self) -> float:
        return self.kappa_ex + self.kappa_in

    @property
    def omega0(self) -> float:
        """Dispersive cavity shift -g^2 / Delta."""
        return -self.g**2 / self.delta

    @property
    def cooperativity(self) -> float:
        return self.g**2 / (2 * self.kappa * self.gamma) if self.gamma > 0 else math.inf

    @property
    def internal_cooperativity(self) -> float:
        if self.kappa_in == 0 or self.gamma == 0:
            return math.inf
        return self.g**2 / (2 * self.kappa_in * self.gamma)

    def replace(self, **changes) -> "SystemParams":
        return replace(self, **changes)


# --- time-dependent operator sums ---------------------------------------------

# a coefficient factor is (scalar function of t, conjugate?)
Factor = tuple[Callable[[float], complex], bool]


@dataclass(frozen=True, eq=False)
class Term:
    """``operator`` times the product of its coefficient ``factors``."""

    operator: Operator
    factors: tuple[Factor, ...] = ()

    def coefficient(self, t) -> complex:
        value = 1.0 + 0j
        for func, conj in self.factors:
            f = func(t)
            value *= f.conjugate() if conj else f
        return value

    def dag(self) -> "Term":
        return Term(self.operator.dag(), tuple((f, not c) for f, c in self.factors))


@dataclass(frozen=True, eq=False)
class TimeOperator:
    layout: SpaceLayout
    terms: tuple[Term, ...]

    def __call__(self, t: float) -> Operator:
        out = np.zeros((self.layout.total_dim,) * 2, dtype=complex)
        for term in self.terms:
            out += term.coefficient(t) * term.operator.matrix
        return Operator(self.layout, out)

    @property
    def is_constant(self) -> bool:
        return all(not term.factors for term in self.terms)

    def dag(self) -> "TimeOperator":
        return TimeOperator(self.layout, tuple(t.dag() for t in self.terms))

    def __add__(self, other: "TimeOperator") -> "TimeOperator":
        if other.layout != self.layout:
            raise ModelError("cannot add time operators on different layouts")
        return TimeOperator(self.layout, self.terms + other.terms)

    def embedded(self, layout: SpaceLayout) -> "TimeOperator":
        return TimeOperator(layout, tuple(Term(embed(t.operator, layout, list(self.layout.labels)), t.factors)
                                          for t in self.terms))


def constant(op: Operator) -> TimeOperator:
    return TimeOperator(op.layout, (Term(op),))


def _terms(layout: SpaceLayout, *pairs) -> TimeOperator:
    """Build a TimeOperator from ``(operator, factors)`` pairs, dropping zero operators."""
    terms = []
    for op, factors in pairs:
        if np.any(op.matrix):
            terms.append(Term(op, tuple(factors)))
    return TimeOperator(layout, tuple(terms))


@dataclass(frozen=True, eq=False)
class TimeDependentModel:
    """Hamiltonian plus labelled Lindblad operators on one layout."""

    layout: SpaceLayout
    hamiltonian: TimeOperator
    jumps: tuple[tuple[str, TimeOperator], ...]
    kind: str
    params: SystemParams | None = None
    emitters: tuple[str, ...] = ()
    emitter_dim: int = 0
    drives: tuple[DriveWaveform, ...] = ()
    g_v: Callable | None = field(default=None, repr=False)

    @property
    def has_virtual(self) -> bool:
        return VIRTUAL in self.layout

    @property
    def jump_labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.jumps)

    def H(self, t: float) -> Operator:
        return self.hamiltonian(t)

    def jump_operators(self, t: float) -> list[Operator]:
        return [L(t) for _, L in self.jumps]

    def jump(self, label: str) -> TimeOperator:
        for lab, L in self.jumps:
            if lab == label:
                return L
        raise KeyError(label)

    def local(self, op: Operator, site: str) -> Operator:
        return embed(op, self.layout, site)

    def check_hermitian(self, times: Sequence[float]):
        tol = get_policy().hermitian_atol
        for t in times:
            h = self.hamiltonian(t)
            scale = max(1.0, float(np.max(np.abs(h.matrix))))
            if not h.is_hermitian(tol * scale):
                raise ModelError(f"Hamiltonian is not Hermitian at t = {t}")


def _check_drives(params: SystemParams, drives: Sequence[DriveWaveform]):
    if len(drives) != params.n_emitters:
        raise ModelError(f"got {len(drives)} drive waveforms for {params.n_emitters} emitters")


def _self_check_times(drives: Sequence[DriveWaveform]) -> np.ndarray:
    T = max(d.envelope.T for d in drives) if drives else 1.0
    return np.linspace(0.0, T, 7)


def _emitter_ops(dim: int):
    return lambda r, c: ket_bra(dim, r, c, "e")


def build_full_model(params: SystemParams, drives: Sequence[DriveWaveform], n_cavity: int | None = None) -> TimeDependentModel:
    """Four-level emitters coupled to one lossy cavity mode (no adiabatic elimination)."""
    _check_drives(params, drives)
    for d in drives:
        if d.delta_over_g is None:
            raise ModelError("full-model drives need delta_over_g to form the Rabi frequency")
    n_c = get_policy().n_cavity_full if n_cavity is None else int(n_cavity)
    N = params.n_emitters
    labels = tuple(emitter_label(i) for i in range(N))
    layout = SpaceLayout(tuple((lab, 4) for lab in labels) + ((CAVITY, n_c),))
    kb = _emitter_ops(4)
    c = embed(destroy(n_c), layout, CAVITY)
    cd = c.dag()
    g, gam = params.g, params.gamma
    e1_shift = params.delta - params.delta_e / 2
    e2_shift = params.delta + params.delta_e / 2 - params.delta_g

    pairs = []
    jumps = [("cavity-loss", constant(math.sqrt(2 * params.kappa) * c))]
    for lab, drive in zip(labels, drives):
        op = lambda r, col: embed(kb(r, col), layout, lab)
        bare = e1_shift * op(E1, E1) + e2_shift * op(E2, E2)
        coupling = g * (op(E1, DOWN) + op(E2, UP)) @ c
        pairs.append((bare + coupling + coupling.dag(), ()))
        raman = op(E2, DOWN) + op(E1, UP)
        pairs.append((raman, ((drive.rabi, False),)))
        pairs.append((raman.dag(), ((drive.rabi, True),)))
        i = lab[len("emitter"):]
        jumps += [
            (f"L2[{i}]", constant(math.sqrt(2 * params.r1 * gam) * op(DOWN, E1))),
            (f"L3[{i}]", constant(math.sqrt(2 * (1 - params.r1) * gam) * op(UP, E1))),
            (f"L4[{i}]", constant(math.sqrt(2 * params.r2 * gam) * op(UP, E2))),
            (f"L5[{i}]", constant(math.sqrt(2 * (1 - params.r2) * gam) * op(DOWN, E2))),
        ]
    model = TimeDependentModel(layout, _terms(layout, *pairs), tuple(jumps), "full", params,
                               labels, 4, tuple(drives))
    model.check_hermitian(_self_check_times(drives))
    return model


def build_effective_model(params: SystemParams, drives: Sequence[DriveWaveform],
                          include_cavity_in_jumps: bool = True, n_cavity: int = 4) -> TimeDependentModel:
    """Ground-manifold model after adiabatic elimination of the excited states.

    ``include_cavity_in_jumps=False`` drops the ``omega0 * c`` parts of the
    effective decay operators (long-pulse limit with an almost empty cavity).
    """
    _check_drives(params, drives)
    N = params.n_emitters
    labels = tuple(emitter_label(i) for i in range(N))
    layout = SpaceLayout(tuple((lab, 2) for lab in labels) + ((CAVITY, int(n_cavity)),))
    kb = _emitter_ops(2)
    c = embed(destroy(int(n_cavity)), layout, CAVITY)
    cd = c.dag()
    w0, g, gam = params.omega0, params.g, params.gamma
    r1, r2 = params.r1, params.r2

    pairs = [(N * w0 * (cd @ c), ())]
    jumps = [("cavity-loss", constant(math.sqrt(2 * params.kappa) * c))]
    for lab, drive in zip(labels, drives):
        op = lambda r, col: embed(kb(r, col), layout, lab)
        sx = op(UP, DOWN) + op(DOWN, UP)
        sm, sp = op(DOWN, UP), op(UP, DOWN)
        pdown, pup = op(DOWN, DOWN), op(UP, UP)
        pairs.append((sx @ c, ((drive.lam, True),)))
        pairs.append((sx @ cd, ((drive.lam, False),)))
        lam = ((drive.lam, False),)
        i = lab[len("emitter"):]
        spec = [
            ("L2", math.sqrt(2 * r1 * gam), sm, pdown @ c),
            ("L3", math.sqrt(2 * (1 - r1) * gam), pup, sp @ c),
            ("L4", math.sqrt(2 * r2 * gam), sp, pup @ c),
            ("L5", math.sqrt(2 * (1 - r2) * gam), pdown, sm @ c),
        ]
        for name, rate, spin_part, cavity_part in spec:
            pre = -rate / g
            parts = [(pre * spin_part, lam)]
            if include_cavity_in_jumps:
                parts.append((pre * w0 * cavity_part, ()))
            jumps.append((f"{name}[{i}]", _terms(layout, *parts)))
    model = TimeDependentModel(layout, _terms(layout, *pairs), tuple(jumps), "effective", params,
                               labels, 2, tuple(drives))
    model.check_hermitian(_self_check_times(drives))
    return model


def attach_virtual_cavity(model: TimeDependentModel, params: SystemParams, g_v: Callable, n_v: int) -> TimeDependentModel:
    """Add an absorbing virtual cavity that captures the output mode.

    The plain cavity-loss channel is split into the cascaded output channel
    ``L0 = sqrt(2 kappa_ex) c + g_v^* a_v`` and the internal-loss channel
    ``L1 = sqrt(2 kappa_in) c``.
    """
    if model.has_virtual:
        raise ModelError("model already has a virtual cavity")
    if n_v < 2:
        raise ModelError(f"virtual cavity needs n_v >= 2, got {n_v}")
    layout = model.layout.extend(VIRTUAL, int(n_v))
    c = embed(destroy(model.layout.dim_of(CAVITY)), layout, CAVITY)
    a = embed(destroy(int(n_v)), layout, VIRTUAL)
    k_ex = math.sqrt(2 * params.kappa_ex)
    g_conj = ((g_v, True),)
    cascade = _terms(layout,
                     (0.5j * k_ex * (c.dag() @ a), g_conj),
                     (-0.5j * k_ex * (c @ a.dag()), ((g_v, False),)))
    H = model.hamiltonian.embedded(layout) + cascade
    L0 = _terms(layout, (k_ex * c, ()), (a, g_conj))
    L1 = TimeOperator(layout, (Term(math.sqrt(2 * params.kappa_in) * c),))
    jumps = [("output", L0), ("internal-loss", L1)]
    jumps += [(lab, L.embedded(layout)) for lab, L in model.jumps if lab != "cavity-loss"]
    out = TimeDependentModel(layout, H, tuple(jumps), model.kind, params, model.emitters,
                             model.emitter_dim, model.drives, g_v)
    out.check_hermitian(_self_check_times(model.drives))
    return out


def non_hermitian_hamiltonian(model: TimeDependentModel) -> TimeOperator:
    """H(t) - (i/2) sum_m L_m^dag(t) L_m(t), expanded term by term."""
    terms = list(model.hamiltonian.terms)
    for _, L in model.jumps:
        for tk in L.terms:
            for tl in L.terms:
                prod = tk.operator.dag() @ tl.operator
                if np.any(prod.matrix):
                    factors = tuple((f, not cj) for f, cj in tk.factors) + tl.factors
                    terms.append(Term(-0.5j * prod, factors))
    return TimeOperator(model.layout, tuple(terms))


def damped_cavity_model(kappa: float, dim: int) -> TimeDependentModel:
    """Bare cavity with amplitude decay rate ``kappa`` and no Hamiltonian."""
    c = destroy(dim, CAVITY)
    layout = c.layout
    return TimeDependentModel(layout, TimeOperator(layout, ()), (("cavity-loss", constant(math.sqrt(2 * kappa) * c)),), "bare")


def cavity_number(model: TimeDependentModel) -> Operator:
    c = embed(destroy(model.layout.dim_of(CAVITY)), model.layout, CAVITY)
    return c.dag() @ c


def excited_projector(model: TimeDependentModel) -> Operator:
    """Sum over emitters of |e1><e1| + |e2><e2| (full model only)."""
    if model.emitter_dim != 4:
        raise ModelError("excited-state projector exists only for the full four-level model")
    out = 0 * identity(model.layout)
    for lab in model.emitters:
        out = out + embed(ket_bra(4, E1, E1, lab) + ket_bra(4, E2, E2, lab), model.layout, lab)
    return out


def spin_x(model: TimeDependentModel, emitter: str) -> Operator:
    d = model.emitter_dim
    sx = ket_bra(d, UP, DOWN, emitter) + ket_bra(d, DOWN, UP, emitter)
    return embed(sx, model.layout, emitter)
