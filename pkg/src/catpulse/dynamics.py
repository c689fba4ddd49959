"""Time integration of the master equation and of the no-jump Schrodinger equation.

Both equations are integrated with an explicit Dormand-Prince 5(4) pair and a
PI step-size controller. Time-dependent coefficients are evaluated exactly at
the Runge-Kutta stage times. The generator is compiled once per run into CSR
patterns whose data arrays are linear combinations of the scalar coefficient
functions, so each right-hand side costs one numba kernel call.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import _kernels
from .algebra import Operator, QuantumState, SpaceLayout, embed
from .errors import IntegrationError, LayoutError, TruncationError
from .model import CAVITY, VIRTUAL, TimeDependentModel, TimeOperator, non_hermitian_hamiltonian
from .policy import get_policy


# --- generator compilation ----------------------------------------------------

class _CoefficientTable:
    """Unique scalar functions; ``values(t)`` returns ``[1, f..., conj(f)...]``."""

    def __init__(self, term_lists):
        self.funcs = []
        index = {}
        for terms in term_lists:
            for term in terms:
                for func, _ in term.factors:
                    if func not in index:
                        index[func] = len(self.funcs)
                        self.funcs.append(func)
        self._index = index

    def key(self, factors) -> tuple[int, ...]:
        n = len(self.funcs)
        return tuple(sorted(1 + self._index[f] + (n if cj else 0) for f, cj in factors))

    def values(self, t) -> np.ndarray:
        n = len(self.funcs)
        out = np.empty(1 + 2 * n, dtype=complex)
        out[0] = 1.0
        for k, f in enumerate(self.funcs):
            v = complex(f(t))
            out[1 + k] = v
            out[1 + n + k] = v.conjugate()
        return out

    def values_batch(self, ts: np.ndarray) -> np.ndarray:
        """Rows of :meth:`values` for every time in ``ts``."""
        n = len(self.funcs)
        out = np.empty((ts.size, 1 + 2 * n), dtype=complex)
        out[:, 0] = 1.0
        for k, f in enumerate(self.funcs):
            try:
                v = np.asarray(f(ts), dtype=complex)
            except (TypeError, ValueError):
                v = None
            if v is None or v.shape != ts.shape:
                v = np.array([complex(f(float(t))) for t in ts])
            out[:, 1 + k] = v
            out[:, 1 + n + k] = v.conj()
        return out


class _SparseSum:
    """Sum of ``coefficient_k(t) * A_k`` on one CSR pattern.

    ``groups`` maps a grouping key whose first entry is the coefficient key to
    a dense matrix; matrices with equal keys are pre-summed.
    """

    def __init__(self, groups: dict, shape):
        self.shape = shape
        keys = list(groups)
        mask = np.zeros(shape, dtype=bool)
        for k in keys:
            mask |= groups[k] != 0
        rows, cols = np.nonzero(mask)
        self.indptr = np.concatenate([[0], np.cumsum(np.bincount(rows, minlength=shape[0]))]).astype(np.int64)
        self.indices = cols.astype(np.int64)
        self.nnz = rows.size
        self.data_matrix = np.zeros((len(keys), rows.size), dtype=complex)
        for r, k in enumerate(keys):
            self.data_matrix[r] = groups[k][rows, cols]
        width = max((len(k[0]) for k in keys), default=0)
        # pad with index 0, which always holds the value 1
        self._idx = np.zeros((len(keys), max(width, 1)), dtype=np.int64)
        for r, k in enumerate(keys):
            self._idx[r, :len(k[0])] = k[0]

    def data(self, ext_values: np.ndarray) -> np.ndarray:
        if self.data_matrix.shape[0] == 0:
            return np.zeros(0, dtype=complex)
        coeffs = np.prod(ext_values[self._idx], axis=1)
        return coeffs @ self.data_matrix

    def data_batch(self, ext_rows: np.ndarray) -> np.ndarray:
        if self.data_matrix.shape[0] == 0:
            return np.zeros((ext_rows.shape[0], 0), dtype=complex)
        coeffs = np.prod(ext_rows[:, self._idx], axis=2)
        return coeffs @ self.data_matrix


class CompiledGenerator:
    """Model compiled for fast right-hand-side evaluation."""

    def __init__(self, model: TimeDependentModel, need_jumps: bool = True):
        d = model.layout.total_dim
        self.dim = d
        h_terms = non_hermitian_hamiltonian(model).terms
        jumps = [L.terms for _, L in model.jumps] if need_jumps else []
        self.table = _CoefficientTable([h_terms, *jumps])
        self.n_jumps = len(jumps)

        groups: dict = {}
        for term in h_terms:
            key = (self.table.key(term.factors),)
            groups[key] = groups.get(key, 0) + np.asarray(term.operator.matrix)
        self.h = _SparseSum(groups, (d, d))

        rows = max(self.n_jumps, 1) * d
        groups = {}
        for m, terms in enumerate(jumps):
            for term in terms:
                key = (self.table.key(term.factors), m)
                if key not in groups:
                    groups[key] = np.zeros((rows, d), dtype=complex)
                groups[key][m * d:(m + 1) * d] += term.operator.matrix
        self.l = _SparseSum(groups, (rows, d))

        counts = np.diff(self.l.indptr).reshape(max(self.n_jumps, 1), d)[:self.n_jumps]
        nonempty = [np.flatnonzero(c) for c in counts]
        self._rows = np.concatenate(nonempty).astype(np.int64) if nonempty else np.zeros(0, np.int64)
        self._rows_ptr = np.concatenate([[0], np.cumsum([r.size for r in nonempty])]).astype(np.int64)
        self._x = np.zeros((d, d), dtype=complex) if need_jumps else None
        self._z = np.zeros(d, dtype=complex)
        self.rhs_evals = 0

    def operators(self, t):
        ext = self.table.values(t)
        return self.h.data(ext), self.l.data(ext)

    def stage_data(self, ts):
        """Operator data for several times at once (coefficients are state independent)."""
        ext = self.table.values_batch(np.asarray(ts, dtype=float))
        return self.h.data_batch(ext), self.l.data_batch(ext)

    def master_rhs(self, t, rho, out, data=None):
        h_dat, l_dat = self.operators(t) if data is None else data
        _kernels.lindblad_rhs(rho, self.h.indptr, self.h.indices, h_dat,
                              self.l.indptr, self.l.indices, l_dat, self._rows, self._rows_ptr,
                              self.n_jumps, out, self._x, self._z)
        self.rhs_evals += 1

    def master_stages(self, y, K, h, h_all, l_all, stage):
        _kernels.master_stages(y, K, _A, h, self.h.indptr, self.h.indices, h_all, self.l.indptr, self.l.indices,
                               l_all, self._rows, self._rows_ptr, self.n_jumps, stage, self._x, self._z)
        self.rhs_evals += 6

    def no_jump_rhs(self, t, psi, out, data=None):
        h_dat = self.h.data(self.table.values(t)) if data is None else data[0]
        _kernels.csr_matvec(self.h.indptr, self.h.indices, h_dat, psi, out)
        out *= -1j
        self.rhs_evals += 1


# --- Dormand-Prince 5(4) --------------------------------------------------------

_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = np.zeros((7, 7))
_A[1, :1] = [1 / 5]
_A[2, :2] = [3 / 40, 9 / 40]
_A[3, :3] = [44 / 45, -56 / 15, 32 / 9]
_A[4, :4] = [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]
_A[5, :5] = [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]
_A[6, :6] = [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]
_B = _A[6].copy()
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])

_SAFETY = 0.9
_FAC_MIN = 0.2
_FAC_MAX = 5.0
_ALPHA = 0.7 / 5
_BETA = 0.4 / 5


def _rms(x, scale) -> float:
    return math.sqrt(float(np.mean(np.abs(x / scale) ** 2)))


def _initial_step(f, t0, y0, f0, rtol, atol, span):
    """Starting step from the usual two-evaluation heuristic."""
    scale = atol + rtol * np.abs(y0)
    d0, d1 = _rms(y0, scale), _rms(f0, scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, span)
    f1 = np.empty_like(y0)
    f(t0 + h0, y0 + h0 * f0, f1)
    d2 = _rms(f1 - f0, scale) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1, span)


@dataclass
class Trajectory:
    """Integration record.

    ``times`` is the accepted-step grid; ``observables`` maps names to the
    expectation values on that grid. Full states are kept only at the
    requested checkpoints (``checkpoint_times``/``states``).
    """

    kind: str
    layout: SpaceLayout
    times: np.ndarray
    observables: dict[str, np.ndarray]
    checkpoint_times: np.ndarray
    states: list[QuantumState]
    diagnostics: dict = field(default_factory=dict)
    model_kind: str = ""

    @property
    def final_state(self) -> QuantumState:
        return self.states[-1]

    @property
    def final_time(self) -> float:
        return float(self.checkpoint_times[-1])


def _expectation_fn(op: Operator, pure: bool):
    m = np.asarray(op.matrix)
    if not np.any(m - np.diag(np.diag(m))):
        diag = np.diag(m).copy()
        if pure:
            return lambda psi: complex(np.dot(diag, np.abs(psi) ** 2))
        return lambda rho: complex(np.dot(diag, np.diag(rho)))
    if pure:
        return lambda psi: complex(np.vdot(psi, m @ psi))
    mt = m.T.copy()
    return lambda rho: complex(np.sum(mt * rho))


def _tail_projectors(layout: SpaceLayout) -> dict[str, Operator]:
    out = {}
    for label in (CAVITY, VIRTUAL):
        if label in layout:
            n = layout.dim_of(label)
            proj = np.zeros((n, n))
            proj[-1, -1] = 1.0
            out[label] = embed(Operator(SpaceLayout.single(label, n), proj), layout, label)
    return out


def _integrate(model, state0, window, tol, observables, checkpoints, pure, max_steps, check_truncation):
    pol = get_policy()
    rtol, atol = tol if tol is not None else (pol.rtol, pol.atol)
    if state0.layout != model.layout:
        raise LayoutError(f"initial state layout [{state0.layout}] differs from model layout [{model.layout}]")
    t0, t_end = map(float, window)
    if not t_end > t0:
        raise ValueError("integration window must have positive length")

    gen = CompiledGenerator(model, need_jumps=not pure)
    f = gen.no_jump_rhs if pure else gen.master_rhs
    y = np.array(state0.data if pure else state0.to_density().data, dtype=complex)

    obs_ops = dict(observables or {})
    tails = _tail_projectors(model.layout) if check_truncation else {}
    obs_fns = {name: _expectation_fn(op, pure) for name, op in obs_ops.items()}
    tail_fns = {name: _expectation_fn(op, pure) for name, op in tails.items()}
    measure = (lambda v: float(np.vdot(v, v).real)) if pure else (lambda r: float(np.trace(r).real))

    stops = sorted({t_end, *(float(c) for c in (checkpoints or ()) if t0 < float(c) < t_end)})
    ck_times = [t0]
    states = [QuantumState(model.layout, state0.kind if pure else "density", y.copy())]
    times = [t0]
    rec = {name: [fn(y)] for name, fn in obs_fns.items()}
    norm0 = measure(y)
    norms = [norm0]
    tail_max = {name: fn(y).real for name, fn in tail_fns.items()}

    diag = {"steps": 0, "rejected": 0, "max_local_error": 0.0, "min_step": math.inf, "rtol": rtol, "atol": atol}
    span = t_end - t0
    K = np.empty((7,) + y.shape, dtype=complex)
    Kf = K.reshape(7, -1)
    stage = np.empty_like(y)
    y_new = np.empty_like(y)
    err_buf = np.empty(y.size, dtype=complex)
    f(t0, y, K[0])
    h = _initial_step(f, t0, y, K[0], rtol, atol, span)
    t = t0
    err_prev = 1e-4
    rejected_last = False
    next_stop = 0
    h_floor = 1e-13 * max(1.0, abs(t_end))

    def _fail(msg, cls=IntegrationError):
        diag.update(t=t, h=h, rhs_evals=gen.rhs_evals)
        raise cls(msg, diag)

    while next_stop < len(stops):
        target = stops[next_stop]
        if diag["steps"] + diag["rejected"] >= max_steps:
            _fail(f"maximum number of steps ({max_steps}) exceeded at t = {t:.6g}")
        if h < h_floor:
            _fail(f"step size underflow (h = {h:.3g}) at t = {t:.6g}")
        hit = t + h >= target - 1e-12 * max(1.0, abs(target))
        if hit:
            h = target - t
        h_all, l_all = gen.stage_data(t + _C[1:] * h)
        if pure:
            for s in range(1, 7):
                _kernels.stage_input(y.reshape(-1), Kf, _A[s], s, h, stage.reshape(-1))
                f(t + _C[s] * h, stage, K[s], (h_all[s - 1], l_all[s - 1]))
        else:
            gen.master_stages(y, K, h, h_all, l_all, stage)
        err = _kernels.dp_finish(y.reshape(-1), Kf, _B, _E, h, rtol, atol, y_new.reshape(-1), err_buf)
        if not math.isfinite(err):
            _fail(f"non-finite error estimate at t = {t:.6g}")
        if err <= 1.0:
            t = target if hit else t + h
            if not pure:
                _kernels.hermitize(y_new)
            y, y_new = y_new, y
            # first-same-as-last: the seventh stage is the next step's first
            K[0] = K[6]
            diag["steps"] += 1
            diag["max_local_error"] = max(diag["max_local_error"], err)
            diag["min_step"] = min(diag["min_step"], h)
            times.append(t)
            for name, fn in obs_fns.items():
                rec[name].append(fn(y))
            norms.append(measure(y))
            for name, fn in tail_fns.items():
                tail_max[name] = max(tail_max[name], fn(y).real)
            if hit:
                ck_times.append(t)
                states.append(QuantumState(model.layout, "pure" if pure else "density", y.copy()))
                next_stop += 1
            fac = _SAFETY * max(err, 1e-10) ** (-_ALPHA) * err_prev ** _BETA
            fac = min(1.0 if rejected_last else _FAC_MAX, max(_FAC_MIN, fac))
            h = h * fac
            err_prev = max(err, 1e-4)
            rejected_last = False
        else:
            diag["rejected"] += 1
            h = h * max(_FAC_MIN, _SAFETY * err ** (-1 / 5))
            rejected_last = True

    norms = np.array(norms)
    diag["rhs_evals"] = gen.rhs_evals
    diag["tail_population"] = {name: v / max(norm0, 1e-300) for name, v in tail_max.items()}
    if pure:
        diag["norm_increase_max"] = float(max(0.0, np.max(np.diff(norms), initial=0.0)))
    else:
        diag["trace_drift"] = float(np.max(np.abs(norms - norm0)))
        diag["min_eigenvalue"] = float(np.linalg.eigvalsh(y)[0])
    observables_out = {name: np.array(v) for name, v in rec.items()}
    observables_out["norm" if pure else "trace"] = norms
    traj = Trajectory("pure" if pure else "density", model.layout, np.array(times), observables_out,
                      np.array(ck_times), states, diag, model.kind)
    for name, v in diag["tail_population"].items():
        if v > pol.fock_tail_max:
            raise TruncationError(f"population {v:.3g} in the top Fock level of {name!r}; increase its truncation", diag)
    return traj


def integrate_master(model: TimeDependentModel, rho0: QuantumState, window, tol=None, *,
                     observables: Mapping[str, Operator] | None = None, checkpoints: Sequence[float] | None = None,
                     max_steps: int = 5_000_000, check_truncation: bool = True) -> Trajectory:
    """Integrate d rho/dt = -i[H, rho] + sum_m D[L_m] rho over ``window = (t0, T)``.

    Parameters
    ----------
    model : TimeDependentModel
    rho0 : QuantumState
        Initial state; pure states are converted to density matrices.
    window : (float, float)
    tol : (rtol, atol), optional
        Defaults to the active numeric policy.
    observables : mapping of name to Operator, optional
        Expectation values recorded after every accepted step.
    checkpoints : sequence of float, optional
        Extra times at which the full state is stored (the final time always is).

    Raises
    ------
    IntegrationError
        Step-size underflow or non-finite values; ``diagnostics`` is attached.
    TruncationError
        The top Fock level of the cavity or virtual cavity got populated.
    """
    return _integrate(model, rho0, window, tol, observables, checkpoints, False, max_steps, check_truncation)


def integrate_no_jump(model: TimeDependentModel, psi0: QuantumState, window, tol=None, *,
                      observables: Mapping[str, Operator] | None = None, checkpoints: Sequence[float] | None = None,
                      max_steps: int = 5_000_000, check_truncation: bool = True) -> Trajectory:
    """Integrate i d psi/dt = [H - (i/2) sum L^dag L] psi.

    The squared norm of the final vector is the probability that no jump
    occurred.
    """
    if not psi0.is_pure:
        raise ValueError("no-jump evolution needs a pure initial state")
    if abs(psi0.norm() - 1.0) > 1e-9:
        raise ValueError("no-jump evolution needs a normalized initial state")
    return _integrate(model, psi0, window, tol, observables, checkpoints, True, max_steps, check_truncation)


def observable_trajectory(traj: Trajectory, op: Operator) -> tuple[np.ndarray, np.ndarray]:
    """Expectation of ``op`` at every stored checkpoint state: ``(times, values)``."""
    if op.layout != traj.layout:
        raise LayoutError(f"observable layout [{op.layout}] differs from trajectory layout [{traj.layout}]")
    fn = _expectation_fn(op, traj.kind == "pure")
    return traj.checkpoint_times.copy(), np.array([fn(s.data) for s in traj.states])
