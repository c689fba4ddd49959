"""Tensor-product Hilbert-space bookkeeping over truncated Fock and spin spaces.

Factor order convention used throughout the package::

    [emitter1, ..., emitterN, cavity, virtual]

All objects are immutable: the underlying arrays are flagged read-only.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidDimensionError, InvalidStateError, LayoutError
from .policy import get_policy


def _frozen(array) -> np.ndarray:
    array = np.array(array, dtype=complex)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class SpaceLayout:
    """Ordered list of ``(label, dim)`` subsystem factors."""

    factors: tuple[tuple[str, int], ...]

    def __post_init__(self):
        factors = tuple((str(label), int(dim)) for label, dim in self.factors)
        labels = [label for label, _ in factors]
        if len(set(labels)) != len(labels):
            raise LayoutError(f"duplicate factor labels in {labels}")
        for label, dim in factors:
            if dim < 1:
                raise InvalidDimensionError(f"factor {label!r} has dimension {dim}")
        object.__setattr__(self, "factors", factors)

    @classmethod
    def single(cls, label: str, dim: int) -> "SpaceLayout":
        return cls(((label, dim),))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.factors)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(dim for _, dim in self.factors)

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims, dtype=int)) if self.factors else 1

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise LayoutError(f"unknown factor label {label!r}; layout has {self.labels}") from None

    def dim_of(self, label: str) -> int:
        return self.dims[self.index(label)]

    def __contains__(self, label) -> bool:
        return label in self.labels

    def extend(self, label: str, dim: int) -> "SpaceLayout":
        return SpaceLayout(self.factors + ((label, dim),))

    def subset(self, labels: Iterable[str]) -> "SpaceLayout":
        labels = list(labels)
        return SpaceLayout(tuple((lab, self.dim_of(lab)) for lab in labels))

    def without(self, labels: Iterable[str]) -> "SpaceLayout":
        drop = set(labels)
        for lab in drop:
            self.index(lab)
        return SpaceLayout(tuple(f for f in self.factors if f[0] not in drop))

    def __add__(self, other: "SpaceLayout") -> "SpaceLayout":
        return SpaceLayout(self.factors + other.factors)

    def __str__(self):
        return " x ".join(f"{label}:{dim}" for label, dim in self.factors)


def _check_same_layout(a: SpaceLayout, b: SpaceLayout):
    if a != b:
        raise LayoutError(f"layout mismatch: [{a}] vs [{b}]")


@dataclass(frozen=True, eq=False)
class Operator:
    """Dense complex matrix tagged with the layout it acts on."""

    layout: SpaceLayout
    matrix: np.ndarray

    def __post_init__(self):
        matrix = _frozen(self.matrix)
        n = self.layout.total_dim
        if matrix.shape != (n, n):
            raise LayoutError(f"matrix shape {matrix.shape} does not match layout dimension {n}")
        object.__setattr__(self, "matrix", matrix)

    @property
    def dim(self) -> int:
        return self.layout.total_dim

    def dag(self) -> "Operator":
        return Operator(self.layout, self.matrix.conj().T)

    def is_hermitian(self, atol: float | None = None) -> bool:
        atol = get_policy().hermitian_atol if atol is None else atol
        return bool(np.max(np.abs(self.matrix - self.matrix.conj().T), initial=0.0) <= atol)

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def norm(self) -> float:
        """Frobenius norm."""
        return float(np.linalg.norm(self.matrix))

    def _coerce(self, other) -> np.ndarray:
        if isinstance(other, Operator):
            _check_same_layout(self.layout, other.layout)
            return other.matrix
        return NotImplemented

    def __add__(self, other):
        m = self._coerce(other)
        if m is NotImplemented:
            return m
        return Operator(self.layout, self.matrix + m)

    def __sub__(self, other):
        m = self._coerce(other)
        if m is NotImplemented:
            return m
        return Operator(self.layout, self.matrix - m)

    def __neg__(self):
        return Operator(self.layout, -self.matrix)

    def __mul__(self, scalar):
        if isinstance(scalar, Operator):
            return NotImplemented
        return Operator(self.layout, complex(scalar) * self.matrix)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return Operator(self.layout, self.matrix / complex(scalar))

    def __matmul__(self, other):
        m = self._coerce(other)
        if m is NotImplemented:
            return m
        return Operator(self.layout, self.matrix @ m)

    def __repr__(self):
        return f"Operator([{self.layout}])"


def commutator(a: Operator, b: Operator) -> Operator:
    return a @ b - b @ a


@dataclass(frozen=True, eq=False)
class QuantumState:
    """Pure state vector or density matrix on a layout.

    Pure vectors may be sub-normalized (no-jump states) but never exceed unit
    norm beyond the policy tolerance.
    """

    layout: SpaceLayout
    kind: str
    data: np.ndarray

    def __post_init__(self):
        data = _frozen(self.data)
        n = self.layout.total_dim
        pol = get_policy()
        if self.kind == "pure":
            if data.shape != (n,):
                raise LayoutError(f"state vector shape {data.shape} does not match dimension {n}")
            if np.linalg.norm(data) > 1.0 + pol.pure_norm_atol:
                raise InvalidStateError(f"pure state norm {np.linalg.norm(data):.12g} exceeds 1")
        elif self.kind == "density":
            if data.shape != (n, n):
                raise LayoutError(f"density matrix shape {data.shape} does not match dimension {n}")
            if np.max(np.abs(data - data.conj().T), initial=0.0) > pol.hermitian_atol:
                raise InvalidStateError("density matrix is not Hermitian")
            if np.trace(data).real > 1.0 + pol.trace_atol:
                raise InvalidStateError(f"density matrix trace {np.trace(data).real:.12g} exceeds 1")
        else:
            raise InvalidStateError(f"unknown state kind {self.kind!r}")
        object.__setattr__(self, "data", data)

    @classmethod
    def pure(cls, layout: SpaceLayout, vector) -> "QuantumState":
        return cls(layout, "pure", vector)

    @classmethod
    def density(cls, layout: SpaceLayout, matrix) -> "QuantumState":
        return cls(layout, "density", matrix)

    @property
    def is_pure(self) -> bool:
        return self.kind == "pure"

    def norm(self) -> float:
        """Vector 2-norm for pure states, trace for density matrices."""
        if self.is_pure:
            return float(np.linalg.norm(self.data))
        return float(np.trace(self.data).real)

    def normalized(self) -> "QuantumState":
        n = self.norm()
        if n == 0:
            raise InvalidStateError("cannot normalize a zero state")
        return QuantumState(self.layout, self.kind, self.data / n)

    def to_density(self) -> "QuantumState":
        if self.is_pure:
            return QuantumState(self.layout, "density", np.outer(self.data, self.data.conj()))
        return self

    def relabel(self, *labels: str) -> "QuantumState":
        layout = SpaceLayout(tuple(zip(labels, self.layout.dims)))
        return QuantumState(layout, self.kind, self.data)

    def min_eigenvalue(self) -> float:
        if self.is_pure:
            return 0.0
        return float(np.linalg.eigvalsh(self.data)[0])

    def __repr__(self):
        return f"QuantumState({self.kind}, [{self.layout}])"


# --- constructors -----------------------------------------------------------

def destroy(dim: int, label: str = "mode") -> Operator:
    """Truncated annihilation operator with sqrt(n) on the first superdiagonal."""
    if dim < 2:
        raise InvalidDimensionError(f"annihilation operator needs dim >= 2, got {dim}")
    return Operator(SpaceLayout.single(label, dim), np.diag(np.sqrt(np.arange(1, dim)), 1))


def identity(layout: SpaceLayout) -> Operator:
    return Operator(layout, np.eye(layout.total_dim))


def ket_bra(dim: int, row: int, col: int, label: str = "site") -> Operator:
    m = np.zeros((dim, dim))
    m[row, col] = 1.0
    return Operator(SpaceLayout.single(label, dim), m)


def basis(dim: int, n: int, label: str = "mode") -> QuantumState:
    if not 0 <= n < dim:
        raise InvalidDimensionError(f"basis index {n} outside [0, {dim})")
    v = np.zeros(dim)
    v[n] = 1.0
    return QuantumState.pure(SpaceLayout.single(label, dim), v)


def sigma_x(label: str = "spin") -> Operator:
    return Operator(SpaceLayout.single(label, 2), [[0, 1], [1, 0]])


def tensor(*items):
    """Kronecker product of operators or of states, concatenating layouts."""
    if not items:
        raise ValueError("tensor() needs at least one argument")
    layout = reduce(lambda a, b: a + b, (it.layout for it in items))
    if all(isinstance(it, Operator) for it in items):
        return Operator(layout, reduce(np.kron, (it.matrix for it in items)))
    if all(isinstance(it, QuantumState) for it in items):
        if all(it.is_pure for it in items):
            return QuantumState.pure(layout, reduce(np.kron, (it.data for it in items)))
        return QuantumState.density(layout, reduce(np.kron, (it.to_density().data for it in items)))
    raise TypeError("tensor() arguments must be all Operators or all QuantumStates")


def _permute_operator(matrix: np.ndarray, dims: Sequence[int], perm: Sequence[int]) -> np.ndarray:
    """Reorder tensor factors of ``matrix``: new factor k is old factor perm[k]."""
    n = len(dims)
    t = matrix.reshape(tuple(dims) * 2)
    t = t.transpose(tuple(perm) + tuple(p + n for p in perm))
    d = int(np.prod(dims))
    return t.reshape(d, d)


def embed(op: Operator, target: SpaceLayout, site: str | Sequence[str] | None = None) -> Operator:
    """Promote ``op`` to ``target`` with identity on all other factors.

    ``site`` names the target factor(s) ``op`` acts on; by default the
    operator's own labels are used. Multi-factor operators are supported as
    long as each factor dimension matches.
    """
    if site is None:
        sites = list(op.layout.labels)
    elif isinstance(site, str):
        sites = [site]
    else:
        sites = list(site)
    if len(sites) != len(op.layout.factors):
        raise LayoutError(f"operator has {len(op.layout.factors)} factors but {len(sites)} sites given")
    if len(set(sites)) != len(sites):
        raise LayoutError(f"repeated site labels {sites}")
    for lab, dim in zip(sites, op.layout.dims):
        if target.dim_of(lab) != dim:
            raise LayoutError(f"dimension mismatch at site {lab!r}: operator {dim}, layout {target.dim_of(lab)}")
    rest = [lab for lab in target.labels if lab not in sites]
    rest_dim = int(np.prod([target.dim_of(lab) for lab in rest], dtype=int)) if rest else 1
    big = np.kron(op.matrix, np.eye(rest_dim))
    order = sites + rest  # factor order of ``big``
    dims = [target.dim_of(lab) for lab in order]
    perm = [order.index(lab) for lab in target.labels]
    return Operator(target, _permute_operator(big, dims, perm))


def expectation(op: Operator, state: QuantumState) -> complex:
    """<psi|A|psi> for pure states, Tr[A rho] for density matrices."""
    _check_same_layout(op.layout, state.layout)
    if state.is_pure:
        return complex(np.vdot(state.data, op.matrix @ state.data))
    return complex(np.sum(op.matrix.T * state.data))


def ptrace(state: QuantumState, keep: Sequence[str]) -> QuantumState:
    """Reduced density matrix on the factors ``keep`` (in layout order)."""
    layout = state.layout
    for lab in keep:
        layout.index(lab)
    keep = [lab for lab in layout.labels if lab in set(keep)]
    rho = state.to_density().data
    dims = layout.dims
    n = len(dims)
    keep_idx = [layout.index(lab) for lab in keep]
    drop_idx = [i for i in range(n) if i not in keep_idx]
    t = rho.reshape(dims * 2)
    perm = keep_idx + drop_idx
    t = t.transpose(perm + [p + n for p in perm])
    dk = int(np.prod([dims[i] for i in keep_idx], dtype=int)) if keep_idx else 1
    dd = int(np.prod([dims[i] for i in drop_idx], dtype=int)) if drop_idx else 1
    t = t.reshape(dk, dd, dk, dd)
    reduced = np.einsum("ajbj->ab", t)
    return QuantumState.density(layout.subset(keep), reduced)


def fock_populations(state: QuantumState, label: str) -> np.ndarray:
    """Photon-number distribution of one bosonic factor."""
    reduced = ptrace(state, [label])
    return np.clip(np.diag(reduced.data).real, 0.0, None)
