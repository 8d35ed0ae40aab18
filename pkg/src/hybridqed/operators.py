"""Truncated-Hilbert-space operator algebra.

Dense complex matrices tagged with the tensor layout they act on. The
canonical subsystem order is (DQD, transmon, SQUID array, 50 Ohm resonator);
any subset keeps that relative order.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DQD = "DQD"
TRANSMON = "tr"
SQUID = "Sq"
R50 = "50Ω"
CANONICAL_ORDER = (DQD, TRANSMON, SQUID, R50)

# default resonator truncations
N_SQ_DEFAULT = 5
N_50_DEFAULT = 3


class DimensionError(ValueError):
    """Operator or layout dimensions are inconsistent."""


@dataclass(frozen=True)
class SpaceLayout:
    subsystem_dims: tuple[int, ...]
    labels: tuple[str, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.subsystem_dims)
        labels = tuple(self.labels)
        if len(dims) != len(labels):
            raise DimensionError("one label per subsystem required")
        if any(d < 1 for d in dims):
            raise DimensionError(f"subsystem dimensions must be >= 1, got {dims}")
        if len(set(labels)) != len(labels):
            raise DimensionError(f"labels must be unique, got {labels}")
        object.__setattr__(self, "subsystem_dims", dims)
        object.__setattr__(self, "labels", labels)

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.subsystem_dims))

    def dim(self, label: str) -> int:
        return self.subsystem_dims[self.index(label)]

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"unknown subsystem {label!r}; layout has {self.labels}") from None

    def __contains__(self, label: str) -> bool:
        return label in self.labels


def canonical_layout(n_tr: int = 4, n_sq: int = N_SQ_DEFAULT, n_50: int = N_50_DEFAULT,
                     include=CANONICAL_ORDER) -> SpaceLayout:
    """Layout in canonical order restricted to the subsystems in `include`."""
    dims = {DQD: 2, TRANSMON: n_tr, SQUID: n_sq, R50: n_50}
    labels = tuple(lab for lab in CANONICAL_ORDER if lab in include)
    return SpaceLayout(tuple(dims[lab] for lab in labels), labels)


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    layout: SpaceLayout
    entries: np.ndarray

    def __post_init__(self):
        m = np.array(self.entries, dtype=complex)
        n = self.layout.total_dim
        if m.shape != (n, n):
            raise DimensionError(f"matrix shape {m.shape} does not match layout dimension {n}")
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def dag(self) -> "OperatorMatrix":
        return OperatorMatrix(self.layout, self.entries.conj().T)

    def hermiticity_error(self) -> float:
        """Largest absolute entry of M - M^dagger."""
        return float(np.max(np.abs(self.entries - self.entries.conj().T), initial=0.0))

    def is_hermitian(self, tol: float = 1e-10) -> bool:
        return self.hermiticity_error() <= tol

    def _check(self, other: "OperatorMatrix"):
        if other.layout != self.layout:
            raise DimensionError("operators live on different layouts")

    def __add__(self, other):
        if isinstance(other, OperatorMatrix):
            self._check(other)
            return OperatorMatrix(self.layout, self.entries + other.entries)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, OperatorMatrix):
            self._check(other)
            return OperatorMatrix(self.layout, self.entries - other.entries)
        return NotImplemented

    def __matmul__(self, other):
        if isinstance(other, OperatorMatrix):
            self._check(other)
            return OperatorMatrix(self.layout, self.entries @ other.entries)
        return NotImplemented

    def __mul__(self, scalar):
        if np.isscalar(scalar):
            return OperatorMatrix(self.layout, self.entries * scalar)
        return NotImplemented

    __rmul__ = __mul__

    def __neg__(self):
        return OperatorMatrix(self.layout, -self.entries)


def _single(m: np.ndarray, label: str = "") -> OperatorMatrix:
    return OperatorMatrix(SpaceLayout((m.shape[0],), (label,)), m)


def annihilation(dim: int) -> OperatorMatrix:
    """Bosonic lowering operator truncated to `dim` Fock states."""
    if int(dim) != dim or dim < 2:
        raise DimensionError(f"annihilation operator needs dim >= 2, got {dim}")
    return _single(np.diag(np.sqrt(np.arange(1, dim)), k=1).astype(complex))


def identity(dim: int) -> OperatorMatrix:
    return _single(np.eye(dim, dtype=complex))


def projector(dim: int, i: int, j: int | None = None) -> OperatorMatrix:
    """|i><j| on a `dim`-level system."""
    j = i if j is None else j
    m = np.zeros((dim, dim), dtype=complex)
    m[i, j] = 1.0
    return _single(m)


_PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
    # basis order (|+>, |->): index 0 is the excited state
    "plus": np.array([[0, 1], [0, 0]], dtype=complex),
    "minus": np.array([[0, 0], [1, 0]], dtype=complex),
}


def pauli(which: str) -> OperatorMatrix:
    """Pauli matrix or qubit ladder operator; which in {x, y, z, plus, minus}."""
    try:
        return _single(_PAULI[which].copy())
    except KeyError:
        raise ValueError(f"unknown Pauli operator {which!r}") from None


def embed(op: OperatorMatrix | np.ndarray, target: str, layout: SpaceLayout) -> OperatorMatrix:
    """Lift a single-factor operator to the full tensor space of `layout`."""
    m = op.entries if isinstance(op, OperatorMatrix) else np.asarray(op, dtype=complex)
    k = layout.index(target)
    if m.shape != (layout.subsystem_dims[k],) * 2:
        raise DimensionError(
            f"operator of shape {m.shape} cannot act on {target!r} of dim {layout.subsystem_dims[k]}")
    dims = layout.subsystem_dims
    left = int(np.prod(dims[:k], dtype=int))
    right = int(np.prod(dims[k + 1:], dtype=int))
    full = np.kron(np.kron(np.eye(left, dtype=complex), m), np.eye(right, dtype=complex))
    return OperatorMatrix(layout, full)


def commutator(a: OperatorMatrix, b: OperatorMatrix) -> OperatorMatrix:
    return a @ b - b @ a
