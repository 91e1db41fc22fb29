"""Dense complex linear algebra over labeled tensor-product Hilbert spaces.

States and operators live on a :class:`SpaceLayout`, an ordered list of
labeled factors (e.g. system "S" of dimension d, memory "F" of dimension
d+1).  Amplitudes are stored row-major over the factor order, so the flat
index of a product basis state is ``ravel_multi_index`` of its per-factor
indices.  All values are immutable after construction; the only mutable
state anywhere in the package is an RNG stream.

Operators come in three flavors sharing one implicit protocol
(``layout``, ``matrix``, ``apply_amplitudes``, ``expectation``):

* :class:`Operator` stores a dense square matrix.
* :class:`SubspaceProjector` stores an orthonormal column block B and
  represents either B B^dag or its complement 1 - B B^dag exactly.  This
  keeps rank-one-plus-complement measurements (the interesting ones here)
  at O(dim * rank) memory instead of O(dim^2), which matters once the
  lab dimension reaches d*(d+1) for d around 100.
* :class:`RecorderUnitary` stores a measurement together with one small
  unitary per outcome acting on a fresh register, representing
  sum_i P_i (x) C_i without materializing the product matrix.

Dense matrices remain available everywhere through the ``matrix``
property; the structured classes materialize on demand (meant for small
dimensions, e.g. in tests).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

NORM_TOL = 1e-12
PROB_TOL = 1e-12
PROB_SUM_TOL = 1e-10
ZERO_PROB = 1e-14


class LayoutMismatchError(ValueError):
    """Raised when an operator and a state live on incompatible layouts."""


class ImpossibleOutcomeError(ValueError):
    """Raised when collapsing or conditioning on a zero-probability outcome."""


@dataclass(frozen=True)
class SpaceLayout:
    """Ordered list of (label, dimension) factors of a tensor-product space."""

    factors: tuple[tuple[str, int], ...]

    def __post_init__(self) -> None:
        factors = tuple((str(label), int(dim)) for label, dim in self.factors)
        object.__setattr__(self, "factors", factors)
        if not factors:
            raise ValueError("layout needs at least one factor")
        labels = [label for label, _ in factors]
        if len(set(labels)) != len(labels):
            raise ValueError(f"factor labels must be distinct, got {labels}")
        if any(dim < 1 for _, dim in factors):
            raise ValueError("every factor dimension must be >= 1")

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.factors)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(dim for _, dim in self.factors)

    @property
    def total_dim(self) -> int:
        return math.prod(self.shape)

    def axis(self, label: str) -> int:
        for i, (name, _) in enumerate(self.factors):
            if name == label:
                return i
        raise ValueError(f"unknown factor label {label!r} in layout {self.labels}")

    def dim(self, label: str) -> int:
        return self.factors[self.axis(label)][1]

    def flat_index(self, indices: Sequence[int]) -> int:
        if len(indices) != len(self.factors):
            raise ValueError(
                f"expected {len(self.factors)} indices, got {len(indices)}"
            )
        for idx, (label, dim) in zip(indices, self.factors):
            if not 0 <= idx < dim:
                raise ValueError(f"index {idx} out of range for factor {label!r} (dim {dim})")
        return int(np.ravel_multi_index(tuple(indices), self.shape))

    def unflatten(self, flat: int) -> tuple[int, ...]:
        return tuple(int(i) for i in np.unravel_index(flat, self.shape))


def _frozen_array(values, dtype=np.complex128) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class StateVector:
    """Normalized amplitude vector over a layout, row-major over factors."""

    layout: SpaceLayout
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        amps = _frozen_array(self.amplitudes)
        if amps.shape != (self.layout.total_dim,):
            raise ValueError(
                f"amplitude vector has shape {amps.shape}, layout expects "
                f"({self.layout.total_dim},)"
            )
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state vector norm {norm!r} is not 1 within {NORM_TOL}")
        object.__setattr__(self, "amplitudes", amps)

    def tensor(self) -> np.ndarray:
        """Amplitudes reshaped onto the factor grid."""
        return self.amplitudes.reshape(self.layout.shape)

    def overlap(self, other: StateVector) -> complex:
        _require_same_layout(self.layout, other.layout)
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def fidelity(self, other: StateVector) -> float:
        """|<self|other>|^2; global-phase-insensitive equality measure."""
        return float(abs(self.overlap(other)) ** 2)


def _require_same_layout(a: SpaceLayout, b: SpaceLayout) -> None:
    if a != b:
        raise LayoutMismatchError(f"layouts differ: {a.factors} vs {b.factors}")


def _contraction_axes(op_layout: SpaceLayout, state_layout: SpaceLayout) -> list[int]:
    """Axes of the state tensor that the operator's factors act on."""
    axes = []
    for label, dim in op_layout.factors:
        try:
            ax = state_layout.axis(label)
        except ValueError as exc:
            raise LayoutMismatchError(str(exc)) from None
        if state_layout.shape[ax] != dim:
            raise LayoutMismatchError(
                f"factor {label!r} has dim {state_layout.shape[ax]} in the state "
                f"but {dim} in the operator"
            )
        axes.append(ax)
    return axes


def _contract_matrix(
    matrix: np.ndarray, op_layout: SpaceLayout, state: StateVector
) -> np.ndarray:
    """Apply a square matrix on a (sub-)layout of the state; returns flat amplitudes."""
    if op_layout == state.layout:
        return matrix @ state.amplitudes
    axes = _contraction_axes(op_layout, state.layout)
    k = len(axes)
    op_tensor = matrix.reshape(op_layout.shape + op_layout.shape)
    out = np.tensordot(op_tensor, state.tensor(), axes=(tuple(range(k, 2 * k)), axes))
    out = np.moveaxis(out, tuple(range(k)), axes)
    return np.ascontiguousarray(out).reshape(-1)


@dataclass(frozen=True, eq=False)
class Operator:
    """Dense square operator on a layout."""

    layout: SpaceLayout
    matrix: np.ndarray

    def __post_init__(self) -> None:
        mat = _frozen_array(self.matrix)
        n = self.layout.total_dim
        if mat.shape != (n, n):
            raise ValueError(f"matrix has shape {mat.shape}, layout expects ({n}, {n})")
        object.__setattr__(self, "matrix", mat)

    def apply_amplitudes(self, state: StateVector) -> np.ndarray:
        return _contract_matrix(self.matrix, self.layout, state)

    def expectation(self, state: StateVector) -> float:
        """<psi|O|psi>, checked real within PROB_TOL."""
        value = complex(np.vdot(state.amplitudes, self.apply_amplitudes(state)))
        if abs(value.imag) > PROB_TOL:
            raise ValueError(f"expectation value {value!r} is not real within {PROB_TOL}")
        return float(value.real)

    def unitarity_defect(self) -> float:
        """max-abs entry of O^dag O - 1."""
        gram = self.matrix.conj().T @ self.matrix
        gram = gram - np.eye(self.layout.total_dim)
        return float(np.max(np.abs(gram)))

    def is_unitary(self, tol: float = NORM_TOL) -> bool:
        return self.unitarity_defect() <= tol

    def projector_defect(self) -> float:
        """max-abs deviation from Hermiticity and idempotence."""
        herm = float(np.max(np.abs(self.matrix - self.matrix.conj().T)))
        idem = float(np.max(np.abs(self.matrix @ self.matrix - self.matrix)))
        return max(herm, idem)

    def is_projector(self, tol: float = NORM_TOL) -> bool:
        return self.projector_defect() <= tol


@dataclass(frozen=True, eq=False)
class SubspaceProjector:
    """Projector B B^dag onto orthonormal columns B, or its complement 1 - B B^dag.

    Exact (the complement is never expanded), so Born weights and collapses
    stay cheap at large dimension.  ``matrix`` materializes the dense form.
    """

    layout: SpaceLayout
    block: np.ndarray
    complement: bool = False

    def __post_init__(self) -> None:
        block = np.array(self.block, dtype=np.complex128)
        if block.ndim == 1:
            block = block.reshape(-1, 1)
        n = self.layout.total_dim
        if block.shape[0] != n or block.shape[1] < 1:
            raise ValueError(f"block has shape {block.shape}, expected ({n}, rank)")
        gram = block.conj().T @ block
        defect = np.max(np.abs(gram - np.eye(block.shape[1])))
        if defect > NORM_TOL:
            raise ValueError(f"block columns not orthonormal (defect {defect:.3e})")
        block.flags.writeable = False
        object.__setattr__(self, "block", block)

    @property
    def rank(self) -> int:
        r = self.block.shape[1]
        return self.layout.total_dim - r if self.complement else r

    @property
    def matrix(self) -> np.ndarray:
        dense = self.block @ self.block.conj().T
        if self.complement:
            dense = np.eye(self.layout.total_dim) - dense
        return dense

    def _range_part(self, state: StateVector) -> np.ndarray:
        """B (B^dag psi) with the operator factors located inside the state layout."""
        if self.layout == state.layout:
            return self.block @ (self.block.conj().T @ state.amplitudes)
        axes = _contraction_axes(self.layout, state.layout)
        k = len(axes)
        block_tensor = self.block.reshape(self.layout.shape + (self.block.shape[1],))
        coeff = np.tensordot(block_tensor.conj(), state.tensor(), axes=(tuple(range(k)), axes))
        out = np.tensordot(block_tensor, coeff, axes=([k], [0]))
        out = np.moveaxis(out, tuple(range(k)), axes)
        return np.ascontiguousarray(out).reshape(-1)

    def apply_amplitudes(self, state: StateVector) -> np.ndarray:
        ranged = self._range_part(state)
        if self.complement:
            return state.amplitudes - ranged
        return ranged

    def expectation(self, state: StateVector) -> float:
        ranged = self._range_part(state)
        weight = float(np.vdot(ranged, ranged).real)
        if self.complement:
            return float(np.vdot(state.amplitudes, state.amplitudes).real) - weight
        return weight


@dataclass(frozen=True, eq=False)
class RecorderUnitary:
    """Controlled recording unitary sum_i P_i (x) C_i.

    The projectors P_i form a projective measurement on the control factors;
    each C_i is a small unitary on the register factor (last in the layout).
    Unitarity holds whenever the P_i are complete and orthogonal and every
    C_i is unitary, which the factory constructions guarantee.
    """

    layout: SpaceLayout
    control_layout: SpaceLayout
    register_label: str
    projectors: tuple[object, ...]
    register_unitaries: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        if len(self.projectors) != len(self.register_unitaries):
            raise ValueError("one register unitary per control projector required")
        reg_dim = self.layout.dim(self.register_label)
        frozen = []
        for mat in self.register_unitaries:
            arr = _frozen_array(mat)
            if arr.shape != (reg_dim, reg_dim):
                raise ValueError(f"register unitary has shape {arr.shape}, expected ({reg_dim}, {reg_dim})")
            if np.max(np.abs(arr.conj().T @ arr - np.eye(reg_dim))) > NORM_TOL:
                raise ValueError("register operation is not unitary")
            frozen.append(arr)
        object.__setattr__(self, "register_unitaries", tuple(frozen))
        object.__setattr__(self, "projectors", tuple(self.projectors))

    @property
    def matrix(self) -> np.ndarray:
        """Dense materialization in this operator's own factor order."""
        n = self.layout.total_dim
        reg_ax = self.layout.axis(self.register_label)
        dense = np.zeros((n, n), dtype=np.complex128)
        shape = self.layout.shape
        view = dense.reshape(shape + shape)
        for proj, reg_u in zip(self.projectors, self.register_unitaries):
            ctrl = proj.matrix.reshape(self.control_layout.shape + self.control_layout.shape)
            k = len(self.control_layout.shape)
            term = np.tensordot(ctrl, reg_u, axes=0)
            # term axes: ctrl rows, ctrl cols, reg row, reg col -> interleave
            ctrl_axes = [self.layout.axis(l) for l in self.control_layout.labels]
            perm_rows = [0] * len(shape)
            perm_cols = [0] * len(shape)
            for i, ax in enumerate(ctrl_axes):
                perm_rows[ax] = i
                perm_cols[ax] = k + i
            perm_rows[reg_ax] = 2 * k
            perm_cols[reg_ax] = 2 * k + 1
            view += term.transpose(perm_rows + perm_cols)
        return dense

    def apply_amplitudes(self, state: StateVector) -> np.ndarray:
        try:
            reg_ax = state.layout.axis(self.register_label)
        except ValueError as exc:
            raise LayoutMismatchError(str(exc)) from None
        tensor = state.tensor()
        out = np.zeros_like(tensor)
        for proj, reg_u in zip(self.projectors, self.register_unitaries):
            shifted = np.moveaxis(
                np.tensordot(reg_u, tensor, axes=([1], [reg_ax])), 0, reg_ax
            )
            projected = proj.apply_amplitudes(
                StateVectorView(state.layout, shifted.reshape(-1))
            )
            out += projected.reshape(state.layout.shape)
        return out.reshape(-1)

    def expectation(self, state: StateVector) -> float:
        value = complex(np.vdot(state.amplitudes, self.apply_amplitudes(state)))
        if abs(value.imag) > PROB_TOL:
            raise ValueError(f"expectation value {value!r} is not real within {PROB_TOL}")
        return float(value.real)


class StateVectorView:
    """Unnormalized stand-in for StateVector inside operator pipelines."""

    __slots__ = ("layout", "amplitudes")

    def __init__(self, layout: SpaceLayout, amplitudes: np.ndarray):
        self.layout = layout
        self.amplitudes = amplitudes

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape(self.layout.shape)


@dataclass(frozen=True)
class PredictionTable:
    """Ordered outcome-label -> probability map, tagged with its generating rule."""

    entries: tuple[tuple[str, float], ...]
    provenance: str = "born"

    def __post_init__(self) -> None:
        entries = tuple((str(label), float(p)) for label, p in self.entries)
        object.__setattr__(self, "entries", entries)
        labels = [label for label, _ in entries]
        if len(set(labels)) != len(labels):
            raise ValueError("outcome labels must be distinct")
        for label, p in entries:
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"probability for {label!r} is {p}, outside [0, 1]")
        total = sum(p for _, p in entries)
        if abs(total - 1.0) > PROB_SUM_TOL:
            raise ValueError(f"probabilities sum to {total!r}, not 1 within {PROB_SUM_TOL}")

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.entries)

    def __getitem__(self, label: str) -> float:
        for name, p in self.entries:
            if name == label:
                return p
        raise KeyError(label)

    def as_dict(self) -> dict[str, float]:
        return dict(self.entries)

    def with_provenance(self, provenance: str) -> PredictionTable:
        return PredictionTable(self.entries, provenance)


@dataclass(frozen=True, eq=False)
class ProjectiveMeasurement:
    """Labeled set of mutually orthogonal projectors summing to identity."""

    layout: SpaceLayout
    outcomes: tuple[tuple[str, object], ...]

    def __post_init__(self) -> None:
        outcomes = tuple((str(label), proj) for label, proj in self.outcomes)
        object.__setattr__(self, "outcomes", outcomes)
        if not outcomes:
            raise ValueError("measurement needs at least one outcome")
        labels = [label for label, _ in outcomes]
        if len(set(labels)) != len(labels):
            raise ValueError("outcome labels must be distinct")
        for label, proj in outcomes:
            if proj.layout != self.layout:
                raise LayoutMismatchError(
                    f"projector for outcome {label!r} lives on {proj.layout.factors}, "
                    f"measurement on {self.layout.factors}"
                )

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.outcomes)

    def projector(self, label: str):
        for name, proj in self.outcomes:
            if name == label:
                return proj
        raise KeyError(label)

    def validate(self, tol: float = NORM_TOL) -> float:
        """Dense completeness/orthogonality/idempotence check; returns max defect.

        Materializes every projector, so use at small dimension only.
        """
        n = self.layout.total_dim
        dense = [proj.matrix for _, proj in self.outcomes]
        defect = float(np.max(np.abs(sum(dense) - np.eye(n))))
        for mat in dense:
            defect = max(defect, float(np.max(np.abs(mat - mat.conj().T))))
            defect = max(defect, float(np.max(np.abs(mat @ mat - mat))))
        for i in range(len(dense)):
            for j in range(i + 1, len(dense)):
                defect = max(defect, float(np.max(np.abs(dense[i] @ dense[j]))))
        if defect > tol:
            raise ValueError(f"measurement defect {defect:.3e} exceeds {tol}")
        return defect


def make_basis_state(layout: SpaceLayout, indices: Sequence[int]) -> StateVector:
    """Computational basis vector with one index per factor."""
    amps = np.zeros(layout.total_dim, dtype=np.complex128)
    amps[layout.flat_index(indices)] = 1.0
    return StateVector(layout, amps)


def uniform_superposition(layout: SpaceLayout, factor: str) -> StateVector:
    """Equal-weight superposition over one factor's basis, others at index 0."""
    ax = layout.axis(factor)
    d = layout.shape[ax]
    tensor = np.zeros(layout.shape, dtype=np.complex128)
    sl = [0] * len(layout.shape)
    sl[ax] = slice(None)
    tensor[tuple(sl)] = 1.0 / np.sqrt(d)
    return StateVector(layout, tensor.reshape(-1))


def apply(op, state: StateVector) -> StateVector:
    """Apply an operator (dense or structured) to a state.

    The operator may live on the full layout or on a labeled subset of its
    factors; the result is renormalization-free, so this is meant for
    unitaries (projection goes through :func:`collapse`).
    """
    return StateVector(state.layout, op.apply_amplitudes(state))


def embed(op, full: SpaceLayout):
    """Extend an operator to a larger layout, identity on the other factors.

    Handles arbitrary factor positions (the operator's factors need not be
    adjacent in the full layout).  Dense operators come back dense;
    subspace projectors stay in block form.
    """
    for label, dim in op.layout.factors:
        if full.dim(label) != dim:
            raise LayoutMismatchError(
                f"factor {label!r} has dim {dim} in the operator, {full.dim(label)} in the target"
            )
    other = [(label, dim) for label, dim in full.factors if label not in op.layout.labels]

    if isinstance(op, SubspaceProjector):
        block_tensor = op.block.reshape(op.layout.shape + (op.block.shape[1],))
        subs = []
        letters = iter("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ")
        row = {label: next(letters) for label in full.labels}
        col = {label: next(letters) for label, _ in other}
        rank_letter = next(letters)
        operands = [block_tensor]
        subs.append("".join(row[l] for l in op.layout.labels) + rank_letter)
        for label, dim in other:
            operands.append(np.eye(dim, dtype=np.complex128))
            subs.append(row[label] + col[label])
        out_sub = (
            "".join(row[l] for l in full.labels)
            + rank_letter
            + "".join(col[label] for label, _ in other)
        )
        big = np.einsum(",".join(subs) + "->" + out_sub, *operands, optimize=True)
        big = big.reshape(full.total_dim, -1)
        return SubspaceProjector(full, big, complement=op.complement)

    matrix = op.matrix
    op_tensor = matrix.reshape(op.layout.shape + op.layout.shape)
    letters = iter("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ")
    row = {label: next(letters) for label in full.labels}
    col = {label: next(letters) for label in full.labels}
    operands = [op_tensor]
    subs = [
        "".join(row[l] for l in op.layout.labels)
        + "".join(col[l] for l in op.layout.labels)
    ]
    for label, dim in other:
        operands.append(np.eye(dim, dtype=np.complex128))
        subs.append(row[label] + col[label])
    out_sub = "".join(row[l] for l in full.labels) + "".join(col[l] for l in full.labels)
    big = np.einsum(",".join(subs) + "->" + out_sub, *operands, optimize=True)
    n = full.total_dim
    return Operator(full, big.reshape(n, n))


def factor_basis_projector(layout: SpaceLayout, label: str, index: int) -> SubspaceProjector:
    """Projector |index><index| on one factor, identity on the others."""
    ax = layout.axis(label)
    dim = layout.shape[ax]
    if not 0 <= index < dim:
        raise ValueError(f"index {index} out of range for factor {label!r} (dim {dim})")
    flat = np.arange(layout.total_dim).reshape(layout.shape)
    cols = np.take(flat, index, axis=ax).reshape(-1)
    block = np.zeros((layout.total_dim, cols.size), dtype=np.complex128)
    block[cols, np.arange(cols.size)] = 1.0
    return SubspaceProjector(layout, block)


def born_probabilities(
    state: StateVector, m: ProjectiveMeasurement, provenance: str = "born"
) -> PredictionTable:
    """Outcome probabilities <psi|P_i|psi> of a projective measurement."""
    _require_same_layout(state.layout, m.layout)
    entries = []
    for label, proj in m.outcomes:
        p = proj.expectation(state)
        if p < -PROB_TOL or p > 1.0 + PROB_TOL:
            raise ValueError(f"Born weight {p!r} for outcome {label!r} outside [0, 1] band")
        entries.append((label, min(max(p, 0.0), 1.0)))
    return PredictionTable(tuple(entries), provenance)


def sample_outcome(table: PredictionTable, rng: np.random.Generator) -> str:
    """Draw one outcome label; deterministic given the stream state."""
    u = rng.random()
    acc = 0.0
    for label, p in table.entries:
        acc += p
        if u < acc:
            return label
    return table.entries[-1][0]


def collapse(state: StateVector, projector) -> StateVector:
    """Measurement-update: P psi / ||P psi||, rejecting impossible outcomes."""
    weight = projector.expectation(state)
    if weight <= ZERO_PROB:
        raise ImpossibleOutcomeError(
            f"collapse weight {weight!r} is not positive; outcome cannot occur"
        )
    raw = projector.apply_amplitudes(state)
    return StateVector(state.layout, raw / np.linalg.norm(raw))
