"""Measurements as entangling unitaries, and the measurements of the experiment.

A measurement with outcomes i = 0..k-1 on some control factors is recorded
into a fresh register of dimension k+1 whose index 0 is the ready state.
The recording unitary is sum_i P_i (x) C_i where C_i is the cyclic shift
by i+1 on the register, carrying an optional phase on the ready -> outcome
transition only.  Restricted to the ready sector this sends an eigenstate
of outcome i to itself with the register pointing at record i+1; the cyclic
shift is one explicit, testable choice among the many unitary completions
off that sector, and nothing downstream depends on the off-sector action.

For a d-dimensional system measured in its computational basis this yields
the friend's measurement unitary on system (x) memory; recording the
outside +/- measurement into a second register yields the second stage of
the two-step scenarios in :mod:`wignerlab.rules`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hilbert import (
    ProjectiveMeasurement,
    RecorderUnitary,
    SpaceLayout,
    StateVector,
    SubspaceProjector,
)

SYSTEM_LABEL = "S"
MEMORY_LABEL = "F"


@dataclass(frozen=True)
class DilationSpec:
    """System dimension and per-outcome recording phases of the friend's measurement."""

    system_dim: int
    phases: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        d = int(self.system_dim)
        object.__setattr__(self, "system_dim", d)
        if d < 1:
            raise ValueError("system dimension must be >= 1")
        phases = tuple(float(t) for t in self.phases)
        if not phases:
            phases = (0.0,) * d
        if len(phases) != d:
            raise ValueError(f"need {d} phases, got {len(phases)}")
        object.__setattr__(self, "phases", phases)

    @property
    def memory_dim(self) -> int:
        return self.system_dim + 1

    @property
    def outcome_labels(self) -> tuple[str, ...]:
        if self.system_dim == 2:
            return ("up", "down")
        return tuple(str(j) for j in range(self.system_dim))

    @property
    def memory_labels(self) -> tuple[str, ...]:
        """Register labels: ready state first, then one record per outcome."""
        if self.system_dim == 2:
            return ("ready", "U", "D")
        return ("ready",) + tuple(f"a{j}" for j in range(self.system_dim))

    def system_layout(self, label: str = SYSTEM_LABEL) -> SpaceLayout:
        return SpaceLayout(((label, self.system_dim),))

    def lab_layout(
        self, labels: tuple[str, str] = (SYSTEM_LABEL, MEMORY_LABEL)
    ) -> SpaceLayout:
        return SpaceLayout(((labels[0], self.system_dim), (labels[1], self.memory_dim)))


def _cyclic_shift(dim: int, shift: int, ready_phase: float = 0.0) -> np.ndarray:
    """Permutation |m> -> |(m + shift) mod dim>, phased on the 0 -> shift entry."""
    mat = np.zeros((dim, dim), dtype=np.complex128)
    for m in range(dim):
        mat[(m + shift) % dim, m] = 1.0
    mat[shift % dim, 0] = np.exp(1j * ready_phase)
    return mat


def recording_unitary(
    m: ProjectiveMeasurement,
    register_label: str,
    phases: tuple[float, ...] | None = None,
) -> RecorderUnitary:
    """Dilate a projective measurement into a fresh (num outcomes + 1)-dim register."""
    k = len(m.outcomes)
    reg_dim = k + 1
    if phases is None:
        phases = (0.0,) * k
    if len(phases) != k:
        raise ValueError(f"need {k} phases, got {len(phases)}")
    layout = SpaceLayout(m.layout.factors + ((register_label, reg_dim),))
    shifts = tuple(
        _cyclic_shift(reg_dim, i + 1, phases[i]) for i in range(k)
    )
    return RecorderUnitary(
        layout=layout,
        control_layout=m.layout,
        register_label=register_label,
        projectors=tuple(proj for _, proj in m.outcomes),
        register_unitaries=shifts,
    )


def build_friend_measurement(
    spec: DilationSpec, label: str = SYSTEM_LABEL
) -> ProjectiveMeasurement:
    """Computational-basis measurement on the system factor alone."""
    layout = spec.system_layout(label)
    eye = np.eye(spec.system_dim, dtype=np.complex128)
    outcomes = tuple(
        (name, SubspaceProjector(layout, eye[:, j : j + 1]))
        for j, name in enumerate(spec.outcome_labels)
    )
    return ProjectiveMeasurement(layout, outcomes)


def build_dilation(
    spec: DilationSpec, labels: tuple[str, str] = (SYSTEM_LABEL, MEMORY_LABEL)
) -> RecorderUnitary:
    """Unitary on system (x) memory sending |j>|ready> to e^(i phase_j) |j>|record j>."""
    return recording_unitary(
        build_friend_measurement(spec, labels[0]), labels[1], spec.phases
    )


def entangled_lab_state(
    spec: DilationSpec, labels: tuple[str, str] = (SYSTEM_LABEL, MEMORY_LABEL)
) -> StateVector:
    """Post-measurement lab state: (1/sqrt d) sum_j e^(i phase_j) |j>|record j>."""
    d = spec.system_dim
    layout = spec.lab_layout(labels)
    tensor = np.zeros(layout.shape, dtype=np.complex128)
    for j in range(d):
        tensor[j, j + 1] = np.exp(1j * spec.phases[j]) / np.sqrt(d)
    return StateVector(layout, tensor.reshape(-1))


def build_wigner_measurement(
    spec: DilationSpec, labels: tuple[str, str] = (SYSTEM_LABEL, MEMORY_LABEL)
) -> ProjectiveMeasurement:
    """Two-outcome lab measurement: rank-1 projector onto the entangled lab state
    (outcome "+") and its complement (outcome "-")."""
    layout = spec.lab_layout(labels)
    target = entangled_lab_state(spec, labels)
    plus = SubspaceProjector(layout, target.amplitudes.reshape(-1, 1))
    minus = SubspaceProjector(layout, target.amplitudes.reshape(-1, 1), complement=True)
    return ProjectiveMeasurement(layout, (("+", plus), ("-", minus)))


def open_lab_label(spec: DilationSpec, system_index: int, memory_index: int) -> str:
    """Label of one product-basis outcome of the open-the-lab measurement."""
    sys_names = spec.outcome_labels
    mem_names = spec.memory_labels
    return f"{sys_names[system_index]}:{mem_names[memory_index]}"


def build_open_lab_measurement(
    spec: DilationSpec, labels: tuple[str, str] = (SYSTEM_LABEL, MEMORY_LABEL)
) -> ProjectiveMeasurement:
    """Full product-basis measurement on the lab: d*(d+1) rank-1 outcomes.

    Materializes one basis column per outcome, so keep the dimension small;
    the protocol runner samples this distribution directly instead.
    """
    layout = spec.lab_layout(labels)
    eye = np.eye(layout.total_dim, dtype=np.complex128)
    outcomes = []
    for z in range(spec.system_dim):
        for m in range(spec.memory_dim):
            flat = layout.flat_index((z, m))
            outcomes.append(
                (open_lab_label(spec, z, m), SubspaceProjector(layout, eye[:, flat : flat + 1]))
            )
    return ProjectiveMeasurement(layout, tuple(outcomes))
