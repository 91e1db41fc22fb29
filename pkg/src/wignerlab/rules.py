"""The three prediction rules an in-lab observer can use for the outside measurement.

* Standard update: collapse on the observed outcome, then Born probabilities
  of the outside measurement on the collapsed lab state.  For the entangled
  lab this predicts p(+) = 1/d whatever the observed outcome.
* Pair of states: keep two descriptions at once - a collapsed system state
  for predictions about the system, and the outside observer's entangled lab
  state for predictions about the whole lab.  System-side updates never touch
  the lab component.
* Two-step record rule: describe both measurements as recording unitaries
  into memory registers 1 and 2, evolve the full state, and read joint
  outcome probabilities as squared projections onto the register records:

      p(j, k) = || (1 (x) |a_j><a_j|_1 (x) |b_k><b_k|_2) |Phi_total> ||^2
      p(k | j) = p(j, k) / sum_k' p(j, k')

  On a single system measured twice this reproduces the standard update
  rule's p(k|j) = |<b_k|j>|^2; in the friend-inside-a-lab scenario it
  predicts p(+|j) = 1, matching what the outside observer actually sees.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dilation import (
    DilationSpec,
    build_friend_measurement,
    build_wigner_measurement,
    recording_unitary,
)
from .hilbert import (
    NORM_TOL,
    ZERO_PROB,
    ImpossibleOutcomeError,
    PredictionTable,
    ProjectiveMeasurement,
    SpaceLayout,
    StateVector,
    SubspaceProjector,
    apply,
    born_probabilities,
    collapse,
    uniform_superposition,
)

RULE_STANDARD = "standard"
RULE_PAIR = "pair"
RULE_MODIFIED = "modified"

REGISTER_1 = "1"
REGISTER_2 = "2"


def standard_update_prediction(
    post_outcome_state: StateVector, m: ProjectiveMeasurement
) -> PredictionTable:
    """Born probabilities of m on the state collapsed by the observed outcome."""
    return born_probabilities(post_outcome_state, m, provenance=RULE_STANDARD)


@dataclass(frozen=True, eq=False)
class PairOfStates:
    """Collapsed system state plus the outside observer's entangled lab state."""

    system_state: StateVector
    lab_state: StateVector


def pair_predict(
    pair: PairOfStates, target: str, m: ProjectiveMeasurement
) -> PredictionTable:
    """Predict with the component matching the target: "system" or "lab"."""
    if target == "system":
        state = pair.system_state
    elif target == "lab":
        state = pair.lab_state
    else:
        raise ValueError(f"target must be 'system' or 'lab', got {target!r}")
    return born_probabilities(state, m, provenance=RULE_PAIR)


def pair_update_on_system_outcome(pair: PairOfStates, projector) -> PairOfStates:
    """Collapse the system component on an observed outcome; the lab component
    is carried over untouched (same amplitude array)."""
    return PairOfStates(collapse(pair.system_state, projector), pair.lab_state)


@dataclass(frozen=True, eq=False)
class SequentialScenario:
    """Two recording measurements on registers "1" and "2".

    ``first_unitary`` records into register 1, ``second_unitary`` into
    register 2; both may act on any labeled subset of the layout.  The
    register bases list the record states (label, vector) that count as
    outcomes; the ready state is not among them.
    """

    layout: SpaceLayout
    initial: StateVector
    first_unitary: object
    second_unitary: object
    register1_basis: tuple[tuple[str, np.ndarray], ...]
    register2_basis: tuple[tuple[str, np.ndarray], ...]

    def __post_init__(self) -> None:
        if self.initial.layout != self.layout:
            raise ValueError("initial state must live on the scenario layout")
        for attr, label in (("register1_basis", REGISTER_1), ("register2_basis", REGISTER_2)):
            dim = self.layout.dim(label)
            basis = tuple(
                (str(name), np.asarray(vec, dtype=np.complex128).reshape(-1))
                for name, vec in getattr(self, attr)
            )
            names = [name for name, _ in basis]
            if len(set(names)) != len(names):
                raise ValueError(f"duplicate outcome labels in {attr}")
            stack = np.stack([vec for _, vec in basis], axis=1)
            if stack.shape[0] != dim:
                raise ValueError(f"{attr} vectors must have dimension {dim}")
            gram = stack.conj().T @ stack
            if np.max(np.abs(gram - np.eye(stack.shape[1]))) > NORM_TOL:
                raise ValueError(f"{attr} states are not orthonormal")
            object.__setattr__(self, attr, basis)
        object.__setattr__(self, "_cached_total", None)

    def register_vector(self, register: str, label: str) -> np.ndarray:
        basis = self.register1_basis if register == REGISTER_1 else self.register2_basis
        for name, vec in basis:
            if name == label:
                return vec
        raise ValueError(f"unknown outcome label {label!r} for register {register}")


def total_state(scenario: SequentialScenario) -> StateVector:
    """Both recordings applied to the initial state (cached on the scenario)."""
    cached = scenario._cached_total
    if cached is None:
        cached = apply(
            scenario.second_unitary, apply(scenario.first_unitary, scenario.initial)
        )
        object.__setattr__(scenario, "_cached_total", cached)
    return cached


def _record_projection_weight(
    scenario: SequentialScenario, j_label: str, k_label: str
) -> float:
    """Squared norm of the total state projected on records j (reg 1), k (reg 2)."""
    alpha = scenario.register_vector(REGISTER_1, j_label)
    beta = scenario.register_vector(REGISTER_2, k_label)
    tensor = total_state(scenario).tensor()
    ax1 = scenario.layout.axis(REGISTER_1)
    ax2 = scenario.layout.axis(REGISTER_2)
    part = np.tensordot(tensor, alpha.conj(), axes=([ax1], [0]))
    ax2_shifted = ax2 - (1 if ax2 > ax1 else 0)
    part = np.tensordot(part, beta.conj(), axes=([ax2_shifted], [0]))
    return float(np.vdot(part, part).real)


def modified_born_joint(
    scenario: SequentialScenario, j_label: str, k_label: str
) -> float:
    """Joint probability of record j in register 1 and record k in register 2."""
    p = _record_projection_weight(scenario, j_label, k_label)
    return min(max(p, 0.0), 1.0)


def modified_born_conditional(
    scenario: SequentialScenario, k_label: str, j_label: str
) -> float:
    """Probability of second-measurement record k given first-measurement record j."""
    joint = modified_born_joint(scenario, j_label, k_label)
    marginal = sum(
        modified_born_joint(scenario, j_label, name)
        for name, _ in scenario.register2_basis
    )
    if marginal <= ZERO_PROB:
        raise ImpossibleOutcomeError(
            f"first-measurement record {j_label!r} has zero probability; "
            "cannot condition on it"
        )
    return min(max(joint / marginal, 0.0), 1.0)


def wigner_scenario(
    spec: DilationSpec, initial_system: StateVector | None = None
) -> SequentialScenario:
    """Friend-inside-a-lab scenario: the system measurement recorded into
    register 1, the outside +/- lab measurement recorded into register 2."""
    d = spec.system_dim
    layout = SpaceLayout(
        (("S", d), (REGISTER_1, spec.memory_dim), (REGISTER_2, 3))
    )
    if initial_system is None:
        system_amps = uniform_superposition(spec.system_layout(), "S").amplitudes
    else:
        if initial_system.layout.total_dim != d:
            raise ValueError("initial system state has the wrong dimension")
        system_amps = initial_system.amplitudes
    tensor = np.zeros(layout.shape, dtype=np.complex128)
    tensor[:, 0, 0] = system_amps
    initial = StateVector(layout, tensor.reshape(-1))

    first = recording_unitary(build_friend_measurement(spec, "S"), REGISTER_1, spec.phases)
    lab_measurement = build_wigner_measurement(spec, ("S", REGISTER_1))
    second = recording_unitary(lab_measurement, REGISTER_2)

    reg1 = np.eye(spec.memory_dim, dtype=np.complex128)
    reg2 = np.eye(3, dtype=np.complex128)
    register1_basis = tuple(
        (name, reg1[:, j + 1]) for j, name in enumerate(spec.outcome_labels)
    )
    register2_basis = (("+", reg2[:, 1]), ("-", reg2[:, 2]))
    return SequentialScenario(
        layout=layout,
        initial=initial,
        first_unitary=first,
        second_unitary=second,
        register1_basis=register1_basis,
        register2_basis=register2_basis,
    )


def same_system_scenario(
    dimension: int,
    initial_system: np.ndarray,
    second_basis: np.ndarray,
) -> SequentialScenario:
    """Both measurements on the same system: first in the computational basis,
    then in the orthonormal basis given by the columns of ``second_basis``."""
    d = int(dimension)
    spec = DilationSpec(d)
    layout = SpaceLayout(
        (("S", d), (REGISTER_1, d + 1), (REGISTER_2, d + 1))
    )
    system_amps = np.asarray(initial_system, dtype=np.complex128).reshape(-1)
    if system_amps.shape != (d,):
        raise ValueError(f"initial system state must have dimension {d}")
    tensor = np.zeros(layout.shape, dtype=np.complex128)
    tensor[:, 0, 0] = system_amps
    initial = StateVector(layout, tensor.reshape(-1))

    basis = np.asarray(second_basis, dtype=np.complex128)
    if basis.shape != (d, d):
        raise ValueError(f"second basis must be a {d}x{d} matrix of columns")
    if np.max(np.abs(basis.conj().T @ basis - np.eye(d))) > NORM_TOL:
        raise ValueError("second basis columns are not orthonormal")
    system_layout = spec.system_layout()
    second_m = ProjectiveMeasurement(
        system_layout,
        tuple(
            (str(k), SubspaceProjector(system_layout, basis[:, k : k + 1]))
            for k in range(d)
        ),
    )
    first = recording_unitary(build_friend_measurement(spec, "S"), REGISTER_1)
    second = recording_unitary(second_m, REGISTER_2)

    records = np.eye(d + 1, dtype=np.complex128)
    register1_basis = tuple((str(j), records[:, j + 1]) for j in range(d))
    register2_basis = tuple((str(k), records[:, k + 1]) for k in range(d))
    return SequentialScenario(
        layout=layout,
        initial=initial,
        first_unitary=first,
        second_unitary=second,
        register1_basis=register1_basis,
        register2_basis=register2_basis,
    )
