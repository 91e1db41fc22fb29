"""Self-contained property checks behind the ``verify`` CLI command.

Each check computes a worst-case deviation against a fixed tolerance over a
deterministic set of dimensions/randomized cases.  ``phase_mismatch`` is a
test hook: it offsets the phases of the outside lab measurement relative to
the measurement unitary, which must make the eigenstate check fail.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dilation import (
    DilationSpec,
    build_dilation,
    build_friend_measurement,
    build_open_lab_measurement,
    build_wigner_measurement,
    entangled_lab_state,
)
from .hilbert import (
    Operator,
    StateVector,
    born_probabilities,
    collapse,
    factor_basis_projector,
)
from .protocol import RULES, ProtocolConfig, run_protocol
from .rules import (
    modified_born_conditional,
    same_system_scenario,
    standard_update_prediction,
    wigner_scenario,
    modified_born_joint,
)


@dataclass(frozen=True)
class CheckResult:
    name: str
    max_deviation: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_deviation <= self.tolerance


def _dense(op) -> Operator:
    return Operator(op.layout, op.matrix)


def check_dilation_unitarity() -> CheckResult:
    rng = np.random.default_rng(20240811)
    worst = 0.0
    for d in (2, 3, 5, 9):
        spec = DilationSpec(d, tuple(rng.uniform(0.0, 2.0 * np.pi, size=d)))
        worst = max(worst, _dense(build_dilation(spec)).unitarity_defect())
    return CheckResult("dilation_unitarity", worst, 1e-12)


def check_measurement_validity() -> CheckResult:
    worst = 0.0
    for d in (2, 3, 4):
        spec = DilationSpec(d)
        for m in (
            build_friend_measurement(spec),
            build_wigner_measurement(spec),
            build_open_lab_measurement(spec),
        ):
            worst = max(worst, m.validate(tol=1e-12))
    return CheckResult("measurement_completeness_orthogonality", worst, 1e-12)


def check_eigenstate_invariance(phase_mismatch: float = 0.0) -> CheckResult:
    worst = 0.0
    for d in (2, 4, 8, 16, 32, 64, 128):
        spec = DilationSpec(d)
        lab = entangled_lab_state(spec)
        offsets = [0.0] * d
        offsets[1 % d] = phase_mismatch
        measured_spec = DilationSpec(d, tuple(offsets))
        m = build_wigner_measurement(measured_spec)
        table = born_probabilities(lab, m)
        worst = max(worst, abs(table["+"] - 1.0), table["-"])
        post = collapse(lab, m.projector("+"))
        worst = max(worst, abs(1.0 - post.fidelity(lab)))
    return CheckResult("lab_state_eigenstate_invariance", worst, 1e-12)


def check_conditional_prediction_law() -> CheckResult:
    worst = 0.0
    for d in (2, 3, 8, 16, 64):
        spec = DilationSpec(d)
        lab = entangled_lab_state(spec)
        m = build_wigner_measurement(spec)
        for j in range(d):
            post = collapse(lab, factor_basis_projector(lab.layout, "S", j))
            table = standard_update_prediction(post, m)
            worst = max(worst, abs(table["+"] - 1.0 / d))
    return CheckResult("conditional_prediction_law", worst, 1e-12)


def _random_state(rng: np.random.Generator, d: int) -> np.ndarray:
    vec = rng.normal(size=d) + 1j * rng.normal(size=d)
    return vec / np.linalg.norm(vec)


def _random_basis(rng: np.random.Generator, d: int) -> np.ndarray:
    gauss = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, r = np.linalg.qr(gauss)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def check_same_system_equivalence(cases: int = 200) -> CheckResult:
    rng = np.random.default_rng(977)
    worst = 0.0
    for _ in range(cases):
        d = int(rng.integers(2, 9))
        initial = _random_state(rng, d)
        basis = _random_basis(rng, d)
        scenario = same_system_scenario(d, initial, basis)
        for j in range(d):
            weight_j = abs(initial[j]) ** 2
            for k in range(d):
                expected = weight_j * abs(np.vdot(basis[:, k], np.eye(d)[:, j])) ** 2
                got = modified_born_joint(scenario, str(j), str(k))
                worst = max(worst, abs(got - expected))
    return CheckResult("same_system_equivalence", worst, 1e-10)


def check_record_rule_correction() -> CheckResult:
    worst = 0.0
    for d in (2, 3, 8, 16, 64):
        spec = DilationSpec(d)
        scenario = wigner_scenario(spec)
        lab = entangled_lab_state(spec)
        m = build_wigner_measurement(spec)
        for j, label in enumerate(spec.outcome_labels):
            worst = max(worst, abs(modified_born_conditional(scenario, "+", label) - 1.0))
            post = collapse(lab, factor_basis_projector(lab.layout, "S", j))
            worst = max(
                worst, abs(standard_update_prediction(post, m)["+"] - 1.0 / d)
            )
    return CheckResult("record_rule_correction", worst, 1e-12)


def check_prediction_non_disclosure() -> CheckResult:
    worst = 0.0
    for rule in RULES:
        log, _ = run_protocol(ProtocolConfig(dimension=3, trials=120, seed=11, rule=rule))
        first = log.records[0].prediction
        for record in log.records:
            if record.prediction.labels != first.labels:
                worst = max(worst, 1.0)
            for label in first.labels:
                worst = max(worst, abs(record.prediction[label] - first[label]))
    return CheckResult("prediction_non_disclosure", worst, 0.0)


def check_variant_equivalence() -> CheckResult:
    base = dict(dimension=2, trials=300, seed=5, rule="standard")
    _, report_out = run_protocol(ProtocolConfig(**base, variant="messages_out"))
    _, report_in = run_protocol(ProtocolConfig(**base, variant="wigner_reports"))
    deviation = 0.0 if report_out == report_in else 1.0
    return CheckResult("variant_equivalence", deviation, 0.0)


def check_reproducibility() -> CheckResult:
    config = ProtocolConfig(dimension=4, trials=250, seed=99, rule="standard")
    log_a, report_a = run_protocol(config)
    log_b, report_b = run_protocol(config)
    deviation = 0.0 if (log_a == log_b and report_a == report_b) else 1.0
    return CheckResult("run_reproducibility", deviation, 0.0)


def run_checks(phase_mismatch: float = 0.0) -> list[CheckResult]:
    return [
        check_dilation_unitarity(),
        check_measurement_validity(),
        check_eigenstate_invariance(phase_mismatch),
        check_conditional_prediction_law(),
        check_same_system_equivalence(),
        check_record_rule_correction(),
        check_prediction_non_disclosure(),
        check_variant_equivalence(),
        check_reproducibility(),
    ]
