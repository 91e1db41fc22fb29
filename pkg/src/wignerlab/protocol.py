"""Monte Carlo runner for the repeated prediction-versus-observation protocol.

Each round: (a) the in-lab observer measures the system and records an
outcome, (b) she writes down a prediction for the outside +/- measurement
on the whole lab under the configured rule, (c) the outside measurement is
performed and its outcome recorded.  Because the measured lab state is an
eigenstate of the outside measurement, the lab returns to the same state
after every round, so rounds are i.i.d.; the per-round joint law is the
system outcome drawn from its Born marginal and the outside outcome drawn
from the lab-state Born distribution (identically "+").  After the last
round the lab is opened: one product-basis measurement collapses it to a
definite (system, memory) configuration.

The accumulated predictions and the observed outside statistics are then
compared (total variation distance, Pearson chi-square).  Two narrative
variants exist - the prediction notes leave the lab each round, or the
outside outcomes are reported back in - and produce identical numbers.

Every round owns a counter-derived Philox stream, so runs are reproducible
bit-for-bit and rounds are independent of evaluation order.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy.stats import chi2

from .dilation import (
    DilationSpec,
    build_friend_measurement,
    build_wigner_measurement,
    entangled_lab_state,
    open_lab_label,
)
from .hilbert import (
    PredictionTable,
    StateVector,
    born_probabilities,
    collapse,
    factor_basis_projector,
    make_basis_state,
    sample_outcome,
    uniform_superposition,
)
from .rules import (
    RULE_MODIFIED,
    RULE_PAIR,
    RULE_STANDARD,
    PairOfStates,
    modified_born_conditional,
    pair_predict,
    pair_update_on_system_outcome,
    standard_update_prediction,
    wigner_scenario,
)

RULES = (RULE_STANDARD, RULE_PAIR, RULE_MODIFIED)
VARIANT_MESSAGES_OUT = "messages_out"
VARIANT_WIGNER_REPORTS = "wigner_reports"
VARIANTS = (VARIANT_MESSAGES_OUT, VARIANT_WIGNER_REPORTS)

ZERO_EXPECTED = 1e-12


@dataclass(frozen=True)
class ProtocolConfig:
    dimension: int = 2
    trials: int = 10_000
    seed: int = 42
    rule: str = RULE_STANDARD
    variant: str = VARIANT_MESSAGES_OUT
    phases: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "dimension", int(self.dimension))
        object.__setattr__(self, "trials", int(self.trials))
        object.__setattr__(self, "seed", int(self.seed))
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")
        if self.rule not in RULES:
            raise ValueError(f"rule must be one of {RULES}, got {self.rule!r}")
        variant = str(self.variant).replace("-", "_")
        if variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        object.__setattr__(self, "variant", variant)
        if self.phases is not None:
            phases = tuple(float(t) for t in self.phases)
            if len(phases) != self.dimension:
                raise ValueError(
                    f"need {self.dimension} phases, got {len(phases)}"
                )
            object.__setattr__(self, "phases", phases)

    def dilation_spec(self) -> DilationSpec:
        return DilationSpec(self.dimension, self.phases or ())


@dataclass(frozen=True, slots=True)
class TrialRecord:
    round_index: int
    friend_outcome: str
    prediction: PredictionTable
    wigner_outcome: str


@dataclass(frozen=True)
class TrialLog:
    """Per-round records plus the two accumulated lists."""

    config: ProtocolConfig
    records: tuple[TrialRecord, ...]

    @property
    def predictions(self) -> tuple[PredictionTable, ...]:
        """The in-lab observer's per-round prediction list."""
        return tuple(r.prediction for r in self.records)

    @property
    def observed_counts(self) -> dict[str, int]:
        """Outside-measurement outcome counts over all rounds."""
        counts = Counter(r.wigner_outcome for r in self.records)
        return {"+": counts.get("+", 0), "-": counts.get("-", 0)}


@dataclass(frozen=True)
class ComparisonReport:
    """Summary comparison of the prediction list against observed statistics."""

    predicted_summary: PredictionTable
    observed_summary: PredictionTable
    tvd: float
    chi2_statistic: float
    p_value: float
    minus_probability_bound: float
    open_lab_outcome: str


def trial_stream(seed: int, index: int) -> np.random.Generator:
    """Private RNG stream for one round: Philox keyed by the run seed with the
    round index placed in the high counter words (disjoint 2^128-draw blocks)."""
    return np.random.Generator(np.random.Philox(key=seed, counter=index << 128))


def total_variation_distance(a: PredictionTable, b: PredictionTable) -> float:
    """Half the L1 distance between two outcome tables (union of labels)."""
    labels = list(dict.fromkeys(a.labels + b.labels))
    acc = 0.0
    for label in labels:
        pa = a[label] if label in a.labels else 0.0
        pb = b[label] if label in b.labels else 0.0
        acc += abs(pa - pb)
    return 0.5 * acc


def chi_square_report(
    predicted: PredictionTable, observed_counts: Mapping[str, int], trials: int
) -> tuple[float, float]:
    """Pearson goodness-of-fit of observed counts against a predicted table.

    Cells with predicted probability below 1e-12 are dropped when their
    observed count is zero; a populated cell with zero prediction yields an
    infinite statistic (p-value 0).  Degrees of freedom: retained cells - 1.
    """
    statistic = 0.0
    cells = 0
    for label, p in predicted.entries:
        observed = int(observed_counts.get(label, 0))
        if p < ZERO_EXPECTED:
            if observed == 0:
                continue
            return float("inf"), 0.0
        expected = trials * p
        statistic += (observed - expected) ** 2 / expected
        cells += 1
    if statistic == 0.0:
        return 0.0, 1.0
    dof = max(cells - 1, 1)
    return statistic, float(chi2.sf(statistic, dof))


def open_lab(
    state: StateVector, spec: DilationSpec, rng: np.random.Generator
) -> tuple[str, StateVector]:
    """Terminal product-basis measurement of the whole lab.

    Samples directly from the squared amplitudes (the Born distribution of
    the full product-basis measurement) and returns the collapsed basis
    state - equivalent to, but far cheaper than, materializing all d*(d+1)
    rank-1 projectors.
    """
    probs = np.abs(state.amplitudes) ** 2
    u = rng.random()
    acc = 0.0
    flat = len(probs) - 1
    for i, p in enumerate(probs):
        acc += p
        if u < acc:
            flat = i
            break
    z, mem = state.layout.unflatten(flat)
    label = open_lab_label(spec, z, mem)
    return label, make_basis_state(state.layout, (z, mem))


def _prediction_tables(
    config: ProtocolConfig, spec: DilationSpec, lab: StateVector, wigner_m
) -> dict[str, PredictionTable]:
    """One prediction table per possible system outcome, under the configured rule.

    Tables are computed once and shared across rounds: the prediction
    depends only on (rule, dimension, outcome), never on anything sampled.
    """
    system_state = uniform_superposition(spec.system_layout(), "S")
    tables: dict[str, PredictionTable] = {}
    if config.rule == RULE_MODIFIED:
        scenario = wigner_scenario(spec)
        for label in spec.outcome_labels:
            p_plus = modified_born_conditional(scenario, "+", label)
            p_minus = modified_born_conditional(scenario, "-", label)
            total = p_plus + p_minus
            tables[label] = PredictionTable(
                (("+", p_plus / total), ("-", p_minus / total)), RULE_MODIFIED
            )
        return tables
    for j, label in enumerate(spec.outcome_labels):
        if config.rule == RULE_STANDARD:
            post = collapse(lab, factor_basis_projector(lab.layout, "S", j))
            tables[label] = standard_update_prediction(post, wigner_m)
        else:
            pair = PairOfStates(system_state, lab)
            system_proj = factor_basis_projector(spec.system_layout(), "S", j)
            updated = pair_update_on_system_outcome(pair, system_proj)
            tables[label] = pair_predict(updated, "lab", wigner_m)
    return tables


def run_protocol(config: ProtocolConfig) -> tuple[TrialLog, ComparisonReport]:
    """Run the three-step protocol for the configured number of rounds."""
    spec = config.dilation_spec()
    lab = entangled_lab_state(spec)
    wigner_m = build_wigner_measurement(spec)
    friend_m = build_friend_measurement(spec)
    system_state = uniform_superposition(spec.system_layout(), "S")

    friend_marginal = born_probabilities(system_state, friend_m)
    wigner_table = born_probabilities(lab, wigner_m)
    predictions = _prediction_tables(config, spec, lab, wigner_m)

    records = []
    for i in range(config.trials):
        rng = trial_stream(config.seed, i)
        friend_outcome = sample_outcome(friend_marginal, rng)
        wigner_outcome = sample_outcome(wigner_table, rng)
        records.append(
            TrialRecord(i, friend_outcome, predictions[friend_outcome], wigner_outcome)
        )
    log = TrialLog(config, tuple(records))

    counts = log.observed_counts
    n = config.trials
    labels = ("+", "-")
    predicted_summary = PredictionTable(
        tuple(
            (label, math.fsum(r.prediction[label] for r in records) / n)
            for label in labels
        ),
        config.rule,
    )
    observed_summary = PredictionTable(
        tuple((label, counts[label] / n) for label in labels), "observed"
    )
    tvd = total_variation_distance(predicted_summary, observed_summary)
    statistic, p_value = chi_square_report(predicted_summary, counts, n)
    minus_bound = 1.0 - wigner_table["+"] ** n

    terminal_rng = trial_stream(config.seed, config.trials)
    outcome_label, _ = open_lab(lab, spec, terminal_rng)

    report = ComparisonReport(
        predicted_summary=predicted_summary,
        observed_summary=observed_summary,
        tvd=tvd,
        chi2_statistic=statistic,
        p_value=p_value,
        minus_probability_bound=minus_bound,
        open_lab_outcome=outcome_label,
    )
    return log, report
