"""Four-step secure quantum network coding protocol on the butterfly graph.

Step 1 prepares the sources: each message wire starts as half of a
maximally entangled pair (its other half kept as a reference), interior
wires start at |0>.  Step 2 runs the classical code coherently, one affine
adder per computed edge, mixing in the scrambling key b1; a wiretap
isometry, when present, is spliced onto its edge right after that edge is
written and before anything downstream reads it.  Step 3 measures the ten
upstream wires in the Fourier basis and broadcasts the outcomes, with the
two outcomes closest to the sinks one-time-padded by the pair key b2.
Step 4 applies outcome-dependent phase corrections at the sinks, after
which each sink wire holds the teleported message wire exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .adversary import AttackSpec
from .classical_code import FLOW_RULES, _coeff, coefficient_matrix
from .engine import RegisterLayout, SparseState, pure_overlap_fidelity
from .ffield import validate_modulus

VARIANT_FULL = "full_pad"
VARIANT_WEAK = "weak_pad_c11_only"
VARIANTS = (VARIANT_FULL, VARIANT_WEAK)

ENTANGLED = "entangled_halves"
GIVEN = "given_states"

# Edges measured in Step 3, in measurement order; edge k lives on wire Hk.
MEASURED_EDGES: tuple[int, ...] = (1, 2, 5, 6, 7, 8, 9, 10, 11)
# Edge values one-time-padded before broadcast.
PADDED_EDGES: tuple[int, ...] = (10, 11)
# Coherent adders are applied in edge order; sinks keep edges 12 and 13.
CODED_EDGES: tuple[int, ...] = (5, 6, 7, 8, 9, 10, 11, 12, 13)

DEFAULT_ENUMERATION_CAP = 3**10


class EnumerationCapExceeded(RuntimeError):
    """Raised when a branch enumeration would exceed the configured cap."""


def wire(edge: int) -> str:
    return f"H{edge}"


@dataclass(frozen=True)
class ProtocolConfig:
    """One protocol run: field size, keys, optional attack, input mode."""

    p: int
    b1: int = 0
    b2: tuple[int, int] = (0, 0)
    attack: AttackSpec | None = None
    variant: str = VARIANT_FULL
    input_mode: str = ENTANGLED
    psi1: np.ndarray | None = None
    psi2: np.ndarray | None = None
    seed: int | None = None

    def __post_init__(self) -> None:
        validate_modulus(self.p)
        object.__setattr__(self, "b1", self.b1 % self.p)
        object.__setattr__(self, "b2", (self.b2[0] % self.p, self.b2[1] % self.p))
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.input_mode not in (ENTANGLED, GIVEN):
            raise ValueError(f"input_mode must be {ENTANGLED!r} or {GIVEN!r}")
        if self.attack is not None and self.attack.p != self.p:
            raise ValueError(f"attack is over F_{self.attack.p}, config over F_{self.p}")
        if self.input_mode == GIVEN:
            for name, psi in (("psi1", self.psi1), ("psi2", self.psi2)):
                if psi is None:
                    raise ValueError(f"{name} is required in given-input mode")
                psi = np.asarray(psi, dtype=complex)
                if psi.shape != (self.p,):
                    raise ValueError(f"{name} must be a length-{self.p} vector")
                if abs(np.vdot(psi, psi).real - 1.0) > 1e-10:
                    raise ValueError(f"{name} must be normalized")
                object.__setattr__(self, name, psi)
        elif self.psi1 is not None or self.psi2 is not None:
            raise ValueError("input vectors are only allowed in given-input mode")


@dataclass(frozen=True)
class Transcript:
    """Broadcast measurement outcomes for one branch.

    ``outcomes`` maps edge index to the announced symbol C_k.  The sinks see
    every outcome (after removing the b2 pad); the wiretapper's view is
    ``eve_record``, which never includes a padded value.
    """

    p: int
    variant: str
    outcomes: dict[int, int]
    b2: tuple[int, int]

    @property
    def padded_broadcast(self) -> tuple[int, int]:
        """The two pad-protected outcomes as actually transmitted."""
        return (
            (self.outcomes[10] + self.b2[0]) % self.p,
            (self.outcomes[11] + self.b2[1]) % self.p,
        )

    @property
    def eve_record(self) -> tuple[int, ...]:
        """Outcomes visible to the wiretapper, in measurement order."""
        hidden = PADDED_EDGES if self.variant == VARIANT_FULL else (11,)
        return tuple(self.outcomes[e] for e in MEASURED_EDGES if e not in hidden)

    def to_json(self) -> dict:
        return {
            "p": self.p,
            "variant": self.variant,
            "outcomes": {str(e): c for e, c in sorted(self.outcomes.items())},
            "padded_broadcast": list(self.padded_broadcast),
            "eve_record": list(self.eve_record),
        }


@dataclass(frozen=True)
class RunResult:
    final_state: SparseState = field(repr=False)
    transcript: Transcript
    branch_probability: float
    fidelity: float

    def to_json(self) -> dict:
        return {
            "transcript": self.transcript.to_json(),
            "branch_probability": self.branch_probability,
            "fidelity": self.fidelity,
        }


def _initial_layout(config: ProtocolConfig) -> RegisterLayout:
    regs: list[tuple[str, int]] = []
    if config.input_mode == ENTANGLED:
        regs += [("ref1", config.p), ("ref2", config.p)]
    regs += [(wire(1), config.p), (wire(2), config.p)]
    regs += [(wire(e), config.p) for e in CODED_EDGES]
    return RegisterLayout(regs)


def step1_initialize(config: ProtocolConfig) -> SparseState:
    """Prepare sources and blank interior wires.

    Entangled mode: each message wire is half of a maximally entangled pair
    whose other half stays behind as a reference register.  Given mode: the
    message wires carry the supplied input vectors directly.
    """
    p = config.p
    layout = _initial_layout(config)
    zeros = (0,) * len(CODED_EDGES)
    if config.input_mode == ENTANGLED:
        amp = 1.0 / p
        amps = {
            (a, b, a, b) + zeros: amp for a in range(p) for b in range(p)
        }
        return SparseState(layout, amps)
    vectors = [np.asarray(config.psi1), np.asarray(config.psi2)]
    vectors += [_basis0(p) for _ in CODED_EDGES]
    return SparseState.from_site_vectors(layout, vectors)


def _basis0(p: int) -> np.ndarray:
    v = np.zeros(p, dtype=complex)
    v[0] = 1.0
    return v


def step2_transmit(state: SparseState, config: ProtocolConfig) -> SparseState:
    """Run the classical code coherently, splicing in any wiretap isometry.

    Each computed edge gets one affine adder built from the same flow table
    as the classical evaluator; the scrambling key b1 enters as the adder
    constant wherever the key edges feed in.  The attack isometry acts on
    its edge immediately after that edge is written.
    """
    p = config.p
    for edge in CODED_EDGES:
        terms = []
        constant = 0
        for src, tag in FLOW_RULES[edge]:
            c = _coeff(tag, p)
            if src in (3, 4):
                constant += c * config.b1
            else:
                terms.append((wire(src), c))
        state = state.apply_affine_adder(wire(edge), terms, constant)
        if config.attack is not None and config.attack.edge == edge:
            state = state.apply_isometry(wire(edge), config.attack.isometry, "E")
    return state


def step3_measure(
    state: SparseState,
    config: ProtocolConfig,
    rng: np.random.Generator | None = None,
    forced: dict[int, int] | None = None,
) -> tuple[SparseState, Transcript, float]:
    """Measure the nine upstream wires in the Fourier basis.

    Outcomes are announced in the negated labeling, chosen so that the
    Step 4 exponents cancel the measurement phases without an extra sign
    flip.  ``forced`` pins outcomes (in announced convention) per edge for
    branch enumeration; everything else is sampled from ``rng``.  Returns
    the post-measurement state, the transcript, and the branch probability.
    """
    p = config.p
    forced = forced or {}
    outcomes: dict[int, int] = {}
    probability = 1.0
    for edge in MEASURED_EDGES:
        if edge in forced:
            engine_outcome = (-forced[edge]) % p
            result = state.measure_x_basis(wire(edge), outcome=engine_outcome, allow_zero=True)
        else:
            result = state.measure_x_basis(wire(edge), rng=rng)
        outcomes[edge] = (-result.outcome) % p
        probability *= result.probability
        state = result.state
        if result.probability == 0.0:
            break
    transcript = Transcript(p=p, variant=config.variant, outcomes=outcomes, b2=config.b2)
    return state, transcript, probability


def recovery_exponents(transcript: Transcript) -> tuple[int, int]:
    """Per-sink phase correction exponents from the announced outcomes.

    Each sink contracts the transcript against the message column of the
    honest coefficient matrix; the scrambling-key column only ever
    contributes a global phase.
    """
    m = coefficient_matrix(transcript.p)
    r1 = sum(transcript.outcomes[e] * int(m.row(e)[0]) for e in MEASURED_EDGES)
    r2 = sum(transcript.outcomes[e] * int(m.row(e)[1]) for e in MEASURED_EDGES)
    return r1 % transcript.p, r2 % transcript.p


def step4_recover(state: SparseState, transcript: Transcript) -> SparseState:
    """Apply the announced-outcome phase corrections at the two sinks."""
    r1, r2 = recovery_exponents(transcript)
    state = state.apply_phase_power(wire(12), -r1)
    state = state.apply_phase_power(wire(13), -r2)
    return state


def ideal_output_state(config: ProtocolConfig) -> SparseState:
    """The target final state: message wires teleported to the sinks.

    Entangled mode pairs each reference with its sink wire; given mode puts
    the input vectors on the sink wires directly.
    """
    p = config.p
    if config.input_mode == ENTANGLED:
        layout = RegisterLayout(
            [("ref1", p), ("ref2", p), (wire(12), p), (wire(13), p)]
        )
        amps = {(a, b, a, b): 1.0 / p for a in range(p) for b in range(p)}
        return SparseState(layout, amps)
    layout = RegisterLayout([(wire(12), p), (wire(13), p)])
    return SparseState.from_site_vectors(layout, [config.psi1, config.psi2])


def output_fidelity(state: SparseState, config: ProtocolConfig) -> float:
    """Fidelity of the post-recovery state with the ideal output.

    Pure overlap when no environment is attached; otherwise the environment
    is traced out first.
    """
    target = ideal_output_state(config)
    if config.attack is None:
        return pure_overlap_fidelity(state, target)
    reduced = state.partial_trace(target.layout.names)
    return reduced.fidelity_with_pure(target)


def run(config: ProtocolConfig, rng: np.random.Generator | None = None) -> RunResult:
    """Execute one full protocol run, sampling the measurement branch."""
    if rng is None:
        rng = np.random.default_rng(config.seed)
    state = step1_initialize(config)
    state = step2_transmit(state, config)
    state, transcript, probability = step3_measure(state, config, rng=rng)
    state = step4_recover(state, transcript)
    return RunResult(
        final_state=state,
        transcript=transcript,
        branch_probability=probability,
        fidelity=output_fidelity(state, config),
    )


def enumerate_branches(
    config: ProtocolConfig,
    registers: Sequence[int] | None = None,
    cap: int = DEFAULT_ENUMERATION_CAP,
    rng: np.random.Generator | None = None,
    forced: dict[int, int] | None = None,
) -> Iterator[RunResult]:
    """Yield every nonzero-probability branch over the chosen measured edges.

    ``registers`` lists the edges to enumerate (all nine by default); edges
    in ``forced`` are pinned to the given announced outcome (their branch
    weight multiplies in); any remaining measured edges are sampled per
    branch from ``rng``.  Without forcing, branch probabilities sum to one.
    This path computes a fidelity per leaf, for attacked runs via a partial
    trace, which is the slow, obviously-correct route; the vectorized
    kernels exist for bulk work.
    """
    forced = forced or {}
    edges = tuple(e for e in (MEASURED_EDGES if registers is None else registers)
                  if e not in forced)
    for e in tuple(edges) + tuple(forced):
        if e not in MEASURED_EDGES:
            raise ValueError(f"edge {e} is not measured in Step 3")
    if config.p ** len(edges) > cap:
        raise EnumerationCapExceeded(
            f"{config.p}^{len(edges)} branches exceed the cap of {cap}"
        )
    if rng is None:
        rng = np.random.default_rng(config.seed)
    base = step2_transmit(step1_initialize(config), config)
    enumerate_set = set(edges)

    def descend(
        state: SparseState, position: int, outcomes: dict[int, int], prob: float
    ) -> Iterator[RunResult]:
        if position == len(MEASURED_EDGES):
            transcript = Transcript(
                p=config.p, variant=config.variant, outcomes=dict(outcomes), b2=config.b2
            )
            final = step4_recover(state, transcript)
            yield RunResult(
                final_state=final,
                transcript=transcript,
                branch_probability=prob,
                fidelity=output_fidelity(final, config),
            )
            return
        edge = MEASURED_EDGES[position]
        if edge in enumerate_set or edge in forced:
            choices = range(config.p) if edge in enumerate_set else (forced[edge],)
            for announced in choices:
                result = state.measure_x_basis(
                    wire(edge), outcome=(-announced) % config.p, allow_zero=True
                )
                if result.probability == 0.0:
                    continue
                outcomes[edge] = announced
                yield from descend(
                    result.state, position + 1, outcomes, prob * result.probability
                )
                del outcomes[edge]
        else:
            result = state.measure_x_basis(wire(edge), rng=rng)
            outcomes[edge] = (-result.outcome) % config.p
            yield from descend(result.state, position + 1, outcomes, prob)
            del outcomes[edge]

    yield from descend(base, 0, {}, 1.0)


def branch_table(config: ProtocolConfig) -> tuple[np.ndarray, np.ndarray]:
    """Probability and output fidelity of every announced-outcome branch.

    The vectorized counterpart of a full ``enumerate_branches`` sweep:
    returns two arrays of length p^9 indexed by the announced record in
    lexicographic order (first measured wire most significant).  Cross-
    checked against the generator in the tests.
    """
    from .kernels import branch_summary

    p = config.p
    state = step2_transmit(step1_initialize(config), config)
    amp = np.array(list(state.amps.values()), dtype=np.complex128)
    cols = {n: state.value_column(n) for n in state.layout.names}
    zmeas = np.stack([cols[wire(e)] for e in MEASURED_EDGES], axis=1)

    rest_names = [n for n in state.layout.names
                  if n not in {wire(e) for e in MEASURED_EDGES}]
    rest = np.stack([cols[n] for n in rest_names], axis=1)
    uniq, rest_index = np.unique(rest, axis=0, return_inverse=True)
    n_rest = uniq.shape[0]
    pos = {n: i for i, n in enumerate(rest_names)}
    h12 = uniq[:, pos[wire(12)]]
    h13 = uniq[:, pos[wire(13)]]
    env = uniq[:, pos["E"]] if "E" in pos else np.zeros(n_rest, dtype=np.int64)

    weight = np.zeros(n_rest, dtype=np.complex128)
    group = np.full(n_rest, -1, dtype=np.int64)
    if config.input_mode == ENTANGLED:
        matched = (uniq[:, pos["ref1"]] == h12) & (uniq[:, pos["ref2"]] == h13)
        weight[matched] = 1.0 / p
        group[matched] = env[matched]
    else:
        weight = (np.asarray(config.psi1)[h12] * np.asarray(config.psi2)[h13]).conj()
        group = env.copy()
    n_groups = int(group.max()) + 1 if (group >= 0).any() else 0

    m = coefficient_matrix(p)
    m1 = np.array([int(m.row(e)[0]) for e in MEASURED_EDGES], dtype=np.int64)
    m2 = np.array([int(m.row(e)[1]) for e in MEASURED_EDGES], dtype=np.int64)
    return branch_summary(
        amp, zmeas, rest_index, h12, h13, weight, group, n_rest, n_groups, m1, m2, p
    )
