"""Entanglement concentration with two 50/50 beamsplitters and two PBSs.

Two identical pairs ``|B(theta)>_12 |B(theta)>_34`` are mixed pairwise on
BS1 (1, 3 -> 1p, 3p) and BS2 (2, 4 -> 2p, 4p). Polarization analysis of 1p
and 3p (optionally in a rotated basis) and a coincidence of orthogonal
outcomes heralds the singlet on 2p, 4p without touching those photons.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

from . import dsl
from .dsl import CircuitIR, Source
from .elements import apply_elements
from .errors import DegenerateStateError, DomainError
from .fock import (
    FockBasisVector,
    ModeId,
    PureState,
    add,
    apply_creation,
    inner,
    modes_of,
    normalize,
    scale,
    serialize,
    tensor,
    vacuum,
)
from .measurement import (
    PROB_EPS,
    BellKind,
    ClickPattern,
    Semantics,
    bell_pair_terms,
    bell_state,
    check_theta,
    condition,
    fidelity,
    pattern_probability,
    singlet,
)

SOURCE_MODES = ("1", "2", "3", "4")
PATTERNS = ("D1pH&D3pV", "D1pV&D3pH")


class Basis(str, Enum):
    HV = "HV"
    DA = "DA"
    RL = "RL"


def build_input(kind: BellKind, theta: float, modes: Iterable[ModeId] | None = None) -> PureState:
    """``|B(theta)>_12 (x) |B(theta)>_34``."""
    state = tensor(bell_state(kind, theta, "1", "2"), bell_state(kind, theta, "3", "4"))
    return state if modes is None else state.with_modes(modes)


def build_double_pair(theta: float, source_modes: tuple[str, str], kind: BellKind = BellKind.PhiPlus,
                      modes: Iterable[ModeId] | None = None) -> PureState:
    """Normalized ``(pair creation operator)^2 |0>`` on one source's two modes."""
    check_theta(theta)
    i, j = source_modes
    universe = modes_of(i, j) if modes is None else frozenset(modes)
    (h1, h2), c = bell_pair_terms(kind, theta, i, j)[0]
    (v1, v2), s = bell_pair_terms(kind, theta, i, j)[1]
    state = vacuum(universe)
    for _ in range(2):
        state = add(scale(apply_creation(apply_creation(state, h1), h2), c),
                    scale(apply_creation(apply_creation(state, v1), v2), s))
    return normalize(state)


def source_state(src: Source) -> PureState:
    if src.is_vacuum:
        return vacuum(modes_of(*src.modes))
    if src.is_double:
        return build_double_pair(src.theta, src.modes, src.bell_kind)
    return bell_state(src.bell_kind, src.theta, *src.modes)


def initial_state(ir: CircuitIR) -> PureState:
    universe = ir.modes
    if not ir.sources:
        return vacuum(universe)
    state = source_state(ir.sources[0])
    for src in ir.sources[1:]:
        state = tensor(state, source_state(src))
    return state.with_modes(universe)


def fig1_text(kind: BellKind | str = BellKind.PhiPlus, theta: float = math.pi / 4, basis: Basis | str = Basis.HV,
              branch: str = "nominal") -> str:
    """Text of the concentration circuit; ``branch`` selects the source layout.

    ``double_A`` puts two pairs into source 1-2 and nothing into 3-4,
    ``double_B`` the mirror image.
    """
    kind = BellKind.parse(kind) if isinstance(kind, str) else kind
    basis = Basis(basis)
    th = repr(float(theta))
    pair = f"{kind.value} theta={th}"
    sources = {
        "nominal": [f"source {pair} modes 1 2", f"source {pair} modes 3 4"],
        "double_A": [f"source double:{pair} modes 1 2", "source vacuum modes 3 4"],
        "double_B": ["source vacuum modes 1 2", f"source double:{pair} modes 3 4"],
    }[branch]
    rot = [] if basis is Basis.HV else [f"rot 1p basis {basis.value}", f"rot 3p basis {basis.value}"]
    lines = sources + ["bs 1 3 -> 1p 3p", "bs 2 4 -> 2p 4p"] + rot + [
        "pbs 1p -> 1pt 1pr",
        "pbs 3p -> 3pt 3pr",
        "detector D1pH on 1pt",
        "detector D1pV on 1pr",
        "detector D3pH on 3pt",
        "detector D3pV on 3pr",
        "coincidence " + " | ".join(PATTERNS),
        "output 2p 4p",
    ]
    return "\n".join(lines) + "\n"


def fig1_ir(kind: BellKind | str = BellKind.PhiPlus, theta: float = math.pi / 4, basis: Basis | str = Basis.HV,
            branch: str = "nominal") -> CircuitIR:
    return dsl.parse(fig1_text(kind, theta, basis, branch))


@dataclass(frozen=True)
class PatternOutcome:
    pattern: ClickPattern
    probability: float
    fidelity: float | None


@dataclass(frozen=True)
class CircuitRun:
    final_state: PureState
    outcomes: tuple[PatternOutcome, ...]

    @property
    def success_probability(self) -> float:
        return float(sum(o.probability for o in self.outcomes))

    @property
    def heralded_fidelity(self) -> float | None:
        """Probability-weighted fidelity over all heralding outcomes."""
        return _weighted_fidelity(self.outcomes)


def _weighted_fidelity(outcomes: Sequence[PatternOutcome]) -> float | None:
    live = [o for o in outcomes if o.fidelity is not None]
    p = sum(o.probability for o in live)
    if p <= PROB_EPS:
        return None
    return sum(o.probability * o.fidelity for o in live) / p


def herald(state: PureState, ir: CircuitIR, semantics: Semantics | str = Semantics.STRICT) -> tuple[PatternOutcome, ...]:
    target = singlet(*ir.output, modes=modes_of(*ir.output)) if ir.output else None
    outcomes = []
    for pat in ir.patterns:
        pat = pat.with_semantics(semantics)
        p = pattern_probability(state, pat, ir.detectors)
        f = None
        if p > PROB_EPS and target is not None:
            f = fidelity(condition(state, pat, ir.detectors), target)
        outcomes.append(PatternOutcome(pat, p, f))
    return tuple(outcomes)


def execute(ir: CircuitIR, semantics: Semantics | str = Semantics.STRICT) -> CircuitRun:
    final = apply_elements(initial_state(ir), ir.elements)
    return CircuitRun(final, herald(final, ir, semantics))


@dataclass(frozen=True)
class ProtocolConfig:
    input_kind: BellKind = BellKind.PhiPlus
    theta: float = math.pi / 4
    measurement_basis: Basis = Basis.HV
    pattern_semantics: Semantics = Semantics.STRICT

    def __post_init__(self):
        check_theta(self.theta)
        if not isinstance(self.input_kind, BellKind):
            object.__setattr__(self, "input_kind", BellKind.parse(self.input_kind))
        object.__setattr__(self, "measurement_basis", Basis(self.measurement_basis))
        object.__setattr__(self, "pattern_semantics", Semantics(self.pattern_semantics))


@dataclass(frozen=True)
class ProtocolResult:
    config: ProtocolConfig
    probabilities: tuple[float, ...]
    fidelities: tuple[float | None, ...]
    swapped_term_amplitude: complex
    post_bs_state: PureState = field(repr=False)

    @property
    def success_probability(self) -> float:
        return float(sum(self.probabilities))

    @property
    def heralded_fidelity(self) -> float | None:
        return _weighted_fidelity([PatternOutcome(ClickPattern(()), p, f)
                                   for p, f in zip(self.probabilities, self.fidelities)])

    @property
    def amplitude_table(self) -> list[dict]:
        return serialize(self.post_bs_state)

    def to_dict(self) -> dict:
        out = {
            "input": self.config.input_kind.value,
            "theta": self.config.theta,
            "basis": self.config.measurement_basis.value,
            "semantics": self.config.pattern_semantics.value,
            "patterns": [],
            "success_probability": self.success_probability,
            "swapped_term_amplitude": {"re": self.swapped_term_amplitude.real, "im": self.swapped_term_amplitude.imag},
            "amplitudes": self.amplitude_table,
        }
        for name, p, f in zip(PATTERNS, self.probabilities, self.fidelities):
            rec = {"pattern": name, "probability": p}
            if f is not None:
                rec["fidelity"] = f
            out["patterns"].append(rec)
        if self.heralded_fidelity is not None:
            out["fidelity"] = self.heralded_fidelity
        return out


def swap_target(modes: Iterable[ModeId]) -> PureState:
    """``|Psi->_{1p3p} (x) |Psi->_{2p4p}`` embedded in ``modes``."""
    return tensor(singlet("1p", "3p"), singlet("2p", "4p")).with_modes(modes)


def run(config: ProtocolConfig) -> ProtocolResult:
    ir = fig1_ir(config.input_kind, config.theta, config.measurement_basis)
    post_bs = apply_elements(initial_state(ir), ir.elements[:2])
    final = apply_elements(post_bs, ir.elements[2:])
    outcomes = herald(final, ir, config.pattern_semantics)
    return ProtocolResult(
        config,
        tuple(o.probability for o in outcomes),
        tuple(o.fidelity for o in outcomes),
        inner(swap_target(post_bs.modes), post_bs),
        post_bs,
    )


def swapped_amplitude(config: ProtocolConfig) -> complex:
    return run(config).swapped_term_amplitude


def hom_reference_key(kind: BellKind) -> FockBasisVector:
    """The ``cos^2`` four-photon term on modes 1p, 2p that fixes the relative phase."""
    (a, b), _ = bell_pair_terms(kind, 0.0, "1p", "2p")[0]
    return FockBasisVector.of([(a, 2), (b, 2)])


def swap_to_reference_ratio(config: ProtocolConfig) -> complex:
    res = run(config)
    ref = res.post_bs_state.amplitude(hom_reference_key(config.input_kind))
    if abs(ref) <= PROB_EPS:
        raise DegenerateStateError("reference HOM term vanishes at this theta")
    return res.swapped_term_amplitude / ref


def _run_point(args) -> ProtocolResult:
    return run(ProtocolConfig(*args))


def sweep(kind: BellKind, thetas: Sequence[float], basis: Basis | str = Basis.HV,
          semantics: Semantics | str = Semantics.STRICT, workers: int = 1) -> list[ProtocolResult]:
    if not len(thetas):
        raise DomainError("sweep needs at least one theta")
    jobs = [(kind, float(t), Basis(basis), Semantics(semantics)) for t in thetas]
    if workers <= 1:
        return [_run_point(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_point, jobs))


def theta_grid(start: float, end: float, steps: int) -> list[float]:
    if steps < 2:
        raise DomainError("a sweep needs at least 2 steps")
    return [start + (end - start) * k / (steps - 1) for k in range(steps)]


@dataclass(frozen=True)
class ContaminationScenario:
    theta: float
    w_nominal: float
    w_double_a: float
    w_double_b: float
    input_kind: BellKind = BellKind.PhiPlus
    semantics: Semantics = Semantics.STRICT

    def __post_init__(self):
        check_theta(self.theta)
        w = (self.w_nominal, self.w_double_a, self.w_double_b)
        if min(w) < 0 or abs(sum(w) - 1) > 1e-12:
            raise DomainError(f"branch weights {w} must be nonnegative and sum to 1")

    @property
    def weights(self) -> dict[str, float]:
        return {"nominal": self.w_nominal, "double_A": self.w_double_a, "double_B": self.w_double_b}


@dataclass(frozen=True)
class BranchResult:
    name: str
    weight: float
    outcomes: tuple[PatternOutcome, ...]

    @property
    def success_probability(self) -> float:
        return float(sum(o.probability for o in self.outcomes))

    @property
    def fidelity(self) -> float | None:
        return _weighted_fidelity(self.outcomes)


@dataclass(frozen=True)
class ContaminationResult:
    scenario: ContaminationScenario
    branches: tuple[BranchResult, ...]
    success_probability: float
    heralded_fidelity: float

    def branch(self, name: str) -> BranchResult:
        return next(b for b in self.branches if b.name == name)

    def to_dict(self) -> dict:
        sc = self.scenario
        out = {
            "theta": sc.theta,
            "input": sc.input_kind.value,
            "semantics": sc.semantics.value,
            "success_probability": self.success_probability,
            "fidelity": self.heralded_fidelity,
            "branches": [],
        }
        for b in self.branches:
            rec = {
                "branch": b.name,
                "weight": b.weight,
                "success_probability": b.success_probability,
                "patterns": [{"pattern": str(o.pattern), "probability": o.probability,
                              **({"fidelity": o.fidelity} if o.fidelity is not None else {})}
                             for o in b.outcomes],
            }
            if b.fidelity is not None:
                rec["fidelity"] = b.fidelity
            out["branches"].append(rec)
        return out


def contamination_run(scenario: ContaminationScenario) -> ContaminationResult:
    """Mix the ideal source with double-pair emission on either source.

    Branches are incoherent; each heralding outcome's fidelity is weighted by
    branch weight times heralding probability.
    """
    branches = []
    for name, w in scenario.weights.items():
        ir = fig1_ir(scenario.input_kind, scenario.theta, Basis.HV, name)
        branches.append(BranchResult(name, w, execute(ir, scenario.semantics).outcomes))
    num = den = 0.0
    for b in branches:
        for o in b.outcomes:
            den += b.weight * o.probability
            if o.fidelity is not None:
                num += b.weight * o.probability * o.fidelity
    if den <= PROB_EPS:
        raise DegenerateStateError("no branch heralds with nonzero probability")
    return ContaminationResult(scenario, tuple(branches), den, num / den)
