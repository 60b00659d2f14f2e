"""Bell states, threshold detectors, coincidence patterns and conditioning.

Detectors are bucket detectors attached to a spatial mode: they click on one
or more photons of either polarization and cannot resolve photon number.
"""

from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

from .errors import ConfigurationError, DegenerateStateError, DomainError, ModeError
from .fock import FockBasisVector, ModeId, Pol, PureState, modes_of, normalize

PROB_EPS = 1e-12
H, V = Pol.H, Pol.V


class BellKind(str, Enum):
    PhiPlus = "phi+"
    PhiMinus = "phi-"
    PsiPlus = "psi+"
    PsiMinus = "psi-"

    @classmethod
    def parse(cls, text: str) -> "BellKind":
        for kind in cls:
            if text in (kind.value, kind.name, kind.name.lower()):
                return kind
        raise DomainError(f"unknown Bell kind {text!r}")


_PAIRS = {
    BellKind.PhiPlus: ((H, H), (V, V), +1),
    BellKind.PhiMinus: ((H, H), (V, V), -1),
    BellKind.PsiPlus: ((H, V), (V, H), +1),
    BellKind.PsiMinus: ((H, V), (V, H), -1),
}


def check_theta(theta: float) -> float:
    if not (math.isfinite(theta) and -1e-12 <= theta <= math.pi / 2 + 1e-12):
        raise DomainError(f"theta={theta} outside [0, pi/2]")
    return theta


def bell_pair_terms(kind: BellKind, theta: float, i: str, j: str) -> list[tuple[tuple[ModeId, ModeId], float]]:
    """The two creation-operator pairs of cos(t)|..> +- sin(t)|..> with coefficients."""
    (pi1, pj1), (pi2, pj2), sign = _PAIRS[kind]
    return [
        ((ModeId(i, pi1), ModeId(j, pj1)), math.cos(theta)),
        ((ModeId(i, pi2), ModeId(j, pj2)), sign * math.sin(theta)),
    ]


def bell_state(kind: BellKind, theta: float, mode_i: str, mode_j: str, modes: Iterable[ModeId] | None = None) -> PureState:
    check_theta(theta)
    universe = modes_of(mode_i, mode_j) if modes is None else frozenset(modes)
    terms = {FockBasisVector.of([(a, 1), (b, 1)]): c for (a, b), c in bell_pair_terms(kind, theta, mode_i, mode_j)}
    return PureState.from_terms(terms, universe)


def singlet(mode_i: str, mode_j: str, modes: Iterable[ModeId] | None = None) -> PureState:
    return bell_state(BellKind.PsiMinus, math.pi / 4, mode_i, mode_j, modes)


@dataclass(frozen=True)
class Detector:
    name: str
    spatial: str
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)

    @property
    def modes(self) -> frozenset[ModeId]:
        return modes_of(self.spatial)

    def photons(self, key: FockBasisVector) -> int:
        return key.count(ModeId(self.spatial, H)) + key.count(ModeId(self.spatial, V))


class Semantics(str, Enum):
    STRICT = "strict"
    RELAXED = "relaxed"


@dataclass(frozen=True)
class ClickPattern:
    """Detectors required to click.

    ``strict`` additionally requires every other detector of the heralding
    bank to stay silent; ``relaxed`` leaves them unconstrained.
    """

    detectors: tuple[str, ...]
    semantics: Semantics = Semantics.STRICT

    @classmethod
    def parse(cls, text: str, semantics: Semantics | str = Semantics.STRICT) -> "ClickPattern":
        names = tuple(n.strip() for n in text.split("&"))
        if not all(names):
            raise ConfigurationError(f"malformed click pattern {text!r}")
        return cls(names, Semantics(semantics))

    def with_semantics(self, semantics: Semantics | str) -> "ClickPattern":
        return ClickPattern(self.detectors, Semantics(semantics))

    def __str__(self) -> str:
        return "&".join(self.detectors)

    def matches(self, key: FockBasisVector, bank: Sequence[Detector]) -> bool:
        required = set(self.detectors)
        for det in bank:
            fired = det.photons(key) > 0
            if det.name in required and not fired:
                return False
            if self.semantics is Semantics.STRICT and det.name not in required and fired:
                return False
        return True


def _check_bank(state: PureState, pattern: ClickPattern, bank: Sequence[Detector]) -> None:
    names = {d.name for d in bank}
    missing = [n for n in pattern.detectors if n not in names]
    if missing:
        raise ConfigurationError(f"detectors {missing} are not in the heralding bank")
    for det in bank:
        if not det.modes <= state.modes:
            raise ModeError(f"detector {det.name} watches mode {det.spatial} outside the state")


def pattern_probability(state: PureState, pattern: ClickPattern, bank: Sequence[Detector]) -> float:
    _check_bank(state, pattern, bank)
    return float(sum(abs(a) ** 2 for k, a in state.terms.items() if pattern.matches(k, bank)))


@dataclass(frozen=True)
class ConditionalEnsemble:
    members: tuple[tuple[float, PureState], ...]
    total_probability: float

    def __len__(self) -> int:
        return len(self.members)


def condition(state: PureState, pattern: ClickPattern, bank: Sequence[Detector]) -> ConditionalEnsemble:
    """Split the heralded part of ``state`` by exact detector-mode occupation.

    Each distinct detector occupation is an orthogonal (in principle
    distinguishable) outcome, so the conditional state is a weighted ensemble
    of pure states on the remaining modes.
    """
    _check_bank(state, pattern, bank)
    det_modes = frozenset().union(*(d.modes for d in bank))
    rest_modes = state.modes - det_modes
    groups: dict[tuple, dict[FockBasisVector, complex]] = defaultdict(dict)
    for key, amp in state.terms.items():
        if not pattern.matches(key, bank):
            continue
        det_part = tuple((m, n) for m, n in key.occ if m in det_modes)
        rest = FockBasisVector(tuple((m, n) for m, n in key.occ if m not in det_modes))
        groups[det_part][rest] = amp

    members = []
    for det_part in sorted(groups):
        branch = PureState.from_terms(groups[det_part], rest_modes)
        weight = branch.norm() ** 2
        if weight > 0:
            members.append((weight, normalize(branch)))
    total = sum(w for w, _ in members)
    if total <= PROB_EPS:
        raise DegenerateStateError(f"pattern {pattern} has probability {total:.3g}")
    return ConditionalEnsemble(tuple(members), total)


def fidelity(ensemble: ConditionalEnsemble, target: PureState) -> float:
    """Ensemble-averaged overlap, i.e. <target| rho |target>."""
    if not ensemble.members:
        raise DegenerateStateError("empty ensemble")
    acc = 0.0
    for weight, member in ensemble.members:
        t = target.with_modes(member.modes)
        acc += weight * abs(sum(t.terms[k].conjugate() * member.terms.get(k, 0) for k in t.terms)) ** 2
    return min(1.0, max(0.0, acc / ensemble.total_probability))


def all_strict_patterns(bank: Sequence[Detector]) -> list[ClickPattern]:
    """Every mutually exclusive strict outcome of the bank, the all-silent one included."""
    names = [d.name for d in bank]
    return [
        ClickPattern(combo, Semantics.STRICT)
        for r in range(len(names) + 1)
        for combo in itertools.combinations(names, r)
    ]
