"""Sparse multimode Fock states over (spatial mode, polarization) slots.

A :class:`PureState` is an immutable map from :class:`FockBasisVector` to a
complex amplitude, carrying the full declared mode universe it lives in.
Every operation returns a new state and re-applies the canonical form:
amplitudes below :data:`PRUNE_EPS` are dropped, zero occupations never
appear in keys.
"""

from __future__ import annotations

import cmath
import math
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType
from typing import Iterable, Mapping, NamedTuple

from .errors import (
    CapacityError,
    ConfigurationError,
    DegenerateStateError,
    DomainError,
    ModeCollisionError,
    ModeError,
)

PRUNE_EPS = 1e-14
NORMALIZE_EPS = 1e-12
MAX_OCCUPATION = 8


class Pol(str, Enum):
    H = "H"
    V = "V"


class ModeId(NamedTuple):
    """One photon slot. Tuple ordering gives (label lexicographic, H before V)."""

    spatial: str
    pol: Pol

    def __str__(self) -> str:
        return f"{self.spatial}{self.pol.value}"

    @classmethod
    def parse(cls, text: str) -> "ModeId":
        if len(text) < 2 or text[-1] not in "HV":
            raise ModeError(f"cannot parse mode {text!r}")
        return cls(text[:-1], Pol(text[-1]))


def modes_of(*spatials: str) -> frozenset[ModeId]:
    """Both polarization slots of every given spatial label."""
    return frozenset(ModeId(s, p) for s in spatials for p in Pol)


@dataclass(frozen=True, order=True)
class FockBasisVector:
    occ: tuple[tuple[ModeId, int], ...] = ()

    @classmethod
    def of(cls, counts: Mapping[ModeId, int] | Iterable[tuple[ModeId, int]]) -> "FockBasisVector":
        items = counts.items() if isinstance(counts, Mapping) else counts
        merged: dict[ModeId, int] = defaultdict(int)
        for mode, n in items:
            if n < 0:
                raise DomainError(f"negative occupation {n} on {mode}")
            merged[mode] += n
        return cls(tuple(sorted((m, n) for m, n in merged.items() if n)))

    @classmethod
    def parse(cls, text: str) -> "FockBasisVector":
        """Inverse of :meth:`config`, e.g. ``"1pH:1,3pV:1"``; ``""`` is vacuum."""
        if not text:
            return cls()
        pairs = []
        for chunk in text.split(","):
            label, _, count = chunk.partition(":")
            pairs.append((ModeId.parse(label), int(count)))
        return cls.of(pairs)

    def count(self, mode: ModeId) -> int:
        for m, n in self.occ:
            if m == mode:
                return n
        return 0

    def as_dict(self) -> dict[ModeId, int]:
        return dict(self.occ)

    @property
    def total(self) -> int:
        return sum(n for _, n in self.occ)

    @property
    def modes(self) -> frozenset[ModeId]:
        return frozenset(m for m, _ in self.occ)

    def raised(self, mode: ModeId) -> "FockBasisVector":
        counts = dict(self.occ)
        counts[mode] = counts.get(mode, 0) + 1
        return FockBasisVector(tuple(sorted(counts.items())))

    def config(self) -> str:
        return ",".join(f"{m}:{n}" for m, n in self.occ)

    def __str__(self) -> str:
        return f"|{self.config() or 'vac'}>"


def _rebuild(terms, modes):
    return PureState(MappingProxyType(terms), modes)


@dataclass(frozen=True)
class PureState:
    terms: Mapping[FockBasisVector, complex]
    modes: frozenset[ModeId] = field(default_factory=frozenset)

    @classmethod
    def from_terms(
        cls,
        terms: Mapping[FockBasisVector, complex] | Iterable[tuple[FockBasisVector, complex]],
        modes: Iterable[ModeId],
        eps: float = PRUNE_EPS,
    ) -> "PureState":
        modes = frozenset(modes)
        items = terms.items() if isinstance(terms, Mapping) else terms
        kept: dict[FockBasisVector, complex] = {}
        for key, amp in items:
            amp = complex(amp)
            if not (math.isfinite(amp.real) and math.isfinite(amp.imag)):
                raise DomainError(f"non-finite amplitude on {key}")
            if abs(amp) < eps:
                continue
            stray = key.modes - modes
            if stray:
                raise ModeError(f"modes {sorted(map(str, stray))} not in the state's universe")
            kept[key] = amp
        return cls(MappingProxyType(dict(sorted(kept.items()))), modes)

    def __reduce__(self):
        # mappingproxy does not pickle; needed for process-pool sweeps
        return (_rebuild, (dict(self.terms), self.modes))

    def amplitude(self, key: FockBasisVector | Mapping[ModeId, int] | str) -> complex:
        if isinstance(key, str):
            key = FockBasisVector.parse(key)
        elif not isinstance(key, FockBasisVector):
            key = FockBasisVector.of(key)
        return self.terms.get(key, 0j)

    def __len__(self) -> int:
        return len(self.terms)

    def __iter__(self):
        return iter(self.terms.items())

    def norm(self) -> float:
        return math.sqrt(sum(abs(a) ** 2 for a in self.terms.values()))

    def photon_numbers(self) -> set[int]:
        return {k.total for k in self.terms}

    def with_modes(self, modes: Iterable[ModeId]) -> "PureState":
        """Re-home the state in another universe; occupied modes must survive."""
        return PureState.from_terms(self.terms, modes)

    def records(self) -> list[dict]:
        return serialize(self)

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        return " + ".join(f"({a.real:+.6g}{a.imag:+.6g}j){k}" for k, a in self.terms.items())


def vacuum(modes: Iterable[ModeId]) -> PureState:
    modes = frozenset(modes)
    if not modes:
        raise ConfigurationError("vacuum needs a nonempty mode set")
    return PureState.from_terms({FockBasisVector(): 1.0}, modes)


def basis_state(counts: Mapping[ModeId, int] | str, modes: Iterable[ModeId], amp: complex = 1.0) -> PureState:
    key = FockBasisVector.parse(counts) if isinstance(counts, str) else FockBasisVector.of(counts)
    return PureState.from_terms({key: amp}, modes)


def _raise_terms(
    terms: Mapping[FockBasisVector, complex], combo: Iterable[tuple[ModeId, complex]]
) -> dict[FockBasisVector, complex]:
    """Apply sum_k c_k a^dagger_k to a raw term map, ladder factors included."""
    out: dict[FockBasisVector, complex] = defaultdict(complex)
    combo = list(combo)
    for key, amp in terms.items():
        for mode, coeff in combo:
            n = key.count(mode)
            if n + 1 > MAX_OCCUPATION:
                raise CapacityError(f"occupation of {mode} would exceed {MAX_OCCUPATION}")
            out[key.raised(mode)] += amp * coeff * math.sqrt(n + 1)
    return out


def apply_creation(state: PureState, mode: ModeId) -> PureState:
    if mode not in state.modes:
        raise ModeError(f"unknown mode {mode}")
    return PureState.from_terms(_raise_terms(state.terms, [(mode, 1.0)]), state.modes)


def transform_modes(
    state: PureState, mapping: Mapping[ModeId, list[tuple[ModeId, complex]]]
) -> PureState:
    """Substitute a^dagger_m -> sum_k c_k a^dagger_k for every m in ``mapping``.

    This is the rewriting step every linear element reduces to. Target modes
    not themselves being rewritten must be empty, otherwise the substitution
    would not describe a unitary on fresh output ports.
    """
    targets = {t for combo in mapping.values() for t, _ in combo}
    unknown = (set(mapping) | targets) - state.modes
    if unknown:
        raise ModeError(f"unknown modes {sorted(map(str, unknown))}")
    must_be_empty = targets - set(mapping)

    out: dict[FockBasisVector, complex] = defaultdict(complex)
    for key, amp in state.terms.items():
        rest, moved = [], []
        for m, n in key.occ:
            if m in mapping:
                moved.append((m, n))
            else:
                if m in must_be_empty:
                    raise ModeError(f"output mode {m} is already occupied")
                rest.append((m, n))
        scale = 1.0 / math.sqrt(math.prod(math.factorial(n) for _, n in moved))
        partial = {FockBasisVector(tuple(rest)): amp * scale}
        for m, n in moved:
            for _ in range(n):
                partial = _raise_terms(partial, mapping[m])
        for k, a in partial.items():
            out[k] += a
    return PureState.from_terms(out, state.modes)


def tensor(a: PureState, b: PureState) -> PureState:
    overlap = a.modes & b.modes
    if overlap:
        raise ModeCollisionError(f"mode sets overlap on {sorted(map(str, overlap))}")
    terms = {
        FockBasisVector(tuple(sorted(ka.occ + kb.occ))): va * vb
        for ka, va in a.terms.items()
        for kb, vb in b.terms.items()
    }
    return PureState.from_terms(terms, a.modes | b.modes)


def _same_universe(a: PureState, b: PureState) -> None:
    if a.modes != b.modes:
        raise ModeError("states live in different mode universes")


def inner(a: PureState, b: PureState) -> complex:
    """<a|b>, antilinear in the first argument."""
    _same_universe(a, b)
    small, big = (a, b) if len(a) <= len(b) else (b, a)
    total = sum(small.terms[k].conjugate() * big.terms[k] for k in small.terms if k in big.terms)
    if small is b:
        total = total.conjugate()
    return complex(total)


def add(a: PureState, b: PureState) -> PureState:
    _same_universe(a, b)
    terms = defaultdict(complex, a.terms)
    for k, v in b.terms.items():
        terms[k] += v
    return PureState.from_terms(terms, a.modes)


def scale(state: PureState, factor: complex) -> PureState:
    return PureState.from_terms({k: v * factor for k, v in state.terms.items()}, state.modes)


def normalize(state: PureState) -> PureState:
    nrm = state.norm()
    if nrm <= NORMALIZE_EPS:
        raise DegenerateStateError(f"cannot normalize a state of norm {nrm:.3g}")
    return scale(state, 1.0 / nrm)


def prune(state: PureState, eps: float = PRUNE_EPS) -> PureState:
    return PureState.from_terms(state.terms, state.modes, eps=eps)


def global_phase_aligned(state: PureState, reference: FockBasisVector) -> PureState:
    """Rotate the global phase so the reference amplitude is real and positive."""
    amp = state.amplitude(reference)
    if abs(amp) < NORMALIZE_EPS:
        raise DegenerateStateError(f"reference term {reference} is absent")
    return scale(state, cmath.exp(-1j * cmath.phase(amp)))


def serialize(state: PureState) -> list[dict]:
    """Deterministic record list ``{config, re, im}`` in ModeId order."""
    return [{"config": k.config(), "re": v.real, "im": v.imag} for k, v in sorted(state.terms.items())]


def deserialize(records: Iterable[Mapping], modes: Iterable[ModeId]) -> PureState:
    return PureState.from_terms(
        [(FockBasisVector.parse(r["config"]), complex(r["re"], r["im"])) for r in records], modes
    )
