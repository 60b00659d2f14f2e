"""Linear optical elements acting on :class:`~locsim.fock.PureState`.

Each element is described by its single-photon transfer map
``a^dagger_in -> sum_out c * a^dagger_out``; multi-photon action follows by
rewriting creation operators (:func:`locsim.fock.transform_modes`).

Conventions:

* 50/50 beamsplitter, symmetric with ``i`` on reflection, per polarization::

      a_in_a -> (a_out_a + i a_out_b) / sqrt(2)
      a_in_b -> (i a_out_a + a_out_b) / sqrt(2)

* PBS transmits H unphased and reflects V with phase ``i``.
* A polarization rotation acts on the (H, V) amplitudes of one spatial mode
  as a column vector: ``a_p -> sum_q U[q, p] a_q``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .errors import ElementError, LocError, ValidationError
from .fock import ModeId, Pol, PureState, transform_modes

if TYPE_CHECKING:
    from .dsl import CircuitIR

UNITARY_TOL = 1e-12
_R = 1 / math.sqrt(2)

#: D -> H, A -> V
DA = ((_R + 0j, _R + 0j), (_R + 0j, -_R + 0j))
#: L -> H, R -> V
RL = ((_R + 0j, -1j * _R), (_R + 0j, 1j * _R))
PRESETS = {"DA": DA, "RL": RL}


class ElementKind(str, Enum):
    BS5050 = "bs"
    PBS = "pbs"
    ROTATION = "rot"


Matrix2 = tuple[tuple[complex, complex], tuple[complex, complex]]


@dataclass(frozen=True)
class OpticalElement:
    kind: ElementKind
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    matrix: Matrix2 | None = None
    basis: str | None = None
    reflect_phase: complex = 1j
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)

    def __post_init__(self):
        if self.kind is ElementKind.ROTATION:
            if self.matrix is None:
                raise ValidationError("rotation needs a 2x2 matrix")
            check_unitary(self.matrix)
            return
        labels = self.inputs + self.outputs
        if len(set(labels)) != len(labels):
            raise ValidationError(f"{self.kind.value}: labels must be pairwise distinct, got {labels}")

    def transfer(self) -> dict[ModeId, list[tuple[ModeId, complex]]]:
        if self.kind is ElementKind.BS5050:
            (a, b), (oa, ob) = self.inputs, self.outputs
            out = {}
            for p in Pol:
                out[ModeId(a, p)] = [(ModeId(oa, p), _R), (ModeId(ob, p), 1j * _R)]
                out[ModeId(b, p)] = [(ModeId(oa, p), 1j * _R), (ModeId(ob, p), _R)]
            return out
        if self.kind is ElementKind.PBS:
            (s,), (t, r) = self.inputs, self.outputs
            return {
                ModeId(s, Pol.H): [(ModeId(t, Pol.H), 1.0 + 0j)],
                ModeId(s, Pol.V): [(ModeId(r, Pol.V), complex(self.reflect_phase))],
            }
        (s,) = self.inputs
        u = self.matrix
        h, v = ModeId(s, Pol.H), ModeId(s, Pol.V)
        return {
            h: [(h, u[0][0]), (v, u[1][0])],
            v: [(h, u[0][1]), (v, u[1][1])],
        }

    def apply(self, state: PureState) -> PureState:
        return transform_modes(state, self.transfer())


def check_unitary(u, tol: float = UNITARY_TOL) -> np.ndarray:
    m = np.asarray(u, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {m.shape}")
    err = np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0])))
    if err > tol:
        raise ValidationError(f"matrix is not unitary (deviation {err:.3g})")
    return m


def beamsplitter(in_a: str, in_b: str, out_a: str, out_b: str, **loc) -> OpticalElement:
    return OpticalElement(ElementKind.BS5050, (in_a, in_b), (out_a, out_b), **loc)


def pbs(inp: str, out_transmit: str, out_reflect: str, reflect_phase: complex = 1j, **loc) -> OpticalElement:
    return OpticalElement(ElementKind.PBS, (inp,), (out_transmit, out_reflect), reflect_phase=reflect_phase, **loc)


def rotation(spatial: str, u, basis: str | None = None, **loc) -> OpticalElement:
    if isinstance(u, str):
        basis, u = u, PRESETS[u]
    m = check_unitary(u)
    mat = ((complex(m[0, 0]), complex(m[0, 1])), (complex(m[1, 0]), complex(m[1, 1])))
    return OpticalElement(ElementKind.ROTATION, (spatial,), (spatial,), matrix=mat, basis=basis, **loc)


def apply_bs(state: PureState, in_a: str, in_b: str, out_a: str, out_b: str) -> PureState:
    return beamsplitter(in_a, in_b, out_a, out_b).apply(state)


def apply_pbs(
    state: PureState, inp: str, out_transmit: str, out_reflect: str, reflect_phase: complex = 1j
) -> PureState:
    return pbs(inp, out_transmit, out_reflect, reflect_phase).apply(state)


def apply_rotation(state: PureState, spatial: str, u) -> PureState:
    return rotation(spatial, u).apply(state)


def apply_elements(state: PureState, elements: Sequence[OpticalElement]) -> PureState:
    for i, el in enumerate(elements):
        try:
            state = el.apply(state)
        except LocError as exc:
            raise ElementError(i, exc) from exc
    return state


def apply_circuit(state: PureState, ir: "CircuitIR") -> PureState:
    return apply_elements(state, ir.elements)
