"""Permanent-based transition amplitudes, independent of operator rewriting.

For a linear interferometer with single-photon matrix ``U`` (``a_in ->
sum_out U[out, in] a_out``) the Fock transition amplitude is

    <out| U |in> = Per(U[rows, cols]) / sqrt(prod in! * prod out!)

where ``cols`` repeats input mode ``j`` ``in_j`` times and ``rows`` repeats
output mode ``i`` ``out_i`` times.

The circuit matrix lives on *slots*: an element's outputs take over the slots
of its inputs, and a PBS adds two vacuum-fed slots for the output
polarizations its input never reaches. Column labels are the slot labels at
the start of the circuit, row labels those at the end.
"""

from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable

import numpy as np

from .errors import CapacityError, LocError, ModeError
from .fock import FockBasisVector, ModeId, Pol, PureState

if TYPE_CHECKING:
    from .dsl import CircuitIR

MAX_PHOTONS = 6


def permanent_ryser(a) -> complex:
    """Ryser's formula, visiting column subsets in Gray-code order (O(2^n n))."""
    a = np.asarray(a, dtype=complex)
    n = a.shape[0]
    if n == 0:
        return 1.0 + 0j
    row_sums = np.zeros(n, dtype=complex)
    total = 0j
    gray = 0
    for k in range(1, 2**n):
        j = (k & -k).bit_length() - 1
        gray ^= 1 << j
        if gray >> j & 1:
            row_sums += a[:, j]
        else:
            row_sums -= a[:, j]
        sign = -1 if bin(gray).count("1") % 2 else 1
        total += sign * np.prod(row_sums)
    return complex((-1) ** n * total)


def permanent_naive(a) -> complex:
    """Sum over all permutations; only for cross-checking small matrices."""
    a = np.asarray(a, dtype=complex)
    n = a.shape[0]
    return complex(sum(math.prod(a[i, p[i]] for i in range(n)) for p in itertools.permutations(range(n)))) if n else 1 + 0j


@dataclass(frozen=True)
class ModeUnitary:
    matrix: np.ndarray
    rows: tuple[ModeId, ...]
    cols: tuple[ModeId, ...]

    @property
    def dim(self) -> int:
        return len(self.rows)

    def unitarity_error(self) -> float:
        m = self.matrix
        return float(np.max(np.abs(m.conj().T @ m - np.eye(len(m))))) if len(m) else 0.0

    def entry(self, out: ModeId, inp: ModeId) -> complex:
        return complex(self.matrix[self.rows.index(out), self.cols.index(inp)])


def mode_unitary(ir: "CircuitIR", passthrough: Iterable[str] = ()) -> ModeUnitary:
    """Single-photon matrix of the circuit; ``passthrough`` adds idle wires."""
    spatials = sorted(set(ir.primal_spatials()) | set(passthrough))
    labels = [ModeId(s, p) for s in spatials for p in Pol]
    initial = list(labels)
    u = np.eye(len(labels), dtype=complex)

    for el in ir.elements:
        transfer = el.transfer()
        in_slots = []
        for m in sorted(transfer):
            if m not in labels:
                raise LocError(f"element input {m} has no live slot")
            in_slots.append(labels.index(m))
        hit = sorted({t for combo in transfer.values() for t, _ in combo})
        if len(hit) != len(in_slots):
            raise LocError("element does not map inputs one-to-one onto outputs")
        block = np.zeros((len(hit), len(in_slots)), dtype=complex)
        for c, m in enumerate(sorted(transfer)):
            for t, coeff in transfer[m]:
                block[hit.index(t), c] = coeff
        step = np.eye(len(labels), dtype=complex)
        step[np.ix_(in_slots, in_slots)] = block
        for slot, t in zip(in_slots, hit):
            labels[slot] = t
        u = step @ u
        # output polarizations the element never feeds get fresh vacuum slots
        for s in el.outputs:
            for p in Pol:
                m = ModeId(s, p)
                if m not in labels:
                    labels.append(m)
                    initial.append(m)
                    u = np.pad(u, ((0, 1), (0, 1)))
                    u[-1, -1] = 1.0

    row_order = sorted(range(len(labels)), key=lambda i: labels[i])
    col_order = sorted(range(len(initial)), key=lambda i: initial[i])
    mat = u[np.ix_(row_order, col_order)]
    result = ModeUnitary(mat, tuple(labels[i] for i in row_order), tuple(initial[i] for i in col_order))
    err = result.unitarity_error()
    if err > 1e-12:
        raise LocError(f"composed mode matrix is not unitary (deviation {err:.3g})")
    return result


def _expand(config: FockBasisVector, labels: tuple[ModeId, ...]) -> list[int]:
    idx = []
    for m, n in config.occ:
        if m not in labels:
            raise ModeError(f"mode {m} is not an index of the mode matrix")
        idx += [labels.index(m)] * n
    return idx


def amplitude_via_permanent(u: ModeUnitary, in_config: FockBasisVector, out_config: FockBasisVector,
                            permanent=permanent_ryser) -> complex:
    n = in_config.total
    if n != out_config.total:
        return 0j
    if n > MAX_PHOTONS:
        raise CapacityError(f"{n} photons exceeds the oracle cap of {MAX_PHOTONS}")
    cols = _expand(in_config, u.cols)
    rows = _expand(out_config, u.rows)
    sub = u.matrix[np.ix_(rows, cols)]
    norm = math.prod(math.factorial(k) for _, k in in_config.occ) * math.prod(
        math.factorial(k) for _, k in out_config.occ)
    return permanent(sub) / math.sqrt(norm)


def output_configs(modes: tuple[ModeId, ...], n: int) -> list[FockBasisVector]:
    """All ways to place ``n`` photons into ``modes``."""
    return [
        FockBasisVector.of([(modes[i], 1) for i in combo])
        for combo in itertools.combinations_with_replacement(range(len(modes)), n)
    ]


def oracle_state(state: PureState, ir: "CircuitIR", permanent=permanent_ryser) -> PureState:
    """Evolve ``state`` through the circuit by brute-force permanent summation."""
    idle = {m.spatial for m in state.modes} - set(ir.spatial_labels)
    u = mode_unitary(ir, idle)
    out: dict[FockBasisVector, complex] = defaultdict(complex)
    configs: dict[int, list[FockBasisVector]] = {}
    for key, amp in state.terms.items():
        n = key.total
        if n > MAX_PHOTONS:
            raise CapacityError(f"{n} photons exceeds the oracle cap of {MAX_PHOTONS}")
        if n not in configs:
            configs[n] = output_configs(u.rows, n)
        for cfg in configs[n]:
            out[cfg] += amp * amplitude_via_permanent(u, key, cfg, permanent)
    return PureState.from_terms(out, state.modes | set(u.rows))


def max_deviation(a: PureState, b: PureState) -> float:
    keys = set(a.terms) | set(b.terms)
    return max((abs(a.amplitude(k) - b.amplitude(k)) for k in keys), default=0.0)
