"""Parser and validator for ``.loc`` linear-optical circuit descriptions.

The format is line oriented; ``#`` starts a comment and tokens are separated
by whitespace (``->``, ``&`` and ``|`` also split tokens on their own)::

    source phi+ theta=0.7853981633974483 modes 1 2
    source double:phi+ theta=0.7853981633974483 modes 3 4
    source vacuum modes 5 6
    bs 1 3 -> 1p 3p
    pbs 1p -> 1pt 1pr              # transmit H, reflect V
    rot 1p basis DA
    detector D1pH on 1pt
    coincidence D1pH&D3pV | D1pV&D3pH
    output 2p 4p

Every diagnostic carries a stable code (see :data:`CODES`) and a 1-based
line/column.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path

from .elements import PRESETS, ElementKind, OpticalElement, beamsplitter, pbs, rotation
from .errors import LocError
from .fock import ModeId, modes_of
from .measurement import BellKind, ClickPattern, Detector

CODES = {
    "E001": "lexical error",
    "E002": "unknown keyword",
    "E003": "arity mismatch",
    "E004": "invalid value",
    "E005": "duplicate input mode",
    "E006": "duplicate mode production",
    "E007": "use before production",
    "E008": "mode consumed twice",
    "E009": "detector on non-terminal mode",
    "E010": "dangling detector",
    "E011": "unknown detector",
    "E012": "duplicate detector",
    "E013": "no output declaration",
    "E014": "multiple output declarations",
    "E015": "invalid output mode",
}

_SOURCE_USAGE = "source KIND theta=FLOAT modes ID ID"
SOURCE_KINDS = tuple(k.value for k in BellKind)


@dataclass(frozen=True, order=True)
class Diagnostic:
    line: int
    col: int
    code: str
    message: str

    def __str__(self) -> str:
        return f"{self.line}:{self.col}: {self.code} {CODES[self.code]}: {self.message}"


class DslError(LocError):
    def __init__(self, diagnostics: list[Diagnostic], path: str | None = None):
        self.diagnostics = sorted(diagnostics)
        self.path = path
        prefix = f"{path}:" if path else ""
        super().__init__("\n".join(prefix + str(d) for d in self.diagnostics))

    @property
    def codes(self) -> list[str]:
        return [d.code for d in self.diagnostics]


@dataclass(frozen=True)
class Source:
    kind: str
    theta: float | None
    modes: tuple[str, str]
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)

    @property
    def is_vacuum(self) -> bool:
        return self.kind == "vacuum"

    @property
    def is_double(self) -> bool:
        return self.kind.startswith("double:")

    @property
    def bell_kind(self) -> BellKind | None:
        if self.is_vacuum:
            return None
        return BellKind.parse(self.kind.removeprefix("double:"))


@dataclass(frozen=True)
class Coincidence:
    patterns: tuple[ClickPattern, ...]
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Output:
    modes: tuple[str, str]
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class CircuitIR:
    sources: tuple[Source, ...] = ()
    elements: tuple[OpticalElement, ...] = ()
    detectors: tuple[Detector, ...] = ()
    coincidences: tuple[Coincidence, ...] = ()
    outputs: tuple[Output, ...] = ()

    @property
    def patterns(self) -> tuple[ClickPattern, ...]:
        return tuple(p for c in self.coincidences for p in c.patterns)

    @property
    def output(self) -> tuple[str, str] | None:
        return self.outputs[0].modes if self.outputs else None

    @property
    def spatial_labels(self) -> list[str]:
        seen: dict[str, None] = {}
        for s in self.sources:
            seen.update(dict.fromkeys(s.modes))
        for el in self.elements:
            seen.update(dict.fromkeys(el.inputs + el.outputs))
        return sorted(seen)

    @property
    def modes(self) -> frozenset[ModeId]:
        """The declared mode universe: both polarizations of every spatial label."""
        return modes_of(*self.spatial_labels)

    def primal_spatials(self) -> list[str]:
        """Labels no element produces: the circuit's input ports."""
        produced = {o for el in self.elements if el.kind is not ElementKind.ROTATION for o in el.outputs}
        return [s for s in self.spatial_labels if s not in produced]

    def terminal_spatials(self) -> list[str]:
        consumed = {i for el in self.elements if el.kind is not ElementKind.ROTATION for i in el.inputs}
        return [s for s in self.spatial_labels if s not in consumed]

    def detector(self, name: str) -> Detector:
        for d in self.detectors:
            if d.name == name:
                return d
        raise KeyError(name)


_TOKEN = re.compile(
    r"(?P<arrow>->)|(?P<amp>&)|(?P<bar>\|)|(?P<word>(?:[A-Za-z0-9_.:+=']|-(?!>))+)|(?P<ws>[ \t\r\f\v]+)|(?P<bad>.)"
)


@dataclass(frozen=True)
class _Tok:
    text: str
    kind: str
    col: int


def _lex(line: str, lineno: int, diags: list[Diagnostic]) -> list[_Tok] | None:
    toks = []
    for m in _TOKEN.finditer(line):
        kind = m.lastgroup
        if kind == "ws":
            continue
        if kind == "bad":
            diags.append(Diagnostic(lineno, m.start() + 1, "E001", f"unexpected character {m.group()!r}"))
            return None
        toks.append(_Tok(m.group(), kind, m.start() + 1))
    return toks


class _Parser:
    def __init__(self):
        self.diags: list[Diagnostic] = []
        self.sources: list[Source] = []
        self.elements: list[OpticalElement] = []
        self.detectors: list[Detector] = []
        self.coincidences: list[Coincidence] = []
        self.outputs: list[Output] = []

    def error(self, tok: _Tok, code: str, message: str) -> None:
        self.diags.append(Diagnostic(self._line, tok.col, code, message))

    def _ids(self, toks: list[_Tok]) -> bool:
        for t in toks:
            if t.kind != "word":
                self.error(t, "E003", f"expected a label, got {t.text!r}")
                return False
        return True

    def _shape(self, toks: list[_Tok], pattern: str) -> bool:
        """Match tokens against e.g. ``'bs ID ID -> ID ID'``; ID is any word."""
        want = pattern.split()
        ok = len(toks) == len(want) and all(
            (t.kind == "word") if w == "ID" else (t.text == w) for t, w in zip(toks, want)
        )
        if not ok:
            self.error(toks[0], "E003", f"expected: {pattern}")
        return ok

    def statement(self, toks: list[_Tok], lineno: int) -> None:
        self._line = lineno
        head = toks[0]
        loc = {"line": lineno, "col": head.col}
        kw = head.text
        if kw == "source":
            self._source(toks, loc)
        elif kw == "bs":
            if self._shape(toks, "bs ID ID -> ID ID"):
                a, b, c, d = toks[1].text, toks[2].text, toks[4].text, toks[5].text
                if a == b:
                    self.error(toks[2], "E005", f"beamsplitter input {a!r} given twice")
                elif len({a, b, c, d}) != 4:
                    self.error(toks[4], "E006", "beamsplitter outputs must be fresh labels distinct from inputs")
                else:
                    self.elements.append(beamsplitter(a, b, c, d, **loc))
        elif kw == "pbs":
            if self._shape(toks, "pbs ID -> ID ID"):
                a, t, r = toks[1].text, toks[3].text, toks[4].text
                if len({a, t, r}) != 3:
                    self.error(toks[3], "E006", "pbs outputs must be fresh labels distinct from the input")
                else:
                    self.elements.append(pbs(a, t, r, **loc))
        elif kw == "rot":
            if self._shape(toks, "rot ID basis ID"):
                basis = toks[3].text
                if basis not in PRESETS:
                    self.error(toks[3], "E004", f"unknown basis {basis!r} (expected DA or RL)")
                else:
                    self.elements.append(rotation(toks[1].text, basis, **loc))
        elif kw == "detector":
            if self._shape(toks, "detector ID on ID"):
                self.detectors.append(Detector(toks[1].text, toks[3].text, **loc))
        elif kw == "coincidence":
            self._coincidence(toks, loc)
        elif kw == "output":
            if self._shape(toks, "output ID ID"):
                self.outputs.append(Output((toks[1].text, toks[2].text), **loc))
        else:
            self.error(head, "E002", f"unknown keyword {kw!r}")

    def _source(self, toks, loc):
        head = toks[0]
        if len(toks) < 2:
            self.error(head, "E003", f"expected: {_SOURCE_USAGE}")
            return
        if not self._ids(toks[1:]):
            return
        kind_tok, rest = toks[1], toks[2:]
        kind = kind_tok.text
        base = kind.removeprefix("double:")
        if kind != "vacuum" and base not in SOURCE_KINDS:
            self.error(kind_tok, "E004", f"unknown source kind {kind!r}")
            return
        theta = None
        if rest and rest[0].text.startswith("theta="):
            theta_tok, rest = rest[0], rest[1:]
            try:
                theta = float(theta_tok.text[len("theta="):])
            except ValueError:
                self.error(theta_tok, "E004", f"theta is not a number: {theta_tok.text!r}")
                return
            if not (math.isfinite(theta) and 0 <= theta <= math.pi / 2 + 1e-12):
                self.error(theta_tok, "E004", f"theta={theta} outside [0, pi/2]")
                return
        if (theta is None) != (kind == "vacuum"):
            need = "takes no theta" if kind == "vacuum" else "requires theta=FLOAT"
            self.error(kind_tok, "E003", f"source {kind} {need}")
            return
        if len(rest) != 3 or rest[0].text != "modes":
            self.error(head, "E003", f"expected: {_SOURCE_USAGE}")
            return
        i, j = rest[1].text, rest[2].text
        if i == j:
            self.error(rest[2], "E005", f"source mode {i!r} given twice")
            return
        self.sources.append(Source(kind, theta, (i, j), **loc))

    def _coincidence(self, toks, loc):
        body = toks[1:]
        groups: list[list[_Tok]] = [[]]
        for t in body:
            if t.kind == "bar":
                groups.append([])
            else:
                groups[-1].append(t)
        patterns = []
        for g in groups:
            # ID ( & ID )*
            ok = len(g) % 2 == 1 and all(
                (t.kind == "word") if k % 2 == 0 else (t.kind == "amp") for k, t in enumerate(g)
            )
            if not ok:
                where = g[0] if g else toks[0]
                self.error(where, "E003", "expected: coincidence ID&ID... | ID&ID...")
                return
            patterns.append(ClickPattern(tuple(t.text for t in g[::2])))
        self.coincidences.append(Coincidence(tuple(patterns), **loc))

    def ir(self) -> CircuitIR:
        return CircuitIR(tuple(self.sources), tuple(self.elements), tuple(self.detectors),
                         tuple(self.coincidences), tuple(self.outputs))


def parse(text: str, validate_ir: bool = True, path: str | None = None) -> CircuitIR:
    """Parse ``.loc`` text; raises :class:`DslError` with every diagnostic found."""
    p = _Parser()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        toks = _lex(raw.split("#", 1)[0], lineno, p.diags)
        if toks:
            p.statement(toks, lineno)
    ir = p.ir()
    diags = list(p.diags)
    if validate_ir:
        diags += validate(ir)
    if diags:
        raise DslError(diags, path)
    return ir


def parse_file(path: str | Path, validate_ir: bool = True) -> CircuitIR:
    path = Path(path)
    return parse(path.read_text(encoding="utf-8"), validate_ir, str(path))


def validate(ir: CircuitIR) -> list[Diagnostic]:
    diags: list[Diagnostic] = []
    produced: set[str] = set()
    consumed: set[str] = set()

    def produce(label, line, col):
        if label in produced:
            diags.append(Diagnostic(line, col, "E006", f"mode {label!r} is produced more than once"))
        produced.add(label)

    # sources and elements in file order
    stmts = sorted([(s.line, s.col, s) for s in ir.sources] + [(e.line, e.col, e) for e in ir.elements],
                   key=lambda t: (t[0], t[1]))
    for line, col, st in stmts:
        if isinstance(st, Source):
            for m in st.modes:
                produce(m, line, col)
            continue
        for m in st.inputs:
            if m in consumed:
                diags.append(Diagnostic(line, col, "E008", f"mode {m!r} was already consumed"))
            elif m not in produced:
                diags.append(Diagnostic(line, col, "E007", f"mode {m!r} is used before it is produced"))
        if st.kind is ElementKind.ROTATION:
            continue
        consumed.update(st.inputs)
        for m in st.outputs:
            produce(m, line, col)

    live = produced - consumed
    seen_names: set[str] = set()
    for d in ir.detectors:
        if d.name in seen_names:
            diags.append(Diagnostic(d.line, d.col, "E012", f"detector {d.name!r} declared twice"))
        seen_names.add(d.name)
        if d.spatial not in produced:
            diags.append(Diagnostic(d.line, d.col, "E010", f"detector {d.name!r} watches undeclared mode {d.spatial!r}"))
        elif d.spatial not in live:
            diags.append(Diagnostic(d.line, d.col, "E009", f"detector {d.name!r} on mode {d.spatial!r}, which is consumed later"))

    for c in ir.coincidences:
        for pat in c.patterns:
            for name in pat.detectors:
                if name not in seen_names:
                    diags.append(Diagnostic(c.line, c.col, "E011", f"coincidence names unknown detector {name!r}"))

    if not ir.outputs:
        diags.append(Diagnostic(0, 0, "E013", "the file has no output line"))
    for extra in ir.outputs[1:]:
        diags.append(Diagnostic(extra.line, extra.col, "E014", "only one output declaration is allowed"))
    if ir.outputs:
        out = ir.outputs[0]
        watched = {d.spatial for d in ir.detectors}
        if out.modes[0] == out.modes[1]:
            diags.append(Diagnostic(out.line, out.col, "E015", "output modes must differ"))
        for m in out.modes:
            if m not in produced:
                diags.append(Diagnostic(out.line, out.col, "E015", f"output mode {m!r} is never produced"))
            elif m not in live:
                diags.append(Diagnostic(out.line, out.col, "E015", f"output mode {m!r} is consumed by an element"))
            elif m in watched:
                diags.append(Diagnostic(out.line, out.col, "E015", f"output mode {m!r} is watched by a detector"))
    return sorted(diags)


def _fmt_theta(theta: float) -> str:
    return repr(float(theta))


def pretty(ir: CircuitIR) -> str:
    """Canonical text form; ``parse(pretty(ir)) == ir``."""
    lines = []
    for s in ir.sources:
        th = "" if s.theta is None else f" theta={_fmt_theta(s.theta)}"
        lines.append(f"source {s.kind}{th} modes {s.modes[0]} {s.modes[1]}")
    for el in ir.elements:
        if el.kind is ElementKind.BS5050:
            lines.append(f"bs {el.inputs[0]} {el.inputs[1]} -> {el.outputs[0]} {el.outputs[1]}")
        elif el.kind is ElementKind.PBS:
            lines.append(f"pbs {el.inputs[0]} -> {el.outputs[0]} {el.outputs[1]}")
        else:
            if el.basis is None:
                raise ValueError("only preset rotations have a text form")
            lines.append(f"rot {el.inputs[0]} basis {el.basis}")
    for d in ir.detectors:
        lines.append(f"detector {d.name} on {d.spatial}")
    for c in ir.coincidences:
        lines.append("coincidence " + " | ".join(str(p) for p in c.patterns))
    for o in ir.outputs:
        lines.append(f"output {o.modes[0]} {o.modes[1]}")
    return "\n".join(lines) + "\n"
