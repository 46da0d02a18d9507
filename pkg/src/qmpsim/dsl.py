"""Reader and writer for ``.qmp`` protocol files.

A protocol file is a flat list of directives, one per line, ``#`` starting a
comment::

    protocol nwv
    preselect (0.6,0) (0.8,0)
    collapse p1=0.25
    postselect (0.7071,0) (0.7071,0) retain=noclick
    run trials=1000000 seed=7 shards=8

Measurement stages are ``detector theta=<real> eps=<real>`` (weak two-level
detector), ``collapse p1=<real> [p0=<real>]`` or ``collapse gamma=<real>
t=<real>`` (partial collapse) and ``pointer lambda=<real> [q0=<real>]
[delta=<real>]`` (Gaussian pointer).  Complex amplitudes are ``(re,im)``
pairs.  The parser never raises on bad input: it collects every problem as a
:class:`Diagnostic` with a 1-based line and column.

Defaults, all written out explicitly by :func:`serialize`:

=============  ========  ===========
directive      key       default
=============  ========  ===========
detector       theta     pi/4
collapse       p0        0
pointer        q0        0
pointer        delta     1
postselect     retain    click (wv, pointer); required for nwv
run            shards    1
=============  ========  ===========

Diagnostic codes
----------------
Errors: ``ENCODING``, ``SYNTAX``, ``UNKNOWN_DIRECTIVE``, ``DUPLICATE_STAGE``,
``MISSING_STAGE``, ``BAD_KIND``, ``BAD_NUMBER``, ``BAD_ARITY``,
``UNKNOWN_KEY``, ``MISSING_KEY``, ``DUPLICATE_KEY``, ``CONFLICTING_KEYS``,
``PROB_RANGE``, ``VALUE_RANGE``, ``NORM_ERROR``, ``BAD_RETAIN``,
``MISSING_RETAIN``; from :func:`validate`: ``KIND_STAGE_MISMATCH``,
``RETAIN_CONVENTION``, ``ZERO_STRENGTH``, ``POINTER_GRID``.

Warnings: ``W_NORMALIZED``; from :func:`validate`: ``W_DIVERGENT``,
``W_P0_NONZERO``.
"""

from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

from .detector import DEFAULT_THETA, DetectorParams
from .hilbert import Ket
from .nullprotocol import PartialCollapseSpec
from .pointer import DEFAULT_HALF_WIDTH, DEFAULT_POINTS, GaussianPointer
from .weakvalues import EPSILON_OVERLAP

KINDS = ("wv", "nwv", "pointer")
RETAIN = ("click", "noclick")
MEASUREMENT_DIRECTIVES = ("detector", "collapse", "pointer")
DIRECTIVES = ("protocol", "preselect", *MEASUREMENT_DIRECTIVES, "postselect", "run")

NORM_WARN = 1e-9
NORM_ERROR = 1e-3

ERROR_CODES = (
    "ENCODING", "SYNTAX", "UNKNOWN_DIRECTIVE", "DUPLICATE_STAGE", "MISSING_STAGE",
    "BAD_KIND", "BAD_NUMBER", "BAD_ARITY", "UNKNOWN_KEY", "MISSING_KEY",
    "DUPLICATE_KEY", "CONFLICTING_KEYS", "PROB_RANGE", "VALUE_RANGE", "NORM_ERROR",
    "BAD_RETAIN", "MISSING_RETAIN", "KIND_STAGE_MISMATCH", "RETAIN_CONVENTION",
    "ZERO_STRENGTH", "POINTER_GRID",
)
WARNING_CODES = ("W_NORMALIZED", "W_DIVERGENT", "W_P0_NONZERO")

_REAL = re.compile(r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?", re.ASCII)
_INT = re.compile(r"[+-]?\d{1,20}", re.ASCII)
_KEY = re.compile(r"([A-Za-z_][A-Za-z0-9_]*)=(.*)", re.S)
_SPACE = " \t\f\v\r"


@dataclass(frozen=True)
class Diagnostic:
    line: int
    column: int
    severity: str  # "error" | "warning"
    code: str
    message: str

    @property
    def is_error(self) -> bool:
        return self.severity == "error"

    def __str__(self) -> str:
        return f"{self.line}:{self.column}: {self.severity} {self.code}: {self.message}"


@dataclass(frozen=True)
class DetectorStage:
    eps: float
    theta: float = DEFAULT_THETA

    def params(self) -> DetectorParams:
        return DetectorParams.from_angle(self.eps, self.theta)


@dataclass(frozen=True)
class PointerStage:
    lam: float
    q0: float = 0.0
    delta: float = 1.0

    def pointer(self) -> GaussianPointer:
        return GaussianPointer(self.q0, self.delta)


@dataclass(frozen=True)
class RunParams:
    trials: int
    seed: int
    shards: int = 1


Measurement = Union[DetectorStage, PartialCollapseSpec, PointerStage]


@dataclass(frozen=True)
class ProtocolSpec:
    """A complete single-qubit two-step experiment.

    The observable is always ``|1><1|``.  ``postselect`` is the retained
    state; ``retain`` says whether the second detector clicks or stays silent
    on it (see :mod:`qmpsim.nullprotocol` for why this matters for ``nwv``).
    """

    kind: str
    preselect: tuple[complex, complex]
    measurement: Measurement
    postselect: tuple[complex, complex]
    retain: str = "click"
    run: RunParams | None = None
    positions: tuple[tuple[str, int, int], ...] = field(default=(), compare=False, repr=False)

    def preselect_ket(self) -> Ket:
        return Ket(self.preselect).normalize()

    def postselect_ket(self) -> Ket:
        return Ket(self.postselect).normalize()

    def position(self, stage: str) -> tuple[int, int]:
        for name, line, col in self.positions:
            if name == stage:
                return line, col
        return 1, 1

    def protocol_hash(self) -> str:
        return hashlib.sha256(serialize(self).encode("utf-8")).hexdigest()


class _Token:
    __slots__ = ("text", "col", "is_complex")

    def __init__(self, text: str, col: int, is_complex: bool) -> None:
        self.text, self.col, self.is_complex = text, col, is_complex


class _Parser:
    def __init__(self) -> None:
        self.diags: list[Diagnostic] = []
        self.stages: dict[str, tuple[int, int, object]] = {}
        self.measurement: tuple[str, int, int, object] | None = None

    def error(self, line: int, col: int, code: str, msg: str) -> None:
        self.diags.append(Diagnostic(line, col, "error", code, msg))

    def warn(self, line: int, col: int, code: str, msg: str) -> None:
        self.diags.append(Diagnostic(line, col, "warning", code, msg))

    # -- lexing ---------------------------------------------------------
    def tokenize(self, text: str, lineno: int) -> list[_Token] | None:
        tokens = []
        k, n = 0, len(text)
        ok = True
        while k < n:
            ch = text[k]
            if ch in _SPACE:
                k += 1
            elif ch == "(":
                end = text.find(")", k)
                if end < 0:
                    self.error(lineno, k + 1, "SYNTAX", "unbalanced '(' in complex literal")
                    return None
                tokens.append(_Token(text[k:end + 1], k + 1, True))
                k = end + 1
            elif ch == ")":
                self.error(lineno, k + 1, "SYNTAX", "unexpected ')'")
                ok = False
                k += 1
            else:
                start = k
                while k < n and text[k] not in _SPACE and text[k] not in "()":
                    k += 1
                tokens.append(_Token(text[start:k], start + 1, False))
        return tokens if ok else None

    def number(self, s: str, line: int, col: int, integer: bool = False) -> float | int | None:
        pattern = _INT if integer else _REAL
        if not pattern.fullmatch(s):
            kind = "integer" if integer else "real number"
            self.error(line, col, "BAD_NUMBER", f"expected a {kind}, got {s!r}")
            return None
        if integer:
            return int(s)
        v = float(s)
        if not math.isfinite(v):
            self.error(line, col, "BAD_NUMBER", f"{s!r} is not finite")
            return None
        return v

    def complex_literal(self, tok: _Token, line: int) -> complex | None:
        inner = tok.text[1:-1]
        parts = inner.split(",")
        if len(parts) != 2:
            self.error(line, tok.col, "SYNTAX", f"complex literal must be (re,im), got {tok.text!r}")
            return None
        values = []
        offset = tok.col + 1
        for part in parts:
            stripped = part.strip(_SPACE)
            col = offset + (len(part) - len(part.lstrip(_SPACE)))
            values.append(self.number(stripped, line, col))
            offset += len(part) + 1
        if None in values:
            return None
        return complex(values[0], values[1])

    def keywords(self, tokens: list[_Token], line: int, allowed: tuple[str, ...]) -> dict[str, tuple[str, int]] | None:
        out: dict[str, tuple[str, int]] = {}
        ok = True
        for tok in tokens:
            m = _KEY.fullmatch(tok.text) if not tok.is_complex else None
            if m is None:
                self.error(line, tok.col, "SYNTAX", f"expected key=value, got {tok.text!r}")
                ok = False
                continue
            key, value = m.group(1), m.group(2)
            if key not in allowed:
                self.error(line, tok.col, "UNKNOWN_KEY", f"unknown key {key!r} (allowed: {', '.join(allowed)})")
                ok = False
            elif key in out:
                self.error(line, tok.col, "DUPLICATE_KEY", f"key {key!r} given twice")
                ok = False
            elif value == "":
                self.error(line, tok.col, "SYNTAX", f"key {key!r} has no value")
                ok = False
            else:
                out[key] = (value, tok.col + len(key) + 1)
        return out if ok else None

    def state(self, tokens: list[_Token], line: int, col: int, name: str) -> tuple[complex, complex] | None:
        amps = [t for t in tokens if t.is_complex]
        if len(amps) != 2:
            self.error(line, col, "BAD_ARITY", f"{name} needs exactly 2 amplitudes, got {len(amps)}")
            return None
        values = [self.complex_literal(t, line) for t in amps]
        if None in values:
            return None
        norm = math.hypot(values[0].real, values[0].imag, values[1].real, values[1].imag)
        dev = abs(norm - 1.0)
        if norm == 0.0 or dev > NORM_ERROR:
            self.error(line, amps[0].col, "NORM_ERROR", f"{name} norm {norm:.6g} is not 1 (tolerance {NORM_ERROR:g})")
            return None
        if dev > NORM_WARN:
            self.warn(line, amps[0].col, "W_NORMALIZED", f"{name} norm {norm:.12g} renormalized to 1")
            values = [v / norm for v in values]
        return values[0], values[1]

    def real_key(self, kw: dict, key: str, line: int, col: int, required: bool, default=None):
        if key not in kw:
            if required:
                self.error(line, col, "MISSING_KEY", f"missing required key {key!r}")
            return default
        value, vcol = kw[key]
        return self.number(value, line, vcol)

    def prob(self, kw: dict, key: str, line: int, col: int, required: bool, default=None):
        v = self.real_key(kw, key, line, col, required, default)
        if v is not None and key in kw and not 0.0 <= v <= 1.0:
            self.error(line, kw[key][1], "PROB_RANGE", f"{key} = {v:g} is outside [0, 1]")
            return None
        return v

    # -- directives -----------------------------------------------------
    def directive(self, name: str, args: list[_Token], line: int, col: int) -> object | None:
        if name == "protocol":
            if len(args) != 1 or args[0].is_complex:
                self.error(line, col, "BAD_ARITY", "protocol takes exactly one of wv, nwv, pointer")
                return None
            if args[0].text not in KINDS:
                self.error(line, args[0].col, "BAD_KIND", f"unknown protocol kind {args[0].text!r}")
                return None
            return args[0].text

        if name == "preselect":
            extra = [t for t in args if not t.is_complex]
            if extra:
                self.error(line, extra[0].col, "BAD_ARITY", f"unexpected argument {extra[0].text!r}")
                return None
            return self.state(args, line, col, "preselect")

        if name == "postselect":
            kw = self.keywords([t for t in args if not t.is_complex], line, ("retain",))
            amps = self.state(args, line, col, "postselect")
            if kw is None or amps is None:
                return None
            retain = None
            if "retain" in kw:
                retain, rcol = kw["retain"]
                if retain not in RETAIN:
                    self.error(line, rcol, "BAD_RETAIN", f"retain must be click or noclick, got {retain!r}")
                    return None
            return amps, retain

        if any(t.is_complex for t in args):
            bad = next(t for t in args if t.is_complex)
            self.error(line, bad.col, "BAD_ARITY", f"{name} takes key=value arguments only")
            return None

        if name == "detector":
            kw = self.keywords(args, line, ("theta", "eps"))
            if kw is None:
                return None
            theta = self.real_key(kw, "theta", line, col, False, DEFAULT_THETA)
            eps = self.real_key(kw, "eps", line, col, True)
            if theta is None or eps is None:
                return None
            if not math.isfinite(theta + eps):
                self.error(line, col, "VALUE_RANGE", "theta + eps overflows")
                return None
            return DetectorStage(eps, theta)

        if name == "collapse":
            kw = self.keywords(args, line, ("p1", "p0", "gamma", "t"))
            if kw is None:
                return None
            rate_form = "gamma" in kw or "t" in kw
            if rate_form and ("p1" in kw or "p0" in kw):
                self.error(line, col, "CONFLICTING_KEYS", "use either p1=[,p0=] or gamma=,t=, not both")
                return None
            if rate_form:
                gamma = self.real_key(kw, "gamma", line, col, True)
                t = self.real_key(kw, "t", line, col, True)
                if gamma is None or t is None:
                    return None
                for key, v in (("gamma", gamma), ("t", t)):
                    if v < 0:
                        self.error(line, kw[key][1], "VALUE_RANGE", f"{key} must be non-negative")
                        return None
                return PartialCollapseSpec.from_rate(gamma, t)
            p1 = self.prob(kw, "p1", line, col, True)
            p0 = self.prob(kw, "p0", line, col, False, 0.0)
            if p1 is None or p0 is None:
                return None
            return PartialCollapseSpec(p1=p1, p0=p0)

        if name == "pointer":
            kw = self.keywords(args, line, ("lambda", "q0", "delta"))
            if kw is None:
                return None
            lam = self.real_key(kw, "lambda", line, col, True)
            q0 = self.real_key(kw, "q0", line, col, False, 0.0)
            delta = self.real_key(kw, "delta", line, col, False, 1.0)
            if lam is None or q0 is None or delta is None:
                return None
            if delta <= 0:
                self.error(line, kw["delta"][1], "VALUE_RANGE", "delta must be positive")
                return None
            return PointerStage(lam, q0, delta)

        if name == "run":
            kw = self.keywords(args, line, ("trials", "seed", "shards"))
            if kw is None:
                return None
            values = {}
            limits = (("trials", True, None, 1, 10**12), ("seed", True, None, 0, 2**64 - 1),
                      ("shards", False, 1, 1, 4096))
            for key, required, default, lo, hi in limits:
                if key not in kw:
                    if required:
                        self.error(line, col, "MISSING_KEY", f"missing required key {key!r}")
                        return None
                    values[key] = default
                    continue
                v = self.number(kw[key][0], line, kw[key][1], integer=True)
                if v is None:
                    return None
                if not lo <= v <= hi:
                    self.error(line, kw[key][1], "VALUE_RANGE", f"{key} must lie in [{lo}, {hi}]")
                    return None
                values[key] = v
            return RunParams(**values)

        raise AssertionError(name)  # unreachable: caller filters names

    def line(self, raw: str, lineno: int) -> None:
        text = raw.split("#", 1)[0]
        tokens = self.tokenize(text, lineno)
        if not tokens:
            return
        head, args = tokens[0], tokens[1:]
        name = head.text
        if head.is_complex or name not in DIRECTIVES:
            self.error(lineno, head.col, "UNKNOWN_DIRECTIVE", f"unknown directive {name!r}")
            return
        if name in MEASUREMENT_DIRECTIVES:
            if self.measurement is not None:
                first = self.measurement
                self.error(lineno, head.col, "DUPLICATE_STAGE",
                           f"second measurement stage {name!r} (first: {first[0]!r} on line {first[1]})")
                return
        elif name in self.stages:
            self.error(lineno, head.col, "DUPLICATE_STAGE",
                       f"{name!r} already given on line {self.stages[name][0]}")
            return
        value = self.directive(name, args, lineno, head.col)
        if name in MEASUREMENT_DIRECTIVES:
            self.measurement = (name, lineno, head.col, value)
        else:
            self.stages[name] = (lineno, head.col, value)

    def finish(self) -> ProtocolSpec | None:
        for stage in ("protocol", "preselect", "measurement", "postselect"):
            present = self.measurement is not None if stage == "measurement" else stage in self.stages
            if not present:
                self.error(1, 1, "MISSING_STAGE", f"missing stage: {stage}")
        kind_entry = self.stages.get("protocol")
        post = self.stages.get("postselect")
        if kind_entry and post and kind_entry[2] == "nwv" and post[2] is not None and post[2][1] is None:
            self.error(post[0], post[1], "MISSING_RETAIN",
                       "nwv postselection must state retain=click or retain=noclick")
        if any(d.is_error for d in self.diags):
            return None
        amps, retain = post[2]
        run = self.stages.get("run")
        positions = tuple((name, l, c) for name, (l, c, _) in self.stages.items())
        positions += (("measurement", self.measurement[1], self.measurement[2]),)
        return ProtocolSpec(
            kind=kind_entry[2],
            preselect=self.stages["preselect"][2],
            measurement=self.measurement[3],
            postselect=amps,
            retain=retain or "click",
            run=run[2] if run else None,
            positions=positions,
        )


def _decode(source: bytes, parser: _Parser) -> str:
    try:
        return source.decode("utf-8")
    except UnicodeDecodeError as exc:
        head = source[: exc.start].decode("utf-8", errors="replace")
        line = head.count("\n") + 1
        col = len(head) - (head.rfind("\n") + 1) + 1
        parser.error(line, col, "ENCODING", f"invalid UTF-8 byte 0x{source[exc.start]:02x}")
        return source.decode("utf-8", errors="replace")


def parse(source: str | bytes) -> tuple[ProtocolSpec | None, list[Diagnostic]]:
    """Parse protocol text.

    Returns the spec (``None`` if any error was found) and all diagnostics,
    warnings included.  LF and CRLF line endings are both accepted.
    """
    parser = _Parser()
    text = _decode(source, parser) if isinstance(source, (bytes, bytearray)) else source
    if text.startswith("\ufeff"):
        text = " " + text[1:]
    for lineno, raw in enumerate(text.split("\n"), start=1):
        parser.line(raw, lineno)
    return parser.finish(), parser.diags


def load(path: str | Path) -> tuple[ProtocolSpec | None, list[Diagnostic]]:
    return parse(Path(path).read_bytes())


def _r(x: float) -> str:
    return format(float(x), ".17g")


def _c(z: complex) -> str:
    return f"({_r(z.real)},{_r(z.imag)})"


def serialize(spec: ProtocolSpec) -> str:
    """Canonical text: fixed directive order, 17 significant digits, LF endings."""
    lines = [f"protocol {spec.kind}", f"preselect {_c(spec.preselect[0])} {_c(spec.preselect[1])}"]
    m = spec.measurement
    if isinstance(m, DetectorStage):
        lines.append(f"detector theta={_r(m.theta)} eps={_r(m.eps)}")
    elif isinstance(m, PartialCollapseSpec):
        if m.gamma is not None:
            lines.append(f"collapse gamma={_r(m.gamma)} t={_r(m.t)}")
        else:
            lines.append(f"collapse p1={_r(m.p1)} p0={_r(m.p0)}")
    elif isinstance(m, PointerStage):
        lines.append(f"pointer lambda={_r(m.lam)} q0={_r(m.q0)} delta={_r(m.delta)}")
    else:
        raise TypeError(f"unknown measurement stage {m!r}")
    lines.append(f"postselect {_c(spec.postselect[0])} {_c(spec.postselect[1])} retain={spec.retain}")
    if spec.run is not None:
        r = spec.run
        lines.append(f"run trials={r.trials} seed={r.seed} shards={r.shards}")
    return "\n".join(lines) + "\n"


_STAGE_FOR_KIND = {"wv": DetectorStage, "nwv": PartialCollapseSpec, "pointer": PointerStage}


def validate(spec: ProtocolSpec) -> list[Diagnostic]:
    """Semantic checks on a parsed spec; returns diagnostics (empty when clean)."""
    out: list[Diagnostic] = []
    m = spec.measurement
    mline, mcol = spec.position("measurement")
    pline, pcol = spec.position("postselect")
    if not isinstance(m, _STAGE_FOR_KIND[spec.kind]):
        out.append(Diagnostic(mline, mcol, "error", "KIND_STAGE_MISMATCH",
                              f"protocol {spec.kind} cannot use a {type(m).__name__} stage"))
    overlap = abs(spec.postselect_ket().inner(spec.preselect_ket())) ** 2
    if overlap <= EPSILON_OVERLAP:
        out.append(Diagnostic(pline, pcol, "warning", "W_DIVERGENT",
                              f"|<f|i>|^2 = {overlap:.3e}: conditional values diverge"))
    if spec.kind == "nwv" and spec.retain != "noclick":
        out.append(Diagnostic(pline, pcol, "error", "RETAIN_CONVENTION",
                              "the null protocol conditions on the silent second detector; use retain=noclick"))
    if isinstance(m, DetectorStage) and m.params().click_gap == 0.0:
        out.append(Diagnostic(mline, mcol, "error", "ZERO_STRENGTH", "detector eps gives zero measurement strength"))
    if isinstance(m, PartialCollapseSpec):
        if m.p1 == 0.0:
            out.append(Diagnostic(mline, mcol, "error", "ZERO_STRENGTH", "p1 = 0: the detector never fires on |1>"))
        if m.p0 != 0.0:
            out.append(Diagnostic(mline, mcol, "warning", "W_P0_NONZERO",
                                  "closed-form ratio and ancilla checks assume p0 = 0 and are skipped"))
    if isinstance(m, PointerStage):
        span = 2 * DEFAULT_HALF_WIDTH * m.delta + abs(m.lam)
        step = span / (DEFAULT_POINTS - 1)
        if step > m.delta / 8:
            out.append(Diagnostic(mline, mcol, "error", "POINTER_GRID",
                                  f"grid step {step:.3g} does not resolve delta = {m.delta:g}"))
    return out


def check(source: str | bytes) -> tuple[ProtocolSpec | None, list[Diagnostic]]:
    """:func:`parse` followed by :func:`validate`; spec is ``None`` on any error."""
    spec, diags = parse(source)
    if spec is None:
        return None, diags
    diags = diags + validate(spec)
    if any(d.is_error for d in diags):
        return None, diags
    return spec, diags
