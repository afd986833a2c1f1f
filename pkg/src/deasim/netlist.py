"""Netlist DSL: tokenizer, parser, semantic validator and canonical printer.

Grammar (one statement per line, ``#`` starts a comment, keywords are
case-insensitive, identifiers are case-sensitive, ``gnd`` is the
distinguished ground node)::

    file      = { line } ;
    line      = [ statement ] [ comment ] EOL ;
    statement = supply | resistor | dea | des | foot | param ;
    supply    = "supply"   name node node value ;
    resistor  = "resistor" name node node value ;
    dea       = "dea"      name node node { key "=" value } ;
    des       = "des"      name node node "coupled" "=" name { key "=" value } ;
    foot      = "foot"     name name name { key "=" value } ;
    param     = "param"    key "=" value { key "=" value } ;
    value     = number [ suffix ] [ unit ] ;
    suffix    = "p"|"n"|"u"|"m"|"k"|"Meg"|"G" ;          (* case-insensitive *)
    unit      = "V"|"ohm"|"F"|"s" ;                      (* case-insensitive *)

Parsing is total: any byte sequence yields an AST plus a diagnostic
list, never an exception.  Validation is collect-all and produces a
:class:`CircuitModel` only when no error remains.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterator

from .electromech import DEFAULT_PRE_STRETCH, DesCurve, MembraneParams
from .locomotion import FootModel

__all__ = [
    "SourceLoc",
    "Diagnostic",
    "Netlist",
    "ParseResult",
    "ValidationResult",
    "CircuitModel",
    "NetlistError",
    "parse",
    "parse_bytes",
    "validate",
    "print_canonical",
    "parse_quantity",
    "format_quantity",
    "load_model",
    "DIAGNOSTIC_CODES",
]

GROUND = "gnd"

# machine-readable diagnostic codes; every code has a negative test
DIAGNOSTIC_CODES = (
    "decode-error",
    "unknown-statement",
    "missing-field",
    "unexpected-token",
    "bad-suffix",
    "wrong-unit",
    "bad-key",
    "duplicate-key",
    "duplicate-name",
    "no-supply",
    "no-ground",
    "dangling-node",
    "disconnected",
    "unknown-coupling",
    "unknown-dea",
    "foot-same-dea",
    "unknown-param",
    "bad-param",
)

_SUFFIXES = (
    ("meg", 1e6),
    ("g", 1e9),
    ("k", 1e3),
    ("m", 1e-3),
    ("u", 1e-6),
    ("n", 1e-9),
    ("p", 1e-12),
)
_UNIT_LETTERS = ("ohm", "v", "f", "s")

_NUMBER_RE = re.compile(r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")
_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_VALUE_TOKEN_RE = re.compile(
    r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?[A-Za-z]*"
)

_NOLOC = None  # set after SourceLoc definition


@dataclass(frozen=True)
class SourceLoc:
    line: int = 0
    col: int = 0


_NOLOC = SourceLoc()


@dataclass(frozen=True)
class Diagnostic:
    line: int
    col: int
    code: str
    message: str
    severity: str = "error"

    def render(self, filename: str = "<netlist>") -> str:
        return f"{filename}:{self.line}:{self.col}: {self.code}: {self.message}"


class NetlistError(Exception):
    """Raised by the convenience loader when a netlist has errors."""

    def __init__(self, diagnostics: list[Diagnostic], filename: str = "<netlist>"):
        self.diagnostics = diagnostics
        self.filename = filename
        super().__init__(
            "\n".join(d.render(filename) for d in diagnostics) or "netlist error"
        )


# --------------------------------------------------------------------------
# AST


@dataclass
class SupplyStmt:
    name: str
    pos: str
    neg: str
    value: float
    loc: SourceLoc = field(default=_NOLOC, compare=False)


@dataclass
class ResistorStmt:
    name: str
    pos: str
    neg: str
    value: float
    loc: SourceLoc = field(default=_NOLOC, compare=False)


@dataclass
class DeaStmt:
    name: str
    pos: str
    neg: str
    params: dict[str, float] = field(default_factory=dict)
    loc: SourceLoc = field(default=_NOLOC, compare=False)


@dataclass
class DesStmt:
    name: str
    pos: str
    neg: str
    coupled: str = ""
    params: dict[str, float] = field(default_factory=dict)
    loc: SourceLoc = field(default=_NOLOC, compare=False)


@dataclass
class FootStmt:
    name: str
    dea_left: str
    dea_right: str
    params: dict[str, float] = field(default_factory=dict)
    loc: SourceLoc = field(default=_NOLOC, compare=False)


@dataclass
class ParamStmt:
    params: dict[str, float] = field(default_factory=dict)
    loc: SourceLoc = field(default=_NOLOC, compare=False)


Statement = SupplyStmt | ResistorStmt | DeaStmt | DesStmt | FootStmt | ParamStmt


@dataclass
class Netlist:
    statements: list[Statement] = field(default_factory=list)

    def of_kind(self, kind) -> Iterator:
        return (s for s in self.statements if isinstance(s, kind))


@dataclass
class ParseResult:
    ast: Netlist
    diagnostics: list[Diagnostic]

    @property
    def ok(self) -> bool:
        return not any(d.severity == "error" for d in self.diagnostics)


# --------------------------------------------------------------------------
# Values with SPICE-style suffixes

# expected unit letter per parameter key (None: dimensionless or metres)
_KEY_UNITS = {
    "roff": "ohm",
    "ron": "ohm",
    "cref": "f",
    "tau": "s",
}

DEA_KEYS = ("area", "cref", "d0", "epsr", "mu", "prestretch", "smax", "tau")
DES_KEYS = ("roff", "ron", "steepness", "threshold")
FOOT_KEYS = ("engage", "gain", "length", "release")
PARAM_KEYS = tuple(sorted(set(DEA_KEYS) | set(DES_KEYS) | set(FOOT_KEYS)))


def _split_quantity(text: str):
    """Split a value lexeme into (number text, multiplier, unit, bad tail)."""
    m = _NUMBER_RE.match(text)
    if m is None or m.start() != 0:
        return None, 1.0, None, text
    rest = text[m.end():].lower()
    mult = 1.0
    for suffix, factor in _SUFFIXES:
        if rest.startswith(suffix):
            mult = factor
            rest = rest[len(suffix):]
            break
    unit = None
    for letter in _UNIT_LETTERS:
        if rest.startswith(letter):
            unit = letter
            rest = rest[len(letter):]
            break
    return m.group(0), mult, unit, rest


def parse_quantity(text: str) -> float:
    """Parse a standalone value such as ``3kV`` or ``100Meg``.

    Used at the CLI boundary; raises ``ValueError`` on malformed input.
    """
    number, mult, _, tail = _split_quantity(text.strip())
    if number is None or tail:
        raise ValueError(f"malformed value {text!r}")
    return float(number) * mult


def format_quantity(value: float) -> str:
    """Canonical rendering with the largest suffix that round-trips
    bit-exactly; falls back to the plain shortest float repr."""
    if value == 0.0:
        return "0"
    for suffix, factor in (
        ("G", 1e9),
        ("Meg", 1e6),
        ("k", 1e3),
        ("", 1.0),
        ("m", 1e-3),
        ("u", 1e-6),
        ("n", 1e-9),
        ("p", 1e-12),
    ):
        # upper bound inclusive: there is no suffix above G, so 1e12
        # renders as 1000G
        mantissa = value / factor
        if not 1.0 <= abs(mantissa) <= 1000.0:
            continue
        candidates = [repr(mantissa), f"{mantissa:.17g}"]
        if mantissa == int(mantissa):
            candidates.insert(0, str(int(mantissa)))
        for render in candidates:
            if float(render) * factor == value:
                return f"{render}{suffix}"
    return repr(value)


# --------------------------------------------------------------------------
# Tokenizer / parser


@dataclass(frozen=True)
class _Token:
    kind: str  # ident | value | eq | junk
    text: str
    col: int


def _tokenize_line(line: str, lineno: int, diags: list[Diagnostic]) -> list[_Token]:
    tokens: list[_Token] = []
    pos = 0
    n = len(line)
    while pos < n:
        ch = line[pos]
        if ch == "#":
            break
        if ch.isspace():
            pos += 1
            continue
        if ch == "=":
            tokens.append(_Token("eq", "=", pos + 1))
            pos += 1
            continue
        m = _IDENT_RE.match(line, pos)
        if m:
            tokens.append(_Token("ident", m.group(0), pos + 1))
            pos = m.end()
            continue
        m = _VALUE_TOKEN_RE.match(line, pos)
        if m:
            tokens.append(_Token("value", m.group(0), pos + 1))
            pos = m.end()
            continue
        diags.append(
            Diagnostic(lineno, pos + 1, "unexpected-token",
                       f"unexpected character {ch!r}")
        )
        tokens.append(_Token("junk", ch, pos + 1))
        pos += 1
    return tokens


class _LineParser:
    def __init__(self, tokens: list[_Token], lineno: int, diags: list[Diagnostic]):
        self.tokens = tokens
        self.lineno = lineno
        self.diags = diags
        self.i = 0
        self.failed = False

    def _loc_col(self) -> int:
        if self.i < len(self.tokens):
            return self.tokens[self.i].col
        return self.tokens[-1].col + len(self.tokens[-1].text) if self.tokens else 1

    def error(self, code: str, message: str):
        self.diags.append(Diagnostic(self.lineno, self._loc_col(), code, message))
        self.failed = True

    def peek(self) -> _Token | None:
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def take_ident(self, what: str) -> str | None:
        tok = self.peek()
        if tok is None:
            self.error("missing-field", f"expected {what}")
            return None
        if tok.kind != "ident":
            self.error("unexpected-token", f"expected {what}, got {tok.text!r}")
            return None
        self.i += 1
        return tok.text

    def take_value(self, what: str, expected_unit: str | None) -> float | None:
        tok = self.peek()
        if tok is None:
            self.error("missing-field", f"expected {what}")
            return None
        if tok.kind != "value":
            self.error("unexpected-token", f"expected {what}, got {tok.text!r}")
            return None
        self.i += 1
        number, mult, unit, tail = _split_quantity(tok.text)
        if number is None or tail:
            self.diags.append(
                Diagnostic(self.lineno, tok.col, "bad-suffix",
                           f"malformed value {tok.text!r}")
            )
            self.failed = True
            return None
        base = float(number)
        if unit is not None and expected_unit is not None and unit != expected_unit:
            self.diags.append(
                Diagnostic(self.lineno, tok.col, "wrong-unit",
                           f"value {tok.text!r} carries unit {unit!r}; "
                           f"expected {expected_unit!r}")
            )
            self.failed = True
        elif unit is not None and expected_unit is None:
            self.diags.append(
                Diagnostic(self.lineno, tok.col, "wrong-unit",
                           f"value {tok.text!r} carries a unit letter in a "
                           f"dimensionless or metre-valued slot")
            )
            self.failed = True
        return base * mult

    def take_keyvalues(self, ident_keys: tuple[str, ...] = ()) -> tuple[dict, dict]:
        """Parse trailing ``key=value`` pairs.

        Keys in ``ident_keys`` take identifier values (returned in the
        second dict); all others take numbers.
        """
        numbers: dict[str, float] = {}
        idents: dict[str, str] = {}
        while self.peek() is not None:
            tok = self.peek()
            if tok.kind != "ident":
                self.error("unexpected-token", f"expected key=value, got {tok.text!r}")
                self.i += 1
                continue
            key = tok.text
            self.i += 1
            eq = self.peek()
            if eq is None or eq.kind != "eq":
                self.diags.append(
                    Diagnostic(self.lineno, tok.col, "bad-key",
                               f"key {key!r} is not followed by '='")
                )
                self.failed = True
                continue
            self.i += 1
            lowered = key.lower()
            if lowered in ident_keys:
                value = self.take_ident(f"identifier value for {key}")
                if value is None:
                    continue
                if lowered in idents:
                    self.diags.append(
                        Diagnostic(self.lineno, tok.col, "duplicate-key",
                                   f"key {key!r} given twice")
                    )
                    self.failed = True
                    continue
                idents[lowered] = value
            else:
                value = self.take_value(
                    f"value for {key}", _KEY_UNITS.get(lowered)
                )
                if value is None:
                    continue
                if lowered in numbers:
                    self.diags.append(
                        Diagnostic(self.lineno, tok.col, "duplicate-key",
                                   f"key {key!r} given twice")
                    )
                    self.failed = True
                    continue
                numbers[lowered] = value
        return numbers, idents

    def expect_end(self):
        tok = self.peek()
        if tok is not None:
            self.error("unexpected-token", f"trailing input {tok.text!r}")


def parse(text: str) -> ParseResult:
    """Parse netlist source into an AST plus diagnostics.

    Total over arbitrary strings; statements with errors are dropped
    from the AST but parsing continues on the next line.
    """
    diags: list[Diagnostic] = []
    statements: list[Statement] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\r")
        tokens = _tokenize_line(line, lineno, diags)
        if not tokens:
            continue
        head = tokens[0]
        if head.kind != "ident":
            diags.append(
                Diagnostic(lineno, head.col, "unknown-statement",
                           f"statement must start with a keyword, got {head.text!r}")
            )
            continue
        keyword = head.text.lower()
        loc = SourceLoc(lineno, head.col)
        p = _LineParser(tokens, lineno, diags)
        p.i = 1
        if keyword == "supply":
            name = p.take_ident("supply name")
            pos = p.take_ident("positive node")
            neg = p.take_ident("negative node")
            value = p.take_value("supply voltage", "v")
            p.expect_end()
            if not p.failed:
                statements.append(SupplyStmt(name, pos, neg, value, loc))
        elif keyword == "resistor":
            name = p.take_ident("resistor name")
            pos = p.take_ident("first node")
            neg = p.take_ident("second node")
            value = p.take_value("resistance", "ohm")
            p.expect_end()
            if not p.failed:
                statements.append(ResistorStmt(name, pos, neg, value, loc))
        elif keyword == "dea":
            name = p.take_ident("actuator name")
            pos = p.take_ident("first node")
            neg = p.take_ident("second node")
            params, _ = p.take_keyvalues()
            if not p.failed:
                statements.append(DeaStmt(name, pos, neg, params, loc))
        elif keyword == "des":
            name = p.take_ident("switch name")
            pos = p.take_ident("first node")
            neg = p.take_ident("second node")
            params, idents = p.take_keyvalues(ident_keys=("coupled",))
            coupled = idents.get("coupled")
            if coupled is None and not p.failed:
                p.diags.append(
                    Diagnostic(lineno, head.col, "missing-field",
                               "switch statement requires coupled=<actuator>")
                )
                p.failed = True
            if not p.failed:
                statements.append(DesStmt(name, pos, neg, coupled, params, loc))
        elif keyword == "foot":
            name = p.take_ident("foot name")
            left = p.take_ident("left actuator")
            right = p.take_ident("right actuator")
            params, _ = p.take_keyvalues()
            if not p.failed:
                statements.append(FootStmt(name, left, right, params, loc))
        elif keyword == "param":
            params, _ = p.take_keyvalues()
            if not params and not p.failed:
                p.diags.append(
                    Diagnostic(lineno, head.col, "missing-field",
                               "param statement requires at least one key=value")
                )
                p.failed = True
            if not p.failed:
                statements.append(ParamStmt(params, loc))
        else:
            diags.append(
                Diagnostic(lineno, head.col, "unknown-statement",
                           f"unknown statement keyword {head.text!r}")
            )
    return ParseResult(Netlist(statements), diags)


def parse_bytes(data: bytes) -> ParseResult:
    """Decode and parse; invalid UTF-8 yields a diagnostic, not a crash."""
    try:
        text = data.decode("utf-8")
        extra: list[Diagnostic] = []
    except UnicodeDecodeError as exc:
        text = data.decode("utf-8", errors="replace")
        lineno = data[: exc.start].count(b"\n") + 1
        extra = [
            Diagnostic(lineno, 1, "decode-error",
                       f"input is not valid UTF-8 at byte {exc.start}")
        ]
    result = parse(text)
    return ParseResult(result.ast, extra + result.diagnostics)


# --------------------------------------------------------------------------
# Canonical printer


def _render_params(params: dict[str, float]) -> str:
    return " ".join(f"{k}={format_quantity(v)}" for k, v in sorted(params.items()))


def print_canonical(ast: Netlist) -> str:
    """Deterministic canonical source; re-parsing reproduces the AST."""
    lines = []
    for stmt in ast.statements:
        if isinstance(stmt, SupplyStmt):
            lines.append(
                f"supply {stmt.name} {stmt.pos} {stmt.neg} "
                f"{format_quantity(stmt.value)}"
            )
        elif isinstance(stmt, ResistorStmt):
            lines.append(
                f"resistor {stmt.name} {stmt.pos} {stmt.neg} "
                f"{format_quantity(stmt.value)}"
            )
        elif isinstance(stmt, DeaStmt):
            tail = _render_params(stmt.params)
            lines.append(
                f"dea {stmt.name} {stmt.pos} {stmt.neg}" + (f" {tail}" if tail else "")
            )
        elif isinstance(stmt, DesStmt):
            tail = _render_params(stmt.params)
            lines.append(
                f"des {stmt.name} {stmt.pos} {stmt.neg} coupled={stmt.coupled}"
                + (f" {tail}" if tail else "")
            )
        elif isinstance(stmt, FootStmt):
            tail = _render_params(stmt.params)
            lines.append(
                f"foot {stmt.name} {stmt.dea_left} {stmt.dea_right}"
                + (f" {tail}" if tail else "")
            )
        elif isinstance(stmt, ParamStmt):
            lines.append(f"param {_render_params(stmt.params)}")
    return "\n".join(lines) + ("\n" if lines else "")


# --------------------------------------------------------------------------
# Semantic validation -> CircuitModel


@dataclass(frozen=True)
class Dea:
    name: str
    pos: int
    neg: int
    membrane: MembraneParams
    s_max: float


@dataclass(frozen=True)
class Des:
    name: str
    pos: int
    neg: int
    curve: DesCurve
    coupled_dea: int


@dataclass(frozen=True)
class Resistor:
    name: str
    pos: int
    neg: int
    resistance: float


@dataclass(frozen=True)
class Supply:
    name: str
    pos: int
    neg: int
    voltage: float


@dataclass
class CircuitModel:
    """Validated electrical graph plus mechanical couplings and feet."""

    node_names: list[str]
    ground: int
    supplies: list[Supply]
    resistors: list[Resistor]
    deas: list[Dea]
    switches: list[Des]
    feet: list[FootModel]

    @property
    def dea_names(self) -> list[str]:
        return [d.name for d in self.deas]

    @property
    def des_names(self) -> list[str]:
        return [d.name for d in self.switches]

    def rescaled(self, rs_factor: float = 1.0, vs_factor: float = 1.0) -> "CircuitModel":
        """Copy with every serial resistor and supply scaled; used by
        the sweep harness."""
        resistors = [
            Resistor(r.name, r.pos, r.neg, r.resistance * rs_factor)
            for r in self.resistors
        ]
        supplies = [
            Supply(s.name, s.pos, s.neg, s.voltage * vs_factor)
            for s in self.supplies
        ]
        return CircuitModel(
            node_names=list(self.node_names),
            ground=self.ground,
            supplies=supplies,
            resistors=resistors,
            deas=list(self.deas),
            switches=list(self.switches),
            feet=list(self.feet),
        )

    def with_supply_voltage(self, volts: float) -> "CircuitModel":
        supplies = [Supply(s.name, s.pos, s.neg, volts) for s in self.supplies]
        out = self.rescaled()
        out.supplies = supplies
        return out


@dataclass
class ValidationResult:
    model: CircuitModel | None
    diagnostics: list[Diagnostic]

    @property
    def ok(self) -> bool:
        return self.model is not None


_GLOBAL_DEFAULTS = {
    "epsr": 4.7,
    "d0": 5.0e-4,
    "prestretch": DEFAULT_PRE_STRETCH,
    "mu": 1.6e5,
    "tau": 0.3,
    "smax": 3.0,
    "area": 4.0e-4,
    "roff": 1.0e12,
    "ron": 2.0e6,
    "threshold": 0.09,
    "steepness": 200.0,
    "length": 0.02,
    "gain": 0.5,
    "engage": 0.05,
    "release": 0.02,
}


def _merged(defaults: dict, overrides: dict, keys) -> dict:
    out = {k: defaults[k] for k in keys if k in defaults}
    for k, v in overrides.items():
        if k in keys:
            out[k] = v
    return out


def validate(ast: Netlist) -> ValidationResult:
    """Establish every model invariant or return the complete list of
    violations (collect-all, not fail-fast)."""
    diags: list[Diagnostic] = []

    def err(loc: SourceLoc, code: str, message: str):
        diags.append(Diagnostic(loc.line, loc.col, code, message))

    # unique names per kind
    kinds = (
        (SupplyStmt, "supply"),
        (ResistorStmt, "resistor"),
        (DeaStmt, "dea"),
        (DesStmt, "des"),
        (FootStmt, "foot"),
    )
    for kind, label in kinds:
        seen: dict[str, SourceLoc] = {}
        for stmt in ast.of_kind(kind):
            if stmt.name in seen:
                err(stmt.loc, "duplicate-name",
                    f"{label} {stmt.name!r} already defined on line "
                    f"{seen[stmt.name].line}")
            else:
                seen[stmt.name] = stmt.loc

    # unknown / out-of-range parameter keys
    key_sets = (
        (DeaStmt, set(DEA_KEYS), "actuator"),
        (DesStmt, set(DES_KEYS), "switch"),
        (FootStmt, set(FOOT_KEYS), "foot"),
        (ParamStmt, set(PARAM_KEYS), "param"),
    )
    for kind, allowed, label in key_sets:
        for stmt in ast.of_kind(kind):
            for key in stmt.params:
                if key not in allowed:
                    err(stmt.loc, "unknown-param",
                        f"unknown {label} parameter {key!r}")

    defaults = dict(_GLOBAL_DEFAULTS)
    for stmt in ast.of_kind(ParamStmt):
        for key, value in stmt.params.items():
            if key in defaults:
                defaults[key] = value

    supplies_src = list(ast.of_kind(SupplyStmt))
    resistors_src = list(ast.of_kind(ResistorStmt))
    deas_src = list(ast.of_kind(DeaStmt))
    des_src = list(ast.of_kind(DesStmt))
    feet_src = list(ast.of_kind(FootStmt))

    if not supplies_src:
        diags.append(Diagnostic(1, 1, "no-supply", "netlist declares no supply"))

    # node table from electrical statements
    node_names: list[str] = []
    node_index: dict[str, int] = {}

    def node(name: str) -> int:
        if name not in node_index:
            node_index[name] = len(node_names)
            node_names.append(name)
        return node_index[name]

    electrical = supplies_src + resistors_src + deas_src + des_src
    for stmt in electrical:
        node(stmt.pos)
        node(stmt.neg)

    if GROUND not in node_index:
        diags.append(Diagnostic(1, 1, "no-ground",
                                f"netlist has no ground node {GROUND!r}"))

    # element value checks and parameter resolution
    for stmt in supplies_src:
        if stmt.value < 0.0:
            err(stmt.loc, "bad-param",
                f"supply voltage must be non-negative, got {stmt.value:g}")
    for stmt in resistors_src:
        if stmt.value <= 0.0:
            err(stmt.loc, "bad-param",
                f"resistance must be positive, got {stmt.value:g}")

    dea_index = {stmt.name: i for i, stmt in enumerate(deas_src)}
    deas: list[Dea] = []
    for stmt in deas_src:
        merged = _merged(defaults, stmt.params, DEA_KEYS)
        try:
            kwargs = dict(
                relative_permittivity=merged["epsr"],
                unstrained_thickness=merged["d0"],
                pre_stretch=merged["prestretch"],
                shear_modulus=merged["mu"],
                viscoelastic_time_constant=merged["tau"],
            )
            if "cref" in merged:
                membrane = MembraneParams(
                    reference_capacitance=merged["cref"], **kwargs
                )
            else:
                membrane = MembraneParams.from_geometry(merged["area"], **kwargs)
            s_max = float(merged["smax"])
            if s_max <= 0.0:
                raise ValueError("smax must be positive")
        except ValueError as exc:
            err(stmt.loc, "bad-param", f"actuator {stmt.name}: {exc}")
            continue
        deas.append(Dea(stmt.name, node(stmt.pos), node(stmt.neg), membrane, s_max))

    switches: list[Des] = []
    for stmt in des_src:
        if stmt.coupled not in dea_index:
            err(stmt.loc, "unknown-coupling",
                f"switch {stmt.name} couples to unknown actuator {stmt.coupled!r}")
            continue
        merged = _merged(defaults, stmt.params, DES_KEYS)
        try:
            curve = DesCurve(
                r_off=merged["roff"],
                r_on=merged["ron"],
                threshold_actuation=merged["threshold"],
                steepness=merged["steepness"],
            )
        except ValueError as exc:
            err(stmt.loc, "bad-param", f"switch {stmt.name}: {exc}")
            continue
        switches.append(
            Des(stmt.name, node(stmt.pos), node(stmt.neg), curve,
                dea_index[stmt.coupled])
        )

    feet: list[FootModel] = []
    for stmt in feet_src:
        bad = False
        for attachment in (stmt.dea_left, stmt.dea_right):
            if attachment not in dea_index:
                err(stmt.loc, "unknown-dea",
                    f"foot {stmt.name} references unknown actuator {attachment!r}")
                bad = True
        if stmt.dea_left == stmt.dea_right:
            err(stmt.loc, "foot-same-dea",
                f"foot {stmt.name} must connect two distinct actuators")
            bad = True
        if bad:
            continue
        merged = _merged(defaults, stmt.params, FOOT_KEYS)
        try:
            feet.append(
                FootModel(
                    dea_left=stmt.dea_left,
                    dea_right=stmt.dea_right,
                    rest_length=merged["length"],
                    stride_gain=merged["gain"],
                    engage_strain=merged["engage"],
                    release_strain=merged["release"],
                    name=stmt.name,
                )
            )
        except ValueError as exc:
            err(stmt.loc, "bad-param", f"foot {stmt.name}: {exc}")

    # graph structure: no dangling nodes, connected including ground
    degree = [0] * len(node_names)
    adjacency: list[list[int]] = [[] for _ in node_names]
    for stmt in electrical:
        a, b = node(stmt.pos), node(stmt.neg)
        degree[a] += 1
        degree[b] += 1
        adjacency[a].append(b)
        adjacency[b].append(a)
    for stmt in electrical:
        for endpoint in (stmt.pos, stmt.neg):
            idx = node_index[endpoint]
            if endpoint != GROUND and degree[idx] < 2:
                err(stmt.loc, "dangling-node",
                    f"node {endpoint!r} has only {degree[idx]} branch")
                degree[idx] = 2  # report once
    if GROUND in node_index and node_names:
        seen = {node_index[GROUND]}
        stack = [node_index[GROUND]]
        while stack:
            for neighbour in adjacency[stack.pop()]:
                if neighbour not in seen:
                    seen.add(neighbour)
                    stack.append(neighbour)
        unreachable = [n for i, n in enumerate(node_names) if i not in seen]
        if unreachable:
            diags.append(
                Diagnostic(1, 1, "disconnected",
                           "nodes not connected to ground: "
                           + ", ".join(sorted(unreachable)))
            )

    if any(d.severity == "error" for d in diags):
        return ValidationResult(None, diags)

    model = CircuitModel(
        node_names=node_names,
        ground=node_index[GROUND],
        supplies=[
            Supply(s.name, node_index[s.pos], node_index[s.neg], s.value)
            for s in supplies_src
        ],
        resistors=[
            Resistor(r.name, node_index[r.pos], node_index[r.neg], r.value)
            for r in resistors_src
        ],
        deas=deas,
        switches=switches,
        feet=feet,
    )
    return ValidationResult(model, diags)


def load_model(text: str, filename: str = "<netlist>") -> CircuitModel:
    """Parse and validate, raising :class:`NetlistError` on any error."""
    parsed = parse(text)
    if not parsed.ok:
        raise NetlistError(parsed.diagnostics, filename)
    result = validate(parsed.ast)
    if result.model is None:
        raise NetlistError(parsed.diagnostics + result.diagnostics, filename)
    return result.model
