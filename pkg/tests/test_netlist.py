import random

import pytest
from hypothesis import given, strategies as st

from deasim import netlist as nl

# --------------------------------------------------------------------------
# quantities


@pytest.mark.parametrize(
    "text,expected",
    [
        ("3kV", 3.0 * 1e3),
        ("3000V", 3000.0),
        ("100Meg", 100.0 * 1e6),
        ("1000G", 1000.0 * 1e9),
        ("45m", 45.0 * 1e-3),
        ("2u", 2.0 * 1e-6),
        ("200n", 200.0 * 1e-9),
        ("1p", 1e-12),
        ("1e-15", 1e-15),
        ("2M", 2.0 * 1e-3),  # SPICE convention: bare m/M is milli
        (".5", 0.5),
        ("2ms", 2.0 * 1e-3),
        ("3s", 3.0),
        ("100MegOhm", 100.0 * 1e6),
        ("0", 0.0),
    ],
)
def test_parse_quantity(text, expected):
    assert nl.parse_quantity(text) == expected


@pytest.mark.parametrize("text", ["3x", "k3", "", "1..2", "3kk", "--1", "1F2"])
def test_parse_quantity_rejects(text):
    with pytest.raises(ValueError):
        nl.parse_quantity(text)


@given(st.floats(min_value=1e-14, max_value=1e14, allow_nan=False))
def test_format_quantity_round_trips(value):
    assert nl.parse_quantity(nl.format_quantity(value)) == value


def test_canonical_value_rendering():
    assert nl.format_quantity(3000.0) == "3k"
    assert nl.format_quantity(1e8) == "100Meg"
    assert nl.format_quantity(1e12) == "1000G"
    assert nl.format_quantity(0.0) == "0"


# --------------------------------------------------------------------------
# parsing


def test_parse_trevor(trevor_text):
    result = nl.parse(trevor_text)
    assert result.ok
    ast = result.ast
    assert len(list(ast.of_kind(nl.SupplyStmt))) == 1
    assert len(list(ast.of_kind(nl.ResistorStmt))) == 3
    assert len(list(ast.of_kind(nl.DeaStmt))) == 6
    assert len(list(ast.of_kind(nl.DesStmt))) == 3
    assert len(list(ast.of_kind(nl.FootStmt))) == 5
    supply = next(ast.of_kind(nl.SupplyStmt))
    assert supply.value == 3000.0


def test_supply_unit_expansion():
    result = nl.parse("supply VS vs_rail gnd 3kV\n")
    assert result.ok
    assert next(result.ast.of_kind(nl.SupplyStmt)).value == 3000.0


def test_resistor_meg_expansion():
    result = nl.parse("resistor RS1 vs_rail n1 100Meg\n")
    assert next(result.ast.of_kind(nl.ResistorStmt)).value == 1e8


def test_unknown_coupling_diagnostic_location():
    text = "supply VS rail gnd 3kV\ndes DES1 n2 gnd coupled=DEA9\n"
    parsed = nl.parse(text)
    assert parsed.ok
    result = nl.validate(parsed.ast)
    assert result.model is None
    codes = [d.code for d in result.diagnostics]
    assert "unknown-coupling" in codes
    diag = next(d for d in result.diagnostics if d.code == "unknown-coupling")
    assert diag.line == 2
    assert 1 <= diag.col <= len("des DES1 n2 gnd coupled=DEA9")


def test_parse_is_total_on_junk():
    result = nl.parse("@@@ $$$\nsupply\n= = =\nsupply VS rail gnd 3kV\n")
    assert not result.ok
    assert len(result.ast.statements) == 1  # the one good line survives


@given(st.text(max_size=300))
def test_parse_never_crashes_on_text(text):
    nl.parse(text)


@given(st.binary(max_size=300))
def test_parse_never_crashes_on_bytes(data):
    nl.parse_bytes(data)


def test_decode_error_is_diagnosed():
    result = nl.parse_bytes(b"supply VS rail gnd 3kV\n\xff\xfe\n")
    assert any(d.code == "decode-error" for d in result.diagnostics)


# --------------------------------------------------------------------------
# canonical printing / round trips


def test_round_trip_trevor(trevor_text):
    first = nl.parse(trevor_text)
    printed = nl.print_canonical(first.ast)
    second = nl.parse(printed)
    assert second.ok
    assert second.ast.statements == first.ast.statements


def test_canonical_merges_value_spellings():
    a = nl.parse("supply VS rail gnd 3000V\n")
    b = nl.parse("supply VS rail gnd 3kV\n")
    assert nl.print_canonical(a.ast) == nl.print_canonical(b.ast)
    assert "3k" in nl.print_canonical(a.ast)


def test_comment_only_file_prints_empty():
    result = nl.parse("# nothing here\n\n   # more\n")
    assert result.ok
    assert nl.print_canonical(result.ast) == ""


_KEYWORDS = ("supply", "resistor", "dea", "des", "foot", "param")


def _random_netlist(rng: random.Random) -> str:
    """Syntactically valid random netlist source for round-trip checks."""
    names = [f"E{i}" for i in range(12)]
    nodes = ["gnd", "rail", "n1", "n2", "na_b"]
    values = ["1e-3", "47", "0.25", "100Meg", "2u", "1000G", "15m", "3"]
    volt_values = values + ["3kV", "120V"]
    ohm_values = values + ["2MegOhm", "50kohm"]
    dea_keys = list(nl.DEA_KEYS)
    lines = []
    for _ in range(rng.randint(1, 12)):
        kind = rng.choice(_KEYWORDS)
        name = rng.choice(names) + str(rng.randint(0, 99))
        a, b = rng.sample(nodes, 2)
        if kind == "supply":
            lines.append(f"supply {name} {a} {b} {rng.choice(volt_values)}")
        elif kind == "resistor":
            lines.append(f"resistor {name} {a} {b} {rng.choice(ohm_values)}")
        elif kind == "dea":
            extra = ""
            if rng.random() < 0.5:
                extra = f" {rng.choice(dea_keys)}={rng.choice(values)}"
            lines.append(f"dea {name} {a} {b}{extra}")
        elif kind == "des":
            lines.append(f"des {name} {a} {b} coupled=DEA{rng.randint(1, 5)}")
        elif kind == "foot":
            lines.append(f"foot {name} DEA1 DEA2 gain=0.5")
        else:
            key = rng.choice(list(nl.PARAM_KEYS))
            lines.append(f"param {key}={rng.choice(values)}")
        if rng.random() < 0.3:
            lines.append("# comment line")
    return "\n".join(lines) + "\n"


def test_round_trip_on_1000_generated_netlists():
    rng = random.Random(20260810)
    for _ in range(1000):
        text = _random_netlist(rng)
        first = nl.parse(text)
        assert first.ok, text
        printed = nl.print_canonical(first.ast)
        second = nl.parse(printed)
        assert second.ok
        assert second.ast.statements == first.ast.statements, text


# --------------------------------------------------------------------------
# validation

VALID_HEAD = "supply VS rail gnd 3kV\nresistor RS1 rail n1 100Meg\n"

# one malformed sample per diagnostic code; parsed via bytes so the
# decode error is reachable too
NEGATIVE_SAMPLES = {
    "decode-error": b"supply VS rail gnd 3kV\n\xff\n",
    "unknown-statement": b"waffle X a b 3\n",
    "missing-field": b"supply VS rail\n",
    "unexpected-token": b"supply VS rail gnd 3kV trailing\n",
    "bad-suffix": b"supply VS rail gnd 3xV\n",
    "wrong-unit": b"supply VS rail gnd 3F\n",
    "bad-key": b"dea D1 a gnd tau 0.5\n",
    "duplicate-key": b"dea D1 a gnd tau=1 tau=2\n",
    "duplicate-name": VALID_HEAD.encode()
    + b"dea D1 n1 gnd\ndea D1 n1 gnd\ndes S1 n1 gnd coupled=D1\n",
    "no-supply": b"resistor R1 a gnd 1k\nresistor R2 a gnd 1k\n",
    "no-ground": b"supply VS rail other 3kV\nresistor R1 rail other 1k\n",
    "dangling-node": b"supply VS rail gnd 3kV\nresistor R1 rail nx 1k\n",
    "disconnected": (
        b"supply VS rail gnd 3kV\nresistor R1 rail gnd 1k\n"
        b"resistor R2 a b 1k\nresistor R3 a b 2k\n"
    ),
    "unknown-coupling": b"supply VS rail gnd 3kV\ndes S1 rail gnd coupled=NOPE\n",
    "unknown-dea": VALID_HEAD.encode()
    + b"dea D1 n1 gnd\ndes S1 n1 gnd coupled=D1\nfoot F1 D1 MISSING\n",
    "foot-same-dea": VALID_HEAD.encode()
    + b"dea D1 n1 gnd\ndes S1 n1 gnd coupled=D1\nfoot F1 D1 D1\n",
    "unknown-param": b"supply VS rail gnd 3kV\ndea D1 rail gnd bogus=1\n",
    "bad-param": b"supply VS rail gnd 3kV\nresistor R1 rail gnd 0\n",
}


def _all_diagnostics(data: bytes):
    parsed = nl.parse_bytes(data)
    diags = list(parsed.diagnostics)
    if parsed.ok:
        diags += nl.validate(parsed.ast).diagnostics
    return diags


@pytest.mark.parametrize("code", sorted(NEGATIVE_SAMPLES))
def test_negative_sample_produces_code(code):
    diags = _all_diagnostics(NEGATIVE_SAMPLES[code])
    assert code in [d.code for d in diags], diags


def test_every_diagnostic_code_has_a_negative_test():
    assert set(NEGATIVE_SAMPLES) == set(nl.DIAGNOSTIC_CODES)


def test_diagnostics_point_inside_statements():
    for code, sample in NEGATIVE_SAMPLES.items():
        lines = sample.decode("utf-8", errors="replace").splitlines()
        for diag in _all_diagnostics(sample):
            assert 1 <= diag.line <= max(len(lines), 1)
            line = lines[diag.line - 1] if diag.line <= len(lines) else ""
            assert 1 <= diag.col <= max(len(line) + 1, 2), (code, diag)


def test_collect_all_reports_every_error():
    text = (
        "supply VS rail gnd 3kV\n"
        "resistor R1 rail gnd 0\n"  # bad-param
        "dea D1 rail gnd bogus=1\n"  # unknown-param
        "des S1 rail gnd coupled=NOPE\n"  # unknown-coupling
    )
    parsed = nl.parse(text)
    assert parsed.ok
    result = nl.validate(parsed.ast)
    codes = sorted(d.code for d in result.diagnostics)
    assert codes == ["bad-param", "unknown-coupling", "unknown-param"]


def test_validate_trevor_model(trevor_model):
    # one supply, three serial resistors, three switches, six actuators,
    # five feet
    assert len(trevor_model.supplies) == 1
    assert len(trevor_model.resistors) == 3
    assert len(trevor_model.switches) == 3
    assert len(trevor_model.deas) == 6
    assert len(trevor_model.feet) == 5
    assert trevor_model.node_names[trevor_model.ground] == "gnd"


def test_two_inverter_loop_is_structurally_valid(trevor_text):
    from conftest import ring_netlist

    parsed = nl.parse(ring_netlist(2))
    assert parsed.ok
    result = nl.validate(parsed.ast)
    assert result.model is not None


def test_param_statement_overrides_defaults():
    from conftest import ring_netlist

    text = "param tau=0.1\n" + ring_netlist(3)
    model = nl.load_model(text)
    assert all(
        d.membrane.viscoelastic_time_constant == pytest.approx(0.1)
        for d in model.deas
    )


def test_element_params_override_param_statement():
    text = (
        "param tau=0.1\n"
        "supply VS rail gnd 3kV\n"
        "resistor RS1 rail n1 100Meg\n"
        "des S1 n1 gnd coupled=D1\n"
        "dea D1 n1 gnd tau=0.7\n"
    )
    model = nl.load_model(text)
    assert model.deas[0].membrane.viscoelastic_time_constant == pytest.approx(0.7)


def test_explicit_cref_wins_over_area():
    text = (
        "supply VS rail gnd 3kV\n"
        "resistor RS1 rail n1 100Meg\n"
        "des S1 n1 gnd coupled=D1\n"
        "dea D1 n1 gnd cref=250p\n"
    )
    model = nl.load_model(text)
    assert model.deas[0].membrane.reference_capacitance == pytest.approx(250e-12)


def test_load_model_raises_with_diagnostics():
    with pytest.raises(nl.NetlistError) as err:
        nl.load_model("des S1 a gnd coupled=NOPE\n", "bad.net")
    assert "bad.net" in str(err.value)
