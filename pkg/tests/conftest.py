import hypothesis
import pytest

from deasim import assemble, example_path, load_model

hypothesis.settings.register_profile(
    "deasim",
    derandomize=True,
    max_examples=60,
    deadline=None,
)
hypothesis.settings.load_profile("deasim")


def ring_netlist(n: int, vs: str = "3kV", rs: str = "100Meg",
                 dea_params: str = "", des_params: str = "") -> str:
    """Minimal n-stage inverter ring: node n<i> is charged through RS<i>,
    pulled down by DES<i> (compressed by DEA<i>), and drives DEA<i+1>."""
    lines = [f"supply VS rail gnd {vs}"]
    for i in range(1, n + 1):
        nxt = i % n + 1
        lines.append(f"resistor RS{i} rail n{i} {rs}")
        des_tail = f" {des_params}" if des_params else ""
        lines.append(f"des DES{i} n{i} gnd coupled=DEA{i}{des_tail}")
        dea_tail = f" {dea_params}" if dea_params else ""
        lines.append(f"dea DEA{nxt} n{i} gnd{dea_tail}")
    return "\n".join(lines) + "\n"


@pytest.fixture(scope="session")
def trevor_text() -> str:
    return example_path("trevor.net").read_text()


@pytest.fixture(scope="session")
def trevor_model(trevor_text):
    return load_model(trevor_text, "trevor.net")


@pytest.fixture(scope="session")
def trevor_system(trevor_model):
    return assemble(trevor_model)
