import pytest

from zonesim.model import (
    EXTERIOR,
    MATERIALS,
    BuildingModel,
    Layer,
    Wall,
    WallConstruction,
    Zone,
)


def sandwich(nodes: int = 1) -> WallConstruction:
    wood, poly = MATERIALS["wood"], MATERIALS["polystyrene"]
    return WallConstruction((Layer(wood, 0.01), Layer(poly, 0.05), Layer(wood, 0.01)), nodes_per_layer=nodes)


def box(volume: float = 30.0, wall_area: float = 10.0, **zone_kw) -> BuildingModel:
    """One zone enclosed by a single light wall and a floor."""
    zone = Zone("z", volume, **zone_kw)
    wall = Wall("w", sandwich(), wall_area, "z", EXTERIOR)
    floor = Wall("f", WallConstruction((Layer(MATERIALS["concrete"], 0.1),)), 10.0, "z", EXTERIOR, tilt=180.0)
    return BuildingModel((zone,), (wall, floor))


@pytest.fixture
def single_box() -> BuildingModel:
    return box()


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[number])
