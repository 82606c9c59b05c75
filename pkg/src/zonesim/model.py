"""Building description: materials, constructions, zones, links and validation.

Every value here is plain data. Constructing an object never raises on bad
physics; :func:`validate_building` reports violations as a list so a caller
(typically the CLI) can print all of them at once.

Orientation conventions
-----------------------
``tilt`` is the angle of the wall's *outside* face normal from the zenith:
0 is a roof facing the sky, 90 a vertical wall, 180 a face looking at the
ground.  ``azimuth`` is the compass direction of that normal, clockwise from
north (0 = N, 90 = E, 180 = S).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any

import numpy as np

EXTERIOR = "EXTERIOR"

RHO_AS = 1.2  # kg/m3, reference air density
C_AS = 1000.0  # J/(kg.K), air specific heat

THIN_LAYER = 1e-3  # m; thinner end layers are lumped into the surface node


@dataclass(frozen=True)
class Material:
    conductivity: float  # W/(m.K)
    density: float  # kg/m3
    specific_heat: float  # J/(kg.K)
    name: str = ""


MATERIALS: dict[str, Material] = {
    "wood": Material(0.15, 600.0, 1600.0, "wood"),
    "polystyrene": Material(0.04, 25.0, 1400.0, "polystyrene"),
    "metal_sheet": Material(50.0, 7800.0, 450.0, "metal_sheet"),
    "concrete": Material(1.4, 2200.0, 880.0, "concrete"),
    "brick": Material(0.7, 1700.0, 840.0, "brick"),
}


@dataclass(frozen=True)
class Layer:
    material: Material
    thickness: float  # m


@dataclass(frozen=True)
class WallConstruction:
    """Ordered layers, listed from the inside face to the outside face.

    ``massless`` turns the construction into a pure series resistance (all
    node capacitances zero), used to reproduce steady lumped models.
    """

    layers: tuple[Layer, ...]
    nodes_per_layer: int = 1
    massless: bool = False

    @property
    def resistance(self) -> float:
        """Conduction resistance, m2.K/W."""
        return sum(layer.thickness / layer.material.conductivity for layer in self.layers)

    @property
    def areal_capacitance(self) -> float:
        """Sum of rho.cp.e over the layers, J/(m2.K)."""
        return sum(
            layer.material.density * layer.material.specific_heat * layer.thickness
            for layer in self.layers
        )


@dataclass(frozen=True)
class Wall:
    id: str
    construction: WallConstruction
    area: float
    side_in: str
    side_out: str
    tilt: float = 90.0
    azimuth: float = 0.0
    sw_absorptivity_in: float = 0.3
    sw_absorptivity_out: float = 0.3
    h_ci: float = 3.0
    h_ce: float = 15.0
    h_ri: float = 5.0
    h_re: float = 5.0


@dataclass(frozen=True)
class Glazing:
    id: str
    area: float
    tau0: float
    u_value: float
    side_in: str
    side_out: str = EXTERIOR
    tilt: float = 90.0
    azimuth: float = 0.0
    emissivity_out: float = 0.9


@dataclass(frozen=True)
class Zone:
    id: str
    volume: float
    air_capacitance: float | None = None  # J/K; defaults to rho_as.c_as.V
    internal_gain_schedule: tuple[float, ...] = (0.0,) * 24  # W
    vapor_gain_schedule: tuple[float, ...] = (0.0,) * 24  # kg/s
    mech_extract_flow: float = 0.0  # kg/s
    reference_height: float = 0.0  # m, floor height above the exterior datum

    @property
    def capacitance(self) -> float:
        if self.air_capacitance is not None:
            return self.air_capacitance
        return RHO_AS * C_AS * self.volume


class LinkKind(str, Enum):
    CRACK = "crack"
    OPENING = "opening"


@dataclass(frozen=True)
class AirLink:
    """A crack or small opening between two zones, or a zone and outdoors.

    ``height`` is measured above the floor of the non-exterior ``from`` zone
    (or of ``to`` when ``from`` is outdoors).  ``facade_azimuth`` orients the
    exterior end for wind pressure; ``cp`` overrides the default coefficient.
    """

    id: str
    kind: LinkKind
    cd: float
    exponent: float
    aperture: float
    height: float
    from_: str
    to: str
    opening_schedule: tuple[float, ...] = (1.0,) * 24
    facade_azimuth: float | None = None
    cp: float | None = None


class SwMode(str, Enum):
    FLOOR = "floor"
    TARGET_SURFACE = "target"


@dataclass(frozen=True)
class SwDistribution:
    mode: SwMode = SwMode.FLOOR
    target: str | None = None  # wall id when mode is TARGET_SURFACE


@dataclass(frozen=True)
class BuildingModel:
    zones: tuple[Zone, ...]
    walls: tuple[Wall, ...] = ()
    glazings: tuple[Glazing, ...] = ()
    links: tuple[AirLink, ...] = ()
    albedo: float = 0.2
    sw_distribution: SwDistribution = field(default_factory=SwDistribution)
    latitude: float | None = None  # None: sun held at the zenith
    start_day: int = 1  # day of year of time 0

    def zone(self, zone_id: str) -> Zone:
        for z in self.zones:
            if z.id == zone_id:
                return z
        raise KeyError(zone_id)

    def wall(self, wall_id: str) -> Wall:
        for w in self.walls:
            if w.id == wall_id:
                return w
        raise KeyError(wall_id)

    def link(self, link_id: str) -> AirLink:
        for link in self.links:
            if link.id == link_id:
                return link
        raise KeyError(link_id)

    @property
    def zone_ids(self) -> list[str]:
        return [z.id for z in self.zones]


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True, order=True)
class Violation:
    where: str
    message: str

    def __str__(self) -> str:
        return f"{self.where}: {self.message}"


def _check_schedule(where: str, values, lo: float | None, hi: float | None, out: list):
    if len(values) != 24:
        out.append(Violation(where, f"schedule must have 24 hourly values, got {len(values)}"))
        return
    for h, v in enumerate(values):
        if not np.isfinite(v) or (lo is not None and v < lo) or (hi is not None and v > hi):
            out.append(Violation(where, f"hour {h} value {v} outside [{lo}, {hi}]"))
            return


def _check_construction(where: str, c: WallConstruction, out: list):
    if not c.layers:
        out.append(Violation(where, "construction has no layers"))
    if c.nodes_per_layer < 1:
        out.append(Violation(where, f"nodes_per_layer must be >= 1, got {c.nodes_per_layer}"))
    for i, layer in enumerate(c.layers):
        m = layer.material
        if layer.thickness <= 0:
            out.append(Violation(f"{where}.layers[{i}]", f"thickness must be > 0, got {layer.thickness}"))
        for attr in ("conductivity", "density", "specific_heat"):
            if getattr(m, attr) <= 0:
                out.append(
                    Violation(f"{where}.layers[{i}]", f"material {attr} must be > 0, got {getattr(m, attr)}")
                )


def validate_building(model: BuildingModel) -> list[Violation]:
    """Return every invariant violation of ``model``, sorted; empty if valid."""
    out: list[Violation] = []
    if not model.zones:
        out.append(Violation("zones", "at least one zone is required"))
    known = {z.id for z in model.zones}
    refs = known | {EXTERIOR}

    seen: set[str] = set()
    for kind, items in (("zone", model.zones), ("wall", model.walls),
                        ("glazing", model.glazings), ("link", model.links)):
        for item in items:
            key = f"{kind}:{item.id}"
            if key in seen:
                out.append(Violation(f"{kind} {item.id}", "duplicate id"))
            seen.add(key)

    for z in model.zones:
        where = f"zone {z.id}"
        if z.volume <= 0:
            out.append(Violation(where, f"volume must be > 0, got {z.volume}"))
        if z.air_capacitance is not None and z.air_capacitance <= 0:
            out.append(Violation(where, "air_capacitance must be > 0"))
        if z.mech_extract_flow < 0:
            out.append(Violation(where, f"mech_extract_flow must be >= 0, got {z.mech_extract_flow}"))
        _check_schedule(f"{where}.internal_gain_schedule", z.internal_gain_schedule, None, None, out)
        _check_schedule(f"{where}.vapor_gain_schedule", z.vapor_gain_schedule, 0.0, None, out)

    for w in model.walls:
        where = f"wall {w.id}"
        _check_construction(where, w.construction, out)
        if w.area <= 0:
            out.append(Violation(where, f"area must be > 0, got {w.area}"))
        for attr in ("sw_absorptivity_in", "sw_absorptivity_out"):
            v = getattr(w, attr)
            if not 0.0 <= v <= 1.0:
                out.append(Violation(where, f"{attr} must be in [0, 1], got {v}"))
        for attr in ("h_ci", "h_ce", "h_ri", "h_re"):
            if getattr(w, attr) < 0:
                out.append(Violation(where, f"{attr} must be >= 0, got {getattr(w, attr)}"))
        if not 0.0 <= w.tilt <= 180.0:
            out.append(Violation(where, f"tilt must be in [0, 180], got {w.tilt}"))
        _check_sides(where, w.side_in, w.side_out, refs, out)

    for g in model.glazings:
        where = f"glazing {g.id}"
        if g.area <= 0:
            out.append(Violation(where, f"area must be > 0, got {g.area}"))
        if not 0.0 <= g.tau0 <= 1.0:
            out.append(Violation(where, f"tau0 must be in [0, 1], got {g.tau0}"))
        if g.u_value <= 0:
            out.append(Violation(where, f"u_value must be > 0, got {g.u_value}"))
        if not 0.0 <= g.emissivity_out <= 1.0:
            out.append(Violation(where, f"emissivity_out must be in [0, 1], got {g.emissivity_out}"))
        _check_sides(where, g.side_in, g.side_out, refs, out)
        if g.side_in == EXTERIOR:
            out.append(Violation(where, "side_in must be a zone"))

    for link in model.links:
        where = f"link {link.id}"
        if link.cd <= 0:
            out.append(Violation(where, f"cd must be > 0, got {link.cd}"))
        if not 0.5 <= link.exponent <= 1.0:
            out.append(Violation(where, f"exponent must be in [0.5, 1.0], got {link.exponent}"))
        if link.aperture < 0:
            out.append(Violation(where, f"aperture must be >= 0, got {link.aperture}"))
        _check_sides(where, link.from_, link.to, refs, out)
        _check_schedule(f"{where}.opening_schedule", link.opening_schedule, 0.0, 1.0, out)

    if not 0.0 <= model.albedo <= 1.0:
        out.append(Violation("albedo", f"must be in [0, 1], got {model.albedo}"))
    sw = model.sw_distribution
    if sw.mode is SwMode.TARGET_SURFACE and sw.target not in {w.id for w in model.walls}:
        out.append(Violation("sw_distribution", f"target wall {sw.target!r} does not exist"))
    if model.latitude is not None and not -90.0 <= model.latitude <= 90.0:
        out.append(Violation("latitude", f"must be in [-90, 90], got {model.latitude}"))

    # reachability from outdoors through walls and glazings
    adj: dict[str, set[str]] = {r: set() for r in refs}
    for item in (*model.walls, *model.glazings):
        if item.side_in in adj and item.side_out in adj:
            adj[item.side_in].add(item.side_out)
            adj[item.side_out].add(item.side_in)
    reached = {EXTERIOR}
    stack = [EXTERIOR]
    while stack:
        for nxt in adj[stack.pop()]:
            if nxt not in reached:
                reached.add(nxt)
                stack.append(nxt)
    for z in model.zones:
        if z.id not in reached:
            out.append(Violation(f"zone {z.id}", "not reachable from outdoors through walls or glazings"))

    return sorted(set(out))


def _check_sides(where: str, a: str, b: str, refs: set[str], out: list):
    for label, ref in (("side_in/from", a), ("side_out/to", b)):
        if ref not in refs:
            out.append(Violation(where, f"unresolved reference {label}={ref!r}"))
    if a == b:
        out.append(Violation(where, f"both sides reference {a!r}"))


# ---------------------------------------------------------------------------
# Wall discretization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WallChain:
    """Nodal chain of a wall, per unit area.

    ``capacitance[k]`` is J/(m2.K) of node k; ``conductance[k]`` W/(m2.K)
    couples nodes k and k+1.  Node 0 is the inside surface, the last node the
    outside surface.
    """

    capacitance: np.ndarray
    conductance: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.capacitance)

    @property
    def inside(self) -> int:
        return 0

    @property
    def outside(self) -> int:
        return self.n_nodes - 1

    @property
    def resistance(self) -> float:
        return float(np.sum(1.0 / self.conductance))


def discretize_wall(construction: WallConstruction) -> WallChain:
    """Split each layer into ``nodes_per_layer`` slices with a node at each
    slice centre; adjacent nodes are joined by the series half-slice
    resistances.  End layers thinner than 1 mm carry no node of their own:
    their capacitance goes to the surface node and their resistance stays in
    series.
    """
    if not construction.layers:
        raise ValueError("construction has no layers")
    if construction.nodes_per_layer < 1:
        raise ValueError("nodes_per_layer must be >= 1")
    for layer in construction.layers:
        if layer.thickness <= 0:
            raise ValueError(f"layer thickness must be > 0, got {layer.thickness}")

    layers = list(construction.layers)
    n = construction.nodes_per_layer

    def lump(layer: Layer) -> tuple[float, float]:
        m = layer.material
        return m.density * m.specific_heat * layer.thickness, layer.thickness / m.conductivity

    c_in = r_in = c_out = r_out = 0.0
    if len(layers) > 1 and layers[0].thickness < THIN_LAYER:
        c_in, r_in = lump(layers.pop(0))
    if len(layers) > 1 and layers[-1].thickness < THIN_LAYER:
        c_out, r_out = lump(layers.pop())

    caps = [c_in]
    # resistance accumulated since the last node
    pending = r_in
    res: list[float] = []
    for layer in layers:
        m = layer.material
        dx = layer.thickness / n
        half_r = dx / (2.0 * m.conductivity)
        c_slice = m.density * m.specific_heat * dx
        for _ in range(n):
            res.append(pending + half_r)
            caps.append(c_slice)
            pending = half_r
    res.append(pending + r_out)
    caps.append(c_out)

    capacitance = np.array(caps, dtype=float)
    if construction.massless:
        capacitance[:] = 0.0
    return WallChain(capacitance=capacitance, conductance=1.0 / np.array(res))


def wall_u_value(wall: Wall) -> float:
    """Air-to-air transmittance 1/U = 1/h_ci + sum(e/k) + 1/h_ce, W/(m2.K).

    If either film coefficient is zero the films are dropped and the
    conduction-only value is returned.
    """
    r = wall.construction.resistance
    if wall.h_ci > 0 and wall.h_ce > 0:
        r += 1.0 / wall.h_ci + 1.0 / wall.h_ce
    return 1.0 / r


# ---------------------------------------------------------------------------
# Building description file
# ---------------------------------------------------------------------------


class BuildingFileError(ValueError):
    pass


def _material(spec: Any, library: dict[str, Material]) -> Material:
    if isinstance(spec, str):
        if spec not in library:
            raise BuildingFileError(f"unknown material {spec!r}")
        return library[spec]
    return Material(float(spec["conductivity"]), float(spec["density"]),
                    float(spec["specific_heat"]), spec.get("name", ""))


def _schedule(value: Any, default: tuple[float, ...]) -> tuple[float, ...]:
    if value is None:
        return default
    if isinstance(value, (int, float)):
        return (float(value),) * 24
    return tuple(float(v) for v in value)


def building_from_dict(data: dict) -> BuildingModel:
    """Build a model from the JSON-compatible description; no validation."""
    try:
        library = dict(MATERIALS)
        for name, spec in (data.get("materials") or {}).items():
            library[name] = replace(_material(spec, library), name=name)

        zones = tuple(
            Zone(
                id=str(z["id"]),
                volume=float(z["volume"]),
                air_capacitance=None if z.get("air_capacitance") is None else float(z["air_capacitance"]),
                internal_gain_schedule=_schedule(z.get("internal_gain_schedule"), (0.0,) * 24),
                vapor_gain_schedule=_schedule(z.get("vapor_gain_schedule"), (0.0,) * 24),
                mech_extract_flow=float(z.get("mech_extract_flow", 0.0)),
                reference_height=float(z.get("reference_height", 0.0)),
            )
            for z in data.get("zones", [])
        )
        walls = []
        for w in data.get("walls", []):
            c = w["construction"]
            layers = tuple(Layer(_material(layer["material"], library), float(layer["thickness"]))
                           for layer in c["layers"])
            construction = WallConstruction(layers, int(c.get("nodes_per_layer", 1)),
                                            bool(c.get("massless", False)))
            extra = {k: float(w[k]) for k in ("tilt", "azimuth", "sw_absorptivity_in",
                                               "sw_absorptivity_out", "h_ci", "h_ce", "h_ri", "h_re")
                     if k in w}
            walls.append(Wall(id=str(w["id"]), construction=construction, area=float(w["area"]),
                              side_in=str(w["side_in"]), side_out=str(w["side_out"]), **extra))
        glazings = []
        for g in data.get("glazings", []):
            extra = {k: float(g[k]) for k in ("tilt", "azimuth", "emissivity_out") if k in g}
            glazings.append(Glazing(id=str(g["id"]), area=float(g["area"]), tau0=float(g["tau0"]),
                                    u_value=float(g["u_value"]), side_in=str(g["side_in"]),
                                    side_out=str(g.get("side_out", EXTERIOR)), **extra))
        links = []
        for lk in data.get("links", []):
            links.append(AirLink(
                id=str(lk["id"]),
                kind=LinkKind(lk.get("kind", "crack").lower()),
                cd=float(lk["cd"]),
                exponent=float(lk.get("exponent", 0.5)),
                aperture=float(lk["aperture"]),
                height=float(lk.get("height", 0.0)),
                from_=str(lk["from"]),
                to=str(lk["to"]),
                opening_schedule=_schedule(lk.get("opening_schedule"), (1.0,) * 24),
                facade_azimuth=None if lk.get("facade_azimuth") is None else float(lk["facade_azimuth"]),
                cp=None if lk.get("cp") is None else float(lk["cp"]),
            ))
        sw = data.get("sw_distribution", "floor")
        if isinstance(sw, dict):
            sw_dist = SwDistribution(SwMode.TARGET_SURFACE, str(sw["target"]))
        elif sw == "floor":
            sw_dist = SwDistribution()
        else:
            raise BuildingFileError(f"sw_distribution must be 'floor' or {{'target': id}}, got {sw!r}")
        latitude = data.get("latitude")
        return BuildingModel(
            zones=zones, walls=tuple(walls), glazings=tuple(glazings), links=tuple(links),
            albedo=float(data.get("albedo", 0.2)), sw_distribution=sw_dist,
            latitude=None if latitude is None else float(latitude),
            start_day=int(data.get("start_day", 1)),
        )
    except (KeyError, TypeError) as exc:
        raise BuildingFileError(f"malformed building description: missing or bad field {exc}") from exc
    except ValueError as exc:
        if isinstance(exc, BuildingFileError):
            raise
        raise BuildingFileError(f"malformed building description: {exc}") from exc


def _material_dict(m: Material) -> dict:
    return {"conductivity": m.conductivity, "density": m.density, "specific_heat": m.specific_heat,
            **({"name": m.name} if m.name else {})}


def building_to_dict(model: BuildingModel) -> dict:
    """Inverse of :func:`building_from_dict`; materials are written inline."""
    def construction(c: WallConstruction) -> dict:
        d = {"layers": [{"material": _material_dict(layer.material), "thickness": layer.thickness}
                        for layer in c.layers],
             "nodes_per_layer": c.nodes_per_layer}
        if c.massless:
            d["massless"] = True
        return d

    sw = model.sw_distribution
    return {
        "zones": [{"id": z.id, "volume": z.volume, "air_capacitance": z.air_capacitance,
                   "internal_gain_schedule": list(z.internal_gain_schedule),
                   "vapor_gain_schedule": list(z.vapor_gain_schedule),
                   "mech_extract_flow": z.mech_extract_flow,
                   "reference_height": z.reference_height} for z in model.zones],
        "walls": [{"id": w.id, "construction": construction(w.construction), "area": w.area,
                   "side_in": w.side_in, "side_out": w.side_out, "tilt": w.tilt, "azimuth": w.azimuth,
                   "sw_absorptivity_in": w.sw_absorptivity_in, "sw_absorptivity_out": w.sw_absorptivity_out,
                   "h_ci": w.h_ci, "h_ce": w.h_ce, "h_ri": w.h_ri, "h_re": w.h_re} for w in model.walls],
        "glazings": [{"id": g.id, "area": g.area, "tau0": g.tau0, "u_value": g.u_value,
                      "side_in": g.side_in, "side_out": g.side_out, "tilt": g.tilt,
                      "azimuth": g.azimuth, "emissivity_out": g.emissivity_out} for g in model.glazings],
        "links": [{"id": lk.id, "kind": lk.kind.value, "cd": lk.cd, "exponent": lk.exponent,
                   "aperture": lk.aperture, "height": lk.height, "from": lk.from_, "to": lk.to,
                   "opening_schedule": list(lk.opening_schedule), "facade_azimuth": lk.facade_azimuth,
                   "cp": lk.cp} for lk in model.links],
        "albedo": model.albedo,
        "sw_distribution": "floor" if sw.mode is SwMode.FLOOR else {"target": sw.target},
        "latitude": model.latitude,
        "start_day": model.start_day,
    }


def load_building(path: str | Path) -> BuildingModel:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise BuildingFileError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise BuildingFileError(f"{path}: top level must be an object")
    return building_from_dict(data)


def dump_building(model: BuildingModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(building_to_dict(model), indent=2) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class Face:
    """One face of a wall as seen from the zone it borders."""

    wall_id: str
    side: str  # "in" or "out"
    zone: str
    area: float
    absorptivity: float
    h_c: float
    h_r: float
    is_floor: bool

    @property
    def id(self) -> str:
        return f"{self.wall_id}:{self.side}"


def zone_faces(model: BuildingModel, zone_id: str) -> list[Face]:
    """Wall faces bordering ``zone_id``, in model order."""
    faces = []
    for w in model.walls:
        if w.side_in == zone_id:
            faces.append(Face(w.id, "in", zone_id, w.area, w.sw_absorptivity_in, w.h_ci, w.h_ri,
                              is_floor=w.tilt > 135.0))
        if w.side_out == zone_id:
            faces.append(Face(w.id, "out", zone_id, w.area, w.sw_absorptivity_out, w.h_ce, w.h_re,
                              is_floor=w.tilt < 45.0))
    return faces
