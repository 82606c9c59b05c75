"""Case studies: a flat-plate solar air collector and a Trombe recycling wall."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from importlib import resources

import numpy as np

from .engine import OutputSeries, Simulation, SimulationConfig, trombe_global_flux
from .model import (C_AS, EXTERIOR, MATERIALS, RHO_AS, AirLink, BuildingModel, Glazing, Layer, LinkKind,
                    SwDistribution, SwMode, Wall, WallConstruction, Zone)
from .weather import SkyModel, WeatherRecord, incident_irradiance, sun_position

WOOD_POLY_WOOD = (Layer(MATERIALS["wood"], 0.01), Layer(MATERIALS["polystyrene"], 0.05),
                  Layer(MATERIALS["wood"], 0.01))


def volume_to_mass_flow(flow_m3h: float) -> float:
    return flow_m3h * RHO_AS / 3600.0


# ---------------------------------------------------------------------------
# Solar air collector
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CollectorParams:
    aperture_area: float = 1.0  # m2
    gap_thickness: float = 0.1  # m
    tau0: float = 0.85
    absorber_alpha: float = 0.95
    wall_alpha: float = 0.3
    flow_rate: float = 1.0  # m3/h
    d_h: float = 500.0  # W/m2, direct horizontal irradiance while the sun is up
    t_ae: float = 25.0  # degC
    sun_hours: tuple[int, int] = (6, 19)  # sun on for start <= hour < end
    # single glass; sized so the lumped loss conductance is ~6.4 W/K at 1 m3/h
    glazing_u: float = 5.17
    absorber_thickness: float = 0.002

    def __post_init__(self):
        for name in ("aperture_area", "gap_thickness", "flow_rate", "d_h", "glazing_u", "absorber_thickness"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        for name in ("tau0", "absorber_alpha", "wall_alpha"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")

    @property
    def mass_flow(self) -> float:
        return volume_to_mass_flow(self.flow_rate)


def build_collector(params: CollectorParams = CollectorParams(), *, oracle: bool = False
                    ) -> BuildingModel:
    """One-zone horizontal collector: glass on top, absorber sheet, insulated
    lower wall and lateral walls, with a fan pulling outdoor air through.

    ``oracle=True`` gives the configuration the lumped balance assumes: the
    absorber takes all transmitted flux, no interior longwave exchange,
    massless envelope.
    """
    s = params.aperture_area
    side = math.sqrt(s)
    gap = Zone("gap", volume=s * params.gap_thickness, mech_extract_flow=params.mass_flow)
    h_ri = 0.0 if oracle else 5.0
    envelope = WallConstruction(WOOD_POLY_WOOD, massless=oracle)
    absorber = Wall(
        "absorber", WallConstruction((Layer(MATERIALS["metal_sheet"], params.absorber_thickness),),
                                     massless=oracle),
        area=s, side_in="gap", side_out=EXTERIOR, tilt=180.0,
        sw_absorptivity_in=1.0 if oracle else params.absorber_alpha, sw_absorptivity_out=0.0,
        h_ri=h_ri, h_ce=0.0, h_re=0.0,  # back face insulated
    )
    lower = Wall("lower", envelope, area=s, side_in="gap", side_out=EXTERIOR, tilt=180.0,
                 sw_absorptivity_in=params.wall_alpha, sw_absorptivity_out=params.wall_alpha, h_ri=h_ri)
    lateral = Wall("lateral", envelope, area=4.0 * side * params.gap_thickness, side_in="gap",
                   side_out=EXTERIOR, tilt=90.0, sw_absorptivity_in=params.wall_alpha,
                   sw_absorptivity_out=params.wall_alpha, h_ri=h_ri)
    glass = Glazing("glass", area=s, tau0=params.tau0, u_value=params.glazing_u, side_in="gap", tilt=0.0)
    return BuildingModel(
        zones=(gap,), walls=(absorber, lower, lateral), glazings=(glass,),
        albedo=0.0, sw_distribution=SwDistribution(SwMode.TARGET_SURFACE, "absorber"),
    )


def collector_weather(params: CollectorParams = CollectorParams(), days: int = 4,
                      dt: float = 3600.0) -> list[WeatherRecord]:
    start, end = params.sun_hours
    n = int(round(days * 86400.0 / dt))
    records = []
    for k in range(n):
        t = k * dt / 3600.0
        sun = params.d_h if start <= (t % 24.0) < end else 0.0
        records.append(WeatherRecord(t, params.t_ae, 0.0, 0.0, sun, 0.0, 0.5))
    return records


def lumped_loss_conductance(model: BuildingModel) -> float:
    """Air-to-outdoor conductance of a one-zone model, W/K.

    Walls count as series films plus conduction; faces without any exterior
    coefficient are adiabatic.  Includes the mechanical through-flow.  Exact
    only when interior longwave exchange is off.
    """
    (zone,) = model.zones
    k = 0.0
    for w in model.walls:
        h_in, h_out = w.h_ci + w.h_ri, w.h_ce + w.h_re
        if h_in > 0 and h_out > 0:
            k += w.area / (1.0 / h_in + w.construction.resistance + 1.0 / h_out)
    k += sum(g.u_value * g.area for g in model.glazings)
    return k + zone.mech_extract_flow * C_AS


def collector_analytic_temperature(t: float, params: CollectorParams, k_total: float) -> float:
    """Gap air temperature of the lumped collector t seconds after sunrise."""
    if k_total <= 0:
        raise ValueError("k_total must be > 0")
    if t < 0:
        raise ValueError("t must be >= 0")
    gain = params.tau0 * params.d_h * params.aperture_area
    capacity = RHO_AS * C_AS * params.aperture_area * params.gap_thickness
    return params.t_ae + gain / k_total * (1.0 - math.exp(-t * k_total / capacity))


@dataclass(frozen=True)
class CollectorMetrics:
    p_u: float  # W
    efficiency: float
    delta_t: float  # K, outlet minus inlet


def collector_metrics(series: OutputSeries, params: CollectorParams = CollectorParams()) -> CollectorMetrics:
    """Useful power and efficiency at the last sunlit hour of the last day."""
    time = series["time_h"]
    last_sun = params.sun_hours[1] - 1
    idx = np.flatnonzero(np.isclose(time % 24.0, last_sun))
    if idx.size == 0:
        raise ValueError("series has no record at the last sunlit hour")
    k = idx[-1]
    delta_t = float(series["T_air:gap"][k] - series["T_ae"][k])
    p_u = params.mass_flow * C_AS * delta_t
    return CollectorMetrics(p_u, p_u / (params.d_h * params.aperture_area), delta_t)


def run_collector(params: CollectorParams = CollectorParams(), *, days: int = 2, warmup_days: int = 2,
                  dt: float = 3600.0, oracle: bool = False,
                  outputs: tuple[str, ...] | None = None) -> tuple[OutputSeries, CollectorMetrics]:
    model = build_collector(params, oracle=oracle)
    config = SimulationConfig(dt=dt, warmup_days=warmup_days, outputs=outputs)
    series = Simulation(model, config).run(collector_weather(params, days + warmup_days, dt))
    return series, collector_metrics(series, params)


# ---------------------------------------------------------------------------
# Trombe wall
# ---------------------------------------------------------------------------

TROMBE_WALL = "trombe"
TROMBE_GLASS = "trombe_glass"
HOLES = ("hole_low", "hole_high")


class HoleSchedule(str, Enum):
    OPEN = "open"
    CLOSED = "closed"
    NIGHT_CLOSED = "night-closed"

    def fractions(self) -> tuple[float, ...]:
        if self is HoleSchedule.OPEN:
            return (1.0,) * 24
        if self is HoleSchedule.CLOSED:
            return (0.0,) * 24
        # closed from 21 h to 6 h; the loop keeps running two hours past sunset
        return tuple(1.0 if 7 <= h <= 20 else 0.0 for h in range(24))


@dataclass(frozen=True)
class Location:
    latitude: float = -18.9  # Antananarivo
    start_day: int = 182  # 1 July


def _lighting() -> tuple[float, ...]:
    return tuple(100.0 if h in (6, 18, 19, 20, 21) else 0.0 for h in range(24))


@dataclass(frozen=True)
class TrombeParams:
    room_floor_area: float = 9.0  # m2
    room_height: float = 2.4  # m
    system_area: float = 2.0  # m2
    system_height: float = 2.0  # m
    wall_thickness: float = 0.12  # m
    wall_material: str = "concrete"
    wall_nodes: int = 10
    wall_alpha: float = 0.9  # dark absorber paint
    hole_area: float = 0.01  # m2 each
    hole_cd: float = 0.6
    hole_heights: tuple[float, float] = (0.1, 1.9)  # m
    gap_width: float = 0.1  # m
    ach: float = 1.0  # 1/h
    occupants: int = 2
    occupant_sensible: float = 70.0  # W per person
    occupant_vapor: float = 50.0 / 3.6e6  # kg/s per person (50 g/h)
    lighting: tuple[float, ...] = field(default_factory=_lighting)  # W
    gap_h_c: float = 2.9  # W/(m2.K)
    glazing_u: float = 5.8
    glazing_tau0: float = 0.85
    glazing_emissivity: float = 0.9
    hole_schedule: HoleSchedule = HoleSchedule.OPEN

    def __post_init__(self):
        for name in ("room_floor_area", "room_height", "system_area", "system_height", "wall_thickness",
                     "gap_width", "hole_cd", "glazing_u"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if self.hole_area < 0 or self.ach < 0:
            raise ValueError("hole_area and ach must be >= 0")

    @property
    def room_volume(self) -> float:
        return self.room_floor_area * self.room_height


def build_trombe(params: TrombeParams = TrombeParams(), location: Location = Location()) -> BuildingModel:
    """Room with a glazed massive wall on its north facade, recycling holes
    at the top and bottom of the wall.

    The room is exhausted at ``ach`` volumes per hour through a fan, made up
    by a vent on the south facade.
    """
    side = math.sqrt(params.room_floor_area)
    h = params.room_height
    volume = params.room_volume
    gains = tuple(params.occupants * params.occupant_sensible + params.lighting[k] for k in range(24))
    room = Zone("room", volume=volume, internal_gain_schedule=gains,
                vapor_gain_schedule=(params.occupants * params.occupant_vapor,) * 24,
                mech_extract_flow=params.ach * volume * RHO_AS / 3600.0)
    gap = Zone("gap", volume=params.system_area * params.gap_width)

    brick = WallConstruction((Layer(MATERIALS["brick"], 0.15),), nodes_per_layer=2)
    roof = WallConstruction((Layer(MATERIALS["wood"], 0.015), Layer(MATERIALS["polystyrene"], 0.03),
                             Layer(MATERIALS["metal_sheet"], 0.0005)))
    slab = WallConstruction((Layer(MATERIALS["concrete"], 0.10),), nodes_per_layer=2)
    mass = WallConstruction((Layer(MATERIALS[params.wall_material], params.wall_thickness),),
                            nodes_per_layer=params.wall_nodes)

    facade = side * h
    walls = [
        Wall("north", brick, facade - params.system_area, "room", EXTERIOR, 90.0, 0.0, 0.3, 0.5),
        Wall("east", brick, facade, "room", EXTERIOR, 90.0, 90.0, 0.3, 0.5),
        Wall("south", brick, facade, "room", EXTERIOR, 90.0, 180.0, 0.3, 0.5),
        Wall("west", brick, facade, "room", EXTERIOR, 90.0, 270.0, 0.3, 0.5),
        Wall("roof", roof, params.room_floor_area, "room", EXTERIOR, 0.0, 0.0, 0.3, 0.6),
        Wall("floor", slab, params.room_floor_area, "room", EXTERIOR, 180.0, 0.0, 0.5, 0.0),
        Wall(TROMBE_WALL, mass, params.system_area, "room", "gap", 90.0, 0.0,
             sw_absorptivity_in=0.5, sw_absorptivity_out=params.wall_alpha, h_ce=params.gap_h_c),
    ]
    glass = Glazing(TROMBE_GLASS, params.system_area, params.glazing_tau0, params.glazing_u, "gap",
                    tilt=90.0, azimuth=0.0, emissivity_out=params.glazing_emissivity)
    schedule = params.hole_schedule.fractions()
    low, high = params.hole_heights
    links = (
        AirLink(HOLES[0], LinkKind.OPENING, params.hole_cd, 0.5, params.hole_area, low, "gap", "room", schedule),
        AirLink(HOLES[1], LinkKind.OPENING, params.hole_cd, 0.5, params.hole_area, high, "gap", "room", schedule),
        AirLink("vent", LinkKind.OPENING, 0.6, 0.5, 0.01, 1.2, EXTERIOR, "room", facade_azimuth=180.0),
    )
    return BuildingModel(
        zones=(room, gap), walls=tuple(walls), glazings=(glass,), links=links, albedo=0.3,
        sw_distribution=SwDistribution(SwMode.TARGET_SURFACE, TROMBE_WALL),
        latitude=location.latitude, start_day=location.start_day,
    )


FACADE_DAILY_TARGET = 3000.0  # Wh/m2 per day on the north facade, albedo 0.3


def _clear_sky_shape(latitude: float, day: int, hour: float) -> tuple[float, float]:
    zenith, _ = sun_position(latitude, day, hour)
    cos_z = math.cos(math.radians(zenith))
    if cos_z <= 0:
        return 0.0, 0.0
    g = cos_z ** 1.2
    return 0.8 * g, 0.2 * g


def antananarivo_july(days: int = 7, location: Location = Location(), dt: float = 3600.0
                      ) -> list[WeatherRecord]:
    """Synthetic clear July week: outdoor air 10-20 degC (max at 14 h), clear
    sky scaled so the north facade receives 3 kWh/m2 on the first day."""
    n = int(round(days * 86400.0 / dt))
    step_h = dt / 3600.0

    def facade_total(scale: float) -> float:
        total = 0.0
        for k in range(int(round(24 / step_h))):
            hour = k * step_h
            bh, dh = (scale * v for v in _clear_sky_shape(location.latitude, location.start_day, hour))
            rec = WeatherRecord(hour, 15.0, 0.0, 0.0, bh, dh, 0.7)
            sun = sun_position(location.latitude, location.start_day, hour)
            total += sum(incident_irradiance(rec, 90.0, 0.0, 0.3, sun)) * step_h
        return total

    scale = FACADE_DAILY_TARGET / facade_total(1.0)
    records = []
    for k in range(n):
        t = k * step_h
        day = location.start_day + int(t // 24)
        bh, dh = (scale * v for v in _clear_sky_shape(location.latitude, day, t % 24.0))
        t_ae = 15.0 + 5.0 * math.cos(2.0 * math.pi * ((t % 24.0) - 14.0) / 24.0)
        records.append(WeatherRecord(t, t_ae, 2.0, 120.0, bh, dh, 0.7))
    return records


def shipped_weather_path():
    return resources.files("zonesim") / "data" / "antananarivo_july.csv"


@dataclass
class TrombeRun:
    model: BuildingModel
    series: OutputSeries

    @property
    def global_flux(self) -> np.ndarray:
        return trombe_global_flux(self.series, TROMBE_WALL, HOLES)

    @property
    def conductive(self) -> np.ndarray:
        return self.series[f"flux:{TROMBE_WALL}:in"]

    @property
    def aeraulic(self) -> np.ndarray:
        return sum(self.series[f"P_link:{h}"] for h in HOLES)

    def delivered_energy(self, dt: float = 3600.0) -> float:
        """Energy delivered to the room over the series, Wh."""
        return float(self.global_flux.sum() * dt / 3600.0)

    @property
    def efficiency(self) -> float | None:
        return trombe_efficiency(self.series, self.model)

    def phase_lag(self, steps_per_day: int = 24) -> int:
        """Lag, in steps, at which the conductive input best matches the
        aeraulic one shifted forward (circular cross-correlation of the mean
        daily profiles)."""
        return daily_phase_lag(self.aeraulic, self.conductive, steps_per_day)


def daily_phase_lag(lead: np.ndarray, follow: np.ndarray, steps_per_day: int = 24) -> int:
    """Shift k maximizing sum_t lead[t] * follow[t + k] over the mean day."""
    if len(lead) != len(follow) or len(lead) % steps_per_day:
        raise ValueError("series must have equal length in whole days")
    a = lead.reshape(-1, steps_per_day).mean(axis=0)
    b = follow.reshape(-1, steps_per_day).mean(axis=0)
    a, b = a - a.mean(), b - b.mean()
    xc = [float(np.dot(a, np.roll(b, -k))) for k in range(steps_per_day)]
    return int(np.argmax(xc))


TROMBE_OUTPUTS = ("time_h", "T_ae", "T_air:room", "T_air:gap", f"T_surf:{TROMBE_WALL}:in",
                  f"T_surf:{TROMBE_WALL}:out", f"flux:{TROMBE_WALL}:in", f"flow:{HOLES[0]}",
                  f"flow:{HOLES[1]}", f"P_link:{HOLES[0]}", f"P_link:{HOLES[1]}", f"I_inc:{TROMBE_GLASS}",
                  "r:room", "rm_residual:room", "rm_residual:gap")


def run_trombe(params: TrombeParams = TrombeParams(), *, days: int = 7, warmup_days: int = 5,
               dt: float = 3600.0, sky: SkyModel = SkyModel(), location: Location = Location(),
               outputs: tuple[str, ...] = TROMBE_OUTPUTS) -> TrombeRun:
    """Simulate ``days`` starting on ``location.start_day`` after a warmup on
    the preceding days of the same synthetic climate."""
    early = replace(location, start_day=location.start_day - warmup_days)
    model = build_trombe(params, early)
    weather = antananarivo_july(days + warmup_days, early, dt)
    config = SimulationConfig(dt=dt, warmup_days=warmup_days, outputs=outputs, sky=sky)
    series = Simulation(model, config).run(weather)
    return TrombeRun(model, series)


def trombe_efficiency(series: OutputSeries, model: BuildingModel, dt: float = 3600.0) -> float | None:
    """Energy delivered to the room over solar energy incident on the system
    facade; None when no sun reached the facade."""
    glass = next(g for g in model.glazings if g.id == TROMBE_GLASS)
    received = float(series[f"I_inc:{TROMBE_GLASS}"].sum() * glass.area * dt)
    if received <= 0:
        return None
    delivered = float(trombe_global_flux(series, TROMBE_WALL, HOLES).sum() * dt)
    return delivered / received
