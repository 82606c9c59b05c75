"""Time loop coupling the thermal, airflow and moisture models.

Each step runs a successive-substitution loop: zone air temperatures give
airflows, airflows give a new thermal solution, until the zone air
temperatures stop moving.  Moisture is stepped afterwards with the final
flows.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .airflow import AirflowConvergenceError, FlowMatrix, solve_pressures
from .model import C_AS, EXTERIOR, BuildingModel, SwMode, zone_faces
from .moisture import MoistureState, assemble_moisture, specific_humidity, step_moisture
from .thermal import ThermalNetwork, ThermalState, step, wall_conductive_flux
from .weather import (AngularModel, SkyModel, WeatherRecord, distribute_shortwave, glazing_transmission,
                      incidence_cosine, incident_irradiance, sky_temperature, sun_position)

log = logging.getLogger(__name__)

UNITS = {
    "time_h": "h", "T_ae": "degC", "T_sky": "degC", "T_air": "degC", "T_rm": "degC",
    "T_surf": "degC", "r": "kg/kg", "flux": "W", "flow": "kg/s", "m": "kg/s", "P_link": "W",
    "I_inc": "W/m2", "rm_residual": "W", "coupling_iters": "-",
}


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SimulationConfig:
    dt: float = 3600.0  # s
    coupling_tolerance: float = 0.01  # K
    max_coupling_iters: int = 20
    warmup_days: int = 2
    outputs: tuple[str, ...] | None = None  # None: default selection
    sky: SkyModel = field(default_factory=SkyModel)
    transmission: AngularModel = AngularModel.CONSTANT
    flow_damping: bool = True

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be > 0")
        if self.coupling_tolerance <= 0:
            raise ValueError("coupling_tolerance must be > 0")
        if self.max_coupling_iters < 1:
            raise ValueError("max_coupling_iters must be >= 1")
        if self.warmup_days < 0:
            raise ValueError("warmup_days must be >= 0")


@dataclass
class EngineState:
    thermal: ThermalState
    moisture: MoistureState
    flows: FlowMatrix  # flows at the state's temperatures
    pressures: np.ndarray
    coupling_iters: int = 0
    converged: bool = True


@dataclass
class OutputSeries:
    columns: list[str]
    data: np.ndarray  # (steps, columns)

    def __len__(self) -> int:
        return self.data.shape[0]

    def __getitem__(self, name: str) -> np.ndarray:
        if name not in self.columns:
            raise KeyError(name)
        return self.data[:, self.columns.index(name)]

    def __contains__(self, name: str) -> bool:
        return name in self.columns

    def select(self, names: Sequence[str]) -> OutputSeries:
        missing = [n for n in names if n not in self.columns]
        if missing:
            raise KeyError(f"unknown output(s): {', '.join(missing)}")
        return OutputSeries(list(names), self.data[:, [self.columns.index(n) for n in names]])

    def header(self) -> list[str]:
        return [f"{name} [{UNITS[name.split(':', 1)[0]]}]" for name in self.columns]

    def to_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(self.header())
            for row in self.data:
                writer.writerow([format(float(v), ".10g") for v in row])


def link_sensible_power(flow: float, t_source: float, t_dest: float) -> float:
    """Sensible heat carried into the destination by ``flow`` kg/s, W."""
    return flow * C_AS * (t_source - t_dest)


class Simulation:
    def __init__(self, model: BuildingModel, config: SimulationConfig = SimulationConfig()):
        self.model = model
        self.config = config
        self.network = ThermalNetwork(model)
        self.registry = self.network.registry
        self.air_nodes = np.array([self.registry.air[z.id] for z in model.zones], dtype=int)
        self.has_links = any(link.aperture > 0 for link in model.links)
        self.faces = {z.id: zone_faces(model, z.id) for z in model.zones}
        self._columns = self._all_columns()

    # -- boundary conditions ---------------------------------------------

    def sun(self, rec: WeatherRecord) -> tuple[float, float]:
        if self.model.latitude is None:
            return 0.0, 0.0
        day = self.model.start_day + math.floor(rec.time / 24.0)
        return sun_position(self.model.latitude, day, rec.time % 24.0)

    def solar(self, rec: WeatherRecord) -> tuple[dict[str, float], dict[str, float]]:
        """Absorbed shortwave per face id (W) and incident irradiance per glazing (W/m2)."""
        model = self.model
        sun = self.sun(rec)
        sw: dict[str, float] = {}
        for w in model.walls:
            for side, zone, tilt, az, alpha in (("out", w.side_out, w.tilt, w.azimuth, w.sw_absorptivity_out),
                                                ("in", w.side_in, 180.0 - w.tilt, (w.azimuth + 180.0) % 360.0,
                                                 w.sw_absorptivity_in)):
                if zone == EXTERIOR and alpha > 0:
                    sw[f"{w.id}:{side}"] = alpha * sum(incident_irradiance(rec, tilt, az, model.albedo, sun)) * w.area
        incident: dict[str, float] = {}
        entering: dict[str, float] = {}
        for g in model.glazings:
            if g.side_out != EXTERIOR:
                continue
            beam, diffuse, reflected = incident_irradiance(rec, g.tilt, g.azimuth, model.albedo, sun)
            incident[g.id] = beam + diffuse + reflected
            cos_t = incidence_cosine(g.tilt, g.azimuth, sun)
            theta = math.degrees(math.acos(max(-1.0, min(1.0, cos_t))))
            q = glazing_transmission(beam, g.tau0, theta, self.config.transmission)
            q += g.tau0 * (diffuse + reflected)
            entering[g.side_in] = entering.get(g.side_in, 0.0) + q * g.area
        sw_mode = model.sw_distribution
        for zone_id, q in entering.items():
            if q <= 0:
                continue
            faces = self.faces[zone_id]
            target = None
            if sw_mode.mode is SwMode.TARGET_SURFACE and any(f.wall_id == sw_mode.target for f in faces):
                target = sw_mode.target
            for face_id, a in distribute_shortwave(faces, q, target).items():
                sw[face_id] = sw.get(face_id, 0.0) + a
        return sw, incident

    # -- stepping ---------------------------------------------------------

    def initial_state(self, rec: WeatherRecord) -> EngineState:
        n = len(self.model.zones)
        r0 = specific_humidity(rec.t_ae, rec.rh_out)
        thermal = self.network.isothermal_state(rec.t_ae, rec.time - self.config.dt / 3600.0)
        return EngineState(thermal, MoistureState(np.full(n, r0), r0), FlowMatrix.zeros(n), np.zeros(n))

    def _flows(self, temps: np.ndarray, rec: WeatherRecord, p0: np.ndarray):
        ps, flows = solve_pressures(self.model, temps, rec, p0=p0)
        return ps.reference_pressure, flows

    def couple_step(self, state: EngineState, rec: WeatherRecord) -> EngineState:
        cfg = self.config
        sw, _ = self.solar(rec)
        old = state.thermal
        temps = old.temperatures[self.air_nodes]
        pressures = state.pressures
        used: FlowMatrix | None = None
        converged = False
        for it in range(1, cfg.max_coupling_iters + 1):
            pressures, flows = self._flows(temps, rec, pressures)
            if used is not None and cfg.flow_damping and self.has_links:
                flows = flows.blend(used, 0.5)
            used = flows
            system = self.network.assemble(used, rec, sw, cfg.sky)
            new = step(system, old, cfg.dt)
            new_temps = new.temperatures[self.air_nodes]
            change = float(np.max(np.abs(new_temps - temps))) if len(temps) else 0.0
            temps = new_temps
            if not self.has_links or change < cfg.coupling_tolerance:
                converged = True
                break
        if not converged:
            log.warning("coupling not converged at t=%.2f h after %d iterations (last change %.3g K)",
                        rec.time, cfg.max_coupling_iters, change)
        new.time = rec.time
        pressures, final_flows = self._flows(temps, rec, pressures)

        gains = [z.vapor_gain_schedule[rec.hour_of_day] for z in self.model.zones]
        r_out = specific_humidity(rec.t_ae, rec.rh_out)
        msys = assemble_moisture(self.model, used, gains, r_out, temps)
        moisture = step_moisture(msys, MoistureState(state.moisture.r, r_out), cfg.dt)
        return EngineState(new, moisture, final_flows, pressures, it, converged)

    def energy_audit(self, state: EngineState, rec: WeatherRecord) -> tuple[float, float]:
        """(heat sources, heat lost to outdoors) in W for ``state`` under ``rec``.

        The two agree at a steady state; the difference is the storage rate.
        """
        sw, _ = self.solar(rec)
        sources = sum(z.internal_gain_schedule[rec.hour_of_day] for z in self.model.zones) + sum(sw.values())
        losses = self.network.exterior_loss(state.thermal, state.flows, rec, self.config.sky)
        return float(sources), losses

    # -- outputs ----------------------------------------------------------

    def _all_columns(self) -> list[str]:
        m = self.model
        nodes = [EXTERIOR] + m.zone_ids
        cols = ["time_h", "T_ae", "T_sky"]
        cols += [f"T_air:{z}" for z in m.zone_ids]
        cols += [f"T_rm:{z}" for z in m.zone_ids]
        cols += [f"r:{z}" for z in m.zone_ids]
        for w in m.walls:
            cols += [f"T_surf:{w.id}:in", f"T_surf:{w.id}:out", f"flux:{w.id}:in", f"flux:{w.id}:out"]
        cols += [f"flow:{lk.id}" for lk in m.links]
        cols += [f"P_link:{lk.id}" for lk in m.links]
        cols += [f"m:{a}->{b}" for a in nodes for b in nodes if a != b]
        cols += [f"I_inc:{g.id}" for g in m.glazings if g.side_out == EXTERIOR]
        cols += [f"rm_residual:{z}" for z in m.zone_ids]
        cols.append("coupling_iters")
        return cols

    def default_outputs(self) -> list[str]:
        m = self.model
        return (["time_h", "T_ae"] + [f"T_air:{z}" for z in m.zone_ids] + [f"flow:{lk.id}" for lk in m.links]
                + [f"P_link:{lk.id}" for lk in m.links] + [f"r:{z}" for z in m.zone_ids])

    def record(self, state: EngineState, rec: WeatherRecord) -> list[float]:
        m = self.model
        th = state.thermal
        t = th.temperatures
        reg = self.registry
        temp_of = {EXTERIOR: rec.t_ae} | {z.id: th.air(z.id) for z in m.zones}
        row = [rec.time, rec.t_ae, sky_temperature(rec.t_ae, self.config.sky)]
        row += [t[reg.air[z]] for z in m.zone_ids]
        row += [t[reg.radiant[z]] for z in m.zone_ids]
        row += list(state.moisture.r)
        for w in m.walls:
            wn = reg.walls[w.id]
            row += [t[wn.inside], t[wn.outside], wall_conductive_flux(th, w.id, "in"),
                    wall_conductive_flux(th, w.id, "out")]
        flows = state.flows.link_flows
        row += [flows.get(lk.id, 0.0) for lk in m.links]
        for lk in m.links:
            q = flows.get(lk.id, 0.0)
            row.append(link_sensible_power(q, temp_of[lk.from_], temp_of[lk.to]) if q > 0 else 0.0)
        n = len(m.zones)
        row += [state.flows.m_dot[i, j] for i in range(n + 1) for j in range(n + 1) if i != j]
        _, incident = self.solar(rec)
        row += [incident[g.id] for g in m.glazings if g.side_out == EXTERIOR]
        row += [self.network.radiant_residual(th, z) for z in m.zone_ids]
        row.append(state.coupling_iters)
        return row

    def run(self, weather: Sequence[WeatherRecord]) -> OutputSeries:
        cfg = self.config
        warmup = int(round(cfg.warmup_days * 86400.0 / cfg.dt))
        if len(weather) <= warmup:
            raise SimulationError(f"weather has {len(weather)} steps, warmup alone needs {warmup}")
        outputs = list(cfg.outputs) if cfg.outputs else self.default_outputs()
        unknown = [o for o in outputs if o not in self._columns]
        if unknown:
            raise KeyError(f"unknown output(s): {', '.join(unknown)}")
        state = self.initial_state(weather[0])
        rows = []
        for k, rec in enumerate(weather):
            try:
                state = self.couple_step(state, rec)
            except (AirflowConvergenceError, RuntimeError, ValueError) as exc:
                raise SimulationError(f"step at t={rec.time:g} h failed: {exc}") from exc
            if k >= warmup:
                rows.append(self.record(state, rec))
        series = OutputSeries(self._columns, np.array(rows, dtype=float))
        return series.select(outputs)


def couple_step(model: BuildingModel, state: EngineState, weather_rec: WeatherRecord,
                config: SimulationConfig = SimulationConfig()) -> EngineState:
    return Simulation(model, config).couple_step(state, weather_rec)


def simulate(model: BuildingModel, weather: Sequence[WeatherRecord],
             config: SimulationConfig = SimulationConfig()) -> OutputSeries:
    return Simulation(model, config).run(weather)


def trombe_global_flux(series: OutputSeries, wall: str, holes: Iterable[str]) -> np.ndarray:
    """Room-side conduction through ``wall`` plus sensible power of ``holes``.

    Hole links must be oriented towards the room (``to`` = room) so that
    their ``P_link`` column is the power delivered to it.
    """
    total = series[f"flux:{wall}:in"].copy()
    for h in holes:
        total += series[f"P_link:{h}"]
    return total
