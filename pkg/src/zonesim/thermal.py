"""Nodal thermal network of a whole building.

The network has one node per wall slice, two massless surface nodes per wall,
and per zone an air node and a massless mean radiant node.  All zones are
solved together as

    C dT/dt = A T + B

with C diagonal (zero on algebraic rows), A the conductance matrix and B the
sources and boundary terms.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .airflow import FlowMatrix
from .model import C_AS, EXTERIOR, BuildingModel, Wall, WallChain, discretize_wall
from .weather import SkyModel, WeatherRecord, sky_temperature

# glazing exterior film split: convective vs radiative (scaled by emissivity)
_GLAZING_HC = 15.0
_GLAZING_HR = 5.0

# faces tilted at least this much look at the ground, not the sky
_GROUND_TILT = 180.0


class SingularNetworkError(RuntimeError):
    pass


@dataclass
class WallNodes:
    chain: WallChain
    nodes: np.ndarray  # registry indices, inside surface first
    area: float

    @property
    def inside(self) -> int:
        return int(self.nodes[0])

    @property
    def outside(self) -> int:
        return int(self.nodes[-1])


@dataclass
class NodeRegistry:
    names: list[str]
    walls: dict[str, WallNodes]
    air: dict[str, int]
    radiant: dict[str, int]
    index: dict[str, int] = field(init=False)

    def __post_init__(self):
        self.index = {name: k for k, name in enumerate(self.names)}

    def __len__(self) -> int:
        return len(self.names)

    def surface(self, face_id: str) -> int:
        wall_id, side = face_id.rsplit(":", 1)
        w = self.walls[wall_id]
        return w.inside if side == "in" else w.outside


@dataclass
class ThermalState:
    registry: NodeRegistry
    temperatures: np.ndarray
    time: float = 0.0  # h

    def __post_init__(self):
        self.temperatures = np.asarray(self.temperatures, dtype=float)
        if len(self.temperatures) != len(self.registry):
            raise ValueError("state length does not match node registry")
        if not np.all(np.isfinite(self.temperatures)):
            raise ValueError("non-finite temperature in state")

    def air(self, zone_id: str) -> float:
        return float(self.temperatures[self.registry.air[zone_id]])

    def node(self, name: str) -> float:
        return float(self.temperatures[self.registry.index[name]])


@dataclass
class NodalSystem:
    C: np.ndarray  # diagonal, J/K
    A: np.ndarray  # W/K
    B: np.ndarray  # W


def glazing_sky_fraction(emissivity: float) -> float:
    h_r = emissivity * _GLAZING_HR
    return h_r / (_GLAZING_HC + h_r)


class ThermalNetwork:
    """Static structure of a building's nodal model.

    Building this once and calling :meth:`assemble` per step avoids redoing
    the wall discretization on every coupling iteration.
    """

    def __init__(self, model: BuildingModel):
        self.model = model
        names: list[str] = []
        walls: dict[str, WallNodes] = {}
        for w in model.walls:
            chain = discretize_wall(w.construction)
            start = len(names)
            names.append(f"{w.id}:in")
            names.extend(f"{w.id}:n{k}" for k in range(1, chain.n_nodes - 1))
            names.append(f"{w.id}:out")
            walls[w.id] = WallNodes(chain, np.arange(start, start + chain.n_nodes), w.area)
        air, radiant = {}, {}
        for z in model.zones:
            air[z.id] = len(names)
            names.append(f"{z.id}:air")
            radiant[z.id] = len(names)
            names.append(f"{z.id}:rm")
        self.registry = NodeRegistry(names, walls, air, radiant)
        self.zone_index = {z.id: k + 1 for k, z in enumerate(model.zones)}

        n = len(names)
        self.C = np.zeros(n)
        self.A_static = np.zeros((n, n))
        # (node, conductance W/K, "ae" | "sky")
        self.boundary: list[tuple[int, float, str]] = []
        # radiant node couplings (surface node, h_r.A) per zone, for the residual check
        self.radiant_links: dict[str, list[tuple[int, float]]] = {z.id: [] for z in model.zones}

        for w in model.walls:
            self._add_wall(w, walls[w.id])
        for z in model.zones:
            self.C[air[z.id]] = z.capacitance
            if not self.radiant_links[z.id]:
                # no radiative exchange in this zone: tie the node to the air
                self._couple(radiant[z.id], air[z.id], 1.0)
        for g in model.glazings:
            ua = g.u_value * g.area
            a = air[g.side_in]
            if g.side_out == EXTERIOR:
                f = glazing_sky_fraction(g.emissivity_out)
                self.boundary.append((a, ua * (1.0 - f), "ae"))
                self.boundary.append((a, ua * f, "sky"))
            else:
                self._couple(a, air[g.side_out], ua)
        for node, g, _ in self.boundary:
            self.A_static[node, node] -= g

    def _couple(self, a: int, b: int, g: float) -> None:
        self.A_static[a, a] -= g
        self.A_static[b, b] -= g
        self.A_static[a, b] += g
        self.A_static[b, a] += g

    def _add_wall(self, w: Wall, wn: WallNodes) -> None:
        reg = self.registry
        self.C[wn.nodes] = wn.chain.capacitance * w.area
        for k, g in enumerate(wn.chain.conductance):
            self._couple(int(wn.nodes[k]), int(wn.nodes[k + 1]), g * w.area)
        for node, zone, h_c, h_r in ((wn.inside, w.side_in, w.h_ci, w.h_ri),
                                     (wn.outside, w.side_out, w.h_ce, w.h_re)):
            if zone == EXTERIOR:
                if h_c > 0:
                    self.boundary.append((node, h_c * w.area, "ae"))
                if h_r > 0:
                    kind = "ae" if w.tilt >= _GROUND_TILT else "sky"
                    self.boundary.append((node, h_r * w.area, kind))
                continue
            if h_c > 0:
                self._couple(node, reg.air[zone], h_c * w.area)
            if h_r > 0:
                self._couple(node, reg.radiant[zone], h_r * w.area)
                self.radiant_links[zone].append((node, h_r * w.area))

    def isothermal_state(self, t: float, time: float = 0.0) -> ThermalState:
        return ThermalState(self.registry, np.full(len(self.registry), float(t)), time)

    def boundary_temperature(self, kind: str, weather: WeatherRecord, sky: SkyModel) -> float:
        return weather.t_ae if kind == "ae" else sky_temperature(weather.t_ae, sky)

    def assemble(self, flows: FlowMatrix, weather: WeatherRecord,
                 sw: Mapping[str, float] | None = None, sky: SkyModel = SkyModel()) -> NodalSystem:
        n_zones = len(self.model.zones)
        if flows.m_dot.shape != (n_zones + 1, n_zones + 1):
            raise ValueError(f"flow matrix is {flows.m_dot.shape}, expected {(n_zones + 1,) * 2}")
        A = self.A_static.copy()
        B = np.zeros(len(self.registry))
        for node, g, kind in self.boundary:
            B[node] += g * self.boundary_temperature(kind, weather, sky)
        hour = weather.hour_of_day
        air = self.registry.air
        zone_nodes = [None] + [air[z.id] for z in self.model.zones]
        for k, z in enumerate(self.model.zones, start=1):
            a = air[z.id]
            B[a] += z.internal_gain_schedule[hour]
            for i in range(n_zones + 1):
                m = flows.m_dot[i, k]
                if i == k or m <= 0.0:
                    continue
                g = C_AS * m
                A[a, a] -= g
                if i == 0:
                    B[a] += g * weather.t_ae
                else:
                    A[a, zone_nodes[i]] += g
        for face_id, q in (sw or {}).items():
            B[self.registry.surface(face_id)] += q
        return NodalSystem(self.C.copy(), A, B)

    # -- diagnostics -------------------------------------------------------

    def radiant_residual(self, state: ThermalState, zone_id: str) -> float:
        """sum_j h_r.A_j (T_s(j) - T_rm) for the zone, W."""
        t = state.temperatures
        t_rm = t[self.registry.radiant[zone_id]]
        return float(sum(g * (t[node] - t_rm) for node, g in self.radiant_links[zone_id]))

    def exterior_loss(self, state: ThermalState, flows: FlowMatrix, weather: WeatherRecord,
                      sky: SkyModel = SkyModel()) -> float:
        """Heat leaving the building to outdoors, W: films, glazing and the
        enthalpy of exhausted air minus that of supplied air."""
        t = state.temperatures
        loss = sum(g * (t[node] - self.boundary_temperature(kind, weather, sky))
                   for node, g, kind in self.boundary)
        for k, z in enumerate(self.model.zones, start=1):
            t_k = t[self.registry.air[z.id]]
            loss += C_AS * (flows.m_dot[k, 0] * t_k - flows.m_dot[0, k] * weather.t_ae)
        return float(loss)


def assemble(model: BuildingModel, state: ThermalState, flows: FlowMatrix, weather: WeatherRecord,
             sw: Mapping[str, float] | None = None, sky: SkyModel = SkyModel()) -> NodalSystem:
    """One-shot assembly; prefer :class:`ThermalNetwork` inside loops."""
    net = ThermalNetwork(model)
    if len(state.temperatures) != len(net.registry):
        raise ValueError("state does not belong to this model")
    return net.assemble(flows, weather, sw, sky)


def step(system: NodalSystem, state: ThermalState, dt: float) -> ThermalState:
    """Implicit Euler: (C/dt - A) T_new = C/dt T_old + B."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    c_dt = system.C / dt
    M = np.diag(c_dt) - system.A
    rhs = c_dt * state.temperatures + system.B
    dead = np.flatnonzero(~M.any(axis=1))
    if dead.size:
        names = ", ".join(state.registry.names[k] for k in dead)
        raise SingularNetworkError(f"isolated node(s) with no coupling: {names}")
    try:
        t_new = np.linalg.solve(M, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularNetworkError(f"singular nodal system: {exc}") from exc
    if not np.all(np.isfinite(t_new)):
        raise SingularNetworkError("nodal solve produced non-finite temperatures")
    return ThermalState(state.registry, t_new, state.time + dt / 3600.0)


def wall_conductive_flux(state: ThermalState, wall: Wall | str, face: str = "in") -> float:
    """Conductive heat leaving the wall through ``face``, W.

    For the inside face this is the flux delivered towards ``side_in``; for
    the outside face, towards ``side_out``.
    """
    wall_id = wall if isinstance(wall, str) else wall.id
    wn = state.registry.walls[wall_id]
    t = state.temperatures
    if face == "in":
        g = wn.chain.conductance[0] * wn.area
        return float(g * (t[wn.nodes[1]] - t[wn.nodes[0]]))
    if face == "out":
        g = wn.chain.conductance[-1] * wn.area
        return float(g * (t[wn.nodes[-2]] - t[wn.nodes[-1]]))
    raise ValueError(f"face must be 'in' or 'out', got {face!r}")
