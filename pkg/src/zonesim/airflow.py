"""Interzonal airflow: crack/opening elements and the zone pressure system.

Zone reference pressures are gauge pressures extrapolated to the exterior
datum height 0 with the zone's own air density; the exterior is node 0 with
reference pressure 0.  Each zone's unknown pressure is found so that the
link mass flows into it balance the flows out of it plus its mechanical
extract.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .model import EXTERIOR, AirLink, BuildingModel, LinkKind
from .weather import WeatherRecord

G = 9.81

OMEGA = 0.75
MASS_TOL = 1e-8  # kg/s
PRESSURE_TOL = 1e-9  # Pa, size of the last full Newton step
MAX_ITER = 200
FD_STEP = 1e-4  # Pa
# central step used when the forward-difference direction does not descend;
# large openings near zero flow make the coarse step too inaccurate
FD_STEP_FINE = 1e-6  # Pa
# below this drop the power law is replaced by an odd cubic matching its
# value and slope, so the residual stays smooth where a link carries no flow
DP_SMOOTH = 1e-3  # Pa


class AirflowConvergenceError(RuntimeError):
    def __init__(self, message: str, residual_norm: float):
        super().__init__(f"{message} (last residual norm {residual_norm:.3e} kg/s)")
        self.residual_norm = residual_norm


def air_density(t: float) -> float:
    """Dry air density at 101325 Pa, kg/m3."""
    return 353.05 / (t + 273.15)


@dataclass
class FlowMatrix:
    """``m_dot[i, j]`` is the mass flow from node i to node j, node 0 outdoors.

    ``link_flows`` holds the signed flow of every link (positive from ``from``
    to ``to``).
    """

    m_dot: np.ndarray
    link_flows: dict[str, float] = field(default_factory=dict)

    @classmethod
    def zeros(cls, n_zones: int) -> FlowMatrix:
        return cls(np.zeros((n_zones + 1, n_zones + 1)))

    @property
    def n_zones(self) -> int:
        return self.m_dot.shape[0] - 1

    def inflow(self, k: int) -> float:
        return float(self.m_dot[:, k].sum())

    def outflow(self, k: int) -> float:
        return float(self.m_dot[k, :].sum())

    def blend(self, other: FlowMatrix, weight: float = 0.5) -> FlowMatrix:
        """``weight * self + (1 - weight) * other``."""
        flows = {k: weight * v + (1.0 - weight) * other.link_flows.get(k, 0.0)
                 for k, v in self.link_flows.items()}
        return FlowMatrix(weight * self.m_dot + (1.0 - weight) * other.m_dot, flows)


@dataclass
class PressureState:
    reference_pressure: np.ndarray  # Pa per zone
    residuals: np.ndarray  # kg/s per zone
    iterations: int = 0
    trace: list[tuple[int, float, float]] = field(default_factory=list)

    def write_trace(self, path: str | Path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["iteration", "residual_norm", "omega"])
            for it, norm, omega in self.trace:
                writer.writerow([it, f"{norm:.6e}", f"{omega:g}"])


def wind_pressure_coefficient(link: AirLink, wind_dir: float) -> float:
    if link.cp is not None:
        return link.cp
    if link.facade_azimuth is None:
        return 0.0
    angle = abs((wind_dir - link.facade_azimuth + 180.0) % 360.0 - 180.0)
    if angle <= 60.0:
        return 0.6
    if angle >= 120.0:
        return -0.3
    return -0.5


def link_height(model: BuildingModel, link: AirLink) -> float:
    """Absolute height of the link above the exterior datum."""
    owner = link.from_ if link.from_ != EXTERIOR else link.to
    base = model.zone(owner).reference_height if owner != EXTERIOR else 0.0
    return base + link.height


def link_dp(link: AirLink, p_from: float, p_to: float, t_from: float, t_to: float,
            wind: tuple[float, float] = (0.0, 0.0), z: float | None = None) -> float:
    """Pressure drop from the ``from`` side to the ``to`` side at the link, Pa.

    ``z`` is the absolute link height (defaults to ``link.height``).  Wind
    pressure is added on the exterior side only.
    """
    z = link.height if z is None else z
    dp = (p_from - air_density(t_from) * G * z) - (p_to - air_density(t_to) * G * z)
    speed, direction = wind
    if speed > 0 and (link.from_ == EXTERIOR or link.to == EXTERIOR):
        t_ext = t_from if link.from_ == EXTERIOR else t_to
        p_wind = wind_pressure_coefficient(link, direction) * 0.5 * air_density(t_ext) * speed ** 2
        dp += p_wind if link.from_ == EXTERIOR else -p_wind
    return dp


def link_flow(link: AirLink, dp: float, rho_upwind: float, opening_fraction: float = 1.0) -> float:
    """Signed mass flow through the link for pressure drop ``dp``, kg/s."""
    if dp == 0.0:
        return 0.0
    area = link.aperture * opening_fraction
    n = 0.5 if link.kind is LinkKind.OPENING else link.exponent
    mag_dp = max(abs(dp), DP_SMOOTH)
    if link.kind is LinkKind.OPENING:
        mag = link.cd * area * math.sqrt(2.0 * rho_upwind * mag_dp)
    else:
        mag = link.cd * area * mag_dp ** n
    if abs(dp) < DP_SMOOTH:
        x = abs(dp) / DP_SMOOTH
        mag *= x * (0.5 * (3.0 - n) + 0.5 * (n - 1.0) * x * x)
    return math.copysign(mag, dp)


class _Network:
    """Pressure system of one model at one instant."""

    def __init__(self, model: BuildingModel, temps: Sequence[float], t_ext: float,
                 wind: tuple[float, float], hour: int):
        self.model = model
        self.n = len(model.zones)
        self.index = {z.id: k + 1 for k, z in enumerate(model.zones)}
        self.index[EXTERIOR] = 0
        self.temps = np.concatenate([[t_ext], np.asarray(temps, dtype=float)])
        self.rho = np.array([air_density(t) for t in self.temps])
        self.vmc = np.array([0.0] + [z.mech_extract_flow for z in model.zones])
        self.links = []
        for link in model.links:
            f = link.opening_schedule[hour]
            if link.aperture * f <= 0.0:
                continue
            self.links.append((link, self.index[link.from_], self.index[link.to], f,
                               link_height(model, link)))
        self.wind = wind

    def flows(self, p: np.ndarray) -> list[float]:
        out = []
        for link, i, j, f, z in self.links:
            dp = link_dp(link, p[i], p[j], self.temps[i], self.temps[j], self.wind, z)
            rho = self.rho[i] if dp >= 0 else self.rho[j]
            out.append(link_flow(link, dp, rho, f))
        return out

    def residuals(self, p: np.ndarray, flows: list[float] | None = None) -> np.ndarray:
        if flows is None:
            flows = self.flows(p)
        r = np.zeros(self.n + 1)
        for (link, i, j, f, z), m in zip(self.links, flows):
            r[j] += m
            r[i] -= m
        r -= self.vmc
        return r[1:]


def _jacobian(res, p: np.ndarray, r: np.ndarray, unknown: np.ndarray, central: bool) -> np.ndarray:
    jac = np.empty((len(unknown), len(unknown)))
    for c, k in enumerate(unknown):
        hi = p.copy()
        if central:
            lo = p.copy()
            hi[k] += FD_STEP_FINE
            lo[k] -= FD_STEP_FINE
            jac[:, c] = (res(hi) - res(lo)) / (2.0 * FD_STEP_FINE)
        else:
            hi[k] += FD_STEP
            jac[:, c] = (res(hi) - r) / FD_STEP
    return jac


def _newton(res, p: np.ndarray, unknown: np.ndarray, omega: float, tol: float, max_iter: int,
            trace: list[tuple[int, float, float]]) -> tuple[np.ndarray, int]:
    r = res(p)
    norm = float(np.linalg.norm(r))
    trace.append((0, norm, omega))
    for iterations in range(1, max_iter + 1):
        accepted = fallback = None
        # forward differences first; when that direction needs damping
        # beyond omega, also try the fine central Jacobian and keep the best
        for central in (False, True):
            jac = _jacobian(res, p, r, unknown, central)
            try:
                step = np.linalg.solve(jac, r)
            except np.linalg.LinAlgError:
                step = np.linalg.lstsq(jac, r, rcond=None)[0]
            w = omega
            for _ in range(40):
                trial = p.copy()
                trial[unknown] -= w * step
                r_trial = res(trial)
                norm_trial = float(np.linalg.norm(r_trial))
                candidate = trial, r_trial, norm_trial, w, step
                if norm_trial <= (1.0 - 0.1 * w) * norm:
                    if accepted is None or norm_trial < accepted[2]:
                        accepted = candidate
                    break
                if norm_trial < norm and (fallback is None or norm_trial < fallback[2]):
                    fallback = candidate
                w *= 0.5
            if accepted and accepted[3] == omega:
                break
        accepted = accepted or fallback
        if accepted is None:
            if np.max(np.abs(r)) < tol:
                return p, iterations  # already at round-off level
            raise AirflowConvergenceError("no residual decrease along the Newton direction", norm)
        p, r, norm, w, step = accepted
        trace.append((iterations, norm, w))
        if np.max(np.abs(r)) < tol and np.max(np.abs(step)) < PRESSURE_TOL:
            return p, iterations
    if np.max(np.abs(r)) >= tol:
        raise AirflowConvergenceError(f"pressure system not converged after {max_iter} iterations", norm)
    return p, max_iter


def solve_pressures(model: BuildingModel, temps: Sequence[float] | Mapping[str, float],
                    weather: WeatherRecord, hour: int | None = None, *,
                    p0: Sequence[float] | None = None, omega: float = OMEGA,
                    tol: float = MASS_TOL, max_iter: int = MAX_ITER) -> tuple[PressureState, FlowMatrix]:
    """Solve the zone pressure system by under-relaxed Newton-Raphson.

    The Jacobian is built by forward differences.  Zones touched by no open
    link are pinned at 0 Pa; if they have mechanical extract, the extracted
    air is taken to be supplied from outdoors.  A group of zones linked to
    each other but not to outdoors gets its first zone pinned as datum.
    """
    if isinstance(temps, Mapping):
        temps = [temps[z.id] for z in model.zones]
    if len(temps) != len(model.zones):
        raise ValueError(f"expected {len(model.zones)} zone temperatures, got {len(temps)}")
    if hour is None:
        hour = weather.hour_of_day
    net = _Network(model, temps, weather.t_ae, (weather.wind_speed, weather.wind_dir), hour)
    n = net.n

    # union-find over zones joined by open links; 0 is outdoors
    parent = list(range(n + 1))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    touched = np.zeros(n + 1, dtype=bool)
    for _, i, j, _, _ in net.links:
        touched[i] = touched[j] = True
        parent[find(i)] = find(j)
    unknown = []
    pinned_roots: set[int] = set()
    mech_only = []
    for k in range(1, n + 1):
        if not touched[k]:
            mech_only.append(k)
            continue
        root = find(k)
        if root != find(0) and root not in pinned_roots:
            pinned_roots.add(root)
            members = [m for m in range(1, n + 1) if find(m) == root]
            if abs(net.vmc[members].sum()) > tol:
                raise AirflowConvergenceError(
                    f"zones {[model.zones[m - 1].id for m in members]} extract air but have no path "
                    "to outdoors", float(net.vmc[members].sum()))
            continue  # first member of a sealed group is the datum
        unknown.append(k)
    unknown = np.array(unknown, dtype=int)

    def res(p_full: np.ndarray) -> np.ndarray:
        return net.residuals(p_full)[unknown - 1]

    p = np.zeros(n + 1)
    trace: list[tuple[int, float, float]] = []
    iterations = 0
    if len(unknown):
        starts = [np.zeros(n + 1)]
        if p0 is not None:
            warm = np.zeros(n + 1)
            warm[unknown] = np.asarray(p0, dtype=float)[unknown - 1]
            starts.insert(0, warm)
        for attempt, start in enumerate(starts):
            try:
                p, iterations = _newton(res, start, unknown, omega, tol, max_iter, trace)
                break
            except AirflowConvergenceError:
                if attempt == len(starts) - 1:
                    raise
                trace.clear()  # warm start sat on a kink; retry cold

    flows = net.flows(p)
    m = np.zeros((n + 1, n + 1))
    link_flows = {lk.id: 0.0 for lk in model.links}
    for (link, i, j, f, z), q in zip(net.links, flows):
        link_flows[link.id] = q
        if q >= 0:
            m[i, j] += q
        else:
            m[j, i] -= q
    for k in range(1, n + 1):
        if net.vmc[k] > 0:
            m[k, 0] += net.vmc[k]
            if k in mech_only:
                m[0, k] += net.vmc[k]
    residuals = net.residuals(p, flows)
    residuals[[k - 1 for k in mech_only]] = 0.0
    state = PressureState(p[1:].copy(), residuals, iterations, trace)
    return state, FlowMatrix(m, link_flows)
