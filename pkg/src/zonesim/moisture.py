"""Zone specific-humidity balance driven by the converged airflow matrix."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .airflow import FlowMatrix, air_density
from .model import BuildingModel

log = logging.getLogger(__name__)

P_ATM = 101325.0


def saturation_pressure(t: float) -> float:
    """Magnus formula over water, Pa."""
    return 610.94 * math.exp(17.625 * t / (t + 243.04))


def specific_humidity(t: float, rh: float, p: float = P_ATM) -> float:
    """Humidity ratio kg_water/kg_dry_air from temperature and relative humidity."""
    pv = rh * saturation_pressure(t)
    return 0.622 * pv / (p - pv)


@dataclass
class MoistureState:
    r: np.ndarray  # kg/kg per zone
    r_out: float

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=float)


@dataclass
class MoistureSystem:
    C_h: np.ndarray  # kg of air per zone (diagonal)
    A_h: np.ndarray  # kg/s
    B_h: np.ndarray  # kg/s of water


def assemble_moisture(model: BuildingModel, flows: FlowMatrix, gains: Sequence[float], r_out: float,
                      temps: Sequence[float] | None = None) -> MoistureSystem:
    """Build C_h dr/dt = A_h r + B_h.

    Zone air mass uses the zone temperature when ``temps`` is given, the
    reference density otherwise.  Off-diagonals carry the incoming
    interzonal flows; each diagonal is minus the total outgoing flow (to
    zones, outdoors and mechanical extract), which keeps a closed building's
    water mass exactly constant.
    """
    n = len(model.zones)
    if flows.m_dot.shape != (n + 1, n + 1):
        raise ValueError(f"flow matrix is {flows.m_dot.shape}, expected {(n + 1,) * 2}")
    if len(gains) != n:
        raise ValueError(f"expected {n} vapor gains, got {len(gains)}")
    m = flows.m_dot
    C = np.empty(n)
    for k, z in enumerate(model.zones):
        rho = air_density(temps[k]) if temps is not None else 1.2
        C[k] = rho * z.volume
    A = np.zeros((n, n))
    B = np.asarray(gains, dtype=float).copy()
    for k in range(n):
        for i in range(n):
            if i != k:
                A[k, i] = m[i + 1, k + 1]
        A[k, k] = -(m[k + 1, :].sum() - m[k + 1, k + 1])
        B[k] += m[0, k + 1] * r_out
    return MoistureSystem(C, A, B)


def step_moisture(system: MoistureSystem, state: MoistureState, dt: float) -> MoistureState:
    if dt <= 0:
        raise ValueError("dt must be > 0")
    if np.any(system.C_h <= 0):
        raise ValueError("zero air mass in moisture system")
    c_dt = system.C_h / dt
    r = np.linalg.solve(np.diag(c_dt) - system.A_h, c_dt * state.r + system.B_h)
    if np.any(r < 0):
        log.warning("negative specific humidity clamped to 0 in zone(s) %s", np.flatnonzero(r < 0).tolist())
        r = np.maximum(r, 0.0)
    return MoistureState(r, state.r_out)
