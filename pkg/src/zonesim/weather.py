"""Weather records, sky temperature, solar geometry and shortwave optics."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .model import Face

WEATHER_COLUMNS = ("time_h", "t_ae_c", "wind_ms", "wind_dir_deg", "i_bh_wm2", "i_dh_wm2", "rh_out")

# below this solar elevation the beam ratio cos(theta)/cos(z) is capped
_MIN_COS_ZENITH = 0.05


@dataclass(frozen=True)
class WeatherRecord:
    time: float  # h since simulation start
    t_ae: float  # degC
    wind_speed: float = 0.0  # m/s
    wind_dir: float = 0.0  # deg, direction the wind blows from
    i_bh: float = 0.0  # W/m2, direct (beam) on the horizontal
    i_dh: float = 0.0  # W/m2, diffuse on the horizontal
    rh_out: float = 0.5

    @property
    def hour_of_day(self) -> int:
        return int(math.floor(self.time + 1e-9)) % 24


class SkyMode(str, Enum):
    EQUAL_AIR = "equal_air"
    OFFSET = "offset"


@dataclass(frozen=True)
class SkyModel:
    mode: SkyMode = SkyMode.EQUAL_AIR
    offset_k: float = 6.0


def sky_temperature(t_ae: float, model: SkyModel) -> float:
    if model.mode is SkyMode.EQUAL_AIR:
        return t_ae
    return t_ae - model.offset_k


class WeatherFileError(ValueError):
    pass


def load_weather(path: str | Path, timestep: float = 3600.0) -> list[WeatherRecord]:
    """Read a weather CSV and resample it to ``timestep`` seconds.

    Intermediate steps are linearly interpolated (wind direction through its
    vector components); steps past the last row hold the last row.  The
    horizon is the row count times the file spacing.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in WEATHER_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise WeatherFileError(f"{path}: missing column(s) {', '.join(missing)}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            try:
                values = [float(row[c]) for c in WEATHER_COLUMNS]
            except (TypeError, ValueError) as exc:
                raise WeatherFileError(f"{path}: row {lineno}: unparseable value ({exc})") from exc
            t, _, wind, _, i_bh, i_dh, rh = values
            if rows and t <= rows[-1][0]:
                raise WeatherFileError(f"{path}: row {lineno}: time {t} is not increasing")
            if i_bh < 0 or i_dh < 0:
                raise WeatherFileError(f"{path}: row {lineno}: negative irradiance")
            if wind < 0:
                raise WeatherFileError(f"{path}: row {lineno}: negative wind speed")
            if not 0.0 <= rh <= 1.0:
                raise WeatherFileError(f"{path}: row {lineno}: rh_out {rh} outside [0, 1]")
            rows.append(values)
    if not rows:
        raise WeatherFileError(f"{path}: no data rows")
    return resample(np.array(rows), timestep)


def resample(table: np.ndarray, timestep: float) -> list[WeatherRecord]:
    """Resample a (n, 7) table in :data:`WEATHER_COLUMNS` order."""
    if timestep <= 0:
        raise ValueError("timestep must be > 0")
    t = table[:, 0]
    spacing = float(np.median(np.diff(t))) if len(t) > 1 else timestep / 3600.0
    horizon = (t[-1] - t[0]) + spacing
    n = int(math.floor(horizon * 3600.0 / timestep + 1e-9))
    times = t[0] + np.arange(n) * timestep / 3600.0

    def interp(col: np.ndarray) -> np.ndarray:
        return np.interp(times, t, col)

    rad = np.radians(table[:, 3])
    wind_dir = np.degrees(np.arctan2(interp(np.sin(rad)), interp(np.cos(rad)))) % 360.0
    cols = [interp(table[:, i]) for i in (1, 2, 4, 5, 6)]
    return [
        WeatherRecord(float(times[k]), float(cols[0][k]), float(cols[1][k]), float(wind_dir[k]),
                      float(cols[2][k]), float(cols[3][k]), float(cols[4][k]))
        for k in range(n)
    ]


def write_weather(records: Iterable[WeatherRecord], path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(WEATHER_COLUMNS)
        for r in records:
            writer.writerow([f"{r.time:g}", f"{r.t_ae:.4f}", f"{r.wind_speed:.3f}", f"{r.wind_dir:.1f}",
                             f"{r.i_bh:.3f}", f"{r.i_dh:.3f}", f"{r.rh_out:.3f}"])


# ---------------------------------------------------------------------------
# Solar geometry
# ---------------------------------------------------------------------------


def declination(day_of_year: float) -> float:
    """Cooper's approximation, degrees."""
    return 23.45 * math.sin(math.radians(360.0 * (284.0 + day_of_year) / 365.0))


def sun_position(latitude: float, day_of_year: float, hour: float) -> tuple[float, float]:
    """Solar (zenith, azimuth) in degrees at solar time ``hour``.

    Azimuth is clockwise from north.
    """
    phi = math.radians(latitude)
    delta = math.radians(declination(day_of_year))
    omega = math.radians(15.0 * (hour - 12.0))
    cos_z = math.sin(phi) * math.sin(delta) + math.cos(phi) * math.cos(delta) * math.cos(omega)
    zenith = math.degrees(math.acos(max(-1.0, min(1.0, cos_z))))
    azimuth = math.degrees(math.atan2(
        -math.sin(omega) * math.cos(delta),
        math.cos(phi) * math.sin(delta) - math.sin(phi) * math.cos(delta) * math.cos(omega),
    )) % 360.0
    return zenith, azimuth


def incidence_cosine(tilt: float, azimuth: float, sun: tuple[float, float]) -> float:
    z, a = (math.radians(v) for v in sun)
    b = math.radians(tilt)
    return math.cos(z) * math.cos(b) + math.sin(z) * math.sin(b) * math.cos(a - math.radians(azimuth))


def incident_irradiance(rec: WeatherRecord, tilt: float, azimuth: float, albedo: float,
                        sun: tuple[float, float]) -> tuple[float, float, float]:
    """(beam, diffuse, ground-reflected) irradiance on a tilted plane, W/m2.

    Isotropic sky and ground.
    """
    zenith = sun[0]
    beam = 0.0
    if zenith < 90.0 and rec.i_bh > 0:
        cos_z = max(math.cos(math.radians(zenith)), _MIN_COS_ZENITH)
        beam = rec.i_bh * max(0.0, incidence_cosine(tilt, azimuth, sun)) / cos_z
    cos_b = math.cos(math.radians(tilt))
    diffuse = rec.i_dh * (1.0 + cos_b) / 2.0
    reflected = (rec.i_bh + rec.i_dh) * albedo * (1.0 - cos_b) / 2.0
    return beam, diffuse, reflected


class AngularModel(str, Enum):
    CONSTANT = "constant"
    COSINE_MODIFIER = "cosine_modifier"


def glazing_transmission(incident: float, tau0: float, incidence_angle: float,
                         angular_model: AngularModel = AngularModel.CONSTANT) -> float:
    """Transmitted flux for ``incident`` arriving at ``incidence_angle`` degrees."""
    if incidence_angle >= 90.0:
        return 0.0
    if angular_model is AngularModel.CONSTANT:
        return tau0 * incident
    cos_t = math.cos(math.radians(incidence_angle))
    modifier = min(1.0, max(0.0, 1.0 - 0.2 * (1.0 / cos_t - 1.0)))
    return tau0 * incident * modifier


def distribute_shortwave(faces: Sequence[Face], transmitted_flux: float,
                         target: str | None = None) -> dict[str, float]:
    """Absorbed shortwave per face id, W, for flux entering a zone.

    The flux first lands on the ``target`` wall's face if given, otherwise on
    the floor faces (area-weighted).  Each absorbs its absorptivity share;
    the reflected part is spread by area over the remaining faces, which
    absorb their share once.  The second reflection is discarded.
    """
    if transmitted_flux < 0:
        raise ValueError("transmitted flux must be >= 0")
    if target is not None:
        first = [f for f in faces if f.wall_id == target]
        if not first:
            raise ValueError(f"target surface {target!r} does not border zone")
    else:
        first = [f for f in faces if f.is_floor]
        if not first:
            zone = faces[0].zone if faces else "?"
            raise ValueError(f"zone {zone!r} has no floor surface to receive shortwave")
    absorbed = {f.id: 0.0 for f in faces}
    first_ids = {f.id for f in first}
    rest = [f for f in faces if f.id not in first_ids]

    first_area = sum(f.area for f in first)
    reflected = 0.0
    for f in first:
        share = transmitted_flux * f.area / first_area
        absorbed[f.id] += f.absorptivity * share
        reflected += (1.0 - f.absorptivity) * share
    rest_area = sum(f.area for f in rest)
    if rest_area > 0:
        for f in rest:
            absorbed[f.id] += f.absorptivity * reflected * f.area / rest_area
    return absorbed
