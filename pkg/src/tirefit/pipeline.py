"""End-to-end telemetry pipeline: CSV log -> per-axle datasets.

Wires together the filter/resample/offset stages, the per-frame force
and slip chain, normalization by vertical load, thinning and the Sh/Sv
pre-fit. The CLI `preprocess` subcommand is a thin wrapper around
`process_log`.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import preprocess as pp
from . import vehicle_dynamics as vd
from .errors import LowSpeed, NonPositiveLoad, SchemaError, SteeringOutOfRange

REQUIRED_COLUMNS = (
    "time_s", "ax_mps2", "ay_mps2", "yaw_rate_radps", "steer_angle_rad",
    "omega_fl_radps", "omega_fr_radps", "omega_rl_radps", "omega_rr_radps",
    "vx_mps", "vy_mps", "gear",
)

#: Channel -> sensor group, mirroring the recording setup.
SENSOR_GROUPS = {
    "vx_mps": "correvit", "vy_mps": "correvit",
    "ax_mps2": "imu", "ay_mps2": "imu", "yaw_rate_radps": "imu",
    "steer_angle_rad": "can", "omega_fl_radps": "can", "omega_fr_radps": "can",
    "omega_rl_radps": "can", "omega_rr_radps": "can",
}

#: Native sensor rates (Hz) and filters at those rates.
DEFAULT_RATES = {"correvit": 500.0, "imu": 800.0, "can": 100.0}
DEFAULT_FILTERS = {
    "correvit": pp.FilterSpec(kind="savitzky-golay", window=200, order=3),
    "imu": pp.FilterSpec(kind="savitzky-golay", window=500, order=5),
    "can": pp.FilterSpec(kind="savitzky-golay", window=30, order=3),
}


@dataclass
class PipelineSettings:
    target_rate: float = pp.DEFAULT_TARGET_RATE
    blanking_s: float = pp.DEFAULT_BLANKING_S
    linear_cut: float = pp.DEFAULT_LINEAR_CUT
    thin_radius: float = pp.DEFAULT_THIN_RADIUS
    v_min: float = vd.V_MIN_SLIP
    rates: dict = field(default_factory=lambda: dict(DEFAULT_RATES))
    filters: dict = field(default_factory=lambda: dict(DEFAULT_FILTERS))


def read_log_csv(path, sidecar_path=None) -> tuple[pp.SensorLog, dict]:
    """Load a telemetry CSV into a SensorLog; sidecar JSON may override
    the per-sensor-group native rates."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError("empty log file") from None
    missing = [c for c in REQUIRED_COLUMNS if c not in header]
    if missing:
        raise SchemaError(f"missing column {missing[0]!r}")
    data = np.genfromtxt(path, delimiter=",", names=True)
    time = np.asarray(data["time_s"], dtype=np.float64)
    if len(time) < 2:
        raise SchemaError("log needs at least two samples")
    log_rate = (len(time) - 1) / (time[-1] - time[0])

    rates = dict(DEFAULT_RATES)
    if sidecar_path is not None:
        with open(sidecar_path) as fh:
            rates.update(json.load(fh).get("rates", {}))

    log = pp.SensorLog()
    for col in REQUIRED_COLUMNS[1:]:
        log.channels[col] = pp.Channel(time=time, values=data[col], rate=log_rate)
    meta = {"log_rate": log_rate, "native_rates": rates}
    return log, meta


def filter_log(log: pp.SensorLog, settings: PipelineSettings) -> pp.SensorLog:
    """Smooth every channel with its sensor group's filter.

    Filter windows are given at the sensor's native rate and rescaled to
    the rate the channel was actually logged at. The gear channel is a
    discrete state and is left untouched.
    """
    out = pp.SensorLog()
    for name, ch in log.channels.items():
        if name == "gear":
            out.channels[name] = ch
            continue
        group = SENSOR_GROUPS[name]
        spec = settings.filters[group].scaled(settings.rates[group], ch.rate)
        out.channels[name] = pp.Channel(time=ch.time,
                                        values=pp.filter_channel(ch.values, spec),
                                        rate=ch.rate)
    return out


def compute_frames(frames: pp.FrameTable, vp: vd.VehicleParams,
                   settings: PipelineSettings,
                   keep: np.ndarray) -> dict[str, pp.AxleDataset]:
    """Per-frame force/slip chain and normalization into four datasets."""
    # yaw acceleration from a smoothing derivative of the (already
    # filtered) yaw-rate channel, same window scale as the IMU filter
    imu_spec = settings.filters["imu"].scaled(settings.rates["imu"], frames.rate)
    yaw_accel = pp.savgol_derivative(frames["yaw_rate_radps"], 1.0 / frames.rate,
                                     imu_spec.window, imu_spec.order)
    out = {key: ([], []) for key in
           ("front_longitudinal", "rear_longitudinal",
            "front_lateral", "rear_lateral")}
    for i in range(len(frames)):
        if not keep[i]:
            continue
        try:
            forces = vd.frame_forces(
                vp, ax=frames["ax_mps2"][i], ay=frames["ay_mps2"][i],
                vx=frames["vx_mps"][i], yaw_accel=yaw_accel[i],
                delta=frames["steer_angle_rad"][i],
                omega_rl=frames["omega_rl_radps"][i],
                omega_rr=frames["omega_rr_radps"][i])
            r_dyn_f, _, _ = vd.dynamic_radius(
                vp.front_tire, forces.Fz_f,
                frames["omega_fl_radps"][i], frames["omega_fr_radps"][i])
            r_dyn_r, _, _ = vd.dynamic_radius(
                vp.rear_tire, forces.Fz_r,
                frames["omega_rl_radps"][i], frames["omega_rr_radps"][i])
            slip = vd.axle_slip(
                vx=frames["vx_mps"][i], vy=frames["vy_mps"][i],
                yaw_rate=frames["yaw_rate_radps"][i],
                delta=frames["steer_angle_rad"][i], vp=vp,
                omega_fl=frames["omega_fl_radps"][i],
                omega_fr=frames["omega_fr_radps"][i],
                omega_rl=frames["omega_rl_radps"][i],
                omega_rr=frames["omega_rr_radps"][i],
                r_dyn_f=r_dyn_f, r_dyn_r=r_dyn_r, v_min=settings.v_min)
        except (NonPositiveLoad, LowSpeed, SteeringOutOfRange):
            continue
        out["front_longitudinal"][0].append(slip.lambda_f)
        out["front_longitudinal"][1].append(forces.Fx_f / forces.Fz_f)
        out["rear_longitudinal"][0].append(slip.lambda_r)
        out["rear_longitudinal"][1].append(forces.Fx_r / forces.Fz_r)
        out["front_lateral"][0].append(slip.alpha_f)
        out["front_lateral"][1].append(forces.Fy_f_tf / forces.Fz_f)
        out["rear_lateral"][0].append(slip.alpha_r)
        out["rear_lateral"][1].append(forces.Fy_r / forces.Fz_r)
    datasets = {}
    for key, (exc, coef) in out.items():
        axle, direction = key.split("_")
        datasets[key] = pp.AxleDataset(excitation=np.array(exc),
                                       force_coeff=np.array(coef),
                                       axle=axle, direction=direction)
    return datasets


@dataclass
class ProcessedLog:
    datasets: dict[str, pp.AxleDataset]
    shifts: dict[str, tuple[float, float]]
    offsets: pp.OffsetReport


def process_log(log: pp.SensorLog, vp: vd.VehicleParams,
                settings: PipelineSettings | None = None) -> ProcessedLog:
    """Full pipeline: filter, resample, offsets, gear mask, force chain,
    thinning and shift pre-estimation."""
    settings = settings or PipelineSettings()
    filtered = filter_log(log, settings)
    frames = pp.resample(filtered, settings.target_rate)
    frames, offsets = pp.compensate_offsets(frames)
    keep = pp.mask_gear_shifts(frames, settings.blanking_s)
    raw = compute_frames(frames, vp, settings, keep)
    datasets = {}
    shifts = {}
    for key, ds in raw.items():
        ds = ds.filtered()
        # shifts come from the dense linear region, so estimate them
        # before thinning evens out the density
        try:
            shifts[key] = pp.estimate_shifts(ds, settings.linear_cut)
        except Exception as exc:
            warnings.warn(f"{key}: shift pre-fit skipped ({exc})")
            shifts[key] = (0.0, 0.0)
        ds = pp.thin_nearest_neighbor(ds, settings.thin_radius) if len(ds) else ds
        datasets[key] = ds
    return ProcessedLog(datasets=datasets, shifts=shifts, offsets=offsets)
