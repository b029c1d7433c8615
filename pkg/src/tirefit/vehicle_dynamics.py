"""Per-axle forces, vertical loads and slip states for a single-track model.

All functions are pure and operate on one frame of resampled telemetry.
Force balance (Fx_f + Fx_r == Fx_cog, Fy_f + Fy_r == m*ay) holds exactly
by construction.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .errors import LowSpeed, NonPositiveLoad, SteeringOutOfRange

G = 9.81

#: Below this axle longitudinal speed (m/s) slip is numerically meaningless.
V_MIN_SLIP = 3.0


@dataclass(frozen=True)
class AxleGeometry:
    """Tire geometry per axle for the dynamic-radius model."""

    r_i: float        # unloaded non-rotating radius (m)
    d_r: float        # speed expansion factor (m*s^2)
    c_tire: float     # global vertical stiffness (N/m)


@dataclass(frozen=True)
class LsdSettings:
    """Limited-slip differential preload and ramp coefficients."""

    preload: float = 0.0         # N*m
    coast_coeff: float = 0.0
    drive_coeff: float = 0.0


@dataclass(frozen=True)
class VehicleParams:
    m: float                 # mass (kg)
    l: float                 # wheelbase (m)
    lr: float                # CoG to rear axle (m)
    h_cog: float             # CoG height (m)
    Izz: float               # yaw inertia (kg*m^2)
    c_drag: float            # drag force / vx^2 (N*s^2/m^2)
    c_lift_f: float          # front downforce / vx^2 (N*s^2/m^2)
    c_lift_r: float          # rear downforce / vx^2 (N*s^2/m^2)
    f_roll: float            # rolling resistance coefficient
    front_tire: AxleGeometry
    rear_tire: AxleGeometry
    lsd: LsdSettings = field(default_factory=LsdSettings)
    engine_brake_torque_max: float = 0.0   # N*m at the engine
    driveline_ratio: float = 1.0           # engine-to-rear-axle ratio

    def __post_init__(self):
        if self.m <= 0:
            raise ValueError("mass must be positive")
        if not 0 < self.lr < self.l:
            raise ValueError("require 0 < lr < l")
        if self.Izz <= 0:
            raise ValueError("yaw inertia must be positive")
        for geo in (self.front_tire, self.rear_tire):
            if geo.r_i <= 0 or geo.c_tire <= 0:
                raise ValueError("tire radius and stiffness must be positive")

    _KNOWN = {
        "m", "l", "lr", "h_cog", "Izz", "c_drag", "c_lift_f", "c_lift_r",
        "f_roll", "front_tire", "rear_tire", "lsd",
        "engine_brake_torque_max", "driveline_ratio",
    }

    @classmethod
    def from_dict(cls, d: dict) -> "VehicleParams":
        unknown = set(d) - cls._KNOWN
        if unknown:
            raise ValueError(f"unknown VehicleParams keys: {sorted(unknown)}")
        kw = dict(d)
        kw["front_tire"] = AxleGeometry(**kw["front_tire"])
        kw["rear_tire"] = AxleGeometry(**kw["rear_tire"])
        if "lsd" in kw:
            kw["lsd"] = LsdSettings(**kw["lsd"])
        return cls(**kw)

    @classmethod
    def from_file(cls, path) -> "VehicleParams":
        """Load from a JSON or TOML document (SI units, unknown keys rejected)."""
        text = open(path, "rb").read()
        if str(path).endswith(".toml"):
            import tomllib

            return cls.from_dict(tomllib.loads(text.decode()))
        return cls.from_dict(json.loads(text.decode()))


@dataclass(frozen=True)
class AxleForces:
    Fx_f: float
    Fx_r: float
    Fy_f: float
    Fy_r: float
    Fz_f: float
    Fz_r: float
    Fy_f_tf: float


@dataclass(frozen=True)
class SlipStates:
    lambda_f: float
    lambda_r: float
    alpha_f: float
    alpha_r: float
    r_dyn_f: float
    r_dyn_r: float


def longitudinal_cog_force(vp: VehicleParams, ax: float, vx: float) -> float:
    """Fx at the CoG: inertial force plus drag and rolling resistance."""
    f_drag = vp.c_drag * vx * vx
    f_roll = vp.f_roll * (vp.m * G + (vp.c_lift_f + vp.c_lift_r) * vx * vx)
    return vp.m * ax + f_drag + f_roll


def vertical_loads(vp: VehicleParams, ax: float, vx: float) -> tuple[float, float]:
    """Quasi-static axle loads with longitudinal transfer and aero downforce."""
    static_f = vp.m * G * vp.lr / vp.l
    static_r = vp.m * G * (vp.l - vp.lr) / vp.l
    transfer = vp.m * ax * vp.h_cog / vp.l
    fz_f = static_f - transfer + vp.c_lift_f * vx * vx
    fz_r = static_r + transfer + vp.c_lift_r * vx * vx
    if fz_f <= 0 or fz_r <= 0:
        raise NonPositiveLoad(f"nonphysical axle load: Fz_f={fz_f}, Fz_r={fz_r}")
    return fz_f, fz_r


def split_longitudinal(fx_cog: float, fz_f: float, fz_r: float) -> tuple[float, float]:
    """Rear-wheel drive: traction goes to the rear, braking splits by load."""
    if fx_cog > 0:
        fx_f = 0.0
    else:
        fx_f = fx_cog * fz_f / (fz_f + fz_r)
    return fx_f, fx_cog - fx_f


def lsd_torque(vp: VehicleParams, fx_r: float, r_dyn_r: float,
               omega_rl: float, omega_rr: float) -> float:
    """Locking torque of the limited-slip differential.

    Input torque comes from the rear axle force; on deceleration it is
    clipped to the engine brake torque. The locking torque opposes the
    wheel-speed difference and never exceeds the transferable input.
    """
    t_input = fx_r * r_dyn_r
    t_input = max(t_input, -vp.engine_brake_torque_max * vp.driveline_ratio)
    d_omega = omega_rr - omega_rl
    if d_omega == 0.0:
        return 0.0
    coeff = vp.lsd.drive_coeff if t_input > 0 else vp.lsd.coast_coeff
    locking = vp.lsd.preload + coeff * abs(t_input)
    locking = min(locking, abs(t_input)) if t_input != 0.0 else locking
    return -math.copysign(locking, d_omega)


def lateral_axle_forces(vp: VehicleParams, ay: float, yaw_accel: float,
                        t_lsd: float) -> tuple[float, float]:
    """Front/rear lateral forces from the yaw moment balance."""
    fy_f = (vp.lr * vp.m * ay - vp.Izz * yaw_accel + t_lsd) / vp.l
    return fy_f, vp.m * ay - fy_f


def front_tire_frame(fy_f: float, fx_f: float, delta: float) -> float:
    """Front lateral force rotated into the tire coordinate frame."""
    if abs(delta) >= math.pi / 2:
        raise SteeringOutOfRange(f"steering angle {delta} rad out of range")
    return (fy_f - fx_f * math.sin(delta)) / math.cos(delta)


def dynamic_radius(geo: AxleGeometry, fz: float, omega_left: float,
                   omega_right: float) -> tuple[float, float, float]:
    """Effective rolling radius: 2/3 unloaded (speed-expanded) + 1/3 static."""
    omega_avg = 0.5 * (omega_left + omega_right)
    r_0 = geo.r_i + geo.d_r * omega_avg * omega_avg
    r_s = geo.r_i - fz / (2.0 * geo.c_tire)
    return (2.0 / 3.0) * r_0 + (1.0 / 3.0) * r_s, r_0, r_s


def axle_slip(vx: float, vy: float, yaw_rate: float, delta: float,
              vp: VehicleParams,
              omega_fl: float, omega_fr: float, omega_rl: float, omega_rr: float,
              r_dyn_f: float, r_dyn_r: float,
              v_min: float = V_MIN_SLIP) -> SlipStates:
    """Slip ratio and slip angle at each axle from rigid-body kinematics."""
    lf = vp.l - vp.lr
    # front axle velocity in the wheel (steered) frame
    vy_axle_f = vy + yaw_rate * lf
    vx_f = vx * math.cos(delta) + vy_axle_f * math.sin(delta)
    vy_f = vy_axle_f * math.cos(delta) - vx * math.sin(delta)
    # rear axle in the body frame
    vx_r = vx
    vy_r = vy - yaw_rate * vp.lr
    if vx_f <= v_min or vx_r <= v_min:
        raise LowSpeed(f"axle speed below {v_min} m/s")
    lam_f = (0.5 * (omega_fl + omega_fr) * r_dyn_f - vx_f) / vx_f
    lam_r = (0.5 * (omega_rl + omega_rr) * r_dyn_r - vx_r) / vx_r
    alpha_f = -math.atan2(vy_f, vx_f)
    alpha_r = -math.atan2(vy_r, vx_r)
    return SlipStates(lambda_f=lam_f, lambda_r=lam_r,
                      alpha_f=alpha_f, alpha_r=alpha_r,
                      r_dyn_f=r_dyn_f, r_dyn_r=r_dyn_r)


def frame_forces(vp: VehicleParams, ax: float, ay: float, vx: float,
                 yaw_accel: float, delta: float,
                 omega_rl: float, omega_rr: float) -> AxleForces:
    """Full force chain for one frame (loads, split, LSD, lateral, steering)."""
    fz_f, fz_r = vertical_loads(vp, ax, vx)
    fx_cog = longitudinal_cog_force(vp, ax, vx)
    fx_f, fx_r = split_longitudinal(fx_cog, fz_f, fz_r)
    r_dyn_r, _, _ = dynamic_radius(vp.rear_tire, fz_r, omega_rl, omega_rr)
    t_lsd = lsd_torque(vp, fx_r, r_dyn_r, omega_rl, omega_rr)
    fy_f, fy_r = lateral_axle_forces(vp, ay, yaw_accel, t_lsd)
    fy_f_tf = front_tire_frame(fy_f, fx_f, delta)
    return AxleForces(Fx_f=fx_f, Fx_r=fx_r, Fy_f=fy_f, Fy_r=fy_r,
                      Fz_f=fz_f, Fz_r=fz_r, Fy_f_tf=fy_f_tf)
