"""Sensor-log conditioning: filtering, resampling, offset compensation,
gear-shift masking, nearest-neighbor thinning and Sv/Sh pre-estimation.

The output of this stage is an AxleDataset of (excitation, F/Fz) pairs,
the common input of both fitters.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.ndimage import gaussian_filter1d
from scipy.signal import savgol_filter

from .errors import (
    DegenerateSlope,
    InsufficientCalibrationData,
    InsufficientLinearData,
    NoOverlap,
    SeriesTooShort,
)

DEFAULT_TARGET_RATE = 100.0
DEFAULT_BLANKING_S = 0.2
DEFAULT_LINEAR_CUT = 0.02
DEFAULT_THIN_RADIUS = 0.02


# ---------------------------------------------------------------------------
# datasets

@dataclass
class AxleDataset:
    """Samples of (excitation, normalized force) for one axle and direction."""

    excitation: np.ndarray
    force_coeff: np.ndarray
    weight: np.ndarray | None = None
    axle: str = "rear"            # front | rear
    direction: str = "longitudinal"   # longitudinal | lateral

    def __post_init__(self):
        self.excitation = np.asarray(self.excitation, dtype=np.float64)
        self.force_coeff = np.asarray(self.force_coeff, dtype=np.float64)
        if self.weight is None:
            self.weight = np.ones_like(self.excitation)
        else:
            self.weight = np.asarray(self.weight, dtype=np.float64)
        if not (len(self.excitation) == len(self.force_coeff) == len(self.weight)):
            raise ValueError("dataset columns must have equal length")

    def __len__(self) -> int:
        return len(self.excitation)

    def sanity_mask(self) -> np.ndarray:
        """Finite samples with |slip| <= 1.5 and |F/Fz| <= 3."""
        ok = np.isfinite(self.excitation) & np.isfinite(self.force_coeff)
        if self.direction == "longitudinal":
            ok &= np.abs(self.excitation) <= 1.5
        ok &= np.abs(self.force_coeff) <= 3.0
        return ok

    def filtered(self) -> "AxleDataset":
        m = self.sanity_mask()
        return replace(self, excitation=self.excitation[m],
                       force_coeff=self.force_coeff[m], weight=self.weight[m])

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["excitation", "force_coeff", "weight"])
            for x, y, wt in zip(self.excitation, self.force_coeff, self.weight):
                w.writerow([repr(float(x)), repr(float(y)), repr(float(wt))])

    @classmethod
    def read_csv(cls, path, axle: str = "rear",
                 direction: str = "longitudinal") -> "AxleDataset":
        data = np.genfromtxt(path, delimiter=",", names=True)
        data = np.atleast_1d(data)
        names = data.dtype.names or ()
        for col in ("excitation", "force_coeff"):
            if col not in names:
                raise ValueError(f"missing column {col!r} in {path}")
        weight = data["weight"] if "weight" in names else None
        return cls(excitation=data["excitation"], force_coeff=data["force_coeff"],
                   weight=weight, axle=axle, direction=direction)


# ---------------------------------------------------------------------------
# filtering

@dataclass(frozen=True)
class FilterSpec:
    """One smoothing filter: moving-average, savitzky-golay or gaussian.

    Even windows are rounded up to the next odd integer so that the
    filter stays centered.
    """

    kind: str
    window: int = 0
    order: int = 3
    sigma: float = 0.0

    def __post_init__(self):
        if self.kind not in ("moving-average", "savitzky-golay", "gaussian"):
            raise ValueError(f"unknown filter kind {self.kind!r}")
        if self.kind != "gaussian":
            w = int(self.window)
            if w % 2 == 0:
                w += 1
            if w < 3:
                raise ValueError("window must be >= 3")
            object.__setattr__(self, "window", w)
            if self.kind == "savitzky-golay" and self.order >= w:
                raise ValueError("polynomial order must be < window")
        elif self.sigma <= 0:
            raise ValueError("gaussian filter needs sigma > 0")

    def scaled(self, from_rate: float, to_rate: float) -> "FilterSpec":
        """Same time-domain smoothing scale at a different sample rate."""
        if from_rate == to_rate:
            return self
        ratio = to_rate / from_rate
        if self.kind == "gaussian":
            return replace(self, sigma=max(self.sigma * ratio, 1e-9))
        return replace(self, window=max(3, int(round(self.window * ratio))))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "window": self.window,
                "order": self.order, "sigma": self.sigma}


def filter_channel(series, spec: FilterSpec) -> np.ndarray:
    """Smooth a series, preserving its length.

    Savitzky-Golay edges use local polynomial fits so that any polynomial
    of degree <= order passes through unchanged; the other kinds reflect
    at the boundaries.
    """
    x = np.asarray(series, dtype=np.float64)
    if spec.kind != "gaussian" and len(x) < spec.window:
        raise SeriesTooShort(f"series of {len(x)} samples, window {spec.window}")
    if spec.kind == "savitzky-golay":
        return savgol_filter(x, spec.window, spec.order, mode="interp")
    if spec.kind == "moving-average":
        half = spec.window // 2
        padded = np.pad(x, half, mode="reflect")
        kernel = np.full(spec.window, 1.0 / spec.window)
        return np.convolve(padded, kernel, mode="valid")
    return gaussian_filter1d(x, spec.sigma, mode="reflect")


def savgol_derivative(series, dt: float, window: int, order: int) -> np.ndarray:
    """First derivative of a noisy series via a Savitzky-Golay fit."""
    spec = FilterSpec(kind="savitzky-golay", window=window, order=order)
    return savgol_filter(np.asarray(series, dtype=np.float64),
                         spec.window, spec.order, deriv=1, delta=dt,
                         mode="interp")


# ---------------------------------------------------------------------------
# multi-rate logs

@dataclass
class Channel:
    time: np.ndarray
    values: np.ndarray
    rate: float

    def __post_init__(self):
        self.time = np.asarray(self.time, dtype=np.float64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if np.any(np.diff(self.time) <= 0):
            raise ValueError("channel timestamps must be strictly increasing")


@dataclass
class SensorLog:
    """Raw telemetry channels, possibly at heterogeneous sample rates."""

    channels: dict[str, Channel] = field(default_factory=dict)


@dataclass
class FrameTable:
    """Channels aligned on a shared evenly spaced time grid."""

    time: np.ndarray
    columns: dict[str, np.ndarray]
    rate: float

    def __getitem__(self, name: str) -> np.ndarray:
        return self.columns[name]

    def __contains__(self, name: str) -> bool:
        return name in self.columns

    def __len__(self) -> int:
        return len(self.time)


def resample(log: SensorLog, target_rate: float = DEFAULT_TARGET_RATE) -> FrameTable:
    """Linear interpolation of every channel onto a shared grid.

    The grid spans the intersection of the channel time ranges and holds
    floor(overlap * rate) + 1 points.
    """
    if not log.channels:
        raise NoOverlap("empty sensor log")
    t0 = max(ch.time[0] for ch in log.channels.values())
    t1 = min(ch.time[-1] for ch in log.channels.values())
    if t1 <= t0:
        raise NoOverlap(f"channel windows are disjoint ({t0} vs {t1})")
    n = int(math.floor((t1 - t0) * target_rate)) + 1
    grid = t0 + np.arange(n) / target_rate
    cols = {name: np.interp(grid, ch.time, ch.values)
            for name, ch in log.channels.items()}
    return FrameTable(time=grid, columns=cols, rate=target_rate)


# ---------------------------------------------------------------------------
# offsets

@dataclass
class OffsetReport:
    ay: float = 0.0
    yaw_rate: float = 0.0
    vy: float = 0.0
    steer_angle: float = 0.0
    n_calibration_samples: int = 0

    def to_dict(self) -> dict:
        return {"ay": self.ay, "yaw_rate": self.yaw_rate, "vy": self.vy,
                "steer_angle": self.steer_angle,
                "n_calibration_samples": self.n_calibration_samples}


def compensate_offsets(frames: FrameTable,
                       min_duration_s: float = 5.0) -> tuple[FrameTable, OffsetReport]:
    """Remove constant sensor biases measured during low-dynamics driving.

    Straight, steady driving (|ay| < 0.5 m/s^2, |yaw_rate| < 0.02 rad/s,
    vx > 5 m/s) should read zero on ay, yaw rate, vy and steering; the
    mean over that mask is subtracted from the whole series.
    """
    mask = (np.abs(frames["ay_mps2"]) < 0.5) \
        & (np.abs(frames["yaw_rate_radps"]) < 0.02) \
        & (frames["vx_mps"] > 5.0)
    if mask.sum() < min_duration_s * frames.rate:
        raise InsufficientCalibrationData(
            f"only {mask.sum() / frames.rate:.2f} s of low-dynamics data, "
            f"need {min_duration_s} s")
    biased = {"ay_mps2": "ay", "yaw_rate_radps": "yaw_rate",
              "vy_mps": "vy", "steer_angle_rad": "steer_angle"}
    report = OffsetReport(n_calibration_samples=int(mask.sum()))
    cols = dict(frames.columns)
    for col, attr in biased.items():
        bias = float(np.mean(frames[col][mask]))
        setattr(report, attr, bias)
        cols[col] = frames[col] - bias
    return FrameTable(time=frames.time, columns=cols, rate=frames.rate), report


# ---------------------------------------------------------------------------
# gear shifts

def mask_gear_shifts(frames: FrameTable,
                     blanking: float = DEFAULT_BLANKING_S) -> np.ndarray:
    """True where the drivetrain is settled; False near any gear change."""
    if "gear" not in frames:
        import warnings

        warnings.warn("no gear channel; gear-shift mask is all-true")
        return np.ones(len(frames), dtype=bool)
    gear = frames["gear"]
    mask = np.ones(len(frames), dtype=bool)
    changes = np.nonzero(np.diff(gear) != 0)[0]
    for idx in changes:
        t_shift = 0.5 * (frames.time[idx] + frames.time[idx + 1])
        mask &= ~((frames.time >= t_shift - blanking)
                  & (frames.time <= t_shift + blanking))
    return mask


# ---------------------------------------------------------------------------
# shift pre-fit

def estimate_shifts(dataset: AxleDataset,
                    linear_cut: float = DEFAULT_LINEAR_CUT,
                    min_samples: int = 50) -> tuple[float, float]:
    """(Sh, Sv) from a least-squares line over the linear region.

    Near the origin the curve is a line through (-Sh, Sv); with the
    Sv = 0 convention the fitted line a*x + b gives Sh = b / a.
    """
    sel = np.abs(dataset.excitation) < linear_cut
    if sel.sum() < min_samples:
        raise InsufficientLinearData(
            f"{int(sel.sum())} samples below |excitation| < {linear_cut}, "
            f"need {min_samples}")
    a, b = np.polyfit(dataset.excitation[sel], dataset.force_coeff[sel], 1)
    if abs(a) < 1e-6:
        raise DegenerateSlope(f"linear-region slope {a} too small")
    return float(b / a), 0.0


# ---------------------------------------------------------------------------
# thinning

def thin_nearest_neighbor(dataset: AxleDataset,
                          radius: float = DEFAULT_THIN_RADIUS) -> AxleDataset:
    """Greedy order-preserving thinning in normalized (excitation, force) space.

    A sample is kept iff no previously kept sample lies within `radius`
    after both axes are scaled to unit range; this evens out the data
    density so the linear region cannot dominate the fit.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    n = len(dataset)
    if n == 0:
        return dataset
    x = dataset.excitation
    y = dataset.force_coeff
    x_range = np.ptp(x) or 1.0
    y_range = np.ptp(y) or 1.0
    xs = x / x_range
    ys = y / y_range
    kept_idx: list[int] = []
    kept_x = np.empty(n)
    kept_y = np.empty(n)
    k = 0
    r2 = radius * radius
    for i in range(n):
        if k:
            d2 = (kept_x[:k] - xs[i]) ** 2 + (kept_y[:k] - ys[i]) ** 2
            if d2.min() < r2:
                continue
        kept_x[k] = xs[i]
        kept_y[k] = ys[i]
        k += 1
        kept_idx.append(i)
    idx = np.array(kept_idx, dtype=np.intp)
    return replace(dataset, excitation=x[idx], force_coeff=y[idx],
                   weight=dataset.weight[idx])
