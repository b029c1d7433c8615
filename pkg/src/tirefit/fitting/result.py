"""Fit result container shared by both optimizers."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..tire_model import ParamBounds, TireParams


@dataclass(frozen=True)
class SviConfig:
    steps: int = 3000
    mc_samples: int = 8
    learning_rate: float = 0.01
    seed: int = 0
    bounds: ParamBounds = field(default_factory=ParamBounds)
    fixed_c: float | None = None

    def __post_init__(self):
        if self.steps < 1 or self.mc_samples < 1:
            raise ValueError("steps and mc_samples must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")

    def to_dict(self) -> dict:
        return {"steps": self.steps, "mc_samples": self.mc_samples,
                "learning_rate": self.learning_rate, "seed": self.seed,
                "bounds": self.bounds.to_dict(), "fixed_c": self.fixed_c}


@dataclass
class FitResult:
    """Posterior mean/covariance (SVI) or point estimate (Nelder-Mead)."""

    mean: np.ndarray                 # (4,) B, C, D, E
    covariance: np.ndarray           # (4, 4), all-zero for point estimates
    sigma_noise: float
    trace: np.ndarray
    method: str                      # "nelder-mead" | "svi"
    bounds: ParamBounds
    params: TireParams               # mean coefficients incl. Sh/Sv
    config: dict = field(default_factory=dict)
    guide: Any = None                # SVI guide state, kept for sampling

    def std(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))

    def to_json(self, include_trace: bool = False) -> str:
        doc = {
            "method": self.method,
            "mean": [float(v) for v in self.mean],
            "covariance": [float(v) for v in np.asarray(self.covariance).ravel()],
            "sigma_noise": float(self.sigma_noise),
            "bounds": self.bounds.to_dict(),
            "params": json.loads(self.params.to_json()),
            "config": self.config,
        }
        if include_trace:
            doc["trace"] = [float(v) for v in self.trace]
        return json.dumps(doc, indent=2)
