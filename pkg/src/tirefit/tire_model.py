"""Magic Formula Simple tire curve: evaluation and analytic derivatives.

The curve maps an excitation (slip ratio or slip angle) to a normalized
force coefficient F/Fz. Four coefficients shape the curve: stiffness B,
shape C, peak D and curvature E; Sh and Sv shift it horizontally and
vertically. Sh/Sv are carried along but are never free variables of the
fitters; they are pre-estimated from the linear region (see preprocess).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .kernels import mf_eval, mf_param_grads


@dataclass(frozen=True)
class TireParams:
    """Magic Formula coefficient set."""

    B: float
    C: float
    D: float
    E: float
    Sh: float = 0.0
    Sv: float = 0.0

    def as_array(self) -> np.ndarray:
        """The four fitted coefficients (B, C, D, E)."""
        return np.array([self.B, self.C, self.D, self.E], dtype=np.float64)

    def to_json(self) -> str:
        return json.dumps(
            {"B": self.B, "C": self.C, "D": self.D, "E": self.E,
             "Sh": self.Sh, "Sv": self.Sv}
        )

    @classmethod
    def from_json(cls, text: str) -> "TireParams":
        d = json.loads(text)
        return cls(B=d["B"], C=d["C"], D=d["D"], E=d["E"],
                   Sh=d.get("Sh", 0.0), Sv=d.get("Sv", 0.0))

    @classmethod
    def from_vector(cls, bcde, Sh: float = 0.0, Sv: float = 0.0) -> "TireParams":
        b, c, d, e = (float(v) for v in bcde)
        return cls(B=b, C=c, D=d, E=e, Sh=Sh, Sv=Sv)


#: Coefficients used throughout the synthetic studies.
REFERENCE_PARAMS = TireParams(B=15.0, C=2.0, D=1.5, E=0.8)


@dataclass(frozen=True)
class ParamBounds:
    """Per-coefficient (min, max) box for the fitters."""

    B: tuple[float, float] = (5.0, 40.0)
    C: tuple[float, float] = (1.0, 3.0)
    D: tuple[float, float] = (0.1, 2.0)
    E: tuple[float, float] = (-1.0, 1.0)

    def __post_init__(self):
        for name in ("B", "C", "D", "E"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ValueError(f"bounds for {name} must satisfy min < max")

    def lows(self) -> np.ndarray:
        return np.array([self.B[0], self.C[0], self.D[0], self.E[0]])

    def highs(self) -> np.ndarray:
        return np.array([self.B[1], self.C[1], self.D[1], self.E[1]])

    def contains(self, params: TireParams, atol: float = 0.0) -> bool:
        v = params.as_array()
        return bool(np.all(v >= self.lows() - atol) and np.all(v <= self.highs() + atol))

    def clip(self, bcde) -> np.ndarray:
        return np.clip(np.asarray(bcde, dtype=np.float64), self.lows(), self.highs())

    def to_dict(self) -> dict:
        return {"B": list(self.B), "C": list(self.C), "D": list(self.D), "E": list(self.E)}

    @classmethod
    def from_dict(cls, d: dict) -> "ParamBounds":
        return cls(**{k: tuple(v) for k, v in d.items()})


def evaluate(params: TireParams, excitation: float) -> float:
    """Normalized force at a single excitation value."""
    y = mf_eval(params.B, params.C, params.D, params.E, params.Sh, params.Sv,
                np.atleast_1d(float(excitation)))
    return float(y[0])


def evaluate_batch(params: TireParams, excitations) -> np.ndarray:
    """Elementwise curve evaluation over a vector of excitations."""
    x = np.asarray(excitations, dtype=np.float64)
    if x.size == 0:
        return np.empty(0, dtype=np.float64)
    return np.asarray(mf_eval(params.B, params.C, params.D, params.E,
                              params.Sh, params.Sv, np.atleast_1d(x)))


def stiffness_at_origin(params: TireParams) -> float:
    """Slope dY/dX at x = 0 of the shifted frame; equals B*C*D."""
    return params.B * params.C * params.D


def gradients(params: TireParams, excitation) -> np.ndarray:
    """Partial derivatives of the force w.r.t. (B, C, D, E).

    Accepts a scalar or vector excitation; returns shape (4,) or (n, 4).
    """
    x = np.atleast_1d(np.asarray(excitation, dtype=np.float64))
    g = np.asarray(mf_param_grads(params.B, params.C, params.D, params.E,
                                  params.Sh, x))
    if np.ndim(excitation) == 0:
        return g[0]
    return g
