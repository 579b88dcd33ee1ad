"""Agent observations and rewards.

Both observation vectors are four scaled continuous components followed by
a three-way one-hot driving-condition block, which is all zeros when
recognition is disabled.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..control import EMS_DELTAS

N_DC = 3
OBS_SIZE = 4 + N_DC


@dataclass
class ObsRanges:
    """Ranges mapped linearly onto [-1, 1]; values outside are clipped."""

    T_cab: tuple[float, float] = (-10.0, 50.0)
    e_cab: tuple[float, float] = (-20.0, 20.0)
    speed: tuple[float, float] = (0.0, 40.0)
    accel: tuple[float, float] = (-4.0, 4.0)
    d_soc: tuple[float, float] = (-0.15, 0.15)


def scale(x: float, lo_hi: tuple[float, float]) -> float:
    lo, hi = lo_hi
    y = 2.0 * (x - lo) / (hi - lo) - 1.0
    return -1.0 if y < -1.0 else (1.0 if y > 1.0 else y)


def _dc_block(dc_label: int, dc_enabled: bool) -> list[float]:
    block = [0.0] * N_DC
    if dc_enabled:
        block[dc_label] = 1.0
    return block


def build_obs_cab(T_cab: float, v: float, a: float, dc_label: int, dc_enabled: bool,
                  ranges: ObsRanges | None = None, T_target: float = 22.0) -> np.ndarray:
    r = ranges or ObsRanges()
    e_cab = T_cab - T_target
    return np.array(
        [scale(T_cab, r.T_cab), scale(e_cab, r.e_cab), scale(v, r.speed), scale(a, r.accel)]
        + _dc_block(dc_label, dc_enabled)
    )


def build_obs_ems(soc: float, soc_initial: float, v: float, a: float, a_last: int, dc_label: int,
                  dc_enabled: bool, ranges: ObsRanges | None = None) -> np.ndarray:
    r = ranges or ObsRanges()
    n_act = len(EMS_DELTAS)
    return np.array(
        [scale(v, r.speed), scale(a, r.accel), scale(soc - soc_initial, r.d_soc), 2.0 * a_last / (n_act - 1) - 1.0]
        + _dc_block(dc_label, dc_enabled)
    )


def reward_cab(e_cab: float, p_cab: float, alpha_1: float, alpha_2: float) -> float:
    if p_cab < 0:
        raise ValueError("cabin power must be non-negative")
    return -alpha_1 * e_cab * e_cab - alpha_2 * p_cab


def reward_ems(fuel_rate: float, soc: float, beta_1: float, beta_2: float, soc_ref: float = 0.7) -> float:
    if fuel_rate < 0:
        raise ValueError("fuel rate must be non-negative")
    d = soc - soc_ref
    return -beta_1 * fuel_rate - beta_2 * d * d
