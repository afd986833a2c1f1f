"""Stick-slip ratchet turning per-actuator strain traces into forward motion.

Each compliant leg connects two adjacent actuator segments.  The model
is a quasi-static hysteresis state machine: the foot lifts when its
trailing (second-listed) actuator's strain rises through the engage
threshold, is carried forward with the membrane while lifted, and
re-plants when the strain falls through the release threshold.  While
planted a foot never moves, so it can never slip backward.  On lift the
tip springs forward to the current membrane position (elastic release
of the bent leg), which makes the net step per full actuation cycle
exactly ``stride_gain * rest_length * (sqrt(1 + s_peak) - 1)``.

Pure post-processing over an immutable trace; thread-safe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "FootModel",
    "FootState",
    "GaitTrace",
    "foot_kinematics",
    "simulate_gait",
    "speed",
]


@dataclass(frozen=True)
class FootModel:
    """One leg: its two attachment actuators and the ratchet constants.

    ``dea_right`` is the trailing attachment that drives lift-off and
    re-planting.  ``stride_gain`` is the fraction of segment elongation
    converted into step length.
    """

    dea_left: str
    dea_right: str
    rest_length: float = 0.02
    stride_gain: float = 0.5
    engage_strain: float = 0.05
    release_strain: float = 0.02
    name: str = ""

    def __post_init__(self):
        if self.dea_left == self.dea_right:
            raise ValueError("a foot must connect two distinct actuators")
        if not (self.rest_length > 0.0 and math.isfinite(self.rest_length)):
            raise ValueError("rest_length must be positive")
        if not 0.0 < self.stride_gain <= 1.0:
            raise ValueError("stride_gain must lie in (0, 1]")
        if self.release_strain < 0.0:
            raise ValueError("release_strain must be non-negative")
        if self.engage_strain <= self.release_strain:
            raise ValueError("engage threshold must exceed release threshold")


@dataclass(frozen=True)
class FootState:
    """Hysteresis state carried between samples."""

    position: float = 0.0
    contact: bool = True
    swing_reach: float = 0.0  # running max of segment elongation this swing


def _elongation(foot: FootModel, strain_left: float, strain_right: float) -> float:
    # Segment elongation from rest: each half follows its actuator's
    # linear stretch sqrt(1 + areal strain).
    stretch = 0.5 * (math.sqrt(1.0 + strain_left) + math.sqrt(1.0 + strain_right))
    return foot.rest_length * (stretch - 1.0)


def foot_kinematics(
    strain_left: float,
    strain_right: float,
    foot: FootModel,
    state: FootState,
) -> tuple[float, bool, FootState]:
    """Advance the ratchet one sample.

    Returns ``(step, contact, new_state)`` where ``step`` is the
    incremental displacement of the foot tip during this sample.
    """
    if strain_left < 0.0 or strain_right < 0.0:
        raise ValueError("strains must be non-negative")
    trailing = strain_right
    if state.contact:
        if trailing > foot.engage_strain:
            reach = max(0.0, _elongation(foot, strain_left, strain_right))
            step = foot.stride_gain * reach
            return step, False, FootState(state.position + step, False, reach)
        return 0.0, True, state
    # lifted: carried forward with the membrane, ratcheting on the
    # running maximum so retraction under the foot costs nothing
    reach = max(state.swing_reach, _elongation(foot, strain_left, strain_right))
    step = foot.stride_gain * (reach - state.swing_reach)
    position = state.position + step
    if trailing < foot.release_strain:
        return step, True, FootState(position, True, 0.0)
    return step, False, FootState(position, False, reach)


@dataclass
class GaitTrace:
    """Sampled foot and body positions derived from a strain trace."""

    t: np.ndarray
    foot_names: list[str]
    positions: np.ndarray  # (samples, feet)
    contact: np.ndarray  # (samples, feet), bool
    robot: np.ndarray  # mean foot position

    def to_csv(self) -> str:
        header = ["t", "x_robot"]
        header += [f"x_{name}" for name in self.foot_names]
        header += [f"contact_{name}" for name in self.foot_names]
        lines = [",".join(header)]
        for i in range(self.t.size):
            row = [repr(float(self.t[i])), repr(float(self.robot[i]))]
            row += [repr(float(v)) for v in self.positions[i]]
            row += [str(int(v)) for v in self.contact[i]]
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"


def simulate_gait(trace, feet: list[FootModel]) -> GaitTrace:
    """Run every foot's ratchet over a simulated trace.

    ``trace`` must provide ``t``, ``dea_names`` and a ``strains`` array
    of shape (samples, actuators); the robot position is the mean of
    the foot positions.
    """
    if not feet:
        raise ValueError("no feet to simulate")
    index = {name: i for i, name in enumerate(trace.dea_names)}
    referenced = {f.dea_left for f in feet} | {f.dea_right for f in feet}
    missing = sorted(referenced - index.keys())
    if missing:
        raise ValueError(f"trace lacks strain series for: {', '.join(missing)}")

    n = trace.t.size
    positions = np.empty((n, len(feet)))
    contact = np.empty((n, len(feet)), dtype=bool)
    strains = np.clip(trace.strains, 0.0, None)
    for j, foot in enumerate(feet):
        left = strains[:, index[foot.dea_left]]
        right = strains[:, index[foot.dea_right]]
        state = FootState()
        for i in range(n):
            _, in_contact, state = foot_kinematics(left[i], right[i], foot, state)
            positions[i, j] = state.position
            contact[i, j] = in_contact
    names = [foot.name or f"foot{j + 1}" for j, foot in enumerate(feet)]
    return GaitTrace(
        t=trace.t.copy(),
        foot_names=names,
        positions=positions,
        contact=contact,
        robot=positions.mean(axis=1),
    )


def speed(gait: GaitTrace, t_start: float = 0.0, t_end: float | None = None) -> float:
    """Mean forward speed: least-squares slope of the robot position
    over the window.  The caller chooses a post-settling window
    spanning at least a few gait cycles."""
    t_end = gait.t[-1] if t_end is None else t_end
    mask = (gait.t >= t_start) & (gait.t <= t_end)
    if np.count_nonzero(mask) < 2:
        raise ValueError("speed window contains fewer than two samples")
    coeffs = np.polyfit(gait.t[mask], gait.robot[mask], 1)
    return float(coeffs[0])


def single_cycle_stride(foot: FootModel, peak_strain: float) -> float:
    """Net step of one engage-to-release cycle whose both attachments
    peak at ``peak_strain``; the closed form the ratchet reduces to."""
    return foot.stride_gain * foot.rest_length * (math.sqrt(1.0 + peak_strain) - 1.0)
