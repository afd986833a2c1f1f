"""Lumped component laws for pre-strained dielectric elastomer membranes.

Four constitutive ingredients the network simulator builds on:

* plate capacitance as a function of areal actuation strain,
* the voltage-dependent equilibrium strain of an incompressible
  neo-Hookean membrane loaded by electrostatic (Maxwell) pressure,
* first-order viscoelastic relaxation of the strain toward that
  equilibrium,
* the piezoresistive switching law of a carbon-track switch compressed
  by a neighbouring actuator.

Conventions: everything is SI; "actuation strain" ``s`` is the areal
strain of the electrode patch relative to its pre-strained rest area,
so ``s = A/A_rest - 1`` and the in-plane linear stretch relative to the
unstrained material is ``lambda = pre_stretch * sqrt(1 + s)``.  All
functions are pure and safe to call from concurrent workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

__all__ = [
    "VACUUM_PERMITTIVITY",
    "DEFAULT_MAX_STRAIN",
    "MembraneParams",
    "DesCurve",
    "ActuatorState",
    "PullInError",
    "capacitance",
    "equilibrium_strain",
    "quadratic_strain_coefficient",
    "pull_in_voltage",
    "strain_rate",
    "des_resistance",
    "inverter_static_output",
]

VACUUM_PERMITTIVITY = 8.8541878128e-12  # F/m

# Membrane can not expand without limit; the strain state is capped here
# and the dynamics clamp the equilibrium target to the same value.
DEFAULT_MAX_STRAIN = 3.0

# Defaults describe the acrylic membrane of the bundled example robot.
# Only the pre-stretch is anchored to the build (85 mm iris opened to
# 294 mm); permittivity, thickness and the effective shear modulus at
# operating stretch are chosen by us and documented in the README.
DEFAULT_PRE_STRETCH = 294.0 / 85.0
DEFAULT_RELATIVE_PERMITTIVITY = 4.7
DEFAULT_UNSTRAINED_THICKNESS = 5.0e-4
DEFAULT_SHEAR_MODULUS = 1.6e5
DEFAULT_VISCO_TIME_CONSTANT = 0.3
DEFAULT_ELECTRODE_AREA = 4.0e-4

_SCAN_POINTS = 1024


class PullInError(RuntimeError):
    """No stable membrane equilibrium exists at the requested voltage.

    Raised by :func:`equilibrium_strain` when the electrostatic load
    outruns elastic stiffening everywhere below the strain cap.  The
    dynamics module never raises this; it clamps the target strain at
    ``s_max`` instead and logs a warning.
    """

    def __init__(self, voltage: float, s_max: float):
        super().__init__(
            f"electromechanical instability: no equilibrium below "
            f"s_max={s_max:g} at {voltage:g} V"
        )
        self.voltage = voltage
        self.s_max = s_max


def _require_finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")
    return value


def _plate_capacitance(permittivity: float, area: float, thickness: float) -> float:
    return permittivity * area / thickness


@dataclass(frozen=True)
class MembraneParams:
    """Material and geometry constants of one pre-strained membrane patch.

    ``reference_capacitance`` is the patch capacitance at zero voltage,
    i.e. at the pre-strained rest geometry; use :meth:`from_geometry` to
    derive it from an electrode area.
    """

    relative_permittivity: float = DEFAULT_RELATIVE_PERMITTIVITY
    vacuum_permittivity: float = VACUUM_PERMITTIVITY
    unstrained_thickness: float = DEFAULT_UNSTRAINED_THICKNESS
    pre_stretch: float = DEFAULT_PRE_STRETCH
    shear_modulus: float = DEFAULT_SHEAR_MODULUS
    viscoelastic_time_constant: float = DEFAULT_VISCO_TIME_CONSTANT
    reference_capacitance: float = _plate_capacitance(
        DEFAULT_RELATIVE_PERMITTIVITY * VACUUM_PERMITTIVITY,
        DEFAULT_ELECTRODE_AREA,
        DEFAULT_UNSTRAINED_THICKNESS / DEFAULT_PRE_STRETCH**2,
    )

    def __post_init__(self):
        for name in (
            "relative_permittivity",
            "vacuum_permittivity",
            "unstrained_thickness",
            "pre_stretch",
            "shear_modulus",
            "viscoelastic_time_constant",
            "reference_capacitance",
        ):
            value = _require_finite(name, getattr(self, name))
            if value <= 0.0:
                raise ValueError(f"{name} must be positive, got {value!r}")
        if self.pre_stretch < 1.0:
            raise ValueError(
                f"pre_stretch must be >= 1, got {self.pre_stretch!r}"
            )

    @property
    def permittivity(self) -> float:
        return self.relative_permittivity * self.vacuum_permittivity

    @property
    def effective_thickness(self) -> float:
        """Membrane thickness at pre-stretch (incompressible volume)."""
        return self.unstrained_thickness / self.pre_stretch**2

    @property
    def prestress(self) -> float:
        """Equibiaxial in-plane stress holding the membrane at pre-stretch."""
        lam = self.pre_stretch
        return self.shear_modulus * (lam**2 - lam**-4)

    @classmethod
    def from_geometry(cls, electrode_area: float, **overrides) -> "MembraneParams":
        """Build params with the reference capacitance derived from a
        pre-strained electrode area via the plate formula."""
        electrode_area = _require_finite("electrode_area", electrode_area)
        if electrode_area <= 0.0:
            raise ValueError("electrode_area must be positive")
        base = cls(reference_capacitance=1.0, **overrides)
        c_ref = _plate_capacitance(
            base.permittivity, electrode_area, base.effective_thickness
        )
        return cls(reference_capacitance=c_ref, **overrides)


@dataclass(frozen=True)
class DesCurve:
    """Piezoresistive switching law of a compressible carbon track.

    The resistance interpolates log-linearly between the insulating and
    conducting states through a logistic in the coupled actuator's
    areal strain, centred at ``threshold_actuation`` with logit slope
    ``steepness``.  Smoothness keeps the network ODE integrable without
    event handling.
    """

    r_off: float = 1.0e12
    r_on: float = 2.0e6
    threshold_actuation: float = 0.09
    steepness: float = 200.0

    def __post_init__(self):
        for name in ("r_off", "r_on", "threshold_actuation", "steepness"):
            value = _require_finite(name, getattr(self, name))
            if value <= 0.0:
                raise ValueError(f"{name} must be positive, got {value!r}")
        if self.r_off <= self.r_on:
            raise ValueError("r_off must exceed r_on")
        if self.r_off / self.r_on < 1.0e5:
            raise ValueError(
                "switching ratio r_off/r_on must be at least 1e5, got "
                f"{self.r_off / self.r_on:g}"
            )


@dataclass(frozen=True)
class ActuatorState:
    """Electromechanical state of one actuator: electrode charge and
    areal actuation strain."""

    charge: float = 0.0
    actuation_strain: float = 0.0

    def __post_init__(self):
        charge = _require_finite("charge", self.charge)
        strain = _require_finite("actuation_strain", self.actuation_strain)
        if charge < 0.0:
            raise ValueError("charge must be non-negative in a single-supply network")
        if strain < 0.0:
            raise ValueError("actuation_strain must be non-negative")


def capacitance(strain: float, params: MembraneParams) -> float:
    """Capacitance of the patch at areal actuation strain ``strain``.

    The area grows by ``(1 + s)`` while incompressibility thins the
    membrane by the same factor, so ``C = C_ref * (1 + s)**2``.
    """
    strain = _require_finite("strain", strain)
    if strain < 0.0:
        raise ValueError(f"strain must be non-negative, got {strain!r}")
    return params.reference_capacitance * (1.0 + strain) ** 2


def quadratic_strain_coefficient(params: MembraneParams) -> float:
    """Small-signal coefficient ``k`` of the linearized response
    ``s_eq(v) = k * v**2``, from the second-order expansion of the
    stress balance at zero voltage."""
    lam = params.pre_stretch
    k_es = params.permittivity / params.unstrained_thickness**2
    return k_es * lam**2 / (params.shear_modulus * (1.0 + 2.0 * lam**-6))


def _balance_terms(params: MembraneParams, voltage: float):
    """Return (balance callable, pre-stress, electrostatic coefficient).

    The balance is the equibiaxial neo-Hookean stress minus the
    pre-stress and the Maxwell stress ``eps * (v * lam**2 / d0)**2``;
    its first zero above the pre-stretch is the stable equilibrium.
    """
    mu = params.shear_modulus
    pre = params.prestress
    k_es = params.permittivity * (voltage / params.unstrained_thickness) ** 2

    def balance(lam):
        lam2 = lam * lam
        return mu * (lam2 - 1.0 / (lam2 * lam2)) - pre - k_es * lam2 * lam2

    return balance, pre, k_es


def equilibrium_strain(
    voltage: float,
    params: MembraneParams,
    *,
    s_max: float = DEFAULT_MAX_STRAIN,
    linearized: bool = False,
    clamp: bool = False,
) -> float:
    """Steady-state areal actuation strain at the given voltage.

    Solves the in-plane stress balance by bracketing the first zero
    above the pre-stretch and polishing it with a bracketed root
    finder.  The result is clamped at ``s_max`` when the equilibrium
    lies beyond the strain cap.  With ``linearized=True`` the quadratic
    small-signal law is returned instead (documented mode, accurate to
    a few per cent well below the pull-in voltage).

    Raises :class:`PullInError` when no equilibrium exists at all,
    unless ``clamp=True``, in which case ``s_max`` is returned; the
    dynamics use the clamping form.
    """
    voltage = _require_finite("voltage", voltage)
    if voltage < 0.0:
        raise ValueError(f"voltage must be non-negative, got {voltage!r}")
    s_max = _require_finite("s_max", s_max)
    if s_max <= 0.0:
        raise ValueError("s_max must be positive")
    if linearized:
        return min(quadratic_strain_coefficient(params) * voltage * voltage, s_max)
    if voltage == 0.0:
        return 0.0

    lam_pre = params.pre_stretch
    balance, _, k_es = _balance_terms(params, voltage)
    lam_cap = lam_pre * math.sqrt(1.0 + s_max)
    grid = np.linspace(lam_pre, lam_cap, _SCAN_POINTS)
    values = balance(grid)
    positive = np.nonzero(values > 0.0)[0]
    if positive.size:
        # balance(lam_pre) < 0 for any positive voltage, so the first
        # positive sample brackets the stable root from above.
        i = int(positive[0])
        lam = brentq(balance, grid[i - 1], grid[i], xtol=1e-15, rtol=1e-14)
        return (lam / lam_pre) ** 2 - 1.0

    # No equilibrium below the cap.  It may still exist beyond it (then
    # the result is clamped), or nowhere at all (pull-in).
    lam_cross = math.sqrt(params.shear_modulus / k_es)
    lam_top = max(1.5 * lam_cap, 2.0 * lam_cross)
    if lam_top > lam_cap:
        extended = np.geomspace(lam_cap, lam_top, 512)
        if np.any(balance(extended) > 0.0):
            return s_max
    if clamp:
        return s_max
    raise PullInError(voltage, s_max)


def pull_in_voltage(params: MembraneParams, s_max: float = DEFAULT_MAX_STRAIN) -> float:
    """Largest voltage for which a membrane equilibrium still exists.

    Located by bisection on the existence predicate of
    :func:`equilibrium_strain`; converges to machine precision and is
    fully deterministic.
    """

    def has_equilibrium(v: float) -> bool:
        try:
            equilibrium_strain(v, params, s_max=s_max)
        except PullInError:
            return False
        return True

    hi = params.unstrained_thickness / params.pre_stretch * math.sqrt(
        params.shear_modulus / params.permittivity
    )
    lo = 0.0
    for _ in range(64):
        if not has_equilibrium(hi):
            break
        lo = hi
        hi *= 2.0
    else:
        raise RuntimeError("pull-in search did not terminate")
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if has_equilibrium(mid):
            lo = mid
        else:
            hi = mid
    return lo


def strain_rate(
    strain: float,
    voltage: float,
    params: MembraneParams,
    *,
    s_max: float = DEFAULT_MAX_STRAIN,
) -> float:
    """First-order viscoelastic relaxation rate toward the equilibrium
    strain: ``(s_eq(v) - s) / tau``.  Uses the clamped equilibrium so
    it never raises beyond pull-in."""
    strain = _require_finite("strain", strain)
    if strain < 0.0:
        raise ValueError(f"strain must be non-negative, got {strain!r}")
    target = equilibrium_strain(voltage, params, s_max=s_max, clamp=True)
    return (target - strain) / params.viscoelastic_time_constant


def _expit(x: float) -> float:
    # overflow-safe logistic
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def des_resistance(strain: float, curve: DesCurve) -> float:
    """Switch resistance at the coupled actuator's areal strain.

    log10(R) runs from log10(r_off) down to log10(r_on) through a
    logistic centred at the threshold strain; monotone non-increasing
    and continuously differentiable.
    """
    strain = _require_finite("strain", strain)
    if strain < 0.0:
        raise ValueError(f"strain must be non-negative, got {strain!r}")
    frac = _expit(curve.steepness * (strain - curve.threshold_actuation))
    log_r = math.log10(curve.r_off) + (
        math.log10(curve.r_on) - math.log10(curve.r_off)
    ) * frac
    return 10.0**log_r


def inverter_static_output(
    v_in: float,
    r_s: float,
    v_supply: float,
    curve: DesCurve,
    params: MembraneParams,
    *,
    s_max: float = DEFAULT_MAX_STRAIN,
) -> float:
    """Steady-state output of one inverter stage.

    The input voltage sets the coupled actuator's equilibrium strain,
    which sets the switch resistance; the output is the resistive
    divider ``v_supply * R_sw / (R_sw + r_s)``.  Static verification
    only; the dynamics never call this.  Pull-in propagates.
    """
    v_in = _require_finite("v_in", v_in)
    r_s = _require_finite("r_s", r_s)
    v_supply = _require_finite("v_supply", v_supply)
    if v_in < 0.0 or v_supply < 0.0:
        raise ValueError("voltages must be non-negative")
    if r_s <= 0.0:
        raise ValueError("r_s must be positive")
    s_eq = equilibrium_strain(v_in, params, s_max=s_max)
    r_sw = des_resistance(s_eq, curve)
    return v_supply * r_sw / (r_sw + r_s)
