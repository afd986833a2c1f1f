import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import solve_ivp

from deasim import electromech as em

PARAMS = em.MembraneParams()
CURVE = em.DesCurve()


def bisect_equilibrium(voltage, params, s_max=3.0, rel_tol=1e-12):
    """Independent oracle: plain bisection on the stress balance written
    out from first principles.  The stretch is bisected to 1e-12
    relative so the derived strain is good to better than 1e-9 even for
    small responses."""
    mu = params.shear_modulus
    lam_p = params.pre_stretch
    eps = params.relative_permittivity * params.vacuum_permittivity
    pre = mu * (lam_p**2 - lam_p**-4)
    k_es = eps * (voltage / params.unstrained_thickness) ** 2

    def balance(lam):
        return mu * (lam**2 - lam**-4) - pre - k_es * lam**4

    lo = lam_p
    hi = lam_p
    step = 1e-4 * lam_p
    while balance(hi) <= 0.0:
        hi += step
        if hi > lam_p * math.sqrt(1.0 + s_max):
            raise AssertionError("oracle found no equilibrium")
    lo = hi - step
    while (hi - lo) / hi > rel_tol:
        mid = 0.5 * (lo + hi)
        if balance(mid) > 0.0:
            hi = mid
        else:
            lo = mid
    lam = 0.5 * (lo + hi)
    return (lam / lam_p) ** 2 - 1.0


class TestCapacitance:
    def test_identity_at_rest(self):
        p = em.MembraneParams(reference_capacitance=100e-12)
        assert em.capacitance(0.0, p) == 100e-12

    def test_area_doubled_quadruples(self):
        p = em.MembraneParams(reference_capacitance=100e-12)
        assert em.capacitance(1.0, p) == pytest.approx(400e-12, rel=1e-15)

    def test_reference_from_plate_formula(self):
        # independent plate-capacitor arithmetic as the oracle
        area = 4e-4
        eps = PARAMS.relative_permittivity * PARAMS.vacuum_permittivity
        thickness = PARAMS.unstrained_thickness / PARAMS.pre_stretch**2
        expected = eps * area / thickness
        built = em.MembraneParams.from_geometry(area)
        assert built.reference_capacitance == pytest.approx(expected, rel=1e-12)
        # the shipped default uses exactly this geometry
        assert PARAMS.reference_capacitance == pytest.approx(expected, rel=1e-12)

    def test_rejects_bad_strain(self):
        with pytest.raises(ValueError):
            em.capacitance(-0.1, PARAMS)
        with pytest.raises(ValueError):
            em.capacitance(float("nan"), PARAMS)
        with pytest.raises(ValueError):
            em.capacitance(float("inf"), PARAMS)

    @given(
        st.floats(min_value=0.0, max_value=3.0),
        st.floats(min_value=1e-6, max_value=3.0),
    )
    def test_strictly_increasing(self, s, ds):
        assert em.capacitance(s + ds, PARAMS) > em.capacitance(s, PARAMS)


class TestEquilibriumStrain:
    def test_zero_voltage_is_exactly_zero(self):
        assert em.equilibrium_strain(0.0, PARAMS) == 0.0

    def test_linearized_quadratic_ratio(self):
        s1 = em.equilibrium_strain(200.0, PARAMS, linearized=True)
        s2 = em.equilibrium_strain(400.0, PARAMS, linearized=True)
        assert s2 == pytest.approx(4.0 * s1, rel=1e-12)

    @pytest.mark.parametrize("voltage", [500.0, 1500.0, 3000.0, 4000.0])
    def test_against_bisection_oracle(self, voltage):
        expected = bisect_equilibrium(voltage, PARAMS)
        assert em.equilibrium_strain(voltage, PARAMS) == pytest.approx(
            expected, rel=1e-7
        )

    def test_oracle_on_other_membranes(self):
        stiff = em.MembraneParams(shear_modulus=4e5, pre_stretch=2.0)
        expected = bisect_equilibrium(2500.0, stiff)
        assert em.equilibrium_strain(2500.0, stiff) == pytest.approx(
            expected, rel=1e-7
        )

    def test_monotone_in_voltage(self):
        voltages = np.linspace(0.0, 4200.0, 60)
        strains = [em.equilibrium_strain(v, PARAMS) for v in voltages]
        assert all(b >= a for a, b in zip(strains, strains[1:]))
        assert all(b > a for a, b in zip(strains[:40], strains[1:41]))

    def test_pull_in_is_typed_failure(self):
        v_pi = em.pull_in_voltage(PARAMS)
        assert em.equilibrium_strain(0.999 * v_pi, PARAMS) > 0.0
        with pytest.raises(em.PullInError):
            em.equilibrium_strain(1.01 * v_pi, PARAMS)
        assert em.equilibrium_strain(1.01 * v_pi, PARAMS, clamp=True) == 3.0

    def test_clamp_when_root_beyond_cap(self):
        # a small cap turns a perfectly stable equilibrium into a clamp
        v = 3000.0
        full = em.equilibrium_strain(v, PARAMS)
        assert full > 0.05
        assert em.equilibrium_strain(v, PARAMS, s_max=0.05) == 0.05

    def test_linearized_matches_small_signal(self):
        v_pi = em.pull_in_voltage(PARAMS)
        for frac in (0.05, 0.1, 0.2, 0.3):
            v = frac * v_pi
            exact = em.equilibrium_strain(v, PARAMS)
            approx = em.equilibrium_strain(v, PARAMS, linearized=True)
            assert abs(approx - exact) / exact < 0.05

    def test_input_validation(self):
        with pytest.raises(ValueError):
            em.equilibrium_strain(-1.0, PARAMS)
        with pytest.raises(ValueError):
            em.equilibrium_strain(float("nan"), PARAMS)


class TestStrainRate:
    def test_fixed_point(self):
        v = 2500.0
        s_eq = em.equilibrium_strain(v, PARAMS)
        assert em.strain_rate(s_eq, v, PARAMS) == 0.0

    def test_relaxation_arithmetic(self):
        p = em.MembraneParams(viscoelastic_time_constant=0.5)
        assert em.strain_rate(0.2, 0.0, p) == pytest.approx(-0.4, rel=1e-12)

    def test_step_response_matches_exponential(self):
        # closed-form exponential as the integrator oracle, with the
        # voltage frozen
        v = 3000.0
        s_eq = em.equilibrium_strain(v, PARAMS)
        tau = PARAMS.viscoelastic_time_constant
        sol = solve_ivp(
            lambda t, y: [em.strain_rate(y[0], v, PARAMS)],
            (0.0, 2.0),
            [0.0],
            rtol=1e-9,
            atol=1e-12,
            dense_output=True,
        )
        ts = np.linspace(0.0, 2.0, 41)
        simulated = sol.sol(ts)[0]
        expected = s_eq * (1.0 - np.exp(-ts / tau))
        assert np.max(np.abs(simulated - expected)) < 1e-6 * s_eq

    @given(
        st.floats(min_value=0.0, max_value=2.9),
        st.floats(min_value=0.0, max_value=4000.0),
    )
    def test_contracts_toward_equilibrium(self, s, v):
        rate = em.strain_rate(s, v, PARAMS)
        target = em.equilibrium_strain(v, PARAMS, clamp=True)
        assert math.copysign(1.0, rate) == math.copysign(1.0, target - s) or (
            rate == 0.0 and target == s
        )


class TestDesResistance:
    def test_unstrained_switch_blocks(self):
        # the untouched switch must stay an insulator
        assert em.des_resistance(0.0, CURVE) >= 0.99 * 1e12

    def test_actuated_switch_conducts(self):
        s_on = em.equilibrium_strain(3000.0, PARAMS)
        r_on = em.des_resistance(s_on, CURVE)
        assert 1e6 <= r_on <= 5e6

    def test_midpoint_is_geometric_mean(self):
        r_mid = em.des_resistance(CURVE.threshold_actuation, CURVE)
        assert r_mid == pytest.approx(math.sqrt(CURVE.r_off * CURVE.r_on), rel=1e-12)

    def test_endpoints_within_one_percent(self):
        assert em.des_resistance(0.0, CURVE) >= 0.99 * CURVE.r_off
        assert em.des_resistance(3.0, CURVE) <= 1.01 * CURVE.r_on

    @given(
        st.floats(min_value=0.0, max_value=3.0),
        st.floats(min_value=0.0, max_value=3.0),
    )
    def test_monotone_non_increasing(self, s1, s2):
        lo, hi = sorted((s1, s2))
        assert em.des_resistance(hi, CURVE) <= em.des_resistance(lo, CURVE)

    def test_curve_validation(self):
        with pytest.raises(ValueError):
            em.DesCurve(r_off=1e6, r_on=1e12)
        with pytest.raises(ValueError):
            em.DesCurve(r_off=1e7, r_on=1e6)  # ratio below 1e5
        with pytest.raises(ValueError):
            em.DesCurve(steepness=-1.0)


class TestInverterStatics:
    def test_high_state_divider(self):
        out = em.inverter_static_output(0.0, 1e8, 3000.0, CURVE, PARAMS)
        r_off = em.des_resistance(0.0, CURVE)
        assert out == pytest.approx(3000.0 * r_off / (r_off + 1e8), rel=1e-12)
        assert abs(out - 2999.7) < 0.5

    def test_low_state_divider(self):
        out = em.inverter_static_output(3000.0, 1e8, 3000.0, CURVE, PARAMS)
        assert out == pytest.approx(3000.0 * 2e6 / (2e6 + 1e8), rel=1e-3)

    def test_low_state_below_signal_threshold(self):
        out = em.inverter_static_output(3000.0, 1e8, 3000.0, CURVE, PARAMS)
        assert out < 1500.0

    def test_inverting_monotone(self):
        outs = [
            em.inverter_static_output(v, 1e8, 3000.0, CURVE, PARAMS)
            for v in np.linspace(0.0, 3500.0, 30)
        ]
        assert all(b <= a for a, b in zip(outs, outs[1:]))

    def test_propagates_pull_in(self):
        v_pi = em.pull_in_voltage(PARAMS)
        with pytest.raises(em.PullInError):
            em.inverter_static_output(1.05 * v_pi, 1e8, 3000.0, CURVE, PARAMS)

    def test_validation(self):
        with pytest.raises(ValueError):
            em.inverter_static_output(-1.0, 1e8, 3000.0, CURVE, PARAMS)
        with pytest.raises(ValueError):
            em.inverter_static_output(0.0, 0.0, 3000.0, CURVE, PARAMS)


class TestTypes:
    def test_membrane_invariants(self):
        with pytest.raises(ValueError):
            em.MembraneParams(pre_stretch=0.8)
        with pytest.raises(ValueError):
            em.MembraneParams(shear_modulus=-1.0)
        with pytest.raises(ValueError):
            em.MembraneParams(unstrained_thickness=0.0)

    def test_effective_thickness(self):
        p = em.MembraneParams(unstrained_thickness=6e-4, pre_stretch=2.0)
        assert p.effective_thickness == pytest.approx(1.5e-4, rel=1e-15)

    def test_actuator_state_bounds(self):
        em.ActuatorState(charge=1e-9, actuation_strain=0.1)
        with pytest.raises(ValueError):
            em.ActuatorState(charge=-1e-9)
        with pytest.raises(ValueError):
            em.ActuatorState(actuation_strain=-0.1)
