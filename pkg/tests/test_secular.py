import math

import numpy as np
import pytest

from pointspec.errors import MarginError, PoleProximityError
from pointspec.secular import (
    Scheme,
    bare_coupling,
    change_scheme,
    dphi_tail_bound,
    phi,
    phi_tail_bound,
    prepare_point_spectrum,
    scheme_for_ground_energy,
)

# Frozen reference: 1 - sum_n (2/pi) sin^2(n) / (n^2 (n^2+1)), evaluated in
# closed form (Clausen-type cosine series); agrees with the 2e7-term
# partial sum below to full precision.
PHI_AT_ZERO = 0.7454743515543732

# Frozen reference: alpha(100) = 1 / (1 + sum_{n<=100} (2/pi) sin^2(n)/(n^2+1)).
ALPHA_100 = 0.7022478757482479


def test_scheme_validation():
    with pytest.raises(ValueError):
        Scheme(alpha_R=0.0, mu_sq=1.0)
    with pytest.raises(ValueError):
        Scheme(alpha_R=1.0, mu_sq=-2.0)


def test_phi_at_subtraction_point(interval_ps, scheme):
    pv = phi(-scheme.mu_sq, interval_ps, scheme)
    assert pv.value == 1.0 / scheme.alpha_R
    assert pv.tail_bound == 0.0


def test_phi_reference_value(interval_ps, scheme):
    pv = phi(0.0, interval_ps, scheme)
    assert pv.value == pytest.approx(PHI_AT_ZERO, abs=5e-15)
    # independent high-precision partial sum with elementary tail bound
    n = np.arange(1.0, 2e7)
    partial = 1.0 - float(np.sum((2 / np.pi) * np.sin(n) ** 2 / (n**2 * (n**2 + 1))))
    tail = (2 / np.pi) / (3 * (2e7 - 1) ** 3)
    assert abs(pv.value - partial) < pv.tail_bound + tail + 1e-14


def test_phi_derivative_positive_below_spectrum(interval_ps, scheme):
    for E in [-30.0, -5.0, 0.0, 0.9]:
        pv = phi(E, interval_ps, scheme)
        assert pv.derivative > 0


def test_phi_monotone_and_single_sign_change(interval_ps, scheme):
    # Phi falls strictly between consecutive nonzero-weight poles and
    # crosses zero exactly once there.
    poles = interval_ps.pole_energies()
    for lo, hi in zip(poles[:3], poles[1:4]):
        grid = np.linspace(lo + 1e-4, hi - 1e-4, 200)
        vals = [phi(E, interval_ps, scheme).value for E in grid]
        assert all(a > b for a, b in zip(vals, vals[1:]))
        signs = np.sign(vals)
        assert np.sum(signs[:-1] != signs[1:]) == 1


def test_pole_guard(interval_ps, scheme):
    with pytest.raises(PoleProximityError):
        phi(4.0 + 1e-14, interval_ps, scheme)


def test_truncation_consistency(interval_ps, scheme):
    for E in [-3.0, 0.4, 2.2, 6.5]:
        loose = phi(E, interval_ps, scheme, precision_target=1e-8)
        tight = phi(E, interval_ps, scheme, precision_target=1e-9)
        assert abs(loose.value - tight.value) <= 1e-8


def test_phi_cutoff_margin_error(interval_ps, scheme):
    with pytest.raises(MarginError):
        phi(2.0, interval_ps, scheme, cutoff=1)


def test_phi_grows_without_bound_2d(rect_model, scheme):
    vals = []
    for E in [-1e2, -1e3, -1e4]:
        ps = prepare_point_spectrum(rect_model, [0.37, 0.59], 4.0 * abs(E))
        vals.append(phi(E, ps, scheme, precision_target=1e-6).value)
    assert all(a < b for a, b in zip(vals, vals[1:]))
    assert vals[-1] > 1.0 / scheme.alpha_R + 0.5


def test_change_scheme_identity(interval_ps, scheme):
    assert change_scheme(scheme, scheme.mu_sq, interval_ps) is scheme


def test_change_scheme_pointwise_invariance(interval_ps, scheme):
    mapped = change_scheme(scheme, 4.0, interval_ps)
    for E in [-6.0, -1.0, 0.0, 2.5, 6.2]:
        p1 = phi(E, interval_ps, scheme)
        p2 = phi(E, interval_ps, mapped)
        budget = p1.tail_bound + p2.tail_bound + p1.roundoff + p2.roundoff + 1e-13
        assert abs(p1.value - p2.value) <= budget


def test_change_scheme_roundtrip(interval_ps, scheme):
    there = change_scheme(scheme, 4.0, interval_ps)
    back = change_scheme(there, 1.0, interval_ps)
    assert abs(back.alpha_R - scheme.alpha_R) < 1e-12


def test_bare_coupling_empty_sum(interval_ps, scheme):
    assert bare_coupling(0, interval_ps, scheme) == scheme.alpha_R


def test_bare_coupling_monotone(interval_ps, scheme):
    inv = [1.0 / bare_coupling(N, interval_ps, scheme) for N in range(0, 16)]
    diffs = np.diff(inv)
    assert np.all(diffs >= 0)
    assert np.sum(diffs > 0) >= 12  # nonzero weights strictly increase the flow


def test_bare_coupling_reference(interval_model, scheme):
    ps = prepare_point_spectrum(interval_model, [1.0], 3.4 * 105**2)
    assert bare_coupling(100, ps, scheme) == pytest.approx(ALPHA_100, abs=2e-15)


def test_bare_coupling_infinite_flag(interval_ps):
    # alpha_R chosen so that 1/alpha(N) crosses zero at some N.
    w = interval_ps.raw_weights
    en = interval_ps.raw_energies
    partial = float(np.sum(w[:3] / (en[:3] + 1.0)))
    sch = Scheme(alpha_R=-1.0 / partial, mu_sq=1.0)
    assert math.isinf(bare_coupling(3, interval_ps, sch))


def test_raw_tail_bound_brute_force(interval_model, scheme):
    n = np.arange(1.0, 10**7)
    w = (2 / np.pi) * np.sin(n) ** 2
    E2 = n**2
    lam = 400.0
    for E in [-1.0, 0.0, 5.0]:
        true_phi_tail = abs(
            float(np.sum((w * (E + 1.0) / ((E2 - E) * (E2 + 1.0)))[E2 > lam]))
        )
        assert true_phi_tail <= phi_tail_bound(interval_model, E, 1.0, lam)
        true_d_tail = float(np.sum((w / (E2 - E) ** 2)[E2 > lam]))
        assert true_d_tail <= dphi_tail_bound(interval_model, E, lam)


def test_raw_tail_bound_monotone(interval_model):
    bounds = [phi_tail_bound(interval_model, 0.5, 1.0, lam) for lam in [100, 200, 400]]
    assert bounds[0] > bounds[1] > bounds[2]


def test_raw_tail_bound_zero_at_subtraction_point(interval_model):
    assert phi_tail_bound(interval_model, -1.0, 1.0, 100.0) == 0.0


def test_raw_tail_margin(interval_model):
    with pytest.raises(MarginError):
        phi_tail_bound(interval_model, 50.0, 1.0, 120.0)


def test_scheme_for_ground_energy(interval_ps):
    sch = scheme_for_ground_energy(interval_ps, 0.4, 1.0)
    pv = phi(0.4, interval_ps, sch)
    assert abs(pv.value) < 1e-12


def test_corrected_value_target_and_cutoff_independent(interval_ps, scheme):
    # The tail expansion runs to its uncertainty floor, so neither the
    # precision target nor the head cutoff changes the returned value.
    ref = phi(2.3, interval_ps, scheme, precision_target=1e-11)
    for n in (8, 14, 20):
        pv = phi(2.3, interval_ps, scheme, cutoff=n, precision_target=1e-6)
        assert pv.value == ref.value
        # bound sits at the moment-uncertainty floor; any growth with a
        # larger head is floor bookkeeping, not lost accuracy
        assert pv.tail_bound <= ref.tail_bound + 1e-15
