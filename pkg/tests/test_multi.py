import numpy as np
import pytest

from pointspec.secular import Scheme, prepare_point_spectrum, scheme_for_ground_energy
from pointspec.solver import (
    STATUS_SHIFTED,
    MultiCenterProblem,
    prepare_multi,
    solve_spectrum,
    solve_spectrum_multi,
)
from pointspec.wavefunction import green0


def test_coincident_centers_rejected(interval_model, scheme):
    with pytest.raises(ValueError):
        MultiCenterProblem(model=interval_model, centers=[[1.0], [1.0]],
                           schemes=[scheme, scheme])


def test_symmetric_pair_interval(interval_model, scheme):
    prob = prepare_multi(interval_model, [[1.0], [np.pi - 1.0]],
                         [scheme, scheme], 800.0)
    found = solve_spectrum_multi(prob, 4, tol=1e-9)
    assert len(found) >= 5
    inv_sqrt2 = 1.0 / np.sqrt(2.0)
    for m in found:
        np.testing.assert_allclose(np.abs(m.coefficients),
                                   [inv_sqrt2, inv_sqrt2], atol=1e-9)
        assert m.residual < 1e-9
    # alternation between symmetric and antisymmetric null vectors
    signs = [np.sign(m.coefficients[0] * m.coefficients[1]) for m in found]
    assert signs[0] > 0 and signs[1] < 0


def test_k1_reduces_to_single_center(interval_model, scheme):
    prob = prepare_multi(interval_model, [[1.0]], [scheme], 800.0)
    found = solve_spectrum_multi(prob, 3, tol=1e-9)
    single = solve_spectrum(prepare_point_spectrum(interval_model, [1.0], 800.0),
                            scheme, 3, tol=1e-10)
    singles = [p.energy_star for p in single if p.status == STATUS_SHIFTED]
    assert [m.energy_star for m in found] == singles
    assert all(m.coefficients.tolist() == [1.0] for m in found)


def test_far_separated_pair_tracks_single_center():
    # Deep bound state on a large torus: the off-diagonal Green's function
    # between the centers is exponentially small and bounds the splitting.
    model_lengths = [4 * np.pi, 4 * np.pi]
    from pointspec.models import make_model

    torus = make_model("torus-2D", model_lengths)
    a1 = [1.0, 1.0]
    a2 = [1.0 + 2 * np.pi, 1.0 + 2 * np.pi]
    base = prepare_point_spectrum(torus, a1, 40.0)
    sch = scheme_for_ground_energy(base, -4.0, 1.0)
    prob = prepare_multi(torus, [a1, a2], [sch, sch], 40.0)
    found = solve_spectrum_multi(prob, 2, tol=1e-10)
    ground_pair = [m for m in found if m.energy_star < -1.0]
    assert len(ground_pair) == 2
    single = -4.0  # scheme is pinned there by construction
    off = abs(green0(a1, a2, single, base, precision_target=1e-12).value)
    # splitting of the pair around the single-center root, first order in
    # the off-diagonal coupling
    dphi = [p for p in solve_spectrum(base, sch, 1, 1e-10)][0].phi_derivative
    allowed = 4.0 * off / dphi
    for m in ground_pair:
        assert abs(m.energy_star - single) <= allowed
    assert off < 1e-4


def test_multi_determinism(interval_model, scheme):
    prob1 = prepare_multi(interval_model, [[0.8], [2.0]], [scheme, scheme], 600.0)
    prob2 = prepare_multi(interval_model, [[0.8], [2.0]], [scheme, scheme], 600.0)
    f1 = solve_spectrum_multi(prob1, 3, tol=1e-9)
    f2 = solve_spectrum_multi(prob2, 3, tol=1e-9)
    assert [m.energy_star for m in f1] == [m.energy_star for m in f2]
