import numpy as np
import pytest

from pointspec.secular import Scheme, bare_coupling, phi, prepare_point_spectrum
from pointspec.solver import (
    STATUS_NODAL,
    STATUS_SHIFTED,
    solve_ground,
    solve_level,
    solve_spectrum,
)


def base_energies(ps):
    return [lv.energy for lv in ps.levels]


def assert_interlacing(ps, solved):
    base = base_energies(ps)
    for p in solved:
        if p.status == STATUS_NODAL:
            assert p.energy_star == base[p.index]
        elif p.index == 0:
            assert p.energy_star < base[0]
        else:
            assert base[p.index - 1] < p.energy_star < base[p.index]


def test_interval_interlacing(interval_ps, interval_solved):
    assert len(interval_solved) == 9
    assert_interlacing(interval_ps, interval_solved)
    stars = [p.energy_star for p in interval_solved]
    assert all(a < b for a, b in zip(stars, stars[1:]))


def test_residual_contract(interval_solved):
    assert all(p.residual <= 1e-10 for p in interval_solved)


def test_nodal_levels_unchanged(interval_nodal_ps, scheme):
    solved = solve_spectrum(interval_nodal_ps, scheme, 6, tol=1e-10)
    by_index = {p.index: p for p in solved}
    # even sine modes vanish at the midpoint: energies 4, 16, 36 stay put
    for k, energy in [(1, 4.0), (3, 16.0), (5, 36.0)]:
        assert by_index[k].status == STATUS_NODAL
        assert by_index[k].energy_star == energy
    for k in (0, 2, 4, 6):
        assert by_index[k].status == STATUS_SHIFTED


def test_solve_level_validates_args(interval_ps, scheme):
    with pytest.raises(ValueError):
        solve_level(0, interval_ps, scheme)
    with pytest.raises(ValueError):
        solve_level(1, interval_ps, scheme, tol=-1.0)


def test_solve_level_matches_spectrum(interval_ps, scheme, interval_solved):
    p3 = solve_level(3, interval_ps, scheme, tol=1e-10)
    assert p3.energy_star == interval_solved[3].energy_star


def test_level1_against_oracle(interval_model, scheme, interval_solved):
    N = 2048
    ps = prepare_point_spectrum(interval_model, [1.0], 3.6 * (N + 4) ** 2)
    alpha = bare_coupling(N, ps, scheme)
    v = ps.modes.values_at(np.array([[1.0]]))[:N, 0]
    H = np.diag(ps.raw_energies[:N]) - alpha * np.outer(v, v)
    eig = np.linalg.eigvalsh(H)
    # deviation is the renormalization tail, well under the local gap
    assert abs(eig[1] - interval_solved[1].energy_star) < 1e-7


def test_ground_below_first_level(rect_ps, scheme):
    g = solve_ground(rect_ps, scheme, tol=1e-10)
    assert g is not None and g.index == 0
    assert g.energy_star < rect_ps.levels[0].energy


def test_ground_deepens_with_coupling(interval_ps):
    g1 = solve_ground(interval_ps, Scheme(1.0, 1.0))
    g2 = solve_ground(interval_ps, Scheme(2.0, 1.0))
    assert g2.energy_star < g1.energy_star


def test_weak_coupling_approaches_base(interval_ps):
    base = base_energies(interval_ps)
    prev = None
    for alpha in [1.0, 0.3, 0.1]:
        s = solve_spectrum(interval_ps, Scheme(alpha, 1.0), 3, tol=1e-10)
        gapk = abs(s[1].energy_star - base[1])
        if prev is not None:
            assert gapk < prev
        prev = gapk


def test_1d_absence_reported(interval_ps):
    # Strongly repulsive-leaning scheme: no root below the spectrum.
    assert solve_ground(interval_ps, Scheme(-0.2, 1.0)) is None
    solved = solve_spectrum(interval_ps, Scheme(-0.2, 1.0), 4, tol=1e-10)
    assert [p.index for p in solved] == [1, 2, 3, 4]
    assert_interlacing(interval_ps, solved)


def test_zero_weight_levels_transparent(interval_nodal_ps, scheme):
    # With the center at the midpoint the ground search only sees odd modes.
    g = solve_ground(interval_nodal_ps, scheme)
    assert g.index == 0
    pv = phi(g.energy_star, interval_nodal_ps, scheme)
    assert abs(pv.value) < 1e-9


def test_torus_degenerate_statuses(torus_ps, scheme):
    solved = solve_spectrum(torus_ps, scheme, 5, tol=1e-10)
    assert solved[0].energy_star < 0  # ground below E_0 = 0
    for p in solved:
        assert p.status == STATUS_SHIFTED  # torus weights never vanish
        assert p.unchanged_copies == p.multiplicity - 1
    mult = [p.multiplicity for p in solved[:3]]
    assert mult == [1, 4, 4]


def test_determinism(interval_ps, scheme):
    s1 = solve_spectrum(interval_ps, scheme, 6, tol=1e-10)
    s2 = solve_spectrum(interval_ps, scheme, 6, tol=1e-10)
    assert [p.energy_star for p in s1] == [p.energy_star for p in s2]
    assert [p.bracket for p in s1] == [p.bracket for p in s2]


def test_generic_point_sweep(interval_model, scheme):
    rng = np.random.default_rng(11)
    for _ in range(4):
        a = float(rng.uniform(0.3, np.pi - 0.3))
        ps = prepare_point_spectrum(interval_model, [a], 600.0)
        solved = solve_spectrum(ps, scheme, 5, tol=1e-10)
        assert_interlacing(ps, solved)


def test_deep_search_extends_enumeration(interval_model):
    # Scheme tuned near the 1D existence threshold; the root sits far below
    # the spectrum and the solver must enlarge its enumeration on the fly.
    ps = prepare_point_spectrum(interval_model, [1.0], 500.0)
    w = ps.raw_weights
    en = ps.raw_energies
    limit = float(np.sum(w / (en + 1.0))) + ps.tails.moment(2, ps.n_modes)[0]
    sch = Scheme(alpha_R=-1.0 / (limit - 0.004), mu_sq=1.0)
    g = solve_ground(ps, sch, tol=1e-8)
    assert g is not None
    assert g.energy_star < -200.0


def test_box_3d_smoke(box_model, scheme):
    ps = prepare_point_spectrum(box_model, [0.41, 0.53, 0.67], 600.0)
    solved = solve_spectrum(ps, scheme, 3, tol=1e-9)
    base = base_energies(ps)
    assert solved[0].energy_star < base[0]
    for p in solved[1:]:
        assert base[p.index - 1] < p.energy_star < base[p.index]


def test_torus_3d_smoke(scheme):
    from pointspec.models import make_model

    t3 = make_model("torus-3D", [2 * np.pi, 2 * np.pi, np.pi])
    ps = prepare_point_spectrum(t3, [1.0, 0.5, 0.3], 30.0)
    solved = solve_spectrum(ps, scheme, 2, tol=1e-9)
    assert solved[0].energy_star < 0
    assert [p.multiplicity for p in solved] == [1, 4, 4]
