import numpy as np
import pytest

from pointspec.errors import PrecisionError
from pointspec.secular import Scheme, prepare_point_spectrum
from pointspec.solver import solve_spectrum
from pointspec.verify import (
    base_projection_residuals,
    completeness_reconstruct,
    gram_mode_space,
    gram_quadrature,
    heat_kernel_check,
    laplace_moment,
    oracle_diagonalize,
    residue_check,
    run_verification,
    scheme_invariance_check,
    sherman_morrison_check,
    stock_test_functions,
    truncated_roots_vs_oracle,
)
from pointspec.wavefunction import eigenfunction, offset_grid


@pytest.fixture(scope="module")
def interval_eigfns(interval_ps, interval_solved):
    grid = offset_grid(interval_ps.model, 4096, avoid=interval_ps.a)
    return [
        eigenfunction(p, grid, interval_ps, precision_target=5e-7)
        for p in interval_solved
    ]


def test_gram_mode_space_diag_identity(interval_solved, interval_ps):
    rep = gram_mode_space(interval_solved, interval_ps)
    assert rep.max_diag_dev < 1e-12
    assert rep.max_offdiag <= max(rep.offdiag_bound, 1e-13)
    assert rep.passed


def test_gram_mode_space_nodal_blocks(interval_nodal_ps, scheme):
    solved = solve_spectrum(interval_nodal_ps, scheme, 5, tol=1e-10)
    rep = gram_mode_space(solved, interval_nodal_ps)
    assert rep.passed
    # nodal-shifted couplings vanish with the nodal weight
    assert rep.max_offdiag < 1e-12


def test_gram_quadrature_interval(interval_eigfns):
    rep = gram_quadrature(interval_eigfns[:6])
    assert rep.max_offdiag < 1e-6
    assert rep.max_diag_dev < 1e-6
    assert rep.passed


def test_gram_methods_agree(interval_eigfns, interval_solved, interval_ps):
    quad = gram_quadrature(interval_eigfns[:6])
    mode = gram_mode_space(interval_solved[:6], interval_ps)
    # quadrature entries agree with mode-space zeros within the certificates
    assert quad.max_offdiag <= quad.quad_estimate + mode.offdiag_bound + 1e-9


def test_gram_quadrature_deterministic(interval_eigfns):
    a = gram_quadrature(interval_eigfns[:4])
    b = gram_quadrature(interval_eigfns[:4])
    assert np.array_equal(a.entries, b.entries)


def test_gram_quadrature_coarse_grid_rejected(interval_ps, interval_solved):
    grid = offset_grid(interval_ps.model, 24, avoid=interval_ps.a)
    with pytest.raises(PrecisionError):
        efs = [
            eigenfunction(p, grid, interval_ps, precision_target=5e-7)
            for p in interval_solved[:4]
        ]
        gram_quadrature(efs)


def test_completeness_own_basis(interval_eigfns):
    f = np.nan_to_num(interval_eigfns[3].values)
    rep = completeness_reconstruct(f, interval_eigfns, 9,
                                   function_id="synthesized-psi3", floor_from=3)
    assert rep.passed
    assert all(r <= rep.quad_floor for r in rep.residuals[3:])


def test_completeness_monotone_and_phi_comparison(interval_ps, interval_eigfns,
                                                  interval_solved):
    grid = interval_eigfns[0].grid
    stock = stock_test_functions(interval_ps.model, interval_ps.a, grid,
                                 interval_ps, interval_solved)
    f = stock["bump"]
    rep = completeness_reconstruct(f, interval_eigfns, 9, function_id="bump")
    assert rep.monotone
    phi_res = base_projection_residuals(f, interval_ps, grid, 9)
    assert len(phi_res) == 9
    # both curves decay; the perturbed basis stays within 10x of the base one
    assert rep.residuals[-1] <= 10.0 * phi_res[-1] + 1e-6


def test_oracle_interlacing_statuses(interval_nodal_ps, scheme):
    solved = solve_spectrum(interval_nodal_ps, scheme, 5, tol=1e-10)
    res = oracle_diagonalize(24, interval_nodal_ps, scheme, solved)
    assert res.statuses_match


def test_oracle_deviations_shrink(interval_model, scheme):
    ps = prepare_point_spectrum(interval_model, [1.0], 3.4 * 530**2)
    solved = solve_spectrum(ps, scheme, 6, tol=1e-10)
    devs = [
        oracle_diagonalize(N, ps, scheme, solved).max_deviation
        for N in (128, 256, 512)
    ]
    assert devs[0] > devs[1] > devs[2]


def test_truncated_roots_identity(interval_model, scheme):
    ps = prepare_point_spectrum(interval_model, [1.0], 3.4 * 260**2)
    res = truncated_roots_vs_oracle(256, ps, scheme, 6)
    assert res["passed"]
    assert res["max_rel_dev"] < 1e-10


def test_sherman_morrison_random_triples(interval_ps, scheme):
    res = sherman_morrison_check(interval_ps, scheme, N=20, n_triples=6)
    assert res["passed"]
    assert res["max_rel_dev"] <= 1e-12


def test_residue_extraction(interval_ps, scheme, interval_solved):
    res = residue_check(interval_solved[2], [0.45], [2.3], interval_ps, scheme)
    assert res["passed"]
    assert res["deviation"] <= 1e-6


def test_scheme_invariance_end_to_end(interval_ps, scheme):
    res = scheme_invariance_check(interval_ps, scheme, 4.0, 6, tol=1e-10)
    assert res["passed"]
    assert res["max_level_dev"] <= 1e-9


def test_heat_kernel_report(interval_ps):
    rep = heat_kernel_check(interval_ps, np.geomspace(0.05, 10.0, 25))
    assert rep["passed"]
    assert rep["max_theta_dev"] < 1e-10


def test_heat_kernel_needs_enough_levels(interval_ps):
    with pytest.raises(PrecisionError):
        heat_kernel_check(interval_ps, [1e-4])


def test_laplace_moment_dual_evaluation(rect_ps):
    res = laplace_moment(1, 2.0, rect_ps)
    assert res["difference"] <= 1e-6 * abs(res["direct"])


def test_laplace_moment_lowest_level_dominates(interval_ps):
    k = 40
    res = laplace_moment(k, 1.0, interval_ps)
    w0 = interval_ps.raw_weights[0]
    e0 = interval_ps.raw_energies[0]
    assert res["direct"] == pytest.approx(w0 / (e0 + 1.0) ** k, rel=1e-8)


def test_laplace_moment_monotone_in_shift(interval_ps):
    vals = [laplace_moment(2, s, interval_ps)["direct"] for s in (1.0, 4.0, 16.0)]
    assert vals[0] > vals[1] > vals[2]


def test_run_verification_exit_semantics(interval_model, scheme):
    ps = prepare_point_spectrum(interval_model, [1.0], 1200.0)
    rep = run_verification(ps, scheme, 4, 1e-10, ["scheme-invariance", "krein"])
    assert rep.passed
    payload = rep.to_json()
    assert '"passed": true' in payload


def test_quadrature_permutation_invariant(interval_eigfns):
    # exactly rounded accumulation: reordering the samples cannot change it
    grid = interval_eigfns[0].grid
    v = np.nan_to_num(interval_eigfns[0].values) * np.nan_to_num(
        interval_eigfns[1].values
    )
    rng = np.random.default_rng(0)
    perm = rng.permutation(v.size)
    assert grid.integrate(v) == grid.integrate(v.ravel()[perm])


def test_oracle_projector_limit(interval_ps):
    # 1/alpha(N) tuned to zero: the oracle switches to the compression onto
    # the complement of the interaction vector, whose eigenvalues are the
    # zeros of the bare weighted sum.
    from pointspec.verify import oracle_hamiltonian

    w = interval_ps.raw_weights
    en = interval_ps.raw_energies
    partial = float(np.sum(w[:3] / (en[:3] + 1.0)))
    sch = Scheme(alpha_R=-1.0 / partial, mu_sq=1.0)
    H = oracle_hamiltonian(3, interval_ps, sch)
    eig = np.linalg.eigvalsh(H)
    assert eig.shape == (2,)
    for E in eig:
        assert abs(float(np.sum(w[:3] / (en[:3] - E)))) < 1e-12


def test_oracle_torus_degenerate_copies(torus_ps, scheme):
    # A collapsed level of multiplicity m leaves m-1 oracle eigenvalues
    # exactly at the base energy next to the single shifted root.
    solved = solve_spectrum(torus_ps, scheme, 4, tol=1e-10)
    res = oracle_diagonalize(min(torus_ps.n_modes, 280), torus_ps, scheme, solved)
    assert res.statuses_match
    eig = res.eigenvalues
    assert np.sum(np.abs(eig - 1.0) < 1e-9) == 3
    assert np.sum(np.abs(eig - 2.0) < 1e-9) == 3
