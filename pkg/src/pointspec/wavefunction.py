"""Green's functions, perturbed eigenfunctions, and derived kernels.

Pointwise Green's function values come from two independent routes:

* the eigenfunction expansion sum phi_n(x) phi_n(y) / (E_n - E), summed
  directly in 1D with polynomial (Bernoulli) subtraction of the slowly
  converging cosine series, and

* for 2D/3D, an exact resummation of one axis: the transverse modes
  multiply the closed-form 1D Green's function of the remaining axis,
  which decays exponentially in the transverse energy as long as the two
  points are separated along the peeled axis.

Grid eigenfunctions are truncated mode sums assembled by per-axis factor
matrices (a couple of matrix products per level); their inner products are
second-order accurate in the truncation deficit, which the norm
certificate accounts for.  Pointwise eigenfunction values for residue
tests use the exact route instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from pointspec.errors import (
    DiagonalDivergenceError,
    DomainError,
    NearEigenvalueError,
    PrecisionError,
)
from pointspec.models import SpectralModel, _axis_modes, axis_factor, weyl_upper_coeffs
from pointspec.secular import PointSpectrum, Scheme, phi
from pointspec.solver import STATUS_NODAL, STATUS_SHIFTED, PerturbedLevel
from pointspec.tails import check_margin, power_tail_bound, quartic_tail

_EPS = float(np.finfo(float).eps)


# ---------------------------------------------------------------------------
# Offset tensor grids with midpoint quadrature

@dataclass(frozen=True)
class Grid:
    """Uniform tensor-product grid of cell midpoints, excluding a point.

    Midpoint quadrature on these grids integrates products of the model
    eigenfunctions essentially exactly (no Euler-Maclaurin boundary terms
    survive for sine products or periodic functions); subsampling every
    other point per axis gives an independent coarser rule for error
    estimates.
    """

    model: SpectralModel
    axes: tuple[np.ndarray, ...]
    cell: float

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(ax) for ax in self.axes)

    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def integrate(self, values: np.ndarray) -> float:
        return self.cell * math.fsum(np.asarray(values).ravel())

    def inner(self, f: np.ndarray, g: np.ndarray) -> float:
        return self.integrate(np.asarray(f) * np.asarray(g))

    def coarse_integrate(self, values: np.ndarray) -> float:
        """Same integral on the odd-index subgrid (spacing doubled)."""
        v = np.asarray(values)
        sub = v[tuple(slice(1, None, 2) for _ in range(v.ndim))]
        return self.cell * (2 ** v.ndim) * math.fsum(sub.ravel())


def offset_grid(model: SpectralModel, shape, avoid=None) -> Grid:
    """Midpoint grid with per-axis offsets keeping `avoid` off the nodes."""
    if isinstance(shape, int):
        shape = (shape,) * model.dimension
    if len(shape) != model.dimension:
        raise ValueError("grid shape must match model dimension")
    avoid_pt = model.reduce_point(avoid) if avoid is not None else None
    axes = []
    cell = 1.0
    for d, G in enumerate(shape):
        L = model.lengths[d]
        h = L / G
        offset = 0.5
        if avoid_pt is not None:
            frac = (avoid_pt[d] / h - offset) % 1.0
            dist = min(frac, 1.0 - frac)
            if dist < 0.05:
                offset = 0.75
        axes.append((np.arange(G) + offset) * h)
        cell *= h
    return Grid(model=model, axes=tuple(axes), cell=cell)


# ---------------------------------------------------------------------------
# Closed-form 1D Green's functions (stable at large |E|)

def _g1d_dirichlet(L: float, x, y, lam) -> np.ndarray:
    """Green's function of -d^2/dx^2 - lam on [0, L] with Dirichlet ends.

    Vectorized over lam.  Uses exponential-difference forms so deep
    negative energies neither overflow nor lose the |x-y| decay.
    """
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    lo, hi = (x, y) if x <= y else (y, x)
    out = np.empty_like(lam)
    neg = lam < 0
    if np.any(neg):
        kap = np.sqrt(-lam[neg])
        ea = -np.expm1(-2.0 * kap * lo)
        eb = -np.expm1(-2.0 * kap * (L - hi))
        ec = -np.expm1(-2.0 * kap * L)
        out[neg] = np.exp(-kap * (hi - lo)) * ea * eb / (2.0 * kap * ec)
    pos = lam > 0
    if np.any(pos):
        k = np.sqrt(lam[pos])
        out[pos] = np.sin(k * lo) * np.sin(k * (L - hi)) / (k * np.sin(k * L))
    zero = lam == 0
    if np.any(zero):
        out[zero] = lo * (L - hi) / L
    return out


def _g1d_torus(L: float, dist: float, lam) -> np.ndarray:
    """Green's function of -d^2/dx^2 - lam on a circle of circumference L,
    as a function of the periodic distance."""
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    d = dist
    out = np.empty_like(lam)
    neg = lam < 0
    if np.any(neg):
        kap = np.sqrt(-lam[neg])
        num = np.exp(-kap * d) * (1.0 + np.exp(-kap * (L - 2.0 * d)))
        den = 2.0 * kap * (-np.expm1(-kap * L))
        out[neg] = num / den
    pos = lam >= 0
    if np.any(pos):
        k = np.sqrt(lam[pos])
        out[pos] = np.cos(k * (L / 2.0 - d)) / (2.0 * k * np.sin(k * L / 2.0))
    return out


def green0_interval_closed(model: SpectralModel, x: float, y: float, E: float) -> float:
    """Closed-form G0 for the 1D Dirichlet interval (independent oracle)."""
    if model.kind != "interval-Dirichlet-1D":
        raise ValueError("closed form applies to the 1D interval model")
    L = model.lengths[0]
    x = float(np.atleast_1d(x)[0])
    y = float(np.atleast_1d(y)[0])
    if not (0.0 <= x <= L and 0.0 <= y <= L):
        raise DomainError("point outside the interval")
    return float(_g1d_dirichlet(L, x, y, np.array([E]))[0])


# ---------------------------------------------------------------------------
# Pointwise mode-sum Green's function

@dataclass(frozen=True)
class GreenValue:
    x: tuple
    y: tuple
    energy: float
    value: float
    cutoff: float
    tail_bound: float


def _cos_p2(phi_: np.ndarray) -> np.ndarray:
    """sum_{m>=1} cos(m phi)/m^2 on [0, 2 pi]."""
    p = np.mod(phi_, 2.0 * np.pi)
    return np.pi**2 / 6.0 - np.pi * p / 2.0 + p**2 / 4.0


def _cos_p4(phi_: np.ndarray) -> np.ndarray:
    """sum_{m>=1} cos(m phi)/m^4 on [0, 2 pi]."""
    p = np.mod(phi_, 2.0 * np.pi)
    return np.pi**4 / 90.0 - np.pi**2 * p**2 / 12.0 + np.pi * p**3 / 12.0 - p**4 / 48.0


def _green_interval_modesum(model, x, y, E, target):
    """Accelerated eigenfunction expansion on the interval.

    Two polynomial subtractions leave a remainder series decaying like
    m^-6, summed explicitly with a certified bound.
    """
    L = model.lengths[0]
    u = np.pi * x / L
    v = np.pi * y / L
    s = E * (L / np.pi) ** 2
    phid = np.array([u - v, u + v])
    M = 64
    while True:
        if M * M > 4.0 * abs(s) + 16.0:
            tail = 2.0 * abs(s) ** 2 / (5.0 * M**5) / (1.0 - abs(s) / M**2)
            if tail < target / 4.0:
                break
        M *= 2
        if M > 2**22:
            raise PrecisionError("interval mode sum cannot reach the target")
    m = np.arange(1.0, M + 1.0)
    rem = []
    for p in phid:
        terms = np.cos(m * p) * s**2 / (m**4 * (m**2 - s))
        rem.append(math.fsum(terms))
    c_minus = _cos_p2(phid[0]) + s * _cos_p4(phid[0]) + rem[0]
    c_plus = _cos_p2(phid[1]) + s * _cos_p4(phid[1]) + rem[1]
    val = (L / np.pi**2) * (c_minus - c_plus)
    return val, float(M), 2.0 * (L / np.pi**2) * tail


def _axis_separation(model, d, x, y):
    delta = abs(x[d] - y[d])
    if model.periodic:
        delta = min(delta, model.lengths[d] - delta)
    return delta


def _transverse_table(model, axes, cap):
    """(energies, factor index data) for the product of transverse axes."""
    per_axis = [_axis_modes(model, d, cap) for d in axes]
    if len(axes) == 1:
        e, j, code = per_axis[0]
        return e, [(axes[0], j, code)]
    e1, j1, c1 = per_axis[0]
    e2, j2, c2 = per_axis[1]
    ee = (e1[:, None] + e2[None, :]).ravel()
    jj1 = np.repeat(j1, len(e2))
    cc1 = np.repeat(c1, len(e2))
    jj2 = np.tile(j2, len(e1))
    cc2 = np.tile(c2, len(e1))
    return ee, [(axes[0], jj1, cc1), (axes[1], jj2, cc2)]


def _green_peel(model, x, y, E, target, peel: int | None = None):
    """Axis-peeled Green's function for separable 2D/3D models.

    The peeled axis defaults to the one with the largest separation; any
    axis with nonzero separation gives the same value (used as an internal
    consistency check).
    """
    dim = model.dimension
    seps = [_axis_separation(model, d, x, y) for d in range(dim)]
    if peel is None:
        peel = int(np.argmax(seps))
    delta = seps[peel]
    if delta <= 0.0:
        raise PrecisionError(
            "points coincide along every axis candidate; use the mode-sum "
            "cutoff route or separate the points"
        )
    trans_axes = [d for d in range(dim) if d != peel]
    L = model.lengths[peel]
    torus_dist = min(delta, L - delta) if model.periodic else None

    def g_along(lam):
        if model.periodic:
            return _g1d_torus(L, torus_dist, lam)
        return _g1d_dirichlet(L, x[peel], y[peel], lam)

    # Transverse modes above the cap contribute at most
    #   2 * fac_max * e^{-kappa delta} / (2 kappa),  kappa = sqrt(E_perp - E)
    # (the 2 covers the periodic kernel at half-circumference separation);
    # comparing the kappa ladder with the transverse counting bound gives
    #   tail <= 2 * fac_max * c_perp * kappa_min^{dim-2} * e^{-kappa_min delta}
    # once kappa_min delta >= 6 and the cap clears 4|E| and the axis scale.
    fac_max = 1.0
    c_perp = 1.0
    L_t_min = math.inf
    for d in trans_axes:
        fac_max *= 2.0 / model.lengths[d]
        c_perp *= 1.6 * model.lengths[d] / math.pi
        L_t_min = min(L_t_min, model.lengths[d])
    cap = max(4.0 * abs(E) + 1.0, (3.0 * math.pi / L_t_min) ** 2 + abs(E), 36.0 / delta**2 + abs(E))
    for _ in range(60):
        kap_min = math.sqrt(cap - E)
        tail = 2.0 * fac_max * c_perp * kap_min ** (dim - 2) * math.exp(-kap_min * delta)
        if kap_min * delta >= 6.0 and tail < target / 2.0:
            break
        cap *= 1.7
    else:
        raise PrecisionError("axis-peeled Green's function did not converge")
    ee, factors = _transverse_table(model, trans_axes, cap)
    order = np.argsort(ee, kind="stable")
    ee = ee[order]
    fac = np.ones_like(ee)
    for d, j, code in factors:
        fx = axis_factor(model, d, j[order], code[order], np.array([x[d]]))[:, 0]
        fy = axis_factor(model, d, j[order], code[order], np.array([y[d]]))[:, 0]
        fac *= fx * fy
    vals = fac * g_along(E - ee)
    return float(math.fsum(vals)), float(cap), float(tail)


def green0(
    x,
    y,
    E: float,
    levels: PointSpectrum,
    precision_target: float = 1e-10,
    cutoff: int | None = None,
) -> GreenValue:
    """Eigenfunction-expansion Green's function G0(x, y | E).

    With a cutoff the bare truncated sum over the first `cutoff` modes is
    returned (the object the finite-rank oracle works with).  Without one
    the full kernel is evaluated: direct accelerated summation in 1D, axis
    peeling in 2D/3D; the latter requires x != y (diagonal divergence).
    """
    model = levels.model
    xr = model.reduce_point(x)
    yr = model.reduce_point(y)
    dist, guard = _pole_guard(levels, E)
    if cutoff is None and dist < guard:
        raise NearEigenvalueError(f"E={E} within guard of a base eigenvalue")
    if cutoff is not None:
        ms = levels.modes
        vx = ms.values_at(xr[None, :])[:cutoff, 0]
        vy = ms.values_at(yr[None, :])[:cutoff, 0]
        terms = vx * vy / (ms.energies[:cutoff] - E)
        return GreenValue(
            tuple(xr), tuple(yr), float(E), float(math.fsum(terms)),
            float(cutoff), math.inf,
        )
    if model.dimension == 1:
        val, cap, bound = _green_interval_modesum(
            model, float(xr[0]), float(yr[0]), E, precision_target
        ) if not model.periodic else _green_peel_1d_torus(model, xr, yr, E, precision_target)
        return GreenValue(tuple(xr), tuple(yr), float(E), float(val), cap, bound)
    if np.all(xr == yr):
        raise DiagonalDivergenceError(
            "G0(x, x | E) diverges in 2D/3D; the renormalized theory never needs it"
        )
    val, cap, bound = _green_peel(model, xr, yr, E, precision_target)
    return GreenValue(tuple(xr), tuple(yr), float(E), float(val), cap, bound)


def _green_peel_1d_torus(model, x, y, E, target):
    delta = _axis_separation(model, 0, x, y)
    val = _g1d_torus(model.lengths[0], delta, np.array([E]))[0]
    return float(val), math.inf, 8.0 * _EPS * abs(val)


def _pole_guard(levels: PointSpectrum, E: float):
    poles = levels.pole_energies()
    if poles.size == 0:
        return math.inf, 0.0
    i = int(np.argmin(np.abs(poles - E)))
    gaps = []
    if i > 0:
        gaps.append(poles[i] - poles[i - 1])
    if i + 1 < poles.size:
        gaps.append(poles[i + 1] - poles[i])
    local = float(min(gaps)) if gaps else max(1.0, abs(float(poles[i])))
    return abs(float(poles[i]) - E), 1e-10 * local


# ---------------------------------------------------------------------------
# Grid eigenfunctions (truncated separable synthesis)

@dataclass(frozen=True)
class Eigenfunction:
    """Sampled eigenfunction with its accuracy certificates.

    norm_certificate bounds |quadrature norm - 1| including the quadrature
    error estimate and the truncation deficit; gram_deficit bounds the
    truncation contribution to any Gram entry against a partner built with
    the same cutoff.  alias_free records that the synthesis band limit
    keeps midpoint quadrature of pair products exact on the grid.
    """

    level: PerturbedLevel
    grid: Grid
    values: np.ndarray = field(repr=False)
    norm_certificate: float
    cutoff: float
    gram_deficit: float
    alias_free: bool = True
    excluded: np.ndarray = field(repr=False, default=None)


_TABLE_CACHE: dict = {}


def _factor_tables(mode_set, grid: Grid):
    """Per-axis factor matrices for a (mode set, grid) pair, cached.

    Keys carry content fingerprints, so an id reused after garbage
    collection can only collide with an entry built from identical data.
    """
    key = (
        id(mode_set), mode_set.model.kind, mode_set.cap, len(mode_set),
        id(grid), grid.shape,
        float(grid.axes[0][0]), float(grid.axes[-1][-1]),
    )
    hit = _TABLE_CACHE.get(key)
    if hit is None:
        model = mode_set.model
        hit = [
            axis_factor(model, d, mode_set.axis_j[d], mode_set.axis_code[d],
                        grid.axes[d])
            for d in range(model.dimension)
        ]
        if len(_TABLE_CACHE) > 16:
            _TABLE_CACHE.clear()
        _TABLE_CACHE[key] = hit
    return hit


def _synthesize(mode_set, coeffs, grid: Grid) -> np.ndarray:
    """sum_n c_n phi_n on the tensor grid via per-axis factor matrices."""
    model = mode_set.model
    dim = model.dimension
    tables = _factor_tables(mode_set, grid)
    if dim == 1:
        dense = np.zeros(len(mode_set.axis_j[0]))
        np.add.at(dense, mode_set.axis_idx[:, 0], coeffs)
        return dense @ tables[0]
    if dim == 2:
        C = np.zeros((len(mode_set.axis_j[0]), len(mode_set.axis_j[1])))
        C[mode_set.axis_idx[:, 0], mode_set.axis_idx[:, 1]] = coeffs
        return tables[0].T @ C @ tables[1]
    C = np.zeros(tuple(len(mode_set.axis_j[d]) for d in range(3)))
    C[mode_set.axis_idx[:, 0], mode_set.axis_idx[:, 1], mode_set.axis_idx[:, 2]] = coeffs
    out = np.tensordot(tables[0].T, C, axes=(1, 0))
    out = np.tensordot(out, tables[1], axes=(1, 0))  # -> (G1, z, G2)
    out = np.moveaxis(out, 1, 2)
    return np.tensordot(out, tables[2], axes=(2, 0))


def grid_alias_cap(model: SpectralModel, grid: Grid) -> float:
    """Largest synthesis energy whose pair products midpoint quadrature
    integrates exactly on this grid.

    Products of Dirichlet sines with indices <= G-1 stay below the 2G
    aliasing frequency; periodic axes carry both signs, so their index
    limit is (G-1)//2.
    """
    caps = []
    for d, G in enumerate(grid.shape):
        L = model.lengths[d]
        if model.periodic:
            jmax = max(1, (G - 1) // 2)
            caps.append((2 * math.pi * (jmax + 1) / L) ** 2)
        else:
            caps.append((math.pi * G / L) ** 2)
    return min(caps) * (1.0 - 1e-12)


def _axis_weight_vectors(levels: PointSpectrum, far: float):
    """Per-axis (energies, point-weight factors) up to axis energy far."""
    key = ("axisw", round(float(far), 6))
    cache = levels._mode_cache
    if key not in cache:
        model = levels.model
        out = []
        for d in range(model.dimension):
            e, j, code = _axis_modes(model, d, far)
            fac = axis_factor(model, d, j, code, np.array([levels.a[d]]))[:, 0]
            out.append((e, fac**2))
        cache[key] = out
    return cache[key]


def _square_sum_between(levels: PointSpectrum, lo: float, hi: float,
                        E_star: float) -> float:
    """sum of w_n/(E_n - E*)^2 over modes with lo < E_n <= hi, summed
    directly from the per-axis factor vectors in chunks (no mode set)."""
    model = levels.model
    axes = _axis_weight_vectors(levels, hi)
    dim = model.dimension
    if dim == 1:
        e, w = axes[0]
        sel = (e > lo) & (e <= hi)
        return float(np.sum(w[sel] / (e[sel] - E_star) ** 2))
    total = 0.0
    e1, w1 = axes[0]
    if dim == 2:
        e2, w2 = axes[1]
        chunk = max(1, int(2e6 / max(len(e2), 1)))
        for s in range(0, len(e1), chunk):
            E = e1[s : s + chunk, None] + e2[None, :]
            W = w1[s : s + chunk, None] * w2[None, :]
            sel = (E > lo) & (E <= hi)
            total += float(np.sum(W[sel] / (E[sel] - E_star) ** 2))
        return total
    e2, w2 = axes[1]
    e3, w3 = axes[2]
    e23 = (e2[:, None] + e3[None, :]).ravel()
    w23 = (w2[:, None] * w3[None, :]).ravel()
    chunk = max(1, int(2e6 / max(len(e23), 1)))
    for s in range(0, len(e1), chunk):
        E = e1[s : s + chunk, None] + e23[None, :]
        W = w1[s : s + chunk, None] * w23[None, :]
        sel = (E > lo) & (E <= hi)
        total += float(np.sum(W[sel] / (E[sel] - E_star) ** 2))
    return total


def _mode_count_bound(model, cap: float) -> float:
    return sum(c * cap**q for c, q in weyl_upper_coeffs(model))


def _tail_square_deficit(levels: PointSpectrum, cap: float, E_star: float,
                         phi_deriv: float, target: float) -> float:
    """Certified bound on sum_{E > cap} w_n/(E_n - E*)^2 / phi_deriv.

    The stretch between cap and an adaptive far cap is summed exactly from
    the per-axis factors; the Weyl comparison bound closes the remainder.
    """
    model = levels.model
    far = max(4.0 * cap, 4.0 * abs(E_star), 1e4)
    while (
        2.25 * power_tail_bound(model, far, 2.0) > 0.25 * target * phi_deriv
        and _mode_count_bound(model, 2.0 * far) < 4e7
    ):
        far *= 2.0
    mid = _square_sum_between(levels, cap, far, E_star)
    beyond = 2.25 * power_tail_bound(model, far, 2.0)
    return (mid + beyond) / phi_deriv


def eigenfunction(
    level: PerturbedLevel,
    grid: Grid,
    levels: PointSpectrum,
    precision_target: float = 1e-7,
) -> Eigenfunction:
    """Sample the perturbed eigenfunction of `level` on `grid`.

    Shifted levels give the normalized Green's-function profile truncated
    at the grid's alias-free band limit; the certified truncation deficit
    must stay below precision_target or the grid is reported as too
    coarse.  Nodal levels return the base eigenfunction samples.  Grid
    points that hit the interaction point exactly are flagged as excluded
    (value NaN) rather than extrapolated.
    """
    model = levels.model
    a = levels.a
    excl = _excluded_mask(grid, a)
    if level.status == STATUS_NODAL:
        lv = levels.levels[level.index]
        if lv.multiplicity != 1:
            raise DomainError(
                "nodal level is degenerate; its unchanged eigenspace has no "
                "canonical single representative"
            )
        ms = levels.modes
        coeffs = np.zeros(len(ms))
        coeffs[lv.mode_indices[0]] = 1.0
        vals = _synthesize(ms, coeffs, grid)
        return Eigenfunction(
            level=level, grid=grid, values=vals,
            norm_certificate=_norm_certificate(grid, vals, 0.0),
            cutoff=ms.cap, gram_deficit=0.0, excluded=excl,
        )
    E_star = level.energy_star
    dphi = level.phi_derivative
    cap = grid_alias_cap(model, grid)
    deficit = _tail_square_deficit(levels, cap, E_star, dphi, precision_target)
    if deficit > precision_target:
        raise PrecisionError(
            f"grid too coarse: certified truncation deficit {deficit:.3e} "
            f"exceeds target {precision_target:.3e}"
        )
    ms = _synth_modes(levels, cap)
    va = ms.values_at(a[None, :])[:, 0]
    coeffs = va / ((ms.energies - E_star) * math.sqrt(dphi))
    vals = _synthesize(ms, coeffs, grid)
    if np.any(excl):
        vals = vals.copy()
        vals[excl] = np.nan
    cert = _norm_certificate(grid, np.nan_to_num(vals), deficit)
    return Eigenfunction(
        level=level, grid=grid, values=vals, norm_certificate=cert,
        cutoff=cap, gram_deficit=deficit, excluded=excl,
    )


def _synth_modes(levels: PointSpectrum, cap: float):
    """Mode set enumerated exactly at the synthesis cap (cached)."""
    from pointspec.models import enumerate_modes

    key = ("synth", round(float(cap), 9))
    cache = levels._mode_cache
    if key not in cache:
        cache[key] = enumerate_modes(levels.model, cap)
    return cache[key]


def _excluded_mask(grid: Grid, a) -> np.ndarray:
    masks = []
    for d, ax in enumerate(grid.axes):
        masks.append(np.isclose(ax, a[d], rtol=0.0, atol=1e-12 * grid.model.lengths[d]))
    if len(masks) == 1:
        return masks[0]
    out = masks[0][:, None] & masks[1][None, :]
    if len(masks) == 3:
        out = out[:, :, None] & masks[2][None, None, :]
    return out


def _norm_certificate(grid: Grid, vals: np.ndarray, deficit: float) -> float:
    # Synthesis is band-limited below the grid's aliasing frequency, so the
    # midpoint rule integrates |psi|^2 exactly up to roundoff.
    n_fine = grid.integrate(vals**2)
    return abs(n_fine - 1.0) + deficit + 64.0 * _EPS * abs(n_fine)


def eigenfunction_at(
    level: PerturbedLevel,
    points,
    levels: PointSpectrum,
    precision_target: float = 1e-9,
) -> np.ndarray:
    """Pointwise eigenfunction values through the exact Green's function
    route (used by residue and kernel checks)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if level.status == STATUS_NODAL:
        lv = levels.levels[level.index]
        if lv.multiplicity != 1:
            raise DomainError("degenerate nodal level lacks a single representative")
        return levels.modes.values_at(pts)[lv.mode_indices[0], :]
    scale = 1.0 / math.sqrt(level.phi_derivative)
    out = np.empty(pts.shape[0])
    for i, p in enumerate(pts):
        out[i] = scale * green0(
            p, levels.a, level.energy_star, levels, precision_target
        ).value
    return out


# ---------------------------------------------------------------------------
# Resolvents and kernels

def krein_resolvent(
    x,
    y,
    E: float,
    levels: PointSpectrum,
    scheme: Scheme,
    precision_target: float = 1e-10,
) -> float:
    """Full resolvent kernel G(x,y|E) = G0(x,y|E) + G0(x,a|E) G0(a,y|E) / Phi(E)."""
    pv = phi(E, levels, scheme)
    guard = 1e3 * (pv.tail_bound + pv.roundoff) + 1e-13
    if abs(pv.value) < guard:
        raise NearEigenvalueError(
            f"Phi({E}) = {pv.value:.3e} below guard {guard:.3e}; "
            "E is numerically a perturbed eigenvalue"
        )
    g_xy = green0(x, y, E, levels, precision_target).value
    g_xa = green0(x, levels.a, E, levels, precision_target).value
    g_ay = green0(levels.a, y, E, levels, precision_target).value
    return float(g_xy + g_xa * g_ay / pv.value)


def krein_resolvent_truncated(
    x,
    y,
    E: float,
    levels: PointSpectrum,
    scheme: Scheme,
    cutoff: int,
) -> float:
    """Krein formula with every ingredient truncated at the same cutoff;
    algebraically identical to the finite-rank oracle resolvent."""
    pv = phi(E, levels, scheme, cutoff=cutoff, tail_correction=False)
    g_xy = green0(x, y, E, levels, cutoff=cutoff).value
    g_xa = green0(x, levels.a, E, levels, cutoff=cutoff).value
    g_ay = green0(levels.a, y, E, levels, cutoff=cutoff).value
    return float(g_xy + g_xa * g_ay / pv.value)


def renormalized_kernel(
    x,
    y,
    solved: list[PerturbedLevel],
    levels: PointSpectrum,
    k_max: int | None = None,
) -> float:
    """Integral kernel of the perturbed Hamiltonian truncated at k_max.

    Shifted levels contribute E* psi(x) psi(y) through the exact
    Green's-function route plus the unchanged remainder of any degenerate
    eigenspace; nodal levels contribute their base projections.
    """
    model = levels.model
    xr = model.reduce_point(x)
    yr = model.reduce_point(y)
    ms = levels.modes
    vx = ms.values_at(xr[None, :])[:, 0]
    vy = ms.values_at(yr[None, :])[:, 0]
    va = ms.values_at(levels.a[None, :])[:, 0]
    total = 0.0
    for p in solved:
        if k_max is not None and p.index > k_max:
            continue
        lv = levels.levels[p.index]
        sel = lv.mode_indices
        proj = float(np.dot(vx[sel], vy[sel]))
        if p.status == STATUS_NODAL:
            total += lv.energy * proj
            continue
        psi_x = green0(xr, levels.a, p.energy_star, levels, 1e-10).value
        psi_y = green0(levels.a, yr, p.energy_star, levels, 1e-10).value
        total += p.energy_star * psi_x * psi_y / p.phi_derivative
        if lv.multiplicity > 1:
            w = lv.weight
            chi_x = float(np.dot(va[sel], vx[sel])) / math.sqrt(w)
            chi_y = float(np.dot(va[sel], vy[sel])) / math.sqrt(w)
            total += lv.energy * (proj - chi_x * chi_y)
    return float(total)


# ---------------------------------------------------------------------------
# Domain membership of Green's-function differences

def domain_vector_norms(
    k: int,
    l: int,
    solved: list[PerturbedLevel],
    levels: PointSpectrum,
    checkpoints=(1000, 2000, 4000, 8000),
) -> dict:
    """Partial sums of the squared base-Hamiltonian norm of
    xi = G0(., a | E_k*) - G0(., a | E_l*), with certified tail bounds.

    Returns checkpoints (N, S_N, tail_bound_N), and the limit estimated by
    the moment expansion.  k = l gives the zero vector.
    """
    pk = next(p for p in solved if p.index == k)
    pl = next(p for p in solved if p.index == l)
    if pk.status != STATUS_SHIFTED or pl.status != STATUS_SHIFTED:
        raise ValueError("both levels must be shifted")
    Ek, El = pk.energy_star, pl.energy_star
    if k == l:
        return {
            "pair": (k, l),
            "prefactor": 0.0,
            "checkpoints": [(int(n), 0.0, 0.0) for n in checkpoints],
            "limit": 0.0,
            "limit_bound": 0.0,
        }
    need = int(max(checkpoints))
    ms = levels.ensure_modes(_cap_for_count(levels, need))
    en = ms.energies
    w = ms.weights_at(levels.a)
    pref = (Ek - El) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(
            (en != Ek) & (en != El),
            en**2 * w / ((en - Ek) ** 2 * (en - El) ** 2),
            0.0,
        )
    csum = np.cumsum(terms)
    rows = []
    for n in checkpoints:
        n = int(min(n, len(en)))
        lam = en[n - 1]
        try:
            check_margin(lam, Ek, El)
            bound = pref * (81.0 / 16.0) * power_tail_bound(levels.model, lam, 2.0)
        except Exception:
            bound = math.inf
        rows.append((n, float(pref * csum[n - 1]), float(bound)))
    head = levels.n_modes
    head_sum = float(np.sum(
        np.where(
            (levels.raw_energies != Ek) & (levels.raw_energies != El),
            levels.raw_energies**2 * levels.raw_weights
            / ((levels.raw_energies - Ek) ** 2 * (levels.raw_energies - El) ** 2),
            0.0,
        )
    ))
    tail_val, tail_err = quartic_tail(levels.tails, head, Ek, El, 1e-12)
    return {
        "pair": (k, l),
        "prefactor": float(pref),
        "checkpoints": rows,
        "limit": float(pref * (head_sum + tail_val)),
        "limit_bound": float(pref * tail_err),
    }


def _cap_for_count(levels: PointSpectrum, count: int) -> float:
    cap = levels.modes.cap
    while True:
        ms = levels.ensure_modes(cap)
        if len(ms) >= count:
            return ms.cap
        cap *= 2.0
