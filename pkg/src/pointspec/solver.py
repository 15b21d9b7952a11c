"""Perturbed-spectrum solver.

Between consecutive nonzero-weight poles the secular function falls
monotonically from +inf to -inf, so each gap holds exactly one perturbed
eigenvalue; the level just above the gap owns it.  Nodal levels (weight
below threshold) keep their eigenvalue and eigenfunctions.  The lowest
nonzero-weight level is solved by expanding the bracket leftward; in 2D/3D
a root below it always exists, in 1D its absence is reported rather than
treated as an error.

Roots are refined by bisection to a small fraction of the gap and then by
bracket-guarded secant steps; Newton on the raw secular function is unsafe
near the poles and is never used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from pointspec.errors import PrecisionError, SolverError
from pointspec.secular import PhiValue, PointSpectrum, Scheme, phi

GROUND_FLOOR_FACTOR = 1e6     # search floor at -1e6 max(1, mu^2) for 1D absence
BISECT_FRACTION = 1e-3        # bisect until bracket < this fraction of the gap
MAX_REFINE = 240

STATUS_SHIFTED = "shifted"
STATUS_NODAL = "unchanged-nodal"


@dataclass(frozen=True)
class PerturbedLevel:
    """One level of the perturbed spectrum."""

    index: int
    energy_star: float
    status: str
    bracket: tuple[float, float]
    residual: float
    phi_derivative: float
    multiplicity: int = 1
    weight: float = 0.0

    @property
    def unchanged_copies(self) -> int:
        """Degenerate companions that stay at the base energy."""
        if self.status == STATUS_NODAL:
            return self.multiplicity
        return self.multiplicity - 1


def _phi_at(levels: PointSpectrum, scheme: Scheme, E: float,
            state: dict) -> PhiValue:
    """Secular evaluation that deepens the enumeration when E falls outside
    the certified-margin range of the current cache.

    Starts from the tight precision target and relaxes geometrically when
    the certified bound cannot reach it (far below the spectrum only the
    sign matters); the achieved bound always lands in the residual.
    """
    ls = levels
    needed = 3.4 * max(abs(E), scheme.mu_sq)
    if needed > ls.tails.cap:
        from pointspec.secular import prepare_point_spectrum

        deep = state.setdefault("deep", {})
        key = None
        for cap in sorted(deep):
            if cap >= needed:
                key = cap
                break
        if key is None:
            key = float(2.0 * needed)
            deep[key] = prepare_point_spectrum(ls.model, ls.a, key)
        ls = deep[key]
    target = state.get("target", 1e-11)
    while True:
        try:
            return phi(E, ls, scheme, precision_target=target)
        except PrecisionError:
            target *= 32.0
            if target > 0.03 * max(1.0, abs(E + scheme.mu_sq)):
                raise


def _refine_root(f, lo: float, hi: float, f_lo: float, f_hi: float,
                 gap: float, tol: float):
    """Find the sign change of monotone-ish f in [lo, hi].

    Returns (root, |f(root)| including certificates, final bracket, last
    PhiValue).  A root is taken as converged when the residual clears tol
    or the bracket has collapsed to machine width; the caller decides
    whether a steep secular function excuses a larger residual.
    """
    assert f_lo > 0 > f_hi
    # Bisection stage.
    while hi - lo > BISECT_FRACTION * gap:
        mid = 0.5 * (lo + hi)
        pv = f(mid)
        if pv.value > 0:
            lo, f_lo = mid, pv.value
        else:
            hi, f_hi = mid, pv.value
    # Guarded secant stage.
    x, fx, bound = lo, f_lo, math.inf
    pv = None
    for _ in range(MAX_REFINE):
        denom = f_hi - f_lo
        if denom == 0.0:
            x = 0.5 * (lo + hi)
        else:
            x = lo - f_lo * (hi - lo) / denom
            margin = 0.05 * (hi - lo)
            if not (lo < x < hi):
                x = 0.5 * (lo + hi)
            elif (x - lo) < margin or (hi - x) < margin:
                # Secant hugging an endpoint: fall back to bisection to keep
                # the bracket shrinking.
                x = 0.5 * (lo + hi)
        pv = f(x)
        fx, bound = pv.value, pv.tail_bound + pv.roundoff
        if pv.value > 0:
            lo, f_lo = x, pv.value
        else:
            hi, f_hi = x, pv.value
        width = hi - lo
        if abs(fx) + bound <= tol and width <= 8.0 * np.finfo(float).eps * max(1.0, abs(x)):
            break
        if width <= 2.0 * np.finfo(float).eps * max(1.0, abs(x)):
            break
    return x, abs(fx) + bound, (lo, hi), pv


def _prev_pole_energy(levels: PointSpectrum, k: int) -> float | None:
    poles = [i for i in levels.pole_level_indices() if i < k]
    if not poles:
        return None
    return levels.levels[poles[-1]].energy


def _next_gap(levels: PointSpectrum, k: int) -> float:
    """A local energy scale around level k for bracket seeding."""
    e = [lv.energy for lv in levels.levels]
    if k + 1 < len(e):
        return e[k + 1] - e[k]
    if k > 0:
        return e[k] - e[k - 1]
    return max(1.0, abs(e[k]))


def _solve_pole_level(k: int, levels: PointSpectrum, scheme: Scheme,
                      tol: float) -> PerturbedLevel | None:
    """Root owned by nonzero-weight level k: the unique zero in the gap
    below it, or below everything for the lowest pole (may be absent in 1D)."""
    state: dict = {"target": min(1e-11, 0.1 * tol)}
    level = levels.levels[k]
    hi_pole = level.energy
    prev = _prev_pole_energy(levels, k)

    def f(E):
        return _phi_at(levels, scheme, E, state)

    # Upper end: Phi -> -inf at the pole from below.
    gap_hi = hi_pole - prev if prev is not None else _next_gap(levels, k)
    f_hi = None
    hi = None
    eps_off = 1e-11 * gap_hi
    for _ in range(40):
        cand = hi_pole - eps_off
        pv = f(cand)
        if pv.value < 0:
            hi, f_hi = cand, pv.value
            break
        eps_off *= 0.5
        if eps_off < 2e-12 * gap_hi:
            raise SolverError(
                f"no negative secular value below level {k} at E={hi_pole}: "
                f"Phi({cand}) = {pv.value:.3e}"
            )
    if prev is not None:
        gap = hi_pole - prev
        eps_off = 1e-11 * gap
        lo = f_lo = None
        for _ in range(40):
            cand = prev + eps_off
            pv = f(cand)
            if pv.value > 0:
                lo, f_lo = cand, pv.value
                break
            eps_off *= 0.5
            if eps_off < 2e-12 * gap:
                raise SolverError(
                    f"no positive secular value above pole at {prev} "
                    f"(level {k}); interlacing violated"
                )
    else:
        # Lowest pole: expand leftward, doubling the step.
        floor = -GROUND_FLOOR_FACTOR * max(1.0, scheme.mu_sq)
        step = max(_next_gap(levels, k), 1.0)
        lo = f_lo = None
        cand = hi_pole - step
        while True:
            pv = f(cand)
            if pv.value > 0:
                lo, f_lo = cand, pv.value
                break
            if cand <= floor:
                return None  # no bound state below for this scheme (1D case)
            step *= 2.0
            cand = hi_pole - step
            if cand < floor:
                cand = floor
        gap = hi - lo
    root, residual, bracket, last = _refine_root(f, lo, hi, f_lo, f_hi, gap, tol)
    deriv = last.derivative
    width = bracket[1] - bracket[0]
    # A machine-width bracket certifies the root even when the secular
    # function is too steep for |Phi| itself to clear an absolute tol.
    eps_width = 8.0 * np.finfo(float).eps * max(1.0, abs(root))
    steep_ok = width <= eps_width and residual <= 8.0 * deriv * width + last.tail_bound + last.roundoff + tol
    if residual > tol and not steep_ok:
        raise SolverError(
            f"level {k}: residual {residual:.3e} above tolerance {tol:.3e} "
            f"with bracket width {width:.3e}"
        )
    return PerturbedLevel(
        index=k,
        energy_star=float(root),
        status=STATUS_SHIFTED,
        bracket=(float(bracket[0]), float(bracket[1])),
        residual=float(residual),
        phi_derivative=float(deriv),
        multiplicity=level.multiplicity,
        weight=level.weight,
    )


def _nodal_level(k: int, levels: PointSpectrum, scheme: Scheme) -> PerturbedLevel:
    level = levels.levels[k]
    pv = _phi_at(levels, scheme, level.energy, {"target": 1e-11})
    return PerturbedLevel(
        index=k,
        energy_star=float(level.energy),
        status=STATUS_NODAL,
        bracket=(float(level.energy), float(level.energy)),
        residual=0.0,
        phi_derivative=float(pv.derivative),
        multiplicity=level.multiplicity,
        weight=level.weight,
    )


def solve_level(k: int, levels: PointSpectrum, scheme: Scheme,
                tol: float = 1e-10) -> PerturbedLevel:
    """Perturbed level k (k >= 1): nodal levels unchanged, otherwise the
    bracketed root of the secular function below E_k."""
    if k < 1 or k >= len(levels.levels):
        raise ValueError(f"k={k} outside 1..{len(levels.levels) - 1}")
    if not tol > 0:
        raise ValueError("tol must be positive")
    if levels.is_nodal(k):
        return _nodal_level(k, levels, scheme)
    result = _solve_pole_level(k, levels, scheme, tol)
    if result is None:
        raise SolverError(f"level {k}: no root found in the search range")
    return result


def solve_ground(levels: PointSpectrum, scheme: Scheme,
                 tol: float = 1e-10) -> PerturbedLevel | None:
    """Root below the lowest nonzero-weight level.

    Always exists for 2D/3D models (the secular function grows without
    bound toward -infinity); for 1D models None signals that no bound
    state exists below the base spectrum for this scheme.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    poles = levels.pole_level_indices()
    if not poles:
        return None
    return _solve_pole_level(poles[0], levels, scheme, tol)


def solve_spectrum(levels: PointSpectrum, scheme: Scheme, k_max: int,
                   tol: float = 1e-10) -> list[PerturbedLevel]:
    """Perturbed levels 0..k_max (collapsed indexing), sorted by index.

    The lowest nonzero-weight level is solved by the unbounded-below
    search; if that root is absent (1D, repulsive-leaning scheme) its entry
    is omitted from the list.
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    if k_max >= len(levels.levels):
        raise ValueError(
            f"k_max={k_max} beyond enumerated levels ({len(levels.levels)}); "
            "raise the energy cap"
        )
    out: list[PerturbedLevel] = []
    for k in range(0, k_max + 1):
        if levels.is_nodal(k):
            out.append(_nodal_level(k, levels, scheme))
            continue
        res = _solve_pole_level(k, levels, scheme, tol)
        if res is not None:
            out.append(res)
    return out


# ---------------------------------------------------------------------------
# Several interaction centers

@dataclass
class MultiCenterProblem:
    """K distinct centers with per-center schemes over one mode basis."""

    model: object
    centers: list
    schemes: list[Scheme]
    spectra: list[PointSpectrum] = field(default_factory=list)

    def __post_init__(self):
        if len(self.centers) < 1:
            raise ValueError("need at least one center")
        if len(self.schemes) != len(self.centers):
            raise ValueError("one scheme per center required")
        pts = [np.asarray(c, dtype=float) for c in self.centers]
        for i in range(len(pts)):
            for j in range(i + 1, len(pts)):
                if np.allclose(pts[i], pts[j], atol=1e-12):
                    raise ValueError(
                        f"centers {i} and {j} coincide; the off-diagonal "
                        "Green's function diverges there"
                    )


def prepare_multi(model, centers, schemes, energy_cap: float) -> MultiCenterProblem:
    from pointspec.secular import prepare_point_spectrum

    prob = MultiCenterProblem(model=model, centers=list(centers), schemes=list(schemes))
    prob.spectra = [prepare_point_spectrum(model, c, energy_cap) for c in centers]
    return prob


@dataclass(frozen=True)
class MultiCenterLevel:
    """One root of the matrix secular problem with its null direction."""

    energy_star: float
    coefficients: np.ndarray
    residual: float
    condition: float


def _secular_matrix(prob: MultiCenterProblem, E: float) -> np.ndarray:
    from pointspec.wavefunction import green0

    K = len(prob.centers)
    if not hasattr(prob, "_states"):
        prob._states = [
            {"target": 1e-11} for _ in range(K)
        ]
    mat = np.empty((K, K))
    for i in range(K):
        mat[i, i] = _phi_at(prob.spectra[i], prob.schemes[i], E, prob._states[i]).value
        for j in range(i + 1, K):
            g = green0(
                prob.centers[i], prob.centers[j], E, prob.spectra[i],
                precision_target=1e-10,
            ).value
            mat[i, j] = mat[j, i] = -g
    return mat


def solve_spectrum_multi(prob: MultiCenterProblem, k_max: int,
                         tol: float = 1e-9,
                         scan_density: int = 24) -> list[MultiCenterLevel]:
    """Roots of det(secular matrix) with unit null vectors.

    Eigenvalue branches of the symmetric matrix are tracked on a scan grid
    (sorted branches of a continuous symmetric family are continuous), each
    sign change is refined by bisection plus secant; this also catches the
    near-degenerate crossings a bare determinant scan can miss.
    """
    if len(prob.centers) == 1:
        single = solve_spectrum(prob.spectra[0], prob.schemes[0], k_max, tol)
        return [
            MultiCenterLevel(p.energy_star, np.array([1.0]), p.residual, 0.0)
            for p in single
            if p.status == STATUS_SHIFTED
        ]
    K = len(prob.centers)
    pole_set: set[float] = set()
    for sp in prob.spectra:
        for e in sp.pole_energies():
            if e <= sp.levels[min(k_max + 1, len(sp.levels) - 1)].energy:
                pole_set.add(float(e))
    poles = sorted(pole_set)
    mu_max = max(s.mu_sq for s in prob.schemes)
    floor = -GROUND_FLOOR_FACTOR * max(1.0, mu_max)

    def branches(E):
        return np.linalg.eigvalsh(_secular_matrix(prob, E))

    roots: list[float] = []

    def scan_segment(lo, hi):
        grid = np.linspace(lo, hi, max(3, scan_density * K))
        vals = np.array([branches(E) for E in grid])
        for b in range(K):
            col = vals[:, b]
            for i in range(len(grid) - 1):
                if col[i] == 0.0:
                    roots.append(float(grid[i]))
                elif col[i] * col[i + 1] < 0:
                    roots.append(
                        _bisect_branch(branches, b, grid[i], grid[i + 1], tol)
                    )

    # Below the lowest pole: expand leftward, doubling; keep going one
    # segment past the last hit so near-degenerate partners are not missed.
    first = poles[0]
    span = (poles[1] - poles[0]) if len(poles) > 1 else max(1.0, abs(first))
    lo = first - span
    hi = first - 1e-9 * span
    while True:
        n_before = len(roots)
        scan_segment(lo, hi)
        stale = len(roots) == n_before
        if lo <= floor or (roots and stale):
            break
        hi = lo
        lo = first - 2.0 * (first - lo)
        if lo < floor:
            lo = floor
    # Gaps between consecutive poles.
    for p_lo, p_hi in zip(poles[:-1], poles[1:]):
        off = 1e-9 * (p_hi - p_lo)
        scan_segment(p_lo + off, p_hi - off)

    out = []
    for E in sorted(set(roots)):
        mat = _secular_matrix(prob, E)
        w, v = np.linalg.eigh(mat)
        i = int(np.argmin(np.abs(w)))
        others = np.abs(np.delete(w, i))
        cond = float(np.max(np.abs(w)) / max(others.min(), 1e-300)) if others.size else math.inf
        vec = v[:, i]
        nz = np.nonzero(np.abs(vec) > 1e-12)[0]
        if nz.size and vec[nz[0]] < 0:
            vec = -vec
        out.append(
            MultiCenterLevel(
                energy_star=float(E),
                coefficients=vec,
                residual=float(abs(w[i])),
                condition=cond,
            )
        )
    return out


def _bisect_branch(branches, b: int, lo: float, hi: float, tol: float) -> float:
    f_lo = branches(lo)[b]
    f_hi = branches(hi)[b]
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = branches(mid)[b]
        if abs(fm) <= 0.25 * tol and (hi - lo) <= 1e-13 * max(1.0, abs(mid)):
            return float(mid)
        if (fm > 0) == (f_lo > 0):
            lo, f_lo = mid, fm
        else:
            hi, f_hi = mid, fm
        if (hi - lo) <= 4.0 * np.finfo(float).eps * max(1.0, abs(mid)):
            return float(0.5 * (lo + hi))
    return float(0.5 * (lo + hi))
