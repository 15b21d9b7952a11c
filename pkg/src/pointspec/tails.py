"""Certified tail sums for spectral series.

Every convergent series handled by the package has the form

    sum over modes with E_n above a cutoff of  w_n * f(E_n),

with f a rational function built from factors 1/(E_n - u).  Expanding f in
inverse powers of E_n reduces each tail to the moments

    T_p = sum_{E_n > cap} w_n / E_n^p,        p >= 2,

computed once per (model, point): modes between the cap and a deeper
mid-range cap are summed directly, and everything beyond goes through the
Laplace identity 1/E^p = int_0^infty t^{p-1} e^{-tE} dt / (p-1)! with the
exact theta-form diagonal heat kernel.  The mid-range extension keeps the
kernel-minus-head cancellation noise far below the moments actually used.

Moments carry explicit uncertainties; expansions stop once the certified
remainder is below target.  Moments for cutoffs inside the enumerated set
are recovered exactly from suffix sums, so one cache serves every cutoff.
"""

from __future__ import annotations

import math

import numpy as np

from pointspec.errors import MarginError, PrecisionError
from pointspec.models import (
    ModeSet,
    enumerate_modes,
    heat_kernel_diag,
    max_mode_weight,
    weyl_upper_coeffs,
)

P_MAX = 60
MID_FACTOR = 8.0
# Expansion in 1/E_n converges at ratio max(|u|, |v|)/cap; demand at least
# this margin so the geometric remainder is summable with room to spare.
MARGIN = 3.0

_EPS = float(np.finfo(float).eps)


def _composite_gauss(u_lo: float, u_hi: float, panel: float, order: int):
    """Composite Gauss-Legendre nodes/weights on [u_lo, u_hi]."""
    n_panels = max(1, int(math.ceil((u_hi - u_lo) / panel)))
    edges = np.linspace(u_lo, u_hi, n_panels + 1)
    x, w = np.polynomial.legendre.leggauss(order)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * np.diff(edges)
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def power_tail_bound(model, lam: float, p: float) -> float:
    """Bound sum_{E_n > lam} w_n E_n^{-p} by integral comparison with the
    Weyl counting bound (integration by parts against N_up)."""
    w_max = max_mode_weight(model)
    total = 0.0
    for c, q in weyl_upper_coeffs(model):
        if p <= q:
            return math.inf
        total += c * p / (p - q) * lam ** (q - p)
    return w_max * total


class TailSums:
    """Moments T_p of the spectral tail above an enumeration cap.

    Values come with uncertainties; where the analytic bound shows a moment
    is below the numerical noise floor the bracket [0, bound] replaces the
    quadrature value.
    """

    def __init__(self, mode_set: ModeSet, a, p_max: int = P_MAX,
                 mid_factor: float = MID_FACTOR):
        self.modes = mode_set
        self.model = mode_set.model
        self.a = self.model.reduce_point(a)
        self.cap = mode_set.cap
        self.far_cap = float(mid_factor * mode_set.cap)
        self.p_max = p_max
        self.raw_weights = mode_set.weights_at(self.a)
        self.energies = mode_set.energies
        self._w_max = max_mode_weight(self.model)
        self._weyl = weyl_upper_coeffs(self.model)
        self._suffix: dict[int, np.ndarray] = {}
        self._mid_sums: dict[int, float] = {}
        self._built = False

    def _n_upper(self, energy: float) -> float:
        return sum(c * energy**q for c, q in self._weyl)

    def bound_above(self, p: float, lam: float) -> float:
        return power_tail_bound(self.model, lam, p)

    def decay_bound(self, t: float) -> float:
        """Bound on sum_{E_n > far_cap} w_n e^{-t E_n}, needs t*far_cap >= 3."""
        if t * self.far_cap < 3.0:
            raise ValueError("decay bound needs t*far_cap >= 3")
        return 2.0 * self._w_max * self._n_upper(self.far_cap) * math.exp(-t * self.far_cap)

    # -- quadrature build ----------------------------------------------------

    def _moment_integrals(self, order: int, energies, weights):
        far = self.far_cap
        dim = self.model.dimension
        # Lower limit: the dropped piece of the p = 2 moment is bounded by
        # 1.5^D (4 pi t)^{-D/2} t integrated over [0, t_lo].
        free = 1.5**dim * (4 * math.pi) ** (-dim / 2.0)
        expo = 2.0 - dim / 2.0  # integrand power at small t for p = 2
        t_lo = (1e-17 * expo / free) ** (1.0 / expo)
        t_hi = (self.p_max + 60.0) / far
        nodes_u, weights_u = _composite_gauss(
            math.log(t_lo), math.log(t_hi), 0.5, order
        )
        t = np.exp(nodes_u)
        K = heat_kernel_diag(self.model, self.a, t)
        head = np.empty_like(t)
        for i, ti in enumerate(t):
            head[i] = float(np.dot(weights, np.exp(-ti * energies)))
        K_tail = K - head
        ps = np.arange(2, self.p_max + 1)
        log_fact = np.array([math.lgamma(p) for p in ps])  # (p-1)!
        powers = np.exp(ps[:, None] * nodes_u[None, :] - log_fact[:, None])
        vals = powers @ (weights_u * K_tail)
        noise = powers @ (weights_u * np.abs(K) * 8.0 * _EPS)
        rem = np.array(
            [
                2.0 * self.decay_bound(t_hi) * t_hi ** (p - 1) / far
                / math.exp(math.lgamma(p))
                for p in ps
            ]
        )
        free_rem = np.array(
            [
                free * t_lo ** (p - dim / 2.0) / (p - dim / 2.0)
                / math.exp(math.lgamma(p))
                for p in ps
            ]
        )
        return vals, noise + rem + free_rem

    def _build(self):
        if self._built:
            return
        mid = enumerate_modes(self.model, self.far_cap)
        n_base = len(self.modes)
        self._mid_energies = mid.energies[n_base:]
        self._mid_weights = mid.weights_at(self.a)[n_base:]
        all_e = mid.energies
        all_w = np.concatenate([self.raw_weights, self._mid_weights])
        v1, u1 = self._moment_integrals(12, all_e, all_w)
        v2, u2 = self._moment_integrals(20, all_e, all_w)
        unc = np.abs(v1 - v2) + u2
        vals = v2
        self._beyond_vals = np.zeros(self.p_max + 1)
        self._beyond_unc = np.zeros(self.p_max + 1)
        for i, p in enumerate(range(2, self.p_max + 1)):
            bound = self.bound_above(p, self.far_cap)
            if bound < 2.0 * unc[i] or vals[i] < 0:
                # Moment below the numerical floor: keep the bracket [0, bound].
                self._beyond_vals[p] = 0.5 * bound
                self._beyond_unc[p] = 0.5 * bound
            else:
                self._beyond_vals[p] = vals[i]
                self._beyond_unc[p] = unc[i]
        self._built = True

    def _mid_sum(self, p: int) -> float:
        cached = self._mid_sums.get(p)
        if cached is None:
            cached = float(np.sum(self._mid_weights * self._mid_energies ** float(-p)))
            self._mid_sums[p] = cached
        return cached

    def _suffix_sums(self, p: int) -> np.ndarray:
        """suffix[k] = sum_{n >= k, enumerated} w_n E_n^{-p} (zero-energy safe)."""
        cached = self._suffix.get(p)
        if cached is not None:
            return cached
        with np.errstate(divide="ignore"):
            terms = np.where(
                self.energies > 0.0,
                self.raw_weights * self.energies ** float(-p),
                0.0,
            )
        suffix = np.concatenate([np.cumsum(terms[::-1])[::-1], [0.0]])
        self._suffix[p] = suffix
        return suffix

    # -- public moments ------------------------------------------------------

    def moment(self, p: int, head_count: int) -> tuple[float, float]:
        """(value, uncertainty) of T_p over enumerated modes >= head_count
        plus everything beyond the cap.  head_count must cover all
        zero-energy modes."""
        if p < 2 or p > self.p_max:
            raise ValueError(f"p={p} outside cached range [2, {self.p_max}]")
        if np.any(self.energies[head_count:] <= 0.0):
            raise ValueError("head cutoff must include all zero-energy modes")
        self._build()
        suffix = self._suffix_sums(p)[head_count]
        near = suffix + self._mid_sum(p)
        return (
            near + self._beyond_vals[p],
            self._beyond_unc[p] + 4.0 * _EPS * near,
        )

    def moment_bound(self, p: int, head_count: int) -> float:
        """Rigorous upper bound on T_p over modes >= head_count."""
        self._build()
        if p <= self.p_max:
            suffix = self._suffix_sums(p)[head_count]
            near = suffix + self._mid_sum(p)
        else:
            with np.errstate(divide="ignore"):
                terms = np.where(
                    self.energies[head_count:] > 0.0,
                    self.raw_weights[head_count:]
                    * self.energies[head_count:] ** float(-p),
                    0.0,
                )
            near = float(np.sum(terms)) + float(
                np.sum(self._mid_weights * self._mid_energies ** float(-p))
            )
        return near * (1.0 + 4.0 * _EPS) + self.bound_above(p, self.far_cap)


def check_margin(first_dropped: float, *references: float) -> None:
    """Require the first dropped energy to clear MARGIN times the references."""
    limit = MARGIN * max(1e-300, *[abs(r) for r in references])
    if not first_dropped > limit:
        raise MarginError(
            f"first dropped energy {first_dropped:.6g} must exceed "
            f"{limit:.6g}; enlarge the enumeration cap"
        )


def pair_tail(
    tails: TailSums,
    head_count: int,
    u: float,
    v: float,
    target: float,
) -> tuple[float, float]:
    """Tail of sum w_n / ((E_n - u)(E_n - v)) over modes >= head_count.

    Expands 1/((E-u)(E-v)) = sum_j h_j E^{-j-2} with the complete
    homogeneous coefficients h_j = sum_{i+l=j} u^i v^l.  Returns
    (value, certified_bound_on_error).
    """
    first_dropped = (
        tails.energies[head_count] if head_count < len(tails.energies) else tails.cap
    )
    check_margin(first_dropped, u, v)
    r = max(abs(u), abs(v))
    total = 0.0
    err = 0.0
    h = 1.0
    ratio_guard = r / first_dropped
    for j in range(0, tails.p_max - 1):
        val, unc = tails.moment(j + 2, head_count)
        total += h * val
        err += abs(h) * unc
        nxt_bound = (j + 2) * r ** (j + 1) * tails.moment_bound(j + 3, head_count)
        # Keep expanding past the requested target down to the moment
        # uncertainty floor; extra terms are almost free and make the
        # returned value target independent.
        floor = 0.25 * err + 1e-17 * abs(total) + 1e-300
        last = j == tails.p_max - 2
        if nxt_bound <= target / 8.0 and (nxt_bound <= floor or last):
            # Remainder: |h_m| <= (m+1) r^m and T decays at least geometrically.
            rem = 0.0
            term = nxt_bound
            m = j + 1
            while term > rem * 1e-17 + 1e-320 and m < j + 400:
                rem += term
                term *= ratio_guard * (m + 2) / (m + 1) * 1.02
                m += 1
            return total, err + rem
        h = u * h + v ** (j + 1)
    raise PrecisionError(
        f"pair tail did not certify target {target:.3g} within p_max={tails.p_max}"
    )


def quartic_tail(
    tails: TailSums,
    head_count: int,
    u: float,
    v: float,
    target: float,
) -> tuple[float, float]:
    """Tail of sum w_n E_n^2 / ((E_n - u)^2 (E_n - v)^2), modes >= head_count.

    E^2/((E-u)^2 (E-v)^2) = sum_j g_j E^{-j-2} where g is the convolution
    of the two squared-geometric series (i+1) u^i and (l+1) v^l.
    """
    first_dropped = (
        tails.energies[head_count] if head_count < len(tails.energies) else tails.cap
    )
    check_margin(first_dropped, u, v)
    r = max(abs(u), abs(v))
    js = np.arange(0, tails.p_max + 2)
    cu = (js + 1) * np.power(u, js)
    cv = (js + 1) * np.power(v, js)
    total = 0.0
    err = 0.0
    for j in range(0, tails.p_max - 1):
        g = float(np.dot(cu[: j + 1], cv[: j + 1][::-1]))
        val, unc = tails.moment(j + 2, head_count)
        total += g * val
        err += abs(g) * unc
        m = j + 1
        g_bound = (m + 1) * (m + 2) * (m + 3) / 6.0 * r**m
        nxt_bound = g_bound * tails.moment_bound(m + 2, head_count)
        floor = 0.25 * err + 1e-17 * abs(total) + 1e-300
        last = j == tails.p_max - 2
        if nxt_bound <= target / 8.0 and (nxt_bound <= floor or last):
            rem = 0.0
            term = nxt_bound
            ratio_guard = r / first_dropped
            while term > rem * 1e-17 + 1e-320 and m < j + 400:
                rem += term
                term *= ratio_guard * (m + 4) / (m + 1) * 1.02
                m += 1
            return total, err + rem
    raise PrecisionError(
        f"quartic tail did not certify target {target:.3g} within p_max={tails.p_max}"
    )
