"""Renormalized secular function and renormalization-scheme handling.

The secular function of a point interaction at `a` with renormalized
coupling alpha_R and subtraction scale mu^2 is

    Phi(E) = 1/alpha_R - (E + mu^2) * sum_n w_n / ((E_n - E)(E_n + mu^2)),

where w_n = |phi_n(a)|^2.  Zeros of Phi are the perturbed eigenvalues.
Phi is strictly decreasing between consecutive nonzero-weight poles; the
positive quantity

    sum_n w_n / (E_n - E)^2   (= -dPhi/dE)

normalizes the perturbed eigenfunctions and is reported as `derivative`.

Evaluations sum an explicit head in a fixed deterministic order with
compensated accumulation, then add a certified tail correction from the
inverse-power moment cache; `tail_bound` bounds the total error of the
returned value.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np

from pointspec.errors import (
    PoleProximityError,
    PrecisionError,
)
from pointspec.models import (
    Level,
    ModeSet,
    SpectralModel,
    collapse_degenerate,
    enumerate_modes,
)
from pointspec.tails import (
    TailSums,
    check_margin,
    pair_tail,
    power_tail_bound,
)

POLE_GUARD = 1e-12      # times the local level gap
NODAL_FACTOR = 1e-14    # times the mean neighbor weight

_EPS = float(np.finfo(float).eps)


@dataclass(frozen=True)
class Scheme:
    """Renormalization data: coupling alpha_R at subtraction scale -mu^2."""

    alpha_R: float
    mu_sq: float

    def __post_init__(self):
        if not (math.isfinite(self.alpha_R) and self.alpha_R != 0.0):
            raise ValueError("alpha_R must be finite and nonzero")
        if not (math.isfinite(self.mu_sq) and self.mu_sq > 0.0):
            raise ValueError("mu_sq must be positive")


@dataclass(frozen=True)
class PhiValue:
    """One secular-function evaluation with its certificate.

    tail_bound certifies the truncation error (dropped modes plus the
    expansion remainder); roundoff estimates the floating-point error of
    the head sum, which is only relevant close to a pole where the head
    terms are large.
    """

    energy: float
    value: float
    derivative: float
    cutoff: int
    tail_bound: float
    derivative_bound: float = 0.0
    roundoff: float = 0.0


@dataclass
class PointSpectrum:
    """Spectral data of a model as seen from one interaction point.

    Bundles the enumerated modes, the degeneracy-collapsed levels with
    their point weights, and the cached tail moments.  Immutable in
    practice; the mode cache only grows.
    """

    modes: ModeSet
    a: np.ndarray
    levels: list[Level]
    tails: TailSums
    _mode_cache: dict = field(default_factory=dict, repr=False)

    @property
    def model(self) -> SpectralModel:
        return self.modes.model

    @property
    def raw_energies(self) -> np.ndarray:
        return self.modes.energies

    @property
    def raw_weights(self) -> np.ndarray:
        return self.tails.raw_weights

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    @functools.cached_property
    def level_energies(self) -> np.ndarray:
        return np.array([lv.energy for lv in self.levels])

    @functools.cached_property
    def level_weights(self) -> np.ndarray:
        return np.array([lv.weight for lv in self.levels])

    @functools.cached_property
    def _nodal_flags(self) -> np.ndarray:
        w = self.level_weights
        flags = np.zeros(len(w), dtype=bool)
        for k in range(len(w)):
            lo = max(0, k - 2)
            nb = np.concatenate([w[lo:k], w[k + 1 : k + 3]])
            mean_nb = float(np.mean(nb)) if nb.size else float(np.max(w, initial=0.0))
            flags[k] = w[k] == 0.0 or w[k] < NODAL_FACTOR * mean_nb
        return flags

    def is_nodal(self, k: int) -> bool:
        """Nodal levels keep their eigenvalue; threshold is relative to the
        neighboring weights so symmetry zeros are never mistaken for small
        genuine shifts."""
        return bool(self._nodal_flags[k])

    def pole_level_indices(self) -> list[int]:
        return [int(k) for k in np.nonzero(~self._nodal_flags)[0]]

    @functools.cached_property
    def _pole_energies(self) -> np.ndarray:
        return self.level_energies[~self._nodal_flags]

    def pole_energies(self) -> np.ndarray:
        return self._pole_energies

    def ensure_modes(self, energy_cap: float) -> ModeSet:
        """A (cached) mode enumeration reaching at least energy_cap."""
        if energy_cap <= self.modes.cap:
            return self.modes
        best = None
        for cap, ms in self._mode_cache.items():
            if not isinstance(cap, float):
                continue
            if cap >= energy_cap and (best is None or cap < best[0]):
                best = (cap, ms)
        if best is not None:
            return best[1]
        cap = float(energy_cap)
        ms = enumerate_modes(self.model, cap)
        self._mode_cache[cap] = ms
        return ms


def prepare_point_spectrum(
    model: SpectralModel,
    a,
    energy_cap: float,
    tol_e: float | None = None,
) -> PointSpectrum:
    """Enumerate, collapse at `a`, and attach the tail-moment cache."""
    a = model.reduce_point(a)
    modes = enumerate_modes(model, energy_cap)
    levels = collapse_degenerate(modes, a, tol_e=tol_e)
    tails = TailSums(modes, a)
    return PointSpectrum(modes=modes, a=a, levels=levels, tails=tails)


# ---------------------------------------------------------------------------
# Secular function

def _guard_distance(levels: PointSpectrum, E: float) -> tuple[float, float]:
    """(distance to nearest nonzero-weight pole, guard radius there)."""
    poles = levels.pole_energies()
    if poles.size == 0:
        return math.inf, 0.0
    i = int(np.argmin(np.abs(poles - E)))
    dist = abs(float(poles[i]) - E)
    gaps = []
    if i > 0:
        gaps.append(poles[i] - poles[i - 1])
    if i + 1 < poles.size:
        gaps.append(poles[i + 1] - poles[i])
    local_gap = float(min(gaps)) if gaps else max(1.0, abs(poles[i]))
    return dist, POLE_GUARD * local_gap


def _head_sums(levels: PointSpectrum, E: float, mu_sq: float, cutoff: int):
    """Compensated head sums of the Q series and the derivative series.

    Modes exactly at E are skipped: the pole guard has already certified
    that their weight vanishes, and skipping is what keeps evaluation at a
    nodal level energy well defined.
    """
    en = levels.raw_energies[:cutoff]
    w = levels.raw_weights[:cutoff]
    dE = en - E
    keep = dE != 0.0
    en, w, dE = en[keep], w[keep], dE[keep]
    q_terms = w / (dE * (en + mu_sq))
    d_terms = w / dE**2
    q = math.fsum(q_terms)
    d = math.fsum(d_terms)
    q_round = 4.0 * _EPS * math.fsum(np.abs(q_terms))
    d_round = 4.0 * _EPS * d
    return q, d, q_round, d_round


def phi(
    E: float,
    levels: PointSpectrum,
    scheme: Scheme,
    precision_target: float = 1e-11,
    cutoff: int | None = None,
    tail_correction: bool = True,
) -> PhiValue:
    """Evaluate Phi(E) and the positive derivative sum with certificates.

    With tail_correction the dropped part of the series is replaced by a
    certified inverse-power expansion and tail_bound <= precision_target is
    enforced.  Without it the value is the bare truncation Phi_N used by
    the finite-rank oracle; tail_bound then reports the raw Weyl bound
    when the margin allows, else +inf.
    """
    if not precision_target > 0:
        raise ValueError("precision_target must be positive")
    E = float(E)
    dist, guard = _guard_distance(levels, E)
    if dist < guard:
        raise PoleProximityError(
            f"E={E!r} within {guard:.3g} of a nonzero-weight pole"
        )
    n = levels.n_modes if cutoff is None else int(cutoff)
    if not 0 <= n <= levels.n_modes:
        raise ValueError(f"cutoff {n} outside [0, {levels.n_modes}]")
    q, d, q_round, d_round = _head_sums(levels, E, scheme.mu_sq, n)
    d_err = d_round
    if tail_correction:
        target_q = precision_target / (2.0 * max(1.0, abs(E + scheme.mu_sq)))
        q_tail, q_tail_err = pair_tail(levels.tails, n, E, -scheme.mu_sq, target_q)
        d_tail, d_tail_err = pair_tail(levels.tails, n, E, E, precision_target)
        q += q_tail
        d += d_tail
        d_err += d_tail_err
        tail_bound = abs(E + scheme.mu_sq) * q_tail_err
        if tail_bound > precision_target:
            raise PrecisionError(
                f"phi tail bound {tail_bound:.3g} exceeds target {precision_target:.3g}"
            )
    else:
        first_dropped = (
            levels.raw_energies[n] if n < levels.n_modes else levels.tails.cap
        )
        try:
            tail_bound = phi_tail_bound(
                levels.model, E, scheme.mu_sq, float(first_dropped)
            )
            d_err += dphi_tail_bound(levels.model, E, float(first_dropped))
        except Exception:
            tail_bound = math.inf
            d_err = math.inf
    value = 1.0 / scheme.alpha_R - (E + scheme.mu_sq) * q
    return PhiValue(
        energy=E,
        value=float(value),
        derivative=float(d),
        cutoff=n,
        tail_bound=float(tail_bound),
        derivative_bound=float(d_err),
        roundoff=float(abs(E + scheme.mu_sq) * q_round + _EPS * abs(value)),
    )


# ---------------------------------------------------------------------------
# Raw Weyl-comparison tail bounds (no expansion; the coarse certified route)

def phi_tail_bound(model: SpectralModel, E: float, mu_sq: float, first_dropped: float) -> float:
    """Certified bound on the dropped tail of the Phi sum beyond first_dropped.

    Requires the margin first_dropped > 3 max(|E|, mu^2); then each dropped
    term is at most (3/2) w_n (E + mu^2) / E_n^2 and the Weyl-comparison
    integral closes the bound.
    """
    check_margin(first_dropped, E, mu_sq)
    return abs(E + mu_sq) * 1.5 * power_tail_bound(model, first_dropped, 2.0)


def dphi_tail_bound(model: SpectralModel, E: float, first_dropped: float) -> float:
    """Certified bound on the dropped tail of the derivative sum."""
    check_margin(first_dropped, E)
    return 2.25 * power_tail_bound(model, first_dropped, 2.0)


# ---------------------------------------------------------------------------
# Scheme flow

def change_scheme(scheme: Scheme, new_mu_sq: float, levels: PointSpectrum,
                  precision_target: float = 1e-13) -> Scheme:
    """Map (alpha_R, mu^2) to the equivalent scheme at new_mu_sq.

    1/alpha_R' = 1/alpha_R + sum_n w_n [1/(E_n + mu'^2) - 1/(E_n + mu^2)];
    the compensating series converges absolutely for D <= 3 and is
    evaluated with the same head-plus-tail machinery, so Phi is pointwise
    unchanged up to the certified bounds.
    """
    if not new_mu_sq > 0:
        raise ValueError("new_mu_sq must be positive")
    if new_mu_sq == scheme.mu_sq:
        return scheme
    en = levels.raw_energies
    w = levels.raw_weights
    n = levels.n_modes
    head = math.fsum(w / ((en + new_mu_sq) * (en + scheme.mu_sq)))
    tail, tail_err = pair_tail(levels.tails, n, -new_mu_sq, -scheme.mu_sq, precision_target)
    # 1/(E_n + mu^2) - 1/(E_n + mu'^2) = (mu'^2 - mu^2) / (product); this sign
    # is the one that leaves Phi pointwise unchanged.
    delta = (new_mu_sq - scheme.mu_sq) * (head + tail)
    inv_new = 1.0 / scheme.alpha_R + delta
    if inv_new == 0.0:
        raise PrecisionError("mapped coupling is infinite at this scale")
    return Scheme(alpha_R=1.0 / inv_new, mu_sq=float(new_mu_sq))


def bare_coupling(N: int, levels: PointSpectrum, scheme: Scheme) -> float:
    """Cutoff coupling alpha(N) with 1/alpha(N) = 1/alpha_R + sum_{n<=N} w_n/(E_n+mu^2).

    Returns +-inf when 1/alpha(N) vanishes to roundoff (the oracle treats
    that as the limiting projector case).
    """
    if N < 0 or N > levels.n_modes:
        raise ValueError(f"N={N} outside [0, {levels.n_modes}]")
    en = levels.raw_energies[:N]
    w = levels.raw_weights[:N]
    terms = w / (en + scheme.mu_sq)
    inv = 1.0 / scheme.alpha_R + math.fsum(terms)
    scale = abs(1.0 / scheme.alpha_R) + math.fsum(np.abs(terms))
    if abs(inv) <= 4.0 * _EPS * scale:
        return math.copysign(math.inf, inv if inv != 0.0 else 1.0)
    return 1.0 / inv


def scheme_for_ground_energy(levels: PointSpectrum, ground_energy: float,
                             mu_sq: float) -> Scheme:
    """Convenience parametrization: the scheme whose Phi vanishes at the
    requested energy below the lowest nonzero-weight pole."""
    poles = levels.pole_energies()
    if poles.size and ground_energy >= poles[0]:
        raise ValueError("ground_energy must lie below the lowest nonzero-weight pole")
    q, _, _, _ = _head_sums(levels, ground_energy, mu_sq, levels.n_modes)
    q_tail, _ = pair_tail(levels.tails, levels.n_modes, ground_energy, -mu_sq, 1e-13)
    inv_alpha = (ground_energy + mu_sq) * (q + q_tail)
    if inv_alpha == 0.0:
        raise ValueError("requested energy needs an infinite coupling")
    return Scheme(alpha_R=1.0 / inv_alpha, mu_sq=mu_sq)
