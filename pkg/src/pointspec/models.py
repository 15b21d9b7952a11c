"""Explicit base Hamiltonians on flat domains.

Every model is a separable Laplacian (units hbar^2/2m = 1) with closed-form
spectral data.  Supported kinds:

    interval-Dirichlet-1D   eigenvalues (m pi / L)^2,        m >= 1
    rectangle-Dirichlet-2D  sums of two Dirichlet axes
    box-Dirichlet-3D        sums of three Dirichlet axes
    torus-2D                eigenvalues |2 pi j / L|^2,      j in Z^2
    torus-3D                three periodic axes

Torus modes use the real trigonometric basis (constant, cos, sin) so that
all downstream linear algebra stays real.  Modes carry per-axis quantum
numbers; scattered-point and tensor-grid evaluation both go through the
per-axis factor tables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from pointspec.errors import DomainError, ResourceLimitError

KINDS = (
    "interval-Dirichlet-1D",
    "rectangle-Dirichlet-2D",
    "box-Dirichlet-3D",
    "torus-2D",
    "torus-3D",
)

_KIND_DIMENSION = {
    "interval-Dirichlet-1D": 1,
    "rectangle-Dirichlet-2D": 2,
    "box-Dirichlet-3D": 3,
    "torus-2D": 2,
    "torus-3D": 3,
}

# Axis mode codes.
SINE = 0       # Dirichlet axis, sqrt(2/L) sin(m pi x / L), m >= 1
CONST = 1      # periodic axis, 1/sqrt(L)
COS = 2        # periodic axis, sqrt(2/L) cos(2 pi j x / L), j >= 1
SIN = 3        # periodic axis, sqrt(2/L) sin(2 pi j x / L), j >= 1

DEFAULT_MAX_MODES = 8_000_000


@dataclass(frozen=True)
class SpectralModel:
    """Flat base Hamiltonian with closed-form eigendata."""

    kind: str
    lengths: tuple[float, ...]

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}; expected one of {KINDS}")
        expected = _KIND_DIMENSION[self.kind]
        if len(self.lengths) != expected:
            raise ValueError(
                f"{self.kind} needs {expected} length(s), got {len(self.lengths)}"
            )
        if any(not (L > 0) or not math.isfinite(L) for L in self.lengths):
            raise ValueError("all lengths must be positive finite reals")

    @property
    def dimension(self) -> int:
        return _KIND_DIMENSION[self.kind]

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    @property
    def periodic(self) -> bool:
        return self.kind.startswith("torus")

    def contains(self, x) -> bool:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.shape != (self.dimension,):
            return False
        if self.periodic:
            return bool(np.all(np.isfinite(x)))
        return bool(np.all(x >= 0.0) and np.all(x <= np.asarray(self.lengths)))

    def reduce_point(self, x) -> np.ndarray:
        """Validate a point and wrap periodic coordinates into [0, L)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.shape != (self.dimension,):
            raise DomainError(f"point {x!r} has wrong dimension for {self.kind}")
        if not self.contains(x):
            raise DomainError(f"point {x!r} outside domain of {self.kind} {self.lengths}")
        if self.periodic:
            return np.mod(x, np.asarray(self.lengths))
        return x


def make_model(kind: str, lengths) -> SpectralModel:
    return SpectralModel(kind=kind, lengths=tuple(float(L) for L in lengths))


# ---------------------------------------------------------------------------
# Axis mode tables

def _axis_modes(model: SpectralModel, axis: int, energy_cap: float):
    """All modes of one separable axis with axis energy <= energy_cap.

    Returns (energies, j, code) arrays sorted by energy, deterministic
    tie-break cos-before-sin.
    """
    L = model.lengths[axis]
    if not model.periodic:
        m_max = int(math.floor(L * math.sqrt(max(energy_cap, 0.0)) / math.pi + 1e-12))
        m = np.arange(1, m_max + 1)
        e = (np.pi * m / L) ** 2
        return e, m, np.full(m.shape, SINE, dtype=np.int8)
    j_max = int(math.floor(L * math.sqrt(max(energy_cap, 0.0)) / (2 * math.pi) + 1e-12))
    js = [0]
    codes = [CONST]
    for j in range(1, j_max + 1):
        js.extend([j, j])
        codes.extend([COS, SIN])
    j = np.asarray(js)
    e = (2 * np.pi * j / L) ** 2
    return e, j, np.asarray(codes, dtype=np.int8)


def axis_factor(model: SpectralModel, axis: int, j, code, coords) -> np.ndarray:
    """Axis eigenfunction factors, shape (n_modes, n_coords).

    `j`, `code` are per-mode arrays; `coords` a 1D array of positions along
    the axis.  L2 normalization is per axis so products over axes are
    normalized on the full domain.
    """
    L = model.lengths[axis]
    j = np.asarray(j, dtype=float)[:, None]
    code = np.asarray(code)[:, None]
    x = np.asarray(coords, dtype=float)[None, :]
    out = np.empty((j.shape[0], x.shape[1]))
    amp = math.sqrt(2.0 / L)
    sine = code == SINE
    if np.any(sine):
        out[sine[:, 0]] = amp * np.sin(np.pi * j[sine[:, 0]] * x / L)
    const = code == CONST
    if np.any(const):
        out[const[:, 0]] = 1.0 / math.sqrt(L)
    cosm = code == COS
    if np.any(cosm):
        out[cosm[:, 0]] = amp * np.cos(2 * np.pi * j[cosm[:, 0]] * x / L)
    sinm = code == SIN
    if np.any(sinm):
        out[sinm[:, 0]] = amp * np.sin(2 * np.pi * j[sinm[:, 0]] * x / L)
    return out


# ---------------------------------------------------------------------------
# Mode enumeration

@dataclass(frozen=True)
class ModeSet:
    """All eigenmodes of a model with energy <= cap, sorted by energy.

    axis_idx[:, d] indexes into the per-axis tables (axis_energies[d],
    axis_j[d], axis_code[d]); the full eigenfunction is the product of the
    axis factors and the full energy the sum of the axis energies.
    """

    model: SpectralModel
    cap: float
    energies: np.ndarray
    axis_idx: np.ndarray
    axis_energies: tuple[np.ndarray, ...]
    axis_j: tuple[np.ndarray, ...]
    axis_code: tuple[np.ndarray, ...]

    def __len__(self) -> int:
        return int(self.energies.shape[0])

    def values_at(self, points) -> np.ndarray:
        """Eigenfunction values phi_n(x), shape (n_modes, n_points)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] != self.model.dimension:
            raise DomainError("points have wrong dimension")
        vals = np.ones((len(self), pts.shape[0]))
        for d in range(self.model.dimension):
            table = axis_factor(
                self.model, d, self.axis_j[d], self.axis_code[d], pts[:, d]
            )
            vals *= table[self.axis_idx[:, d], :]
        return vals

    def weights_at(self, a) -> np.ndarray:
        """Per-mode point weights |phi_n(a)|^2."""
        a = self.model.reduce_point(a)
        return self.values_at(a[None, :])[:, 0] ** 2


def enumerate_modes(
    model: SpectralModel, energy_cap: float, max_modes: int = DEFAULT_MAX_MODES
) -> ModeSet:
    """Enumerate every eigenmode with energy <= energy_cap.

    Raises ResourceLimitError when the count would exceed max_modes.
    """
    if not energy_cap > 0:
        raise ValueError("energy_cap must be positive")
    dim = model.dimension
    axes = [_axis_modes(model, d, energy_cap) for d in range(dim)]
    counts = [len(ax[0]) for ax in axes]
    if any(c == 0 for c in counts) and not model.periodic:
        # Dirichlet axis with no mode below cap: empty spectrum.
        empty = np.zeros(0)
        return ModeSet(
            model,
            float(energy_cap),
            empty,
            np.zeros((0, dim), dtype=np.int64),
            tuple(ax[0] for ax in axes),
            tuple(ax[1] for ax in axes),
            tuple(ax[2] for ax in axes),
        )
    grids = np.meshgrid(*[np.arange(c) for c in counts], indexing="ij")
    idx = np.stack([g.ravel() for g in grids], axis=1)
    total = np.zeros(idx.shape[0])
    for d in range(dim):
        total += axes[d][0][idx[:, d]]
    keep = total <= energy_cap * (1 + 1e-14)
    idx = idx[keep]
    total = total[keep]
    if idx.shape[0] > max_modes:
        raise ResourceLimitError(
            f"energy cap {energy_cap} yields {idx.shape[0]} modes (limit {max_modes})"
        )
    # Deterministic order: by energy, then axis indices lexicographically.
    order = np.lexsort(tuple(idx[:, d] for d in reversed(range(dim))) + (total,))
    return ModeSet(
        model,
        float(energy_cap),
        total[order],
        idx[order],
        tuple(ax[0] for ax in axes),
        tuple(ax[1] for ax in axes),
        tuple(ax[2] for ax in axes),
    )


def enumerate_levels(model: SpectralModel, energy_cap: float,
                     max_modes: int = DEFAULT_MAX_MODES) -> list[tuple[int, float]]:
    """Raw (index, energy) pairs sorted nondecreasing, one per mode."""
    ms = enumerate_modes(model, energy_cap, max_modes)
    return [(i, float(e)) for i, e in enumerate(ms.energies)]


def eigenfunction_value(model: SpectralModel, index: int, x,
                        energy_cap: float | None = None) -> float:
    """phi_n(x) for the index-th mode in the sorted enumeration.

    energy_cap defaults to a cap just above the requested index for small
    indices; pass it explicitly when indexing deep into the spectrum.
    """
    x = model.reduce_point(x)
    if energy_cap is None:
        # Grow the cap until the index is covered.
        cap = 10.0 * max(1.0, min(model.lengths)) ** -2
        for _ in range(60):
            ms = enumerate_modes(model, cap)
            if len(ms) > index:
                break
            cap *= 2.0
        else:
            raise ResourceLimitError(f"index {index} not reached")
    else:
        ms = enumerate_modes(model, energy_cap)
        if len(ms) <= index:
            raise ValueError(f"index {index} beyond enumerated spectrum ({len(ms)} modes)")
    return float(ms.values_at(x[None, :])[index, 0])


# ---------------------------------------------------------------------------
# Degeneracy collapse

@dataclass(frozen=True)
class Level:
    """A collapsed energy level as seen from the interaction point.

    weight = sum over the degenerate eigenspace of |phi(a)|^2; a level with
    weight 0 is a common node of the eigenspace and is transparent to the
    interaction.
    """

    index: int
    energy: float
    multiplicity: int
    weight: float
    mode_indices: np.ndarray = field(repr=False, compare=False, default=None)


def default_energy_tol(energy: float) -> float:
    # Closed-form energies collide exactly or not at all; the tolerance only
    # guards floating point.
    return 1e-9 * max(1.0, abs(energy))


def collapse_degenerate(raw, a, tol_e: float | None = None,
                        model: SpectralModel | None = None) -> list[Level]:
    """Merge raw levels whose energies differ by less than tol_e.

    `raw` is either a ModeSet or a sequence of (energy, weight) pairs.
    Merged weight is the sum of |phi(a)|^2 over the merged modes.
    """
    if isinstance(raw, ModeSet):
        energies = raw.energies
        weights = raw.weights_at(a)
        mode_ids = np.arange(len(raw))
    else:
        arr = np.asarray(raw, dtype=float)
        energies = arr[:, 0]
        weights = arr[:, 1]
        mode_ids = np.arange(arr.shape[0])
    if np.any(np.diff(energies) < 0):
        raise ValueError("raw levels must be sorted nondecreasing")
    levels: list[Level] = []
    start = 0
    n = energies.shape[0]
    while start < n:
        stop = start + 1
        e0 = energies[start]
        tol = tol_e if tol_e is not None else default_energy_tol(e0)
        while stop < n and energies[stop] - energies[stop - 1] < tol:
            stop += 1
        levels.append(
            Level(
                index=len(levels),
                energy=float(e0),
                multiplicity=stop - start,
                weight=float(math.fsum(weights[start:stop])),
                mode_indices=mode_ids[start:stop],
            )
        )
        start = stop
    return levels


# ---------------------------------------------------------------------------
# Heat kernels (exact theta forms) and Weyl counting bounds

def _axis_heat_diag(model: SpectralModel, axis: int, a: float, t: np.ndarray) -> np.ndarray:
    """Diagonal heat kernel of one axis at position a, vectorized over t.

    Uses the spectral (theta) series for large t and the image-sum form for
    small t; both are exact, the switch only controls term counts.  Series
    are truncated when the next Gaussian factor drops below 1e-20, which
    keeps every value accurate to ~1e-16 relative.
    """
    L = model.lengths[axis]
    t = np.asarray(t, dtype=float)
    out = np.empty_like(t)
    if model.periodic:
        xi = t * (2 * np.pi / L) ** 2  # e^{-xi j^2} spectral decay
        small = xi < 1.0
        if np.any(~small):
            tt = xi[~small]
            m_max = int(np.ceil(np.sqrt(46.1 / tt.min())))
            m = np.arange(1, m_max + 1)
            out[~small] = (1.0 + 2.0 * np.exp(-np.outer(tt, m**2)).sum(axis=1)) / L
        if np.any(small):
            tt = t[small]
            j_max = int(np.ceil(np.sqrt(46.1 * tt.max()) / L)) + 1
            j = np.arange(-j_max, j_max + 1)
            out[small] = np.exp(
                -((j * L) ** 2)[None, :] / (4.0 * tt[:, None])
            ).sum(axis=1) / np.sqrt(4 * np.pi * tt)
        return out
    # Dirichlet axis.
    xi = t * (np.pi / L) ** 2
    small = xi < 1.0
    if np.any(~small):
        tt = xi[~small]
        m_max = int(np.ceil(np.sqrt(46.1 / tt.min())))
        m = np.arange(1, m_max + 1)
        decay = np.exp(-np.outer(tt, m**2))
        cosf = np.cos(2 * np.pi * m * a / L)
        out[~small] = (decay.sum(axis=1) - decay @ cosf) / L
    if np.any(small):
        tt = t[small]
        j_max = int(np.ceil(np.sqrt(46.1 * tt.max()) / (2 * L))) + 2
        j = np.arange(-j_max, j_max + 1)
        even = np.exp(-((2 * j * L) ** 2)[None, :] / (4.0 * tt[:, None])).sum(axis=1)
        refl = np.exp(-((2 * a - 2 * j * L) ** 2)[None, :] / (4.0 * tt[:, None])).sum(axis=1)
        out[small] = (even - refl) / np.sqrt(4 * np.pi * tt)
    return out


def heat_kernel_diag(model: SpectralModel, a, t) -> np.ndarray:
    """Exact diagonal heat kernel K_t(a, a) as a product of axis kernels."""
    a = model.reduce_point(a)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t <= 0):
        raise ValueError("t must be positive")
    out = np.ones_like(t)
    for d in range(model.dimension):
        out *= _axis_heat_diag(model, d, a[d], t)
    return out


def heat_kernel_constant(model: SpectralModel, a, t_lo: float, t_hi: float,
                         n_grid: int = 400) -> float:
    """Catalog constant C with K_t(a,a) <= 1/V + C t^{-D/2} on [t_lo, t_hi].

    Taken as the maximum of t^{D/2} (K_t - 1/V)_+ over a dense log grid,
    padded by 5 percent for off-grid values.
    """
    t = np.geomspace(t_lo, t_hi, n_grid)
    K = heat_kernel_diag(model, a, t)
    excess = np.maximum(K - 1.0 / model.volume, 0.0)
    return float(1.05 * np.max(excess * t ** (model.dimension / 2.0)))


def weyl_upper_coeffs(model: SpectralModel) -> list[tuple[float, float]]:
    """Coefficients (c, q) with #modes(energy <= E) <= sum c E^q for all E >= 0.

    Dirichlet products are bounded by the ellipsoid volume alone (each
    lattice point owns the unit cell below-left of it, which stays inside
    the ellipsoid).  Torus lattices get a half-cell-diagonal padding.
    """
    Ls = model.lengths
    if model.kind == "interval-Dirichlet-1D":
        return [(Ls[0] / math.pi, 0.5)]
    if model.kind == "rectangle-Dirichlet-2D":
        return [(Ls[0] * Ls[1] / (4 * math.pi), 1.0)]
    if model.kind == "box-Dirichlet-3D":
        return [(Ls[0] * Ls[1] * Ls[2] / (6 * math.pi**2), 1.5)]
    if model.kind == "torus-2D":
        r1, r2 = (L / (2 * math.pi) for L in Ls)
        pad = math.sqrt(2.0) / 2.0
        # pi (r1 sqrt(E) + pad)(r2 sqrt(E) + pad) expanded in powers of E
        return [
            (math.pi * r1 * r2, 1.0),
            (math.pi * pad * (r1 + r2), 0.5),
            (math.pi * pad**2, 0.0),
        ]
    r1, r2, r3 = (L / (2 * math.pi) for L in Ls)
    pad = math.sqrt(3.0) / 2.0
    c = 4.0 * math.pi / 3.0
    return [
        (c * r1 * r2 * r3, 1.5),
        (c * pad * (r1 * r2 + r1 * r3 + r2 * r3), 1.0),
        (c * pad**2 * (r1 + r2 + r3), 0.5),
        (c * pad**3, 0.0),
    ]


def max_mode_weight(model: SpectralModel) -> float:
    """Upper bound on |phi_n(a)|^2 for any single mode and point."""
    return float(2 ** model.dimension / model.volume)
