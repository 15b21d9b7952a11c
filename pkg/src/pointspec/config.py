"""Run configuration: a single TOML file holds every physics parameter.

Only paths, output formats, and thread counts live on command-line flags;
anything that affects numbers is in the file so a run is reproducible from
the file alone.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from pointspec.errors import ConfigError
from pointspec.models import KINDS, SpectralModel, make_model
from pointspec.secular import PointSpectrum, Scheme, prepare_point_spectrum

DEFAULT_CHECKS = ["gram", "completeness", "oracle", "scheme-invariance", "heat-kernel", "krein"]


@dataclass
class RunConfig:
    model: SpectralModel
    centers: list
    scheme: Scheme
    k_max: int
    tol: float
    max_cutoff: int
    checks: list
    verify_tols: dict
    oracle_N: int
    out_dir: str
    formats: list
    eigfun_grid: tuple | None
    ground_energy: float | None = None
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def center(self):
        return self.centers[0]


def _require(table: dict, key: str, context: str):
    if key not in table:
        raise ConfigError(f"missing required field '{context}.{key}'")
    return table[key]


def _positive(value, context: str) -> float:
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"field '{context}' must be a number, got {value!r}")
    if not (math.isfinite(v) and v > 0):
        raise ConfigError(f"field '{context}' must be positive, got {value!r}")
    return v


def load_config(path) -> RunConfig:
    """Parse and validate a run configuration file."""
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    with open(p, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"config parse error in {p}: {exc}") from exc

    model_tab = _require(data, "model", "")
    kind = _require(model_tab, "kind", "model")
    if kind not in KINDS:
        raise ConfigError(f"model.kind {kind!r} not one of {KINDS}")
    lengths = _require(model_tab, "lengths", "model")
    try:
        model = make_model(kind, lengths)
    except ValueError as exc:
        raise ConfigError(f"model: {exc}") from exc

    inter = _require(data, "interaction", "")
    if "centers" in inter:
        centers = [list(map(float, c)) for c in inter["centers"]]
    else:
        centers = [list(map(float, _require(inter, "center", "interaction")))]
    for i, c in enumerate(centers):
        if not model.contains(c):
            raise ConfigError(
                f"interaction center {i} at {c} lies outside the model domain"
            )

    sch_tab = _require(data, "scheme", "")
    mu_sq = _positive(_require(sch_tab, "mu_sq", "scheme"), "scheme.mu_sq")
    ground_energy = sch_tab.get("ground_energy")
    if ground_energy is not None:
        scheme = None  # resolved against the spectrum in prepare_spectrum
        ground_energy = float(ground_energy)
        alpha_R = float(sch_tab.get("alpha_R", 1.0))
    else:
        alpha_R = _require(sch_tab, "alpha_R", "scheme")
        try:
            scheme = Scheme(alpha_R=float(alpha_R), mu_sq=mu_sq)
        except ValueError as exc:
            raise ConfigError(f"scheme: {exc}") from exc

    solver = data.get("solver", {})
    k_max = int(solver.get("k_max", 8))
    if k_max < 1:
        raise ConfigError("solver.k_max must be >= 1")
    tol = _positive(solver.get("tol", 1e-10), "solver.tol")
    max_cutoff = int(solver.get("max_cutoff", 4_000_000))

    verify = data.get("verify", {})
    checks = list(verify.get("checks", DEFAULT_CHECKS))
    bad = [c for c in checks if c not in DEFAULT_CHECKS]
    if bad:
        raise ConfigError(f"verify.checks: unknown check(s) {bad}; allowed {DEFAULT_CHECKS}")
    verify_tols = {
        "gram": _positive(verify.get("gram_tol", 1e-6), "verify.gram_tol"),
        "completeness": _positive(verify.get("completeness_tol", 1e-3), "verify.completeness_tol"),
    }
    oracle_N = int(verify.get("oracle_N", 1024))

    output = data.get("output", {})
    out_dir = str(output.get("directory", "out"))
    formats = list(output.get("formats", ["csv", "json"]))
    for f in formats:
        if f not in ("csv", "json"):
            raise ConfigError(f"output.formats entries must be csv or json, got {f!r}")

    eig = data.get("eigfun", {})
    eigfun_grid = tuple(int(g) for g in eig["grid"]) if "grid" in eig else None

    if scheme is None:
        scheme = Scheme(alpha_R=alpha_R, mu_sq=mu_sq)  # placeholder before resolution
    return RunConfig(
        model=model,
        centers=centers,
        scheme=scheme,
        k_max=k_max,
        tol=tol,
        max_cutoff=max_cutoff,
        checks=checks,
        verify_tols=verify_tols,
        oracle_N=oracle_N,
        out_dir=out_dir,
        formats=formats,
        eigfun_grid=eigfun_grid,
        ground_energy=ground_energy,
        raw=data,
    )


def prepare_spectrum(cfg: RunConfig, center=None, min_levels=None,
                     min_cap: float = 0.0) -> tuple[PointSpectrum, Scheme]:
    """Point spectrum sized for the configured k_max, and the resolved scheme.

    The enumeration cap grows until the spectrum covers the requested
    levels with the margin the tail machinery needs.
    """
    a = center if center is not None else cfg.center
    want = (min_levels if min_levels is not None else cfg.k_max) + 3
    cap = max(min_cap, 40.0 / min(cfg.model.lengths) ** 2, 12.0 * cfg.scheme.mu_sq)
    if cfg.ground_energy is not None:
        cap = max(cap, 4.0 * abs(cfg.ground_energy))
    levels = None
    for _ in range(60):
        levels = prepare_point_spectrum(cfg.model, a, cap)
        if len(levels.levels) > want:
            e_top = levels.levels[want].energy
            if cap >= 3.6 * e_top:
                break
            cap = 3.6 * e_top
        else:
            cap *= 2.0
        if len(levels.modes) > cfg.max_cutoff:
            raise ConfigError(
                f"solver.max_cutoff={cfg.max_cutoff} too small for k_max={cfg.k_max}"
            )
    scheme = cfg.scheme
    if cfg.ground_energy is not None:
        from pointspec.secular import scheme_for_ground_energy

        scheme = scheme_for_ground_energy(levels, cfg.ground_energy, cfg.scheme.mu_sq)
    return levels, scheme
