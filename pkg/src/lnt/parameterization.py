"""Water to CO2 path in (x_g, x_f, omega, kappa) space and locality measures."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

__all__ = [
    "MoleculeParams",
    "PathSpec",
    "HarmonicCouplings",
    "CatalogEntry",
    "WATER",
    "CO2",
    "default_path",
    "params_at",
    "gamma",
    "zeta",
    "xi",
    "harmonic_couplings",
    "morse_beta",
    "load_catalog",
    "CatalogError",
]


@dataclass(frozen=True)
class MoleculeParams:
    """One point of the transition path.

    ``x_f = f_rr'/f_rr`` and ``x_g = g_rr'/g_rr`` are the coupling ratios,
    ``omega`` the local harmonic frequency (cm^-1), ``kappa`` the Morse
    depth parameter.
    """

    x_f: float
    x_g: float
    omega: float
    kappa: float

    def __post_init__(self):
        if not (abs(self.x_f) < 1 and abs(self.x_g) < 1):
            raise ValueError(f"|x_f|, |x_g| must be < 1, got x_f={self.x_f}, x_g={self.x_g}")
        if not self.omega > 0:
            raise ValueError(f"omega must be positive, got {self.omega}")
        if not self.kappa > 2:
            raise ValueError(f"kappa must exceed 2, got {self.kappa}")

    @property
    def t(self) -> float:
        return self.x_g


WATER = MoleculeParams(x_f=-0.012, x_g=-0.015, omega=1853.0, kappa=48.0)
CO2 = MoleculeParams(x_f=0.047, x_g=-0.571, omega=959.0, kappa=160.0)


@dataclass(frozen=True)
class PathSpec:
    local_endpoint: MoleculeParams
    normal_endpoint: MoleculeParams
    t_grid: np.ndarray = field(repr=False)

    def __post_init__(self):
        grid = np.asarray(self.t_grid, dtype=float)
        if grid.ndim != 1 or grid.size < 2:
            raise ValueError("t_grid needs at least two points")
        d = np.diff(grid)
        if not (np.all(d > 0) or np.all(d < 0)):
            raise ValueError("t_grid must be strictly monotone")
        lo, hi = sorted((self.local_endpoint.x_g, self.normal_endpoint.x_g))
        if grid.min() < lo or grid.max() > hi:
            raise ValueError(f"t_grid leaves the interval [{lo}, {hi}]")
        grid.setflags(write=False)
        object.__setattr__(self, "t_grid", grid)

    @property
    def step(self) -> float:
        return float(abs(self.t_grid[1] - self.t_grid[0]))

    def with_grid(self, t_grid) -> "PathSpec":
        return PathSpec(self.local_endpoint, self.normal_endpoint, t_grid)


def default_path(step: float = 5e-4) -> PathSpec:
    """Linear path from water (t = -0.015) to CO2 (t = -0.571).

    The grid runs from the local to the normal end; with the default step
    it has 1113 points and hits both endpoints exactly.
    """
    a, b = WATER.x_g, CO2.x_g
    n = int(round(abs(b - a) / step)) + 1
    grid = np.linspace(a, b, n)
    return PathSpec(WATER, CO2, grid)


def params_at(path: PathSpec, t: float) -> MoleculeParams:
    """Affine interpolation of ``(x_f, omega, kappa)`` in ``t = x_g``.

    Pinned at both endpoints, so ``params_at(path, x_g_local)`` returns the
    local endpoint exactly.
    """
    lo_p, hi_p = path.local_endpoint, path.normal_endpoint
    lo, hi = sorted((lo_p.x_g, hi_p.x_g))
    if not lo <= t <= hi:
        raise ValueError(f"t={t} outside the path interval [{lo}, {hi}]")
    if t == lo_p.x_g:
        return lo_p
    if t == hi_p.x_g:
        return hi_p
    s = (t - lo_p.x_g) / (hi_p.x_g - lo_p.x_g)

    def lerp(a, b):
        return a + s * (b - a)

    return MoleculeParams(
        x_f=lerp(lo_p.x_f, hi_p.x_f),
        x_g=float(t),
        omega=lerp(lo_p.omega, hi_p.omega),
        kappa=lerp(lo_p.kappa, hi_p.kappa),
    )


def gamma(x_f: float, x_g: float) -> float:
    """Polyad-breaking strength ``(x_f - x_g)**2 / 8``."""
    return 0.125 * (x_f - x_g) ** 2


def zeta(delta_E: float, mean_E: float) -> float:
    """``(2/pi) arctan(delta_E / mean_E)`` for the splitting of the fundamentals."""
    if not mean_E > 0:
        raise ValueError(f"mean_E must be positive, got {mean_E}")
    return 2.0 / math.pi * math.atan(delta_E / mean_E)


def xi(lam: float, omega_x: float) -> float:
    """Degree of locality ``(2/pi) arctan(lambda / omega_x)``."""
    if omega_x == 0:
        raise ValueError("omega_x must be nonzero")
    return 2.0 / math.pi * math.atan(lam / omega_x)


class HarmonicCouplings(NamedTuple):
    lam: float
    lam_prime: float
    omega_g: float
    omega_u: float


def harmonic_couplings(p: MoleculeParams) -> HarmonicCouplings:
    """Couplings and normal frequencies (cm^-1) of the quadratic model."""
    half = 0.5 * p.omega
    return HarmonicCouplings(
        lam=half * (p.x_f + p.x_g),
        lam_prime=half * (p.x_f - p.x_g),
        omega_g=p.omega * math.sqrt((1 + p.x_f) * (1 + p.x_g)),
        omega_u=p.omega * math.sqrt((1 - p.x_f) * (1 - p.x_g)),
    )


def morse_beta(p: MoleculeParams, g_rr: float, hbar: float = 1.0) -> float:
    """Morse range parameter ``sqrt(2 omega / (hbar kappa g_rr))``.

    Only meaningful with a user-supplied ``g_rr`` in consistent units; the
    dimensionless calculations never need it.
    """
    if not g_rr > 0:
        raise ValueError("g_rr must be positive")
    return math.sqrt(2.0 * p.omega / (hbar * p.kappa * g_rr))


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    x_f: float
    x_g: float
    omega: float | None = None
    kappa: float | None = None
    nu1: float | None = None
    nu3: float | None = None

    @property
    def gamma(self) -> float:
        return gamma(self.x_f, self.x_g)

    @property
    def zeta(self) -> float | None:
        if self.nu1 is None or self.nu3 is None:
            return None
        return zeta(self.nu1 - self.nu3, 0.5 * (self.nu1 + self.nu3))


class CatalogError(ValueError):
    def __init__(self, path, lineno: int, msg: str):
        super().__init__(f"{path}:{lineno}: {msg}")
        self.lineno = lineno


_CATALOG_KEYS = {"name", "x_f", "x_g", "omega", "kappa", "nu1", "nu3"}
_REQUIRED = {"name", "x_f", "x_g"}


def load_catalog(path) -> list[CatalogEntry]:
    """Read a molecule catalog.

    One molecule per line as whitespace-separated ``key=value`` pairs;
    ``#`` starts a comment.  Keys: name, x_f, x_g (required), omega, kappa,
    nu1, nu3 (optional; nu1/nu3 are the fundamentals in cm^-1)::

        # name=... x_f=... x_g=... [omega=...] [kappa=...] [nu1=... nu3=...]
        name=SO2 x_f=0.05 x_g=-0.02 nu1=1151 nu3=1362
    """
    path = Path(path)
    entries = []
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = {}
        for tok in line.split():
            if "=" not in tok:
                raise CatalogError(path, lineno, f"expected key=value, got {tok!r}")
            key, val = tok.split("=", 1)
            if key not in _CATALOG_KEYS:
                raise CatalogError(path, lineno, f"unknown key {key!r}")
            if key in fields:
                raise CatalogError(path, lineno, f"duplicate key {key!r}")
            fields[key] = val
        missing = _REQUIRED - fields.keys()
        if missing:
            raise CatalogError(path, lineno, f"missing keys {sorted(missing)}")
        try:
            numeric = {k: float(v) for k, v in fields.items() if k != "name"}
        except ValueError as exc:
            raise CatalogError(path, lineno, str(exc)) from None
        entries.append(CatalogEntry(name=fields["name"], **numeric))
    return entries
