"""Single Morse oscillator in dimensionless units.

The oscillator Hamiltonian, in units of hbar*omega, reads

    h = p**2 / kappa + (kappa / 4) * y**2,    y = 1 - exp(-q),  p = -i d/dq

so that its levels are ``(v + 1/2) - (v + 1/2)**2 / kappa`` and the well
depth is ``kappa / 4``.  Matrix elements of ``y`` and ``d/dq`` are computed
by composite Gauss-Legendre quadrature with panel doubling until the tables
stop changing.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np
from scipy import special

__all__ = [
    "MorseWell",
    "MorseTables",
    "QuadratureError",
    "morse_energy",
    "morse_energies",
    "morse_wavefunction",
    "morse_wavefunction_derivative",
    "morse_tables",
    "matrix_y",
    "matrix_p",
    "QBAR_DOMAIN",
]

#: Default integration window in the dimensionless coordinate.
QBAR_DOMAIN = (-3.0, 12.0)

_GL_ORDER = 32
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(_GL_ORDER)


class QuadratureError(ArithmeticError):
    """Matrix-element quadrature failed to reach the requested tolerance."""

    def __init__(self, achieved: float, requested: float):
        super().__init__(
            f"quadrature did not converge: achieved {achieved:.3e}, requested {requested:.3e}"
        )
        self.achieved = achieved
        self.requested = requested


@dataclass(frozen=True)
class MorseWell:
    """A Morse well truncated to its lowest ``n_basis`` levels.

    Parameters
    ----------
    kappa : float
        Dimensionless depth parameter, ``kappa = 2j + 1 = 4D / (hbar omega)``.
    omega : float
        Harmonic frequency in cm^-1.
    n_basis : int
        Number of retained levels ``v = 0 .. n_basis - 1``.
    """

    kappa: float
    omega: float = 1.0
    n_basis: int = 9

    def __post_init__(self):
        if self.n_basis < 1:
            raise ValueError(f"n_basis must be >= 1, got {self.n_basis}")
        if not self.omega > 0:
            raise ValueError(f"omega must be positive, got {self.omega}")
        if not self.kappa > 2 * self.n_basis:
            raise ValueError(
                f"kappa={self.kappa} does not bind {self.n_basis} levels (need kappa > 2*n_basis)"
            )

    @property
    def j(self) -> float:
        return 0.5 * (self.kappa - 1.0)

    @property
    def depth(self) -> float:
        """Well depth D in cm^-1."""
        return 0.25 * self.omega * self.kappa


def morse_energy(well: MorseWell, v: int) -> float:
    """Dimensionless level energy ``(v + 1/2) - (v + 1/2)**2 / kappa``."""
    if not 0 <= v < well.n_basis:
        raise IndexError(f"level {v} outside 0..{well.n_basis - 1}")
    x = v + 0.5
    return x - x * x / well.kappa


def morse_energies(well: MorseWell) -> np.ndarray:
    x = np.arange(well.n_basis) + 0.5
    return x - x * x / well.kappa


def _log_norm(kappa: float, v: int) -> float:
    s = 0.5 * (kappa - 1.0) - v
    return 0.5 * (special.gammaln(v + 1.0) + np.log(2.0 * s) - special.gammaln(kappa - v))


def _check_grid(qbar) -> np.ndarray:
    q = np.asarray(qbar, dtype=float)
    if q.ndim != 1:
        raise ValueError("grid must be one-dimensional")
    if q.size > 1 and np.any(np.diff(q) <= 0):
        raise ValueError("grid must be strictly increasing")
    return q


def _envelope(kappa: float, v: int, q: np.ndarray):
    # Evaluated in log space: z**s overflows for large kappa.
    s = 0.5 * (kappa - 1.0) - v
    z = kappa * np.exp(-q)
    env = np.exp(_log_norm(kappa, v) + s * (np.log(kappa) - q) - 0.5 * z)
    return s, z, env


def _wavefunctions(kappa: float, n: int, q: np.ndarray) -> np.ndarray:
    out = np.empty((n, q.size))
    for v in range(n):
        s, z, env = _envelope(kappa, v, q)
        out[v] = env * special.eval_genlaguerre(v, 2.0 * s, z)
    return out


def _derivatives(kappa: float, n: int, q: np.ndarray) -> np.ndarray:
    # d/dq = -z d/dz and dL_v^a/dz = -L_{v-1}^{a+1}
    out = np.empty((n, q.size))
    for v in range(n):
        s, z, env = _envelope(kappa, v, q)
        lag = special.eval_genlaguerre(v, 2.0 * s, z)
        dlag = special.eval_genlaguerre(v - 1, 2.0 * s + 1.0, z) if v > 0 else 0.0
        out[v] = -env * ((s - 0.5 * z) * lag - z * dlag)
    return out


def morse_wavefunction(well: MorseWell, v: int, qbar_grid) -> np.ndarray:
    """Bound-state eigenfunction ``psi_v(qbar)`` on a strictly increasing grid.

    Uses the Laguerre form in ``z = kappa * exp(-qbar)``; the sign convention
    makes every function positive in the dissociative tail (large ``qbar``),
    which is also the sign of the matching harmonic-oscillator function.
    """
    if not 0 <= v < well.n_basis:
        raise IndexError(f"level {v} outside 0..{well.n_basis - 1}")
    q = _check_grid(qbar_grid)
    return _wavefunctions(well.kappa, v + 1, q)[v]


def morse_wavefunction_derivative(well: MorseWell, v: int, qbar_grid) -> np.ndarray:
    if not 0 <= v < well.n_basis:
        raise IndexError(f"level {v} outside 0..{well.n_basis - 1}")
    q = _check_grid(qbar_grid)
    return _derivatives(well.kappa, v + 1, q)[v]


@dataclass(frozen=True)
class MorseTables:
    """Quadrature results for one ``(kappa, n_basis)`` pair.

    ``y`` is symmetric, ``m`` antisymmetric with ``m[i, j] = <i|d/dq|j>``;
    the momentum matrix is ``p = -i m``, hence ``p1 p2 = -m (x) m``.
    ``gram`` is the raw overlap matrix before renormalisation and
    ``expq`` holds ``<i|exp(-q)|j>``.
    """

    kappa: float
    n_basis: int
    y: np.ndarray
    m: np.ndarray
    expq: np.ndarray
    gram: np.ndarray
    n_panels: int
    achieved_tol: float


def _panel_nodes(a: float, b: float, n_panels: int):
    edges = np.linspace(a, b, n_panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    x = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    w = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
    return x, w


def _tables_on(kappa: float, n: int, n_panels: int, domain):
    x, w = _panel_nodes(domain[0], domain[1], n_panels)
    psi = _wavefunctions(kappa, n, x)
    dpsi = _derivatives(kappa, n, x)
    pw = psi * w
    gram = pw @ psi.T
    expq = (pw * np.exp(-x)) @ psi.T
    y = gram - expq
    m = pw @ dpsi.T
    return gram, y, expq, m


def _compute_tables(kappa: float, n: int, tol: float, domain, max_panels: int) -> MorseTables:
    n_panels = 16
    prev = _tables_on(kappa, n, n_panels, domain)
    while True:
        n_panels *= 2
        cur = _tables_on(kappa, n, n_panels, domain)
        # relative to each table's scale: |M| grows like sqrt(kappa)
        err = max(
            float(np.max(np.abs(a - b)) / max(1.0, np.max(np.abs(a)))) for a, b in zip(cur, prev)
        )
        if err < tol:
            break
        if n_panels >= max_panels:
            raise QuadratureError(err, tol)
        prev = cur
    gram, y, expq, m = cur
    # renormalise with the quadrature norms; the closed-form constant agrees to ~1e-12
    scale = 1.0 / np.sqrt(np.diag(gram))
    outer = np.outer(scale, scale)
    y = 0.5 * (y + y.T) * outer
    expq = 0.5 * (expq + expq.T) * outer
    m = 0.5 * (m - m.T) * outer
    for arr in (y, m, expq, gram):
        arr.setflags(write=False)
    return MorseTables(kappa, n, y, m, expq, gram, n_panels, err)


@functools.lru_cache(maxsize=4096)
def _cached_tables(kappa_key: float, n: int, tol: float, domain, max_panels: int) -> MorseTables:
    return _compute_tables(kappa_key, n, tol, domain, max_panels)


def morse_tables(
    well: MorseWell,
    tol: float = 1e-10,
    domain=QBAR_DOMAIN,
    max_panels: int = 8192,
) -> MorseTables:
    """Matrix elements of ``y``, ``d/dq`` and ``exp(-q)`` for ``well``.

    Results are cached on ``kappa`` rounded to 12 significant digits.
    """
    key = float(f"{well.kappa:.12g}")
    return _cached_tables(key, well.n_basis, float(tol), tuple(map(float, domain)), int(max_panels))


def matrix_y(well: MorseWell) -> np.ndarray:
    """Symmetric matrix ``<v'| 1 - exp(-q) |v>``."""
    return morse_tables(well).y


def matrix_p(well: MorseWell) -> np.ndarray:
    """Antisymmetric ``M`` with ``M[v', v] = <v'| d/dq |v>`` (so ``p = -i M``)."""
    return morse_tables(well).m
