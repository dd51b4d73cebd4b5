"""Classical analogue of the coupled-Morse Hamiltonian.

In units of hbar*omega and dimensionless time omega*tau,

    H = (p1^2 + p2^2)/kappa + (2 t/kappa) p1 p2
        + (kappa/4)(y1^2 + y2^2) + (kappa x_f / 2) y1 y2,   y = 1 - exp(-q)

which carries the same coupling coefficients as the quantum operator,
dissociates at kappa/4 per bond and oscillates with unit frequency near
the minimum.  H is separable (T(p) + V(q)) so leapfrog applies directly.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .parameterization import MoleculeParams

__all__ = [
    "PhaseState",
    "SectionSpec",
    "SectionResult",
    "LyapunovResult",
    "IntegrationError",
    "classical_energy",
    "energies",
    "step",
    "integrate",
    "initial_conditions",
    "poincare_section",
    "lyapunov_estimate",
    "lyapunov_grid",
    "ESCAPE_BOUND",
]

log = logging.getLogger(__name__)

# the bundled TBB is too old for numba; skip straight to OpenMP / workqueue
numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

ESCAPE_BOUND = 50.0

_CBRT2 = 2.0 ** (1.0 / 3.0)
_W1 = 1.0 / (2.0 - _CBRT2)
_W0 = -_CBRT2 * _W1


class IntegrationError(ArithmeticError):
    pass


@dataclass(frozen=True)
class PhaseState:
    qbar1: float
    qbar2: float
    pbar1: float
    pbar2: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in self.as_array()):
            raise ValueError(f"non-finite phase state {self}")

    def as_array(self) -> np.ndarray:
        return np.array([self.qbar1, self.qbar2, self.pbar1, self.pbar2], dtype=float)

    @classmethod
    def from_array(cls, x) -> "PhaseState":
        return cls(*(float(v) for v in x))

    def swapped(self) -> "PhaseState":
        return PhaseState(self.qbar2, self.qbar1, self.pbar2, self.pbar1)


# -- numba kernels --------------------------------------------------------------
# state layout: x = [q1, q2, p1, p2]


@numba.njit(cache=True)
def _energy(x, kappa, t, xf):
    y1 = 1.0 - math.exp(-x[0])
    y2 = 1.0 - math.exp(-x[1])
    kin = (x[2] * x[2] + x[3] * x[3] + 2.0 * t * x[2] * x[3]) / kappa
    pot = 0.25 * kappa * (y1 * y1 + y2 * y2) + 0.5 * kappa * xf * y1 * y2
    return kin + pot


@numba.njit(cache=True)
def _leapfrog(x, h, kappa, t, xf):
    # position Verlet: drift h/2, kick h, drift h/2
    c = h / kappa
    x[0] += c * (x[2] + t * x[3])
    x[1] += c * (x[3] + t * x[2])
    e1 = math.exp(-x[0])
    e2 = math.exp(-x[1])
    y1 = 1.0 - e1
    y2 = 1.0 - e2
    x[2] -= h * (0.5 * kappa * y1 + 0.5 * kappa * xf * y2) * e1
    x[3] -= h * (0.5 * kappa * y2 + 0.5 * kappa * xf * y1) * e2
    x[0] += c * (x[2] + t * x[3])
    x[1] += c * (x[3] + t * x[2])


@numba.njit(cache=True)
def _advance(x, h, kappa, t, xf, order):
    if order == 4:
        _leapfrog(x, _W1 * h, kappa, t, xf)
        _leapfrog(x, _W0 * h, kappa, t, xf)
        _leapfrog(x, _W1 * h, kappa, t, xf)
    else:
        _leapfrog(x, h, kappa, t, xf)


@numba.njit(cache=True)
def _integrate(x, h, n_steps, kappa, t, xf, order):
    for _ in range(n_steps):
        _advance(x, h, kappa, t, xf, order)


@numba.njit(cache=True)
def _energy_trace(x, h, n_steps, kappa, t, xf, order):
    out = np.empty(n_steps + 1)
    out[0] = _energy(x, kappa, t, xf)
    for k in range(n_steps):
        _advance(x, h, kappa, t, xf, order)
        out[k + 1] = _energy(x, kappa, t, xf)
    return out


@numba.njit(cache=True)
def _refine_crossing(x_prev, h, kappa, t, xf, order, q2star, tol):
    # regula falsi (Illinois) on the fraction of the step that hits q2 = q2star
    lo, hi = 0.0, 1.0
    glo = x_prev[1] - q2star
    trial = x_prev.copy()
    _advance(trial, h, kappa, t, xf, order)
    ghi = trial[1] - q2star
    side = 0
    out = trial
    for _ in range(60):
        if ghi == glo:
            tau = 0.5 * (lo + hi)
        else:
            tau = lo - glo * (hi - lo) / (ghi - glo)
        if not (lo < tau < hi):
            tau = 0.5 * (lo + hi)
        trial = x_prev.copy()
        if tau > 0.0:
            _advance(trial, tau * h, kappa, t, xf, order)
        g = trial[1] - q2star
        out = trial
        if abs(g) < tol:
            break
        if g < 0.0:
            lo, glo = tau, g
            if side == -1:
                ghi *= 0.5
            side = -1
        else:
            hi, ghi = tau, g
            if side == 1:
                glo *= 0.5
            side = 1
    return out


@numba.njit(cache=True)
def _section_one(x0, h, kappa, t, xf, order, q2star, max_cross, max_steps, escape, tol):
    pts = np.empty((max_cross, 4))
    x = x0.copy()
    prev = x0.copy()
    n = 0
    escaped = False
    for _ in range(max_steps):
        prev[:] = x
        _advance(x, h, kappa, t, xf, order)
        if abs(x[0]) > escape or abs(x[1]) > escape or not math.isfinite(x[0] + x[1] + x[2] + x[3]):
            escaped = True
            break
        if prev[1] < q2star <= x[1]:
            c = _refine_crossing(prev, h, kappa, t, xf, order, q2star, tol)
            pts[n, :] = c
            n += 1
            if n >= max_cross:
                break
    return pts[:n], escaped


@numba.njit(cache=True, parallel=True)
def _section_many(xs, h, kappa, t, xf, order, q2star, max_cross, max_steps, escape, tol):
    n = xs.shape[0]
    pts = np.zeros((n, max_cross, 4))
    counts = np.zeros(n, dtype=np.int64)
    esc = np.zeros(n, dtype=np.bool_)
    for i in numba.prange(n):
        p, e = _section_one(xs[i], h, kappa, t, xf, order, q2star, max_cross, max_steps, escape, tol)
        pts[i, : p.shape[0]] = p
        counts[i] = p.shape[0]
        esc[i] = e
    return pts, counts, esc


@numba.njit(cache=True)
def _lyapunov_one(x0, h, n_steps, renorm, d0, kappa, t, xf, order, escape):
    x = x0.copy()
    s = x0.copy()
    for i in range(4):
        s[i] += 0.5 * d0
    total = 0.0
    done = 0
    while done < n_steps:
        k = min(renorm, n_steps - done)
        for _ in range(k):
            _advance(x, h, kappa, t, xf, order)
            _advance(s, h, kappa, t, xf, order)
        done += k
        if abs(x[0]) > escape or abs(x[1]) > escape or abs(s[0]) > escape or abs(s[1]) > escape:
            return np.nan, True
        d = 0.0
        for i in range(4):
            d += (s[i] - x[i]) ** 2
        d = math.sqrt(d)
        if not (d > 0.0 and math.isfinite(d)):
            return np.nan, True
        total += math.log(d / d0)
        for i in range(4):
            s[i] = x[i] + (s[i] - x[i]) * (d0 / d)
    return total / (n_steps * h), False


@numba.njit(cache=True, parallel=True)
def _lyapunov_many(xs, h, n_steps, renorm, d0, kappa, t, xf, order, escape):
    n = xs.shape[0]
    lam = np.empty(n)
    esc = np.zeros(n, dtype=np.bool_)
    for i in numba.prange(n):
        lam[i], esc[i] = _lyapunov_one(xs[i], h, n_steps, renorm, d0, kappa, t, xf, order, escape)
    return lam, esc


# -- public API -----------------------------------------------------------------


def _coeffs(p: MoleculeParams):
    return float(p.kappa), float(p.x_g), float(p.x_f)


def classical_energy(s: PhaseState, p: MoleculeParams) -> float:
    """Energy in units of hbar*omega; the potential minimum is 0."""
    return float(_energy(s.as_array(), *_coeffs(p)))


def energies(xs, p: MoleculeParams) -> np.ndarray:
    """Vectorized energy of an ``(..., 4)`` array of phase points."""
    xs = np.asarray(xs, dtype=float)
    kappa, t, xf = _coeffs(p)
    y1 = 1.0 - np.exp(-xs[..., 0])
    y2 = 1.0 - np.exp(-xs[..., 1])
    p1, p2 = xs[..., 2], xs[..., 3]
    kin = (p1 * p1 + p2 * p2 + 2.0 * t * p1 * p2) / kappa
    return kin + 0.25 * kappa * (y1 * y1 + y2 * y2) + 0.5 * kappa * xf * y1 * y2


def step(s, h: float, p: MoleculeParams, order: int = 2):
    """One symplectic step of size ``h`` (dimensionless time).

    ``order=2`` is a single position-Verlet (leapfrog) step; ``order=4``
    composes three leapfrog substeps (Yoshida triple jump).  Accepts a
    :class:`PhaseState` or a length-4 array and returns the same type;
    complex arrays are supported for derivative checks.
    """
    if not h > 0:
        raise ValueError("h must be positive")
    kappa, t, xf = _coeffs(p)
    if isinstance(s, PhaseState):
        x = s.as_array()
        _advance(x, h, kappa, t, xf, order)
        if not np.all(np.isfinite(x)):
            raise IntegrationError("non-finite state after step")
        return PhaseState.from_array(x)
    x = np.array(s)
    if np.iscomplexobj(x):
        _py_advance(x, h, kappa, t, xf, order)
    else:
        x = x.astype(float)
        _advance(x, h, kappa, t, xf, order)
    if not np.all(np.isfinite(x)):
        raise IntegrationError("non-finite state after step")
    return x


def _py_leapfrog(x, h, kappa, t, xf):
    c = h / kappa
    x[0] += c * (x[2] + t * x[3])
    x[1] += c * (x[3] + t * x[2])
    e1, e2 = np.exp(-x[0]), np.exp(-x[1])
    y1, y2 = 1.0 - e1, 1.0 - e2
    x[2] -= h * (0.5 * kappa * y1 + 0.5 * kappa * xf * y2) * e1
    x[3] -= h * (0.5 * kappa * y2 + 0.5 * kappa * xf * y1) * e2
    x[0] += c * (x[2] + t * x[3])
    x[1] += c * (x[3] + t * x[2])


def _py_advance(x, h, kappa, t, xf, order):
    if order == 4:
        for w in (_W1, _W0, _W1):
            _py_leapfrog(x, w * h, kappa, t, xf)
    else:
        _py_leapfrog(x, h, kappa, t, xf)


def integrate(s, h: float, n_steps: int, p: MoleculeParams, order: int = 2,
              energy_trace: bool = False):
    """Advance ``n_steps`` steps; optionally return the energy after each step."""
    kappa, t, xf = _coeffs(p)
    x = (s.as_array() if isinstance(s, PhaseState) else np.array(s, dtype=float)).copy()
    if energy_trace:
        trace = _energy_trace(x, float(h), int(n_steps), kappa, t, xf, int(order))
    else:
        _integrate(x, float(h), int(n_steps), kappa, t, xf, int(order))
    if not np.all(np.isfinite(x)):
        raise IntegrationError("trajectory became non-finite")
    out = PhaseState.from_array(x) if isinstance(s, PhaseState) else x
    return (out, trace) if energy_trace else out


@dataclass(frozen=True)
class SectionSpec:
    """Surface of section ``q2 = q2_star`` crossed upwards, at fixed energy.

    ``energy`` is in units of hbar*omega above the classical minimum.
    """

    energy: float
    q2_star: float = 0.0
    max_crossings: int = 400
    t_max: float = 2.0e4
    h: float = 0.005
    ic_grid: int = 16
    order: int = 4
    escape: float = ESCAPE_BOUND

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("h must be positive")
        if not self.energy > 0:
            raise ValueError("energy must lie above the potential minimum")
        if self.ic_grid < 1 or self.max_crossings < 1:
            raise ValueError("ic_grid and max_crossings must be positive")


def _p2_upper(q1, p1, energy, p: MoleculeParams, q2):
    """Root of E(q1, q2, p1, p2) = energy with dq2/dtau > 0 (nan if none)."""
    kappa, t, xf = _coeffs(p)
    y1 = 1.0 - np.exp(-q1)
    y2 = 1.0 - np.exp(-q2)
    pot = 0.25 * kappa * (y1 * y1 + y2 * y2) + 0.5 * kappa * xf * y1 * y2
    disc = kappa * (energy - pot) - (1.0 - t * t) * p1 * p1
    with np.errstate(invalid="ignore"):
        return np.where(disc > 0, -t * p1 + np.sqrt(np.where(disc > 0, disc, 0.0)), np.nan)


def initial_conditions(spec: SectionSpec, p: MoleculeParams) -> np.ndarray:
    """Deterministic ``ic_grid x ic_grid`` starts on the section plane.

    Cell centres of the rectangle bounding the energetically allowed
    ``(q1, p1)`` region; points outside it are dropped.  Returns an
    ``(n, 4)`` array.
    """
    kappa, t, xf = _coeffs(p)
    e = spec.energy
    y2 = 1.0 - math.exp(-spec.q2_star)
    # V(y1) <= E is a quadratic inequality in y1
    a, b, c = 0.25 * kappa, 0.5 * kappa * xf * y2, 0.25 * kappa * y2 * y2 - e
    disc = b * b - 4 * a * c
    if disc <= 0:
        return np.empty((0, 4))
    y_lo = (-b - math.sqrt(disc)) / (2 * a)
    y_hi = (-b + math.sqrt(disc)) / (2 * a)
    q_lo = -math.log(1.0 - y_lo)
    q_hi = -math.log(1.0 - y_hi) if y_hi < 1.0 else spec.escape
    q_hi = min(q_hi, spec.escape)
    v_min = max(0.0, (c + e) - b * b / (4 * a))
    p_max = math.sqrt(kappa * max(e - v_min, 0.0) / (1.0 - t * t))
    n = spec.ic_grid
    qs = q_lo + (np.arange(n) + 0.5) * (q_hi - q_lo) / n
    ps = -p_max + (np.arange(n) + 0.5) * (2 * p_max) / n
    qq, pp = np.meshgrid(qs, ps, indexing="ij")
    p2 = _p2_upper(qq, pp, e, p, spec.q2_star)
    ok = np.isfinite(p2)
    xs = np.column_stack([qq[ok], np.full(ok.sum(), spec.q2_star), pp[ok], p2[ok]])
    return xs


@dataclass
class SectionResult:
    """Section points as rows ``(trajectory_id, q1, p1)`` plus bookkeeping."""

    points: np.ndarray
    states: np.ndarray = field(repr=False)
    initial: np.ndarray = field(repr=False)
    escaped: np.ndarray = field(repr=False)
    spec: SectionSpec | None = None

    @property
    def n_escaped(self) -> int:
        return int(np.sum(self.escaped))


def poincare_section(spec: SectionSpec, p: MoleculeParams) -> SectionResult:
    """Integrate every initial condition and record upward crossings of ``q2 = q2_star``.

    Each crossing is refined to ``|q2 - q2_star| < 1e-10`` by regula falsi
    on the fraction of the step.  Escaping trajectories (``|q| > escape``)
    keep the crossings recorded before the escape.
    """
    kappa, t, xf = _coeffs(p)
    ics = initial_conditions(spec, p)
    if len(ics) == 0:
        log.warning("no admissible initial conditions at E=%g", spec.energy)
    max_steps = int(math.ceil(spec.t_max / spec.h))
    xs = np.ascontiguousarray(ics, dtype=float).reshape(-1, 4)
    pts, counts, escaped = _section_many(xs, float(spec.h), kappa, t, xf, int(spec.order),
                                         float(spec.q2_star), int(spec.max_crossings), max_steps,
                                         float(spec.escape), 1e-10)
    st = np.concatenate([pts[i, : counts[i]] for i in range(len(xs))]) if len(xs) else np.empty((0, 4))
    ids = np.repeat(np.arange(len(xs), dtype=float), counts)
    points = np.column_stack([ids, st[:, 0], st[:, 2]]) if len(st) else np.empty((0, 3))
    return SectionResult(points, st, ics, escaped, spec)


@dataclass
class LyapunovResult:
    estimates: np.ndarray
    escaped: np.ndarray
    initial: np.ndarray = field(repr=False)

    @property
    def max(self) -> float:
        ok = ~self.escaped
        return float(np.max(self.estimates[ok])) if ok.any() else float("nan")


def lyapunov_grid(xs, p: MoleculeParams, horizon: float = 2.0e4, h: float = 0.01,
                  renorm: int = 100, d0: float = 1e-8, order: int = 2,
                  escape: float = ESCAPE_BOUND) -> LyapunovResult:
    """Two-trajectory largest-exponent estimates for each row of ``xs``.

    The shadow starts ``d0`` away along (1, 1, 1, 1)/2 and is pulled back to
    distance ``d0`` every ``renorm`` steps; the estimate is the mean log
    stretching per unit dimensionless time.  Escaped trajectories get nan.
    """
    n_steps = int(round(horizon / h))
    if n_steps < 10_000:
        raise ValueError(f"horizon/h = {n_steps} < 1e4 steps")
    xs = np.ascontiguousarray(np.atleast_2d(np.asarray(xs, dtype=float)))
    kappa, t, xf = _coeffs(p)
    lam, esc = _lyapunov_many(xs, float(h), n_steps, int(renorm), float(d0), kappa, t, xf,
                              int(order), float(escape))
    return LyapunovResult(lam, esc, xs)


def lyapunov_estimate(ic: PhaseState, p: MoleculeParams, horizon: float = 2.0e4,
                      h: float = 0.01, **kw) -> float:
    """Largest Lyapunov exponent estimate for one start; nan if it escapes."""
    res = lyapunov_grid(ic.as_array()[None, :], p, horizon, h, **kw)
    return float(res.estimates[0])
