"""Quantum diagnostics of the eigenstates: fidelity, entropy, components, densities."""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .morse_basis import MorseWell, morse_wavefunction
from .parameterization import MoleculeParams, harmonic_couplings
from .quantum_hamiltonian import TwoModeBasis

__all__ = [
    "ContractError",
    "TruncationError",
    "NormalBasisMap",
    "Components",
    "StateDiagnostics",
    "fidelity",
    "entanglement_entropy",
    "reduced_density_matrix",
    "ladder",
    "harmonic_hamiltonian",
    "squeeze_parameters",
    "build_normal_map",
    "normal_state_vector",
    "components",
    "probability_density",
    "ScanDiagnostics",
    "diagnose_scan",
    "fidelity_minima",
    "entropy_slope_extrema",
]


class ContractError(ValueError):
    """An input violated a numerical precondition (e.g. not unit norm)."""


class TruncationError(ArithmeticError):
    """Normal-mode labels could not be resolved in the padded harmonic space."""


def _check_norm(psi: np.ndarray, tol: float = 1e-6) -> None:
    nrm = float(np.linalg.norm(psi))
    if abs(nrm - 1.0) > tol:
        raise ContractError(f"state norm {nrm:.9f} deviates from 1 by more than {tol:g}")


def fidelity(psi_t, psi_t_plus) -> float:
    """Squared overlap ``|<psi(t)|psi(t + dt)>|**2``."""
    a = np.asarray(psi_t)
    b = np.asarray(psi_t_plus)
    if a.shape != b.shape:
        raise ContractError(f"shape mismatch {a.shape} vs {b.shape}")
    _check_norm(a)
    _check_norm(b)
    f = abs(np.vdot(a, b)) ** 2
    return float(min(max(f, 0.0), 1.0))


def reduced_density_matrix(psi, basis: TwoModeBasis, keep: int = 1) -> np.ndarray:
    """One-oscillator reduced density matrix, tracing out the other oscillator."""
    c = basis.to_product(np.asarray(psi, dtype=float))
    return c @ c.T if keep == 1 else c.T @ c


def entanglement_entropy(psi, basis: TwoModeBasis, keep: int = 1) -> float:
    """Von Neumann entropy (nats) of the reduced state of one oscillator."""
    psi = np.asarray(psi, dtype=float)
    _check_norm(psi)
    rho = reduced_density_matrix(psi, basis, keep)
    tr = float(np.trace(rho))
    if abs(tr - 1.0) > 1e-8:
        raise ContractError(f"reduced density matrix trace {tr} != 1")
    lam = np.clip(np.linalg.eigvalsh(rho), 0.0, None)
    lam = lam[lam > 0]
    s = float(-np.sum(lam * np.log(lam)))
    return max(s, 0.0)


def ladder(n: int) -> np.ndarray:
    """Truncated annihilation operator on ``n`` levels."""
    return np.diag(np.sqrt(np.arange(1, n)), 1)


def _two_mode_ladders(n: int):
    a = ladder(n)
    eye = np.eye(n)
    return np.kron(a, eye), np.kron(eye, a)


def harmonic_hamiltonian(p: MoleculeParams, n: int) -> np.ndarray:
    """Quadratic two-oscillator Hamiltonian (cm^-1) in the ``|n1 n2>`` basis.

    (omega/2) sum_i (a_i^+ a_i + a_i a_i^+) + lam (a1^+ a2 + a1 a2^+)
        + lam' (a1^+ a2^+ + a1 a2)
    """
    a1, a2 = _two_mode_ladders(n)
    hc = harmonic_couplings(p)
    num = a1.T @ a1 + a2.T @ a2
    h = p.omega * (num + np.eye(n * n))
    h += hc.lam * (a1.T @ a2 + a1 @ a2.T)
    h += hc.lam_prime * (a1.T @ a2.T + a1 @ a2)
    return 0.5 * (h + h.T)


def squeeze_parameters(p: MoleculeParams) -> tuple[float, float]:
    """Bogoliubov parameters of the symmetric and antisymmetric modes.

    The normal annihilators are ``b = cosh(r) a_pm + sinh(r) a_pm^+`` with
    ``a_pm = (a1 +- a2)/sqrt(2)``.
    """
    r_g = 0.25 * math.log((1 + p.x_f) / (1 + p.x_g))
    r_u = 0.25 * math.log((1 - p.x_f) / (1 - p.x_g))
    return r_g, r_u


@dataclass(frozen=True)
class NormalBasisMap:
    """Normal-number eigenstates expressed in the local harmonic basis.

    ``u`` has shape ``(n_single**2, len(labels))``: rows are product labels
    ``(n1, n2)`` with ``n1, n2 < n_single`` (index ``n1 * n_single + n2``),
    columns the normal states ``(nu1, nu3)`` with ``nu1 + nu3 < n_single``,
    ordered by polyad then ``nu1`` descending.  Squeezing spreads the normal
    states beyond the retained rows; ``column_leak`` is the norm lost.
    """

    n_single: int
    pad: int
    labels: tuple[tuple[int, int], ...]
    u: np.ndarray = field(repr=False)
    column_leak: np.ndarray = field(repr=False)
    params: MoleculeParams | None = None

    def label_index(self, label) -> int:
        return self.labels.index(tuple(label))


def _squeezed_number_states(r: float, size: int, count: int, tol: float) -> np.ndarray:
    """Lowest ``count`` eigenvectors of ``b^+ b``, ``b = cosh(r) a + sinh(r) a^+``.

    Built on ``size`` Fock levels.  Column ``nu`` has eigenvalue ``nu`` and
    a positive ``<nu|.>`` component, so ``r -> 0`` gives the Fock states.
    """
    ch, sh = math.cosh(r), math.sinh(r)
    a = ladder(size)
    num = np.diag(np.arange(size, dtype=float))
    op = ch * ch * num + sh * sh * (num + np.eye(size)) + ch * sh * (a @ a + a.T @ a.T)
    vals, vecs = np.linalg.eigh(op)
    err = np.abs(vals[:count] - np.arange(count))
    if count > size or np.any(err > tol):
        bad = int(np.argmax(err > tol)) if count <= size else size
        raise TruncationError(
            f"squeezed level {bad} not resolved on {size} Fock levels (r={r:.4f}); increase pad"
        )
    vecs = vecs[:, :count]
    signs = np.sign(vecs[np.arange(count), np.arange(count)])
    signs[signs == 0] = 1.0
    return vecs * signs


@functools.lru_cache(maxsize=16)
def _mode_to_local(size: int, n_rows: int) -> np.ndarray:
    """``T[m, k, row]`` = <n1 n2 | m_+ k_->`` for ``n1, n2 < n_rows``.

    Generated by repeated application of ``(a1^+ +- a2^+)/sqrt(2)`` in a
    product space large enough to hold total quanta ``2 * (size - 1)``.
    """
    side = 2 * size - 1
    cre = sparse.csr_matrix(ladder(side).T)
    eye = sparse.identity(side, format="csr")
    c1, c2 = sparse.kron(cre, eye, format="csr"), sparse.kron(eye, cre, format="csr")
    cp = (c1 + c2) / math.sqrt(2.0)
    cm = (c1 - c2) / math.sqrt(2.0)
    rows = np.array([i * side + j for i in range(n_rows) for j in range(n_rows)])
    out = np.empty((size, size, rows.size))
    vac = np.zeros(side * side)
    vac[0] = 1.0
    col = vac
    for m in range(size):
        if m:
            col = cp @ col / math.sqrt(m)
        vec = col
        for k in range(size):
            if k:
                vec = cm @ vec / math.sqrt(k)
            out[m, k] = vec[rows]
    out.setflags(write=False)
    return out


def build_normal_map(p: MoleculeParams, n_single: int, pad: int = 32,
                     label_tol: float = 1e-3) -> NormalBasisMap:
    """Normal states ``|nu1 nu3>`` expressed in the local harmonic basis.

    The normal number operators act on one of the modes
    ``a_pm = (a1 +- a2)/sqrt(2)`` each, so they are diagonalized mode by
    mode on ``n_single + pad`` Fock levels; eigenvalues must round to
    ``0 .. n_single - 1`` within ``label_tol`` or :class:`TruncationError`
    asks for more padding.  The product eigenvectors are then rewritten in
    ``|n1 n2>`` and cut back to ``n1, n2 < n_single``.  Labels kept:
    ``nu1 + nu3 < n_single``.
    """
    if pad < 4:
        raise ValueError(f"pad must be >= 4, got {pad}")
    size = n_single + pad
    r_g, r_u = squeeze_parameters(p)
    phi_g = _squeezed_number_states(r_g, size, n_single, label_tol)
    phi_u = _squeezed_number_states(r_u, size, n_single, label_tol)
    labels = [(P - k3, k3) for P in range(n_single) for k3 in range(P + 1)]
    tmap = _mode_to_local(size, n_single)
    full = np.einsum("ma,kb,mkx->abx", phi_g, phi_u, tmap)
    u = np.stack([full[a, b] for a, b in labels], axis=1)
    leak = 1.0 - np.sum(u**2, axis=0)
    u.setflags(write=False)
    leak.setflags(write=False)
    return NormalBasisMap(n_single, pad, tuple(labels), u, leak, p)


def normal_state_vector(p: MoleculeParams, label, pad: int, side: int) -> np.ndarray:
    """One normal state on the ``side x side`` product space (no row cut)."""
    nu1, nu3 = label
    size = max(nu1, nu3) + 1 + pad
    r_g, r_u = squeeze_parameters(p)
    phi_g = _squeezed_number_states(r_g, size, nu1 + 1, 1e-6)[:, nu1]
    phi_u = _squeezed_number_states(r_u, size, nu3 + 1, 1e-6)[:, nu3]
    return np.einsum("m,k,mkx->x", phi_g, phi_u, _mode_to_local(size, side))


@dataclass(frozen=True)
class Components:
    max_local: tuple[int, int]
    max_local_weight: float
    max_normal: tuple[int, int]
    max_normal_weight: float
    complete_polyad: bool
    leak: float


@dataclass(frozen=True)
class StateDiagnostics:
    t: float
    state: int
    fidelity: float
    entropy: float
    components: Components


def components(psi, basis: TwoModeBasis, nmap: NormalBasisMap) -> Components:
    """Dominant local and normal components of a block eigenvector.

    Local weights are squared amplitudes on ``basis.states``.  Normal
    amplitudes come from substituting ``|n1 n2> -> |v1 v2>`` and projecting
    on the columns of ``nmap``.  ``complete_polyad`` is False when the
    dominant local label lies outside the complete-polyad subspace, where
    the substitution is not trustworthy.
    """
    if nmap.n_single != basis.n_single:
        raise ValueError("normal map and basis disagree on n_single")
    psi = np.asarray(psi, dtype=float)
    wl = psi**2
    kl = int(np.argmax(wl))
    local = basis.states[kl]
    amps = nmap.u.T @ (basis.embedding @ psi)
    wn = amps**2
    kn = int(np.argmax(wn))
    return Components(
        max_local=local,
        max_local_weight=float(wl[kl]),
        max_normal=nmap.labels[kn],
        max_normal_weight=float(wn[kn]),
        complete_polyad=sum(local) <= basis.complete_polyad_max,
        leak=float(max(0.0, 1.0 - wn.sum())),
    )


def probability_density(psi, basis: TwoModeBasis, well: MorseWell, q1_grid, q2_grid) -> np.ndarray:
    """``|<q1 q2|psi>|**2`` on the outer product of two coordinate grids.

    Returns an array of shape ``(len(q1_grid), len(q2_grid))``.
    """
    psi = np.asarray(psi, dtype=float)
    _check_norm(psi)
    if well.n_basis != basis.n_single:
        well = MorseWell(well.kappa, well.omega, basis.n_single)
    c = basis.to_product(psi)
    f1 = np.array([morse_wavefunction(well, v, q1_grid) for v in range(basis.n_single)])
    f2 = np.array([morse_wavefunction(well, v, q2_grid) for v in range(basis.n_single)])
    amp = f1.T @ c @ f2
    if basis.symmetry != "full" and np.array_equal(np.asarray(q1_grid), np.asarray(q2_grid)):
        # make the exchange (anti)symmetry exact rather than up to rounding
        sign = 1.0 if basis.symmetry == "symmetric" else -1.0
        amp = 0.5 * (amp + sign * amp.T)
    return amp * amp


@dataclass(frozen=True)
class ScanDiagnostics:
    """Per-state diagnostics along a scan, arrays indexed ``[grid point, state]``.

    ``fidelity[i]`` pairs grid points ``i`` and ``i + delta_steps`` and so has
    ``len(t) - delta_steps`` rows.  ``states`` are 1-based.
    """

    t: np.ndarray
    states: tuple[int, ...]
    delta_steps: int
    fidelity: np.ndarray
    entropy: np.ndarray
    components: tuple[tuple[Components, ...], ...] | None = field(default=None, repr=False)

    def state_column(self, state: int) -> int:
        return self.states.index(state)


def diagnose_scan(result, states, delta_steps: int = 1, with_components: bool = True,
                  pad: int = 32) -> ScanDiagnostics:
    """Fidelity, entropy and (optionally) components for ``states`` along ``result``."""
    states = tuple(int(s) for s in states)
    dim = result.energies.shape[1]
    for s in states:
        if not 1 <= s <= dim:
            raise IndexError(f"state {s} outside 1..{dim}")
    if delta_steps < 1 or delta_steps >= len(result):
        raise ValueError(f"delta_steps={delta_steps} incompatible with {len(result)} grid points")
    cols = [s - 1 for s in states]
    vecs = result.vectors[:, :, cols]
    n_t = len(result)
    fid = np.empty((n_t - delta_steps, len(cols)))
    for i in range(n_t - delta_steps):
        for j in range(len(cols)):
            fid[i, j] = fidelity(vecs[i, :, j], vecs[i + delta_steps, :, j])
    ent = np.empty((n_t, len(cols)))
    for i in range(n_t):
        for j in range(len(cols)):
            ent[i, j] = entanglement_entropy(vecs[i, :, j], result.basis)
    comps = None
    if with_components:
        rows = []
        for i in range(n_t):
            nmap = build_normal_map(result.params[i], result.basis.n_single, pad=pad)
            rows.append(tuple(components(vecs[i, :, j], result.basis, nmap) for j in range(len(cols))))
        comps = tuple(rows)
    return ScanDiagnostics(np.asarray(result.t), states, delta_steps, fid, ent, comps)


def _refined_extrema(x: np.ndarray, f: np.ndarray, sign: float) -> list[float]:
    # parabola through each discrete minimum of sign * f
    g = sign * f
    out = []
    for i in range(1, len(x) - 1):
        if not (g[i] < g[i - 1] and g[i] <= g[i + 1]):
            continue
        x0, x1, x2 = x[i - 1], x[i], x[i + 1]
        d1 = (g[i] - g[i - 1]) / (x1 - x0)
        d2 = (g[i + 1] - g[i]) / (x2 - x1)
        curv = (d2 - d1) / (0.5 * (x2 - x0))
        xs = x1 - 0.5 * (d1 + d2) / curv if curv > 0 else x1
        out.append(float(min(max(xs, min(x0, x2)), max(x0, x2))))
    return out


def fidelity_minima(diag: ScanDiagnostics, state: int) -> list[float]:
    """Positions of the local minima of ``F_state``.

    ``F`` compares points ``i`` and ``i + delta_steps``, so it is placed at
    their midpoint; minima are refined by a three-point parabola.
    """
    j = diag.state_column(state)
    t = diag.t
    k = diag.delta_steps
    mid = 0.5 * (t[:-k] + t[k:])
    return _refined_extrema(mid, diag.fidelity[:, j], 1.0)


def entropy_slope_extrema(diag: ScanDiagnostics, state: int) -> list[float]:
    """Positions of the local maxima and minima of ``dS_state/dt``.

    The slope is a first difference placed at interval midpoints.
    """
    j = diag.state_column(state)
    t = diag.t
    s = diag.entropy[:, j]
    mid = 0.5 * (t[:-1] + t[1:])
    slope = np.diff(s) / np.diff(t)
    return sorted(_refined_extrema(mid, slope, 1.0) + _refined_extrema(mid, slope, -1.0))
