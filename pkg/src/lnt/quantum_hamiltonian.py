"""Two coupled Morse oscillators: basis, Hamiltonian, spectra along the path."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .morse_basis import MorseWell, morse_energies, morse_tables
from .parameterization import MoleculeParams, PathSpec, params_at

__all__ = [
    "TwoModeBasis",
    "SpectrumPoint",
    "ScanResult",
    "build_basis",
    "build_hamiltonian",
    "diagonalize",
    "scan",
    "gap_minima",
    "find_avoided_crossings",
]

SYMMETRIES = ("symmetric", "antisymmetric", "full")


@dataclass(frozen=True)
class TwoModeBasis:
    """Product basis ``|v1 v2>`` or one of its exchange-symmetry blocks.

    ``embedding`` is the ``(n_single**2, dim)`` isometry that expands block
    coefficients into product-basis coefficients, product index
    ``v1 * n_single + v2``.
    """

    n_single: int
    symmetry: str
    states: tuple[tuple[int, int], ...]
    embedding: np.ndarray = field(repr=False, compare=False)
    polyad_max: int | None = None

    @property
    def dim(self) -> int:
        return len(self.states)

    @property
    def complete_polyad_max(self) -> int:
        if self.polyad_max is not None:
            return min(self.polyad_max, self.n_single - 1)
        return self.n_single - 1

    def polyads(self) -> np.ndarray:
        return np.array([a + b for a, b in self.states], dtype=int)

    def index(self, label: tuple[int, int]) -> int:
        return self.states.index(tuple(label))

    def to_product(self, coeffs: np.ndarray) -> np.ndarray:
        """Block coefficients -> ``(n_single, n_single)`` amplitude matrix."""
        n = self.n_single
        return (self.embedding @ coeffs).reshape(n, n)


def build_basis(n_single: int, symmetry: str = "symmetric",
                polyad_max: int | None = None) -> TwoModeBasis:
    """Basis ordered by ascending ``P_L = v1 + v2``, then ascending ``v1``.

    By default all ``n_single**2`` products (or their symmetry block) are
    kept.  With ``polyad_max`` only labels with ``v1 + v2 <= polyad_max``
    survive; ``build_basis(12, polyad_max=11)`` is the 42-state symmetric
    basis made of complete polyads only.
    """
    if polyad_max is not None and polyad_max < 0:
        raise ValueError(f"polyad_max must be >= 0, got {polyad_max}")
    if n_single < 1:
        raise ValueError(f"n_single must be >= 1, got {n_single}")
    if symmetry not in SYMMETRIES:
        raise ValueError(f"symmetry must be one of {SYMMETRIES}, got {symmetry!r}")
    n = n_single
    labels = sorted(((a, b) for a in range(n) for b in range(n)), key=lambda s: (s[0] + s[1], s[0]))
    if symmetry == "symmetric":
        labels = [s for s in labels if s[0] <= s[1]]
    elif symmetry == "antisymmetric":
        labels = [s for s in labels if s[0] < s[1]]
    if polyad_max is not None:
        labels = [s for s in labels if s[0] + s[1] <= polyad_max]
    emb = np.zeros((n * n, len(labels)))
    sign = -1.0 if symmetry == "antisymmetric" else 1.0
    for k, (a, b) in enumerate(labels):
        if symmetry == "full" or a == b:
            emb[a * n + b, k] = 1.0
        else:
            emb[a * n + b, k] = 1.0 / np.sqrt(2.0)
            emb[b * n + a, k] = sign / np.sqrt(2.0)
    emb.setflags(write=False)
    return TwoModeBasis(n, symmetry, tuple(labels), emb, polyad_max)


def _product_hamiltonian(n: int, p: MoleculeParams) -> np.ndarray:
    """Full ``n**2`` product-space matrix of H / (hbar omega)."""
    well = MorseWell(p.kappa, p.omega, n)
    tab = morse_tables(well)
    eps = morse_energies(well)
    t = p.x_g
    h = np.diag(np.add.outer(eps, eps).ravel())
    # p1 p2 = (-i M) (x) (-i M) = -M (x) M
    h -= (2.0 * t / p.kappa) * np.kron(tab.m, tab.m)
    h += (0.5 * p.kappa * p.x_f) * np.kron(tab.y, tab.y)
    return h


def build_hamiltonian(basis: TwoModeBasis, p: MoleculeParams) -> np.ndarray:
    """Hamiltonian matrix in cm^-1 within ``basis``.

    H = hbar omega { sum_i [(v_i + 1/2) - (v_i + 1/2)^2 / kappa]
                     + (2 t / kappa) p1 p2 + (kappa x_f / 2) y1 y2 }

    with ``t = p.x_g``.  The matrix dimension is set by ``basis`` alone;
    ``kappa`` enters only through the matrix elements.  Raises ``ValueError``
    when ``kappa`` cannot bind ``basis.n_single`` levels.
    """
    if basis.embedding.shape[0] != basis.n_single**2:
        raise ValueError("basis embedding does not match n_single")
    h = p.omega * _product_hamiltonian(basis.n_single, p)
    hb = basis.embedding.T @ h @ basis.embedding
    return 0.5 * (hb + hb.T)


@dataclass(frozen=True)
class SpectrumPoint:
    t: float
    energies: np.ndarray
    eigenvectors: np.ndarray
    params: MoleculeParams | None = None


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def _degenerate_clusters(energies: np.ndarray, tol: float):
    start = 0
    for k in range(1, len(energies) + 1):
        if k == len(energies) or energies[k] - energies[k - 1] > tol:
            if k - start > 1:
                yield start, k
            start = k


def diagonalize(h: np.ndarray, t: float = float("nan"), params: MoleculeParams | None = None,
                reference: np.ndarray | None = None) -> SpectrumPoint:
    """Dense symmetric eigendecomposition with deterministic vector signs.

    Each eigenvector gets its largest-magnitude component positive.  Inside
    an exactly degenerate cluster the vectors are ordered by overlap with
    ``reference`` if given, else by the position of their dominant
    component in the basis.
    """
    h = np.asarray(h, dtype=float)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError("H must be square")
    try:
        energies, vecs = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:
        raise ArithmeticError(f"eigensolver failed: {exc}") from exc
    if not np.all(np.isfinite(energies)):
        raise ArithmeticError("non-finite eigenvalues")
    scale = max(1.0, float(np.max(np.abs(energies)))) if energies.size else 1.0
    for a, b in _degenerate_clusters(energies, 1e-12 * scale):
        block = vecs[:, a:b]
        if reference is not None:
            ov = np.abs(reference[:, a:b].T @ block)
            _, perm = linear_sum_assignment(-ov)
        else:
            # rotate to the basis vectors carrying most weight, then sort by position
            dom = np.argsort(-np.sum(block**2, axis=1), kind="stable")[: b - a]
            dom = np.sort(dom)
            sub = block[dom, :]
            u, _, wt = np.linalg.svd(sub)
            block = block @ (u @ wt).T
            perm = np.argsort(np.argmax(np.abs(block), axis=0), kind="stable")
        vecs[:, a:b] = block[:, perm]
    vecs = _fix_signs(vecs)
    return SpectrumPoint(float(t), energies, vecs, params)


@dataclass(frozen=True)
class ScanResult(Sequence):
    """Spectra along a path; indexable as a sequence of :class:`SpectrumPoint`.

    ``energies[i, a]`` and ``vectors[i, :, a]`` belong to grid point ``i``
    and (0-based) state ``a``.
    """

    t: np.ndarray
    energies: np.ndarray
    vectors: np.ndarray
    params: tuple[MoleculeParams, ...]
    basis: TwoModeBasis
    tracking: str = "energy"

    def __len__(self) -> int:
        return len(self.t)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[k] for k in range(*i.indices(len(self)))]
        return SpectrumPoint(float(self.t[i]), self.energies[i], self.vectors[i], self.params[i])

    def __iter__(self) -> Iterator[SpectrumPoint]:
        return (self[i] for i in range(len(self)))

    @property
    def step(self) -> float:
        return float(abs(self.t[1] - self.t[0]))


def scan(path: PathSpec, basis: TwoModeBasis, tracking: str = "energy",
         workers: int | None = None) -> ScanResult:
    """Diagonalize H(t) on every grid point of ``path``.

    ``tracking="energy"`` keeps states in ascending-energy order (state
    labels swap at crossings); ``"overlap"`` reorders columns at each step
    to follow the largest overlap with the previous point.  Eigenvector
    signs are made continuous along the grid in both modes.
    """
    if tracking not in ("energy", "overlap"):
        raise ValueError(f"unknown tracking mode {tracking!r}")
    grid = np.asarray(path.t_grid, dtype=float)
    plist = [params_at(path, float(t)) for t in grid]

    def solve(p):
        return build_hamiltonian(basis, p)

    if workers and workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            mats = list(ex.map(solve, plist))
    else:
        mats = [solve(p) for p in plist]

    n_t, dim = len(grid), basis.dim
    energies = np.empty((n_t, dim))
    vectors = np.empty((n_t, dim, dim))
    prev = None
    for i, (t, p, h) in enumerate(zip(grid, plist, mats)):
        pt = diagonalize(h, t, p, reference=prev)
        e, v = pt.energies, pt.eigenvectors
        if prev is not None:
            if tracking == "overlap":
                _, perm = linear_sum_assignment(-np.abs(prev.T @ v))
                e, v = e[perm], v[:, perm]
            flip = np.einsum("ij,ij->j", prev, v) < 0
            v = v.copy()
            v[:, flip] *= -1.0
        energies[i], vectors[i] = e, v
        prev = v
    energies.setflags(write=False)
    vectors.setflags(write=False)
    return ScanResult(grid, energies, vectors, tuple(plist), basis, tracking)


def gap_minima(t, gap) -> list[tuple[float, float]]:
    """Interior local minima of ``gap(t)``, refined by a three-point parabola."""
    t = np.asarray(t, dtype=float)
    g = np.asarray(gap, dtype=float)
    if t.size < 3:
        return []
    out = []
    for i in range(1, t.size - 1):
        if not (g[i] < g[i - 1] and g[i] <= g[i + 1]):
            continue
        x0, x1, x2 = t[i - 1], t[i], t[i + 1]
        y0, y1, y2 = g[i - 1], g[i], g[i + 1]
        # Lagrange parabola through the three points
        d = (x0 - x1) * (x0 - x2) * (x1 - x2)
        a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / d
        b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / d
        c = (x1 * x2 * (x1 - x2) * y0 + x2 * x0 * (x2 - x0) * y1 + x0 * x1 * (x0 - x1) * y2) / d
        if a > 0:
            ts = -b / (2 * a)
            ts = min(max(ts, min(x0, x2)), max(x0, x2))
            gs = a * ts * ts + b * ts + c
        else:
            ts, gs = x1, y1
        out.append((float(ts), float(max(gs, 0.0))))
    return out


def find_avoided_crossings(result: ScanResult, state: int) -> list[tuple[float, float]]:
    """Local minima ``(t*, gap)`` of ``E[state+1] - E[state]`` (1-based ``state``)."""
    a = state - 1
    if not 0 <= a < result.energies.shape[1] - 1:
        raise IndexError(f"state {state} has no upper neighbour")
    gap = result.energies[:, a + 1] - result.energies[:, a]
    return gap_minima(result.t, gap)
