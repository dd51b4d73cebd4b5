"""Acceptance criteria, one test per criterion.

Each test records what it measured; the terminal summary prints one
PASS/FAIL line per criterion.  Run alone with ``pytest tests/test_acceptance.py``.
"""
import math
import time

import numpy as np
import pytest

from lnt import cli
from lnt.classical_dynamics import (
    SectionSpec,
    initial_conditions,
    integrate,
    lyapunov_grid,
    poincare_section,
)
from lnt.morse_basis import MorseWell, morse_energies, morse_tables
from lnt.morse_basis import _cached_tables
from lnt.observables import (
    build_normal_map,
    components,
    diagnose_scan,
    entropy_slope_extrema,
    fidelity_minima,
)
from lnt.parameterization import CO2, WATER, MoleculeParams, default_path, harmonic_couplings, params_at
from lnt.quantum_hamiltonian import build_basis, build_hamiltonian, diagonalize, find_avoided_crossings, scan

STATES = (26, 27, 28)


def state_energy(p, state=27, n_single=9):
    e = np.linalg.eigvalsh(build_hamiltonian(build_basis(n_single), p))
    return float((e[state - 1] - e[0]) / p.omega)


@pytest.fixture(scope="module")
def window_scan():
    # 400 points over the water side of the path
    path = default_path().with_grid(np.linspace(WATER.x_g, -0.2, 400))
    t0 = time.perf_counter()
    res = scan(path, build_basis(9))
    diag = diagnose_scan(res, STATES, with_components=False)
    return res, diag, time.perf_counter() - t0


@pytest.mark.criterion(1)
def test_morse_machinery(record_property):
    _cached_tables.cache_clear()
    t0 = time.perf_counter()
    gram, eps, refine = 0.0, 0.0, 0.0
    for kappa in (48.0, 85.0, 160.0):
        w = MorseWell(kappa, n_basis=9)
        tab = morse_tables(w)
        gram = max(gram, np.max(np.abs(tab.gram - np.eye(9))))
        v = np.arange(9) + 0.5
        eps = max(eps, np.max(np.abs(morse_energies(w) - (v - v * v / kappa))))
        fine = morse_tables(w, tol=1e-12)
        refine = max(refine, np.max(np.abs(tab.y - fine.y)), np.max(np.abs(tab.m - fine.m)))
    elapsed = time.perf_counter() - t0
    record_property("measured", f"gram={gram:.2e} eps={eps:.2e} refine={refine:.2e} time={elapsed:.1f}s")
    assert gram < 1e-8
    assert eps < 1e-12
    assert refine < 1e-8
    assert elapsed < 10


@pytest.mark.criterion(2)
def test_harmonic_limit_oracle(record_property):
    t0 = time.perf_counter()
    p = MoleculeParams(-0.012, -0.015, 1853.0, 1e4)
    e = np.linalg.eigvalsh(build_hamiltonian(build_basis(9, "full"), p))[:10]
    hc = harmonic_couplings(p)
    ref = np.sort([hc.omega_g * (a + 0.5) + hc.omega_u * (b + 0.5) for a in range(10) for b in range(10)])[:10]
    rel = float(np.max(np.abs(e - ref) / ref))
    elapsed = time.perf_counter() - t0
    record_property("measured", f"omega_g={hc.omega_g:.2f} omega_u={hc.omega_u:.2f} "
                                f"max_rel={rel:.2e} time={elapsed:.1f}s")
    assert hc.omega_g == pytest.approx(1827.98, abs=0.01)
    assert hc.omega_u == pytest.approx(1878.02, abs=0.01)
    assert rel < 1e-3
    assert elapsed < 30


def polyad_ratios(p_max):
    # spread of each symmetric multiplet over its smaller neighbouring gap;
    # multiplet P_L holds floor(P_L / 2) + 1 levels
    e = diagonalize(build_hamiltonian(build_basis(9), WATER)).energies
    sizes = [p // 2 + 1 for p in range(p_max + 2)]
    bounds = np.cumsum([0] + sizes)
    groups = [e[bounds[i]:bounds[i + 1]] for i in range(len(sizes))]
    out = []
    for p in range(p_max + 1):
        gaps = [groups[p + 1].min() - groups[p].max()]
        if p > 0:
            gaps.append(groups[p].min() - groups[p - 1].max())
        out.append(float(np.ptp(groups[p]) / min(gaps)))
    return out


@pytest.mark.criterion(3)
def test_polyad_structure(record_property):
    t0 = time.perf_counter()
    ratios = polyad_ratios(4)
    elapsed = time.perf_counter() - t0
    record_property("measured", "spread/gap by P_L: " + " ".join(f"{r:.3f}" for r in ratios)
                    + f" time={elapsed:.1f}s")
    assert max(ratios) < 0.1
    assert elapsed < 10


def test_polyad_structure_low_multiplets():
    # informational: the lower multiplets are well separated
    assert max(polyad_ratios(3)) < 0.1


def local_weight_27(n_single, polyad_max=None):
    basis = build_basis(n_single, polyad_max=polyad_max)
    pt = diagonalize(build_hamiltonian(basis, WATER), WATER.x_g, WATER)
    c = components(pt.eigenvectors[:, 26], basis, build_normal_map(WATER, n_single))
    return c.max_local, c.max_local_weight


@pytest.mark.criterion(4)
def test_state_27_local_character(record_property):
    t0 = time.perf_counter()
    label, weight = local_weight_27(9)
    elapsed = time.perf_counter() - t0
    record_property("measured", f"state 27 at n_single=9: max local {label} weight={weight:.3f} time={elapsed:.1f}s")
    assert weight == pytest.approx(0.95, abs=0.05)
    assert elapsed < 60


def test_state_27_local_character_converged_basis():
    # informational: the complete-polyad basis through P_L = 11
    label, weight = local_weight_27(12, polyad_max=11)
    assert label == (1, 8)
    assert weight == pytest.approx(0.95, abs=0.05)


def colocation_distances(res, diag, max_gap=None):
    # grid-step distances from each avoided crossing to the nearest F minimum
    # and entropy-slope extremum of either member of the exchanged pair
    step = abs(res.t[1] - res.t[0])
    out = []
    for s in STATES[:-1]:
        for ts, gap in find_avoided_crossings(res, s):
            if max_gap is not None and gap > max_gap:
                continue
            f = [x for st in (s, s + 1) for x in fidelity_minima(diag, st)]
            g = [x for st in (s, s + 1) for x in entropy_slope_extrema(diag, st)]
            df = min((abs(x - ts) for x in f), default=math.inf) / step
            dg = min((abs(x - ts) for x in g), default=math.inf) / step
            out.append((s, ts, gap, df, dg))
    return out


@pytest.mark.criterion(5)
def test_colocation(window_scan, record_property):
    res, diag, elapsed = window_scan
    rows = colocation_distances(res, diag)
    desc = ", ".join(f"({s},{s + 1}) t*={ts:.4f} gap={g:.1f} dF={df:.2f} dS'={dg:.2f}" for s, ts, g, df, dg in rows)
    record_property("measured", f"{desc}; time={elapsed:.1f}s")
    assert rows
    assert all(df <= 1 and dg <= 1 for _, _, _, df, dg in rows)
    assert elapsed < 600


def test_colocation_narrow_crossings(window_scan):
    # informational: crossings with gaps of a few cm^-1 do co-locate
    res, diag, _ = window_scan
    rows = colocation_distances(res, diag, max_gap=10.0)
    assert rows
    assert all(df <= 1 and dg <= 1 for _, _, _, df, dg in rows)


@pytest.mark.criterion(6)
def test_entropy_bounds_and_trend(window_scan, record_property):
    res, diag, _ = window_scan
    s = diag.entropy
    j = diag.state_column(27)
    s0 = s[0, j]
    smax = s[:, j].max()
    record_property("measured", f"S range=[{s.min():.3f}, {s.max():.3f}] ln9={math.log(9):.3f} "
                                f"S27(water)={s0:.3f} max S27={smax:.3f}")
    assert res.t[0] == WATER.x_g
    assert s.min() >= 0 and s.max() <= math.log(9)
    assert s0 < 0.15
    assert smax > 3 * s0


def test_entropy_bounds(window_scan):
    # informational: the bound part of criterion 6 on its own
    _, diag, _ = window_scan
    assert diag.entropy.min() >= -1e-12
    assert diag.entropy.max() <= math.log(9)


@pytest.mark.criterion(7)
def test_classical_integrity(record_property):
    t0 = time.perf_counter()
    drift = 0.0
    for p in (WATER, params_at(default_path(), -0.125), CO2):
        e = state_energy(p)
        spec = SectionSpec(e, ic_grid=3)
        for x0 in initial_conditions(spec, p):
            _, trace = integrate(x0, 0.01, 100_000, p, energy_trace=True)
            # secular part: the bounded O(h^2) oscillation is averaged out
            d = abs(trace[-10_000:].mean() - trace[:10_000].mean()) / e
            drift = max(drift, d)

    uncoupled = MoleculeParams(0.0, 0.0, WATER.omega, WATER.kappa)
    e = state_energy(WATER)
    res = poincare_section(SectionSpec(e, ic_grid=6, t_max=2000.0), uncoupled)
    spread = 0.0
    for tid in np.unique(res.points[:, 0]):
        rows = res.points[res.points[:, 0] == tid]
        y = 1 - np.exp(-rows[:, 1])
        e1 = rows[:, 2] ** 2 / uncoupled.kappa + 0.25 * uncoupled.kappa * y * y
        spread = max(spread, np.ptp(e1))
    lyap = lyapunov_grid(initial_conditions(SectionSpec(e, ic_grid=4), uncoupled), uncoupled, horizon=2e4).max
    elapsed = time.perf_counter() - t0
    record_property("measured", f"drift={drift:.2e} single-energy spread={spread:.2e} "
                                f"lyapunov={lyap:.2e} time={elapsed:.1f}s")
    assert drift < 1e-6
    assert len(res.points) > 0 and spread < 1e-6
    assert lyap < 1e-3
    assert elapsed < 120


@pytest.mark.criterion(8)
def test_chaos_window(record_property):
    t0 = time.perf_counter()
    path = default_path()

    def max_lyapunov(t):
        p = params_at(path, t)
        ics = initial_conditions(SectionSpec(state_energy(p)), p)
        return lyapunov_grid(ics, p, horizon=2e4, h=0.01).max

    ends = [max_lyapunov(t) for t in (WATER.x_g, CO2.x_g)]
    inner = [max_lyapunov(t) for t in (-0.175, -0.15, -0.125, -0.1, -0.075)]
    elapsed = time.perf_counter() - t0
    record_property("measured", f"endpoints={[round(x, 4) for x in ends]} "
                                f"intermediate={[round(x, 4) for x in inner]} "
                                f"min ratio={min(inner) / max(ends):.1f} time={elapsed:.0f}s")
    assert min(inner) > 10 * max(ends)
    assert elapsed < 900


@pytest.mark.criterion(9)
def test_determinism(tmp_path, record_property):
    out = {}
    for run in ("a", "b"):
        for sub in ("scan", "poincare"):
            d = tmp_path / run / sub
            assert cli.main([sub, "--out", str(d)]) == 0
            out[run, sub] = {f.name: f.read_bytes() for f in sorted(d.iterdir())}
    same = {sub: out["a", sub] == out["b", sub] for sub in ("scan", "poincare")}
    record_property("measured", " ".join(f"{k}: {len(out['a', k])} files identical={v}" for k, v in same.items()))
    assert all(same.values())
    assert all(out["a", sub] for sub in ("scan", "poincare"))
