import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from lnt.morse_basis import (
    MorseWell,
    QuadratureError,
    matrix_p,
    matrix_y,
    morse_energies,
    morse_energy,
    morse_tables,
    morse_wavefunction,
    morse_wavefunction_derivative,
)


def quad(f, a=-3.0, b=12.0):
    val, _ = integrate.quad(f, a, b, limit=400, epsabs=1e-13, epsrel=1e-13)
    return val


class TestWell:
    def test_rejects_unbound_levels(self):
        with pytest.raises(ValueError):
            MorseWell(kappa=18.0, n_basis=9)

    def test_rejects_bad_omega_and_size(self):
        with pytest.raises(ValueError):
            MorseWell(48.0, omega=0.0)
        with pytest.raises(ValueError):
            MorseWell(48.0, n_basis=0)

    def test_depth(self):
        w = MorseWell(48.0, 1853.0)
        assert w.depth == pytest.approx(1853.0 * 12.0)
        assert w.j == pytest.approx(23.5)


class TestEnergy:
    def test_water_ground(self):
        assert morse_energy(MorseWell(48.0), 0) == pytest.approx(0.5 - 0.25 / 48, abs=1e-15)
        assert morse_energy(MorseWell(48.0), 0) == pytest.approx(0.4947916666666667, abs=1e-12)

    def test_harmonic_limit(self):
        assert morse_energy(MorseWell(1e12, n_basis=9), 3) == pytest.approx(3.5, abs=1e-10)

    def test_small_kappa(self):
        assert morse_energy(MorseWell(10.0, n_basis=3), 2) == pytest.approx(1.875, abs=1e-12)

    def test_out_of_range(self):
        with pytest.raises(IndexError):
            morse_energy(MorseWell(48.0), 9)
        with pytest.raises(IndexError):
            morse_energy(MorseWell(48.0), -1)

    @given(st.floats(20.0, 1e4))
    def test_strictly_increasing(self, kappa):
        e = morse_energies(MorseWell(kappa, n_basis=9))
        assert np.all(np.diff(e) > 0)

    def test_vector_matches_scalar(self):
        w = MorseWell(85.0)
        assert np.allclose(morse_energies(w), [morse_energy(w, v) for v in range(9)], atol=1e-12)


class TestWavefunction:
    @pytest.mark.parametrize("v", [0, 1, 4, 8])
    def test_normalised_by_quad(self, v):
        w = MorseWell(48.0)
        n = quad(lambda q: morse_wavefunction(w, v, np.array([q]))[0] ** 2)
        assert n == pytest.approx(1.0, abs=1e-8)

    def test_orthogonal_by_quad(self):
        w = MorseWell(48.0)
        o = quad(lambda q: morse_wavefunction(w, 0, np.array([q]))[0] * morse_wavefunction(w, 1, np.array([q]))[0])
        assert abs(o) < 1e-8

    @staticmethod
    def _gauss_error(kappa):
        # q = x * sqrt(2/kappa) maps the ground state onto exp(-x^2/2)/pi^(1/4)
        w = MorseWell(kappa)
        x = np.linspace(-4, 4, 801)
        psi = morse_wavefunction(w, 0, x * math.sqrt(2.0 / kappa)) * (2.0 / kappa) ** 0.25
        return np.max(np.abs(psi - np.exp(-0.5 * x * x) / math.pi**0.25))

    def test_harmonic_ground_state(self):
        # the residual is the anharmonic skew, of order kappa^-1/2
        e1, e2, e3 = (self._gauss_error(k) for k in (4e3, 4e5, 4e7))
        assert e1 < 1e-2
        assert e2 < 1e-3
        assert e2 / e1 == pytest.approx(0.1, rel=0.05)
        assert e3 / e2 == pytest.approx(0.1, rel=0.05)

    def test_positive_tail(self):
        w = MorseWell(160.0)
        tail = morse_wavefunction(w, 5, np.array([3.0]))
        assert tail[0] > 0

    def test_grid_must_increase(self):
        with pytest.raises(ValueError):
            morse_wavefunction(MorseWell(48.0), 0, np.array([0.0, 0.0]))
        with pytest.raises(ValueError):
            morse_wavefunction(MorseWell(48.0), 0, np.array([1.0, 0.0]))

    def test_large_kappa_is_finite(self):
        w = MorseWell(1e5, n_basis=9)
        psi = morse_wavefunction(w, 8, np.linspace(-0.1, 0.1, 11))
        assert np.all(np.isfinite(psi))

    @pytest.mark.parametrize("v", [0, 3, 8])
    def test_derivative_matches_finite_difference(self, v):
        w = MorseWell(48.0)
        q = np.linspace(-0.8, 2.0, 29)
        h = 1e-5
        fd = (morse_wavefunction(w, v, q + h) - morse_wavefunction(w, v, q - h)) / (2 * h)
        assert np.allclose(morse_wavefunction_derivative(w, v, q), fd, atol=1e-7)


class TestTables:
    @pytest.mark.parametrize("kappa", [48.0, 85.0, 160.0])
    def test_gram(self, kappa):
        tab = morse_tables(MorseWell(kappa))
        assert np.max(np.abs(tab.gram - np.eye(9))) < 1e-8

    def test_symmetry_exact(self):
        w = MorseWell(48.0)
        y, m = matrix_y(w), matrix_p(w)
        assert np.array_equal(y, y.T)
        assert np.array_equal(m, -m.T)
        assert np.all(np.diag(m) == 0)

    def test_against_scipy_quad(self):
        w = MorseWell(48.0)
        y, m = matrix_y(w), matrix_p(w)

        def f(v):
            return lambda q: morse_wavefunction(w, v, np.array([q]))[0]

        def df(v):
            return lambda q: morse_wavefunction_derivative(w, v, np.array([q]))[0]

        for a, b in [(0, 0), (0, 1), (2, 5), (7, 8), (3, 3)]:
            ya = quad(lambda q: f(a)(q) * (1 - math.exp(-q)) * f(b)(q))
            ma = quad(lambda q: f(a)(q) * df(b)(q))
            assert y[a, b] == pytest.approx(ya, abs=1e-9)
            assert m[a, b] == pytest.approx(ma, abs=1e-9)

    def test_y00_positive(self):
        for kappa in (20.0, 48.0, 160.0, 4000.0):
            assert matrix_y(MorseWell(kappa))[0, 0] > 0

    def test_y00_closed_form(self):
        # <0|exp(-q)|0> = 1 - 1/kappa for the Morse ground state
        assert matrix_y(MorseWell(48.0))[0, 0] == pytest.approx(1.0 / 48.0, abs=1e-10)

    def test_harmonic_limit_off_diagonals(self):
        kappa = 4000.0
        w = MorseWell(kappa)
        assert abs(matrix_y(w)[0, 1]) * math.sqrt(kappa) == pytest.approx(1.0, rel=1e-2)
        assert abs(matrix_p(w)[0, 1]) / (math.sqrt(kappa) / 2) == pytest.approx(1.0, rel=1e-2)

    def test_ladder_structure_approaches_harmonic(self):
        # scaled Y -> ladder with entries sqrt(v+1); deviations fall like kappa^-1/2
        def dev(kappa):
            w = MorseWell(kappa)
            ys = matrix_y(w) * math.sqrt(kappa)
            ms = matrix_p(w) * 2.0 / math.sqrt(kappa)
            lad = np.diag(np.sqrt(np.arange(1, 9)), 1)
            ref_y = lad + lad.T
            ref_m = lad - lad.T
            # y picks up a diagonal shift of order 1/sqrt(kappa); compare off-diagonals only
            off = ~np.eye(9, dtype=bool)
            return max(np.max(np.abs(ys - ref_y)[off]), np.max(np.abs(np.abs(ms) - np.abs(ref_m))))
        d3, d5 = dev(1e3), dev(1e5)
        assert d5 < d3 / 5
        assert d5 < 0.05

    def test_refinement_stability(self):
        w = MorseWell(85.0)
        a = morse_tables(w, tol=1e-10)
        b = morse_tables(w, tol=1e-12)
        assert np.max(np.abs(a.y - b.y)) < 1e-8
        assert np.max(np.abs(a.m - b.m)) < 1e-8

    def test_commutator_interior_block(self):
        # [y, d/dq] = -exp(-q); holds where the truncated products have converged
        for kappa, n, k in [(160.0, 20, 6), (1000.0, 15, 6)]:
            tab = morse_tables(MorseWell(kappa, n_basis=n))
            comm = tab.y @ tab.m - tab.m @ tab.y
            assert np.max(np.abs((comm + tab.expq)[:k, :k])) < 1e-6

    def test_quadrature_error_reported(self):
        with pytest.raises(QuadratureError) as exc:
            morse_tables(MorseWell(48.0), tol=1e-30, max_panels=64)
        assert exc.value.achieved > exc.value.requested

    def test_cached_and_read_only(self):
        a = morse_tables(MorseWell(48.0))
        b = morse_tables(MorseWell(48.0 + 1e-14))
        assert a is b
        with pytest.raises(ValueError):
            a.y[0, 0] = 1.0

    @settings(max_examples=10, deadline=None)
    @given(st.floats(30.0, 500.0))
    def test_gram_property(self, kappa):
        tab = morse_tables(MorseWell(kappa))
        assert np.max(np.abs(tab.gram - np.eye(9))) < 1e-8
