import numpy as np
import pytest

from floq3 import (
    InsufficientData,
    WindowTooCoarse,
    from_fourier,
    locate_ramifications,
    point,
    scan_s3,
    solve_multipliers,
    validate_ramification_asymptotics,
)
from floq3.monodromy import trace_pair_many
from floq3.multipliers import psi
from floq3.spectrum_scan import (
    DISK_RADIUS,
    count_disk_zeros,
    disk_center_z,
    unperturbed_ramification,
)

import oracles


class TestScan:
    def test_zero_coefficients_degenerate_origin(self, czero):
        rep = scan_s3(czero, (-100.0, 100.0), grid=200)
        assert rep.count_m == 2
        assert rep.window_clean
        assert len(rep.intervals) == 1
        a, b = rep.intervals[0]
        assert a == b and abs(a) < 1e-6

    def test_small_coupling_band_present(self):
        eps = 0.2
        ceps = from_fourier([(1, eps)])
        h = 1.0 / (6 * np.pi**2)
        w = 4 * h**1.5 * eps**3
        rep = scan_s3(ceps, (-6 * w, 6 * w), grid=256)
        proper = [iv for iv in rep.intervals if iv[1] > iv[0]]
        assert len(proper) == 1
        assert rep.count_m == 2
        width = proper[0][1] - proper[0][0]
        assert width == pytest.approx(w, rel=0.05)

    def test_small_coupling_band_absent_for_q(self):
        eps = 0.2
        ceps = from_fourier([], [(1, eps)])
        h = 1.0 / (8 * np.pi**4)
        w = 4 * h**1.5 * eps**3
        rep = scan_s3(ceps, (-6 * w, 6 * w), grid=256)
        assert rep.intervals == ()
        assert rep.count_m == 0

    def test_band_endpoints_are_labeled_records(self):
        eps = 0.2
        ceps = from_fourier([(1, eps)])
        h = 1.0 / (6 * np.pi**2)
        w = 4 * h**1.5 * eps**3
        rep = scan_s3(ceps, (-6 * w, 6 * w), grid=256)
        labels = {(r.n, r.sign) for r in rep.endpoint_records}
        assert labels == {(0, "-"), (0, "+")}
        vals = sorted(r.value.real for r in rep.endpoint_records)
        iv = [x for x in rep.intervals if x[1] > x[0]][0]
        assert vals[0] == pytest.approx(iv[0], abs=1e-9)
        assert vals[1] == pytest.approx(iv[1], abs=1e-9)
        assert all(r.disk_ok for r in rep.endpoint_records)

    def test_window_too_coarse(self, czero):
        with pytest.raises(WindowTooCoarse):
            scan_s3(czero, (-1e6, 1e6), grid=16)

    def test_window_validation(self, czero):
        with pytest.raises(ValueError):
            scan_s3(czero, (1.0, -1.0), grid=64)
        with pytest.raises(ValueError):
            scan_s3(czero, (-1.0, 1.0), grid=8)

    def test_positive_outside_reported_intervals(self):
        # spot check: the scan grid values are positive off the intervals
        eps = 0.2
        ceps = from_fourier([(1, eps)])
        h = 1.0 / (6 * np.pi**2)
        w = 4 * h**1.5 * eps**3
        rep = scan_s3(ceps, (-6 * w, 6 * w), grid=256)
        iv = [x for x in rep.intervals if x[1] > x[0]][0]
        from floq3.spectrum_scan import _rho_real_many
        from floq3.monodromy import IntegratorOptions

        probes = np.array([iv[0] - w, iv[1] + w, iv[0] - 2 * w, iv[1] + 2 * w])
        vals = _rho_real_many(ceps, probes, IntegratorOptions())
        assert np.all(vals > 0)


class TestDiskCounts:
    @pytest.mark.parametrize("n", [1, 2, 5])
    def test_winding_two_for_cosine(self, ccos, n):
        cnt, _ = count_disk_zeros(ccos, n)
        assert cnt == 2

    def test_winding_two_for_mixed(self, cmix):
        cnt, _ = count_disk_zeros(cmix, 3)
        assert cnt == 2


class TestLocateRamifications:
    def test_unperturbed_positions(self, ram_cache):
        for r in ram_cache["zero"]:
            if r.n > 0:
                exact = unperturbed_ramification(r.n)
                assert abs(r.value - exact) <= 1e-6 * abs(exact)
                assert r.disk_ok and r.newton_ok

    def test_constant_p_oracle(self, ram_cache):
        for r in ram_cache["const"]:
            if r.n > 0:
                exact = oracles.const_p_ramification(r.n)
                assert abs(r.value - exact) <= 1e-6 * abs(exact)

    def test_conjugation_pairing(self, ram_cache):
        for recs in ram_cache.values():
            by = {(r.n, r.sign): r.value for r in recs}
            for (n, sign), v in by.items():
                if n > 0:
                    flip = "+" if sign == "-" else "-"
                    assert abs(by[(-n, flip)] - np.conj(v)) <= 1e-6 * max(1.0, abs(v))

    def test_disk_membership(self, ram_cache):
        for recs in ram_cache.values():
            for r in recs:
                if r.n > 0:
                    z = point(r.value).z
                    assert abs(z - disk_center_z(r.n)) < DISK_RADIUS
                    assert r.disk_ok

    def test_sign_ordering_by_imaginary_part(self, ram_cache):
        by = {(r.n, r.sign): r.value for r in ram_cache["cos"]}
        for n in range(1, 9):
            assert by[(n, "-")].imag <= by[(n, "+")].imag + 1e-12

    def test_cosine_first_disk_split(self, ram_cache, ccos):
        # the mode-1 amplitude splits the first double zero; the normalized
        # shift difference approaches -2|p_1|/sqrt(3) (20% slack at n = 1)
        by = {(r.n, r.sign): r.value for r in ram_cache["cos"]}
        fac = np.sqrt(3.0) / (-4j * np.pi * 1)
        d_plus = (by[(1, "+")] - unperturbed_ramification(1)) * fac
        d_minus = (by[(1, "-")] - unperturbed_ramification(1)) * fac
        target = -2.0 / np.sqrt(3.0)
        assert abs((d_plus - d_minus) - target) < 0.2 * abs(target)

    def test_single_mode_split_constant(self):
        # a lone mode at a moderate index isolates the split law; the
        # measured coefficient matches |p_n|/sqrt(3) per branch to percent
        # level there
        M = 6
        cM = from_fourier([(M, 1.0)])
        recs = locate_ramifications(cM, M, n_min=M)
        by = {(r.n, r.sign): r.value for r in recs}
        fac = np.sqrt(3.0) / (-4j * np.pi * M)
        split = ((by[(M, "+")] - by[(M, "-")]) * fac).real
        target = -2.0 / np.sqrt(3.0)
        assert abs(split - target) < 0.02 * abs(target)

    def test_psi_residual_at_converged_records(self, ram_cache, ccos):
        # dominant-branch residual nearly vanishes at located upper zeros
        recs = [r for r in ram_cache["cos"] if r.n >= 4 and r.newton_ok]
        assert recs
        for r in recs[:4]:
            lam = r.value
            T, Tc = trace_pair_many(ccos, [lam, np.conj(lam)])
            trip_a = solve_multipliers(T[0], Tc[0], point(lam))
            trip_b = solve_multipliers(T[1], Tc[1], point(np.conj(lam)))
            val = psi(point(lam), trip_a.tau[2], trip_b.tau[2])
            assert abs(val) < 1e-5 * abs(trip_a.tau[2])


class TestRamificationFit:
    def test_constant_p_shift_and_decay(self, cconst):
        recs = locate_ramifications(cconst, 12, n_min=3)
        fit = validate_ramification_asymptotics(recs, cconst)
        assert fit.slope_ok and fit.deviation_slope <= -1.7
        assert fit.shift_ok
        # shift coefficients approach the mean of p on both branches
        assert abs(fit.d_plus[-1] - 1.0) < 0.05
        assert abs(fit.d_minus[-1] - 1.0) < 0.05

    def test_zero_coefficients_zero_shift(self, ram_cache, czero):
        recs = locate_ramifications(czero, 10, n_min=3)
        fit = validate_ramification_asymptotics(recs, czero)
        assert fit.shift_ok
        assert max(abs(d) for d in fit.d_plus) < 1e-3

    def test_insufficient_data(self, ram_cache, czero):
        recs = [r for r in ram_cache["zero"] if abs(r.n) <= 4]
        with pytest.raises(InsufficientData):
            validate_ramification_asymptotics(recs, czero)
