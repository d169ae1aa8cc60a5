import numpy as np
import pytest

from floq3 import (
    NonRealLambda,
    characteristic_cubic,
    discriminant,
    discriminant_ab,
    discriminant_from_trace,
    point,
    psi,
    solve_multipliers,
)
from floq3.monodromy import trace_pair_many, unperturbed_trace
from floq3.multipliers import discriminant_cross, discriminant_trace_pair
from floq3.spectrum_scan import DISK_RADIUS, disk_center_z

import oracles

W = np.exp(2j * np.pi / 3)


def unperturbed_pair(lam):
    return unperturbed_trace(lam), np.conj(unperturbed_trace(np.conj(lam)))


class TestCharacteristicCubic:
    def test_coefficients(self):
        b = characteristic_cubic(2.0 + 1j, 0.5 - 0.25j)
        assert b == (-1.0, 2.0 + 1j, -(0.5 - 0.25j), 1.0)

    def test_triple_root_at_origin(self):
        # T = 3 factorizes as -(tau - 1)^3
        coeffs = characteristic_cubic(3.0, 3.0)
        for tau in (1.0, 1.0, 1.0):
            val = sum(c * tau ** (3 - k) for k, c in enumerate(coeffs))
            assert val == 0

    def test_real_lambda_conjugate_pair(self, ccos):
        T, Tc = trace_pair_many(ccos, [123.0])
        assert Tc[0] == pytest.approx(np.conj(T[0]), rel=1e-10)


class TestSolveMultipliers:
    def test_unperturbed_targets(self):
        lam = (6 * np.pi) ** 3
        sp = point(lam)
        trip = solve_multipliers(*unperturbed_pair(lam), sp)
        assert trip.tau[0] == pytest.approx(1.0, abs=1e-9)
        assert trip.tau[1] == pytest.approx(np.exp(1j * 6 * np.pi * W), rel=1e-9)
        assert trip.tau[2] == pytest.approx(np.exp(1j * 6 * np.pi * W**2), rel=1e-9)
        assert not trip.ambiguous

    def test_triple_root_flagged_ambiguous(self):
        trip = solve_multipliers(3.0, 3.0, point(0.0))
        assert trip.ambiguous
        assert np.abs(np.prod(trip.tau) - 1.0) < 1e-8

    def test_constant_p_roots(self, cconst, tight_opts):
        lam = (10 * np.pi) ** 3
        T, Tc = trace_pair_many(cconst, [lam], tight_opts)
        trip = solve_multipliers(T[0], Tc[0], point(lam))
        expect = np.sort_complex(np.exp(1j * oracles.const_p_kroots(lam)))
        got = np.sort_complex(trip.tau)
        assert np.all(np.abs(got - expect) <= 1e-7 * np.abs(expect))

    @pytest.mark.parametrize("which", ["zero", "const", "mix"])
    def test_vieta_residuals(self, which, czero, cconst, cmix):
        c = {"zero": czero, "const": cconst, "mix": cmix}[which]
        rng = np.random.default_rng(hash(which) % 2**32)
        lams = np.concatenate(
            [
                rng.uniform(-800, 800, 12),
                rng.uniform(-200, 200, 12) + 1j * rng.uniform(-200, 200, 12),
            ]
        )
        T, Tc = trace_pair_many(c, lams)
        for lam, t, tc in zip(lams, T, Tc):
            trip = solve_multipliers(t, tc, point(lam))
            t1, t2, t3 = trip.tau
            assert abs(t1 * t2 * t3 - 1.0) < 1e-8 * max(1.0, abs(t1 * t2 * t3))
            assert abs(t1 + t2 + t3 - t) < 1e-8 * max(1.0, abs(t))
            pair = t1 * t2 + t1 * t3 + t2 * t3
            assert abs(pair - tc) < 1e-8 * max(1.0, abs(tc))

    def test_real_lambda_inversion_symmetry(self, cmix):
        # on the real axis the multiplier set is closed under tau -> 1/conj(tau)
        lams = np.array([-350.0, -40.0, 17.0, 444.0])
        T, Tc = trace_pair_many(cmix, lams)
        for lam, t, tc in zip(lams, T, Tc):
            trip = solve_multipliers(t, tc, point(lam))
            mapped = np.sort_complex(1.0 / np.conj(trip.tau))
            orig = np.sort_complex(trip.tau)
            assert np.all(np.abs(mapped - orig) <= 1e-8 * np.maximum(1.0, np.abs(orig)))

    def test_lyapunov_branches(self):
        lam = 900.0
        trip = solve_multipliers(*unperturbed_pair(lam), point(lam))
        expect = 0.5 * (trip.tau + 1.0 / trip.tau)
        assert np.allclose(trip.lyapunov, expect)

    def test_label_stability_away_from_disks(self, cmix):
        # outside every localization disk and above the threshold energy the
        # chosen assignment beats any other by at least a factor 2
        from itertools import permutations

        rng = np.random.default_rng(17)
        threshold = (5 * np.pi / np.sqrt(3)) ** 3
        count = 0
        while count < 12:
            lam = complex(rng.uniform(-6e3, 6e3), rng.uniform(-6e3, 6e3))
            if abs(lam) < threshold:
                continue
            sp = point(lam)
            zz = sp.z if lam.imag >= 0 else np.conj(point(np.conj(lam)).z)
            if any(
                abs(zz - disk_center_z(n)) < 2 * DISK_RADIUS for n in range(1, 14)
            ):
                continue
            # stay clear of both eigenvalue-disk center families in the z plane
            near_k = min(
                min(abs(sp.z - np.pi * n) for n in range(1, 14)),
                min(abs(sp.z - np.pi * n * np.exp(1j * np.pi / 3)) for n in range(1, 14)),
            )
            if near_k < 0.75 * np.pi:
                continue
            T, Tc = trace_pair_many(cmix, [lam])
            trip = solve_multipliers(T[0], Tc[0], sp)
            targets = np.exp(1j * sp.z * np.array([1, W, W**2]))

            def cost(perm):
                return sum(
                    abs(trip.tau[perm[j]] - targets[j])
                    / (abs(trip.tau[perm[j]]) + abs(targets[j]))
                    for j in range(3)
                )

            costs = sorted(cost(p) for p in permutations(range(3)))
            assert costs[0] <= 0.5 * costs[1]
            assert not trip.ambiguous
            count += 1


class TestDiscriminantRoutes:
    def test_product_matches_unperturbed_closed_form(self):
        for lam in (100.0, -50.0, 3e3, 1e4):
            trip = solve_multipliers(*unperturbed_pair(lam), point(lam))
            rho = discriminant(trip).rho
            assert abs(rho - oracles.rho0(lam)) <= 1e-7 * max(1.0, abs(oracles.rho0(lam)))

    def test_triple_root_vanishes(self):
        trip = solve_multipliers(3.0, 3.0, point(0.0))
        assert abs(discriminant(trip).rho) < 1e-8

    def test_trace_identity_frozen_values(self):
        assert discriminant_from_trace(3.0, 0.0).rho == 0
        assert discriminant_from_trace(0.0, 0.0).rho == -27
        with pytest.raises(NonRealLambda):
            discriminant_from_trace(1.0, 1.0j)

    def test_ab_frozen_values(self):
        assert discriminant_ab(3.0 + 0j, 0.0).rho == 0
        assert discriminant_ab(0.0 + 0j, 0.0).rho == -27
        assert discriminant_ab(3.0 + 1.0j, 0.0).rho == 109
        with pytest.raises(NonRealLambda):
            discriminant_ab(1.0, -2.0j)

    def test_trace_vs_product_unperturbed(self):
        lam = 100.0
        T = unperturbed_trace(lam)
        trip = solve_multipliers(*unperturbed_pair(lam), point(lam))
        d1 = discriminant_from_trace(T, lam).rho
        d2 = discriminant(trip).rho
        assert abs(d1 - d2) <= 1e-8 * max(1.0, abs(d1))

    def test_ab_equals_trace_identity(self, cmix):
        lams = np.linspace(-150, 150, 40)
        T, _ = trace_pair_many(cmix, lams)
        for lam, t in zip(lams, T):
            da = discriminant_ab(t, lam).rho.real
            dt = discriminant_from_trace(t, lam).rho.real
            assert abs(da - dt) <= 1e-10 * max(1.0, abs(da), abs(dt))

    @pytest.mark.parametrize("which", ["zero", "const", "cos"])
    def test_route_agreement_real_axis(self, which, czero, cconst, ccos):
        c = {"zero": czero, "const": cconst, "cos": ccos}[which]
        lams = np.linspace(-120, 120, 60)
        T, Tc = trace_pair_many(c, lams)
        for lam, t, tc in zip(lams, T, Tc):
            trip = solve_multipliers(t, tc, point(lam))
            val = discriminant_cross(t, trip, lam)
            assert val.cross_residual < 1e-6

    def test_entire_form_matches_product_off_axis(self, ccos):
        lam = 60.0 + 40.0j
        T, Tc = trace_pair_many(ccos, [lam])
        trip = solve_multipliers(T[0], Tc[0], point(lam))
        rho_p = discriminant(trip).rho
        rho_e = discriminant_trace_pair(T[0], Tc[0])
        assert abs(rho_p - rho_e) < 1e-8 * max(1.0, abs(rho_p))

    def test_imaginary_part_vanishes_on_axis(self, cmix):
        lams = np.linspace(-90, 90, 25)
        T, Tc = trace_pair_many(cmix, lams)
        for lam, t, tc in zip(lams, T, Tc):
            trip = solve_multipliers(t, tc, point(lam))
            rho = discriminant(trip).rho
            assert abs(rho.imag) < 1e-8 * max(1.0, abs(rho))

    def test_sign_law_on_real_axis(self, ccos, czero):
        # inside a multiplicity-3 band all multipliers are unimodular and the
        # discriminant is <= 0; outside exactly one is unimodular and it is >= 0
        from floq3 import from_fourier

        ceps = from_fourier([(1, 0.2)])  # h > 0 with a band near the origin
        h = 1.0 / (6 * np.pi**2)
        width = 4 * h**1.5 * 0.2**3
        inside = [0.0, width / 4, -width / 4]
        outside = [width * 4, -width * 4, 30.0, -30.0]
        T_in, Tc_in = trace_pair_many(ceps, inside)
        for lam, t, tc in zip(inside, T_in, Tc_in):
            trip = solve_multipliers(t, tc, point(lam))
            assert np.all(np.abs(np.abs(trip.tau) - 1.0) < 1e-6)
            assert discriminant_ab(t, lam).rho.real <= 1e-6
        T_out, Tc_out = trace_pair_many(ceps, outside)
        for lam, t, tc in zip(outside, T_out, Tc_out):
            trip = solve_multipliers(t, tc, point(lam))
            n_uni = np.sum(np.abs(np.abs(trip.tau) - 1.0) < 1e-8)
            assert n_uni == 1
            assert discriminant_ab(t, lam).rho.real >= -1e-6


class TestPsi:
    def test_vanishes_at_unperturbed_ramification(self):
        n = 4
        lam = 1j * (2 * np.pi * n / np.sqrt(3)) ** 3
        sp = point(lam)
        trip_a = solve_multipliers(*unperturbed_pair(lam), sp)
        trip_b = solve_multipliers(*unperturbed_pair(np.conj(lam)), point(np.conj(lam)))
        val = psi(sp, trip_a.tau[2], trip_b.tau[2])
        # the conjugate-side branch sits on an exact double root, whose
        # square-root conditioning caps the achievable residual near sqrt(eps)
        assert abs(val) < 1e-6 * abs(trip_a.tau[2])

    def test_far_from_ramifications(self, cconst, tight_opts):
        lam = (10 * np.pi) ** 3
        sp = point(lam)
        T, Tc = trace_pair_many(cconst, [lam, np.conj(lam)], tight_opts)
        trip_a = solve_multipliers(T[0], Tc[0], sp)
        trip_b = solve_multipliers(T[1], Tc[1], point(np.conj(lam)))
        val = psi(sp, trip_a.tau[2], trip_b.tau[2])
        assert abs(val) > 0.5 * abs(trip_a.tau[2])
