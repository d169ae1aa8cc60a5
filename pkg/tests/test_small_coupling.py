import numpy as np
import pytest

from floq3 import (
    IntegratorOptions,
    NonzeroPMean,
    UnsupportedOrder,
    epsilon_terms,
    measure_band,
    point,
    predict_band,
    propagate,
)
from floq3.small_coupling import term_envelope, width_law_fit

H_COS_P = 1.0 / (6 * np.pi**2)
H_COS_Q = -1.0 / (8 * np.pi**4)


class TestSeriesTerms:
    def test_unipotent_leading_term_at_origin(self, czero):
        s = epsilon_terms(czero, 0.0, 0)
        expect = np.array([[1, 1, 0.5], [0, 1, 1], [0, 0, 1]], dtype=complex)
        assert np.abs(s.terms[0] - expect).max() == 0.0

    def test_order_cap(self, ccos):
        with pytest.raises(UnsupportedOrder):
            epsilon_terms(ccos, 1.0, 5)

    def test_first_order_trace_vanishes_for_mean_zero_p(self, ccos, cq, cmix):
        rng = np.random.default_rng(12)
        lams = rng.uniform(-50, 50, 10) + 1j * rng.uniform(-20, 20, 10)
        for c in (ccos, cq, cmix):
            for lam in lams[:5]:
                s = epsilon_terms(c, lam, 1)
                z0 = point(lam).z0
                assert abs(s.traces[1]) < 1e-9 * max(1.0, np.exp(z0))

    def test_first_order_trace_survives_mean_of_p(self, cconst):
        # with a surviving mean the first-order trace is genuinely nonzero
        s = epsilon_terms(cconst, 5.0, 1)
        assert abs(s.traces[1]) > 0.5

    @pytest.mark.parametrize(
        "cname,h",
        [("ccos", H_COS_P), ("cq", H_COS_Q)],
    )
    def test_second_order_real_trace_at_origin(self, cname, h, request):
        c = request.getfixturevalue(cname)
        s = epsilon_terms(c, 0.0, 2)
        assert s.traces[2].real == pytest.approx(-3.0 * h, rel=1e-6)

    def test_second_order_mixed_sets(self, cmix, cmulti):
        for c in (cmix, cmulti):
            s = epsilon_terms(c, 0.0, 2)
            assert s.traces[2].real == pytest.approx(-3.0 * c.invariant_h(), rel=1e-4)

    def test_term_envelope(self, cmix):
        lam = 17.0 - 6.0j
        s = epsilon_terms(cmix, lam, 3)
        for n, term in enumerate(s.terms):
            bound = term_envelope(cmix, lam, n)
            assert np.linalg.norm(term, 2) <= 10.0 * bound

    def test_radius_hint(self, ccos, czero):
        assert epsilon_terms(ccos, 1.0, 0).epsilon_radius_hint == pytest.approx(
            np.pi / 4, rel=1e-10
        )  # 1/kappa with kappa = 4/pi
        assert epsilon_terms(czero, 1.0, 0).epsilon_radius_hint == np.inf

    def test_series_matches_direct_propagation(self, ccos):
        lam = 5.0
        s = epsilon_terms(ccos, lam, 3)
        remainders = {}
        for eps in (0.2, 0.1):
            direct = propagate(
                ccos.scaled(eps), point(lam), IntegratorOptions(tolerance=1e-13)
            ).trace
            partial = sum(eps**n * s.traces[n] for n in range(4))
            remainders[eps] = abs(direct - partial)
        assert remainders[0.2] / remainders[0.1] >= 12.0

    def test_unperturbed_trace_taylor(self, czero, tight_opts):
        # quadratic Taylor data of the trace at the origin: -i/2 and -1/240
        d = 1e-2
        ts = {}
        for k in (-2, -1, 0, 1, 2):
            ts[k] = propagate(czero, point(k * d), tight_opts).trace
        c1 = (8 * (ts[1] - ts[-1]) - (ts[2] - ts[-2])) / (12 * d)
        c2 = (16 * (ts[1] + ts[-1]) - (ts[2] + ts[-2]) - 30 * ts[0]) / (24 * d * d)
        assert c1 == pytest.approx(-0.5j, rel=1e-4)
        assert c2 == pytest.approx(-1.0 / 240.0, rel=1e-4)


class TestPrediction:
    def test_cosine_p_width(self, ccos):
        pred = predict_band(ccos, 0.1)
        assert pred.kind == "band"
        assert pred.h == pytest.approx(H_COS_P, rel=1e-12)
        assert pred.width_leading == pytest.approx(4 * H_COS_P**1.5 * 1e-3, rel=1e-9)
        assert pred.r_plus - pred.r_minus == pytest.approx(pred.width_leading, rel=1e-12)

    def test_cosine_q_empty(self, cq):
        pred = predict_band(cq, 0.3)
        assert pred.kind == "empty"
        assert pred.h < 0

    def test_zero_inconclusive(self, czero):
        assert predict_band(czero, 0.1).kind == "inconclusive"

    def test_mean_p_rejected(self, cconst):
        with pytest.raises(NonzeroPMean):
            predict_band(cconst, 0.1)


@pytest.fixture(scope="module")
def sweep(ccos):
    return [measure_band(ccos, e) for e in (0.05, 0.1, 0.2)]


class TestMeasurement:

    def test_width_ratio_tends_to_one(self, sweep):
        ratios = [m.width_ratio for m in sweep]
        assert all(abs(r - 1.0) < 0.05 for r in ratios)
        # relative deviation shrinks with the coupling
        assert abs(ratios[0] - 1.0) <= abs(ratios[2] - 1.0) + 5e-3

    def test_cube_law_fit(self, sweep, ccos):
        s, C = width_law_fit(sweep)
        assert 2.85 <= s <= 3.15
        assert abs(C - 4 * H_COS_P**1.5) <= 0.2 * 4 * H_COS_P**1.5

    def test_q_only_empty(self, cq):
        for eps in (0.05, 0.1, 0.2):
            m = measure_band(cq, eps)
            assert m.interval is None

    def test_zero_degenerate(self, czero):
        m = measure_band(czero, 0.1)
        assert m.interval is None
