import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cbitc.beamforming import (Beamformer, PowerAllocation, Scheme, SinrReport, asymptotic_limits,
                               closed_form_n1_k1, closed_form_n1_k_many, empirical_sinr,
                               eta_sensitivity, eta_without_itc, fully_canceled, optimal_phases,
                               p2_sinr, power_ratio_curve, sinr_cb_itc, sinr_conventional_cb,
                               sinr_no_cb)
from cbitc.errors import DegenerateChannelError, InvalidArgumentError

FA, FO = math.sqrt(10.0), math.sqrt(12.0)


def grid_eta(fa, fo, P, noise, points=10_001):
    """Brute-force single-server optimum over v_j in [0, sqrt(P)], refined twice."""
    lo, hi = 0.0, math.sqrt(P)
    for _ in range(3):  # zoom in around the best point
        vj = np.linspace(lo, hi, points)
        vu = np.sqrt(np.maximum(P - vj ** 2, 0.0))
        vals = (fa * vu) ** 2 / (noise + (math.sqrt(P) * fo - fa * vj) ** 2)
        k = int(np.argmax(vals))
        step = vj[1] - vj[0]
        lo, hi = max(vj[k] - step, 0.0), min(vj[k] + step, math.sqrt(P))
    return vals[k], vj[k]


def random_phases(rng, n):
    return np.exp(1j * rng.uniform(0, 2 * np.pi, n))


# ------------------------------------------------------------ simple SINRs

def test_sinr_no_cb_examples():
    assert sinr_no_cb(4.0, [1.0], 0.0, 1.0) == 0.0
    assert sinr_no_cb(4.0, [1.0], 1.0, 1.0) == pytest.approx(2.0)
    assert sinr_no_cb(10.0, [], 10.0, 1.0) == pytest.approx(100.0)


def test_sinr_conventional_cb_examples():
    assert sinr_conventional_cb([1.0, 2.0], [], 1.0, 1.0) == pytest.approx(9.0)
    assert sinr_conventional_cb([2.0], [0.5], 3.0, 1.0) == pytest.approx(sinr_no_cb(4.0, [0.5], 3.0, 1.0))
    assert sinr_conventional_cb([1.0, 2.0], [1.0], 0.0, 1.0) == 0.0


def test_noise_must_be_positive():
    with pytest.raises(InvalidArgumentError):
        sinr_no_cb(1.0, [], 1.0, 0.0)


def test_sinr_report_rate():
    r = SinrReport.from_sinr(Scheme.CONV_CB, 3.0)
    assert r.rate == 2.0 and r.scheme is Scheme.CONV_CB
    with pytest.raises(InvalidArgumentError):
        SinrReport.from_sinr("NoCB", -1.0)


# ------------------------------------------------------------ phases and CB-ITC SINR

def test_optimal_phase_examples():
    alloc = PowerAllocation([1.0], [[0.5]], 2.0)
    bf = optimal_phases(alloc, [np.exp(1j * np.pi / 4)], [1.0])
    assert np.angle(bf.w_u[0]) == pytest.approx(-np.pi / 4)
    bf = optimal_phases(alloc, [2.0], [3.0])
    assert abs(np.angle(bf.w_j[0, 0])) == pytest.approx(np.pi)
    # all-real positive channels: ITC paths arrive negative, UAV paths positive
    assert (2.0 * bf.w_j[0, 0]).real < 0 and (2.0 * bf.w_u[0]).real > 0


def test_cb_itc_reduces_to_conventional():
    rng = np.random.default_rng(0)
    h = rng.uniform(0.5, 2, 3)
    f = rng.uniform(0.5, 2, 2)
    fa, fo = h * random_phases(rng, 3), f * random_phases(rng, 2)
    alloc = PowerAllocation(np.full(3, math.sqrt(5.0)), np.zeros((2, 3)), 5.0)
    bf = optimal_phases(alloc, fa, fo)
    assert sinr_cb_itc(bf, fa, fo, 5.0, 0.3) == pytest.approx(sinr_conventional_cb(h, f ** 2, 5.0, 0.3))
    zero = Beamformer(np.zeros(3), np.zeros((2, 3)))
    assert sinr_cb_itc(zero, fa, fo, 5.0, 0.3) == 0.0


def test_cb_itc_rejects_power_violation():
    bf = Beamformer([2.0], [[0.0]])
    with pytest.raises(InvalidArgumentError):
        sinr_cb_itc(bf, [1.0], [1.0], 1.0, 1.0)


def test_worked_example_sinr():
    sol = closed_form_n1_k1(FA, FO, 10.0, 1.0)
    alloc = PowerAllocation([sol.v_u], [[sol.v_j]], 10.0)
    fa, fo = FA * np.exp(0.3j), FO * np.exp(-1.1j)
    assert sinr_cb_itc(optimal_phases(alloc, [fa], [fo]), [fa], [fo], 10.0, 1.0) == pytest.approx(4.0)


def test_phase_optimality_against_perturbations():
    rng = np.random.default_rng(5)
    N, K, P = 3, 2, 4.0
    f_avail = rng.uniform(0.5, 2, N) * random_phases(rng, N)
    f_occ = rng.uniform(0.5, 2, K) * random_phases(rng, K)
    amps = rng.uniform(0, 1, (K + 1, N))
    amps *= math.sqrt(P) / np.linalg.norm(amps, axis=0)
    # keep ITC below the interference it targets: anti-phase is optimal only without over-cancelling
    reach = amps[1:] @ np.abs(f_avail)
    amps[1:] *= np.minimum(1.0, math.sqrt(P) * np.abs(f_occ) / reach)[:, None]
    alloc = PowerAllocation(amps[0], amps[1:], P)
    best = sinr_cb_itc(optimal_phases(alloc, f_avail, f_occ), f_avail, f_occ, P, 0.5)
    for _ in range(100):
        bf = Beamformer(amps[0] * random_phases(rng, N), amps[1:] * random_phases(rng, K * N).reshape(K, N))
        assert sinr_cb_itc(bf, f_avail, f_occ, P, 0.5) <= best + 1e-12


def test_p2_sinr_matches_complex_evaluation():
    rng = np.random.default_rng(9)
    for _ in range(20):
        N, K, P = 4, 3, 2.5
        h, f = rng.uniform(0.1, 2, N), rng.uniform(0.1, 2, K)
        amps = rng.uniform(0, 1, (K + 1, N))
        amps *= math.sqrt(P) / np.linalg.norm(amps, axis=0)
        alloc = PowerAllocation(amps[0], amps[1:], P)
        fa, fo = h * random_phases(rng, N), f * random_phases(rng, K)
        ref = sinr_cb_itc(optimal_phases(alloc, fa, fo), fa, fo, P, 0.7)
        assert p2_sinr(alloc, h, f, 0.7) == pytest.approx(ref, rel=1e-12)


def test_power_allocation_validation():
    with pytest.raises(InvalidArgumentError):
        PowerAllocation([-1.0], [[0.0]], 1.0)
    a = PowerAllocation([1.0, 0.0], [[0.0, 1.0]], 1.0)
    assert a.is_feasible() and a.N == 2 and a.K == 1
    assert not PowerAllocation([1.0], [[1.0]], 1.0).is_feasible()
    empty = PowerAllocation([], np.zeros((3, 0)), 1.0)
    assert empty.N == 0 and empty.K == 3


# ------------------------------------------------------------ closed forms

def test_single_interferer_worked_example():
    sol = closed_form_n1_k1(FA, FO, 10.0, 1.0)
    assert sol.eta == pytest.approx(4.0, abs=1e-9)
    assert sol.v_j == pytest.approx(192.0 / (2.0 * math.sqrt(1200.0)), abs=1e-9)
    assert sol.v_u ** 2 == pytest.approx(2.32, abs=1e-9)
    grid, vj = grid_eta(FA, FO, 10.0, 1.0)
    assert grid == pytest.approx(4.0, rel=1e-6)
    assert vj == pytest.approx(sol.v_j, abs=1e-3)


def test_single_interferer_limits():
    sol = closed_form_n1_k1(FA, 0.0, 10.0, 1.0)
    assert sol.v_j == 0.0 and sol.eta == pytest.approx(100.0)
    sol = closed_form_n1_k1(FA, FO, 0.0, 1.0)
    assert sol.v_j == 0.0 and sol.eta == 0.0
    small = closed_form_n1_k1(FA, FO, 1e-9, 1.0)
    assert small.v_j ** 2 / 1e-9 < 1e-6
    with pytest.raises(DegenerateChannelError):
        closed_form_n1_k1(0.0, FO, 1.0, 1.0)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.05, 5), st.floats(0.05, 5), st.floats(1e-2, 1e3), st.floats(1e-2, 1e2))
def test_single_interferer_matches_grid_search(fa, fo, P, noise):
    sol = closed_form_n1_k1(fa, fo, P, noise)
    grid, _ = grid_eta(fa, fo, P, noise)
    assert grid <= sol.eta * (1 + 1e-12)
    assert sol.eta == pytest.approx(grid, rel=1e-8)
    # residual interference is never over-cancelled
    assert math.sqrt(P) * fo - fa * sol.v_j >= -1e-12 * math.sqrt(P) * fo
    assert sol.eta >= eta_without_itc(fa, fo, P, noise) * (1 - 1e-12)


def test_eta_without_itc():
    assert eta_without_itc(FA, FO, 10.0, 1.0) == pytest.approx(100.0 / 121.0)
    assert eta_without_itc(FA, FO, 1e12, 1.0) == pytest.approx(10.0 / 12.0)
    assert eta_without_itc(FA, 0.0, 10.0, 1.0) == pytest.approx(100.0)


def test_asymptotic_limits():
    lim = asymptotic_limits(FA, FO)
    assert lim.rho_j == pytest.approx(10 / 12) and lim.eta_star == pytest.approx(5.0)
    assert lim.eta_growth == "finite"
    lim = asymptotic_limits(math.sqrt(15.0), FO)
    assert lim.rho_j == pytest.approx(0.8) and math.isinf(lim.eta_star) and lim.eta_growth == "linear"
    lim = asymptotic_limits(2.0, 2.0)
    assert lim.rho_j == 1.0 and lim.eta_growth == "sqrt"
    # the closed form approaches the finite limit as P grows
    assert closed_form_n1_k1(FA, FO, 1e8, 1.0).eta == pytest.approx(5.0, rel=1e-6)
    # equal gains: eta* grows like sqrt(P)
    e1, e2 = (closed_form_n1_k1(2.0, 2.0, P, 1.0).eta for P in (1e6, 4e6))
    assert e2 / e1 == pytest.approx(2.0, rel=1e-2)


def test_many_interferers_examples():
    k1 = closed_form_n1_k_many(FA, [FO], 10.0, 1.0)
    ref = closed_form_n1_k1(FA, FO, 10.0, 1.0)
    assert k1.eta == pytest.approx(ref.eta, rel=1e-12)
    assert k1.v_j[0] == pytest.approx(ref.v_j, rel=1e-12)
    k2 = closed_form_n1_k_many(FA, [2.0, math.sqrt(8.0)], 10.0, 1.0)
    assert k2.eta == pytest.approx(4.0, abs=1e-9)
    assert k2.v_j == pytest.approx([1.6, math.sqrt(8.0) * 0.8], abs=1e-9)
    assert k2.v_u ** 2 == pytest.approx(2.32, abs=1e-9)
    assert k2.S_a == pytest.approx(-2.0)
    none = closed_form_n1_k_many(FA, [0.0, 0.0], 10.0, 1.0)
    assert np.all(none.v_j == 0) and none.eta == pytest.approx(100.0)


def test_many_interferers_matches_2d_grid():
    # brute force over (v_1, v_2) with v_u taking the remaining budget
    fa, f, P, noise = FA, np.array([2.0, math.sqrt(8.0)]), 10.0, 1.0
    g = np.linspace(0, math.sqrt(P), 1201)
    V1, V2 = np.meshgrid(g, g, indexing="ij")
    rem = P - V1 ** 2 - V2 ** 2
    ok = rem >= 0
    vu = np.sqrt(np.where(ok, rem, 0.0))
    res = (math.sqrt(P) * f[0] - fa * V1) ** 2 + (math.sqrt(P) * f[1] - fa * V2) ** 2
    vals = np.where(ok, (fa * vu) ** 2 / (noise + res), -np.inf)
    assert vals.max() == pytest.approx(closed_form_n1_k_many(fa, f, P, noise).eta, rel=1e-4)


def test_many_interferers_multi_grid_random():
    rng = np.random.default_rng(2)
    for _ in range(5):
        fa = rng.uniform(0.5, 2)
        f = rng.uniform(0.2, 2, 2)
        P, noise = 10 ** rng.uniform(-1, 2), 10 ** rng.uniform(-1, 1)
        sol = closed_form_n1_k_many(fa, f, P, noise)
        alloc = PowerAllocation([sol.v_u], sol.v_j.reshape(-1, 1), P)
        assert p2_sinr(alloc, [fa], f, noise) == pytest.approx(sol.eta, rel=1e-10)
        # no feasible perturbation does better
        for _ in range(200):
            v = np.abs(sol.v_j + rng.normal(0, 0.05 * math.sqrt(P), 2))
            if v @ v > P:
                continue
            other = PowerAllocation([math.sqrt(P - v @ v)], v.reshape(-1, 1), P)
            assert p2_sinr(other, [fa], f, noise) <= sol.eta * (1 + 1e-12)


def test_eta_sensitivity():
    assert eta_sensitivity(-2.0, FA, 10.0, 1.0) == pytest.approx(40.0 / 29.0)
    assert eta_sensitivity(-2.0, FA, 0.0, 1.0) == 0.0
    # independent route: central finite difference of the closed form in S_a
    fa, P, noise, S = 1.3, 7.0, 0.4, 0.5
    h = 1e-6
    num = (closed_form_n1_k_many(fa, [math.sqrt(fa ** 2 - S - h)], P, noise).eta
           - closed_form_n1_k_many(fa, [math.sqrt(fa ** 2 - S + h)], P, noise).eta) / (2 * h)
    assert eta_sensitivity(S, fa, P, noise) == pytest.approx(num, rel=1e-5)


@settings(max_examples=50, deadline=None)
@given(st.floats(-20, 5), st.floats(0.1, 5), st.floats(1e-2, 1e3), st.floats(1e-2, 1e2))
def test_eta_sensitivity_positive(S, fa, P, noise):
    assert eta_sensitivity(S, fa, P, noise) > 0


def test_power_ratio_curve():
    assert power_ratio_curve(FA, FO, 1.0, [1e-12])[0][0] == pytest.approx(0.0, abs=1e-9)
    curve = power_ratio_curve(FA, FO, 1.0, np.logspace(-2, 4, 20))
    rho = [r for r, _ in curve]
    assert all(b > a for a, b in zip(rho, rho[1:]))
    assert all(r + u == pytest.approx(1.0) for r, u in curve)
    assert power_ratio_curve(FA, FO, 1.0, [1e6])[0][0] == pytest.approx(10 / 12, abs=1e-2)


def test_fully_canceled():
    alloc = PowerAllocation([0.0], [[1.0], [0.5]], 2.0)
    mask = fully_canceled(alloc, [2.0], [2.0 / math.sqrt(2.0), 0.1])
    assert mask.tolist() == [True, False]


# ------------------------------------------------------------ symbol level

def test_empirical_sinr_worked_example():
    sol = closed_form_n1_k1(FA, FO, 10.0, 1.0)
    alloc = PowerAllocation([sol.v_u], [[sol.v_j]], 10.0)
    bf = optimal_phases(alloc, [FA], [FO])
    est = empirical_sinr(np.random.default_rng(0), bf, [FA], [FO], 10.0, 1.0, 100_000)
    assert est == pytest.approx(4.0, rel=0.02)


def test_empirical_sinr_edge_cases():
    rng = np.random.default_rng(0)
    bf = Beamformer([1.0, 1.0], np.zeros((0, 2)))
    assert math.isinf(empirical_sinr(rng, bf, [1.0, 2.0], [], 1.0, 0.0, 100))
    assert empirical_sinr(rng, Beamformer([0.0], [[0.0]]), [1.0], [1.0], 1.0, 1.0, 100) == 0.0
    with pytest.raises(InvalidArgumentError):
        empirical_sinr(rng, bf, [1.0, 2.0], [], 1.0, 1.0, 0)
