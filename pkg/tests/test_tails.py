import numpy as np
import pytest

from pointspec.errors import MarginError
from pointspec.models import enumerate_modes, make_model
from pointspec.tails import TailSums, pair_tail, power_tail_bound, quartic_tail


@pytest.fixture(scope="module")
def interval_tails(interval_model):
    ms = enumerate_modes(interval_model, 200.0)
    return ms, TailSums(ms, [1.0])


def brute_arrays(n_max=10**7):
    n = np.arange(1.0, n_max)
    w = (2 / np.pi) * np.sin(n) ** 2
    return n**2, w


def test_moments_match_brute_force(interval_tails):
    ms, ts = interval_tails
    E, w = brute_arrays()
    for p in [2, 3, 4, 6]:
        brute = float(np.sum((w / E**p)[E > ms.cap]))
        val, unc = ts.moment(p, len(ms))
        # brute force is itself truncated at 1e7 modes; allow its own tail
        assert abs(val - brute) < unc + 1e-15 + 2.0 / (10.0**7) ** (2 * p - 3)


def test_moment_suffix_consistency(interval_tails):
    ms, ts = interval_tails
    full, _ = ts.moment(3, len(ms))
    shorter, _ = ts.moment(3, len(ms) - 4)
    terms = ts.raw_weights[-4:] / ts.energies[-4:] ** 3
    assert shorter == pytest.approx(full + terms.sum(), rel=1e-13)


def test_pair_tail_vs_brute(interval_tails):
    ms, ts = interval_tails
    E, w = brute_arrays()
    for (u, v) in [(5.0, -1.0), (-2.0, -2.0), (30.0, 10.0)]:
        brute = float(np.sum((w / ((E - u) * (E - v)))[E > ms.cap]))
        val, bnd = pair_tail(ts, len(ms), u, v, 1e-13)
        assert abs(val - brute) < bnd + 3e-14


def test_quartic_tail_vs_brute(interval_tails):
    ms, ts = interval_tails
    E, w = brute_arrays()
    u, v = 4.5, 0.4
    brute = float(np.sum((w * E**2 / ((E - u) ** 2 * (E - v) ** 2))[E > ms.cap]))
    val, bnd = quartic_tail(ts, len(ms), u, v, 1e-13)
    assert abs(val - brute) < bnd + 3e-14


def test_rectangle_moment_vs_partial_sum(rect_model):
    ms = enumerate_modes(rect_model, 250.0)
    ts = TailSums(ms, [0.37, 0.59])
    big = enumerate_modes(rect_model, 2.0e6)
    w = big.weights_at([0.37, 0.59])
    brute = float(np.sum((w / big.energies**3)[big.energies > 250.0]))
    val, unc = ts.moment(3, len(ms))
    # remaining tail of the brute sum is below 1e-13 at this cap
    assert abs(val - brute) < unc + 1e-12


def test_margin_enforced(interval_tails):
    ms, ts = interval_tails
    with pytest.raises(MarginError):
        pair_tail(ts, len(ms), 150.0, -1.0, 1e-10)


def test_power_tail_bound_is_upper_bound(interval_model):
    E, w = brute_arrays()
    for lam in [100.0, 400.0, 1600.0]:
        true = float(np.sum((w / E**2)[E > lam]))
        bound = power_tail_bound(interval_model, lam, 2.0)
        assert true <= bound <= 60.0 * true


def test_bound_monotone_in_cutoff(rect_model):
    bounds = [power_tail_bound(rect_model, lam, 2.0) for lam in [200.0, 400.0, 800.0]]
    assert bounds[0] > bounds[1] > bounds[2]
