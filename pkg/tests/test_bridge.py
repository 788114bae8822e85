import numpy as np
import pytest
from scipy.stats import kstest, ncx2

from supou import (
    BridgeExpectation,
    BridgeSpec,
    BridgeTable,
    BridgeTableConfig,
    bridge_exponential_expectation,
    simulate_reversed_bridge,
)
from supou._util import stream_rng

# Independent oracles, frozen from quadrature / closed-form / fine-grid runs.
#
# Midpoint mean of the bridge from 0 to 1 over [0,1]: the marginal at s is the
# modulus of a 3-d Gaussian with mean (s*c/u) e1 and variance s(u-s)/u per
# coordinate; its mean at s=1/2 was computed by quadrature of the noncentral
# chi density.
MIDPOINT_MEAN = 0.924660
# E[exp(-(b^2/2) int_0^u r^2 ds)] for the bridge 0 -> c over [0,u] equals
# (bu/sinh bu)^(3/2) * exp(-(c^2/2u)(bu coth bu - 1)) (product of the three
# 1-d Brownian-bridge quadratic functionals); value at b=u=c=1:
CLOSED_FORM_111 = 0.671208
# Fine-grid Monte Carlo reference at b=u=c=1 (steps=64000, 1e5 paths):
FINE_GRID_REF = 0.671174
FINE_GRID_REF_SE = 0.000377


def closed_form_square_functional(b: float, u: float, c: float) -> float:
    return (b * u / np.sinh(b * u)) ** 1.5 * np.exp(
        -(c * c / (2.0 * u)) * (b * u / np.tanh(b * u) - 1.0)
    )


class TestBridgeSpec:
    def test_validation(self):
        with pytest.raises(ValueError):
            BridgeSpec(u=0.0, endpoint=1.0)
        with pytest.raises(ValueError):
            BridgeSpec(u=1.0, endpoint=-1.0)
        with pytest.raises(ValueError):
            BridgeSpec(u=1.0, endpoint=1.0, steps=1)


class TestReversedBridgePaths:
    def test_boundary_pinning(self):
        spec = BridgeSpec(u=1.0, endpoint=1.0, steps=64, paths=16)
        out = simulate_reversed_bridge(spec, rng=0)
        assert out.shape == (16, 65)
        assert np.all(out[:, 0] == 1.0)
        assert np.all(out[:, -1] == 0.0)
        assert np.all(out[:, 1:-1] > 0.0)

    def test_midpoint_mean_against_quadrature(self):
        spec = BridgeSpec(u=1.0, endpoint=1.0, steps=2000, paths=10_000)
        out = simulate_reversed_bridge(spec, rng=stream_rng(12))
        mid = out[:, 1000]  # s = u/2: same marginal forward or reversed
        se = mid.std(ddof=1) / np.sqrt(mid.size)
        assert abs(mid.mean() - MIDPOINT_MEAN) < 3.0 * se

    def test_time_reversal_marginal(self):
        # reversed path at 3u/4 has the forward bridge's u/4 marginal:
        # squared value / sigma^2 ~ noncentral chi^2(3, (s c/u)^2 / sigma^2)
        u, c = 1.0, 1.0
        s = 0.25
        sigma2 = s * (u - s) / u
        nc = (s * c / u) ** 2 / sigma2
        spec = BridgeSpec(u=u, endpoint=c, steps=512, paths=10_000)
        out = simulate_reversed_bridge(spec, rng=stream_rng(4))
        reversed_vals = out[:, 384]  # s = 3u/4 on the reversed clock
        stat = kstest(reversed_vals**2 / sigma2, ncx2(df=3, nc=nc).cdf).statistic
        assert stat < 0.03


class TestBridgeExpectation:
    def test_value_range_enforced(self):
        with pytest.raises(ValueError):
            BridgeExpectation(value=1.5, std_error=0.0)
        with pytest.raises(ValueError):
            BridgeExpectation(value=0.0, std_error=0.0)

    def test_tiny_l_gives_one(self):
        spec = BridgeSpec(u=1.0, endpoint=1.0, steps=128, paths=2000)
        res = bridge_exponential_expectation(1e-9, 0.0, spec, rng=1)
        assert abs(res.value - 1.0) < 1e-6

    def test_tiny_u_gives_one(self):
        spec = BridgeSpec(u=1e-6, endpoint=2.0, steps=128, paths=2000)
        res = bridge_exponential_expectation(0.02, 0.0, spec, rng=2)
        assert abs(res.value - 1.0) < 1e-4

    def test_matches_closed_form_and_fine_grid(self):
        spec = BridgeSpec(u=1.0, endpoint=1.0, steps=512, paths=100_000)
        res = bridge_exponential_expectation(1.0, 0.0, spec, rng=3)
        assert abs(res.value - CLOSED_FORM_111) < 3.0 * res.std_error
        combined = np.hypot(res.std_error, FINE_GRID_REF_SE)
        assert abs(res.value - FINE_GRID_REF) < 3.0 * combined

    def test_step_doubling_stability(self):
        coarse = bridge_exponential_expectation(
            1.0, 0.0, BridgeSpec(u=1.0, endpoint=1.0, steps=256, paths=40_000), rng=5
        )
        fine = bridge_exponential_expectation(
            1.0, 0.0, BridgeSpec(u=1.0, endpoint=1.0, steps=512, paths=40_000), rng=6
        )
        combined = np.hypot(coarse.std_error, fine.std_error)
        assert abs(coarse.value - fine.value) < 3.0 * combined

    def test_monotone_in_l_pathwise(self):
        spec = BridgeSpec(u=1.0, endpoint=1.0, steps=128, paths=4000)
        values = [
            bridge_exponential_expectation(l, 0.5, spec, rng=9).value
            for l in (0.01, 0.1, 0.5, 1.0)
        ]
        assert all(a >= b for a, b in zip(values, values[1:]))

    def test_std_error_scaling(self):
        small = bridge_exponential_expectation(
            1.0, 0.0, BridgeSpec(u=1.0, endpoint=1.0, steps=128, paths=5_000), rng=8
        )
        big = bridge_exponential_expectation(
            1.0, 0.0, BridgeSpec(u=1.0, endpoint=1.0, steps=128, paths=20_000), rng=8
        )
        ratio = small.std_error / big.std_error
        assert abs(ratio - 2.0) < 0.4  # quadrupling paths halves the error +-20%

    def test_value_always_in_unit_interval(self):
        for seed, l, off in [(1, 0.3, -2.0), (2, 1.5, 3.0), (3, 0.02, 0.0)]:
            res = bridge_exponential_expectation(
                l, off, BridgeSpec(u=2.0, endpoint=0.7, steps=128, paths=1000), rng=seed
            )
            assert 0.0 < res.value <= 1.0


class TestBridgeTable:
    def test_scaling_identity_against_direct_simulation(self):
        # the standardized cache must agree with direct bridges at (u, c)
        table = BridgeTable(BridgeTableConfig(paths=4096, steps=256, seed=0))
        for u, c, l, off in [(4.0, 2.0, 0.5, 0.0), (0.5, 1.0, 0.8, 1.0), (10.0, 3.0, 0.1, -1.0)]:
            cached = table.expectation(u, c, off, l)
            direct = bridge_exponential_expectation(
                l, off, BridgeSpec(u=u, endpoint=c, steps=512, paths=40_000), rng=21
            )
            combined = np.hypot(cached.std_error, direct.std_error) + 1e-4
            assert abs(cached.value - direct.value) < 3.0 * combined, (u, c, l, off)

    def test_closed_form_through_cache(self):
        table = BridgeTable(BridgeTableConfig(paths=8192, steps=256, seed=1))
        for u, c, b in [(1.0, 1.0, 1.0), (4.0, 2.0, 0.5), (2.0, 0.5, 0.7)]:
            got = table.expectation(u, c, 0.0, b)
            want = closed_form_square_functional(b, u, c)
            assert abs(got.value - want) < max(4.0 * got.std_error, 0.004), (u, c, b)

    def test_determinism(self):
        cfg = BridgeTableConfig(paths=512, steps=64, seed=42)
        t1, t2 = BridgeTable(cfg), BridgeTable(cfg)
        assert np.array_equal(t1.A, t2.A)
        assert np.array_equal(t1.B, t2.B)
