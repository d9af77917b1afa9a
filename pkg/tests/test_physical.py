import math

import numpy as np
import pytest
from scipy import stats

from cellsec import analytic, errors, geometry, params, physical


def make_params(**kw):
    base = dict(n_antennas=20, users_per_cell=20, snr_db=10.0, path_loss_exp=4.0, bs_density=0.1)
    base.update(kw)
    return params.derive_params(**base)


class TestRciPrecoder:
    def test_single_user_is_matched_filter(self):
        rng = np.random.default_rng(0)
        h = physical.sample_channel(1, 6, rng)
        w = physical.rci_precoder(h, 0.3).matrix[:, 0]
        cosine = abs(h[0] @ w) / (np.linalg.norm(h) * np.linalg.norm(w))
        assert cosine == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("shape", [(8, 16), (16, 8), (12, 12)])
    def test_unit_frobenius_norm(self, shape):
        rng = np.random.default_rng(1)
        h = physical.sample_channel(*shape, rng)
        result = physical.rci_precoder(h, 0.1)
        assert np.linalg.norm(result.matrix) == pytest.approx(1.0, abs=1e-10)
        assert result.normalization > 0.0

    @pytest.mark.parametrize("shape", [(8, 16), (16, 8), (10, 10)])
    def test_two_gram_forms_agree(self, shape):
        rng = np.random.default_rng(2)
        h = physical.sample_channel(*shape, rng)
        w_users = physical.rci_precoder(h, 0.2, gram_side="users").matrix
        w_antennas = physical.rci_precoder(h, 0.2, gram_side="antennas").matrix
        assert np.max(np.abs(w_users - w_antennas)) < 1e-8

    def test_normalization_matches_spectral_form(self):
        rng = np.random.default_rng(3)
        h = physical.sample_channel(9, 14, rng)
        res = physical.rci_precoder(h, 0.15)
        assert res.normalization == pytest.approx(
            physical.precoder_trace_normalization(h, 0.15), rel=1e-10
        )

    def test_batch_matches_single(self):
        rng = np.random.default_rng(4)
        stack = np.stack([physical.sample_channel(6, 10, rng) for _ in range(5)])
        mats, zetas = physical._rci_batch(stack, 0.23)
        for i in range(5):
            single = physical.rci_precoder(stack[i], 0.23)
            assert np.allclose(mats[i], single.matrix, atol=1e-12)
            assert zetas[i] == pytest.approx(single.normalization, rel=1e-12)

    def test_invalid_inputs(self):
        rng = np.random.default_rng(5)
        h = physical.sample_channel(4, 8, rng)
        with pytest.raises(errors.DomainError):
            physical.rci_precoder(h, 0.0)
        with pytest.raises(errors.DomainError):
            physical.rci_precoder(h, 0.1, gram_side="banana")


class TestChannelStatistics:
    def test_entry_variance(self):
        rng = np.random.default_rng(6)
        h = physical.sample_channel(200, 200, rng)
        assert np.mean(np.abs(h) ** 2) == pytest.approx(1.0, abs=0.01)
        assert np.mean(h.real**2) == pytest.approx(0.5, abs=0.01)

    def test_inter_cell_gain_mean(self):
        # Aggregate gain has mean equal to the stream count.
        rng = np.random.default_rng(7)
        k, n = 20, 20
        xi = params.optimal_regularization(1.0, 10.0)
        gains = np.empty(4000)
        for i in range(len(gains)):
            pre = physical.rci_precoder(physical.sample_channel(k, n, rng), xi)
            victim = physical.sample_channel(1, n, rng)[0]
            gains[i] = physical.inter_cell_gain(victim, pre)
        se = gains.std(ddof=1) / math.sqrt(len(gains))
        assert abs(gains.mean() - k) < 3 * se

    def test_leakage_gain_distribution(self):
        # Single-stream leakage gain at an outside victim is unit exponential.
        rng = np.random.default_rng(8)
        k, n = 20, 20
        xi = params.optimal_regularization(1.0, 10.0)
        gains = np.empty(4000)
        for i in range(len(gains)):
            pre = physical.rci_precoder(physical.sample_channel(k, n, rng), xi)
            victim = physical.sample_channel(1, n, rng)[0]
            gains[i] = physical.leakage_gain(victim, pre, column=0)
        assert stats.kstest(gains, "expon").pvalue > 0.01


def isolated_scene(distance=2.0, n_antennas=4):
    real = geometry.NetworkRealization(
        bs_points=np.array([[distance, 0.0]]),
        user_points=np.zeros((1, 2)),
        tagged_bs_index=0,
        association=np.zeros(1, dtype=int),
        tagged_distance=distance,
        window_radius=10.0,
    )
    return real


class TestComputeSinrs:
    def test_isolated_single_user(self):
        p = params.derive_params(
            n_antennas=4, users_per_cell=1, snr=2.0, path_loss_exp=4.0, bs_density=0.1,
            regularizer=0.2,
        )
        real = isolated_scene(distance=2.0, n_antennas=4)
        rng = np.random.default_rng(9)
        channels = physical.sample_channel_set(real, p, rng)
        precoders = physical.build_precoders(channels, p)
        sinrs = physical.compute_sinrs(real, channels, precoders, p)
        h = channels.cells[0][0]
        w = precoders[0].matrix[:, 0]
        expected = p.snr * 2.0**-4.0 * abs(h @ w) ** 2
        assert sinrs.legit_sinr == pytest.approx(expected, rel=1e-12)
        assert sinrs.eav_sinr == 0.0
        assert sinrs.intra_interference == 0.0
        assert sinrs.ext_leakage == 0.0

    def test_full_expression_matches_sinr_form(self):
        # The rate from the two SINRs must equal the expanded expression
        # rebuilt from raw channel inner products.
        p = make_params(n_antennas=6, users_per_cell=6, bs_density=0.3)
        rng = np.random.default_rng(10)
        real = geometry.build_realization(p, "exact", rng)
        channels = physical.sample_channel_set(real, p, rng)
        precoders = physical.build_precoders(channels, p)
        sinrs = physical.compute_sinrs(real, channels, precoders, p)
        r_sinr = physical.secrecy_rate(sinrs)

        rho, eta = p.snr, p.path_loss_exp
        c = real.tagged_bs_index
        members = channels.members[c]
        o = int(np.flatnonzero(members == 0)[0])
        h_c, w_c = channels.cells[c], precoders[c].matrix
        proj = h_c[o] @ w_c
        num = rho * real.tagged_distance**-eta * abs(proj[o]) ** 2
        crosstalk = rho * real.tagged_distance**-eta * (
            np.sum(np.abs(proj) ** 2) - abs(proj[o]) ** 2
        )
        inter = 0.0
        for b, h_b in channels.cells.items():
            if b == c:
                continue
            cross = channels.to_origin[b] @ precoders[b].matrix
            inter += rho * np.sum(np.abs(cross) ** 2) * np.hypot(*real.bs_points[b]) ** -eta
        gamma_o = num / (crosstalk + inter + 1.0)

        mates = members[members != 0]
        mate_d = np.hypot(*(real.user_points[mates] - real.bs_points[c]).T)
        leak = rho * np.sum(
            mate_d**-eta * np.abs(np.delete(h_c @ w_c[:, o], o)) ** 2
        )
        ext = real.external_eavesdroppers
        ext_d = np.hypot(*(real.user_points[ext] - real.bs_points[c]).T)
        w_norm2 = np.sum(np.abs(w_c[:, o]) ** 2)
        gamma_m = leak + rho * np.sum(
            w_norm2 * np.abs(channels.external_unit) ** 2 * ext_d**-eta
        )
        r_full = max(0.0, math.log2(1 + gamma_o) - math.log2(1 + gamma_m))
        assert abs(r_sinr - r_full) < 1e-12

    def test_snr_doubling(self):
        p = make_params(n_antennas=6, users_per_cell=6, bs_density=0.3, snr_db=None, snr=2.0)
        rng = np.random.default_rng(11)
        real = geometry.build_realization(p, "exact", rng)
        channels = physical.sample_channel_set(real, p, rng)
        precoders = physical.build_precoders(channels, p)
        base = physical.compute_sinrs(real, channels, precoders, p)
        doubled_params = params.derive_params(
            n_antennas=6, users_per_cell=6, snr=4.0, path_loss_exp=4.0, bs_density=0.3,
            regularizer=p.regularizer,
        )
        doubled = physical.compute_sinrs(real, channels, precoders, doubled_params)
        # Interference-to-signal ratios are SNR-free; the legit SINR grows.
        assert doubled.intra_interference == pytest.approx(base.intra_interference)
        assert doubled.inter_interference == pytest.approx(base.inter_interference)
        assert doubled.ext_leakage == pytest.approx(base.ext_leakage)
        assert doubled.legit_sinr >= base.legit_sinr

    def test_missing_channel_contract(self):
        p = make_params(n_antennas=6, users_per_cell=6, bs_density=0.3)
        rng = np.random.default_rng(12)
        real = geometry.build_realization(p, "exact", rng)
        channels = physical.sample_channel_set(real, p, rng)
        precoders = physical.build_precoders(channels, p)
        channels.to_origin.pop(next(iter(channels.to_origin)))
        with pytest.raises(errors.ContractError):
            physical.compute_sinrs(real, channels, precoders, p)


class TestSecrecyRate:
    def test_simple_values(self):
        mk = lambda go, gm: physical.SinrBreakdown(go, gm, 0, 0, 0, 0)
        assert physical.secrecy_rate(mk(3.0, 1.0)) == pytest.approx(1.0)
        assert physical.secrecy_rate(mk(1.7, 1.7)) == 0.0
        assert physical.secrecy_rate(mk(0.5, 2.0)) == 0.0

    def test_nonincreasing_in_eavesdropper_sinr(self):
        gammas = np.linspace(0.0, 5.0, 40)
        rates = [physical.rate_from_sinr_pair(2.0, g) for g in gammas]
        assert all(a >= b for a, b in zip(rates, rates[1:]))
        assert all(r >= 0.0 for r in rates)


class TestApproxSecrecyRate:
    def test_isolated_limit(self):
        p = make_params(snr_db=None, snr=1.0)
        det_eq = analytic.DeterministicEquivalents(g_val=0.0, alpha=5.0 / 9.0, chi=0.0)
        r = physical.approx_secrecy_rate(1.0, 0.0, 0.0, det_eq, p)
        assert r == pytest.approx(math.log2(1 + 5.0 / 9.0))

    def test_hand_value(self):
        p = make_params(snr_db=None, snr=1.0)
        det_eq = analytic.deterministic_equivalents(1.0, 1.0 / 6.0)
        r = physical.approx_secrecy_rate(1.0, 0.0, 0.0, det_eq, p)
        expected = math.log2(1 + (5 / 9) / (1 / 9 + 1)) - math.log2(1 + 1 / 9)
        assert r == pytest.approx(expected, abs=1e-12)
        assert r == pytest.approx(0.4330, abs=5e-5)

    def test_clamped_at_zero(self):
        p = make_params(snr_db=None, snr=1.0)
        det_eq = analytic.deterministic_equivalents(1.0, 1.0 / 6.0)
        assert physical.approx_secrecy_rate(1.0, 100.0, 100.0, det_eq, p) == 0.0


class TestLargeSystemConvergence:
    def test_channel_statistics_approach_limits(self):
        # Quick version at moderate size; the acceptance suite runs N = 256.
        n = k = 96
        xi = params.optimal_regularization(1.0, 10.0)
        det_eq = analytic.deterministic_equivalents(1.0, xi)
        rng = np.random.default_rng(13)
        sig, cross, leak = [], [], []
        for _ in range(40):
            h = physical.sample_channel(k, n, rng)
            w = physical.rci_precoder(h, xi).matrix
            proj = h[0] @ w
            sig.append(abs(proj[0]) ** 2)
            cross.append(np.sum(np.abs(proj) ** 2) - abs(proj[0]) ** 2)
            leak.append(np.sum(np.abs(np.delete(h @ w[:, 0], 0)) ** 2))
        assert np.mean(sig) == pytest.approx(det_eq.alpha, rel=0.08)
        assert np.mean(cross) == pytest.approx(det_eq.chi, rel=0.08)
        assert np.mean(leak) == pytest.approx(det_eq.chi, rel=0.08)
