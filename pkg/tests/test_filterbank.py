import math

import numpy as np
import pytest

from jtfs.errors import ConfigurationError, ResolutionError, SizeError
from jtfs.filterbank import (
    PSI_PEAK,
    SIGMA0,
    FilterSpec,
    constant_q_generator,
    build_plan,
    dyadic_scale,
    gauss_fourier,
    littlewood_paley,
    morlet_fourier,
    periodize,
    spin,
)

SMALL = dict(J=5, Q1=2, Q2=1, J_fr=3, Q_fr=1, log2_T=3, log2_F=1, N_input=1024)


@pytest.fixture(scope="module")
def small_plan():
    return build_plan(**SMALL)


def test_generator_geometric_region_j8_q8():
    pairs = list(constant_q_generator(8, 8))
    geo = pairs[:len(pairs) - 7]
    quality = [xi / s for xi, s in geo]
    assert max(quality) - min(quality) <= 1e-10 * quality[0]
    ratios = [b[0] / a[0] for a, b in zip(geo, geo[1:])]
    np.testing.assert_allclose(ratios, 2 ** (-1 / 8), rtol=0, atol=1e-12)


def test_generator_tail_j8_q8():
    pairs = list(constant_q_generator(8, 8))
    tail = pairs[-7:]
    assert all(s == SIGMA0 * 2 ** -8 for _, s in tail)
    steps = np.diff([xi for xi, _ in [pairs[-8]] + tail])
    np.testing.assert_allclose(steps, steps[0])
    assert tail[-1][0] > 0


def test_generator_q1_starts_at_0_35():
    xi, _ = next(constant_q_generator(5, 1))
    assert xi == 0.35
    # Q=1 has no constant-bandwidth tail: every filter keeps the same quality factor
    quality = [xi / s for xi, s in constant_q_generator(5, 1)]
    np.testing.assert_allclose(quality, quality[0], rtol=1e-12)


def test_generator_high_q_start():
    xi, _ = next(constant_q_generator(8, 16))
    assert xi == pytest.approx(1 / (1 + 2 ** (3 / 16)))


def test_dyadic_scale():
    for j in range(8):
        assert dyadic_scale(SIGMA0 / 2 ** j, 10) == j
    assert dyadic_scale(SIGMA0 / 2 ** 12, 10) == 10
    assert dyadic_scale(0.4, 10) == 0


def time_domain_morlet(N, xi, sigma, periods=2):
    # Poisson summation: the DFT of the sampled Gaussian-times-carrier equals
    # the periodized continuous spectrum.
    t = np.arange(N)[:, None] + N * np.arange(-periods, periods + 1)[None, :]
    t = np.where(t > N * (periods + 0.5), t - (2 * periods + 1) * N, t)
    env = np.exp(-2 * np.pi ** 2 * sigma ** 2 * t.astype(float) ** 2)
    env *= sigma * np.sqrt(2 * np.pi)
    carrier = np.exp(2j * np.pi * xi * t)
    band = np.sum(env * carrier, axis=1)
    low = np.sum(env, axis=1)
    Hb, Hl = np.fft.fft(band), np.fft.fft(low)
    psi = Hb - (Hb[0].real / Hl[0].real) * Hl
    return psi.real * (PSI_PEAK / np.abs(psi).max())


@pytest.mark.parametrize("xi,sigma", [(0.3, 0.05), (0.1, 0.01), (0.02, 0.004)])
def test_morlet_matches_time_domain_oracle(xi, sigma):
    N = 4096
    ours = morlet_fourier(N, FilterSpec(xi, sigma, 0))
    ref = time_domain_morlet(N, xi, sigma)
    np.testing.assert_allclose(ours, ref, atol=1e-6 * PSI_PEAK)


def test_morlet_dc_and_peak():
    psi = morlet_fourier(1024, FilterSpec(0.2, 0.03, 1))
    assert psi[0] == 0.0
    assert np.abs(psi).max() == pytest.approx(PSI_PEAK)
    assert np.argmax(psi) == round(0.2 * 1024)


def test_gauss_half_power_width():
    N, sigma = 8192, 0.01
    g = gauss_fourier(N, sigma)
    assert g[0] == 1.0
    first_below = np.argmax(g[: N // 2] < 0.5)
    assert abs(first_below - sigma * math.sqrt(2 * math.log(2)) * N) <= 1


def test_unresolved_filter_raises():
    with pytest.raises(ResolutionError):
        morlet_fourier(8, FilterSpec(0.25, 1e-4, 0))
    with pytest.raises(SizeError):
        gauss_fourier(100, 0.1)


def test_filter_spec_validation():
    with pytest.raises(ConfigurationError):
        FilterSpec(0.6, 0.1, 0)
    with pytest.raises(ConfigurationError):
        FilterSpec(0.1, 0.0, 0)


def test_spin_mirrors():
    specs = spin([FilterSpec(0.25, 0.05, 1), FilterSpec(0.1, 0.02, 2)])
    assert [s.spin for s in specs] == [1, 1, -1, -1]
    assert specs[2].xi == -0.25


def test_periodized_level_is_decimated_filter():
    H = morlet_fourier(512, FilterSpec(0.05, 0.01, 3))
    h = np.fft.ifft(H)
    for k in range(1, 4):
        np.testing.assert_allclose(periodize(H, k), np.fft.fft(2 ** k * h[:: 2 ** k]),
                                   atol=1e-12)


def test_band_pass_dc_vanishes(small_plan):
    big = build_plan(8, 8, 1, 3, 1, 8, 2, 4096)
    for plan in (small_plan, big):
        for psi in plan.psi1 + plan.psi2 + plan.psi_fr:
            level = psi.levels[0]
            assert abs(level[0]) <= 1e-7 * np.abs(level).max()


def test_plan_structure(small_plan):
    p = small_plan
    assert len(p.psi_fr) % 2 == 0
    assert p.N_padded >= p.N_input and p.N_padded & (p.N_padded - 1) == 0
    assert p.N_fr_padded >= len(p.psi1)
    for psi in p.psi2:
        assert len(psi.levels) == min(p.J, p.log2_T) + 1
        assert [len(l) for l in psi.levels] == [p.N_padded >> k for k in range(len(psi.levels))]
    assert len(p.phi_T.levels) == p.log2_T + 1
    assert len(p.phi_F.levels) == p.log2_F + 1
    with pytest.raises(ValueError):
        p.psi1[0].levels[0][0] = 1.0


def test_plan_fingerprint_deterministic(small_plan):
    again = build_plan(**SMALL)
    assert again.fingerprint == small_plan.fingerprint
    other = build_plan(**dict(SMALL, Q1=3))
    assert other.fingerprint != small_plan.fingerprint


@pytest.mark.parametrize("override", [dict(log2_T=6), dict(log2_F=4), dict(N_input=1),
                                      dict(Q1=0), dict(J=0, log2_T=0)])
def test_build_plan_rejects(override):
    with pytest.raises(ConfigurationError):
        build_plan(**dict(SMALL, **override))


@pytest.mark.parametrize("cfg", [SMALL, dict(J=8, Q1=8, Q2=1, J_fr=3, Q_fr=1, log2_T=8,
                                               log2_F=2, N_input=4096)])
def test_littlewood_paley_bounds(cfg):
    A, B_, lp = littlewood_paley(build_plan(**cfg))
    assert A > 0
    assert B_ / A <= 4
    assert lp.shape[0] == build_plan(**cfg).N_padded
