"""Morlet and Gaussian filterbanks sampled in the Fourier domain.

Frequencies are normalized (sample rate 1).  A wavelet is described by its
center frequency ``xi`` and the standard deviation ``sigma`` of its Gaussian
envelope in the Fourier domain.  Filters are stored as real arrays: the
Fourier transform of a Morlet wavelet is real.
"""

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .backend import is_power_of_two, next_power_of_two, subsample_fourier
from .errors import ConfigurationError, ResolutionError, SizeError

SIGMA0 = 0.1
R_PSI = math.sqrt(0.5)
# Peak of |psi_hat|.  With this value a unit-amplitude real sinusoid at the
# center frequency produces a scalogram of modulus 1.
PSI_PEAK = 2.0
# Gaussian envelopes are periodized over this many periods on each side.
_N_PERIODS = 2
# Effective time support of a Gaussian, in standard deviations.
_SUPPORT_STDS = 3.0


def constant_q_generator(J, Q):
    """Yield ``(xi, sigma)`` pairs: constant-Q down to the elbow, then a
    constant-bandwidth tail of ``Q - 1`` filters."""
    xi = max(1.0 / (1.0 + math.pow(2.0, 3.0 / Q)), 0.35)
    factor = 1.0 / math.pow(2, 1.0 / Q)
    sigma = (1 - factor) / (1 + factor) * xi / math.sqrt(2 * math.log(1.0 / R_PSI))
    sigma_min = SIGMA0 / 2 ** J

    if sigma <= sigma_min:
        xi = sigma
    else:
        yield xi, sigma
        while sigma > sigma_min * math.pow(2, 1 / Q):
            xi /= math.pow(2, 1 / Q)
            sigma /= math.pow(2, 1 / Q)
            yield xi, sigma

    elbow_xi = xi
    for _ in range(Q - 1):
        xi -= 1 / Q * elbow_xi
        yield xi, sigma_min


def dyadic_scale(sigma, J):
    """Largest ``j <= J`` such that ``sigma * 2**j <= SIGMA0`` (up to rounding)."""
    j = math.floor(math.log2(SIGMA0 / sigma) + 1e-9)
    return int(min(max(j, 0), J))


@dataclass(frozen=True)
class FilterSpec:
    xi: float
    sigma: float
    j: int

    @property
    def spin(self):
        return int(np.sign(self.xi))

    def __post_init__(self):
        if not -0.5 < self.xi < 0.5:
            raise ConfigurationError(f"center frequency {self.xi} outside (-0.5, 0.5)")
        if self.sigma <= 0:
            raise ConfigurationError(f"bandwidth must be positive, got {self.sigma}")


def _periodized_gaussian(N, center, sigma):
    omega = np.arange(N) / N
    out = np.zeros(N)
    for p in range(-_N_PERIODS, _N_PERIODS + 1):
        out += np.exp(-((omega - center + p) ** 2) / (2 * sigma ** 2))
    return out


def _check_resolved(H, N, sigma):
    mag = np.abs(H)
    peak = mag.max()
    if peak == 0 or np.count_nonzero(mag >= 0.5 * peak) < 2:
        raise ResolutionError(
            f"filter with sigma={sigma:.3g} is not resolved on a grid of {N} bins"
        )


def gauss_fourier(N, sigma):
    """Periodized Gaussian low-pass centered at DC, equal to 1 at DC."""
    if not is_power_of_two(N):
        raise SizeError(f"grid size must be a power of two, got {N}")
    g = _periodized_gaussian(N, 0.0, sigma)
    g /= g[0]
    _check_resolved(g, N, sigma)
    return g


def morlet_fourier(N, spec):
    """Morlet wavelet sampled on the ``N``-point frequency grid.

    The corrective Gaussian at DC is scaled so that the DC bin is exactly
    zero, and the result is scaled so that ``max|psi_hat| == PSI_PEAK``.
    """
    if not is_power_of_two(N):
        raise SizeError(f"grid size must be a power of two, got {N}")
    band = _periodized_gaussian(N, spec.xi, spec.sigma)
    low = _periodized_gaussian(N, 0.0, spec.sigma)
    kappa = band[0] / low[0]
    psi = band - kappa * low
    psi[0] = 0.0
    _check_resolved(psi, N, spec.sigma)
    return psi * (PSI_PEAK / np.abs(psi).max())


def periodize(H, log2_factor):
    """Transfer function of a filter at a coarser rate (``2**log2_factor``).

    This is the DFT of ``2**k * h[::2**k]``: aliased copies are summed, so a
    band-limited filter keeps its gain after subsampling.
    """
    k = 1 << log2_factor
    return k * subsample_fourier(H, k)


def spin(specs):
    """Append to ``specs`` their mirror images at negative frequencies."""
    specs = list(specs)
    for s in specs:
        if s.xi <= 0:
            raise ConfigurationError("spinning expects positive center frequencies")
    return specs + [FilterSpec(-s.xi, s.sigma, s.j) for s in specs]


def time_support(sigma):
    """Effective half-width, in samples, of a filter of bandwidth ``sigma``."""
    return int(math.ceil(_SUPPORT_STDS / (2 * math.pi * sigma)))


@dataclass(frozen=True, eq=False)
class SampledFilter:
    spec: FilterSpec
    levels: tuple

    @property
    def xi(self):
        return self.spec.xi

    @property
    def sigma(self):
        return self.spec.sigma

    @property
    def j(self):
        return self.spec.j


def _sample(spec, N, max_level, lowpass=False):
    H = gauss_fourier(N, spec.sigma) if lowpass else morlet_fourier(N, spec)
    levels = [H]
    for k in range(1, max_level + 1):
        levels.append(periodize(H, k))
    for arr in levels:
        arr.setflags(write=False)
    return SampledFilter(spec, tuple(levels))


def _bank_specs(J, Q):
    return [FilterSpec(xi, sigma, dyadic_scale(sigma, J))
            for xi, sigma in constant_q_generator(J, Q)]


@dataclass(frozen=True, eq=False)
class FilterbankPlan:
    """Compiled filters for one input length and one set of hyperparameters."""

    psi1: tuple
    psi2: tuple
    psi_fr: tuple
    phi_T: SampledFilter
    phi_F: SampledFilter
    J: int
    Q1: int
    Q2: int
    J_fr: int
    Q_fr: int
    log2_T: int
    log2_F: int
    N_input: int
    N_padded: int
    N_fr_padded: int
    fingerprint: str = field(default="")

    @property
    def hyperparameters(self):
        return {
            "J": self.J, "Q1": self.Q1, "Q2": self.Q2, "J_fr": self.J_fr,
            "Q_fr": self.Q_fr, "log2_T": self.log2_T, "log2_F": self.log2_F,
            "N_input": self.N_input, "N_padded": self.N_padded,
            "N_fr_padded": self.N_fr_padded,
        }


def validate_hyperparameters(J, Q1, Q2, J_fr, Q_fr, log2_T, log2_F, N_input):
    checks = [
        (J >= 1, "J >= 1"),
        (Q1 >= 1, "Q1 >= 1"),
        (Q2 >= 1, "Q2 >= 1"),
        (J_fr >= 1, "J_fr >= 1"),
        (Q_fr >= 1, "Q_fr >= 1"),
        (log2_T >= 0, "log2_T >= 0"),
        (log2_F >= 0, "log2_F >= 0"),
        (log2_T <= J, "log2_T <= J"),
        (log2_F <= J_fr, "log2_F <= J_fr"),
        (N_input >= 2, "N_input >= 2"),
    ]
    for ok, constraint in checks:
        if not ok:
            raise ConfigurationError(f"constraint violated: {constraint}")


def build_plan(J, Q1, Q2, J_fr, Q_fr, log2_T, log2_F, N_input):
    """Sample every filter needed to scatter signals of length ``N_input``."""
    validate_hyperparameters(J, Q1, Q2, J_fr, Q_fr, log2_T, log2_F, N_input)

    specs1 = _bank_specs(J, Q1)
    specs2 = _bank_specs(J, Q2)
    specs_fr = spin(_bank_specs(J_fr, Q_fr))
    if not specs1 or not specs2 or not specs_fr:
        raise ConfigurationError("hyperparameters produce an empty filterbank")
    phi_T_spec = FilterSpec(0.0, SIGMA0 / 2 ** log2_T, log2_T)
    phi_F_spec = FilterSpec(0.0, SIGMA0 / 2 ** log2_F, log2_F)

    sigma_t = min(s.sigma for s in specs1 + specs2 + [phi_T_spec])
    N_padded = next_power_of_two(N_input + 2 * time_support(sigma_t))
    N_padded = max(N_padded, 1 << log2_T)
    sigma_f = min(s.sigma for s in specs_fr + [phi_F_spec])
    N_fr_padded = next_power_of_two(len(specs1) + time_support(sigma_f))
    N_fr_padded = max(N_fr_padded, 1 << log2_F)

    level2 = min(J, log2_T)
    plan = FilterbankPlan(
        psi1=tuple(_sample(s, N_padded, 0) for s in specs1),
        psi2=tuple(_sample(s, N_padded, level2) for s in specs2),
        psi_fr=tuple(_sample(s, N_fr_padded, 0) for s in specs_fr),
        phi_T=_sample(phi_T_spec, N_padded, log2_T, lowpass=True),
        phi_F=_sample(phi_F_spec, N_fr_padded, log2_F, lowpass=True),
        J=J, Q1=Q1, Q2=Q2, J_fr=J_fr, Q_fr=Q_fr,
        log2_T=log2_T, log2_F=log2_F,
        N_input=int(N_input), N_padded=N_padded, N_fr_padded=N_fr_padded,
    )
    digest = hashlib.sha256(
        json.dumps(plan.hyperparameters, sort_keys=True).encode()
    ).hexdigest()[:16]
    object.__setattr__(plan, "fingerprint", digest)
    return plan


def littlewood_paley(plan, band=None):
    """Frame-bound diagnostic for the first-layer filterbank.

    Returns ``(A, B, lp)`` where ``lp`` is ``sum |psi1|^2 + |phi_T|^2`` on the
    level-0 grid and ``A``, ``B`` are its minimum and maximum over the
    positive-frequency ``band``.  The default band runs from twice the
    narrowest bandwidth up to the highest center frequency, i.e. the range
    the filterbank actually covers.
    """
    N = plan.N_padded
    lp = plan.phi_T.levels[0] ** 2
    for psi in plan.psi1:
        lp = lp + psi.levels[0] ** 2
    if band is None:
        band = (2 * SIGMA0 / 2 ** plan.J, plan.psi1[0].xi)
    omega = np.arange(N) / N
    mask = (omega >= band[0]) & (omega <= band[1])
    return float(lp[mask].min()), float(lp.max()), lp
