"""Metamer synthesis by gradient descent in the waveform domain.

Starting from Gaussian noise colored to match the first-order profile of the
reference, the estimate is refined with heavy-ball updates::

    u <- m * u + mu * d
    y <- y + u

where ``d`` is the descent direction of :mod:`jtfs.adjoint` multiplied by
:func:`grid_weight`, so that learning rates do not depend on how coarsely
the coefficients are sampled.  The learning rate follows the
"bold driver" rule: it grows after every accepted step and is halved (with
the step undone and the velocity cleared) whenever the loss goes up.
"""

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import least_squares

from . import backend as B
from .adjoint import direction_from_trace, scattering_loss
from .errors import ConfigurationError, NumericError
from .scattering import LOWPASS, first_order_profile, jtfs_forward

log = logging.getLogger(__name__)

FALLBACK_RMS = 1e-4


@dataclass(frozen=True)
class ReconstructionConfig:
    iterations: int = 100
    mu0: float = 0.1
    momentum: float = 0.9
    bold_grow: float = 1.1
    bold_shrink: float = 0.5
    max_retries: int = 8
    seed: int = 0
    loss_tolerance: float = 1e-3

    def __post_init__(self):
        if self.iterations < 1:
            raise ConfigurationError("iterations must be positive")
        if not 0 <= self.momentum < 1:
            raise ConfigurationError("momentum must lie in [0, 1)")
        if self.mu0 <= 0:
            raise ConfigurationError("learning rate must be positive")
        if not self.bold_shrink < 1 < self.bold_grow:
            raise ConfigurationError("need bold_shrink < 1 < bold_grow")
        if self.max_retries < 0:
            raise ConfigurationError("max_retries must be nonnegative")


@dataclass(frozen=True)
class ReconstructionState:
    y: np.ndarray
    u: np.ndarray
    mu: float
    loss: float
    loss_history: tuple = ()
    mu_history: tuple = ()
    iteration: int = 0
    accepted: bool = True


def grid_weight(plan):
    """Number of (time, log-frequency) grid points each output coefficient stands for."""
    return float(1 << (plan.log2_T + plan.log2_F))


def _lowpass_rows(Sx):
    key = next(k for k in Sx.keys() if k.order == 1 and k.n_fr == LOWPASS)
    return Sx[key].mean(axis=1)


def _band_cells(plan):
    """Assign each nonnegative frequency bin to the psi1 filter that dominates it.

    Returns the one-hot cell matrix (filters x bins) and the squared filter
    responses on the full grid.
    """
    power = np.stack([psi.levels[0] ** 2 for psi in plan.psi1])
    half = plan.N_padded // 2 + 1
    owner = np.argmax(power[:, :half], axis=0)
    cells = np.zeros((len(plan.psi1), half))
    cells[owner, np.arange(half)] = 1.0
    return cells, power


def _mirror(half_spectrum, N):
    return np.concatenate([half_spectrum, half_spectrum[..., 1:N - N // 2][..., ::-1]],
                          axis=-1)


def _frequency_average_matrix(plan, n1):
    """Linear map from per-row time averages to the low-pass path rows."""
    eye = np.zeros((plan.N_fr_padded, n1))
    eye[np.arange(n1), np.arange(n1)] = 1.0
    out = B.convolve_subsample(np.fft.fft(eye, axis=0), plan.phi_F.levels[0],
                               1 << plan.log2_F, axis=0).real
    return out[:-(-n1 // (1 << plan.log2_F))]


def _shape(white_hat, gains, cells, plan):
    amp = _mirror(gains @ cells, plan.N_padded)
    y = B.ifft(white_hat * amp).real
    return B.unpad_time(y, B.pad_bounds(plan.N_input, plan.N_padded))


def _fit_gains(target, cells, power, plan):
    """Per-cell amplitudes whose expected profile matches ``target``.

    For Gaussian noise the wavelet responses are circular complex Gaussian,
    so ``E|z| = sqrt(pi/4 * E|z|^2)``, and ``E|z|^2`` is linear in the cell
    powers.  Residuals are relative for strong rows and absolute (at 1% of
    the peak) for weak ones.
    """
    N = plan.N_padded
    K = power @ _mirror(cells, N).T / N
    Phi = _frequency_average_matrix(plan, cells.shape[0])
    soft = 1e-2 * target.max()

    def residual(log_power):
        model = Phi @ np.sqrt(np.pi / 4 * (K @ np.exp(log_power)))
        return (model - target) / (target + soft)

    start = np.full(cells.shape[0], 2 * np.log(target.max()))
    sol = least_squares(residual, start)
    return np.exp(sol.x / 2)


def init_colored_noise(Sx, plan, seed, refinements=4):
    """Gaussian noise whose first-order profile matches that of ``Sx``.

    White noise is filtered by a piecewise-constant gain curve with one cell
    per psi1 filter.  The gains are first fitted to the expected profile of
    shaped noise, then refined multiplicatively on the actual noise draw.
    An all-zero reference yields white noise of RMS ``FALLBACK_RMS``.
    """
    rng = np.random.default_rng(seed)
    target = _lowpass_rows(Sx)
    if not np.any(target > 0):
        w = rng.standard_normal(plan.N_input)
        return w * (FALLBACK_RMS / np.sqrt(np.mean(w ** 2)))

    white_hat = B.rfft(rng.standard_normal(plan.N_padded))
    cells, power = _band_cells(plan)
    gains = _fit_gains(target, cells, power, plan)
    n1 = cells.shape[0]
    row_pos = np.arange(target.size) * (1 << plan.log2_F)
    floor = 1e-6 * target.max()
    for _ in range(refinements):
        current = first_order_profile(_shape(white_hat, gains, cells, plan), plan)
        ratio = np.clip((target + floor) / (current + floor), 1e-3, 1e3)
        gains *= np.interp(np.arange(n1), row_pos, ratio)
    return _shape(white_hat, gains, cells, plan)


def step(state, direction, objective, config):
    """One heavy-ball update with the bold-driver learning-rate rule.

    ``objective`` maps a waveform to its loss.  On a loss increase the step
    is undone, the velocity cleared and the rate halved, up to
    ``config.max_retries`` times; if every retry fails the state keeps its
    waveform and is returned with ``accepted=False``.
    """
    direction = np.asarray(direction, dtype=np.float64)
    if not np.all(np.isfinite(direction)):
        raise NumericError(f"non-finite descent direction at iteration "
                           f"{state.iteration} (mu={state.mu:g})")
    u_prev, mu = state.u, state.mu
    for attempt in range(config.max_retries + 1):
        u = config.momentum * u_prev + mu * direction
        y = state.y + u
        loss = objective(y) if np.all(np.isfinite(y)) else np.inf
        if loss <= state.loss:
            mu_next = mu * config.bold_grow
            return replace(
                state, y=y, u=u, mu=mu_next, loss=loss,
                loss_history=state.loss_history + (loss,),
                mu_history=state.mu_history + (mu_next,),
                iteration=state.iteration + 1, accepted=True,
            )
        log.debug("iteration %d attempt %d: loss %.6g > %.6g, shrinking mu",
                  state.iteration, attempt, loss, state.loss)
        u_prev = np.zeros_like(state.u)
        mu *= config.bold_shrink
    return replace(state, u=np.zeros_like(state.u), mu=mu, accepted=False)


class ScatteringObjective:
    """Loss against a fixed reference.

    The traced forward pass of the last evaluated waveform is kept, so that
    the gradient at an accepted point costs only a backward pass.
    """

    def __init__(self, Sx, plan):
        self.Sx = Sx
        self.plan = plan
        self._cache = None

    def _evaluate(self, y):
        if self._cache is not None and np.array_equal(self._cache[0], y):
            return self._cache[1:]
        Sy, trace = jtfs_forward(y, self.plan, return_trace=True)
        loss = scattering_loss(self.Sx, Sy).total
        self._cache = (np.array(y), loss, Sy, trace)
        return loss, Sy, trace

    def __call__(self, y):
        return self._evaluate(y)[0]

    def loss_and_direction(self, y):
        loss, Sy, trace = self._evaluate(y)
        if loss == 0.0:
            return loss, np.zeros(self.plan.N_input)
        return loss, direction_from_trace(self.Sx, Sy, trace, self.plan)


@dataclass
class ReconstructionResult:
    y: np.ndarray
    losses: list
    mus: list
    initial_loss: float
    state: ReconstructionState = field(repr=False, default=None)

    @property
    def final_loss(self):
        return self.losses[-1]


def reconstruct(x, plan, config=ReconstructionConfig(), y0=None, Sx=None):
    """Synthesize a waveform whose scattering coefficients match those of ``x``.

    Returns a :class:`ReconstructionResult` whose ``losses`` start with the
    loss of the initial guess and contain one entry per accepted iteration.
    """
    if Sx is None:
        Sx = jtfs_forward(x, plan)
    if y0 is None:
        y0 = init_colored_noise(Sx, plan, config.seed)
    objective = ScatteringObjective(Sx, plan)
    weight = grid_weight(plan)
    loss0, direction = objective.loss_and_direction(np.asarray(y0, dtype=np.float64))
    direction = weight * direction
    state = ReconstructionState(y=np.array(y0, dtype=np.float64),
                                u=np.zeros(plan.N_input), mu=config.mu0,
                                loss=loss0)
    log.info("initial loss %.6g", loss0)
    while loss0 > 0 and state.iteration < config.iterations:
        new = step(state, direction, objective, config)
        if not new.accepted:
            log.info("no decrease after %d retries at iteration %d; stopping",
                     config.max_retries, state.iteration)
            state = new
            break
        state = new
        log.info("iteration %d: loss %.6g mu %.3g", state.iteration, state.loss,
                 state.mu)
        if state.loss <= config.loss_tolerance * loss0:
            break
        if state.iteration < config.iterations:
            _, direction = objective.loss_and_direction(state.y)
            direction = weight * direction
    return ReconstructionResult(
        y=state.y,
        losses=[loss0, *state.loss_history],
        mus=[config.mu0, *state.mu_history],
        initial_loss=loss0,
        state=state,
    )
