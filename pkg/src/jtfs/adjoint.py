"""Euclidean scattering loss and its gradient with respect to the waveform.

The loss is ``E(y) = 1/2 * sum ||S x - S y||^2`` over the first- and
second-order paths.  Backpropagation starts from the residual ``S x - S y``,
which equals ``-dE/dSy``; pushing it through the adjoint of every forward
stage therefore yields ``-dE/dy``, the *descent direction*.  All ``grad_*``
functions below follow that sign convention, so an update ``y + mu * d``
decreases the loss for small ``mu``.
"""

from dataclasses import dataclass

import numpy as np

from . import backend as B
from .errors import IncompatibleError, StateError
from .scattering import (
    LOWPASS,
    average_adjoint,
    jtfs_forward,
    unpad_block_adjoint,
)

LOSS_ORDERS = (1, 2)


@dataclass
class LossReport:
    total: float
    per_order: dict
    per_path: dict


def check_compatible(Sx, Sy):
    keys_x, keys_y = list(Sx.keys()), list(Sy.keys())
    for kx, ky in zip(keys_x, keys_y):
        if kx != ky:
            raise IncompatibleError(f"path mismatch: {kx} vs {ky}")
        if Sx[kx].shape != Sy[ky].shape:
            raise IncompatibleError(
                f"shape mismatch on path {kx}: {Sx[kx].shape} vs {Sy[ky].shape}")
    if len(keys_x) != len(keys_y):
        longer = keys_x if len(keys_x) > len(keys_y) else keys_y
        raise IncompatibleError(f"path {longer[min(len(keys_x), len(keys_y))]} "
                                "missing from one coefficient set")


def scattering_loss(Sx, Sy):
    """Half squared Euclidean distance over orders 1 and 2."""
    check_compatible(Sx, Sy)
    per_path = {}
    per_order = {o: 0.0 for o in LOSS_ORDERS}
    for key in Sx.keys():
        if key.order not in LOSS_ORDERS:
            continue
        d = Sx[key] - Sy[key]
        e = 0.5 * float(np.sum(d * d))
        per_path[key] = e
        per_order[key.order] += e
    return LossReport(sum(per_order.values()), per_order, per_path)


def grad_U2(Sx, Sy, plan):
    """Residuals pulled back through averaging, up to every modulus output.

    Covers each path whose last nonlinearity is a modulus after frequential
    scattering: all second-order paths and the band-pass first-order paths.
    The low-pass first-order path has no such modulus and is handled by
    :func:`grad_U1`.
    """
    check_compatible(Sx, Sy)
    out = {}
    for key in Sx.keys():
        if key.order == 0 or (key.order == 1 and key.n_fr == LOWPASS):
            continue
        if key.order == 2:
            log2_stride = min(key.j[1], plan.log2_T)
        else:
            log2_stride = plan.log2_T
        log2_stride_fr = min(key.j[2], plan.log2_F)
        G = unpad_block_adjoint(Sx[key] - Sy[key], plan)
        out[key] = average_adjoint(G, plan, log2_stride, log2_stride_fr)
    return out


def _frequency_adjoint(G, fb, plan):
    """Adjoint of frequential scattering for one block, back to its rows."""
    psi = plan.psi_fr[fb.n_fr]
    G_T = B.swap_time_frequency(G)
    H = B.convolve_subsample_adjoint(G_T, psi.levels[0], 1 << fb.log2_stride_fr)
    H = B.pad_frequency_adjoint(H, fb.source.n1_max, axis=-1)
    return B.swap_time_frequency(H)


def grad_U1(trace, grad_u2, Sx, Sy, plan):
    """Gradient with respect to each first-order modulus row.

    Returns a list of real arrays, row ``n1`` at the stride of the scalogram.
    """
    if trace is None or trace.scalogram is None:
        raise StateError("grad_U1 needs the intermediates of a traced forward pass")
    check_compatible(Sx, Sy)
    sc = trace.scalogram
    n1_total = len(sc.j)

    # order 1: cotangent on the S1 block
    g_S1 = np.zeros_like(trace.S1.coef)
    low_key = next(k for k in Sx.keys() if k.order == 1 and k.n_fr == LOWPASS)
    G = unpad_block_adjoint(Sx[low_key] - Sy[low_key], plan)
    G = average_adjoint(G, plan, plan.log2_T, 0, average_time=False)
    g_S1 += G[:n1_total]

    # cotangents on each Y2 block, summed over frequential wavelets
    g_Y2 = {}
    for key, gM in grad_u2.items():
        fb = (trace.order1 if key.order == 1 else trace.order2).get(key)
        if fb is None:
            raise StateError(f"no retained intermediates for path {key}")
        gX = _frequency_adjoint(B.modulus_adjoint(fb.coef, gM), fb, plan)
        if key.order == 1:
            g_S1 += gX.real
        elif key.n2 in g_Y2:
            g_Y2[key.n2] += gX
        else:
            g_Y2[key.n2] = gX

    grads = []
    for k1, sl, _, U, _ in sc.groups:
        spectra = B.convolve_subsample_adjoint(
            g_S1[sl], plan.phi_T.levels[k1], 1 << (plan.log2_T - k1), spectral=True)
        for n2, gY in g_Y2.items():
            Y2 = trace.Y2[n2]
            rows = gY[sl.start:min(sl.stop, Y2.n1_max)]
            if rows.shape[0] == 0:
                continue
            spectra[:rows.shape[0]] += B.convolve_subsample_adjoint(
                rows, plan.psi2[n2].levels[k1], 1 << (Y2.log2_stride - k1),
                spectral=True)
        grads.extend(B.ifft(spectra).real)
    return grads


def grad_waveform(trace, grad_u1, plan):
    """Descent direction on the (unpadded) waveform."""
    if trace is None or trace.scalogram is None:
        raise StateError("grad_waveform needs the intermediates of a traced forward pass")
    sc = trace.scalogram
    total = np.zeros(plan.N_padded, dtype=np.complex128)
    for k1, sl, Z, _, _ in sc.groups:
        gz = B.modulus_adjoint(Z, np.stack(grad_u1[sl]))
        H = np.stack([psi.levels[0] for psi in plan.psi1[sl]])
        Y = np.tile(np.fft.fft(gz, axis=-1), (1, 1 << k1))
        total += np.sum(Y * H, axis=0)
    g_pad = B.ifft(total).real
    return B.pad_time_adjoint(g_pad, plan.N_input)


def direction_from_trace(Sx, Sy, trace, plan):
    """Descent direction given a traced forward pass of the current estimate."""
    gu2 = grad_U2(Sx, Sy, plan)
    gu1 = grad_U1(trace, gu2, Sx, Sy, plan)
    return grad_waveform(trace, gu1, plan)


def loss_and_direction(y, Sx, plan):
    """Loss at ``y`` and the descent direction ``-dE/dy``."""
    Sy, trace = jtfs_forward(y, plan, return_trace=True)
    report = scattering_loss(Sx, Sy)
    if report.total == 0.0:
        return report, np.zeros(plan.N_input)
    return report, direction_from_trace(Sx, Sy, trace, plan)


@dataclass
class GradcheckReport:
    errors: np.ndarray
    tolerance: float
    min_pass_fraction: float

    @property
    def max_error(self):
        return float(self.errors.max())

    @property
    def median_error(self):
        return float(np.median(self.errors))

    @property
    def pass_fraction(self):
        return float(np.mean(self.errors <= self.tolerance))

    @property
    def passed(self):
        return self.pass_fraction >= self.min_pass_fraction


def _relative_error(a, b):
    denom = max(abs(a), abs(b))
    return 0.0 if denom == 0 else abs(a - b) / denom


def gradcheck(plan, seed=0, n_directions=100, steps=(1e-5, 1e-4, 1e-6),
              tolerance=1e-4, min_pass_fraction=0.99):
    """Compare the analytic directional derivative with central differences.

    A random reference ``x`` and estimate ``y`` are drawn from ``seed``.  For
    each unit direction ``v`` the central difference uses the step
    ``h * ||y||``; steps are tried in the given order and the first one that
    meets ``tolerance`` is kept (otherwise the smallest error is reported).
    """
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(plan.N_input)
    y = rng.standard_normal(plan.N_input)
    Sx = jtfs_forward(x, plan)
    report, d = loss_and_direction(y, Sx, plan)
    scale = float(np.linalg.norm(y))

    def loss(z):
        return scattering_loss(Sx, jtfs_forward(z, plan)).total

    errors = np.empty(n_directions)
    for i in range(n_directions):
        v = rng.standard_normal(plan.N_input)
        v /= np.linalg.norm(v)
        # d is -dE/dy
        analytic = -float(np.dot(d, v))
        best = np.inf
        for h in steps:
            eps = h * scale
            fd = (loss(y + eps * v) - loss(y - eps * v)) / (2 * eps)
            best = min(best, _relative_error(analytic, fd))
            if best <= tolerance:
                break
        errors[i] = best
    return GradcheckReport(errors, tolerance, min_pass_fraction)
