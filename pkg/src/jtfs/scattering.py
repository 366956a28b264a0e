"""Joint time-frequency scattering, forward direction.

The pipeline follows a width-first traversal: the first layer produces the
whole scalogram, then for every second-layer temporal wavelet all admissible
first-order rows are filtered together so that frequential scattering can
operate along the complete log-frequency axis.

Arrays are indexed ``(log-frequency row, time frame)``.  Row ``n1`` follows
the order of ``plan.psi1`` (decreasing center frequency).
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import backend as B
from .errors import ConsistencyError, NumericError, SizeError

# n_fr placeholder for the path that is only averaged along log-frequency.
LOWPASS = -1


@dataclass(frozen=True)
class PathKey:
    order: int
    n2: Optional[int]
    n_fr: Optional[int]
    spin: int
    j: tuple

    def as_dict(self):
        return {"order": self.order, "n2": self.n2, "n_fr": self.n_fr,
                "spin": self.spin, "j": list(self.j)}


@dataclass
class CoefficientSet:
    """Ordered mapping from :class:`PathKey` to real 2-D coefficient arrays."""

    entries: dict
    meta: dict = field(default_factory=dict)
    fingerprint: str = ""

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, key):
        return self.entries[key]

    def keys(self):
        return self.entries.keys()

    def items(self):
        return self.entries.items()

    def of_order(self, order):
        return {k: v for k, v in self.entries.items() if k.order == order}

    @property
    def size(self):
        return sum(v.size for v in self.entries.values())

    def ravel(self, orders=(0, 1, 2)):
        parts = [v.ravel() for k, v in self.entries.items() if k.order in orders]
        return np.concatenate(parts) if parts else np.zeros(0)

    def norm(self, orders=(0, 1, 2)):
        return float(np.linalg.norm(self.ravel(orders)))


@dataclass
class Scalogram:
    """First layer: complex wavelet responses and their moduli.

    Row ``n1`` lives at time stride ``2**log2_stride[n1]``.  Rows sharing a
    stride are contiguous and are also stored stacked, one entry of
    ``groups`` per stride: ``(log2_stride, slice of n1, Z, U, U_hat)`` where
    ``U_hat`` holds the spectra of the moduli, which the second layer filters.
    """

    j: list
    log2_stride: list
    groups: list

    @property
    def Z(self):
        return [z for g in self.groups for z in g[2]]

    @property
    def U(self):
        return [u for g in self.groups for u in g[3]]

    def time_average(self):
        return np.array([u.mean() for u in self.U])


@dataclass
class Block:
    """Stack of rows sharing one time stride (S1, or Y2 for a given n2)."""

    coef: np.ndarray
    n1_max: int
    log2_stride: int
    n2: Optional[int] = None
    j2: Optional[int] = None


@dataclass
class FrequencyBlock:
    """Output of one frequential wavelet applied to a :class:`Block`."""

    coef: np.ndarray
    source: Block
    n_fr: int
    j_fr: int
    log2_stride_fr: int
    spin: int


@dataclass
class ModulusBlock:
    """A nonnegative block waiting for final averaging and unpadding."""

    key: PathKey
    coef: np.ndarray
    log2_stride: int
    log2_stride_fr: int
    n1_max: int
    average_time: bool = True


def _check_length(x, plan):
    if x.ndim != 1 or x.shape[0] != plan.N_padded:
        raise SizeError(f"expected a padded signal of length {plan.N_padded}, "
                        f"got shape {x.shape}")


def _stride_groups(strides):
    groups, start = [], 0
    for n1 in range(1, len(strides) + 1):
        if n1 == len(strides) or strides[n1] != strides[start]:
            groups.append((strides[start], slice(start, n1)))
            start = n1
    return groups


def compute_scalogram(x, plan, X_hat=None):
    """Modulus of the first-layer wavelet transform of a padded signal."""
    x = np.asarray(x, dtype=np.float64)
    _check_length(x, plan)
    if X_hat is None:
        X_hat = B.rfft(x)
    js = [psi.j for psi in plan.psi1]
    ks = [min(j, plan.log2_T) for j in js]
    groups = []
    for k1, sl in _stride_groups(ks):
        H = np.stack([psi.levels[0] for psi in plan.psi1[sl]])
        Z = B.ifft(B.subsample_fourier(X_hat[None, :] * H, 1 << k1))
        U = B.modulus(Z)
        groups.append((k1, sl, Z, U, B.rfft(U)))
    return Scalogram(js, ks, groups)


def lowpass_time(u_hat, plan, log2_stride):
    """Average a row given at stride ``2**log2_stride`` down to ``2**log2_T``."""
    k = plan.log2_T - log2_stride
    return B.convolve_subsample(u_hat, plan.phi_T.levels[log2_stride], 1 << k).real


def time_scattering_widthfirst(x, plan, scalogram=None):
    """Yield S0, then the S1 block, then one complex Y2 block per n2.

    ``x`` must already be padded to ``plan.N_padded``.  Second-layer blocks
    only contain first-order rows with ``j2 > j1``; blocks without any such
    row are skipped.
    """
    x = np.asarray(x, dtype=np.float64)
    _check_length(x, plan)
    X_hat = B.rfft(x)
    yield B.convolve_subsample(X_hat, plan.phi_T.levels[0], 1 << plan.log2_T).real

    sc = scalogram if scalogram is not None else compute_scalogram(x, plan, X_hat)
    S1 = np.concatenate([
        B.convolve_subsample(U_hat, plan.phi_T.levels[k1],
                             1 << (plan.log2_T - k1)).real
        for k1, _, _, _, U_hat in sc.groups
    ])
    yield Block(S1, n1_max=S1.shape[0], log2_stride=plan.log2_T)

    for n2, psi2 in enumerate(plan.psi2):
        j2 = psi2.j
        s2 = min(j2, plan.log2_T)
        parts = []
        for k1, sl, _, _, U_hat in sc.groups:
            admissible = [i for i, j1 in enumerate(sc.j[sl]) if j2 > j1]
            if not admissible:
                break
            if len(admissible) != admissible[-1] + 1:
                raise ConsistencyError("admissible first-order rows are not a prefix")
            parts.append(B.convolve_subsample(U_hat[:len(admissible)],
                                              psi2.levels[k1], 1 << (s2 - k1)))
            if len(admissible) < sl.stop - sl.start:
                break
        if parts:
            Y2 = np.concatenate(parts)
            yield Block(Y2, n1_max=Y2.shape[0], log2_stride=s2, n2=n2, j2=j2)


def frequency_scattering(X, plan, spinned):
    """Convolve a block along log-frequency with the frequential wavelets.

    Without spinning the input is real and only nonnegative center
    frequencies are applied.
    """
    if X.n1_max > plan.N_fr_padded:
        raise SizeError(f"{X.n1_max} rows exceed frequential padding "
                        f"{plan.N_fr_padded}")
    X_T = B.swap_time_frequency(X.coef)
    X_pad = B.pad_frequency(X_T, plan.N_fr_padded - X.n1_max, axis=-1)
    if spinned:
        X_hat = B.cfft(X_pad)
    else:
        X_hat = B.rfft(X_pad)

    for n_fr, psi in enumerate(plan.psi_fr):
        if not spinned and psi.xi < 0:
            continue
        k_fr = min(psi.j, plan.log2_F)
        Y = B.convolve_subsample(X_hat, psi.levels[0], 1 << k_fr)
        yield FrequencyBlock(B.swap_time_frequency(Y), X, n_fr, psi.j, k_fr,
                             int(np.sign(psi.xi)))


def average(M, plan, log2_stride, log2_stride_fr, average_time=True):
    """Gaussian averaging along time (phi_T) and log-frequency (phi_F).

    Strides are completed to ``2**log2_T`` frames and ``2**log2_F`` rows.
    """
    if log2_stride > plan.log2_T or log2_stride_fr > plan.log2_F:
        raise ConsistencyError(
            f"strides ({log2_stride}, {log2_stride_fr}) exceed averaging scales "
            f"({plan.log2_T}, {plan.log2_F})")
    if M.shape != (plan.N_fr_padded >> log2_stride_fr, plan.N_padded >> log2_stride):
        raise ConsistencyError(f"block of shape {M.shape} does not match strides "
                               f"({log2_stride}, {log2_stride_fr})")
    if average_time:
        M = B.convolve_subsample(B.rfft(M, axis=-1), plan.phi_T.levels[log2_stride],
                                 1 << (plan.log2_T - log2_stride), axis=-1).real
    elif log2_stride != plan.log2_T:
        raise ConsistencyError("time stride incomplete and time averaging disabled")
    return B.convolve_subsample(B.rfft(M, axis=0), plan.phi_F.levels[log2_stride_fr],
                                1 << (plan.log2_F - log2_stride_fr), axis=0).real


def average_adjoint(G, plan, log2_stride, log2_stride_fr, average_time=True):
    G = B.convolve_subsample_adjoint(G, plan.phi_F.levels[log2_stride_fr],
                                     1 << (plan.log2_F - log2_stride_fr), axis=0).real
    if average_time:
        G = B.convolve_subsample_adjoint(G, plan.phi_T.levels[log2_stride],
                                         1 << (plan.log2_T - log2_stride), axis=-1).real
    return G


def output_bounds(plan):
    return B.pad_bounds(plan.N_input, plan.N_padded)


def n_output_rows(plan, n1_max):
    return -(-n1_max // (1 << plan.log2_F))


def unpad_block(A, plan, n1_max):
    A = B.unpad_time(A, output_bounds(plan), plan.log2_T)
    return A[:n_output_rows(plan, n1_max)]


def unpad_block_adjoint(G, plan):
    rows = plan.N_fr_padded >> plan.log2_F
    out = np.zeros((rows, G.shape[1]))
    out[:G.shape[0]] = G
    return B.unpad_time_adjoint(out, output_bounds(plan),
                                plan.N_padded >> plan.log2_T, plan.log2_T)


def _entry_meta(plan, n1_max, order):
    return {"n1_max": n1_max, "log2_stride": plan.log2_T,
            "log2_stride_fr": None if order == 0 else plan.log2_F}


def average_and_format(blocks, plan, S0=None):
    """Average every modulus block, unpad both axes, collect coefficients."""
    entries, meta = {}, {}
    if S0 is not None:
        key = PathKey(0, None, None, 0, (-1, -1, -1))
        entries[key] = B.unpad_time(S0, output_bounds(plan), plan.log2_T)[None, :]
        meta[key] = _entry_meta(plan, 0, 0)
    for blk in blocks:
        A = average(blk.coef, plan, blk.log2_stride, blk.log2_stride_fr,
                    blk.average_time)
        entries[blk.key] = unpad_block(A, plan, blk.n1_max)
        meta[blk.key] = _entry_meta(plan, blk.n1_max, blk.key.order)
    return CoefficientSet(entries, meta, plan.fingerprint)


@dataclass
class ForwardTrace:
    """Intermediates retained for the backward pass."""

    y: np.ndarray
    scalogram: Scalogram
    S1: Block
    Y2: dict
    order1: dict
    order2: dict


def _lowpass_key(plan):
    return PathKey(1, None, LOWPASS, 0, (-1, -1, plan.log2_F))


def _first_order_lowpass(S1, plan):
    padded = B.pad_frequency(S1.coef, plan.N_fr_padded - S1.n1_max, axis=0)
    return ModulusBlock(_lowpass_key(plan), padded, plan.log2_T, 0, S1.n1_max,
                        average_time=False)


def _prepare(x, plan):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != plan.N_input:
        raise SizeError(f"plan expects {plan.N_input} samples, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise NumericError("input signal contains non-finite samples")
    return x, B.pad_time(x, plan.N_padded)


def jtfs_forward(x, plan, return_trace=False):
    """Joint time-frequency scattering coefficients of ``x``.

    Paths come out in a fixed order: order 0, then order 1 (low-pass path
    first, then each nonnegative-spin frequential wavelet), then order 2
    by ``n2`` and ``n_fr``.  With ``return_trace=True`` a
    :class:`ForwardTrace` is returned as well.
    """
    x, xp = _prepare(x, plan)
    sc = compute_scalogram(xp, plan)
    time_gen = time_scattering_widthfirst(xp, plan, scalogram=sc)
    S0 = next(time_gen)
    S1 = next(time_gen)

    blocks = [_first_order_lowpass(S1, plan)]
    order1, order2, Y2s = {}, {}, {}
    for fb in frequency_scattering(S1, plan, spinned=False):
        key = PathKey(1, None, fb.n_fr, fb.spin, (-1, -1, fb.j_fr))
        order1[key] = fb
        blocks.append(ModulusBlock(key, B.modulus(fb.coef), plan.log2_T,
                                   fb.log2_stride_fr, S1.n1_max))
    for Y2 in time_gen:
        Y2s[Y2.n2] = Y2
        for fb in frequency_scattering(Y2, plan, spinned=True):
            key = PathKey(2, Y2.n2, fb.n_fr, fb.spin, (-1, Y2.j2, fb.j_fr))
            order2[key] = fb
            blocks.append(ModulusBlock(key, B.modulus(fb.coef), Y2.log2_stride,
                                       fb.log2_stride_fr, Y2.n1_max))

    S = average_and_format(blocks, plan, S0=S0)
    if not return_trace:
        return S
    return S, ForwardTrace(x, sc, S1, Y2s, order1, order2)


def first_order_profile(x, plan):
    """Time average of every row of the order-1 low-pass path."""
    x, xp = _prepare(x, plan)
    gen = time_scattering_widthfirst(xp, plan)
    next(gen)
    S1 = next(gen)
    blk = _first_order_lowpass(S1, plan)
    A = average(blk.coef, plan, blk.log2_stride, 0, average_time=False)
    return unpad_block(A, plan, S1.n1_max).mean(axis=1)


def enumerate_paths(plan):
    """Path keys that :func:`jtfs_forward` produces, derived from the plan alone."""
    keys = [PathKey(0, None, None, 0, (-1, -1, -1)), _lowpass_key(plan)]
    for n_fr, psi in enumerate(plan.psi_fr):
        if psi.xi >= 0:
            keys.append(PathKey(1, None, n_fr, int(np.sign(psi.xi)), (-1, -1, psi.j)))
    j1_min = min(p.j for p in plan.psi1)
    for n2, psi2 in enumerate(plan.psi2):
        if psi2.j > j1_min:
            for n_fr, psi in enumerate(plan.psi_fr):
                keys.append(PathKey(2, n2, n_fr, int(np.sign(psi.xi)),
                                    (-1, psi2.j, psi.j)))
    return keys
