"""Fourier-domain primitives shared by the forward and adjoint passes.

Spectra are always stored at full length (no half-spectrum), so filters
centred on negative frequencies need no special casing.  Each linear
operator comes with an ``*_adjoint`` counterpart; adjoints are taken with
respect to the real inner product ``Re(sum(conj(a) * b))``, which is the one
that matters for gradients of real-valued losses.

All functions are pure: they never modify their inputs.
"""

import numpy as np

from .errors import SizeError

__all__ = [
    "is_power_of_two",
    "next_power_of_two",
    "rfft",
    "cfft",
    "ifft",
    "cdgmm",
    "subsample_fourier",
    "subsample_fourier_adjoint",
    "convolve_subsample",
    "convolve_subsample_adjoint",
    "pad_time",
    "pad_time_adjoint",
    "pad_bounds",
    "unpad_time",
    "unpad_time_adjoint",
    "pad_frequency",
    "pad_frequency_adjoint",
    "modulus",
    "modulus_adjoint",
    "swap_time_frequency",
]


def is_power_of_two(n):
    n = int(n)
    return n > 0 and (n & (n - 1)) == 0


def next_power_of_two(n):
    """Smallest power of two that is ``>= n``."""
    n = int(n)
    if n <= 1:
        return 1
    return 1 << (n - 1).bit_length()


def _require_power_of_two(n, what="length"):
    if not is_power_of_two(n):
        raise SizeError(f"{what} must be a power of two, got {n}")


def rfft(x, axis=-1):
    """Full-length DFT of a real signal.

    Only the real part of the input is used.  The output is Hermitian
    symmetric: ``X[N - k] == conj(X[k])``.
    """
    x = np.asarray(x)
    if np.iscomplexobj(x):
        x = x.real
    _require_power_of_two(x.shape[axis])
    return np.fft.fft(x.astype(np.float64, copy=False), axis=axis)


def cfft(x, axis=-1):
    """Full-length DFT of a complex signal."""
    x = np.asarray(x, dtype=np.complex128)
    _require_power_of_two(x.shape[axis])
    return np.fft.fft(x, axis=axis)


def ifft(X, axis=-1):
    """Inverse DFT with ``1/N`` normalization, so ``ifft(cfft(x)) == x``."""
    return np.fft.ifft(np.asarray(X), axis=axis)


def cdgmm(X, H, axis=-1):
    """Multiply spectrum ``X`` by filter ``H`` bin by bin along ``axis``."""
    X = np.asarray(X)
    H = np.asarray(H)
    if H.ndim != 1 or H.shape[0] != X.shape[axis]:
        raise SizeError(
            f"filter of length {H.shape} does not match spectrum length "
            f"{X.shape[axis]}"
        )
    shape = [1] * X.ndim
    shape[axis] = H.shape[0]
    return X * H.reshape(shape)


def subsample_fourier(X, k, axis=-1):
    """Fold a spectrum so that it becomes the DFT of ``x[::k]``.

    ``out[j] = (1/k) * sum_b X[j + b * N/k]``.
    """
    X = np.asarray(X)
    k = int(k)
    N = X.shape[axis]
    if k < 1 or N % k:
        raise SizeError(f"subsampling factor {k} does not divide length {N}")
    if k == 1:
        return X.copy()
    Xm = np.moveaxis(X, axis, -1)
    out = Xm.reshape(Xm.shape[:-1] + (k, N // k)).mean(axis=-2)
    return np.moveaxis(out, -1, axis)


def subsample_fourier_adjoint(Y, k, axis=-1):
    Y = np.asarray(Y)
    k = int(k)
    if k < 1:
        raise SizeError(f"invalid subsampling factor {k}")
    if k == 1:
        return Y.copy()
    reps = [1] * Y.ndim
    reps[axis] = k
    return np.tile(Y, reps) / k


def convolve_subsample(X_hat, H, k, axis=-1):
    """Filter a signal given by its spectrum, then decimate by ``k``.

    Equivalent to circular convolution with ``ifft(H)`` followed by keeping
    every ``k``-th sample.  Returns a complex time-domain array.
    """
    return ifft(subsample_fourier(cdgmm(X_hat, H, axis=axis), k, axis=axis),
                axis=axis)


def convolve_subsample_adjoint(y, H, k, axis=-1, spectral=False):
    """Adjoint of ``x -> convolve_subsample(fft(x), H, k)``.

    With ``spectral=True`` the result is returned as a (full-rate) spectrum,
    which lets callers accumulate several contributions before a single
    inverse transform.
    """
    Y = np.fft.fft(np.asarray(y, dtype=np.complex128), axis=axis)
    reps = [1] * Y.ndim
    reps[axis] = int(k)
    G = cdgmm(np.tile(Y, reps), np.conj(H), axis=axis)
    return G if spectral else ifft(G, axis=axis)


def _reflect_indices(n, left, right):
    # half-sample symmetric reflection: [a b c] -> [b a | a b c | c b]
    return np.pad(np.arange(n), (left, right), mode="symmetric")


def pad_bounds(n, target):
    """Support ``(start, end)`` of an ``n``-sample signal padded to ``target``."""
    if target < n:
        raise SizeError(f"cannot pad length {n} down to {target}")
    left = (target - n) // 2
    return left, left + n


def pad_time(x, target):
    """Reflection-pad ``x`` on both sides to length ``target``.

    The padding uses half-sample symmetry (edge samples are repeated) and is
    split evenly, the extra sample going to the right.
    """
    x = np.asarray(x)
    n = x.shape[-1]
    left, end = pad_bounds(n, target)
    _require_power_of_two(target, "padded length")
    return x[..., _reflect_indices(n, left, target - end)]


def pad_time_adjoint(g, n):
    """Fold the gradient of a padded signal back onto the original ``n`` samples."""
    g = np.asarray(g)
    target = g.shape[-1]
    left, end = pad_bounds(n, target)
    idx = _reflect_indices(n, left, target - end)
    return np.bincount(idx, weights=g, minlength=n)


def _stride_bounds(bounds, log2_stride):
    start, end = bounds
    step = 1 << log2_stride
    start_k = start // step
    count = -(-(end - start) // step)
    return start_k, start_k + count


def unpad_time(x, bounds, log2_stride=0):
    """Crop the original support ``bounds`` (given at full rate) out of ``x``.

    ``x`` is assumed to live at stride ``2**log2_stride``.
    """
    lo, hi = _stride_bounds(bounds, log2_stride)
    x = np.asarray(x)
    if hi > x.shape[-1]:
        raise SizeError(f"bounds {bounds} exceed signal of length {x.shape[-1]}"
                        f" at stride 2**{log2_stride}")
    return x[..., lo:hi]


def unpad_time_adjoint(g, bounds, length, log2_stride=0):
    lo, hi = _stride_bounds(bounds, log2_stride)
    g = np.asarray(g)
    out = np.zeros(g.shape[:-1] + (length,), dtype=g.dtype)
    out[..., lo:hi] = g
    return out


def pad_frequency(X, pad_right, axis=0):
    """Append ``pad_right`` zeros along the log-frequency axis."""
    if pad_right < 0:
        raise SizeError(f"negative frequency padding {pad_right}")
    X = np.asarray(X)
    widths = [(0, 0)] * X.ndim
    widths[axis] = (0, int(pad_right))
    return np.pad(X, widths)


def pad_frequency_adjoint(G, n_rows, axis=0):
    return np.take(np.asarray(G), np.arange(n_rows), axis=axis)


def modulus(X):
    return np.abs(X)


def modulus_adjoint(Z, G, rel_eps=1e-12):
    """Backpropagate ``G`` through ``|Z|``.

    The subgradient ``Z/|Z|`` is set to zero wherever ``|Z|`` falls below
    ``rel_eps`` times the RMS of ``Z``.
    """
    Z = np.asarray(Z)
    mag = np.abs(Z)
    rms = np.sqrt(np.mean(mag ** 2)) if mag.size else 0.0
    keep = mag > rel_eps * rms
    phase = np.zeros_like(Z, dtype=np.complex128)
    np.divide(Z, mag, out=phase, where=keep)
    return G * phase


def swap_time_frequency(X):
    """Exchange the last two axes."""
    return np.swapaxes(np.asarray(X), -1, -2)
