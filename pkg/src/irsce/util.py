"""Small shared helpers: dB conversions and column-major vec/unvec."""

import numpy as np


def db2lin(x_db):
    """Power ratio from dB."""
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


def lin2db(x):
    """dB from a linear power ratio; 0 maps to -inf."""
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(x)


def dbm2watt(p_dbm):
    return 10.0 ** ((np.asarray(p_dbm, dtype=float) - 30.0) / 10.0)


def vec(a):
    """Column-major vectorization (matches the vec() used in the math)."""
    return np.asarray(a).reshape(-1, order="F")


def unvec(v, rows, cols):
    """Inverse of vec for a rows-by-cols matrix."""
    return np.asarray(v).reshape((rows, cols), order="F")


def hermitize(a):
    """Symmetrize a nominally Hermitian matrix in place of round-off skew."""
    return 0.5 * (a + a.conj().T)


def crandn(rng, *shape):
    """Standard circular complex Gaussian draws, unit variance per entry."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def to_complex(re, im):
    """Complex array from parts; safe when either part is +-inf (re + 1j*im
    would produce NaN through the 0 * inf in the complex product)."""
    re, im = np.broadcast_arrays(np.asarray(re, dtype=float), np.asarray(im, dtype=float))
    out = np.empty(re.shape, dtype=complex)
    out.real = re
    out.imag = im
    return out
