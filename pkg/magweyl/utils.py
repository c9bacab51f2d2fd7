# SPDX-License-Identifier: GPL-2.0-or-later

"""Shared numerical helpers: quadrature rules, centered FFTs, trigonometric
interpolation and log-log slope fits."""

import functools
import logging

import numpy as np
import scipy.fft
import scipy.special

from magweyl.defs import DomainError, REMAINDER_FLOOR


def get_logger():
    return logging.getLogger(__name__)


@functools.lru_cache(maxsize=32)
def _legendre(n):
    nodes, weights = scipy.special.roots_legendre(n)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def gauss_legendre(n, a=0.0, b=1.0):
    """Nodes and weights of the n-point Gauss-Legendre rule on [a, b]."""
    nodes, weights = _legendre(int(n))
    half = 0.5 * (b - a)
    return a + half * (nodes + 1.0), half * weights


@functools.lru_cache(maxsize=16)
def simplex_rule(n):
    """Collapsed tensor Gauss-Legendre rule on {a, b >= 0, a + b <= 1}.

    Returns flat arrays (a, b, w). Exact for polynomials of total degree
    up to 2n - 2.
    """
    s, ws = gauss_legendre(n)
    t, wt = gauss_legendre(n)
    ss, tt = np.meshgrid(s, t, indexing='ij')
    wss, wtt = np.meshgrid(ws, wt, indexing='ij')
    a = (ss * (1.0 - tt)).ravel()
    b = tt.ravel()
    w = (wss * wtt * (1.0 - tt)).ravel()
    for arr in (a, b, w):
        arr.setflags(write=False)
    return a, b, w


# ******* centered DFT ******************************
# Samples F_j live on x_j = (j - n/2) dx; coefficients C_m belong to the
# frequencies kappa_m = (m - n/2) 2 pi / period.
#   C_m = sum_j exp(-i kappa_m x_j) F_j,   F_j = 1/n sum_m exp(i kappa_m x_j) C_m

def _checkerboard(n, axis, ndim):
    sign = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    if (n // 2) % 2:
        sign = -sign
    shape = [1] * ndim
    shape[axis] = n
    return sign.reshape(shape)


def _alternating(n, axis, ndim):
    sign = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    shape = [1] * ndim
    shape[axis] = n
    return sign.reshape(shape)


def centered_fft(values, axis):
    values = np.asarray(values)
    n = values.shape[axis]
    if n % 2:
        raise DomainError('centered transforms need an even number of points, got %d' % n)
    alt = _alternating(n, axis, values.ndim)
    return _checkerboard(n, axis, values.ndim) * scipy.fft.fft(alt * values, axis=axis)


def centered_ifft(coeffs, axis):
    coeffs = np.asarray(coeffs)
    n = coeffs.shape[axis]
    if n % 2:
        raise DomainError('centered transforms need an even number of points, got %d' % n)
    alt = _alternating(n, axis, coeffs.ndim)
    return _checkerboard(n, axis, coeffs.ndim) * scipy.fft.ifft(alt * coeffs, axis=axis)


def centered_frequencies(n, period):
    return (np.arange(n) - n // 2) * (2.0 * np.pi / period)


def derivative_multiplier(n, period, order):
    """(i kappa)^order with the Nyquist mode treated as a cosine."""
    kappa = centered_frequencies(n, period)
    mult = (1j * kappa) ** order
    if order % 2:
        mult[0] = 0.0
    return mult


def shift_multiplier(n, period, shift):
    """Multipliers turning F(x) into F(x + shift); shift may be an array,
    the frequency axis is appended last."""
    kappa = centered_frequencies(n, period)
    shift = np.asarray(shift, dtype=float)[..., None]
    mult = np.exp(1j * kappa * shift)
    mult[..., 0] = np.cos(kappa[0] * shift[..., 0])
    return mult


def interpolation_basis(n, period, points):
    """Matrix E with F(points) = E @ C / n for centered coefficients C."""
    kappa = centered_frequencies(n, period)
    points = np.asarray(points, dtype=float)[..., None]
    basis = np.exp(1j * kappa * points)
    basis[..., 0] = np.cos(kappa[0] * points[..., 0])
    return basis


def shift_matrix(n, period, shift):
    """Dense matrix S with (S F)_j = F(x_j + shift) for the trigonometric
    interpolant of F."""
    mult = shift_multiplier(n, period, shift)
    eye = np.eye(n)
    return centered_ifft(mult[:, None] * centered_fft(eye, axis=0), axis=0)


def trig_interpolate(values, periods, points):
    """Evaluate the trigonometric interpolant of grid samples at scattered
    points.

    values : ndarray with one axis per coordinate
    periods : per-axis periods
    points : ndarray of shape (M, values.ndim)
    """
    values = np.asarray(values)
    coeffs = values.astype(complex)
    for axis in range(values.ndim):
        coeffs = centered_fft(coeffs, axis)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    # contract the last axis first, the point index rides along as axis 0
    out = np.broadcast_to(coeffs, (points.shape[0],) + coeffs.shape)
    for axis in reversed(range(values.ndim)):
        n = values.shape[axis]
        basis = interpolation_basis(n, periods[axis], points[:, axis]) / n
        out = np.einsum('m...k,mk->m...', out, basis)
    return out


# ******* regression ******************************

def fit_slope(xs, ys, floor=None, min_points=4):
    """Least-squares slope of log(ys) against log(xs).

    Points whose value sits at or below ``floor`` (absolute) are treated as
    the discretization/roundoff plateau and dropped. Returns (slope, used)
    where ``used`` is the boolean mask of retained points.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.abs(np.asarray(ys, dtype=float))
    if floor is None:
        floor = REMAINDER_FLOOR * max(float(np.max(ys)) if ys.size else 0.0, 1.0)
    used = np.isfinite(ys) & (ys > floor) & (xs > 0)
    if np.count_nonzero(used) < min(min_points, xs.size):
        get_logger().warning('Slope fit: only %d of %d points above the floor %g',
                             np.count_nonzero(used), xs.size, floor)
    if np.count_nonzero(used) < 2:
        return float('nan'), used
    slope, _ = np.polyfit(np.log(xs[used]), np.log(ys[used]), 1)
    return float(slope), used
