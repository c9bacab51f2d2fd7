# SPDX-License-Identifier: GPL-2.0-or-later

"""Magnetic Moyal product, its two-parameter expansion and the derived
brackets.

The product is available through two routes. The kernel route composes
quantized kernels and needs a grid whose momentum scale equals eps. The
oscillatory route evaluates

    (f * g)(x, xi) = (2 pi)^-2d sum_y sum_z exp(i xi.(y + z)) exp(-i lambda gamma_eps(x, y, z))
                     fcheck(x - eps z / 2, y) gcheck(x + eps y / 2, z) dy^d dz^d,

fcheck(x, y) = sum_k exp(-i y.xi_k) f(x, xi_k) dxi^d, on any grid and for any
eps. Taylor expanding the shifts and the flux phase gives the terms of the
expansion in eps^n lambda^k, which are assembled symbolically and evaluated
with spectral derivatives.
"""

import dataclasses
import functools
import itertools
import logging
from math import factorial

import numpy as np
import sympy

from magweyl import utils
from magweyl.defs import (CapabilityError, DomainError, GaugeError, GAUGE_TOL, MAX_EXPANSION_ORDER, MAX_LAMBDA_ORDER,
                          MAX_MINIMAL_SUBSTITUTION_ORDER, RESOLUTION_TOL)
from magweyl.expressions import Expression, momentum_symbols, position_symbols
from magweyl.geometry import (MagneticField, auxiliary_symbols, flux_expansion_polynomials, flux_taylor_series,
                              scaled_flux)
from magweyl.grid import SymbolField, derivative_values
from magweyl.quantizer import compose_kernels, dequantize, quantize


def get_logger():
    return logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class ExpansionRequest:
    n_eps: int
    n_lambda: int
    params: object

    def __post_init__(self):
        if self.n_eps > MAX_EXPANSION_ORDER:
            raise CapabilityError('expansion order is capped at %d, requested %d' % (MAX_EXPANSION_ORDER, self.n_eps))
        if not 0 <= self.n_lambda <= self.n_eps:
            raise DomainError('need 0 <= lambda order <= eps order, got (%d, %d)' % (self.n_eps, self.n_lambda))


# ******* exact product ******************************

def _field_of(field, grid):
    return MagneticField(grid.dimension) if field is None else field


def exact_product(f, g, potential, params, method='kernel', field=None, gauge_check=None, gauge_tol=GAUGE_TOL):
    """f * g by the kernel route (quantize, compose, dequantize) or the
    oscillatory route (needs ``field``).

    gauge_check : optional GaugeTransform; the kernel route is repeated in the
    transformed gauge and a relative discrepancy above ``gauge_tol`` raises
    GaugeError.
    """
    f.grid.check_same(g.grid)
    content = max(f.nyquist_content(), g.nyquist_content())
    if content > RESOLUTION_TOL:
        get_logger().warning('Product %s*%s: Nyquist content %.1e, the grid resolves the symbols only to about '
                             'this level', f.label, g.label, content)
    if method == 'oscillatory':
        if field is None and potential is not None and not potential.is_zero:
            raise CapabilityError('the oscillatory product needs the magnetic field, not only a potential')
        return oscillatory_product(f, g, _field_of(field, f.grid), params)
    if method != 'kernel':
        raise DomainError("unknown product method %r" % (method,))
    result = _kernel_product(f, g, potential, params)
    if gauge_check is not None:
        from magweyl.geometry import VectorPotential, apply_gauge
        base = VectorPotential.zero(f.grid.dimension) if potential is None else potential
        other = _kernel_product(f, g, apply_gauge(base, gauge_check), params)
        discrepancy = (result - other).sup_norm() / max(1.0, result.sup_norm())
        get_logger().debug('Product %s*%s: gauge discrepancy %.3e', f.label, g.label, discrepancy)
        if discrepancy > gauge_tol:
            raise GaugeError('product %s*%s changes under the gauge transform %s: relative discrepancy %.3e > %.1e'
                             % (f.label, g.label, gauge_check, discrepancy, gauge_tol))
    return result


def _kernel_product(f, g, potential, params):
    kernel = compose_kernels(quantize(f, potential, params), quantize(g, potential, params))
    out = dequantize(kernel, potential, params)
    return out.with_values(out.values, label='(%s*%s)' % (f.label, g.label))


def _position_nodes(grid):
    return grid.position_points()


def _momentum_nodes(grid):
    mesh = np.meshgrid(*([grid.momenta] * grid.dimension), indexing='ij')
    return np.stack([m.ravel() for m in mesh], axis=-1)


def _dual_nodes(grid):
    """Extended y nodes (N + 1 per axis) and their weights, halved at +-N/2."""
    n, d = grid.points, grid.dimension
    step = grid.period / (n * grid.momentum_scale)
    axis = (np.arange(n + 1) - n // 2) * step
    weight = np.ones(n + 1)
    weight[[0, -1]] = 0.5
    nodes = np.stack([m.ravel() for m in np.meshgrid(*([axis] * d), indexing='ij')], axis=-1)
    weights = functools.reduce(np.multiply.outer, [weight] * d).ravel()
    return nodes, weights


def _shift_positions(values, grid, shifts):
    """Trigonometric interpolant of ``values`` (position axes first) at x + s
    for every row s of ``shifts``; returns shape (S, N^d) + tail."""
    n, d = grid.points, grid.dimension
    tail = values.shape[d:]
    coeffs = np.asarray(values, dtype=complex)
    for axis in range(d):
        coeffs = utils.centered_fft(coeffs, axis)
    out = coeffs[None]
    for axis in range(d):
        mult = utils.shift_multiplier(n, grid.period, shifts[:, axis])
        shape = [shifts.shape[0]] + [1] * (d + len(tail))
        shape[1 + axis] = n
        out = out * mult.reshape(shape)
    for axis in range(d):
        out = utils.centered_ifft(out, 1 + axis)
    return out.reshape((shifts.shape[0], n ** d) + tail)


def oscillatory_product(f, g, field, params, lambda_power=None):
    """Direct quadrature of the product integral.

    With ``lambda_power = k`` the flux phase exp(-i lambda gamma) is replaced
    by (-i gamma)^k / k!, giving the coefficient of lambda^k.
    """
    f.grid.check_same(g.grid)
    grid = f.grid
    n, d = grid.points, grid.dimension
    eps, lam = params.eps, params.lam
    xs = _position_nodes(grid)
    xis = _momentum_nodes(grid)
    ys, wy = _dual_nodes(grid)

    analysis = np.exp(-1j * xis @ ys.T)
    synthesis = np.exp(1j * ys @ xis.T) * wy[:, None]
    fcheck = np.asarray(f.values).reshape(n ** d, n ** d) @ analysis
    gcheck = np.asarray(g.values).reshape(n ** d, n ** d) @ analysis
    fcheck = fcheck.reshape((n,) * d + (ys.shape[0],))

    magnetic = not field.is_zero and (lam != 0.0 or lambda_power)
    out = np.zeros((n ** d, n ** d), dtype=complex)
    get_logger().debug('Oscillatory product %s*%s: %d x %d quadrature nodes', f.label, g.label, ys.shape[0],
                       ys.shape[0])
    for zi, z in enumerate(ys):
        fz = _shift_positions(fcheck, grid, (-0.5 * eps * z)[None])[0]
        gz = _shift_positions(gcheck[:, zi].reshape((n,) * d), grid, 0.5 * eps * ys).T
        integrand = fz * gz
        if lambda_power is not None or magnetic:
            gamma = scaled_flux(field, xs[:, None, :], ys[None, :, :], z, eps) if magnetic else 0.0
            if lambda_power is None:
                integrand = integrand * np.exp(-1j * lam * gamma)
            else:
                integrand = integrand * (-1j * gamma) ** lambda_power / factorial(lambda_power)
        out += (integrand @ synthesis) * (wy[zi] * np.exp(1j * xis @ z))[None, :]
    out /= float(n) ** (2 * d)
    return SymbolField(grid, out.reshape(grid.phase_shape), label='(%s*%s)' % (f.label, g.label))


# ******* symbolic expansion terms ******************************
# y and z stand for -i d_xi on f and on g, p and q for d_x on f and on g.

def _derivative_symbols(dim):
    p = tuple(sympy.Symbol('p%d' % (i + 1)) for i in range(dim))
    q = tuple(sympy.Symbol('q%d' % (i + 1)) for i in range(dim))
    return p, q


def _shift_generator(dim):
    y, z = auxiliary_symbols(dim)
    p, q = _derivative_symbols(dim)
    return sympy.Rational(1, 2) * sum(yi * qi - zi * pi for yi, zi, pi, qi in zip(y, z, p, q))


def _partitions(n, k):
    """(k0, (k_1..k_n)) with k0 + sum j k_j = n and sum k_j = k."""
    for counts in itertools.product(range(k + 1), repeat=n):
        if sum(counts) != k:
            continue
        weight = sum((j + 1) * c for j, c in enumerate(counts))
        if weight <= n:
            yield n - weight, counts


@functools.lru_cache(maxsize=128)
def _term_polynomial(b12_expr, dim, n, k):
    field = MagneticField(dim, None if dim == 1 else b12_expr)
    fluxes = flux_expansion_polynomials(field, n) if n else []
    shift = _shift_generator(dim)
    total = sympy.Integer(0)
    for k0, counts in _partitions(n, k):
        term = shift ** k0 / factorial(k0)
        for j, c in enumerate(counts):
            if c:
                term *= (-sympy.I * fluxes[j]) ** c / factorial(c)
        total += term
    return sympy.expand(total)


@functools.lru_cache(maxsize=128)
def _lambda_then_eps_polynomial(b12_expr, dim, n, k):
    field = MagneticField(dim, None if dim == 1 else b12_expr)
    e = sympy.Symbol('e')
    fluxes = flux_taylor_series(field, n) if n else []
    gamma = sum(e ** (j + 1) * term for j, term in enumerate(fluxes))
    phase_term = (-sympy.I * gamma) ** k / factorial(k)
    shift = _shift_generator(dim)
    shifts = sum(e ** a * shift ** a / factorial(a) for a in range(n + 1))
    return sympy.expand(sympy.expand(phase_term * shifts).coeff(e, n))


def _assemble(polynomial, f, g, field):
    """Evaluate a polynomial in (y, z, p, q) with x-dependent coefficients as a
    bidifferential operator on (f, g)."""
    f.grid.check_same(g.grid)
    grid = f.grid
    d = grid.dimension
    y, z = auxiliary_symbols(d)
    p, q = _derivative_symbols(d)
    gens = y + z + p + q
    out = np.zeros(grid.phase_shape, dtype=complex)
    if polynomial == 0:
        return out
    xsym = position_symbols(d)
    mesh = grid.phase_mesh()[:d]
    cache = {}

    def derivative(symbol, xi_orders, x_orders):
        key = (id(symbol), xi_orders, x_orders)
        if key not in cache:
            cache[key] = derivative_values(symbol.values, grid, tuple(x_orders) + tuple(xi_orders))
        return cache[key]

    for monom, coeff in sympy.Poly(polynomial, *gens).terms():
        alpha, beta = monom[:d], monom[d:2 * d]
        gamma, delta = monom[2 * d:3 * d], monom[3 * d:]
        factor = (-1j) ** (sum(alpha) + sum(beta))
        if coeff.free_symbols:
            c = Expression(coeff, xsym)(*mesh)
        else:
            c = complex(coeff)
        out += factor * c * derivative(f, alpha, gamma) * derivative(g, beta, delta)
    return out


def expansion_term(f, g, field, n, k):
    """(f * g)_(n, k), the coefficient of eps^n lambda^k."""
    if n > MAX_EXPANSION_ORDER:
        raise CapabilityError('expansion order is capped at %d, requested %d' % (MAX_EXPANSION_ORDER, n))
    if not 0 <= k <= n:
        raise DomainError('need 0 <= k <= n, got (%d, %d)' % (n, k))
    field = _field_of(field, f.grid)
    poly = _term_polynomial(field.b12.expr, field.dimension, n, k)
    return f.with_values(_assemble(poly, f, g, field), label='(%s*%s)_(%d,%d)' % (f.label, g.label, n, k))


def lambda_then_eps_terms(f, g, field, n, k):
    """The (n, k) term assembled from the lambda^k term first, using the
    Taylor series of the simplex flux integral."""
    if n > MAX_EXPANSION_ORDER:
        raise CapabilityError('expansion order is capped at %d, requested %d' % (MAX_EXPANSION_ORDER, n))
    if not 0 <= k <= n:
        raise DomainError('need 0 <= k <= n, got (%d, %d)' % (n, k))
    field = _field_of(field, f.grid)
    poly = _lambda_then_eps_polynomial(field.b12.expr, field.dimension, n, k)
    return f.with_values(_assemble(poly, f, g, field), label='(%s*%s)^(%d,%d)' % (f.label, g.label, k, n))


def truncated_product(f, g, field, request):
    """sum_{n <= N} sum_{k <= min(n, N_lambda)} eps^n lambda^k (f * g)_(n, k)."""
    eps, lam = request.params.eps, request.params.lam
    total = np.zeros(f.grid.phase_shape, dtype=complex)
    for n in range(request.n_eps + 1):
        for k in range(min(n, request.n_lambda) + 1):
            total += eps ** n * lam ** k * expansion_term(f, g, field, n, k).values
    return f.with_values(total, label='(%s*%s)_N%d' % (f.label, g.label, request.n_eps))


def lambda_term(f, g, field, k, params):
    """Coefficient of lambda^k of the product at fixed eps."""
    if k > MAX_LAMBDA_ORDER:
        raise CapabilityError('lambda order is capped at %d, requested %d' % (MAX_LAMBDA_ORDER, k))
    field = _field_of(field, f.grid)
    if k and field.is_zero:
        return f.with_values(np.zeros(f.grid.phase_shape), label='0')
    return oscillatory_product(f, g, field, params, lambda_power=k)


# ******* brackets ******************************

def moyal_commutator(h, f, potential, params, method='kernel', field=None):
    """h * f - f * h."""
    return (exact_product(h, f, potential, params, method, field)
            - exact_product(f, h, potential, params, method, field))


def magnetic_poisson(h, f, field, lam):
    """{h, f}_B = d_xi h . d_x f - d_x h . d_xi f - lambda B_lj d_xi_l h d_xi_j f."""
    h.grid.check_same(f.grid)
    grid = h.grid
    d = grid.dimension

    def deriv(symbol, axis):
        orders = [0] * (2 * d)
        orders[axis] = 1
        return derivative_values(symbol.values, grid, tuple(orders))

    out = np.zeros(grid.phase_shape, dtype=complex)
    for l in range(d):
        out += deriv(h, d + l) * deriv(f, l) - deriv(h, l) * deriv(f, d + l)
    field = _field_of(field, grid)
    if d == 2 and not field.is_zero and lam != 0.0:
        b = field.b12_values(np.stack(grid.phase_mesh()[:d], axis=-1))
        out -= lam * b * (deriv(h, 2) * deriv(f, 3) - deriv(h, 3) * deriv(f, 2))
    return h.with_values(out, label='{%s,%s}_B' % (h.label, f.label))


# ******* minimal substitution ******************************

def _symbolic_inputs(f, potential):
    if f.expression is None:
        raise CapabilityError('minimal substitution needs a symbol sampled from an analytic expression')
    if potential is not None and not potential.is_symbolic:
        raise CapabilityError('minimal substitution needs an analytic vector potential')


def _substitution_expr(f, potential, params, order):
    if order > MAX_MINIMAL_SUBSTITUTION_ORDER:
        raise CapabilityError('minimal substitution is capped at order %d, requested %d'
                              % (MAX_MINIMAL_SUBSTITUTION_ORDER, order))
    _symbolic_inputs(f, potential)
    d = f.grid.dimension
    xs, xis = position_symbols(d), momentum_symbols(d)
    expr = f.expression.expr
    if order >= 2 and potential is not None:
        correction = sympy.Integer(0)
        for a, b, c in itertools.product(range(d), repeat=3):
            second = sympy.diff(potential.components[c].expr, xs[a], xs[b])
            if second != 0:
                correction += second * sympy.diff(expr, xis[a], xis[b], xis[c])
        expr = expr + params.lam * params.eps ** 2 / 24 * correction
    return expr


def minimal_substitution_symbol(f, potential, params, order):
    """g_N with Op^A(f) = Op(g_N o theta^A) + O(eps^(N+1)); g_1 vanishes and
    g_2 = lambda/24 sum d_a d_b A_c d_xi_a d_xi_b d_xi_c f."""
    expr = _substitution_expr(f, potential, params, order)
    source = Expression(expr, f.expression.variables)
    return SymbolField(f.grid, source(*f.grid.phase_mesh()), label='g%d[%s]' % (order, f.label), expression=source)


def minimal_substitution_operator(f, potential, params, order):
    """g_N o theta^A, theta^A(x, xi) = (x, xi - lambda A(x)), sampled on f's grid."""
    expr = _substitution_expr(f, potential, params, order)
    d = f.grid.dimension
    xis = momentum_symbols(d)
    if potential is not None:
        shifted = {xi: xi - params.lam * potential.components[l].expr for l, xi in enumerate(xis)}
        expr = expr.subs(shifted, simultaneous=True)
    source = Expression(expr, f.expression.variables)
    return SymbolField(f.grid, source(*f.grid.phase_mesh()), label='g%d o theta[%s]' % (order, f.label),
                       expression=source)


# ******* remainder study ******************************

@dataclasses.dataclass
class RemainderTable:
    rows: list
    slope: float
    used: object = None

    def columns(self):
        return ['eps', 'lambda', 'N', 'remainder_sup', 'remainder_l2', 'fitted_slope']

    def records(self):
        return [[r['eps'], r['lambda'], r['N'], r['remainder_sup'], r['remainder_l2'], self.slope] for r in self.rows]


def remainder_study(f, g, field, eps_list, lam, order, lambda_order=None, floor=None):
    """Sup and L2 norms of exact - truncated over an eps sweep (oscillatory
    route) and the fitted log-log slope of the sup norm."""
    from magweyl.geometry import Parameters
    lambda_order = order if lambda_order is None else lambda_order
    field = _field_of(field, f.grid)
    rows = []
    for eps in eps_list:
        params = Parameters(eps, lam)
        exact = oscillatory_product(f, g, field, params)
        approx = truncated_product(f, g, field, ExpansionRequest(order, min(order, lambda_order), params))
        diff = exact - approx
        rows.append({'eps': float(eps), 'lambda': float(lam), 'N': order,
                     'remainder_sup': diff.sup_norm(), 'remainder_l2': diff.l2_norm()})
        get_logger().info('Remainder N=%d eps=%g: sup %.3e', order, eps, rows[-1]['remainder_sup'])
    slope, used = utils.fit_slope([r['eps'] for r in rows], [r['remainder_sup'] for r in rows], floor=floor)
    return RemainderTable(rows, slope, used)
