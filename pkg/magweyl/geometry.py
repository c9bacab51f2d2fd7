# SPDX-License-Identifier: GPL-2.0-or-later

"""Magnetic fields, vector potentials, gauge transformations and fluxes.

Orientation: Gamma^B(<x, y, z>) is the circulation x -> y -> z -> x, which
equals the integral of B over the oriented triangle. With constant B12 = b the
corners (0,0), (1,0), (0,1) give +b/2. The scaled flux expands as
gamma_eps = sum_n eps^n L_n with L_1 = 1/2 B_kl y_k z_l.
"""

import dataclasses
import functools
import logging
from math import comb, factorial

import numpy as np
import sympy

from magweyl import utils
from magweyl.defs import (DomainError, CapabilityError, ExpressionError, DEFAULT_LINE_NODES,
                          DEFAULT_AREA_NODES, QUADRATURE_CHUNK, MAX_FLUX_ORDER, ANTISYMMETRY_TOL,
                          CURL_TOL, CURL_STEP, MAX_DIMENSION)
from magweyl.expressions import Expression, position_expression, position_symbols


def get_logger():
    return logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class Parameters:
    eps: float = 1.0
    lam: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.eps <= 1.0:
            raise DomainError('eps must lie in (0, 1], got %r' % (self.eps,))
        if not 0.0 <= self.lam <= 1.0:
            raise DomainError('lambda must lie in [0, 1], got %r' % (self.lam,))

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


def _symbolic_b12(dimension, components, rng=None, samples=16):
    if dimension == 1:
        if components is not None and any(position_expression(c, 1).expr != 0 for c in np.ravel(components)):
            raise DomainError('a magnetic field in d=1 must vanish identically')
        return None
    if components is None:
        return position_expression(0, dimension)
    if isinstance(components, (list, tuple)):
        rows = [[position_expression(c, dimension) for c in row] for row in components]
        if len(rows) != dimension or any(len(r) != dimension for r in rows):
            raise DomainError('magnetic field matrix must be %dx%d' % (dimension, dimension))
        rng = np.random.default_rng(0) if rng is None else rng
        pts = rng.uniform(-3.0, 3.0, size=(samples, dimension))
        for k in range(dimension):
            for l in range(dimension):
                lhs = rows[k][l](*pts.T)
                rhs = rows[l][k](*pts.T)
                scale = max(1.0, float(np.max(np.abs(lhs))))
                if np.max(np.abs(lhs + rhs)) > ANTISYMMETRY_TOL * scale:
                    raise DomainError('magnetic field is not antisymmetric in (%d, %d)' % (k + 1, l + 1))
        return rows[0][1]
    return position_expression(components, dimension)


class MagneticField:
    """ Antisymmetric field B_kl(x). In d=2 the single independent component
        B_12 is kept as an analytic expression; d=1 forces B = 0.
    """

    def __init__(self, dimension, components=None, smoothness='BC_infinity'):
        if dimension not in range(1, MAX_DIMENSION + 1):
            raise DomainError('field dimension must be 1 or 2, got %r' % (dimension,))
        self.dimension = dimension
        self.smoothness = smoothness
        self._b12 = _symbolic_b12(dimension, components)

    @classmethod
    def constant(cls, dimension, b=0.0):
        return cls(dimension, None if dimension == 1 else float(b))

    def __repr__(self):
        return 'MagneticField(d=%d, B12=%s)' % (self.dimension, self._b12)

    @property
    def is_zero(self):
        return self._b12 is None or self._b12.expr == 0

    @property
    def is_constant(self):
        return self._b12 is None or self._b12.is_constant

    @property
    def b12(self):
        """B_12 as an Expression (zero expression in d=1)."""
        if self._b12 is None:
            return position_expression(0, self.dimension)
        return self._b12

    def component(self, k, l):
        if k == l or self.dimension == 1:
            return position_expression(0, self.dimension)
        return self._b12 if (k, l) == (0, 1) else Expression(-self._b12.expr, self._b12.variables)

    def b12_values(self, points):
        """B_12 at points of shape (..., d)."""
        points = np.asarray(points, dtype=float)
        if self._b12 is None:
            return np.zeros(points.shape[:-1])
        return np.real(self._b12(*np.moveaxis(points, -1, 0)))

    def matrix(self, points):
        """Full field matrix of shape (..., d, d)."""
        points = np.asarray(points, dtype=float)
        out = np.zeros(points.shape[:-1] + (self.dimension, self.dimension))
        if self.dimension == 2:
            b = self.b12_values(points)
            out[..., 0, 1] = b
            out[..., 1, 0] = -b
        return out


class GaugeTransform:
    """ Scalar gauge function chi(x).
    """

    def __init__(self, dimension, chi):
        self.dimension = dimension
        self.chi = chi if isinstance(chi, Expression) else position_expression(chi, dimension)
        self.gradient = tuple(self.chi.diff(i) for i in range(dimension))

    def __repr__(self):
        return 'GaugeTransform(%s)' % self.chi

    def __call__(self, points):
        points = np.asarray(points, dtype=float)
        return np.real(self.chi(*np.moveaxis(points, -1, 0)))

    def grad(self, points):
        points = np.asarray(points, dtype=float)
        coords = np.moveaxis(points, -1, 0)
        return np.stack([np.real(g(*coords)) for g in self.gradient], axis=-1)


class VectorPotential:
    """ Vector potential A_l(x), either analytic (sympy components) or given
        by a numerical evaluator.
    """

    def __init__(self, dimension, components=None, gauge='custom', evaluator=None):
        self.dimension = dimension
        self.gauge = gauge
        self._evaluator = evaluator
        if components is not None:
            if len(components) != dimension:
                raise DomainError('vector potential needs %d components' % dimension)
            self.components = tuple(c if isinstance(c, Expression) else position_expression(c, dimension)
                                    for c in components)
        elif evaluator is None:
            self.components = tuple(position_expression(0, dimension) for _ in range(dimension))
        else:
            self.components = None

    def __repr__(self):
        return 'VectorPotential(d=%d, gauge=%r)' % (self.dimension, self.gauge)

    @classmethod
    def zero(cls, dimension):
        return cls(dimension, [0] * dimension, gauge='zero')

    @property
    def is_symbolic(self):
        return self.components is not None

    @property
    def is_zero(self):
        return self.is_symbolic and all(c.expr == 0 for c in self.components)

    def __call__(self, points):
        """A at points of shape (..., d), returns (..., d)."""
        points = np.asarray(points, dtype=float)
        if self.components is not None:
            coords = np.moveaxis(points, -1, 0)
            return np.stack([np.real(c(*coords)) for c in self.components], axis=-1)
        return self._evaluator(points)

    def curl(self, points, step=CURL_STEP):
        """dA_12 = d_1 A_2 - d_2 A_1 by central differences (zeros in d=1)."""
        points = np.asarray(points, dtype=float)
        if self.dimension == 1:
            return np.zeros(points.shape[:-1])
        e1 = np.array([step, 0.0])
        e2 = np.array([0.0, step])
        d1a2 = (self(points + e1)[..., 1] - self(points - e1)[..., 1]) / (2 * step)
        d2a1 = (self(points + e2)[..., 0] - self(points - e2)[..., 0]) / (2 * step)
        return d1a2 - d2a1

    def check_field(self, field, rng=None, samples=16, tol=CURL_TOL):
        """Verify dA = B at random sample points."""
        rng = np.random.default_rng(0) if rng is None else rng
        pts = rng.uniform(-2.0, 2.0, size=(samples, self.dimension))
        residual = np.max(np.abs(self.curl(pts) - field.b12_values(pts)))
        if residual > tol:
            raise DomainError('vector potential %r does not generate %r: residual %.3e' % (self, field, residual))
        return residual


def transversal_gauge(field, nodes=DEFAULT_LINE_NODES):
    """A_l(x) = -int_0^1 B_lj(s x) s x_j ds with an n-node Gauss-Legendre rule."""
    d = field.dimension
    if field.is_zero:
        return VectorPotential(d, [0] * d, gauge='transversal')
    if field.is_constant:
        b = float(sympy.re(field.b12.expr))
        return VectorPotential(d, ['%r*x2' % (-0.5 * b), '%r*x1' % (0.5 * b)], gauge='transversal')
    s, w = utils.gauss_legendre(nodes)

    def evaluate(points):
        points = np.asarray(points, dtype=float)
        scaled = points[..., None, :] * s[:, None]
        b = field.b12_values(scaled)
        weight = np.sum(w * s * b, axis=-1)
        return np.stack([-weight * points[..., 1], weight * points[..., 0]], axis=-1)

    return VectorPotential(d, evaluator=evaluate, gauge='transversal')


def apply_gauge(potential, chi):
    """A' = A + grad chi."""
    label = '%s+d(%s)' % (potential.gauge, chi.chi)
    if potential.is_symbolic:
        comps = [Expression(c.expr + g.expr, c.variables) for c, g in zip(potential.components, chi.gradient)]
        return VectorPotential(potential.dimension, comps, gauge=label)
    return VectorPotential(potential.dimension, evaluator=lambda p: potential(p) + chi.grad(p), gauge=label)


def _blocked(func, *arrays):
    """Apply func over leading dims in blocks of QUADRATURE_CHUNK rows."""
    arrays = np.broadcast_arrays(*[np.asarray(a, dtype=float) for a in arrays])
    lead = arrays[0].shape[:-1]
    flat = [a.reshape(-1, a.shape[-1]) for a in arrays]
    out = np.empty(flat[0].shape[0])
    for start in range(0, out.size, QUADRATURE_CHUNK):
        stop = start + QUADRATURE_CHUNK
        out[start:stop] = func(*[a[start:stop] for a in flat])
    return out.reshape(lead)


def circulation(potential, x, y, nodes=DEFAULT_LINE_NODES):
    """Gamma^A([x, y]) along the straight segment; vectorized over leading
    dims of x and y (shape (..., d))."""
    if potential.is_zero:
        return np.zeros(np.broadcast(np.asarray(x)[..., 0], np.asarray(y)[..., 0]).shape)
    t, w = utils.gauss_legendre(nodes)

    def line(xs, ys):
        delta = ys - xs
        pts = xs[:, None, :] + t[None, :, None] * delta[:, None, :]
        a = potential(pts)
        return np.einsum('q,mqd,md->m', w, a, delta)

    return _blocked(line, x, y)


def triangle_flux(potential, x, y, z, nodes=DEFAULT_LINE_NODES):
    """Gamma^B(<x, y, z>) via Stokes: sum of the three edge circulations."""
    return (circulation(potential, x, y, nodes) + circulation(potential, y, z, nodes)
            + circulation(potential, z, x, nodes))


def flux_by_area(field, x, y, z, nodes=DEFAULT_AREA_NODES):
    """Gamma^B(<x, y, z>) as the integral of B over the oriented triangle."""
    x, y, z = np.broadcast_arrays(*[np.asarray(p, dtype=float) for p in (x, y, z)])
    if field.dimension == 1 or field.is_zero:
        return np.zeros(x.shape[:-1])
    u = y - x
    v = z - x
    cross = u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]
    if field.is_constant:
        return 0.5 * float(np.real(field.b12(0.0, 0.0))) * cross
    a, b, w = utils.simplex_rule(nodes)

    def area(xs, us, vs):
        pts = xs[:, None, :] + a[None, :, None] * us[:, None, :] + b[None, :, None] * vs[:, None, :]
        return field.b12_values(pts) @ w

    return _blocked(area, x, u, v) * cross


def _flux(geometry, x, y, z):
    if isinstance(geometry, MagneticField):
        return flux_by_area(geometry, x, y, z)
    return triangle_flux(geometry, x, y, z)


def scaled_flux(geometry, x, y, z, eps):
    """gamma_eps(x, y, z) = Gamma^B(<x - eps/2 (y+z), x + eps/2 (y-z), x + eps/2 (y+z)>) / eps.

    geometry is a VectorPotential (Stokes route) or a MagneticField (area route).
    """
    if not eps > 0:
        raise DomainError('scaled flux needs eps > 0, use flux_expansion_terms at eps = 0')
    x, y, z = np.broadcast_arrays(*[np.asarray(p, dtype=float) for p in (x, y, z)])
    p1 = x - 0.5 * eps * (y + z)
    p2 = x + 0.5 * eps * (y - z)
    p3 = x + 0.5 * eps * (y + z)
    return _flux(geometry, p1, p2, p3) / eps


def omega_phase(geometry, q, x, y, params):
    """omega(q; x, y) = exp(-i lambda/eps Gamma^B(<q, q + eps x, q + eps x + eps y>))."""
    if not params.eps > 0:
        raise DomainError('omega phase needs eps > 0')
    q, x, y = np.broadcast_arrays(*[np.asarray(p, dtype=float) for p in (q, x, y)])
    flux = _flux(geometry, q, q + params.eps * x, q + params.eps * (x + y))
    return np.exp(-1j * params.lam / params.eps * flux)


# ******* Taylor expansion of the scaled flux ******

def auxiliary_symbols(dim):
    y = tuple(sympy.Symbol('y%d' % (i + 1), real=True) for i in range(dim))
    z = tuple(sympy.Symbol('z%d' % (i + 1), real=True) for i in range(dim))
    return y, z


def _directional(expr, direction, xs, times):
    for _ in range(times):
        expr = sum(c * sympy.diff(expr, xv) for c, xv in zip(direction, xs))
    return expr


@functools.lru_cache(maxsize=64)
def _flux_polynomial(b12_expr, dim, order):
    xs = position_symbols(dim)
    y, z = auxiliary_symbols(dim)
    if dim == 1:
        return sympy.Integer(0)
    wedge = y[0] * z[1] - y[1] * z[0]
    j = order
    prefactor = -sympy.Rational(1, factorial(j)) * sympy.Rational(-1, 2) ** (j + 1) * sympy.Rational(1, (j + 1) ** 2)
    total = sympy.Integer(0)
    for c in range(1, j + 1):
        bracket = (1 - (-1) ** (j + 1)) * c - (1 - (-1) ** c) * (j + 1)
        if bracket == 0:
            continue
        term = _directional(_directional(b12_expr, z, xs, j - c), y, xs, c - 1)
        total += comb(j + 1, c) * bracket * term
    return sympy.expand(prefactor * total * wedge)


def flux_expansion_polynomials(field, order):
    """Symbolic L_1..L_order as polynomials in (y, z) with coefficients in x."""
    if order > MAX_FLUX_ORDER:
        raise CapabilityError('flux expansion is capped at order %d, requested %d' % (MAX_FLUX_ORDER, order))
    return [_flux_polynomial(field.b12.expr, field.dimension, j) for j in range(1, order + 1)]


@functools.lru_cache(maxsize=64)
def _taylor_polynomial(b12_expr, dim, order):
    xs = position_symbols(dim)
    y, z = auxiliary_symbols(dim)
    if dim == 1:
        return sympy.Integer(0)
    a, b = sympy.symbols('a b', real=True)
    u = a + b - sympy.Rational(1, 2)
    w = b - sympy.Rational(1, 2)
    m = order - 1
    total = sympy.Integer(0)
    for r in range(m + 1):
        moment = sympy.integrate(sympy.integrate(u ** r * w ** (m - r), (a, 0, 1 - b)), (b, 0, 1))
        if moment == 0:
            continue
        term = _directional(_directional(b12_expr, z, xs, m - r), y, xs, r)
        total += comb(m, r) * moment * term
    wedge = y[0] * z[1] - y[1] * z[0]
    return sympy.expand(total * wedge / factorial(m))


def flux_taylor_series(field, order):
    """L_1..L_order from the eps-Taylor expansion of the simplex integral of B."""
    if order > MAX_FLUX_ORDER:
        raise CapabilityError('flux expansion is capped at order %d, requested %d' % (MAX_FLUX_ORDER, order))
    return [_taylor_polynomial(field.b12.expr, field.dimension, j) for j in range(1, order + 1)]


def flux_expansion_terms(field, x, y, z, order):
    """Values of L_n(x, y, z) for n = 1..order; points broadcast over leading dims."""
    polys = flux_expansion_polynomials(field, order)
    dim = field.dimension
    x, y, z = np.broadcast_arrays(*[np.asarray(p, dtype=float) for p in (x, y, z)])
    ys, zs = auxiliary_symbols(dim)
    args = position_symbols(dim) + ys + zs
    coords = [x[..., i] for i in range(dim)] + [y[..., i] for i in range(dim)] + [z[..., i] for i in range(dim)]
    terms = []
    for poly in polys:
        try:
            func = sympy.lambdify(args, poly, modules='numpy')
        except (TypeError, ValueError) as e:
            raise ExpressionError('cannot evaluate flux polynomial: %s' % e)
        terms.append(np.broadcast_to(np.real(np.asarray(func(*coords), dtype=complex)), x.shape[:-1]).copy())
    return terms
