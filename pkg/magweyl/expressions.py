# SPDX-License-Identifier: GPL-2.0-or-later

"""Analytic-expression descriptors.

Fields, potentials, gauges and symbols are given as sympy expressions in the
position variables ``x1..xd`` and momentum variables ``xi1..xid`` (``x`` and
``xi`` are accepted as aliases when d = 1). Numerical evaluation goes through
``sympy.lambdify`` with the numpy backend, derivatives are symbolic.
"""

import logging

import numpy as np
import sympy

from magweyl.defs import ExpressionError


def get_logger():
    return logging.getLogger(__name__)


def position_symbols(dim):
    return tuple(sympy.Symbol('x%d' % (i + 1), real=True) for i in range(dim))


def momentum_symbols(dim):
    return tuple(sympy.Symbol('xi%d' % (i + 1), real=True) for i in range(dim))


def _namespace(variables):
    names = {str(v): v for v in variables}
    # d = 1 aliases
    if 'x1' in names and 'x2' not in names:
        names['x'] = names['x1']
    if 'xi1' in names and 'xi2' not in names:
        names['xi'] = names['xi1']
    return names


class Expression:
    """ Immutable analytic function of a fixed tuple of variables.
    """

    def __init__(self, source, variables):
        self._variables = tuple(variables)
        if isinstance(source, Expression):
            source = source.expr
        if isinstance(source, str):
            try:
                expr = sympy.sympify(source, locals=_namespace(self._variables))
            except (sympy.SympifyError, SyntaxError, TypeError) as e:
                raise ExpressionError("cannot parse expression '%s': %s" % (source, e))
        else:
            expr = sympy.sympify(source)
        unknown = expr.free_symbols - set(self._variables)
        if unknown:
            raise ExpressionError("expression '%s' uses unknown variables %s"
                                  % (source, sorted(str(s) for s in unknown)))
        self._expr = expr
        self._func = None

    @property
    def expr(self):
        return self._expr

    @property
    def variables(self):
        return self._variables

    @property
    def is_constant(self):
        return not self._expr.free_symbols

    def __repr__(self):
        return 'Expression(%s)' % self._expr

    def __str__(self):
        return str(self._expr)

    def __call__(self, *coords):
        if len(coords) != len(self._variables):
            raise ExpressionError('expected %d coordinates, got %d' % (len(self._variables), len(coords)))
        if self._func is None:
            self._func = sympy.lambdify(self._variables, self._expr, modules='numpy')
        shape = np.broadcast(*coords).shape if coords else ()
        values = np.asarray(self._func(*coords))
        return np.broadcast_to(values, shape).copy() if values.shape != shape else values

    def diff(self, variable, order=1):
        if isinstance(variable, int):
            variable = self._variables[variable]
        return Expression(sympy.diff(self._expr, variable, order), self._variables)

    def subs(self, mapping, variables=None):
        return Expression(self._expr.subs(mapping), self._variables if variables is None else variables)


def phase_space_expression(source, dim):
    """Expression in (x1..xd, xi1..xid)."""
    return Expression(source, position_symbols(dim) + momentum_symbols(dim))


def position_expression(source, dim):
    """Expression in (x1..xd)."""
    return Expression(source, position_symbols(dim))
