# SPDX-License-Identifier: GPL-2.0-or-later

"""Experiment configs: JSON documents checked against the shipped schema and
turned into grids, fields, gauges, symbols and lattices."""

import json
import logging

import jsonschema

from magweyl.bloch import Lattice, PeriodicPotential
from magweyl.defs import (ConfigError, DomainError, ExpressionError, DEFAULT_SCHEMA_PATH, GAP_FRACTION,
                          HERMITICITY_TOL, REMAINDER_FLOOR, MagWeylError)
from magweyl.expressions import phase_space_expression, position_expression
from magweyl.geometry import GaugeTransform, MagneticField, Parameters, VectorPotential, transversal_gauge
from magweyl.grid import GridSpec, sample_symbol

DEFAULT_CHECK_TOL = 1e-6
# plaquette curvature vs the sum-over-states formula, relative
CURVATURE_SPREAD = 0.05


def get_logger():
    return logging.getLogger(__name__)


def load_schema(schema_path=DEFAULT_SCHEMA_PATH):
    with open(schema_path, 'r') as f:
        return json.load(f)


def _json_path(error):
    return '/'.join(str(p) for p in error.absolute_path) or '<root>'


def parse_config(text, schema=None, source='<config>'):
    """Decode and validate a config document, returns the plain dict."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(e.msg, context='%s:%d:%d' % (source, e.lineno, e.colno))
    schema = load_schema() if schema is None else schema
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        first = errors[0]
        for e in errors[1:]:
            get_logger().debug('Config %s: %s: %s', source, _json_path(e), e.message)
        raise ConfigError(first.message, context='%s: %s' % (source, _json_path(first)))
    return data


class ExperimentConfig:
    """ Validated experiment description with builders for the objects each
        command needs.
    """

    def __init__(self, data, source='<config>'):
        self.data = data
        self.source = source

    @classmethod
    def load(cls, path, schema_path=DEFAULT_SCHEMA_PATH):
        try:
            with open(path, 'r') as f:
                text = f.read()
        except OSError as e:
            raise ConfigError(str(e), context=path)
        return cls(parse_config(text, load_schema(schema_path), source=path), source=path)

    def __repr__(self):
        return 'ExperimentConfig(%s, command=%s)' % (self.source, self.command)

    @property
    def command(self):
        return self.data['command']

    def section(self, name):
        return self.data.get(name, {})

    def require(self, name):
        if name not in self.data:
            raise ConfigError("section '%s' is required by command '%s'" % (name, self.command), context=self.source)
        return self.data[name]

    def _context(self, path):
        return '%s: %s' % (self.source, path)

    @property
    def dimension(self):
        if 'grid' in self.data:
            return self.data['grid']['dims']
        if 'lattice' in self.data:
            return len(self.data['lattice']['basis'])
        if 'flux' in self.data:
            return len(self.data['flux']['triangles'][0][0])
        return 1

    def params(self, eps=None, lam=None):
        section = self.section('params')
        try:
            return Parameters(section.get('eps', 1.0) if eps is None else eps,
                              section.get('lambda', 1.0) if lam is None else lam)
        except DomainError as e:
            raise ConfigError(str(e), context=self._context('params'))

    def grid(self, momentum_scale=1.0):
        section = self.require('grid')
        try:
            return GridSpec(section['dims'], float(section['half_length']), section['points'], momentum_scale)
        except DomainError as e:
            raise ConfigError(str(e), context=self._context('grid'))

    def field(self):
        section = self.section('field')
        try:
            return MagneticField(self.dimension, section.get('b12'))
        except ExpressionError as e:
            raise ConfigError(str(e), context=self._context('field/b12'))
        except DomainError as e:
            raise ConfigError(str(e), context=self._context('field'))

    def potential(self, field=None):
        """Vector potential generating the configured field."""
        field = self.field() if field is None else field
        section = self.section('gauge')
        if section.get('kind', 'transversal') == 'transversal':
            return transversal_gauge(field)
        comps = section.get('components')
        if not comps or len(comps) != self.dimension:
            raise ConfigError('explicit gauge needs %d components' % self.dimension, context=self._context('gauge'))
        try:
            potential = VectorPotential(self.dimension, comps, gauge='explicit')
        except ExpressionError as e:
            raise ConfigError(str(e), context=self._context('gauge/components'))
        try:
            potential.check_field(field)
        except DomainError as e:
            raise ConfigError(str(e), context=self._context('gauge'))
        return potential

    def gauge_transform(self):
        if 'chi' not in self.data:
            return None
        try:
            return GaugeTransform(self.dimension, position_expression(self.data['chi'], self.dimension))
        except ExpressionError as e:
            raise ConfigError(str(e), context=self._context('chi'))

    def expression(self, name):
        symbols = self.section('symbols')
        if name not in symbols:
            raise ConfigError("symbol '%s' is not defined" % name, context=self._context('symbols'))
        try:
            return phase_space_expression(symbols[name], self.dimension)
        except ExpressionError as e:
            raise ConfigError(str(e), context=self._context('symbols/%s' % name))

    def symbol(self, name, grid):
        return sample_symbol(self.expression(name), grid, label=name)

    def sweep(self, name, default=None):
        values = self.section('sweep').get(name, default)
        if values is None:
            raise ConfigError("sweep list '%s' is required by command '%s'" % (name, self.command),
                              context=self._context('sweep'))
        return list(values)

    def lattice(self):
        section = self.require('lattice')
        try:
            return Lattice(section['basis'], section.get('bz_points', 16))
        except DomainError as e:
            raise ConfigError(str(e), context=self._context('lattice'))

    def periodic_potential(self, lattice):
        section = self.section('potential')
        table = {}
        for i, entry in enumerate(section.get('coefficients', [])):
            key = tuple(entry['m'])
            if key in table:
                raise ConfigError('duplicate label %s' % (key,), context=self._context('potential/coefficients/%d' % i))
            table[key] = complex(entry.get('re', 0.0), entry.get('im', 0.0))
        try:
            return PeriodicPotential(lattice, table, real=section.get('real', True))
        except DomainError as e:
            raise ConfigError(str(e), context=self._context('potential'))

    def phi(self):
        try:
            return position_expression(self.section('bloch').get('phi', 0), self.dimension)
        except ExpressionError as e:
            raise ConfigError(str(e), context=self._context('bloch/phi'))

    def tolerances(self):
        """Every tolerance a command may use, with config overrides applied."""
        values = {
            'gap_fraction': GAP_FRACTION,
            'remainder_floor': REMAINDER_FLOOR,
            'hermiticity': HERMITICITY_TOL,
            'curvature_spread': CURVATURE_SPREAD,
            'check': DEFAULT_CHECK_TOL,
        }
        values.update(self.section('tolerances'))
        return values


def load_config(path, schema_path=DEFAULT_SCHEMA_PATH):
    """Raises ConfigError for unreadable, malformed or schema-violating files."""
    try:
        return ExperimentConfig.load(path, schema_path)
    except MagWeylError:
        raise
    except jsonschema.exceptions.SchemaError as e:
        raise ConfigError('broken schema: %s' % e.message, context=schema_path)
