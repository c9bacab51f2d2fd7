# SPDX-License-Identifier: GPL-2.0-or-later

import os

# ******* Grids ************************************
DEFAULT_POINTS_1D = 64
DEFAULT_POINTS_2D = 32
MIN_POINTS = 8
MAX_DIMENSION = 2

# ******* Quadrature *******************************
# Gauss-Legendre nodes for segment circulations and the transversal gauge
DEFAULT_LINE_NODES = 16
# per-axis nodes of the collapsed tensor rule on the triangle
DEFAULT_AREA_NODES = 8
# segments evaluated per vectorized block
QUADRATURE_CHUNK = 4096

# ******* Orders and caps **************************
MAX_FLUX_ORDER = 6
MAX_EXPANSION_ORDER = 4
MAX_LAMBDA_ORDER = 3
MAX_MINIMAL_SUBSTITUTION_ORDER = 2

# ******* Tolerances *******************************
HERMITICITY_TOL = 1e-8
OFF_GRID_TOL = 1e-9
ANTISYMMETRY_TOL = 1e-12
CURL_TOL = 1e-6
CURL_STEP = 1e-4
# relative discrepancy allowed between the two gauges of a product
GAUGE_TOL = 1e-8
# relative discrepancy between <v, Op(f) u> and the phase-space average
EXPECTATION_TOL = 1e-8
# Nyquist content above which grid products are flagged as under-resolved
RESOLUTION_TOL = 1e-6
GAP_FRACTION = 1e-3
SINGULAR_FLOW_COND = 1e12
LINK_OVERLAP_MIN = 1e-6
# relative floor below which remainders are treated as roundoff plateau
REMAINDER_FLOOR = 1e-13
DEFAULT_DT = 1e-3

# ******* CLI **************************************
EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_NUMERICAL_FAILURE = 3

DEFAULT_SCHEMA_PATH = os.path.normpath(
    os.path.join(
        os.path.dirname(os.path.realpath(__file__)),
        "data",
        "experiment-config-schema.json"
    )
)


class MagWeylError(RuntimeError):
    pass


class GridMismatchError(MagWeylError):
    pass


class NonFiniteSampleError(MagWeylError):

    def __init__(self, message, nodes=()):
        super(NonFiniteSampleError, self).__init__(message)
        self.nodes = list(nodes)


class DomainError(MagWeylError):
    pass


class CapabilityError(MagWeylError):
    pass


class OffGridTranslationError(MagWeylError):
    pass


class NonHermitianError(MagWeylError):
    pass


class GaugeError(MagWeylError):
    pass


class CrossCheckError(MagWeylError):
    pass


class TrajectoryError(MagWeylError):

    def __init__(self, message, last_valid_time=0.0):
        super(TrajectoryError, self).__init__(message)
        self.last_valid_time = last_valid_time


class EscapeError(MagWeylError):

    def __init__(self, message, nodes=()):
        super(EscapeError, self).__init__(message)
        self.nodes = list(nodes)


class GapViolationError(MagWeylError):

    def __init__(self, message, k_points=()):
        super(GapViolationError, self).__init__(message)
        self.k_points = list(k_points)


class SingularFlowError(MagWeylError):
    pass


class IncommensurateSupercellError(MagWeylError):
    pass


class ConfigError(MagWeylError):

    def __init__(self, message, context=''):
        super(ConfigError, self).__init__(message)
        self.context = context

    def __str__(self):
        msg = super(ConfigError, self).__str__()
        if self.context:
            return '%s: %s' % (self.context, msg)
        return msg


class ExpressionError(ConfigError):
    pass
