# SPDX-License-Identifier: GPL-2.0-or-later

# Shared base for magweyl numerical tests

import os
import re
import sys
import logging
import unittest
import importlib

import numpy as np

ROOT_PATH = os.path.realpath(os.path.join(os.path.dirname(__file__), '..', '..'))
if ROOT_PATH not in sys.path:
    sys.path.insert(0, ROOT_PATH)

from magweyl.grid import GridSpec  # noqa: E402

# tests decorated with 'slow_test' run only with the 'full' profile
PROFILE_QUICK = 'quick'
PROFILE_FULL = 'full'

DEFAULT_SEED = 20240611


def get_logger():
    """ Returns logger for this module
    """
    return logging.getLogger(__name__)


class RunInfo:
    """ Run-wide settings filled by the runner.
    """
    def __init__(self):
        self.profile = os.environ.get('MAGWEYL_TEST_PROFILE', PROFILE_QUICK)
        self.seed = int(os.environ.get('MAGWEYL_TEST_SEED', DEFAULT_SEED))
        self.out_dir = ''

    @property
    def full(self):
        return self.profile == PROFILE_FULL


run_info = RunInfo()


def slow_test(reason=None):
    if reason is None:
        reason = "runs with the '%s' profile only" % PROFILE_FULL
    return unittest.skipIf(not run_info.full, reason)


def grid_1d(points=64, half_length=10.0, eps=1.0):
    return GridSpec(1, half_length, points, eps)


def grid_2d(points=16, half_length=6.0, eps=1.0):
    return GridSpec(2, half_length, points, eps)


class MagWeylTestsBunch(unittest.BaseTestSuite):
    """ Custom suite which keeps track of the test modules so the runner can
        configure their loggers.
    """

    def __init__(self, tests=()):
        self.modules = {}
        super(MagWeylTestsBunch, self).__init__(tests)

    def addTest(self, test):
        """ Adds test
        """
        if isinstance(test, unittest.BaseTestSuite):
            for t in test:
                self.addTest(t)
            return
        get_logger().debug('Add test %s', test)
        super(MagWeylTestsBunch, self).addTest(test)
        if test.__module__ not in self.modules:
            get_logger().debug('Add test module %s', test.__module__)
            self.modules[test.__module__] = importlib.import_module(test.__module__)

    def exclude(self, patterns):
        for test in self:
            if not isinstance(test, MagWeylTestsBase):
                continue
            for pattern in patterns:
                parts = pattern.split('.')
                if len(parts) == 1:
                    pattern = '%s.*.*' % parts[0]
                elif len(parts) == 2:
                    pattern = '%s.%s.*' % (parts[0], parts[1])
                re_pattern = '^%s$' % pattern.replace('.', r'\.').replace('*', '.*')
                if re.match(re_pattern, test.id()):
                    test.skip_reason = 'Excluded by pattern'
                    break
        return self


class MagWeylTestsBase(unittest.TestCase):
    """ Base class for all tests
    """

    def __init__(self, methodName='runTest'):
        super(MagWeylTestsBase, self).__init__(methodName)
        self.skip_reason = ''

    def setUp(self):
        super(MagWeylTestsBase, self).setUp()
        if self.skip_reason != '':
            self.skipTest(self.skip_reason)
        self.rng = np.random.default_rng(run_info.seed)

    def assertAllClose(self, actual, expected, atol, msg=None):
        diff = float(np.max(np.abs(np.asarray(actual) - np.asarray(expected))))
        if not diff <= atol:
            self.fail(self._formatMessage(msg, 'max deviation %.3e exceeds %.1e' % (diff, atol)))

    def assertSmall(self, value, atol, msg=None):
        value = float(np.max(np.abs(value)))
        if not value <= atol:
            self.fail(self._formatMessage(msg, '%.3e exceeds %.1e' % (value, atol)))

    def assertSlope(self, slope, expected, tol, msg=None):
        if not abs(slope - expected) <= tol:
            self.fail(self._formatMessage(msg, 'fitted slope %.3f is not %.2f +- %.2f' % (slope, expected, tol)))

    def assertRelClose(self, actual, expected, rtol, msg=None):
        actual, expected = float(actual), float(expected)
        if not abs(actual - expected) <= rtol * abs(expected):
            self.fail(self._formatMessage(msg, '%.6e differs from %.6e by more than %g relative'
                                          % (actual, expected, rtol)))
