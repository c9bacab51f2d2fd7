# SPDX-License-Identifier: GPL-2.0-or-later

"""Magnetic Hamiltonian flows, Heisenberg evolution and the Egorov defect.

The classical equations of motion are

    dx/dt = grad_xi h,    dxi/dt = -grad_x h + lambda B(x) grad_xi h,

integrated with fixed-step RK4 over many initial points at once.
"""

import dataclasses
import logging

import numpy as np
import scipy.linalg

from magweyl.defs import CapabilityError, DomainError, EscapeError, TrajectoryError, DEFAULT_DT
from magweyl.expressions import Expression, phase_space_expression
from magweyl.geometry import MagneticField
from magweyl.grid import SymbolField, derivative_values, sample_symbol
from magweyl.quantizer import OperatorKernel, operator_norm, quantize


def get_logger():
    return logging.getLogger(__name__)


@dataclasses.dataclass
class Trajectory:
    times: np.ndarray
    points: np.ndarray
    energies: np.ndarray

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0):
            raise DomainError('trajectory time stamps must increase strictly')

    @property
    def positions(self):
        d = self.points.shape[-1] // 2
        return self.points[:, :d]

    @property
    def momenta(self):
        d = self.points.shape[-1] // 2
        return self.points[:, d:]

    def records(self):
        return [[t] + list(p) + [e] for t, p, e in zip(self.times, self.points, self.energies)]


class HamiltonianGradient:
    """ Value and phase-space gradient of h at scattered points.

        Analytic sources are differentiated symbolically, bare grid samples
        through spectral derivatives and trigonometric interpolation.
    """

    def __init__(self, h, dimension):
        self.dimension = dimension
        if isinstance(h, SymbolField):
            self._field = h
            source = h.expression
        else:
            self._field = None
            source = h if isinstance(h, Expression) else phase_space_expression(h, dimension)
        self.source = source
        if source is not None:
            self._grad = [source.diff(i) for i in range(2 * dimension)]
        else:
            grid = h.grid
            self._grad = []
            for axis in range(2 * dimension):
                orders = [0] * (2 * dimension)
                orders[axis] = 1
                self._grad.append(h.with_values(derivative_values(h.values, grid, tuple(orders))))

    def value(self, points):
        if self.source is not None:
            return np.real(self.source(*points.T))
        return np.real(self._field.evaluate(points))

    def __call__(self, points):
        """Gradient (dh/dx, dh/dxi) at points of shape (M, 2d)."""
        if self.source is not None:
            cols = [np.real(g(*points.T)) for g in self._grad]
        else:
            cols = [np.real(g.evaluate(points)) for g in self._grad]
        grad = np.stack(cols, axis=-1)
        return grad[:, :self.dimension], grad[:, self.dimension:]


def _velocity(gradient, field, lam):
    d = gradient.dimension

    def rhs(state):
        gx, gxi = gradient(state)
        dxi = -gx
        if d == 2 and lam != 0.0 and not field.is_zero:
            b = field.b12_values(state[:, :d])
            dxi = dxi + lam * np.stack([b * gxi[:, 1], -b * gxi[:, 0]], axis=-1)
        return np.concatenate([gxi, dxi], axis=-1)

    return rhs


def _steps(t, dt):
    if not dt > 0:
        raise DomainError('time step must be positive, got %r' % (dt,))
    count = int(np.ceil(abs(t) / dt - 1e-12)) if t else 0
    return count, (t / count if count else 0.0)


def integrate_rk4(rhs, state, t, dt, record=None):
    count, step = _steps(t, dt)
    for i in range(count):
        k1 = rhs(state)
        k2 = rhs(state + 0.5 * step * k1)
        k3 = rhs(state + 0.5 * step * k2)
        k4 = rhs(state + step * k3)
        new = state + step / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(new)):
            raise TrajectoryError('non-finite state after %d steps' % i, last_valid_time=i * step)
        state = new
        if record is not None:
            record((i + 1) * step, state)
    return state


def _field_of(field, dimension):
    return MagneticField(dimension) if field is None else field


def magnetic_flow(h, field, lam, x0, xi0, t, dt=DEFAULT_DT):
    """Single trajectory from (x0, xi0) up to time t."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    xi0 = np.atleast_1d(np.asarray(xi0, dtype=float))
    d = x0.size
    gradient = HamiltonianGradient(h, d)
    rhs = _velocity(gradient, _field_of(field, d), lam)
    times, points = [0.0], [np.concatenate([x0, xi0])]

    def record(time, state):
        times.append(time)
        points.append(state[0].copy())

    integrate_rk4(rhs, points[0][None, :], t, dt, record)
    points = np.asarray(points)
    return Trajectory(np.asarray(times), points, gradient.value(points))


def flow_map(h, field, lam, points, t, dt=DEFAULT_DT):
    """Endpoints phi_t(X) for every row X of ``points`` (shape (M, 2d))."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    d = points.shape[1] // 2
    gradient = h if isinstance(h, HamiltonianGradient) else HamiltonianGradient(h, d)
    return integrate_rk4(_velocity(gradient, _field_of(field, d), lam), points, t, dt)


def flow_jacobian(h, field, lam, point, t, dt=DEFAULT_DT, step=1e-5):
    """Central-difference Jacobian of phi_t at one point."""
    point = np.asarray(point, dtype=float)
    n = point.size
    offsets = np.concatenate([point + step * np.eye(n), point - step * np.eye(n)])
    ends = flow_map(h, field, lam, offsets, t, dt)
    return ((ends[:n] - ends[n:]) / (2 * step)).T


def _wrap_phase_space(points, grid):
    d = grid.dimension
    out = points.copy()
    out[:, :d] = grid.wrap(points[:, :d])
    period = grid.momentum_period
    out[:, d:] = (points[:, d:] + 0.5 * period) % period - 0.5 * period
    return out


def classical_pullback(f, h, field, lam, t, dt=DEFAULT_DT, strict=False):
    """(f o phi_t) on f's grid: every node flows for time t and f is read at
    the endpoint wrapped onto the phase-space torus."""
    grid = f.grid
    d = grid.dimension
    if t == 0:
        return f.with_values(f.values, label='%s o phi_0' % f.label)
    mesh = grid.phase_mesh()
    nodes = np.stack([m.ravel() for m in mesh], axis=-1)
    ends = flow_map(h, field, lam, nodes, t, dt)
    outside = np.any(np.abs(ends[:, d:]) > 0.5 * grid.momentum_period, axis=1)
    if np.any(outside):
        flagged = [tuple(p) for p in nodes[outside][:5]]
        msg = '%d of %d trajectories left the momentum box' % (np.count_nonzero(outside), nodes.shape[0])
        if strict:
            raise EscapeError(msg, flagged)
        get_logger().debug('%s, first from %s', msg, flagged[0])
    values = f.evaluate(_wrap_phase_space(ends, grid)).reshape(grid.phase_shape)
    return SymbolField(grid, values, order=f.order, label='%s o phi_%g' % (f.label, t))


def _as_symbol(h, grid):
    if isinstance(h, SymbolField):
        grid.check_same(h.grid)
        return h
    return sample_symbol(h, grid, label=str(h))


def heisenberg_evolve(h, f, potential, params, t):
    """exp(i t H / eps) Op(f) exp(-i t H / eps) with H = Op(h)."""
    grid = f.grid
    hamiltonian = quantize(_as_symbol(h, grid), potential, params)
    hamiltonian.check_hermitian()
    observable = quantize(f, potential, params)
    if t == 0:
        return observable
    matrix = 0.5 * (hamiltonian.matrix + hamiltonian.matrix.conj().T)
    energies, vectors = scipy.linalg.eigh(matrix)
    propagator = (vectors * np.exp(-1j * t * energies / params.eps)) @ vectors.conj().T
    evolved = propagator.conj().T @ observable.matrix @ propagator
    return OperatorKernel(grid, evolved, observable.gauge, params)


def egorov_defect(h, f, potential, params, t, field=None, dt=DEFAULT_DT):
    """Operator-norm distance between Heisenberg evolution and the
    quantized classical pullback."""
    d = f.grid.dimension
    if field is None and d == 2 and potential is not None and not potential.is_zero:
        raise CapabilityError('the classical flow needs the magnetic field of the given potential')
    quantum = heisenberg_evolve(h, f, potential, params, t)
    pulled = classical_pullback(f, h, field, params.lam, t, dt)
    classical = quantize(pulled, potential, params)
    defect = operator_norm(quantum.with_matrix(quantum.matrix - classical.matrix))
    get_logger().info('Egorov defect eps=%g t=%g: %.3e', params.eps, t, defect)
    return defect
