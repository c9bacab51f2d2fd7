# SPDX-License-Identifier: GPL-2.0-or-later

"""Periodic problems: Zak transform, plane-wave Bloch bands, Berry data,
the first-order effective Hamiltonian of an isolated band and its
semiclassical dynamics.

The Brillouin zone is sampled on the offset grid k = sum_j theta_j e*_j with
theta_j = (m_j + 1/2)/n - 1/2. Eigenvectors are kept in the periodic gauge
across the zone boundary: the coefficients at k + e*_l are those at k
shifted by one plane wave.
"""

import dataclasses
import functools
import itertools
import logging

import numpy as np
import scipy.linalg

from magweyl import utils
from magweyl.defs import (CapabilityError, DomainError, GapViolationError, IncommensurateSupercellError,
                          SingularFlowError, GAP_FRACTION, LINK_OVERLAP_MIN, SINGULAR_FLOW_COND, DEFAULT_DT,
                          MAX_DIMENSION)
from magweyl.expressions import Expression, position_expression
from magweyl.grid import WaveFunction
from magweyl.semiclassics import Trajectory, integrate_rk4


def get_logger():
    return logging.getLogger(__name__)


class Lattice:
    """ Bravais lattice spanned by the rows of ``basis`` with dual rows
        e*_j, e_j . e*_k = 2 pi delta_jk, and a BZ sampling of ``bz_points``
        per axis.
    """

    def __init__(self, basis, bz_points=16):
        basis = np.atleast_2d(np.asarray(basis, dtype=float))
        d = basis.shape[0]
        if basis.shape != (d, d) or d not in range(1, MAX_DIMENSION + 1):
            raise DomainError('lattice basis must be a 1x1 or 2x2 matrix, got shape %s' % (basis.shape,))
        if abs(np.linalg.det(basis)) < 1e-12:
            raise DomainError('lattice basis is degenerate')
        if int(bz_points) < 4 or int(bz_points) % 2:
            raise DomainError('need an even number >= 4 of k-points per axis, got %r' % (bz_points,))
        self.basis = basis
        self.dual = 2.0 * np.pi * np.linalg.inv(basis).T
        if np.max(np.abs(self.basis @ self.dual.T - 2.0 * np.pi * np.eye(d))) > 1e-12:
            raise DomainError('dual basis fails the duality relation')
        self.bz_points = int(bz_points)

    @classmethod
    def square(cls, dimension, spacing=1.0, bz_points=16):
        return cls(spacing * np.eye(dimension), bz_points)

    def __repr__(self):
        return 'Lattice(%s, bz_points=%d)' % (self.basis.tolist(), self.bz_points)

    @property
    def dimension(self):
        return self.basis.shape[0]

    @property
    def cell_volume(self):
        return float(abs(np.linalg.det(self.basis)))

    @property
    def bz_volume(self):
        return float(abs(np.linalg.det(self.dual)))

    @property
    def is_cubic(self):
        a = self.basis[0, 0]
        return np.allclose(self.basis, a * np.eye(self.dimension))

    def fractional_grid(self):
        """theta of the BZ nodes, shape (n,)*d + (d,)."""
        axis = (np.arange(self.bz_points) + 0.5) / self.bz_points - 0.5
        return np.stack(np.meshgrid(*([axis] * self.dimension), indexing='ij'), axis=-1)

    def k_grid(self):
        return self.fractional_grid() @ self.dual

    def to_fractional(self, k):
        return np.asarray(k, dtype=float) @ np.linalg.inv(self.dual)

    @property
    def plaquette_area(self):
        return float(np.linalg.det(self.dual / self.bz_points))

    def interpolate(self, values, k, offset=0.5):
        """Trigonometric interpolant of BZ-periodic samples at k (shape (M, d)).

        ``values`` has the k axes first; nodes sit at (m + offset)/n - 1/2.
        """
        n, d = self.bz_points, self.dimension
        theta = np.atleast_2d(self.to_fractional(k)) - offset / n
        values = np.asarray(values)
        tail = values.shape[d:]
        flat = values.reshape((n,) * d + (-1,))
        out = []
        for c in range(flat.shape[-1]):
            out.append(utils.trig_interpolate(flat[..., c], (1.0,) * d, theta))
        return np.stack(out, axis=-1).reshape((theta.shape[0],) + tail)

    def gradient(self, values):
        """Cartesian k-gradient of BZ-periodic samples; appends an axis of size d."""
        n, d = self.bz_points, self.dimension
        mult = utils.derivative_multiplier(n, 1.0, 1)
        parts = []
        for axis in range(d):
            shape = [1] * np.ndim(values)
            shape[axis] = n
            coeffs = utils.centered_fft(values, axis)
            parts.append(utils.centered_ifft(mult.reshape(shape) * coeffs, axis))
        theta_grad = np.stack(parts, axis=-1)
        if np.isrealobj(values):
            theta_grad = theta_grad.real
        return theta_grad @ np.linalg.inv(self.dual).T


@functools.lru_cache(maxsize=16)
def plane_wave_indices(dimension, cutoff):
    """Integer labels m of the plane waves G = m . e*, |m_j| <= cutoff."""
    if cutoff < 1:
        raise DomainError('plane-wave cutoff must be >= 1, got %r' % (cutoff,))
    labels = np.array(list(itertools.product(range(-cutoff, cutoff + 1), repeat=dimension)), dtype=int)
    labels.setflags(write=False)
    return labels


def _shifted_index(dimension, cutoff, axis):
    """Position of m + unit_axis for every label, -1 outside the cutoff set."""
    labels = plane_wave_indices(dimension, cutoff)
    lookup = {tuple(m): i for i, m in enumerate(labels)}
    unit = np.eye(dimension, dtype=int)[axis]
    return np.array([lookup.get(tuple(m + unit), -1) for m in labels])


class PeriodicPotential:
    """ Lattice-periodic potential V(y) = sum_m Vhat(m) exp(i (m . e*) . y).
    """

    def __init__(self, lattice, coefficients=None, real=True):
        self.lattice = lattice
        self.real = real
        self.coefficients = {}
        for key, value in (coefficients or {}).items():
            key = tuple(int(v) for v in np.atleast_1d(key))
            if len(key) != lattice.dimension:
                raise DomainError('potential label %s does not match dimension %d' % (key, lattice.dimension))
            self.coefficients[key] = complex(value)
        if real:
            for key, value in self.coefficients.items():
                partner = self.coefficients.get(tuple(-v for v in key), 0.0)
                if abs(partner - np.conj(value)) > 1e-12:
                    raise DomainError('real potential needs Vhat(-m) = conj Vhat(m), fails at %s' % (key,))

    def __repr__(self):
        return 'PeriodicPotential(%s)' % self.coefficients

    @property
    def is_zero(self):
        return all(v == 0 for v in self.coefficients.values())

    def coefficient(self, label):
        return self.coefficients.get(tuple(label), 0.0)

    def matrix(self, cutoff):
        labels = plane_wave_indices(self.lattice.dimension, cutoff)
        out = np.zeros((labels.shape[0], labels.shape[0]), dtype=complex)
        diff = labels[:, None, :] - labels[None, :, :]
        for key, value in self.coefficients.items():
            out[np.all(diff == np.asarray(key), axis=-1)] += value
        return out

    def __call__(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.zeros(points.shape[0], dtype=complex)
        for key, value in self.coefficients.items():
            out += value * np.exp(1j * points @ (np.asarray(key) @ self.lattice.dual))
        return out.real if self.real else out


def fiber_hamiltonian(k, potential, cutoff):
    """H(k)_GG' = 1/2 |k + G|^2 delta_GG' + Vhat(G - G')."""
    lattice = potential.lattice
    labels = plane_wave_indices(lattice.dimension, cutoff)
    momenta = np.atleast_1d(np.asarray(k, dtype=float)) + labels @ lattice.dual
    return np.diag(0.5 * np.sum(momenta ** 2, axis=-1)).astype(complex) + potential.matrix(cutoff)


def _fix_gauge(vectors, reference=None):
    """Rotate columns so the coefficient at ``reference`` (default: the
    largest one) is real positive."""
    if reference is None:
        reference = np.argmax(np.abs(vectors), axis=0)
    pivot = vectors[reference, np.arange(vectors.shape[1])]
    return vectors * (np.conj(pivot) / np.abs(pivot)), reference


@dataclasses.dataclass
class BlochSolution:
    lattice: Lattice
    potential: PeriodicPotential
    cutoff: int
    n_bands: int
    k_points: np.ndarray
    energies: np.ndarray
    vectors: np.ndarray
    gauge_index: np.ndarray
    gap_violations: list = dataclasses.field(default_factory=list)

    def band(self, index):
        if not 0 <= index < self.n_bands:
            raise DomainError('band %r outside the %d computed bands' % (index, self.n_bands))
        return self.energies[..., index]

    def gap_threshold(self, fraction=GAP_FRACTION):
        spread = float(np.max(self.energies[..., :self.n_bands]) - np.min(self.energies[..., 0]))
        return fraction * max(spread, 1.0)

    def check_gap(self, band, fraction=GAP_FRACTION):
        threshold = self.gap_threshold(fraction)
        e = self.energies
        gap = np.full(e.shape[:-1], np.inf)
        if band > 0:
            gap = np.minimum(gap, e[..., band] - e[..., band - 1])
        if band + 1 < e.shape[-1]:
            gap = np.minimum(gap, e[..., band + 1] - e[..., band])
        bad = gap < threshold
        if np.any(bad):
            points = [tuple(p) for p in self.k_points[bad][:8]]
            raise GapViolationError('band %d closes its gap (< %.3e) at %d k-points'
                                    % (band, threshold, np.count_nonzero(bad)), points)

    def records(self):
        d = self.lattice.dimension
        flat_k = self.k_points.reshape(-1, d)
        flat_e = self.energies[..., :self.n_bands].reshape(-1, self.n_bands)
        return [list(k) + list(e) for k, e in zip(flat_k, flat_e)]


def band_structure(potential, cutoff, n_bands, lattice=None, gap_fraction=GAP_FRACTION):
    """Dense eigensolve of H(k) on the BZ grid."""
    lattice = potential.lattice if lattice is None else lattice
    if lattice is not potential.lattice and not np.allclose(lattice.basis, potential.lattice.basis):
        raise DomainError('potential and lattice disagree')
    k_points = lattice.k_grid()
    shape = k_points.shape[:-1]
    size = plane_wave_indices(lattice.dimension, cutoff).shape[0]
    if not 1 <= n_bands <= size:
        raise DomainError('n_bands must lie in [1, %d], got %r' % (size, n_bands))
    energies = np.empty(shape + (size,))
    vectors = np.empty(shape + (size, size), dtype=complex)
    gauge = np.empty(shape + (size,), dtype=int)
    get_logger().info('Band structure: %d k-points, %d plane waves', int(np.prod(shape)), size)
    for idx in np.ndindex(shape):
        e, v = scipy.linalg.eigh(fiber_hamiltonian(k_points[idx], potential, cutoff))
        vectors[idx], gauge[idx] = _fix_gauge(v)
        energies[idx] = e
    solution = BlochSolution(lattice, potential, cutoff, n_bands, k_points, energies, vectors, gauge)
    threshold = solution.gap_threshold(gap_fraction)
    for b in range(min(n_bands, size - 1)):
        closing = np.diff(energies[..., b:b + 2], axis=-1)[..., 0] < threshold
        if np.any(closing):
            solution.gap_violations.append(b)
            get_logger().warning('Bands %d and %d come closer than %.3e at %d k-points',
                                 b, b + 1, threshold, np.count_nonzero(closing))
    return solution


# ******* Berry data ******************************

@dataclasses.dataclass
class BerryData:
    lattice: Lattice
    band: int
    connection: np.ndarray
    curvature: object
    rammal_wilkinson: np.ndarray
    kubo_curvature: object = None

    def omega(self, k):
        """Omega_12 at k, interpolated from the plaquette centers (zeros in d=1)."""
        k = np.atleast_2d(k)
        if self.curvature is None:
            return np.zeros(k.shape[0])
        return np.real(self.lattice.interpolate(self.curvature, k, offset=1.0))

    def omega_matrix(self, k):
        k = np.atleast_2d(k)
        d = self.lattice.dimension
        out = np.zeros((k.shape[0], d, d))
        if d == 2:
            w = self.omega(k)
            out[:, 0, 1] = w
            out[:, 1, 0] = -w
        return out

    def records(self):
        d = self.lattice.dimension
        k = self.lattice.k_grid().reshape(-1, d)
        a = self.connection.reshape(-1, d)
        m = self.rammal_wilkinson.reshape(-1, d * d)
        nodes = self.lattice.fractional_grid().reshape(-1, d) @ self.lattice.dual
        omega = self.omega(nodes) if d == 2 else np.zeros(k.shape[0])
        return [list(kk) + list(aa) + [w] + list(mm) for kk, aa, w, mm in zip(k, a, omega, m)]


def _velocity_elements(k, solution, vectors):
    """<n| d_l H |m> for all band pairs, shape (d, size, size)."""
    lattice = solution.lattice
    labels = plane_wave_indices(lattice.dimension, solution.cutoff)
    momenta = np.asarray(k) + labels @ lattice.dual
    return np.stack([vectors.conj().T @ (momenta[:, l, None] * vectors) for l in range(lattice.dimension)])


def _sum_over_states(solution, band):
    """Kubo curvature and Rammal-Wilkinson term at every BZ node."""
    d = solution.lattice.dimension
    shape = solution.k_points.shape[:-1]
    kubo = np.zeros(shape)
    rw = np.zeros(shape + (d, d))
    for idx in np.ndindex(shape):
        e = solution.energies[idx]
        vel = _velocity_elements(solution.k_points[idx], solution, solution.vectors[idx])
        delta = e - e[band]
        others = np.arange(e.size) != band
        pair = np.einsum('lm,jm->ljm', vel[:, band, others], vel[:, others, band])
        rw[idx] = np.real(0.5j * np.sum(pair / delta[others], axis=-1))
        if d == 2:
            kubo[idx] = -2.0 * np.imag(np.sum(pair[0, 1] / delta[others] ** 2))
    return kubo, rw


def _connection(solution, band, step=1e-5):
    """A_l = i <u | d_l u> by central differences in the gauge of the node."""
    lattice = solution.lattice
    d = lattice.dimension
    shape = solution.k_points.shape[:-1]
    out = np.zeros(shape + (d,))
    for idx in np.ndindex(shape):
        k = solution.k_points[idx]
        u = solution.vectors[idx][:, band]
        ref = solution.gauge_index[idx][band]
        for l in range(d):
            shifted = []
            for sign in (1.0, -1.0):
                kk = k + sign * step * np.eye(d)[l]
                _, v = scipy.linalg.eigh(fiber_hamiltonian(kk, solution.potential, solution.cutoff))
                col, _ = _fix_gauge(v[:, band:band + 1], np.array([ref]))
                shifted.append(col[:, 0])
            out[idx + (l,)] = -np.imag(np.vdot(u, (shifted[0] - shifted[1]) / (2 * step)))
    return out


def _links(solution, band):
    """Normalized overlaps <u(k)|u(k + delta_l)> per axis, periodic gauge at the edge."""
    d, n = solution.lattice.dimension, solution.lattice.bz_points
    u = solution.vectors[..., band]
    links = []
    for axis in range(d):
        ahead = np.roll(u, -1, axis=axis)
        # the last node links to the first one translated by e*_axis
        shift = _shifted_index(d, solution.cutoff, axis)
        edge = [slice(None)] * d
        edge[axis] = n - 1
        first = np.take(u, 0, axis=axis)
        moved = np.where(shift >= 0, first[..., np.maximum(shift, 0)], 0.0)
        ahead[tuple(edge)] = moved
        overlap = np.sum(np.conj(u) * ahead, axis=-1)
        weak = np.abs(overlap) < LINK_OVERLAP_MIN
        if np.any(weak):
            points = [tuple(p) for p in solution.k_points[weak][:8]]
            raise GapViolationError('vanishing link overlap along axis %d at %d k-points'
                                    % (axis, np.count_nonzero(weak)), points)
        links.append(overlap / np.abs(overlap))
    return links


def plaquette_curvature(solution, band):
    """Omega_12 on the plaquettes (indexed by their lower-left node)."""
    u1, u2 = _links(solution, band)
    loop = u1 * np.roll(u2, -1, axis=0) * np.conj(np.roll(u1, -1, axis=1)) * np.conj(u2)
    return -np.angle(loop) / solution.lattice.plaquette_area


def berry_data(solution, band, step=1e-5):
    solution.check_gap(band)
    d = solution.lattice.dimension
    get_logger().info('Berry data for band %d', band)
    kubo, rw = _sum_over_states(solution, band)
    curvature = plaquette_curvature(solution, band) if d == 2 else None
    return BerryData(solution.lattice, band, _connection(solution, band, step), curvature, rw,
                     kubo if d == 2 else None)


def kubo_curvature(solution, band):
    """Omega_12 = -2 Im sum_{m != n} <n|d_1 H|m><m|d_2 H|n> / (E_m - E_n)^2 at the BZ nodes."""
    if solution.lattice.dimension != 2:
        raise CapabilityError('Berry curvature has no components in d=1')
    solution.check_gap(band)
    return _sum_over_states(solution, band)[0]


def chern_number(berry):
    if berry.curvature is None:
        return 0
    total = float(np.sum(berry.curvature)) * berry.lattice.plaquette_area / (2.0 * np.pi)
    return int(np.rint(total))


# ******* effective dynamics ******************************

def _position_function(phi, dimension):
    if phi is None:
        return position_expression(0, dimension)
    return phi if isinstance(phi, Expression) else position_expression(phi, dimension)


class EffectiveHamiltonian:
    """ h0 = E_b(k) + phi(r), the first-order correction h1 and the
        semiclassical Hamiltonian h_sc = E_b + phi - eps lambda B_lj M_lj.
    """

    def __init__(self, solution, band, field, phi, berry, params):
        solution.check_gap(band)
        self.solution = solution
        self.lattice = solution.lattice
        self.band = band
        self.field = field
        self.params = params
        self.berry = berry
        d = self.lattice.dimension
        self.phi = _position_function(phi, d)
        self._phi_grad = [self.phi.diff(i) for i in range(d)]
        self._b12_grad = [field.b12.diff(i) for i in range(d)] if d == 2 else []
        self._energy = solution.band(band)
        self._energy_grad = self.lattice.gradient(self._energy)
        self._rw12 = berry.rammal_wilkinson[..., 0, 1] if d == 2 else None
        self._rw12_grad = self.lattice.gradient(self._rw12) if d == 2 else None

    def _coords(self, r):
        r = np.atleast_2d(np.asarray(r, dtype=float))
        return r, [r[:, i] for i in range(r.shape[1])]

    def energy(self, k):
        return np.real(self.lattice.interpolate(self._energy, k))

    def energy_gradient(self, k):
        return np.real(self.lattice.interpolate(self._energy_grad, k))

    def potential(self, r):
        r, coords = self._coords(r)
        return np.real(np.broadcast_to(self.phi(*coords), r.shape[:1]))

    def potential_gradient(self, r):
        r, coords = self._coords(r)
        return np.stack([np.real(np.broadcast_to(g(*coords), r.shape[:1])) for g in self._phi_grad], axis=-1)

    def _bm(self, r, k):
        """sum_lj B_lj M_lj = 2 B_12 M_12 (zero in d=1)."""
        if self.lattice.dimension == 1:
            return np.zeros(np.atleast_2d(k).shape[0])
        b = self.field.b12_values(np.atleast_2d(r))
        return 2.0 * b * np.real(self.lattice.interpolate(self._rw12, k))

    def h0(self, r, k):
        return self.energy(k) + self.potential(r)

    def h1(self, r, k):
        lam = self.params.lam
        d = self.lattice.dimension
        force = -self.potential_gradient(r)
        if d == 2:
            b = self.field.b12_values(np.atleast_2d(r))
            grad_e = self.energy_gradient(k)
            force = force + lam * np.stack([b * grad_e[:, 1], -b * grad_e[:, 0]], axis=-1)
        connection = np.real(self.lattice.interpolate(self.berry.connection, k))
        return -np.sum(force * connection, axis=-1) - lam * self._bm(r, k)

    def h_sc(self, r, k):
        return self.h0(r, k) - self.params.eps * self.params.lam * self._bm(r, k)

    def gradient(self, r, k):
        """(grad_r h_sc, grad_k h_sc) at matching rows of r and k."""
        scale = self.params.eps * self.params.lam
        grad_r = self.potential_gradient(r)
        grad_k = self.energy_gradient(k)
        if self.lattice.dimension == 2 and scale != 0.0 and not self.field.is_zero:
            r2 = np.atleast_2d(r)
            m12 = np.real(self.lattice.interpolate(self._rw12, k))
            db = np.stack([np.real(np.broadcast_to(g(r2[:, 0], r2[:, 1]), r2.shape[:1])) for g in self._b12_grad],
                          axis=-1)
            grad_r = grad_r - scale * 2.0 * db * m12[:, None]
            dm = np.real(self.lattice.interpolate(self._rw12_grad, k))
            grad_k = grad_k - scale * 2.0 * self.field.b12_values(r2)[:, None] * dm
        return grad_r, grad_k


def effective_hamiltonian(solution, band, field, phi, berry, params):
    return EffectiveHamiltonian(solution, band, field, phi, berry, params)


def _flow_rhs(gradient, field, berry, params, d):
    def rhs(state):
        r, k = state[:, :d], state[:, d:]
        grad_r, grad_k = gradient(r, k)
        m = state.shape[0]
        system = np.zeros((m, 2 * d, 2 * d))
        system[:, :d, :d] = params.lam * field.matrix(r)
        system[:, :d, d:] = -np.eye(d)
        system[:, d:, :d] = np.eye(d)
        system[:, d:, d:] = params.eps * berry.omega_matrix(k)
        cond = np.linalg.cond(system)
        if np.any(cond > SINGULAR_FLOW_COND):
            raise SingularFlowError('modified symplectic matrix is singular (condition %.3e)' % np.max(cond))
        rhs_vec = np.concatenate([grad_r, grad_k], axis=-1)
        return np.linalg.solve(system, rhs_vec[..., None])[..., 0]
    return rhs


def macroscopic_flow(effective, field, berry, params, r0, k0, t, dt=DEFAULT_DT):
    """Integrate  lambda B r' - k' = grad_r h,  r' + eps Omega k' = grad_k h."""
    r0 = np.atleast_1d(np.asarray(r0, dtype=float))
    k0 = np.atleast_1d(np.asarray(k0, dtype=float))
    d = r0.size
    rhs = _flow_rhs(effective.gradient, field, berry, params, d)
    times, points = [0.0], [np.concatenate([r0, k0])]

    def record(time, state):
        times.append(time)
        points.append(state[0].copy())

    integrate_rk4(rhs, points[0][None, :], t, dt, record)
    points = np.asarray(points)
    energies = effective.h_sc(points[:, :d], points[:, d:])
    return Trajectory(np.asarray(times), points, energies)


def position_bracket(field, berry, params, point, tau=1e-4):
    """{r_1, r_2} at a phase-space point, read off the velocity of r_1 under
    the flow generated by h = r_2 (equals eps Omega_12 for B = 0)."""
    point = np.asarray(point, dtype=float)
    d = point.size // 2
    if d != 2:
        raise CapabilityError('the position bracket needs d = 2')

    def generator(r, k):
        grad_r = np.zeros_like(np.atleast_2d(r))
        grad_r[:, 1] = 1.0
        return grad_r, np.zeros_like(np.atleast_2d(k))

    rhs = _flow_rhs(generator, field, berry, params, d)
    end = integrate_rk4(rhs, point[None, :], tau, tau)
    return float((end[0, 0] - point[0]) / tau)


@dataclasses.dataclass
class HallCurrent:
    current: np.ndarray
    chern_term: np.ndarray
    velocity_mean: np.ndarray


def hall_current(solution, band, field, phi, berry, params, position=None):
    """j = 1/|BZ| int (Omega grad phi - lambda Omega B grad E_b) dk for a filled band."""
    solution.check_gap(band)
    lattice = solution.lattice
    d = lattice.dimension
    position = np.zeros((1, d)) if position is None else np.atleast_2d(position)
    effective = EffectiveHamiltonian(solution, band, field, phi, berry, params)
    grad_phi = effective.potential_gradient(position)[0]
    grad_e = effective._energy_grad.reshape(-1, d)
    velocity_mean = np.mean(grad_e, axis=0)
    if d == 1:
        zero = np.zeros(1)
        return HallCurrent(zero, zero.copy(), velocity_mean)
    nodes = lattice.k_grid().reshape(-1, d)
    omega = berry.omega(nodes)
    b = float(field.b12_values(position)[0])
    chern_term = np.mean(omega) * np.array([grad_phi[1], -grad_phi[0]])
    # Omega B = -Omega_12 B_12 on the identity
    magnetic = params.lam * b * np.mean(omega[:, None] * grad_e, axis=0)
    get_logger().debug('Hall current: Chern term %s, mean velocity %s', chern_term, velocity_mean)
    return HallCurrent(chern_term + magnetic, chern_term, velocity_mean)


# ******* Zak transform ******************************

@dataclasses.dataclass
class ZakFibers:
    grid: object
    cells: int
    k_points: np.ndarray
    values: np.ndarray


def _supercell(grid, lattice):
    if lattice.dimension != grid.dimension:
        raise DomainError('lattice dimension %d does not match grid dimension %d'
                          % (lattice.dimension, grid.dimension))
    if not lattice.is_cubic:
        raise CapabilityError('the Zak transform supports square lattices only')
    ratio = grid.period / lattice.basis[0, 0]
    cells = int(round(ratio))
    if cells < 1 or abs(ratio - cells) > 1e-9 or grid.points % cells:
        raise IncommensurateSupercellError('box of length %g holds %g cells on %d points'
                                           % (grid.period, ratio, grid.points))
    return cells, grid.points // cells


def _cell_layout(values, d, cells, per_cell):
    """Reshape position samples to axes (gamma_1..gamma_d, y_1..y_d)."""
    shape = []
    for _ in range(d):
        shape += [cells, per_cell]
    arr = values.reshape(shape)
    order = [2 * i for i in range(d)] + [2 * i + 1 for i in range(d)]
    return np.transpose(arr, order)


def zak_transform(psi, lattice, k_points=None):
    """(Z psi)(k, y) = sum_gamma exp(-i k.(y + gamma)) psi(y + gamma) over the
    cells of the supercell; k defaults to the points m/cells . e*."""
    grid = psi.grid
    d = grid.dimension
    cells, per_cell = _supercell(grid, lattice)
    if k_points is None:
        frac = np.stack(np.meshgrid(*([np.arange(cells) / cells] * d), indexing='ij'), axis=-1).reshape(-1, d)
        k_points = frac @ lattice.dual
    k_points = np.atleast_2d(np.asarray(k_points, dtype=float))
    layout = _cell_layout(psi.values, d, cells, per_cell)
    gammas = np.stack(np.meshgrid(*([np.arange(cells)] * d), indexing='ij'), axis=-1) @ lattice.basis
    y = grid.positions[:per_cell]
    ys = np.stack(np.meshgrid(*([y] * d), indexing='ij'), axis=-1)
    out = np.empty((k_points.shape[0],) + (per_cell,) * d, dtype=complex)
    for i, k in enumerate(k_points):
        phase_gamma = np.exp(-1j * gammas @ k)
        phase_y = np.exp(-1j * ys @ k)
        summed = np.tensordot(phase_gamma, layout, axes=(tuple(range(d)), tuple(range(d))))
        out[i] = phase_y * summed
    return ZakFibers(grid, cells, k_points, out)


def inverse_zak_transform(fibers, lattice):
    """psi(y + gamma) = cells^-d sum_k exp(i k.(y + gamma)) (Z psi)(k, y)."""
    grid = fibers.grid
    d = grid.dimension
    cells, per_cell = _supercell(grid, lattice)
    if fibers.k_points.shape[0] != cells ** d:
        raise IncommensurateSupercellError('expected %d fibers, got %d' % (cells ** d, fibers.k_points.shape[0]))
    gammas = np.stack(np.meshgrid(*([np.arange(cells)] * d), indexing='ij'), axis=-1) @ lattice.basis
    y = grid.positions[:per_cell]
    ys = np.stack(np.meshgrid(*([y] * d), indexing='ij'), axis=-1)
    layout = np.zeros((cells,) * d + (per_cell,) * d, dtype=complex)
    for k, fiber in zip(fibers.k_points, fibers.values):
        layout += np.multiply.outer(np.exp(1j * gammas @ k), np.exp(1j * ys @ k) * fiber)
    layout /= cells ** d
    order = []
    for i in range(d):
        order += [i, d + i]
    values = np.transpose(layout, order).reshape(grid.position_shape)
    return WaveFunction(grid, values, label='Zinv')


def fibered_norm(fibers):
    return float(np.sqrt(np.sum(np.abs(fibers.values) ** 2) * fibers.grid.cell_volume / fibers.cells ** fibers.grid.dimension))
