"""Second-order (in the noise) error rates, with and without pulse control.

For a Hamiltonian ``sum_a sigma^a Gamma_a(t)`` with zero-mean noise, the loss
of fidelity to second order is::

    p = sum_ab <D sigma^a D sigma^b> int_0^t int_0^t <Gamma_a(t1) Gamma_b(t2)> dt1 dt2

which for stationary correlations ``f_ab(t1 - t2)`` reduces to
``2 sum_ab <..> int_0^t int_0^t1 f_ab(t2/t_c) dt2 dt1``.  Under pulse control
the noise in the toggling frame is ``s_a(t) Gamma_a(t)`` with the piecewise
signs of the frame, and the double integral splits into per-interval blocks
that depend only on the interval offset.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate

from .noise import CorrelationSpec
from .pauli import NOISE_AXES, TogglingFrame, pauli_matrix

EPSABS = 1e-12
EPSREL = 1e-9

# Weights of the curvature expansion (the z weight is of order t_delta/t_c and taken as 0).
DELTA_WEIGHTS = {"x": -1.0, "y": -0.5, "z": 0.0}


class QuadratureError(ArithmeticError):
    pass


class FrameError(ValueError):
    pass


def _quad(f, a, b, points=None, epsabs=EPSABS, epsrel=EPSREL, limit=400):
    if a == b:
        return 0.0
    pts = None
    if points:
        pts = sorted({p for p in points if a < p < b})
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(f, a, b, points=pts or None, epsabs=epsabs, epsrel=epsrel, limit=limit)
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(str(exc)) from exc
    if err > max(epsabs, epsrel * abs(val)):
        raise QuadratureError(f"quadrature error estimate {err:.2e} above tolerance for value {val:.6e}")
    return val


# -- moments ----------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class StateMoments:
    """``<D sigma^a D sigma^b>`` over channels ``(qubit, axis)``."""

    channels: tuple
    matrix: np.ndarray

    def __getitem__(self, pair):
        a, b = (_label(c) for c in pair)
        return self.matrix[self.channels.index(a), self.channels.index(b)]


def _label(c):
    if isinstance(c, str):
        return (0, c.lower())
    return (int(c[0]), str(c[1]).lower())


def _operator(channel, n_qubits):
    from functools import reduce
    q, axis = channel
    mats = [np.eye(2)] * n_qubits
    mats = list(mats)
    mats[q] = pauli_matrix(axis)
    return reduce(np.kron, mats)


def state_moments(rho, channels=None) -> StateMoments:
    """Covariance ``<s_a s_b> - <s_a><s_b>`` of Pauli operators in state ``rho``.

    ``rho`` may be a state vector or a density matrix; channels default to all
    axes of every qubit.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim == 1:
        rho = np.outer(rho, rho.conj()) / np.vdot(rho, rho).real
    n_qubits = int(round(math.log2(rho.shape[0])))
    if channels is None:
        channels = [(q, a) for q in range(n_qubits) for a in NOISE_AXES]
    channels = tuple(_label(c) for c in channels)
    ops = [_operator(c, n_qubits) for c in channels]
    means = np.array([np.trace(rho @ o) for o in ops])
    m = np.array([[np.trace(rho @ oa @ ob) for ob in ops] for oa in ops]) - np.outer(means, means)
    return StateMoments(channels, m)


# -- effective correlations ---------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class EffectiveCorrelation:
    """Correlations of the sign-modulated noise ``s_a(t) Gamma_a(t)``.

    Periodic in the control period ``len(frame.pulses) * t_delta``.
    """

    spec: CorrelationSpec
    frame: TogglingFrame
    t_delta: float

    def signs(self, t, axis: str) -> np.ndarray:
        k = np.floor(np.asarray(t, dtype=float) / self.t_delta + 1e-12).astype(int) % self.frame.intervals
        return self.frame.axis_signs(axis)[k]

    def __call__(self, a, b, t, t_prime):
        a, b = _label(a), _label(b)
        lag = (np.asarray(t, dtype=float) - np.asarray(t_prime, dtype=float)) / self.spec.t_c
        return self.signs(t, a[1]) * self.signs(t_prime, b[1]) * self.spec(a, b, lag)


def effective_correlations(spec: CorrelationSpec, frame: TogglingFrame, t_delta: float) -> EffectiveCorrelation:
    if not frame.periodic:
        raise FrameError("the toggling frame does not return to the identity after one control period")
    if not t_delta > 0:
        raise ValueError("t_delta must be positive")
    return EffectiveCorrelation(spec, frame, t_delta)


def _lag_block(g, T: float, m: int) -> float:
    """``int_0^T int_0^T g(m T + u - v) du dv`` as a single weighted integral."""
    return _quad(lambda w: (T - abs(w)) * g(m * T + w), -T, T, points=(0.0, -m * T))


def _sign_correlation(sa: np.ndarray, sb: np.ndarray) -> np.ndarray:
    """``c[m + n - 1] = sum_{j - k = m} sa[j] sb[k]``."""
    return np.correlate(sa.astype(float), sb.astype(float), mode="full")


def _kernel_pairs(moments: StateMoments, spec: CorrelationSpec) -> list:
    """``(weight, a, b)`` for every pair with nonzero moment and covariance."""
    out = []
    for i, a in enumerate(moments.channels):
        for j, b in enumerate(moments.channels):
            ia, ib = spec.index(a), spec.index(b)
            if ia < 0 or ib < 0:
                continue
            w = moments.matrix[i, j] * spec.covariance[ia, ib]
            if w != 0:
                out.append((w, a, b))
    return out


def _check_real(total: complex) -> float:
    if abs(total.imag) > 1e-12 * abs(total.real) + 1e-15:
        raise ArithmeticError(f"error rate has an imaginary part {total.imag:.3e}")
    return float(total.real)


def _stationary_block(spec: CorrelationSpec, t: float) -> float:
    """``int_0^t int_0^t1 kernel(t2/t_c) dt2 dt1``."""
    tc = spec.t_c
    if spec.kernel_integral is not None:
        return _quad(lambda t1: tc * float(spec.kernel_integral(t1 / tc)), 0.0, t)

    def inner(t1):
        return tc * _quad(lambda xi: float(spec.kernel(xi)), 0.0, t1 / tc)

    return _quad(inner, 0.0, t)


def second_order_error(moments: StateMoments, spec, t: float) -> float:
    """Second-order error rate after time ``t``.

    ``spec`` is a :class:`CorrelationSpec` (free evolution) or an
    :class:`EffectiveCorrelation` (pulse control, ``t`` a multiple of the
    control period).
    """
    if not t > 0:
        raise ValueError("t must be positive")
    if isinstance(spec, EffectiveCorrelation):
        return _controlled_error_value(moments, spec, t)
    pairs = _kernel_pairs(moments, spec)
    if not pairs:
        return 0.0
    block = _stationary_block(spec, t)
    total = 2.0 * sum(w for w, _, _ in pairs) * block
    return _check_real(complex(total))


def _interval_count(t: float, eff: EffectiveCorrelation) -> int:
    period = eff.t_delta * eff.frame.intervals
    n_periods = round(t / period)
    if n_periods < 1 or not math.isclose(n_periods * period, t, rel_tol=1e-9):
        raise ValueError(f"t={t} is not a multiple of the control period {period}")
    return n_periods * eff.frame.intervals


def _controlled_error_value(moments: StateMoments, eff: EffectiveCorrelation, t: float) -> float:
    pairs = _kernel_pairs(moments, eff.spec)
    if not pairs:
        return 0.0
    n = _interval_count(t, eff)
    T, tc = eff.t_delta, eff.spec.t_c
    kernel = eff.spec.kernel
    lags = np.arange(-(n - 1), n)
    blocks = np.array([_lag_block(lambda u: float(kernel(u / tc)), T, int(m)) for m in lags])
    signs = {a: np.tile(eff.frame.axis_signs(a), n // eff.frame.intervals) for a in NOISE_AXES}
    total = 0j
    for w, a, b in pairs:
        total += w * float(np.dot(_sign_correlation(signs[a[1]], signs[b[1]]), blocks))
    return _check_real(complex(total))


@dataclass(frozen=True)
class ControlledError:
    p_controlled: float
    p_free: float

    @property
    def ratio(self) -> float:
        return self.p_controlled / self.p_free


def controlled_error(moments: StateMoments, spec: CorrelationSpec, frame: TogglingFrame,
                     t_delta: float, t: float) -> ControlledError:
    """Second-order error with and without pulse control at the same ``t``."""
    eff = effective_correlations(spec, frame, t_delta)
    p_c = second_order_error(moments, eff, t)
    p = second_order_error(moments, spec, t)
    return ControlledError(p_c, p)


# -- curvature constant ---------------------------------------------------------------------

@dataclass(frozen=True)
class AlphaBreakdown:
    alpha: float
    weights: dict
    numerator: float
    denominator: float
    empirical_alpha: float
    ratio: float


def alpha_constant(moments: StateMoments, spec: CorrelationSpec, frame: TogglingFrame,
                   t_delta: float, t: float) -> AlphaBreakdown:
    """Curvature estimate of the suppression constant, with an empirical cross-check.

    The estimate is the ratio of ``sum <..> D_a D_b int_0^t int_0^{t1/t_c}
    f''(xi) dxi dt1`` to the same sum with ``f`` and unit weights, using
    ``D = (-1, -1/2, 0)`` for (x, y, z).  The empirical value is
    ``(p_c/p) / (t_delta/t_c)**2`` from :func:`controlled_error`.
    """
    if t_delta / spec.t_c > 0.1 + 1e-12:
        raise ValueError("the curvature estimate needs t_delta/t_c <= 0.1")
    tc = spec.t_c

    # finite-difference curvature carries ~eps/step**2 roundoff, so it cannot meet the default tolerance
    tol = dict(epsabs=EPSABS, epsrel=EPSREL) if spec.kernel_d2 is not None else dict(epsabs=1e-7, epsrel=1e-6)

    def nested(fn):
        return _quad(lambda t1: _quad(lambda xi: float(fn(xi)), 0.0, t1 / tc, **tol), 0.0, t, **tol)

    pairs = _kernel_pairs(moments, spec)
    curv = nested(spec.second_derivative)
    base = nested(spec.kernel)
    num = sum(w * DELTA_WEIGHTS[a[1]] * DELTA_WEIGHTS[b[1]] for w, a, b in pairs) * curv
    den = sum(w for w, _, _ in pairs) * base
    num, den = _check_real(complex(num)), _check_real(complex(den))
    if den == 0:
        raise ZeroDivisionError("vanishing denominator: no noise couples to the state")
    ce = controlled_error(moments, spec, frame, t_delta, t)
    emp = ce.ratio / (t_delta / tc) ** 2
    return AlphaBreakdown(num / den, dict(DELTA_WEIGHTS), num, den, emp, ce.ratio)


# -- gates: second order in the interaction picture of a fixed Hamiltonian --------------------

def gate_second_order_error(spec: CorrelationSpec, hamiltonian: np.ndarray, t: float,
                            frame: Optional[TogglingFrame] = None, t_delta: Optional[float] = None) -> float:
    """Entanglement-fidelity loss (maximally mixed input) under a constant Hamiltonian.

    The noise operators are taken in the interaction picture of
    ``hamiltonian``; with ``frame`` the collective-pulse signs are applied too,
    which requires the pulses to commute with ``hamiltonian``.
    """
    h = np.asarray(hamiltonian, dtype=complex)
    d = h.shape[0]
    n_qubits = int(round(math.log2(d)))
    chans = spec.channels
    ops = np.array([_operator(c, n_qubits) for c in chans])
    evals, vecs = np.linalg.eigh(h)
    # operators in the eigenbasis of h
    ops_e = vecs.conj().T[None] @ ops @ vecs[None]
    cov = spec.covariance
    tc = spec.t_c

    def weight(u: float) -> np.ndarray:
        ph = np.exp(-1j * evals * u)
        # Tr(s_a U s_b U^dag)/d with U diagonal in this basis
        m = ops_e * ph[None, :, None] * ph.conj()[None, None, :]
        return np.einsum("aij,bji->ab", ops_e, m).real / d

    def g(u: float) -> np.ndarray:
        return cov * weight(u) * float(spec.kernel(u / tc))

    if frame is None:
        val, err = integrate.quad_vec(lambda u: (t - abs(u)) * g(u), -t, t, epsabs=EPSABS, epsrel=EPSREL,
                                      points=(0.0,))
        return float(np.sum(val))

    eff = effective_correlations(spec, frame, t_delta)
    n = _interval_count(t, eff)
    T = t_delta
    total = 0.0
    signs = {a: np.tile(frame.axis_signs(a), n // frame.intervals) for a in NOISE_AXES}
    for m in range(-(n - 1), n):
        pts = sorted({p for p in (0.0, -m * T) if -T < p < T})
        blk, _ = integrate.quad_vec(lambda w: (T - abs(w)) * g(m * T + w), -T, T, epsabs=EPSABS,
                                    epsrel=EPSREL, points=pts or None)
        for i, a in enumerate(chans):
            for j, b in enumerate(chans):
                if blk[i, j] != 0:
                    sc = _sign_correlation(signs[a[1]], signs[b[1]])[m + n - 1]
                    total += sc * blk[i, j]
    return float(total)
