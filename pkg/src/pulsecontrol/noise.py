"""Classical stationary noise processes and their correlation functions.

Two processes with exponential autocorrelation ``sigma**2 * exp(-|tau|/t_c)``
are provided: an Ornstein-Uhlenbeck (Gaussian) process and a random telegraph
(two-level) process.  Trajectories are piecewise constant on a uniform grid;
the OU recursion is the exact discrete transition, so no step-size
extrapolation is needed for the sampled values themselves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.signal import lfilter

from .streams import substream

KINDS = ("ou", "rtn", "zero")
AXIS_INDEX = {"x": 0, "y": 1, "z": 2}

# Finest resolution accepted relative to the correlation time.
RESOLUTION = 20


class NoiseError(ValueError):
    pass


# -- correlation functions ----------------------------------------------------

def exponential_kernel(xi):
    return np.exp(-np.abs(xi))


def exponential_kernel_d2(xi):
    # Second derivative away from the cusp at 0.
    return np.exp(-np.abs(xi))


def exponential_kernel_integral(xi):
    """Antiderivative of exp(-|xi|) vanishing at 0."""
    return np.sign(xi) * -np.expm1(-np.abs(xi))


def _channel_label(c) -> tuple[int, str]:
    if isinstance(c, str):
        s = c.strip().lower()
        if s[:1] in AXIS_INDEX and (len(s) == 1 or s[1:].isdigit()):
            return (int(s[1:]) if len(s) > 1 else 0, s[0])
        raise NoiseError(f"bad channel label {c!r}")
    q, a = c
    a = str(a).lower()
    if a not in AXIS_INDEX:
        raise NoiseError(f"bad channel axis {a!r}")
    return int(q), a


@dataclass(frozen=True, eq=False)
class CorrelationSpec:
    """Matrix of correlation functions ``f_ab(xi)`` over noise channels.

    Every entry shares one normalized lag kernel: ``f_ab(xi) =
    covariance[a, b] * kernel(xi)``, with ``xi`` the lag in units of ``t_c``.
    Channels are ``(qubit, axis)`` pairs; single-qubit callers may use bare
    axis letters.
    """

    t_c: float
    channels: tuple
    covariance: np.ndarray
    kernel: Callable = exponential_kernel
    kernel_d2: Optional[Callable] = exponential_kernel_d2
    kernel_integral: Optional[Callable] = exponential_kernel_integral
    cross_terms: bool = True

    def __post_init__(self):
        chans = tuple(_channel_label(c) for c in self.channels)
        cov = np.array(self.covariance, dtype=float).reshape(len(chans), len(chans))
        if not np.allclose(cov, cov.T):
            raise NoiseError("covariance must be symmetric")
        if not self.cross_terms:
            cov = np.diag(np.diag(cov))
        cov.setflags(write=False)
        object.__setattr__(self, "channels", chans)
        object.__setattr__(self, "covariance", cov)

    def index(self, channel) -> int:
        label = _channel_label(channel)
        try:
            return self.channels.index(label)
        except ValueError:
            return -1

    def __call__(self, a, b, xi):
        i, j = self.index(a), self.index(b)
        if i < 0 or j < 0:
            return 0.0 * np.asarray(xi, dtype=float)
        return self.covariance[i, j] * self.kernel(np.asarray(xi, dtype=float))

    def second_derivative(self, xi, step: float = 1e-4):
        """``d^2 kernel / d xi^2``; central differences when no closed form is given."""
        xi = np.asarray(xi, dtype=float)
        if self.kernel_d2 is not None:
            return self.kernel_d2(xi)
        k = self.kernel
        return (k(xi + step) - 2.0 * k(xi) + k(xi - step)) / step**2

    @property
    def is_zero(self) -> bool:
        return not np.any(self.covariance)


def correlation(spec: CorrelationSpec, a, b, xi):
    """Return ``f_ab(xi)``; zero for channels absent from the spec."""
    return spec(a, b, xi)


# -- processes and grids --------------------------------------------------------

@dataclass(frozen=True)
class TimeGrid:
    dt: float
    n_steps: int

    def __post_init__(self):
        if not self.dt > 0:
            raise NoiseError("dt must be positive")
        if self.n_steps < 1:
            raise NoiseError("grid needs at least one step")

    @classmethod
    def covering(cls, t_total: float, dt: float) -> "TimeGrid":
        n = round(t_total / dt)
        if n < 1 or not math.isclose(n * dt, t_total, rel_tol=1e-9, abs_tol=1e-12 * dt):
            raise NoiseError(f"t_total={t_total} is not a multiple of dt={dt}")
        return cls(float(dt), int(n))

    @property
    def t_total(self) -> float:
        return self.dt * self.n_steps

    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.n_steps)

    def refined(self, factor: int = 2) -> "TimeGrid":
        return TimeGrid(self.dt / factor, self.n_steps * factor)


@dataclass(frozen=True)
class NoiseProcess:
    """Stationary zero-mean noise on the axes of each qubit.

    Parameters
    ----------
    kind : {"ou", "rtn", "zero"}
    sigma : float
        Amplitude (angular frequency); the zero-lag variance is ``sigma**2``.
    t_c : float
        Correlation time.
    axes : str
        Noisy axes, e.g. ``"z"`` or ``"xyz"``; the same axes on every qubit.
    n_qubits : int
    mixing : tuple of tuples, optional
        Square matrix applied to the independent channel streams, for
        cross-axis or cross-qubit correlated noise.
    """

    kind: str = "ou"
    sigma: float = 1.0
    t_c: float = 1.0
    axes: str = "z"
    n_qubits: int = 1
    mixing: Optional[tuple] = field(default=None)

    def __post_init__(self):
        kind = self.kind.lower()
        if kind not in KINDS:
            raise NoiseError(f"unknown noise kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        axes = set(self.axes.lower()) if self.axes else set()
        if any(a not in AXIS_INDEX for a in axes):
            raise NoiseError(f"bad axes {self.axes!r}")
        axes = "".join(sorted(axes, key="xyz".index))
        object.__setattr__(self, "axes", axes)
        if self.n_qubits not in (1, 2, 3):
            raise NoiseError("n_qubits must be 1, 2 or 3")
        if kind != "zero":
            if not (np.isfinite(self.sigma) and self.sigma > 0):
                raise NoiseError("sigma must be positive")
            if not (np.isfinite(self.t_c) and self.t_c > 0):
                raise NoiseError("t_c must be positive")
        if self.mixing is not None:
            m = np.array(self.mixing, dtype=float)
            n = len(self.channels)
            if m.shape != (n, n) or not np.all(np.isfinite(m)):
                raise NoiseError(f"mixing matrix must be finite and {n}x{n}")
            object.__setattr__(self, "mixing", tuple(tuple(float(v) for v in row) for row in m))

    @property
    def channels(self) -> tuple:
        return tuple((q, a) for q in range(self.n_qubits) for a in self.axes)

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero" or not self.axes

    def mixing_matrix(self) -> np.ndarray:
        n = len(self.channels)
        return np.eye(n) if self.mixing is None else np.array(self.mixing)

    def correlation_spec(self) -> CorrelationSpec:
        n = len(self.channels)
        if self.is_zero:
            cov = np.zeros((n, n))
        else:
            m = self.mixing_matrix()
            cov = self.sigma**2 * (m @ m.T)
        return CorrelationSpec(self.t_c, self.channels, cov, cross_terms=self.mixing is not None)

    def check_grid(self, dt: float) -> None:
        if not dt > 0:
            raise NoiseError("dt must be positive")
        if not self.is_zero and dt > self.t_c / RESOLUTION * (1 + 1e-9):
            raise NoiseError(f"dt={dt} too coarse: need dt <= t_c/{RESOLUTION} = {self.t_c / RESOLUTION}")


@dataclass(frozen=True, eq=False)
class NoiseTrajectory:
    """One sampled realization; ``values[c, k]`` holds channel ``c`` on step ``k``."""

    grid: TimeGrid
    channels: tuple
    values: np.ndarray

    def channel(self, label) -> np.ndarray:
        return self.values[self.channels.index(_channel_label(label))]


def _independent_streams(process: NoiseProcess, n_steps: int, dt: float, seed: int,
                         indices: Sequence[int]) -> np.ndarray:
    chans = process.channels
    out = np.empty((len(indices), len(chans), n_steps))
    if process.kind == "ou":
        a = math.exp(-dt / process.t_c)
        b = process.sigma * math.sqrt(-math.expm1(-2.0 * dt / process.t_c))
        for i, traj in enumerate(indices):
            for c, (q, axis) in enumerate(chans):
                out[i, c] = substream(seed, traj, "noise", q, AXIS_INDEX[axis]).standard_normal(n_steps)
        out[..., 0] *= process.sigma
        out[..., 1:] *= b
        return lfilter([1.0], [1.0, -a], out, axis=-1)
    # random telegraph: equiprobable start, flip with probability (1 - e^{-dt/t_c})/2
    q_flip = -0.5 * math.expm1(-dt / process.t_c)
    for i, traj in enumerate(indices):
        for c, (q, axis) in enumerate(chans):
            u = substream(seed, traj, "noise", q, AXIS_INDEX[axis]).random(n_steps)
            start = np.where(u[0] < 0.5, -1.0, 1.0)
            flips = np.concatenate(([0], np.cumsum(u[1:] < q_flip)))
            out[i, c] = process.sigma * start * (1 - 2 * (flips & 1))
    return out


def sample_block(process: NoiseProcess, grid: TimeGrid, seed: int,
                 indices: Sequence[int]) -> np.ndarray:
    """Sample trajectories ``indices``; returns shape (n, n_channels, n_steps)."""
    process.check_grid(grid.dt)
    n_chan = len(process.channels)
    if process.is_zero:
        return np.zeros((len(indices), n_chan, grid.n_steps))
    vals = _independent_streams(process, grid.n_steps, grid.dt, seed, indices)
    if process.mixing is not None:
        vals = np.einsum("ij,njk->nik", process.mixing_matrix(), vals)
    return vals


def sample_trajectory(process: NoiseProcess, grid: TimeGrid, seed: int, index: int = 0) -> NoiseTrajectory:
    """Sample the realization with trajectory index ``index`` of ``process``."""
    if seed is None:
        raise NoiseError("an explicit seed is required")
    values = sample_block(process, grid, seed, [index])[0]
    values.setflags(write=False)
    return NoiseTrajectory(grid, process.channels, values)


@dataclass(frozen=True)
class AutocorrelationEstimate:
    lags: np.ndarray
    values: np.ndarray
    stderr: np.ndarray


def empirical_autocorrelation(trajectories, lags: Sequence[int], channel=None) -> AutocorrelationEstimate:
    """Stationary autocorrelation estimate averaged over time origins and trajectories.

    Parameters
    ----------
    trajectories : sequence of NoiseTrajectory, or array (n_traj, n_steps)
    lags : sequence of int
        Lags in grid steps.
    channel : channel label, optional
        Channel to analyse when trajectories carry several.

    The mean is known to be zero, so products are not re-centred and the
    per-trajectory estimator is unbiased.  Standard errors come from the
    spread of per-trajectory estimates.
    """
    if isinstance(trajectories, np.ndarray):
        data = np.atleast_2d(trajectories)
    else:
        data = np.array([t.values[0] if channel is None else t.channel(channel) for t in trajectories])
    if data.shape[0] < 2:
        raise NoiseError("need at least two trajectories")
    lags = np.asarray(lags, dtype=int)
    n = data.shape[1]
    if np.any(lags < 0) or np.any(lags >= n):
        raise NoiseError("lags must lie in [0, n_steps)")
    per_traj = np.empty((data.shape[0], len(lags)))
    for j, k in enumerate(lags):
        per_traj[:, j] = np.einsum("ij,ij->i", data[:, : n - k], data[:, k:]) / (n - k)
    values = per_traj.mean(axis=0)
    stderr = per_traj.std(axis=0, ddof=1) / math.sqrt(data.shape[0])
    return AutocorrelationEstimate(lags, values, stderr)
