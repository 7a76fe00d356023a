"""Trajectory-level unitary evolution and Monte Carlo channel estimates.

Conventions: ``|0>`` is the +1 eigenstate of sigma_z and ``sigma_x|0> = |1>``;
qubit 0 is the most significant tensor factor.

Each trajectory's propagator is the time-ordered product of exact step
exponentials (noise held constant on a step) with pulse unitaries inserted at
their scheduled steps.  The product is formed as a pairwise tree over the
factor list, which keeps the arithmetic vectorized across trajectories and its
order independent of how trajectories are distributed over workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import reduce
from typing import Optional, Sequence

import numpy as np

from .noise import AXIS_INDEX, NoiseProcess, NoiseTrajectory, TimeGrid, sample_block
from .pauli import pauli_matrix
from .sequences import PulseSchedule, jitter_width
from .streams import substream

UNITARITY_TOL = 1e-10
# complex entries per block of factors; bounds memory, never affects results
_BLOCK_BUDGET = 1 << 21

_SIGMA = np.array([pauli_matrix(a) for a in "XYZ"])
_CK_PULSE = {"X": (0.0, -1j), "Y": (0.0, 1.0), "Z": (-1j, 0.0)}


class NumericalError(RuntimeError):
    pass


class ScheduleError(ValueError):
    pass


# -- states -------------------------------------------------------------------------

_KETS = {
    "0": [1, 0], "1": [0, 1],
    "+": [1, 1], "-": [1, -1],
    "+i": [1, 1j], "-i": [1, -1j],
}


def ket(label: str, n_qubits: int = 1) -> np.ndarray:
    """Product state from single-qubit labels, e.g. ``ket("+")`` or ``ket("0+")``."""
    parts = _split_labels(label)
    if len(parts) == 1 and n_qubits > 1:
        parts = parts * n_qubits
    vecs = [np.array(_KETS[p], dtype=complex) for p in parts]
    v = reduce(np.kron, vecs)
    return v / np.linalg.norm(v)


def _split_labels(label: str) -> list:
    out, i = [], 0
    while i < len(label):
        if label[i] in "+-" and label[i + 1:i + 2] == "i":
            out.append(label[i:i + 2])
            i += 2
        else:
            if label[i] not in _KETS:
                raise ValueError(f"unknown state label {label!r}")
            out.append(label[i])
            i += 1
    return out


def maximally_mixed(n_qubits: int = 1) -> np.ndarray:
    d = 2**n_qubits
    return np.eye(d, dtype=complex) / d


def density_matrix(state) -> np.ndarray:
    """Validated density matrix from a state vector, a matrix, or a ket label."""
    if isinstance(state, str):
        state = ket(state)
    arr = np.asarray(state, dtype=complex)
    if arr.ndim == 1:
        arr = arr / np.linalg.norm(arr)
        arr = np.outer(arr, arr.conj())
    d = arr.shape[0]
    if arr.shape != (d, d) or d not in (2, 4, 8):
        raise ValueError("density matrix must be 2^L x 2^L with L <= 3")
    if np.max(np.abs(arr - arr.conj().T)) > 1e-12:
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(arr) - 1) > 1e-12:
        raise ValueError("density matrix trace is not 1")
    if np.linalg.eigvalsh(arr).min() < -1e-10:
        raise ValueError("density matrix is not positive semidefinite")
    return arr


def _pure_vector(rho: np.ndarray) -> Optional[np.ndarray]:
    w, v = np.linalg.eigh(rho)
    if abs(w[-1] - 1) < 1e-12:
        return v[:, -1]
    return None


# -- single steps -----------------------------------------------------------------------

def noise_hamiltonian(coeffs) -> np.ndarray:
    """``sum_l sum_a coeffs[l, a] sigma_l^a`` for an (L, 3) coefficient array."""
    coeffs = np.atleast_2d(np.asarray(coeffs, dtype=float))
    L = coeffs.shape[0]
    d = 2**L
    h = np.zeros((d, d), dtype=complex)
    for l in range(L):
        for a in range(3):
            if coeffs[l, a]:
                h += coeffs[l, a] * embed(_SIGMA[a], l, L)
    return h


def embed(op: np.ndarray, qubit: int, n_qubits: int) -> np.ndarray:
    mats = [np.eye(2)] * n_qubits
    mats = list(mats)
    mats[qubit] = op
    return reduce(np.kron, mats)


def expm_hermitian(h: np.ndarray, dt: float) -> np.ndarray:
    """``exp(-i h dt)`` for (batched) Hermitian ``h`` via eigendecomposition."""
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * dt * w)[..., None, :]) @ np.swapaxes(v, -1, -2).conj()


def step_propagator(coeffs, dt: float, coupling: Optional[np.ndarray] = None) -> np.ndarray:
    """Exact propagator of a constant Hamiltonian over one step.

    Parameters
    ----------
    coeffs : array_like, shape (3,) or (L, 3)
        Per-qubit field ``a`` in ``H = sum a_alpha sigma^alpha``.
    dt : float
    coupling : ndarray, optional
        Extra Hermitian term (e.g. an exchange Hamiltonian) on the full space.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    coeffs = np.atleast_2d(np.asarray(coeffs, dtype=float))
    if coeffs.shape[0] == 1 and coupling is None:
        a, b = _ck_steps(coeffs[0, 0], coeffs[0, 1], coeffs[0, 2], dt)
        return _ck_to_matrix(np.asarray(a), np.asarray(b))
    h = noise_hamiltonian(coeffs)
    if coupling is not None:
        h = h + coupling
    return expm_hermitian(h, dt)


# Cayley-Klein pairs: U = [[a, -conj(b)], [b, conj(a)]] for U in SU(2).

def _ck_steps(cx, cy, cz, dt):
    r = np.sqrt(cx * cx + cy * cy + cz * cz)
    c = np.cos(r * dt)
    s = dt * np.sinc(r * dt / np.pi)  # sin(r dt)/r
    return c - 1j * s * cz, s * (cy - 1j * cx)


def _ck_to_matrix(a, b):
    out = np.empty(np.shape(a) + (2, 2), dtype=complex)
    out[..., 0, 0] = a
    out[..., 0, 1] = -np.conj(b)
    out[..., 1, 0] = b
    out[..., 1, 1] = np.conj(a)
    return out


def _ck_chain(a, b):
    """Time-ordered product of factors along axis 1 (later factors on the left)."""
    while a.shape[1] > 1:
        m = a.shape[1] // 2 * 2
        a1, b1 = a[:, 0:m:2], b[:, 0:m:2]
        a2, b2 = a[:, 1:m:2], b[:, 1:m:2]
        na = a2 * a1 - np.conj(b2) * b1
        nb = b2 * a1 + np.conj(a2) * b1
        if m < a.shape[1]:
            na = np.concatenate([na, a[:, m:]], axis=1)
            nb = np.concatenate([nb, b[:, m:]], axis=1)
        a, b = na, nb
    return a[:, 0], b[:, 0]


def _dense_chain(f):
    while f.shape[1] > 1:
        m = f.shape[1] // 2 * 2
        g = f[:, 1:m:2] @ f[:, 0:m:2]
        if m < f.shape[1]:
            g = np.concatenate([g, f[:, m:]], axis=1)
        f = g
    return f[:, 0]


# -- pulses ---------------------------------------------------------------------------------

def _physical_pulses(schedule: PulseSchedule):
    return [e for e in schedule.all_events() if e.axis != "I"]


def _pulse_draws(schedule: PulseSchedule, n_qubits: int, seed: int, indices):
    """Per-trajectory error draws, shape (n, n_pulses, n_qubits) each."""
    pulses = _physical_pulses(schedule)
    n, P = len(indices), len(pulses)
    if schedule.error_model == "none" or schedule.p0 == 0 or P == 0:
        return None
    u = np.empty((n, P, n_qubits))
    k = np.empty((n, P, n_qubits), dtype=np.int64)
    for i, traj in enumerate(indices):
        for q in range(n_qubits):
            rng = substream(seed, traj, "pulse", q)
            if schedule.error_model == "random_pauli_kick":
                u[i, :, q] = rng.random(P)
                k[i, :, q] = rng.integers(3, size=P)
            else:
                u[i, :, q] = rng.standard_normal(P)
    return u, k


def _single_qubit_pulses(schedule: PulseSchedule, draws, n: int):
    """CK factors of each physical pulse on qubit 0, shape (n, n_pulses)."""
    pulses = _physical_pulses(schedule)
    a = np.empty((n, len(pulses)), dtype=complex)
    b = np.empty((n, len(pulses)), dtype=complex)
    for j, e in enumerate(pulses):
        a[:, j], b[:, j] = _CK_PULSE[e.axis]
    if draws is None:
        return a, b
    u, k = draws[0][..., 0], draws[1][..., 0]
    if schedule.error_model == "rotation_angle_jitter":
        half = 0.5 * (np.pi + jitter_width(schedule.p0) * u)
        axes = np.array(["XYZ".index(e.axis) for e in pulses])
        n_vec = np.eye(3)[axes]
        s = np.sin(half)
        a = np.cos(half) - 1j * s * n_vec[:, 2]
        b = s * (n_vec[:, 1] - 1j * n_vec[:, 0])
        return a, b
    hit = u < schedule.p0
    ka = np.array([_CK_PULSE[c][0] for c in "XYZ"])[k]
    kb = np.array([_CK_PULSE[c][1] for c in "XYZ"])[k]
    na = ka * a - np.conj(kb) * b
    nb = kb * a + np.conj(ka) * b
    return np.where(hit, na, a), np.where(hit, nb, b)


def _dense_pulses(schedule: PulseSchedule, draws, n: int, n_qubits: int):
    """Collective pulse unitaries, shape (n, n_pulses, d, d)."""
    pulses = _physical_pulses(schedule)
    per_qubit = []
    for q in range(n_qubits):
        if draws is None:
            a, b = _single_qubit_pulses(schedule, None, n)
        else:
            a, b = _single_qubit_pulses(schedule, (draws[0][..., q:q + 1], draws[1][..., q:q + 1]), n)
        per_qubit.append(_ck_to_matrix(a, b))
    out = per_qubit[0]
    for m in per_qubit[1:]:
        d1, d2 = out.shape[-1], m.shape[-1]
        out = np.einsum("npab,npcd->npacbd", out, m).reshape(n, len(pulses), d1 * d2, d1 * d2)
    return out


# -- block evolution --------------------------------------------------------------------------

def _insert_positions(schedule: PulseSchedule):
    return np.array([e.step for e in _physical_pulses(schedule)], dtype=int)


def _evolve_block(values: np.ndarray, channels: Sequence, n_qubits: int, schedule: PulseSchedule,
                  gate=None, draws=None) -> np.ndarray:
    """Final propagators for a block of noise realizations, shape (n, d, d)."""
    n, _, steps = values.shape
    if steps != schedule.n_steps:
        raise ScheduleError(f"noise has {steps} steps but the schedule expects {schedule.n_steps}")
    dt = schedule.dt
    pos = _insert_positions(schedule)
    if n_qubits == 1 and gate is None:
        comp = np.zeros((3, n, steps))
        for c, (q, axis) in enumerate(channels):
            comp[AXIS_INDEX[axis]] += values[:, c]
        a, b = _ck_steps(comp[0], comp[1], comp[2], dt)
        if len(pos):
            pa, pb = _single_qubit_pulses(schedule, draws, n)
            a = np.insert(a, pos, pa, axis=1)
            b = np.insert(b, pos, pb, axis=1)
        a, b = _ck_chain(a, b)
        return _ck_to_matrix(a, b)

    d = 2**n_qubits
    h = np.zeros((n, steps, d, d), dtype=complex)
    if channels:
        ops = np.array([embed(_SIGMA[AXIS_INDEX[axis]], q, n_qubits) for q, axis in channels])
        h += np.einsum("nck,cij->nkij", values, ops)
    if gate is not None:
        h += gate.step_matrices(steps)[None]
    f = expm_hermitian(h, dt)
    if len(pos):
        p = _dense_pulses(schedule, draws, n, n_qubits)
        f = np.insert(f, pos, p, axis=1)
    return _dense_chain(f)


def _block_size(schedule: PulseSchedule, d: int) -> int:
    factors = schedule.n_steps + len(_physical_pulses(schedule))
    return int(max(8, min(4096, _BLOCK_BUDGET // (factors * d * d))))


def evolve_trajectory(noise: NoiseTrajectory, schedule: PulseSchedule, gate=None,
                      n_qubits: Optional[int] = None) -> np.ndarray:
    """Propagator of a single noise realization under ideal pulses."""
    if not math.isclose(noise.grid.dt, schedule.dt, rel_tol=1e-12):
        raise ScheduleError("noise grid and schedule use different steps")
    if n_qubits is None:
        n_qubits = gate.n_qubits if gate is not None else 1 + max((q for q, _ in noise.channels), default=0)
    u = _evolve_block(noise.values[None], noise.channels, n_qubits, schedule, gate)[0]
    check_unitary(u[None])
    return u


def unitarity_defect(u: np.ndarray) -> np.ndarray:
    """Frobenius norm of ``U^dagger U - I`` (an upper bound on the operator norm)."""
    d = u.shape[-1]
    g = np.swapaxes(u, -1, -2).conj() @ u - np.eye(d)
    return np.sqrt(np.sum(np.abs(g) ** 2, axis=(-2, -1)))


def check_unitary(u: np.ndarray) -> float:
    worst = float(np.max(unitarity_defect(u)))
    if not worst <= UNITARITY_TOL:
        raise NumericalError(f"propagator unitarity defect {worst:.3e} exceeds {UNITARITY_TOL}")
    return worst


def target_unitary(schedule: PulseSchedule, n_qubits: int = 1, gate=None) -> np.ndarray:
    """Noiseless propagator of the schedule with ideal pulses."""
    vals = np.zeros((1, 0, schedule.n_steps))
    return _evolve_block(vals, (), n_qubits, schedule, gate)[0]


def phase_distance(u: np.ndarray, w: np.ndarray) -> np.ndarray:
    """``min_phi ||u - e^{i phi} w||_F`` over a global phase, batched."""
    tr = np.einsum("...ij,...ij->...", w.conj(), u)
    phase = np.exp(1j * np.angle(tr))
    diff = u - phase[..., None, None] * w
    return np.sqrt(np.sum(np.abs(diff) ** 2, axis=(-2, -1)))


# -- statistics ---------------------------------------------------------------------------------

@dataclass
class RunningStats:
    """Count, mean and centred second moment; merged with the pairwise update."""

    count: int = 0
    mean: np.ndarray | float = 0.0
    m2: np.ndarray | float = 0.0

    @classmethod
    def of(cls, x: np.ndarray) -> "RunningStats":
        x = np.asarray(x)
        mean = x.mean(axis=0)
        return cls(x.shape[0], mean, np.sum(np.abs(x - mean) ** 2, axis=0))

    def merge(self, other: "RunningStats") -> "RunningStats":
        if self.count == 0:
            return other
        if other.count == 0:
            return self
        n = self.count + other.count
        delta = other.mean - self.mean
        mean = self.mean + delta * (other.count / n)
        m2 = self.m2 + other.m2 + np.abs(delta) ** 2 * (self.count * other.count / n)
        return RunningStats(n, mean, m2)

    @property
    def variance(self):
        return self.m2 / (self.count - 1) if self.count > 1 else 0.0 * self.m2

    @property
    def stderr(self):
        return np.sqrt(self.variance / self.count) if self.count else 0.0


def _tree_merge(items: list) -> RunningStats:
    while len(items) > 1:
        merged = [items[i].merge(items[i + 1]) for i in range(0, len(items) - 1, 2)]
        if len(items) % 2:
            merged.append(items[-1])
        items = merged
    return items[0]


@dataclass
class ChannelEstimate:
    """Monte Carlo estimate of a noise-averaged channel acting on one input.

    ``fidelity`` compares the averaged output with the ideal output of the
    schedule (the input itself when the pulses compose to the identity); it is
    ``None`` for mixed inputs.  ``infidelity`` and ``ent_infidelity`` are
    averaged per-trajectory losses, computed without the ``1 - F`` cancellation.
    """

    n_trajectories: int
    rho_in: np.ndarray
    rho_out: np.ndarray
    rho_out_se: np.ndarray
    infidelity: Optional[float]
    infidelity_se: Optional[float]
    ent_infidelity: float
    ent_infidelity_se: float
    max_unitarity_defect: float
    samples: Optional[dict] = field(default=None, repr=False)

    @property
    def fidelity(self) -> Optional[float]:
        return None if self.infidelity is None else 1.0 - self.infidelity

    @property
    def fidelity_se(self):
        return self.infidelity_se

    @property
    def ent_fidelity(self) -> float:
        return 1.0 - self.ent_infidelity

    @property
    def ent_fidelity_se(self) -> float:
        return self.ent_infidelity_se


@dataclass(frozen=True)
class ErrorRate:
    p: float
    stderr: float
    clamped: bool = False


def error_rate(estimate: ChannelEstimate, which: str = "state_fidelity") -> ErrorRate:
    """``p = 1 - F`` or ``p = 1 - F_e``.

    A negative value can only come from rounding; it is clamped to zero and
    the result is flagged.
    """
    if which == "state_fidelity":
        if estimate.infidelity is None:
            raise ValueError("state fidelity is undefined for a mixed input")
        p, se = estimate.infidelity, estimate.infidelity_se
    elif which == "entanglement_fidelity":
        p, se = estimate.ent_infidelity, estimate.ent_infidelity_se
    else:
        raise ValueError(f"unknown fidelity {which!r}")
    if p < 0:
        return ErrorRate(0.0, float(se), True)
    return ErrorRate(float(p), float(se), False)


def _trajectory_losses(u: np.ndarray, target: np.ndarray, rho: np.ndarray, psi, complement):
    v = target.conj().T @ u
    if psi is not None:
        amp = complement.conj().T @ (v @ psi)[..., None]
        loss = np.sum(np.abs(amp[..., 0]) ** 2, axis=-1)
        return loss, loss
    tr = np.einsum("ij,nji->n", rho, v)
    return None, 1.0 - np.abs(tr) ** 2


def _simulate(process: NoiseProcess, schedules: Sequence[PulseSchedule], rho: np.ndarray,
              n_trajectories: int, seed: int, gate=None, threads: int = 1,
              keep_samples: bool = False) -> list:
    """Shared-noise Monte Carlo over several schedules with the same grid."""
    if n_trajectories < 2:
        raise ValueError("need at least two trajectories")
    if seed is None or seed < 0:
        raise ValueError("an explicit non-negative seed is required")
    n_qubits = process.n_qubits if gate is None else gate.n_qubits
    if gate is not None and gate.n_qubits != process.n_qubits:
        raise ValueError("gate and noise act on different qubit counts")
    d = 2**n_qubits
    rho = density_matrix(rho)
    if rho.shape[0] != d:
        raise ValueError("input state dimension does not match the qubit count")
    steps = {s.n_steps for s in schedules}
    dts = {s.dt for s in schedules}
    if len(steps) != 1 or len(dts) != 1:
        raise ScheduleError("schedules must share one grid")
    grid = TimeGrid(schedules[0].dt, schedules[0].n_steps)
    process.check_grid(grid.dt)

    psi = _pure_vector(rho)
    complement = None
    if psi is not None:
        q, _ = np.linalg.qr(np.column_stack([psi, np.eye(d, dtype=complex)]))
        complement = q[:, 1:d]
        psi = q[:, 0] * (q[:, 0].conj() @ psi)
    targets = [target_unitary(s, n_qubits, gate) for s in schedules]
    block = min(_block_size(s, d) for s in schedules)
    blocks = [range(i, min(i + block, n_trajectories)) for i in range(0, n_trajectories, block)]

    def run(idx):
        values = sample_block(process, grid, seed, idx)
        out = []
        for sched, target in zip(schedules, targets):
            draws = _pulse_draws(sched, n_qubits, seed, idx)
            u = _evolve_block(values, process.channels, n_qubits, sched, gate, draws)
            defect = float(np.max(unitarity_defect(u)))
            loss, eloss = _trajectory_losses(u, target, rho, psi, complement)
            rho_out = u @ rho @ np.swapaxes(u, -1, -2).conj()
            out.append((defect, loss, eloss, RunningStats.of(rho_out)))
        return out

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, blocks))
    else:
        results = [run(b) for b in blocks]

    estimates = []
    for j, target in enumerate(targets):
        defect = max(r[j][0] for r in results)
        if not defect <= UNITARITY_TOL:
            raise NumericalError(f"propagator unitarity defect {defect:.3e} exceeds {UNITARITY_TOL}")
        eloss = np.concatenate([r[j][2] for r in results])
        loss = None if psi is None else np.concatenate([r[j][1] for r in results])
        rho_stats = _tree_merge([r[j][3] for r in results])
        e_stats = RunningStats.of(eloss)
        l_stats = None if loss is None else RunningStats.of(loss)
        samples = {"ent_infidelity": eloss, "infidelity": loss} if keep_samples else None
        estimates.append(ChannelEstimate(
            n_trajectories=n_trajectories,
            rho_in=rho,
            rho_out=rho_stats.mean,
            rho_out_se=rho_stats.stderr,
            infidelity=None if l_stats is None else float(l_stats.mean),
            infidelity_se=None if l_stats is None else float(l_stats.stderr),
            ent_infidelity=float(e_stats.mean),
            ent_infidelity_se=float(e_stats.stderr),
            max_unitarity_defect=defect,
            samples=samples,
        ))
    return estimates


def monte_carlo_channel(process: NoiseProcess, schedule: PulseSchedule, input_state, n_trajectories: int,
                        seed: int, gate=None, threads: int = 1, keep_samples: bool = False) -> ChannelEstimate:
    """Average ``U rho U^dagger`` over ``n_trajectories`` noise realizations.

    Parameters
    ----------
    process : NoiseProcess
    schedule : PulseSchedule
        Grid, pulse timing and pulse-error model.
    input_state : ket label, state vector or density matrix
    n_trajectories : int
    seed : int
        Master seed; trajectory ``k`` always sees the same noise and pulse errors.
    gate : GateHamiltonian, optional
    threads : int
        Worker threads; results are identical for any value.
    keep_samples : bool
        Keep per-trajectory losses (for bootstrap resampling).
    """
    return _simulate(process, [schedule], input_state if not isinstance(input_state, str)
                     else ket(input_state, process.n_qubits), n_trajectories, seed, gate, threads,
                     keep_samples)[0]


def paired_channels(process: NoiseProcess, schedules: Sequence[PulseSchedule], input_state,
                    n_trajectories: int, seed: int, gate=None, threads: int = 1,
                    keep_samples: bool = False) -> list:
    """Like :func:`monte_carlo_channel` but several schedules see the same noise."""
    state = ket(input_state, process.n_qubits) if isinstance(input_state, str) else input_state
    return _simulate(process, schedules, state, n_trajectories, seed, gate, threads, keep_samples)


# -- step-size convergence ------------------------------------------------------------------

@dataclass(frozen=True)
class ConvergenceReport:
    dts: tuple
    mean_square_change: tuple

    @property
    def ratio(self) -> float:
        return self.mean_square_change[0] / self.mean_square_change[1]


def dt_convergence(process: NoiseProcess, schedule_for_dt, dt: float, n_trajectories: int, seed: int,
                   gate=None) -> ConvergenceReport:
    """Mean-square propagator change under successive halvings of ``dt``.

    The noise is sampled once on the finest grid ``dt/4``; coarser grids take
    every second (fourth) sample, which is an exact sample of the same process
    there.  ``schedule_for_dt(h)`` must return the schedule for step ``h``.
    Returns the mean over trajectories of ``||U_h - U_{h/2}||^2`` (global phase
    removed) for ``h = dt`` and ``h = dt/2``.
    """
    n_qubits = process.n_qubits if gate is None else gate.n_qubits
    fine = schedule_for_dt(dt / 4)
    grid = TimeGrid(fine.dt, fine.n_steps)
    values = sample_block(process, grid, seed, range(n_trajectories))
    us = []
    for k in (4, 2, 1):
        sched = schedule_for_dt(dt * k / 4)
        u = _evolve_block(values[:, :, ::k], process.channels, n_qubits, sched, gate)
        check_unitary(u)
        us.append(u)
    changes = tuple(float(np.mean(phase_distance(us[i], us[i + 1]) ** 2)) for i in range(2))
    return ConvergenceReport((dt, dt / 2), changes)
