"""Pulse sequences, their placement on the integration grid, and pulse errors.

A control period is a list of axes, one per pulse period, starting with I.
When a period's pulse product is not the identity, a *boundary* pulse is
applied where one control period ends and the next begins, so every period
starts in the unconjugated frame.  For the level-1 sequence this boundary
pulse is Z, which turns the listing I,X,Z,X into the alternating train
I,X,Z,X,Z,X,Z,X,... .
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .pauli import I, SignedPauli, TogglingFrame, multiply, parse_pulses, pauli_matrix, toggling_frame

ERROR_MODELS = ("none", "random_pauli_kick", "rotation_angle_jitter")


class SequenceError(ValueError):
    pass


@dataclass(frozen=True)
class PulseSequence:
    """Periodic pulse program.

    ``pulses`` holds one axis per pulse period of a control period and
    ``boundary`` the pulse inserted between control periods.  ``p0`` is the
    error probability per pulse per qubit.
    """

    pulses: tuple
    t_delta: float = 1.0
    boundary: SignedPauli = I
    t_w: float = 0.0
    level: Optional[int] = None
    p0: float = 0.0
    error_model: str = "random_pauli_kick"
    name: str = "custom"
    frame: TogglingFrame = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        pulses = parse_pulses(self.pulses)
        boundary = parse_pulses([self.boundary])[0] if not isinstance(self.boundary, SignedPauli) else self.boundary
        object.__setattr__(self, "pulses", pulses)
        object.__setattr__(self, "boundary", boundary)
        if not (np.isfinite(self.t_delta) and self.t_delta > 0):
            raise SequenceError("t_delta must be positive")
        if self.t_w < 0 or (self.t_w > 0 and not self.t_w < self.t_delta / 10):
            raise SequenceError("pulse width must satisfy t_w < t_delta/10")
        if not 0 <= self.p0 < 1:
            raise SequenceError("p0 must lie in [0, 1)")
        if self.error_model not in ERROR_MODELS:
            raise SequenceError(f"unknown error model {self.error_model!r}")
        if self.error_model == "rotation_angle_jitter" and self.p0 >= 0.5:
            raise SequenceError("angle jitter can only reach mean infidelity below 1/2")
        try:
            frame = toggling_frame(pulses, boundary)
        except ValueError as exc:
            raise SequenceError(str(exc)) from exc
        object.__setattr__(self, "frame", frame)

    @property
    def period_length(self) -> int:
        return len(self.pulses)

    @property
    def control_period(self) -> float:
        return self.t_delta * len(self.pulses)

    @property
    def periodic(self) -> bool:
        return self.frame.periodic

    @property
    def noisy_pulses(self) -> bool:
        return self.p0 > 0 and self.error_model != "none"

    def with_params(self, **changes) -> "PulseSequence":
        kw = dict(pulses=self.pulses, t_delta=self.t_delta, boundary=self.boundary, t_w=self.t_w,
                  level=self.level, p0=self.p0, error_model=self.error_model, name=self.name)
        kw.update(changes)
        return PulseSequence(**kw)


def level1(t_delta: float = 1.0, p0: float = 0.0, error_model: str = "random_pauli_kick") -> PulseSequence:
    """Four-period sequence I, X, Z, X with a Z boundary pulse."""
    return PulseSequence(("I", "X", "Z", "X"), t_delta, boundary=SignedPauli("Z"), level=1,
                         p0=p0, error_model=error_model, name="level1")


def level2(t_delta: float = 1.0, p0: float = 0.0, error_model: str = "random_pauli_kick") -> PulseSequence:
    """Eight-period sequence I, X, Z, X, I, X, Z, X (its product is already I)."""
    return PulseSequence(("I", "X", "Z", "X", "I", "X", "Z", "X"), t_delta, level=2,
                         p0=p0, error_model=error_model, name="level2")


def custom(pulses, t_delta: float = 1.0, p0: float = 0.0, error_model: str = "random_pauli_kick",
           boundary=I) -> PulseSequence:
    """User-defined control period.

    A sequence whose period product (boundary included) is not the identity is
    accepted with a warning; its frame does not repeat from period to period.
    """
    try:
        seq = PulseSequence(pulses, t_delta, boundary=boundary, p0=p0, error_model=error_model)
    except ValueError as exc:
        raise SequenceError(str(exc)) from exc
    if not seq.periodic:
        warnings.warn(f"pulse product over one control period is {seq.frame.closing_product}, "
                      "not the identity; the toggling frame is not periodic", stacklevel=2)
    return seq


def named_sequence(name: str, t_delta: float = 1.0, p0: float = 0.0,
                   error_model: str = "random_pauli_kick") -> PulseSequence:
    """Resolve ``"level1"``, ``"level2"``, ``"free"`` or an axis list like ``"I,Y,I,Y"``."""
    key = name.strip().lower()
    if key == "level1":
        return level1(t_delta, p0, error_model)
    if key == "level2":
        return level2(t_delta, p0, error_model)
    if key in ("free", "none"):
        return PulseSequence(("I",), t_delta, p0=p0, error_model=error_model, name="free")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return custom(name, t_delta, p0, error_model)


# -- scheduling ------------------------------------------------------------------

@dataclass(frozen=True)
class PulseEvent:
    step: int
    time: float
    axis: str


@dataclass(frozen=True)
class PulseSchedule:
    """Pulse events on the integration grid.

    ``events`` are applied before the step with the same index; ``closing`` is
    the boundary pulse applied at ``t_total`` after the last step, if any.
    Every qubit receives the same pulse at the same time.
    """

    dt: float
    n_steps: int
    events: tuple
    closing: Optional[PulseEvent] = None
    p0: float = 0.0
    error_model: str = "none"

    @property
    def t_total(self) -> float:
        return self.dt * self.n_steps

    @property
    def pulse_count(self) -> int:
        """Number of physical (non-identity) pulses."""
        return sum(e.axis != "I" for e in self.all_events())

    def all_events(self):
        yield from self.events
        if self.closing is not None:
            yield self.closing

    def event_at_step(self) -> dict:
        return {e.step: e.axis for e in self.events}


def _multiple(a: float, b: float) -> Optional[int]:
    n = round(a / b)
    if n >= 1 and math.isclose(n * b, a, rel_tol=1e-9):
        return int(n)
    return None


def schedule(seq: PulseSequence, t_total: float, dt: float) -> PulseSchedule:
    """Lay a sequence onto a grid of step ``dt`` covering ``[0, t_total]``.

    Pulses fall at ``k * t_delta``; the first pulse of each control period
    after the first is multiplied by the boundary pulse, and the boundary
    pulse closes the final period at ``t_total``.  Identity pulses after
    ``t = 0`` are dropped.
    """
    per = _multiple(seq.t_delta, dt)
    if per is None:
        raise SequenceError(f"t_delta={seq.t_delta} is not a multiple of dt={dt}")
    periods = _multiple(t_total, seq.control_period)
    if periods is None:
        raise SequenceError(f"t_total={t_total} is not a multiple of the control period {seq.control_period}")
    K = seq.period_length
    events = []
    for k in range(periods * K):
        p = seq.pulses[k % K]
        if k % K == 0 and k > 0:
            p = multiply(seq.boundary, p)
        if k == 0 or p.axis != "I":
            events.append(PulseEvent(k * per, k * seq.t_delta, p.axis))
    closing = None
    if seq.boundary.axis != "I":
        closing = PulseEvent(periods * K * per, periods * K * seq.t_delta, seq.boundary.axis)
    model = seq.error_model if seq.noisy_pulses else "none"
    return PulseSchedule(float(dt), periods * K * per, tuple(events), closing, seq.p0, model)


def free_schedule(t_total: float, dt: float) -> PulseSchedule:
    """Schedule with no pulses at all (free evolution)."""
    n = _multiple(t_total, dt)
    if n is None:
        raise SequenceError(f"t_total={t_total} is not a multiple of dt={dt}")
    return PulseSchedule(float(dt), n, (PulseEvent(0, 0.0, "I"),))


# -- pulse unitaries and errors ------------------------------------------------------

def pulse_unitary(axis: str, angle: float = math.pi) -> np.ndarray:
    """Rotation by ``angle`` about ``axis``: ``exp(-i angle/2 sigma)``; ideal pulses give ``-i sigma``."""
    if axis.upper() == "I":
        return np.eye(2, dtype=complex)
    return math.cos(angle / 2) * np.eye(2) - 1j * math.sin(angle / 2) * pauli_matrix(axis)


def jitter_width(p0: float) -> float:
    """Angle spread ``s`` whose Gaussian over-rotation has mean infidelity ``p0``.

    For an over-rotation ``eps`` the process infidelity is ``sin(eps/2)**2``,
    whose mean under ``N(0, s**2)`` is ``(1 - exp(-s**2/2))/2``.
    """
    if not 0 <= p0 < 0.5:
        raise SequenceError("jitter requires 0 <= p0 < 1/2")
    return math.sqrt(-2.0 * math.log1p(-2.0 * p0))


def apply_pulse_error(unitary: np.ndarray, axis: str, p0: float, model: str,
                      rng: np.random.Generator) -> np.ndarray:
    """Return a possibly-perturbed version of a single-qubit pulse.

    ``random_pauli_kick`` left-multiplies by a uniformly random non-identity
    Pauli with probability ``p0``; ``rotation_angle_jitter`` replaces the ideal
    rotation angle pi by ``pi + eps`` with ``eps ~ N(0, s**2)`` and ``s`` from
    :func:`jitter_width`.
    """
    if not 0 <= p0 < 1:
        raise SequenceError("p0 must lie in [0, 1)")
    if p0 == 0 or model == "none" or axis.upper() == "I":
        return unitary
    if model == "random_pauli_kick":
        u, k = rng.random(), rng.integers(3)
        if u < p0:
            return pauli_matrix("XYZ"[k]) @ unitary
        return unitary
    if model == "rotation_angle_jitter":
        eps = rng.normal(0.0, jitter_width(p0))
        return pulse_unitary(axis, math.pi + eps)
    raise SequenceError(f"unknown error model {model!r}")
