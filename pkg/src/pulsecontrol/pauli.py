"""Single-qubit Pauli group arithmetic and toggling frames.

Phases are kept as an exponent of ``i`` (0..3) so every product and
conjugation is exact.  A toggling frame records, for each pulse period of a
control period, the accumulated pulse product and the resulting sign that each
noise axis picks up when the noise Hamiltonian is conjugated into that frame.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

AXES = ("I", "X", "Y", "Z")
NOISE_AXES = ("x", "y", "z")

_PAULI_MATRICES = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

# (a, b) -> (axis of a*b, power of i)
_CYCLIC = {("X", "Y"): "Z", ("Y", "Z"): "X", ("Z", "X"): "Y"}


class PauliError(ValueError):
    pass


def pauli_matrix(axis: str) -> np.ndarray:
    """Return the 2x2 matrix of an axis label (case-insensitive)."""
    return _PAULI_MATRICES[_normalize_axis(axis)].copy()


def _normalize_axis(axis: str) -> str:
    a = str(axis).strip().upper()
    if a not in _PAULI_MATRICES:
        raise PauliError(f"unknown Pauli axis {axis!r}")
    return a


def _axis_product(a: str, b: str) -> tuple[str, int]:
    if a == "I":
        return b, 0
    if b == "I":
        return a, 0
    if a == b:
        return "I", 0
    if (a, b) in _CYCLIC:
        return _CYCLIC[(a, b)], 1
    return _CYCLIC[(b, a)], 3


@dataclass(frozen=True)
class SignedPauli:
    """Element ``i**phase * axis`` of the 16-element single-qubit Pauli group."""

    axis: str = "I"
    phase: int = 0

    def __post_init__(self):
        object.__setattr__(self, "axis", _normalize_axis(self.axis))
        object.__setattr__(self, "phase", int(self.phase) % 4)

    @classmethod
    def from_label(cls, label: str) -> "SignedPauli":
        """Parse labels such as ``"X"``, ``"-Z"``, ``"+iY"`` or ``"-iI"``."""
        s = label.strip().replace(" ", "")
        phase = 0
        if s.startswith(("+", "-")):
            if s[0] == "-":
                phase = 2
            s = s[1:]
        if s[:1] in ("i", "j") and len(s) > 1:
            phase += 1
            s = s[1:]
        return cls(s, phase)

    @property
    def coefficient(self) -> complex:
        return (1, 1j, -1, -1j)[self.phase]

    @property
    def is_axis(self) -> bool:
        """True when the phase is +1, i.e. a bare axis operator."""
        return self.phase == 0

    def matrix(self) -> np.ndarray:
        return self.coefficient * _PAULI_MATRICES[self.axis]

    def dagger(self) -> "SignedPauli":
        return SignedPauli(self.axis, -self.phase)

    def __mul__(self, other: "SignedPauli") -> "SignedPauli":
        return multiply(self, other)

    def __str__(self):
        return ("", "i", "-", "-i")[self.phase] + self.axis


I = SignedPauli("I")
X = SignedPauli("X")
Y = SignedPauli("Y")
Z = SignedPauli("Z")

GROUP = tuple(SignedPauli(a, k) for k in range(4) for a in AXES)


def multiply(p: SignedPauli, q: SignedPauli) -> SignedPauli:
    """Group product ``p*q`` with exact phase."""
    axis, k = _axis_product(p.axis, q.axis)
    return SignedPauli(axis, p.phase + q.phase + k)


def conjugate(p: SignedPauli, q: SignedPauli) -> SignedPauli:
    """Return ``q^dagger * p * q``.

    For bare axes the result is ``+p`` if the two commute and ``-p`` otherwise.
    """
    return multiply(multiply(q.dagger(), p), q)


def parse_pulses(text: str | Iterable[str]) -> tuple[SignedPauli, ...]:
    """Parse ``"I,X,Z,X"`` (case-insensitive) or an iterable of labels."""
    if isinstance(text, str):
        items = [t for t in text.split(",") if t.strip()]
    else:
        items = list(text)
    if not items:
        raise PauliError("empty pulse list")
    return tuple(p if isinstance(p, SignedPauli) else SignedPauli.from_label(p) for p in items)


def render_pulses(pulses: Sequence[SignedPauli]) -> str:
    return ",".join(str(p) for p in pulses)


@dataclass(frozen=True)
class TogglingFrame:
    """Per-interval frame of one control period.

    Attributes
    ----------
    pulses : tuple of SignedPauli
        Pulse applied at the start of each pulse period (``pulses[0]`` is I).
    accumulated : tuple of SignedPauli
        ``pulses[k] * ... * pulses[0]`` for each interval ``k``.
    signs : ndarray, shape (K, 3)
        Sign (+1/-1) of the x, y, z noise terms in each interval.
    boundary : SignedPauli
        Extra pulse applied at the end of the control period, before the next
        period's first pulse.
    """

    pulses: tuple
    accumulated: tuple
    signs: np.ndarray
    boundary: SignedPauli = I

    @property
    def intervals(self) -> int:
        return len(self.pulses)

    @property
    def closing_product(self) -> SignedPauli:
        """Total frame at the end of a control period, boundary pulse included."""
        return multiply(self.boundary, self.accumulated[-1])

    @property
    def periodic(self) -> bool:
        return self.closing_product.axis == "I"

    def axis_signs(self, axis: str) -> np.ndarray:
        return self.signs[:, NOISE_AXES.index(axis.lower())]


def toggling_frame(pulses: Sequence[SignedPauli] | str, boundary: SignedPauli | str = I) -> TogglingFrame:
    """Accumulate pulse products and read off the noise sign pattern.

    Raises
    ------
    PauliError
        If an entry carries a phase, or the first pulse is not the identity.
    """
    pulses = parse_pulses(pulses)
    if isinstance(boundary, str):
        boundary = SignedPauli.from_label(boundary)
    for p in (*pulses, boundary):
        if not p.is_axis:
            raise PauliError(f"pulse entries must be bare axes, got {p}")
    if pulses[0].axis != "I":
        raise PauliError("the first pulse of a control period must be I")

    accumulated = []
    acc = I
    for p in pulses:
        acc = multiply(p, acc)
        accumulated.append(acc)

    signs = np.empty((len(pulses), 3), dtype=np.int8)
    for k, frame in enumerate(accumulated):
        for j, axis in enumerate("XYZ"):
            signs[k, j] = 1 if conjugate(SignedPauli(axis), frame).phase == 0 else -1
    signs.setflags(write=False)
    return TogglingFrame(pulses, tuple(accumulated), signs, boundary)
