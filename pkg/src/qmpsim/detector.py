"""Two-level detector weakly entangled with a qubit.

The detector starts in ``gamma|0> + delta|1>`` and is rotated to
``gamma~|0> + delta~|1>`` only when the system is in ``|1>``.  A detector
reading of ``1`` is a "click".  All quantities are computed exactly from Born
probabilities on the four-dimensional joint state; no small-strength
expansion is made anywhere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, UndefinedBranchError, ZeroStrengthError
from .hilbert import Ket, outer

DEFAULT_THETA = np.pi / 4
JOINT_LABELS = ((0, 0), (0, 1), (1, 0), (1, 1))


@dataclass(frozen=True)
class DetectorParams:
    """Detector amplitudes given system ``|0>`` (gamma, delta) and ``|1>`` (tilde)."""

    gamma: complex
    delta: complex
    gamma_tilde: complex
    delta_tilde: complex

    def __post_init__(self) -> None:
        for a, b in ((self.gamma, self.delta), (self.gamma_tilde, self.delta_tilde)):
            if not abs(abs(a) ** 2 + abs(b) ** 2 - 1) <= 1e-12:
                raise ValueError("detector amplitudes must be normalized")

    @classmethod
    def from_angle(cls, eps: float, theta: float = DEFAULT_THETA) -> DetectorParams:
        """Sweep parameterization: ``(cos t, sin t)`` rotated by ``eps`` on ``|1>``."""
        return cls(np.cos(theta), np.sin(theta), np.cos(theta + eps), np.sin(theta + eps))

    @property
    def click_gap(self) -> float:
        """``|delta~|^2 - |delta|^2``, the calibration denominator."""
        return abs(self.delta_tilde) ** 2 - abs(self.delta) ** 2

    @property
    def strength(self) -> float:
        return abs(self.click_gap)


@dataclass(frozen=True, eq=False)
class BackActionPair:
    """System states after a click (``i_plus``) or no click (``i_minus``).

    A state is ``None`` when its branch has probability zero.
    """

    i_plus: Ket | None
    i_minus: Ket | None
    p_click: float


def _qubit(i: Ket) -> tuple[complex, complex]:
    if i.dim != 2:
        raise DimensionError("the discrete detector acts on a qubit")
    return complex(i.amps[0]), complex(i.amps[1])


def entangle(i: Ket, d: DetectorParams) -> Ket:
    a, b = _qubit(i)
    amps = [a * d.gamma, a * d.delta, b * d.gamma_tilde, b * d.delta_tilde]
    return Ket(amps, JOINT_LABELS, ("system", "detector"))


# joint-space projectors: detector reads 1, and system postselected on f
_CLICK = np.diag([0, 1, 0, 1]).astype(complex)


def _postselect_projector(f: Ket) -> np.ndarray:
    return np.kron(outer(f.normalize()), np.eye(2))


def click_probability(i: Ket, d: DetectorParams) -> float:
    psi = entangle(i, d).amps
    return float(np.vdot(psi, _CLICK @ psi).real)


def _require_strength(d: DetectorParams) -> None:
    if d.click_gap == 0.0:
        raise ZeroStrengthError("|delta~|^2 == |delta|^2: the detector cannot be calibrated")


def calibrated_observable(i: Ket, d: DetectorParams) -> float:
    """``(P(click) - |delta|^2) / (|delta~|^2 - |delta|^2)``, equal to ``|beta|^2``."""
    _require_strength(d)
    return (click_probability(i, d) - abs(d.delta) ** 2) / d.click_gap


def conditional_click_probability(i: Ket, d: DetectorParams, f: Ket, min_probability: float = 1e-12) -> float:
    """``P(click | system found in f)`` from joint Born probabilities."""
    psi = entangle(i, d).amps
    pf = _postselect_projector(f)
    post = pf @ psi
    p_f = float(np.vdot(post, post).real)
    if p_f <= min_probability:
        raise UndefinedBranchError(f"postselection probability {p_f:.3e} is zero")
    p_joint = float(np.vdot(post, _CLICK @ post).real)
    return p_joint / p_f


def conditional_calibrated(i: Ket, d: DetectorParams, f: Ket) -> float:
    """Calibrated detector response conditioned on postselecting ``f``.

    Tends to ``Re <f|A|i>/<f|i>`` with ``A = |1><1|`` as the strength goes to 0.
    """
    _require_strength(d)
    return (conditional_click_probability(i, d, f) - abs(d.delta) ** 2) / d.click_gap


def backaction_states(i: Ket, d: DetectorParams) -> BackActionPair:
    a, b = _qubit(i)
    plus = np.array([a * d.delta, b * d.delta_tilde])
    minus = np.array([a * d.gamma, b * d.gamma_tilde])
    p_click = float(np.vdot(plus, plus).real)
    p_none = float(np.vdot(minus, minus).real)

    def state(v: np.ndarray, p: float) -> Ket | None:
        return Ket(v / np.sqrt(p), i.labels, i.spaces) if p > 0 else None

    return BackActionPair(state(plus, p_click), state(minus, p_none), p_click)


def tree_postselection_probability(i: Ket, d: DetectorParams, f: Ket) -> float:
    """``P(f)`` assembled from the two back-action branches."""
    pair = backaction_states(i, d)
    f = f.normalize()
    total = 0.0
    for state, p in ((pair.i_plus, pair.p_click), (pair.i_minus, 1.0 - pair.p_click)):
        if state is not None:
            total += p * abs(f.inner(state)) ** 2
    return total


def joint_postselection_probability(i: Ket, d: DetectorParams, f: Ket) -> float:
    """``P(f)`` read directly off the entangled state."""
    psi = entangle(i, d).amps
    post = _postselect_projector(f) @ psi
    return float(np.vdot(post, post).real)
