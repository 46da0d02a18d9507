"""Continuous Gaussian pointer with an impulsive von Neumann coupling.

The coupling ``exp(-i lam p A)`` translates the pointer by ``lam * a_j`` in
the branch where the system is in the eigenspace ``Pi_j``.  Shifted packets
are obtained by re-evaluating the analytic Gaussian at the new center, never
by interpolation or FFT translation, so the only discretization error is the
trapezoidal quadrature on a uniform grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DivergentValueError, GridError
from .hilbert import Ket, Observable, _check_dim

DEFAULT_POINTS = 4001
DEFAULT_HALF_WIDTH = 10.0  # in units of delta
MIN_HALF_WIDTH = 8.0


def _trapz(y: np.ndarray, q: np.ndarray) -> float:
    return float(np.trapezoid(y, q))


@dataclass(frozen=True)
class GaussianPointer:
    """``phi_0(q) = C exp(-(q - q0)^2 / (4 delta^2))`` with ``C`` fixed by normalization.

    ``grid`` is ``(q_min, q_max, n_points)``; ``None`` picks a grid wide
    enough for the coupling at hand (see :func:`default_grid`).
    """

    q0: float = 0.0
    delta: float = 1.0
    grid: tuple[float, float, int] | None = None

    def __post_init__(self) -> None:
        if not self.delta > 0:
            raise ValueError("pointer width delta must be positive")
        if self.grid is not None:
            lo, hi, n = self.grid
            if n < 3 or not lo < hi:
                raise GridError(f"degenerate grid {self.grid}")
            if lo > self.q0 - MIN_HALF_WIDTH * self.delta or hi < self.q0 + MIN_HALF_WIDTH * self.delta:
                raise GridError("grid must span at least q0 +/- 8 delta")

    def wave(self, q: np.ndarray, shift: float = 0.0) -> np.ndarray:
        """Analytic packet centered at ``q0 + shift`` (real-valued)."""
        c = (2 * np.pi * self.delta**2) ** -0.25
        return c * np.exp(-((q - self.q0 - shift) ** 2) / (4 * self.delta**2))


def default_grid(pointer: GaussianPointer, lam: float, eigenvalues) -> tuple[float, float, int]:
    shifts = [lam * a for a in eigenvalues] + [0.0]
    w = DEFAULT_HALF_WIDTH * pointer.delta
    return (pointer.q0 - w + min(shifts), pointer.q0 + w + max(shifts), DEFAULT_POINTS)


@dataclass(frozen=True, eq=False)
class PointerBranch:
    """One eigenspace of ``A``: projected system vector and displaced packet."""

    component: np.ndarray  # Pi_j |i>, unnormalized
    eigenvalue: float
    wave: np.ndarray

    @property
    def weight(self) -> float:
        return float(np.vdot(self.component, self.component).real)


@dataclass(frozen=True, eq=False)
class JointPointerState:
    """``exp(-i lam p A)|i>|phi_0>`` as a list of eigenspace branches on a grid."""

    q: np.ndarray
    branches: tuple[PointerBranch, ...]
    lam: float
    pointer: GaussianPointer

    def norm(self) -> float:
        # branches are orthogonal in the system factor
        return sum(b.weight * _trapz(np.abs(b.wave) ** 2, self.q) for b in self.branches)


@dataclass(frozen=True, eq=False)
class GridDensity:
    q: np.ndarray
    density: np.ndarray

    def total(self) -> float:
        return _trapz(self.density, self.q)


def couple(i: Ket, A: Observable, lam: float, pointer: GaussianPointer) -> JointPointerState:
    _check_dim(A.dim, i.dim)
    lam = float(lam)
    grid = pointer.grid or default_grid(pointer, lam, A.eigenvalues)
    lo, hi, n = grid
    w = MIN_HALF_WIDTH * pointer.delta
    for a in A.eigenvalues:
        center = pointer.q0 + lam * a
        if center - w < lo or center + w > hi:
            raise GridError(
                f"packet shifted to {center:g} does not fit within 8 delta of grid [{lo:g}, {hi:g}]"
            )
    q = np.linspace(lo, hi, int(n))
    branches = []
    for a, p in A.eigenpairs:
        comp = p @ i.amps
        if not np.any(comp):
            continue
        branches.append(PointerBranch(comp, a, pointer.wave(q, lam * a)))
    return JointPointerState(q, tuple(branches), lam, pointer)


def unconditioned_distribution(joint: JointPointerState) -> GridDensity:
    """Pointer density with the system traced out (no postselection)."""
    dens = sum(b.weight * np.abs(b.wave) ** 2 for b in joint.branches)
    return GridDensity(joint.q, dens)


def postselection_probability(joint: JointPointerState, f: Ket) -> float:
    psi = _projected_wave(joint, f)
    return _trapz(np.abs(psi) ** 2, joint.q)


def _projected_wave(joint: JointPointerState, f: Ket) -> np.ndarray:
    psi = np.zeros_like(joint.q, dtype=complex)
    for b in joint.branches:
        psi = psi + np.vdot(f.amps, b.component) * b.wave
    return psi


def postselected_wavefunction(joint: JointPointerState, f: Ket, min_probability: float = 1e-12) -> np.ndarray:
    """Pointer wavefunction ``<f|psi>`` normalized on the grid."""
    psi = _projected_wave(joint, f)
    prob = _trapz(np.abs(psi) ** 2, joint.q)
    if prob <= min_probability:
        raise DivergentValueError(complex(np.max(np.abs(psi))), prob, min_probability)
    return psi / np.sqrt(prob)


def postselected_pointer_distribution(joint: JointPointerState, f: Ket) -> GridDensity:
    psi = postselected_wavefunction(joint, f)
    return GridDensity(joint.q, np.abs(psi) ** 2)


def pointer_moments(density: GridDensity) -> tuple[float, float]:
    """Trapezoidal mean and variance of ``q``."""
    q, rho = density.q, density.density
    norm = _trapz(rho, q)
    mean = _trapz(q * rho, q) / norm
    var = _trapz((q - mean) ** 2 * rho, q) / norm
    return mean, var


def momentum_mean(q: np.ndarray, psi: np.ndarray) -> float:
    """``<p>`` from the phase gradient, ``int Im(psi* dpsi/dq) dq / int |psi|^2``.

    ``Im(psi* psi') = |psi|^2 dtheta/dq``, so no phase unwrapping is needed.
    """
    dpsi = np.gradient(psi, q)
    return _trapz(np.imag(np.conj(psi) * dpsi), q) / _trapz(np.abs(psi) ** 2, q)
