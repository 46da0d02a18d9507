"""Partial-collapse measurement and the null weak value.

A partial-collapse detector fires with probability ``p0`` on ``|0>`` and
``p1`` on ``|1>``; a click destroys the system, a null outcome damps the
amplitudes to ``(sqrt(1-p0) alpha, sqrt(1-p1) beta)``.  A second, strong
measurement is then made.  Throughout this module ``f`` denotes the *retained*
state of that second measurement, i.e. the state on which the second detector
stays silent.  A destroyed system never clicks the second detector, so
``P(no second click | first click) = 1``.

The same process is also written in a three-state space ``{|0>, |1>, |R>}``
where the click becomes a unitary leak of ``|1>`` into the ancilla ``|R>``
followed by a projective measurement of ``|R>``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DivergentValueError, UndefinedBranchError, ZeroStrengthError
from .hilbert import Ket, LinearMap, Observable, complement, expectation, outer
from .weakvalues import EPSILON_OVERLAP, DecompositionTerm

ANCILLA_LABELS = (0, 1, "R")


@dataclass(frozen=True)
class PartialCollapseSpec:
    """Click probabilities of the rare strong measurement.

    ``gamma`` and ``t`` optionally record a leak rate and duration with
    ``p1 = 1 - exp(-gamma t)``; use :meth:`from_rate` to build from them.
    """

    p1: float
    p0: float = 0.0
    gamma: float | None = None
    t: float | None = None

    def __post_init__(self) -> None:
        for name in ("p0", "p1"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} = {v} is not a probability")
        if (self.gamma is None) != (self.t is None):
            raise ValueError("gamma and t must be given together")
        if self.gamma is not None:
            if self.gamma < 0 or self.t < 0:
                raise ValueError("rate and duration must be non-negative")
            if abs(self.p1 - (-np.expm1(-self.gamma * self.t))) > 1e-12:
                raise ValueError("p1 inconsistent with 1 - exp(-gamma t)")

    @classmethod
    def from_rate(cls, gamma: float, t: float) -> PartialCollapseSpec:
        return cls(p1=float(-np.expm1(-gamma * t)), p0=0.0, gamma=gamma, t=t)

    @property
    def p(self) -> float:
        return self.p1

    def null_kraus(self) -> np.ndarray:
        """Kraus operator of the null outcome."""
        return np.diag([np.sqrt(1 - self.p0), np.sqrt(1 - self.p1)]).astype(complex)


@dataclass(frozen=True, eq=False)
class NullOutcome:
    """One branch of the partial-collapse measurement.

    ``post_state`` is ``None`` for a click (the system is destroyed) and for a
    null outcome of probability zero (undefined).
    """

    clicked: bool
    probability: float
    post_state: Ket | None

    @property
    def destroyed(self) -> bool:
        return self.clicked


def _qubit(i: Ket) -> tuple[complex, complex]:
    if i.dim != 2:
        raise DimensionError("partial collapse is defined on a qubit")
    return complex(i.amps[0]), complex(i.amps[1])


def click_probability(i: Ket, spec: PartialCollapseSpec) -> float:
    a, b = _qubit(i)
    return spec.p0 * abs(a) ** 2 + spec.p1 * abs(b) ** 2


def partial_collapse(i: Ket, spec: PartialCollapseSpec) -> tuple[NullOutcome, NullOutcome]:
    """Return the (click, null) outcomes with the null back-action state ``|i_p>``."""
    _qubit(i)
    p_click = click_probability(i, spec)
    p_null = 1.0 - p_click
    damped = spec.null_kraus() @ i.amps
    post = Ket(damped / np.sqrt(p_null), i.labels, i.spaces) if p_null > 0 else None
    return NullOutcome(True, p_click, None), NullOutcome(False, p_null, post)


def click_observable(i: Ket, spec: PartialCollapseSpec) -> float:
    """Click rate divided by ``p``; equals ``<i|1><1|i>`` exactly."""
    if spec.p0 != 0.0:
        raise ValueError("click_observable assumes p0 = 0")
    if spec.p1 == 0.0:
        raise ZeroStrengthError("p1 = 0: the detector never clicks")
    return click_probability(i, spec) / spec.p1


def retained_probability(i: Ket, spec: PartialCollapseSpec, f: Ket) -> float:
    """``P(no second click)`` = destroyed systems + survivors found in ``f``.

    Computed with the unnormalized Kraus image so that it does not share
    arithmetic with the tree evaluation in :func:`bayes_null_conditional`.
    """
    f = f.normalize()
    survivor = spec.null_kraus() @ i.amps
    return click_probability(i, spec) + abs(np.vdot(f.amps, survivor)) ** 2


def bayes_null_conditional(i: Ket, spec: PartialCollapseSpec, f: Ket) -> float:
    """``P(first click | no second click)`` by Bayes' theorem on the tree."""
    click, null = partial_collapse(i, spec)
    p_retained_given_null = 0.0
    if null.post_state is not None:
        p_retained_given_null = abs(f.normalize().inner(null.post_state)) ** 2
    denom = click.probability + null.probability * p_retained_given_null
    if denom <= 0.0:
        raise UndefinedBranchError("the retained outcome has probability zero")
    return click.probability / denom


def null_weak_value(i: Ket, f: Ket, A: Observable, epsilon_overlap: float = EPSILON_OVERLAP) -> float:
    """``<i|A|i> / |<f|i>|^2``."""
    numerator = expectation(A, i)
    overlap = abs(f.inner(i)) ** 2
    if overlap <= epsilon_overlap:
        raise DivergentValueError(numerator, overlap, epsilon_overlap)
    return numerator / overlap


@dataclass(frozen=True)
class NullRatioCheck:
    """Bayes ratio ``P(click|retained)/p`` against its exact and small-p forms."""

    lhs: float
    rhs_exact: float
    rhs_approx: float

    @property
    def exact_residual(self) -> float:
        return abs(self.lhs - self.rhs_exact)

    @property
    def gap(self) -> float:
        return abs(self.lhs - self.rhs_approx)


def null_ratio_check(i: Ket, spec: PartialCollapseSpec, f: Ket) -> NullRatioCheck:
    if spec.p0 != 0.0:
        raise ValueError("the ratio identity assumes p0 = 0")
    if spec.p1 == 0.0:
        raise ZeroStrengthError("p1 = 0: the conditional ratio is undefined")
    lhs = bayes_null_conditional(i, spec, f) / spec.p1
    beta2 = abs(i.amps[1]) ** 2
    rhs_exact = beta2 / retained_probability(i, spec, f)
    overlap = abs(f.normalize().inner(i)) ** 2
    rhs_approx = beta2 / overlap if overlap > 0 else float("inf")
    return NullRatioCheck(lhs, rhs_exact, rhs_approx)


@dataclass(frozen=True, eq=False)
class AncillaSpace:
    """Extended space ``{|0>, |1>, |R>}`` with the leak ``U`` and the postselection map.

    ``U`` is unitary; ``U_tilde`` sends ``|f>`` and ``|R>`` both to ``|R>``
    and fixes ``|f-bar>``, so it is not unitary.
    """

    U: LinearMap
    U_tilde: LinearMap
    f: Ket

    @property
    def pi_R(self) -> np.ndarray:
        return np.diag([0, 0, 1]).astype(complex)

    @property
    def pi_Rbar(self) -> np.ndarray:
        return np.diag([1, 1, 0]).astype(complex)


def leak_unitary(p: float) -> LinearMap:
    s, c = np.sqrt(p), np.sqrt(1 - p)
    m = np.array([[1, 0, 0], [0, c, -s], [0, s, c]], dtype=complex)
    return LinearMap(m, unitary=True, labels=ANCILLA_LABELS)


def embed(f: Ket) -> np.ndarray:
    """Qubit vector placed in the ``{|0>, |1>}`` sector of the 3-space."""
    if f.dim != 2:
        raise DimensionError("only qubit states embed into the ancilla space")
    return np.concatenate([f.amps, [0]])


def postselection_map(f: Ket) -> LinearMap:
    f = f.normalize()
    fb = complement(f)
    r = np.array([0, 0, 1], dtype=complex)
    m = (np.outer(embed(fb), embed(fb).conj()) + np.outer(r, embed(f).conj()) + np.outer(r, r))
    return LinearMap(m, unitary=False, labels=ANCILLA_LABELS)


def ancilla_space(spec: PartialCollapseSpec, f: Ket) -> AncillaSpace:
    if spec.p0 != 0.0:
        raise ValueError("the ancilla construction assumes p0 = 0")
    return AncillaSpace(leak_unitary(spec.p1), postselection_map(f), f.normalize())


def extend_ancilla(i: Ket, spec: PartialCollapseSpec) -> Ket:
    """``U|i> = alpha|0> + sqrt(1-p) beta|1> + sqrt(p) beta|R>``."""
    if spec.p0 != 0.0:
        raise ValueError("the ancilla construction assumes p0 = 0")
    _qubit(i)
    return Ket(leak_unitary(spec.p1).matrix @ embed(i), ANCILLA_LABELS, i.spaces)


def ancilla_click_probability(i: Ket, spec: PartialCollapseSpec) -> float:
    """``<i|U^dag |R><R| U|i>``."""
    u = leak_unitary(spec.p1).matrix
    a_tilde = u.conj().T @ outer(Ket([0, 0, 1])) @ u
    v = embed(i)
    return float(np.vdot(v, a_tilde @ v).real)


def postselect_map(state3: Ket, f: Ket) -> Ket:
    """Image of a 3-space state under ``U_tilde`` (unnormalized)."""
    if state3.dim != 3:
        raise DimensionError("postselect_map acts on the 3-state ancilla space")
    return postselection_map(f).apply(state3)


def naive_ancilla_numerator(i: Ket, spec: PartialCollapseSpec, f: Ket) -> float:
    """``sum_{f_n in {f, f-bar}} |<f_n|Pi_R U|i>|^2``.

    Postselecting inside the qubit sector cannot see the ancilla, so this is
    zero for every input; it is the reason the plain strong decomposition
    cannot describe the null protocol.
    """
    space = ancilla_space(spec, f)
    image = space.pi_R @ space.U.matrix @ embed(i)
    return float(sum(abs(np.vdot(embed(fn), image)) ** 2 for fn in (space.f, complement(space.f))))


@dataclass(frozen=True, eq=False)
class AncillaDecomposition:
    """Strong decomposition through ``U`` and ``U_tilde`` over ``f_n in {R, f-bar}``.

    ``terms[0]`` is the ``R`` channel (retained), ``terms[1]`` the ``f-bar``
    channel.  ``total`` is ``(1/p) sum_n w_n c_n`` and reproduces ``<i|A|i>``;
    ``middle_factor`` is ``|<R|U|i>|^2 / (p P_{i->f})``.
    """

    terms: tuple[DecompositionTerm, DecompositionTerm]
    retained_probability: float
    middle_factor: float
    total: float


def ancilla_decomposition(i: Ket, spec: PartialCollapseSpec, f: Ket) -> AncillaDecomposition:
    if spec.p1 == 0.0:
        raise ZeroStrengthError("p = 0: the ancilla is never populated")
    space = ancilla_space(spec, f)
    u, ut = space.U.matrix, space.U_tilde.matrix
    v = embed(i)
    r = np.array([0, 0, 1], dtype=complex)
    targets = (r, embed(complement(space.f)))
    channels = {"Rbar": ut @ space.pi_Rbar @ u @ v, "R": ut @ space.pi_R @ u @ v}
    terms = []
    for fn in targets:
        amps = {j: abs(np.vdot(fn, w)) ** 2 for j, w in channels.items()}
        weight = float(amps["Rbar"] + amps["R"])
        cond = complex(amps["R"] / weight) if weight > 0 else None
        terms.append(DecompositionTerm(weight, cond))
    p_retained = terms[0].weight
    if p_retained == 0.0:
        raise UndefinedBranchError("P_{i->f} vanishes")
    leak = abs(np.vdot(r, u @ v)) ** 2
    total = sum(t.contribution for t in terms).real / spec.p1
    return AncillaDecomposition(tuple(terms), p_retained, leak / (spec.p1 * p_retained), total)
