"""Closed-form weak values and the two postselection decompositions.

Both decompositions rewrite ``<i|A|i>`` as ``sum_n w_n * c_n`` over a complete
postselection basis ``{|f_n>}``:

* :func:`wv_decomposition` uses ``w_n = |<f_n|i>|^2`` and the weak value
  ``c_n = <f_n|A|i> / <f_n|i>`` (complex, may leave the spectrum of ``A``);
* :func:`strong_decomposition` inserts ``Pi_j = Pi_j^2`` first, giving
  ``w_n = sum_j |<f_n|Pi_j|i>|^2`` and a conditional value that is a convex
  combination of eigenvalues.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DivergentValueError
from .hilbert import Ket, Observable, _check_dim, check_orthonormal_basis, expectation

EPSILON_OVERLAP = 1e-12


def weak_value(i: Ket, f: Ket, A: Observable, epsilon_overlap: float = EPSILON_OVERLAP) -> complex:
    """Return ``<f|A|i> / <f|i>``.

    Raises
    ------
    DivergentValueError
        If ``|<f|i>|^2 <= epsilon_overlap``; the exception carries the raw
        numerator ``<f|A|i>``.
    """
    _check_dim(A.dim, i.dim)
    _check_dim(A.dim, f.dim)
    numerator = complex(np.vdot(f.amps, A.matrix @ i.amps))
    overlap = f.inner(i)
    if abs(overlap) ** 2 <= epsilon_overlap:
        raise DivergentValueError(numerator, abs(overlap) ** 2, epsilon_overlap)
    return numerator / overlap


@dataclass(frozen=True)
class DecompositionTerm:
    """One postselection channel: probability-like weight and conditional value.

    ``conditional_value`` is ``None`` when the weight vanishes exactly and
    the conditional quantity is undefined.
    """

    weight: float
    conditional_value: complex | None

    @property
    def defined(self) -> bool:
        return self.conditional_value is not None

    @property
    def contribution(self) -> complex:
        return 0j if self.conditional_value is None else self.weight * self.conditional_value


def weighted_sum(terms: Sequence[DecompositionTerm]) -> complex:
    return complex(sum(t.contribution for t in terms))


def wv_decomposition(i: Ket, postselection_basis: Sequence[Ket], A: Observable) -> list[DecompositionTerm]:
    check_orthonormal_basis(postselection_basis)
    a_i = A.matrix @ i.amps
    terms = []
    for f in postselection_basis:
        overlap = f.inner(i)
        weight = abs(overlap) ** 2
        if weight == 0.0:
            terms.append(DecompositionTerm(0.0, None))
            continue
        # no epsilon guard: weight * value must reproduce <i|A|i> exactly
        terms.append(DecompositionTerm(weight, complex(np.vdot(f.amps, a_i)) / overlap))
    return terms


def strong_decomposition(i: Ket, postselection_basis: Sequence[Ket], A: Observable) -> list[DecompositionTerm]:
    check_orthonormal_basis(postselection_basis)
    projected = [(a, p @ i.amps) for a, p in A.eigenpairs]
    terms = []
    for f in postselection_basis:
        probs = [(a, abs(np.vdot(f.amps, v)) ** 2) for a, v in projected]
        weight = float(sum(w for _, w in probs))
        if weight == 0.0:
            terms.append(DecompositionTerm(0.0, None))
            continue
        terms.append(DecompositionTerm(weight, complex(sum(a * w for a, w in probs) / weight)))
    return terms


def decomposition_residual(terms: Sequence[DecompositionTerm], i: Ket, A: Observable) -> float:
    """``|sum_n w_n c_n - <i|A|i>|``; zero up to rounding for a complete basis."""
    return abs(weighted_sum(terms) - expectation(A, i))


def outside_spectrum(value: complex, A: Observable) -> bool:
    """True if ``Re(value)`` lies outside ``[min a_j, max a_j]``."""
    lo, hi = min(A.eigenvalues), max(A.eigenvalues)
    return not (lo <= value.real <= hi)
