"""Exact dense linear algebra over small labeled Hilbert spaces.

Everything in the package is built on three immutable value types:

* :class:`Ket`, a complex amplitude vector with one label per basis state,
* :class:`Observable`, a Hermitian operator stored by its spectral
  decomposition ``{(a_j, Pi_j)}``,
* :class:`LinearMap`, a square matrix that may or may not claim unitarity.

Dimensions never exceed a handful of states, so plain ``numpy`` arrays are
used throughout.  States are compared through the fidelity ``|<a|b>|^2``;
global phases are never canonicalized.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Iterable, Sequence

import numpy as np

from .errors import BasisError, DimensionError, LabelCollisionError

ATOL = 1e-12


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Ket:
    """Complex amplitude vector over a labeled basis.

    Parameters
    ----------
    amps : array_like
        One complex amplitude per basis state.  Kets are not forced to be
        normalized (images under non-unitary maps are legitimate kets);
        call :meth:`normalize` where a physical state is needed.
    labels : sequence of hashable, optional
        Basis-state names, defaults to ``0, 1, ..., n-1``.
    spaces : tuple of str
        Names of the tensor factors the ket lives in.  Used only to refuse
        tensoring a space with itself.
    """

    amps: np.ndarray
    labels: tuple = None  # type: ignore[assignment]
    spaces: tuple[str, ...] = ("system",)

    def __post_init__(self) -> None:
        amps = np.array(self.amps, dtype=complex).reshape(-1)
        if amps.size < 1:
            raise DimensionError("a ket needs at least one basis state")
        labels = tuple(range(amps.size)) if self.labels is None else tuple(self.labels)
        if len(labels) != amps.size:
            raise DimensionError(f"{len(labels)} labels for {amps.size} amplitudes")
        if len(set(labels)) != len(labels):
            raise ValueError(f"basis labels must be unique: {labels}")
        spaces = (self.spaces,) if isinstance(self.spaces, str) else tuple(self.spaces)
        object.__setattr__(self, "amps", _frozen(amps))
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "spaces", spaces)

    @property
    def dim(self) -> int:
        return self.amps.size

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def normalize(self) -> Ket:
        n = self.norm
        if n == 0.0:
            raise ZeroDivisionError("cannot normalize the zero vector")
        return Ket(self.amps / n, self.labels, self.spaces)

    def amplitude(self, label: Hashable) -> complex:
        return complex(self.amps[self.labels.index(label)])

    def inner(self, other: Ket) -> complex:
        """Return ``<self|other>``."""
        _check_dim(self.dim, other.dim)
        return complex(np.vdot(self.amps, other.amps))

    def with_amps(self, amps: Sequence[complex]) -> Ket:
        return Ket(amps, self.labels, self.spaces)

    def __repr__(self) -> str:
        terms = ", ".join(f"{l}: {a:.6g}" for l, a in zip(self.labels, self.amps))
        return f"Ket({terms})"


def basis_ket(label: Hashable, labels: Sequence[Hashable] = (0, 1), space: str = "system") -> Ket:
    amps = np.zeros(len(labels), dtype=complex)
    amps[list(labels).index(label)] = 1.0
    return Ket(amps, tuple(labels), (space,))


def qubit(alpha: complex, beta: complex, space: str = "system") -> Ket:
    """Return ``alpha|0> + beta|1>`` without normalizing."""
    return Ket([alpha, beta], (0, 1), (space,))


def fidelity(a: Ket, b: Ket) -> float:
    """``|<a|b>|^2`` for normalized inputs; phase-insensitive comparison."""
    return abs(a.inner(b)) ** 2


def outer(ket: Ket) -> np.ndarray:
    """Projector-like matrix ``|k><k|``."""
    return np.outer(ket.amps, ket.amps.conj())


def _check_dim(m: int, n: int) -> None:
    if m != n:
        raise DimensionError(f"dimension mismatch: {m} != {n}")


def _check_projector(p: np.ndarray, atol: float = ATOL) -> None:
    if not np.allclose(p, p.conj().T, rtol=0, atol=atol):
        raise ValueError("projector is not Hermitian")
    if not np.allclose(p @ p, p, rtol=0, atol=atol):
        raise ValueError("projector is not idempotent")


@dataclass(frozen=True, eq=False)
class Observable:
    """Hermitian operator held as ``sum_j a_j Pi_j``.

    The projectors must be mutually orthogonal, idempotent and resolve the
    identity (absolute tolerance ``1e-12``).  Eigenvalues are distinct; use
    :meth:`from_matrix` or :meth:`diagonal` to group degeneracies.
    """

    eigenpairs: tuple[tuple[float, np.ndarray], ...]

    def __post_init__(self) -> None:
        pairs = []
        for a, p in self.eigenpairs:
            p = np.array(p, dtype=complex)
            if p.ndim != 2 or p.shape[0] != p.shape[1]:
                raise DimensionError("projectors must be square matrices")
            pairs.append((float(a), _frozen(p)))
        if not pairs:
            raise ValueError("an observable needs at least one eigenpair")
        dim = pairs[0][1].shape[0]
        for _, p in pairs:
            _check_dim(dim, p.shape[0])
            _check_projector(p)
        for j, (_, p) in enumerate(pairs):
            for _, q in pairs[j + 1:]:
                if not np.allclose(p @ q, 0, rtol=0, atol=ATOL):
                    raise ValueError("projectors are not mutually orthogonal")
        total = sum(p for _, p in pairs)
        if not np.allclose(total, np.eye(dim), rtol=0, atol=ATOL):
            raise ValueError("projectors do not resolve the identity")
        object.__setattr__(self, "eigenpairs", tuple(pairs))

    @classmethod
    def from_matrix(cls, matrix: np.ndarray, degeneracy_tol: float = 1e-9) -> Observable:
        m = np.asarray(matrix, dtype=complex)
        if not np.allclose(m, m.conj().T, rtol=0, atol=ATOL):
            raise ValueError("matrix is not Hermitian")
        vals, vecs = np.linalg.eigh(m)
        pairs = []
        start = 0
        for k in range(1, len(vals) + 1):
            if k == len(vals) or vals[k] - vals[start] > degeneracy_tol:
                v = vecs[:, start:k]
                pairs.append((float(np.mean(vals[start:k])), v @ v.conj().T))
                start = k
        return cls(tuple(pairs))

    @classmethod
    def diagonal(cls, values: Iterable[float]) -> Observable:
        """Observable diagonal in the computational basis."""
        values = [float(v) for v in values]
        pairs = []
        for a in dict.fromkeys(values):
            p = np.diag([1.0 if v == a else 0.0 for v in values]).astype(complex)
            pairs.append((a, p))
        return cls(tuple(pairs))

    @classmethod
    def projector_onto(cls, ket: Ket) -> Observable:
        """``|k><k|`` as an observable with spectrum ``{0, 1}``."""
        p = outer(ket.normalize())
        rest = np.eye(ket.dim) - p
        if ket.dim == 1:
            return cls(((1.0, p),))
        return cls(((0.0, rest), (1.0, p)))

    @property
    def dim(self) -> int:
        return self.eigenpairs[0][1].shape[0]

    @property
    def eigenvalues(self) -> tuple[float, ...]:
        return tuple(a for a, _ in self.eigenpairs)

    @property
    def projectors(self) -> tuple[np.ndarray, ...]:
        return tuple(p for _, p in self.eigenpairs)

    @property
    def matrix(self) -> np.ndarray:
        return sum(a * p for a, p in self.eigenpairs)


def number_operator() -> Observable:
    """The qubit observable ``|1><1|`` used by every protocol here."""
    return Observable.diagonal([0.0, 1.0])


@dataclass(frozen=True, eq=False)
class LinearMap:
    """Square matrix acting on kets; ``unitary`` is a checked claim."""

    matrix: np.ndarray
    unitary: bool = False
    labels: tuple | None = field(default=None)

    def __post_init__(self) -> None:
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionError("linear maps here are square")
        if self.unitary and not np.allclose(m.conj().T @ m, np.eye(m.shape[0]), rtol=0, atol=ATOL):
            raise ValueError("matrix flagged unitary but M^dag M != 1")
        object.__setattr__(self, "matrix", _frozen(m))

    @property
    def is_unitary(self) -> bool:
        """Whether the matrix is unitary, independent of the stored flag."""
        m = self.matrix
        return bool(np.allclose(m.conj().T @ m, np.eye(m.shape[0]), rtol=0, atol=ATOL))

    def apply(self, ket: Ket) -> Ket:
        _check_dim(self.matrix.shape[1], ket.dim)
        return Ket(self.matrix @ ket.amps, self.labels or ket.labels, ket.spaces)

    def adjoint(self) -> LinearMap:
        return LinearMap(self.matrix.conj().T, self.unitary, self.labels)

    def __matmul__(self, other: LinearMap) -> LinearMap:
        return LinearMap(self.matrix @ other.matrix, self.unitary and other.unitary, self.labels)


def tensor(a: Ket, b: Ket) -> Ket:
    """Product state ``|a> (x) |b>`` with pair labels ``(la, lb)``."""
    clash = set(a.spaces) & set(b.spaces)
    if clash:
        raise LabelCollisionError(f"tensor factors share spaces {sorted(clash)}")
    labels = tuple(
        (*(la if isinstance(la, tuple) else (la,)), *(lb if isinstance(lb, tuple) else (lb,)))
        for la in a.labels
        for lb in b.labels
    )
    return Ket(np.kron(a.amps, b.amps), labels, a.spaces + b.spaces)


def expectation(A: Observable, psi: Ket) -> float:
    """``<psi|A|psi> = sum_j a_j <psi|Pi_j|psi>``."""
    _check_dim(A.dim, psi.dim)
    v = psi.amps
    total = sum(a * np.vdot(v, p @ v) for a, p in A.eigenpairs)
    return float(np.real(total))


def project(proj: np.ndarray, psi: Ket) -> tuple[float, Ket | None]:
    """Born rule for one projective outcome.

    Returns the outcome probability and the renormalized post-measurement
    state, or ``None`` when the outcome is impossible.
    """
    proj = np.asarray(proj)
    _check_dim(proj.shape[1], psi.dim)
    image = proj @ psi.amps
    prob = float(np.real(np.vdot(image, image)))
    prob = min(max(prob, 0.0), 1.0)
    if prob <= 0.0:
        return 0.0, None
    return prob, Ket(image / np.sqrt(prob), psi.labels, psi.spaces)


def check_orthonormal_basis(basis: Sequence[Ket], atol: float = 1e-10) -> None:
    """Raise :class:`BasisError` unless ``basis`` is orthonormal and complete."""
    if not basis:
        raise BasisError("empty basis")
    dim = basis[0].dim
    for k in basis:
        _check_dim(dim, k.dim)
    if len(basis) != dim:
        raise BasisError(f"{len(basis)} states cannot span dimension {dim}")
    gram = np.array([[a.inner(b) for b in basis] for a in basis])
    if not np.allclose(gram, np.eye(dim), rtol=0, atol=atol):
        raise BasisError("basis is not orthonormal")


def complement(f: Ket) -> Ket:
    """The qubit state orthogonal to ``f`` (``|f-bar>``)."""
    if f.dim != 2:
        raise DimensionError("orthogonal complement is defined here for qubits only")
    a, b = f.normalize().amps
    return Ket([-np.conj(b), np.conj(a)], f.labels, f.spaces)


def random_ket(rng: np.random.Generator, dim: int = 2) -> Ket:
    """Haar-random pure state."""
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return Ket(v / np.linalg.norm(v))


def random_basis(rng: np.random.Generator, dim: int = 2) -> list[Ket]:
    """Columns of a Haar-random unitary, as kets."""
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    q = q * (np.diag(r) / np.abs(np.diag(r)))
    return [Ket(q[:, n]) for n in range(dim)]


def random_observable(rng: np.random.Generator, dim: int = 2, scale: float = 1.0) -> Observable:
    h = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return Observable.from_matrix(scale * (h + h.conj().T) / 2)
