import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qmpsim.errors import DivergentValueError, GridError
from qmpsim.hilbert import expectation, number_operator, qubit, random_ket
from qmpsim.pointer import (
    GaussianPointer,
    couple,
    momentum_mean,
    pointer_moments,
    postselected_pointer_distribution,
    postselected_wavefunction,
    postselection_probability,
    unconditioned_distribution,
)
from qmpsim.weakvalues import weak_value

N = number_operator()
I = qubit(0.6, 0.8)
PLUS = qubit(1, 1).normalize()


def two_branch_oracle(i, f, lam, q0=0.0, delta=1.0):
    """Closed-form mean and <p> of |c0 phi(q) + c1 phi(q - lam)|^2 for A = |1><1|.

    The cross term of two equal-width Gaussians displaced by ``s`` has overlap
    ``exp(-s^2 / 8 delta^2)`` and centroid ``q0 + s/2``.
    """
    c0 = np.conj(f.amps[0]) * i.amps[0]
    c1 = np.conj(f.amps[1]) * i.amps[1]
    ov = math.exp(-(lam**2) / (8 * delta**2))
    cross = 2 * (np.conj(c0) * c1).real * ov
    norm = abs(c0) ** 2 + abs(c1) ** 2 + cross
    mean = (abs(c0) ** 2 * q0 + abs(c1) ** 2 * (q0 + lam) + cross * (q0 + lam / 2)) / norm
    p_mean = (np.conj(c0) * c1).imag * lam * ov / (2 * delta**2) / norm
    return mean, p_mean


def test_zero_coupling_leaves_pointer_untouched():
    joint = couple(I, N, 0.0, GaussianPointer())
    ref = GaussianPointer().wave(joint.q)
    for b in joint.branches:
        np.testing.assert_allclose(b.wave, ref, atol=0)


def test_eigenstate_gives_single_shifted_branch():
    joint = couple(qubit(0, 1), N, 0.5, GaussianPointer(q0=1.0))
    assert len(joint.branches) == 1
    mean, var = pointer_moments(unconditioned_distribution(joint))
    assert mean == pytest.approx(1.5, abs=1e-9)
    assert var == pytest.approx(1.0, abs=1e-6)


def test_unconditioned_mean_two_branches():
    joint = couple(I, N, 0.5, GaussianPointer())
    mean, _ = pointer_moments(unconditioned_distribution(joint))
    assert mean == pytest.approx(0.5 * 0.64, abs=1e-9)


@pytest.mark.parametrize("lam", [0.0, 0.01, 0.3, 1.0, 4.0])
def test_unconditioned_mean_equals_lambda_times_expectation(lam):
    psi = random_ket(np.random.default_rng(1))
    joint = couple(psi, N, lam, GaussianPointer(q0=-0.5))
    mean, _ = pointer_moments(unconditioned_distribution(joint))
    assert mean == pytest.approx(-0.5 + lam * expectation(N, psi), abs=1e-9)


def test_distributions_are_normalized():
    joint = couple(I, N, 0.7, GaussianPointer())
    assert joint.norm() == pytest.approx(1.0, abs=1e-9)
    assert unconditioned_distribution(joint).total() == pytest.approx(1.0, abs=1e-9)
    assert postselected_pointer_distribution(joint, PLUS).total() == pytest.approx(1.0, abs=1e-9)


def test_postselection_on_preselected_state_at_zero_coupling():
    joint = couple(I, N, 0.0, GaussianPointer())
    rho = postselected_pointer_distribution(joint, I)
    np.testing.assert_allclose(rho.density, GaussianPointer().wave(joint.q) ** 2, atol=1e-12)


def test_postselection_probability_matches_born_rule():
    joint = couple(I, N, 0.0, GaussianPointer())
    assert postselection_probability(joint, PLUS) == pytest.approx(0.98, abs=1e-9)


def test_postselection_onto_eigenstate_gives_shifted_gaussian():
    joint = couple(I, N, 2.0, GaussianPointer())
    rho = postselected_pointer_distribution(joint, qubit(0, 1))
    np.testing.assert_allclose(rho.density, GaussianPointer().wave(joint.q, 2.0) ** 2, atol=1e-12)


@pytest.mark.parametrize("lam", [1e-2, 0.1, 0.5, 2.0])
def test_postselected_mean_matches_closed_form(lam):
    joint = couple(I, N, lam, GaussianPointer())
    mean, _ = pointer_moments(postselected_pointer_distribution(joint, PLUS))
    assert mean == pytest.approx(two_branch_oracle(I, PLUS, lam)[0], abs=1e-10)


def test_weak_limit_error_decreases():
    wv = weak_value(I, PLUS, N).real
    errs = []
    for lam in (1e-2, 1e-3, 1e-4):
        joint = couple(I, N, lam, GaussianPointer())
        mean, _ = pointer_moments(postselected_pointer_distribution(joint, PLUS))
        errs.append(abs(mean / lam - wv))
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] <= 1e-3


def test_orthogonal_postselection_raises():
    joint = couple(qubit(1, 0), N, 0.0, GaussianPointer())
    with pytest.raises(DivergentValueError):
        postselected_wavefunction(joint, qubit(0, 1))


def test_grid_too_narrow_is_refused():
    with pytest.raises(GridError):
        GaussianPointer(grid=(-2.0, 2.0, 101))
    with pytest.raises(GridError):
        couple(I, N, 5.0, GaussianPointer(grid=(-8.0, 8.0, 1001)))


def test_pointer_rejects_non_positive_width():
    with pytest.raises(ValueError):
        GaussianPointer(delta=0.0)


@pytest.mark.parametrize("lam", [1e-3, 1e-2, 0.1])
@pytest.mark.parametrize("delta", [0.5, 1.0, 2.0])
def test_momentum_mean_matches_closed_form(lam, delta):
    i = qubit(0.6, 0.8j)
    joint = couple(i, N, lam, GaussianPointer(delta=delta))
    psi = postselected_wavefunction(joint, PLUS)
    expected = two_branch_oracle(i, PLUS, lam, delta=delta)[1]
    assert momentum_mean(joint.q, psi) == pytest.approx(expected, rel=1e-4, abs=1e-12)


def test_momentum_shift_tracks_imaginary_weak_value():
    # slope of <p> against lam Im(WV) is 1/(2 delta^2) in the weak limit
    lam, delta = 1e-3, 1.0
    rng = np.random.default_rng(5)
    for _ in range(10):
        i, f = random_ket(rng), random_ket(rng)
        if abs(f.inner(i)) ** 2 < 0.1:
            continue
        wv = weak_value(i, f, N)
        joint = couple(i, N, lam, GaussianPointer(delta=delta))
        p = momentum_mean(joint.q, postselected_wavefunction(joint, f))
        assert p == pytest.approx(lam * wv.imag / (2 * delta**2), abs=1e-6)


@settings(max_examples=50, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    lam=st.floats(-3, 3, allow_nan=False),
    q0=st.floats(-5, 5, allow_nan=False),
)
def test_postselected_density_normalized_and_mean_matches(seed, lam, q0):
    rng = np.random.default_rng(seed)
    i, f = random_ket(rng), random_ket(rng)
    joint = couple(i, N, lam, GaussianPointer(q0=q0))
    if postselection_probability(joint, f) < 1e-6:
        return
    rho = postselected_pointer_distribution(joint, f)
    assert rho.total() == pytest.approx(1.0, abs=1e-9)
    assert pointer_moments(rho)[0] == pytest.approx(two_branch_oracle(i, f, lam, q0)[0], abs=1e-8)
