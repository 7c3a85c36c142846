import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cvverify.errors import MixedTruncation, ShapeMismatch, TailTooLarge
from cvverify.fock import (ModeOperator, TruncationConfig, coherent_overlap, coherent_state, default_dim,
                           fidelity, fock_state, identity, kron, overlap, tensor, vacuum)

from conftest import coherent_gram

amp = st.complex_numbers(max_magnitude=2.0, allow_nan=False, allow_infinity=False)


def test_truncation_validation():
    with pytest.raises(ValueError):
        TruncationConfig(1)
    with pytest.raises(ValueError):
        TruncationConfig(10, 1.0)
    assert TruncationConfig(10, 0.0).dim == 10


def test_default_dim_rule():
    assert default_dim(0) == 16
    assert default_dim(1) == 17
    assert default_dim(2) == 26


def test_vacuum_from_zero_amplitude():
    s = coherent_state(0, TruncationConfig(12))
    assert s.amplitudes[0] == 1
    assert np.all(s.amplitudes[1:] == 0)
    assert s.tail_mass == 0


def test_coherent_alpha_one():
    s = coherent_state(1, TruncationConfig(20))
    assert abs(s.probabilities()[0] - math.exp(-1)) < 1e-10
    assert abs(s.mean_photon_numbers()[0] - 1.0) < 1e-9
    assert 1 - s.norm() ** 2 < 1e-10


def test_tail_too_large():
    with pytest.raises(TailTooLarge) as err:
        coherent_state(4, TruncationConfig(10))
    assert err.value.exit_code == 3


def test_amplitudes_read_only():
    s = coherent_state(0.5, TruncationConfig(16))
    with pytest.raises(ValueError):
        s.amplitudes[0] = 0


def test_tensor_vacuum_and_overlaps():
    t = TruncationConfig(20)
    vv = tensor([vacuum(t), vacuum(t)])
    assert vv.amplitudes.shape == (20, 20) and vv.amplitudes[0, 0] == 1
    a0 = tensor([coherent_state(1, t), vacuum(t)])
    b0 = tensor([vacuum(t), coherent_state(1, t)])
    assert abs(overlap(a0, a0) - 1) < 1e-12
    assert abs(overlap(a0, b0) - math.exp(-1)) < 1e-9


def test_overlap_examples():
    t = TruncationConfig(25)
    assert abs(overlap(fock_state(0, t), fock_state(1, t))) == 0
    assert abs(overlap(coherent_state(1, t), coherent_state(-1, t)) - math.exp(-2)) < 1e-9


def test_mixed_truncation_rejected():
    with pytest.raises(MixedTruncation):
        tensor([vacuum(TruncationConfig(10)), vacuum(TruncationConfig(12))])


def test_overlap_shape_mismatch():
    t = TruncationConfig(10)
    with pytest.raises(ShapeMismatch):
        overlap(vacuum(t), vacuum(t, 2))


@given(amp, amp)
def test_coherent_overlap_matches_analytic(a, b):
    t = TruncationConfig(25)
    tol = 10 * t.tail_tolerance
    num = overlap(coherent_state(a, t), coherent_state(b, t))
    assert abs(num - coherent_gram(a, b)) < tol
    assert abs(coherent_overlap(a, b) - coherent_gram(a, b)) < 1e-14


@given(amp, amp, amp)
def test_tensor_associative(a, b, c):
    t = TruncationConfig(25)
    sa, sb, sc = (coherent_state(x, t) for x in (a, b, c))
    left = tensor([tensor([sa, sb]), sc])
    flat = tensor([sa, sb, sc])
    assert np.max(np.abs(left.amplitudes - flat.amplitudes)) < 1e-12


@given(amp)
def test_constructed_states_normalized(a):
    s = coherent_state(a, TruncationConfig(25))
    assert abs(1 - np.sum(np.abs(s.amplitudes) ** 2)) < 1e-10
    assert abs(overlap(s, s)) <= 1 + 1e-10


def test_mode_operator_checks():
    t = TruncationConfig(4)
    with pytest.raises(ValueError):
        ModeOperator.single(np.array([[0, 1], [0, 0]] * 2).reshape(4, 2), hermitian=True)
    bad = np.zeros((4, 4))
    bad[0, 1] = 1
    with pytest.raises(ValueError):
        ModeOperator.single(bad, hermitian=True)
    with pytest.raises(ValueError):
        ModeOperator.single(2 * np.eye(4), projector=True)
    one = identity(t, 2)
    assert one.matrix.shape == (16, 16)
    p0 = np.zeros((4, 4))
    p0[0, 0] = 1
    op = kron(ModeOperator.single(p0, projector=True), ModeOperator.single(np.eye(4)))
    s = tensor([fock_state(0, t), fock_state(2, t)])
    assert abs(op.expectation(s) - 1) < 1e-15
    assert abs((op @ op).expectation(s) - 1) < 1e-15


def test_fidelity_ignores_global_phase():
    t = TruncationConfig(16)
    s = coherent_state(0.7, t)
    assert abs(fidelity(s, s.with_amplitudes(1j * s.amplitudes)) - 1) < 1e-14
