import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from cvverify.errors import BadArity, BadSpec, ConstraintViolated
from cvverify.fock import TruncationConfig, fidelity, overlap, vacuum
from cvverify.operators import parity_projectors
from cvverify.states import (StateSpec, apply_displacements, build_state, closed_form_normalization,
                             gram_norm_sq, local_equivalence_transform, parse_complex, transformed_state)

from conftest import product_gram

real = st.floats(-1.2, 1.2, allow_nan=False)
cplx = st.complex_numbers(max_magnitude=1.0, allow_nan=False, allow_infinity=False)

SPECS = [
    StateSpec("Coherent", (0.8j,)),
    StateSpec("CatEven", (1,)),
    StateSpec("CatOdd", (1.3,)),
    StateSpec("BalancedCSS", (1, -0.5)),
    StateSpec("ECS_plus", (1, 1)),
    StateSpec("ECS_minus", (1.5, 0.8)),
    StateSpec("ECS_general", (1.2, 0.4, 0.3, 0.9), sign=-1),
    StateSpec("GHZ_plus", (1, 1, 1)),
    StateSpec("GHZ_minus", (1, 0.5j)),
    StateSpec("GHZ_general", (1, 1, 0.2, 0.1)),
]


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.family)
def test_every_family_normalized(spec):
    s = build_state(spec)
    assert abs(overlap(s, s) - 1) < 1e-10
    assert s.amplitudes.shape == (spec.default_truncation().dim,) * spec.num_modes


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.family)
def test_normalization_matches_closed_form(spec):
    s = build_state(spec, TruncationConfig(30))
    assert abs(s.raw_norm_sq - closed_form_normalization(spec)) < 1e-9 * closed_form_normalization(spec)


def test_ecs_normalization_value():
    assert abs(closed_form_normalization(StateSpec("ECS_plus", (1, 1))) - 2 * (1 + math.exp(-1))) < 1e-12
    assert abs(build_state(StateSpec("ECS_plus", (1, 1))).raw_norm_sq - 2.7357588823) < 1e-9


def test_cat_limit_is_vacuum():
    t = TruncationConfig(16)
    assert fidelity(build_state(StateSpec("CatEven", (1e-6,)), t), vacuum(t)) > 1 - 1e-10


@given(st.floats(0.05, 2.0))
def test_cat_parity(a):
    t = TruncationConfig(26)
    plus, minus = parity_projectors(t)
    even = build_state(StateSpec("CatEven", (a,)), t)
    odd = build_state(StateSpec("CatOdd", (a,)), t)
    assert np.max(np.abs(plus.apply(even).amplitudes - even.amplitudes)) < 1e-10
    assert np.max(np.abs(minus.apply(odd).amplitudes - odd.amplitudes)) < 1e-10


def test_ghz2_equivalent_to_ecs():
    t = TruncationConfig(25)
    ghz = build_state(StateSpec("GHZ_plus", (1, 1)), t)
    ecs = build_state(StateSpec("ECS_plus", (1, -1)), t)
    # |1>|0> + |0>|-1>  --(1 x D(+1))-->  |1>|1> + |0>|0>
    moved = apply_displacements(ecs, [0, 1])
    assert fidelity(moved, ghz) > 1 - 1e-8


def test_arity_errors():
    with pytest.raises(BadArity):
        StateSpec("ECS_plus", (1,))
    with pytest.raises(BadArity):
        StateSpec("GHZ_plus", (1,))
    with pytest.raises(BadArity):
        StateSpec("GHZ_general", (1, 2, 3))
    with pytest.raises(BadSpec):
        StateSpec("Squeezed", (1,))
    with pytest.raises(BadSpec):
        StateSpec("ECS_general", (1, 1, 1, 1), sign=2)


def test_aliases_and_round_trip():
    spec = StateSpec("ecs-general", (1, 0.5j, 0.3, 0.2), sign=-1)
    assert spec.family == "ECS_general"
    assert StateSpec.from_dict(spec.to_dict()) == spec
    assert parse_complex("1+2i") == 1 + 2j
    assert parse_complex([1, -1]) == 1 - 1j
    assert parse_complex({"re": 0.5}) == 0.5


@given(st.lists(st.tuples(cplx, cplx, cplx), min_size=1, max_size=4))
def test_gram_norm_matches_fock(terms):
    terms = [(c, (a, b)) for c, a, b in terms]
    want = sum(np.conj(ci) * cj * product_gram(ai, aj) for ci, ai in terms for cj, aj in terms).real
    assume(want > 1e-3)
    assert abs(gram_norm_sq(terms) - want) < 1e-10


def test_equivalence_example_case_one():
    rep = local_equivalence_transform(StateSpec("ECS_general", (1.2, 0.4, 0.3, 0.9)))
    assert rep.multiple_of_pi == 0 and rep.constraint_2npi and rep.protocol_sign == 1
    assert rep.canonical.family == "ECS_plus"
    assert np.allclose(rep.canonical.params, (0.9, 0.5))
    assert np.allclose(rep.displacements, (-0.3, -0.4))


def test_equivalence_zero_betas():
    rep = local_equivalence_transform(StateSpec("GHZ_general", (1, 0.5, 0.7, 0, 0, 0)))
    assert all(d == 0 for d in rep.displacements)
    assert rep.constraint_2npi and rep.canonical == StateSpec("GHZ_plus", (1, 0.5, 0.7))


def test_equivalence_pi_maps_to_minus():
    # Im(a b*) summed over modes equals pi
    a1 = 1.5j
    b2 = (math.pi - 1.5 * 1.2) / 1.1
    spec = StateSpec("GHZ_general", (a1, 1.1j, 1.2, b2))
    rep = local_equivalence_transform(spec)
    assert rep.multiple_of_pi == 1 and not rep.constraint_2npi
    assert rep.canonical.family == "GHZ_minus"
    t = TruncationConfig(40)
    assert fidelity(transformed_state(rep, t), build_state(rep.canonical, t)) > 1 - 1e-7


def test_equivalence_constraint_violation():
    with pytest.raises(ConstraintViolated) as err:
        local_equivalence_transform(StateSpec("ECS_general", (1, 1j, 0.3, 0.2)))
    assert err.value.exit_code == 2


def test_balanced_css_through_beam_splitter():
    spec = StateSpec("BalancedCSS", (1.0, -0.6))
    rep = local_equivalence_transform(spec)
    assert rep.beam_splitter_theta == pytest.approx(math.pi / 4)
    t = TruncationConfig(30)
    assert fidelity(transformed_state(rep, t), build_state(rep.canonical, t)) > 1 - 1e-7
    with pytest.raises(ConstraintViolated):
        # Im(a b*) = pi is an odd multiple: unsupported for this family
        local_equivalence_transform(StateSpec("BalancedCSS", (math.sqrt(math.pi) * 1j, math.sqrt(math.pi))))


def test_equivalence_rejects_canonical_families():
    with pytest.raises(BadSpec):
        local_equivalence_transform(StateSpec("ECS_plus", (1, 1)))


@given(st.tuples(real, real, real, real), st.sampled_from([1, -1]))
def test_equivalence_soundness_real_ecs(p, sign):
    spec = StateSpec("ECS_general", p, sign=sign)
    a1, a2, b1, b2 = p
    assume(abs(a1 - b1) + abs(b2 - a2) > 0.05)
    rep = local_equivalence_transform(spec)
    t = TruncationConfig(30)
    assert fidelity(transformed_state(rep, t), build_state(rep.canonical, t)) > 1 - 1e-7


@given(st.lists(cplx, min_size=2, max_size=2), st.lists(cplx, min_size=2, max_size=2))
def test_equivalence_soundness_complex_ghz(alphas, betas):
    # shift beta_0 by i*phase*alpha_0/|alpha_0|^2, which cancels the phase sum
    phase = sum((a * np.conj(b)).imag for a, b in zip(alphas, betas))
    assume(abs(alphas[0]) > 0.2)
    betas[0] = betas[0] + 1j * phase * alphas[0] / abs(alphas[0]) ** 2
    spec = StateSpec("GHZ_general", tuple(alphas) + tuple(betas))
    rep = local_equivalence_transform(spec)
    assert rep.multiple_of_pi == 0
    assume(max(abs(x) for x in rep.canonical.params) > 0.05)
    t = TruncationConfig(30)
    assert fidelity(transformed_state(rep, t), build_state(rep.canonical, t)) > 1 - 1e-7
