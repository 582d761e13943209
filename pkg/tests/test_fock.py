import math

import numpy as np
import pytest

from module.Fock import (A, A_OUT, AD, B, D, H, V, DomainMismatchError, ModeLabel, ModeTransform,
                         NonUnitaryError, OccupationVector, PhotonNumberError, PhotonicState,
                         UnnormalizedStateError, ZeroNormError, apply_transform, create, create_superposition,
                         fock_state, identity_transform, inner_product, norm, normalize,
                         oracle_occupation_probability, permanent, polarization_basis_change,
                         projection_probability, restrict, subspace_probability, to_first_quantized, vacuum)
from module.Optics import hwp_transform


def occ(*modes):
    mapping = {}
    for m in modes:
        mapping[m] = mapping.get(m, 0) + 1
    return OccupationVector.from_mapping(mapping)


def test_mode_label_rejects_unknown_labels():
    with pytest.raises(ValueError):
        ModeLabel('c', H)
    with pytest.raises(ValueError):
        ModeLabel(A, 'X')
    with pytest.raises(ValueError):
        ModeLabel(A, H, -1)


def test_occupation_vector_ignores_photon_order():
    m, n = ModeLabel(A, H), ModeLabel(B, V, 1)
    assert occ(m, n) == occ(n, m)
    assert occ(m, n).total == 2
    assert occ(m, m).count(m) == 2
    assert occ(m, m).photons() == (m, m)


def test_vacuum_is_normalized():
    state = vacuum()
    assert state.normalized
    assert state.photon_numbers == {0}
    assert norm(state) == 1.0


def test_create_single_photon():
    m = ModeLabel(A, H)
    state = create(vacuum(), m)
    assert state.amplitude(occ(m)) == 1.0


def test_create_twice_in_same_mode_carries_sqrt_two():
    m = ModeLabel(A_OUT, D)
    state = create(create(vacuum(), m), m)
    assert np.isclose(state.amplitude(occ(m, m)), math.sqrt(2))
    assert np.isclose(normalize(state).amplitude(occ(m, m)), 1.0)


def test_creation_operators_commute():
    m1, m2 = ModeLabel(A_OUT, H, 0), ModeLabel(A_OUT, V, 1)
    assert create(create(vacuum(), m1), m2) == create(create(vacuum(), m2), m1)


def test_third_photon_is_out_of_scope():
    m = ModeLabel(A, H)
    state = create(create(vacuum(), m), m)
    with pytest.raises(PhotonNumberError):
        create(state, ModeLabel(B, H))


def test_create_superposition_is_linear():
    h, v = ModeLabel(A, H), ModeLabel(A, V)
    state = create_superposition(vacuum(), [(h, 0.6), (v, 0.8j)])
    assert np.isclose(state.amplitude(occ(h)), 0.6)
    assert np.isclose(state.amplitude(occ(v)), 0.8j)
    assert np.isclose(norm(state), 1.0)


def test_normalize_zero_state_raises():
    with pytest.raises(ZeroNormError):
        normalize(PhotonicState({}))


def test_normalized_flag_is_checked():
    with pytest.raises(UnnormalizedStateError):
        PhotonicState({occ(ModeLabel(A, H)): 2.0}, normalized=True)


def test_tiny_amplitudes_are_pruned():
    state = PhotonicState({occ(ModeLabel(A, H)): 1.0, occ(ModeLabel(A, V)): 1e-17})
    assert len(state.amplitudes) == 1


def test_inner_product_is_antilinear_in_first_argument():
    state = fock_state(ModeLabel(A, H), ModeLabel(B, V))
    assert np.isclose(inner_product(state.scaled(1j), state), -1j)
    assert np.isclose(inner_product(state, state.scaled(1j)), 1j)


def test_non_unitary_matrix_is_rejected():
    modes = (ModeLabel(A, H), ModeLabel(A, V))
    with pytest.raises(NonUnitaryError):
        ModeTransform(modes, [[1.0, 1.0], [0.0, 1.0]])
    projection = ModeTransform(modes, [[1.0, 0.0], [0.0, 0.0]], projection=True)
    assert not projection.is_unitary()


def test_transform_shape_and_duplicates_are_checked():
    m = ModeLabel(A, H)
    with pytest.raises(DomainMismatchError):
        ModeTransform((m, m), np.eye(2))
    with pytest.raises(DomainMismatchError):
        ModeTransform((m,), np.eye(2))


def test_identity_transform_leaves_state_alone():
    state = fock_state(ModeLabel(A, H), ModeLabel(A, V))
    out = apply_transform(state, identity_transform([ModeLabel(A, H), ModeLabel(A, V)]))
    assert out.amplitudes == state.amplitudes
    assert out.normalized


def test_hv_pair_in_one_beam_has_no_da_coincidence():
    h, v = ModeLabel(A_OUT, H), ModeLabel(A_OUT, V)
    psi = normalize(create(create(vacuum(), h), v))
    rotated = apply_transform(psi, polarization_basis_change(A_OUT, (0,)))
    d, ad = ModeLabel(A_OUT, D), ModeLabel(A_OUT, AD)
    assert np.isclose(rotated.amplitude(occ(d, d)), 1 / math.sqrt(2))
    assert np.isclose(rotated.amplitude(occ(ad, ad)), -1 / math.sqrt(2))
    assert rotated.amplitude(occ(d, ad)) == 0
    assert np.isclose(projection_probability(rotated, fock_state(d, d)), 0.5)


def test_transform_must_cover_every_occupied_mode_on_its_paths():
    state = fock_state(ModeLabel(B, H, 1))
    with pytest.raises(DomainMismatchError):
        apply_transform(state, hwp_transform(math.pi / 4, B, temporal_modes=(0,)))


def test_relabelling_into_occupied_outputs_is_rejected():
    state = fock_state(ModeLabel(A_OUT, H), ModeLabel(A_OUT, D))
    with pytest.raises(DomainMismatchError):
        apply_transform(state, polarization_basis_change(A_OUT))


def test_then_composes_half_wave_plates_to_identity():
    hwp = hwp_transform(0.3, A)
    twice = hwp.then(hwp)
    assert np.allclose(twice.matrix, np.eye(len(twice.domain)))


def test_projection_probability_requires_normalized_state():
    state = PhotonicState({occ(ModeLabel(A, H)): 2.0})
    with pytest.raises(UnnormalizedStateError):
        projection_probability(state, fock_state(ModeLabel(A, H)))


def test_projection_probability_sums_over_subspace():
    h, v = ModeLabel(A, H), ModeLabel(A, V)
    state = normalize(create_superposition(vacuum(), [(h, 1.0), (v, 1.0)]))
    assert np.isclose(projection_probability(state, [fock_state(h), fock_state(v)]), 1.0)


def test_subspace_probability_and_restrict():
    h, v = ModeLabel(A, H), ModeLabel(A, V)
    state = create_superposition(vacuum(), [(h, 1.0), (v, 1.0)])
    assert np.isclose(subspace_probability(state, lambda o: o.modes == (h,)), 0.5)
    assert restrict(state, lambda o: o.modes == (h,)).amplitudes == {occ(h): 1.0}
    with pytest.raises(ZeroNormError):
        subspace_probability(PhotonicState({}), lambda o: True)


def test_first_quantized_form_is_symmetric():
    m, n = ModeLabel(A_OUT, H), ModeLabel(A_OUT, V)
    psi = to_first_quantized(fock_state(m, n), [m, n])
    assert np.allclose(psi, psi.T)
    assert np.isclose(np.sum(np.abs(psi) ** 2), 1.0)
    assert np.isclose(to_first_quantized(normalize(create(create(vacuum(), m), m)), [m, n])[0, 0], 1.0)


def test_permanent_two_by_two():
    assert np.isclose(permanent([[1, 2], [3, 4]]), 10.0)
    assert np.isclose(permanent([[1, -2], [-3, 4]]), 10.0)


def test_oracle_reproduces_beam_splitter_bunching():
    phi1 = np.array([1, 1]) / math.sqrt(2)
    phi2 = np.array([-1, 1]) / math.sqrt(2)
    assert np.isclose(oracle_occupation_probability(phi1, phi2, (0, 1)), 0.0)
    assert np.isclose(oracle_occupation_probability(phi1, phi2, (0, 0)), 0.5)
    assert np.isclose(oracle_occupation_probability(phi1, phi2, (1, 1)), 0.5)
