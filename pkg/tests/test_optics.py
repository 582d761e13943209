import math

import numpy as np
import pytest

from module.Distinguishability import WavepacketModel
from module.Fock import (A, A_OUT, B, B_OUT, H, V, ModeLabel, OccupationVector, PhotonicState, apply_transform,
                         fock_state, norm)
from module.Optics import (ElementSpec, ZeroProbabilityError, beam_splitter_transform, coincidence_probability,
                           hwp_transform, pass_probability, polarizer_projection, post_select_same_output)


def single(mode):
    return OccupationVector.from_mapping({mode: 1})


def test_hwp_at_45_degrees_turns_h_into_v():
    out = apply_transform(fock_state(ModeLabel(B, H)), hwp_transform(math.pi / 4, B))
    assert np.isclose(out.amplitude(single(ModeLabel(B, V))), 1.0)
    assert np.isclose(abs(out.amplitude(single(ModeLabel(B, H)))), 0.0)


def test_hwp_at_zero_flips_the_sign_of_v():
    out = apply_transform(fock_state(ModeLabel(B, V)), hwp_transform(0.0, B))
    assert np.isclose(out.amplitude(single(ModeLabel(B, V))), -1.0)


def test_hwp_is_unitary():
    assert hwp_transform(0.37, A).is_unitary()


def test_polarizer_passes_half_of_an_overlapped_hv_pair():
    polarizer, non_unitary = polarizer_projection(math.pi / 4)
    assert non_unitary
    state = fock_state(ModeLabel(A_OUT, H, 0), ModeLabel(A_OUT, V, 0))
    assert np.isclose(pass_probability(state, polarizer), 0.5)


def test_polarizer_passes_a_quarter_of_a_separated_hv_pair():
    polarizer, _ = polarizer_projection(math.pi / 4)
    state = fock_state(ModeLabel(A_OUT, H, 0), ModeLabel(A_OUT, V, 1))
    assert np.isclose(pass_probability(state, polarizer), 0.25)


def test_polarizer_transmission_scales_per_photon():
    polarizer, _ = polarizer_projection(math.pi / 4, transmission=0.9)
    state = fock_state(ModeLabel(A_OUT, H, 0), ModeLabel(A_OUT, V, 0))
    assert np.isclose(pass_probability(state, polarizer), 0.5 * 0.81)


def test_polarizer_rejects_bad_transmission():
    with pytest.raises(ValueError):
        polarizer_projection(0.0, transmission=1.5)


def test_beam_splitter_bunches_identical_photons():
    out = apply_transform(fock_state(ModeLabel(A, H), ModeLabel(B, H)), beam_splitter_transform())
    assert coincidence_probability(out) < 1e-20
    state, probability = post_select_same_output(out, A_OUT)
    assert np.isclose(probability, 0.5)
    assert state.normalized


def test_beam_splitter_does_not_bunch_distinguishable_photons():
    out = apply_transform(fock_state(ModeLabel(A, H, 0), ModeLabel(B, H, 1)), beam_splitter_transform())
    assert np.isclose(coincidence_probability(out), 0.5)


def test_beam_splitter_sign_convention():
    out = apply_transform(fock_state(ModeLabel(B, H)), beam_splitter_transform(0.5))
    assert np.isclose(out.amplitude(single(ModeLabel(A_OUT, H))), -1 / math.sqrt(2))
    assert np.isclose(out.amplitude(single(ModeLabel(B_OUT, H))), 1 / math.sqrt(2))


def test_beam_splitter_with_zero_reflectivity_routes_straight_through():
    bs = beam_splitter_transform(0.0)
    a_out = apply_transform(fock_state(ModeLabel(A, V)), bs)
    b_out = apply_transform(fock_state(ModeLabel(B, V)), bs)
    assert np.isclose(a_out.amplitude(single(ModeLabel(B_OUT, V))), 1.0)
    assert np.isclose(b_out.amplitude(single(ModeLabel(A_OUT, V))), -1.0)


def test_beam_splitter_preserves_norm():
    out = apply_transform(fock_state(ModeLabel(A, H), ModeLabel(B, V, 1)), beam_splitter_transform(0.3))
    assert np.isclose(norm(out), 1.0)
    assert out.normalized


def test_beam_splitter_rejects_bad_reflectivity():
    with pytest.raises(ValueError):
        beam_splitter_transform(-0.1)


def test_post_selecting_an_empty_branch_raises():
    state = fock_state(ModeLabel(B_OUT, H), ModeLabel(B_OUT, V))
    with pytest.raises(ZeroProbabilityError):
        post_select_same_output(state, A_OUT)


def test_coincidence_probability_of_zero_state_raises():
    with pytest.raises(ValueError):
        coincidence_probability(PhotonicState({}))


def test_element_spec_validation():
    with pytest.raises(ValueError):
        ElementSpec('mirror')
    with pytest.raises(ValueError):
        ElementSpec(ElementSpec.HALF_WAVE_PLATE, angle=math.pi)
    with pytest.raises(ValueError):
        ElementSpec(ElementSpec.BEAM_SPLITTER, reflectivity=2.0)


def test_element_spec_builds_transforms():
    assert ElementSpec(ElementSpec.HALF_WAVE_PLATE, angle=math.pi / 4).to_transform(B).name == 'hwp(45.0deg)'
    polarizer = ElementSpec(ElementSpec.POLARIZER, angle=math.pi / 4).to_transform(A_OUT)
    assert polarizer.projection
    delay_line = ElementSpec(ElementSpec.DELAY_LINE, delay=100.0)
    assert delay_line.to_transform(B, model=WavepacketModel(210.0)).is_unitary()
    with pytest.raises(ValueError):
        delay_line.to_transform(B)


def test_element_spec_status():
    status = ElementSpec(ElementSpec.POLARIZER, angle=math.pi / 2, transmission=0.968).get_status()
    assert status["kind"] == ElementSpec.POLARIZER
    assert np.isclose(status["angle_deg"], 90.0)
    assert status["transmission"] == 0.968
