import logging
import math

import numpy as np
import pytest

import tomography
from module.Fock import A_OUT, H, V, ModeLabel, to_first_quantized
from tomography import (CANONICAL_SETTINGS, DensityMatrix, IncompleteProjectorSetError, InvalidDensityMatrixError,
                        NoCountsError, TomographySettings, entangled_target_state, expected_counts, fidelity,
                        gram_rank, linear_inversion, mle_reconstruct, rho_from_params, read_counts_csv,
                        read_density_matrix_json, simulate_tomography, t_params, trace_distance, write_counts_csv,
                        write_density_matrix_json)


@pytest.fixture
def settings():
    return TomographySettings(counts_per_setting=5000, rng_seed=7)


def test_density_matrix_validation():
    with pytest.raises(InvalidDensityMatrixError):
        DensityMatrix(np.eye(4))
    with pytest.raises(InvalidDensityMatrixError):
        DensityMatrix(np.eye(2) / 2)
    with pytest.raises(InvalidDensityMatrixError):
        DensityMatrix(np.diag([1.5, -0.5, 0.0, 0.0]))
    not_hermitian = np.eye(4) / 4
    not_hermitian[0, 1] = 0.1
    with pytest.raises(InvalidDensityMatrixError):
        DensityMatrix(not_hermitian)


def test_product_state_from_label():
    rho = DensityMatrix.from_label('HV')
    assert rho.entries[1, 1] == pytest.approx(1.0)
    assert rho.purity() == pytest.approx(1.0)
    assert rho.concurrence() == pytest.approx(0.0, abs=1e-7)


def test_bell_state_is_maximally_entangled():
    rho = DensityMatrix.psi_plus()
    assert rho.purity() == pytest.approx(1.0)
    assert rho.concurrence() == pytest.approx(1.0, abs=1e-7)


def test_maximally_mixed_state():
    rho = DensityMatrix.maximally_mixed()
    assert rho.purity() == pytest.approx(0.25)
    assert rho.concurrence() == 0.0


def test_fidelity_examples():
    hv, vh, mixed = DensityMatrix.from_label('HV'), DensityMatrix.from_label('VH'), DensityMatrix.maximally_mixed()
    assert fidelity(hv, hv) == pytest.approx(1.0, abs=1e-10)
    assert fidelity(hv, vh) == pytest.approx(0.0, abs=1e-10)
    assert fidelity(hv, mixed) == pytest.approx(0.25)
    assert fidelity(mixed, hv) == pytest.approx(0.25)
    assert fidelity(DensityMatrix.psi_plus(), hv) == pytest.approx(0.5)


def test_fidelity_rejects_raw_arrays():
    with pytest.raises(InvalidDensityMatrixError):
        fidelity(np.eye(4) / 4, DensityMatrix.maximally_mixed())


def test_trace_distance():
    assert trace_distance(DensityMatrix.from_label('HV'), DensityMatrix.from_label('VH')) == pytest.approx(1.0)
    assert trace_distance(DensityMatrix.psi_plus(), DensityMatrix.psi_plus()) == pytest.approx(0.0, abs=1e-12)


def test_canonical_settings_are_informationally_complete(settings):
    assert len(CANONICAL_SETTINGS) == 16
    assert gram_rank(settings.projectors) == 16


def test_incomplete_settings_are_rejected():
    with pytest.raises(IncompleteProjectorSetError):
        TomographySettings(projector_set=('HH', 'HV', 'VH', 'VV'))
    with pytest.raises(ValueError):
        TomographySettings(projector_set=('HX',) * 16)


def test_expected_counts_of_hv(settings):
    counts = expected_counts(DensityMatrix.from_label('HV'), settings)
    assert counts[CANONICAL_SETTINGS.index('HV')] == pytest.approx(5000)
    assert counts[CANONICAL_SETTINGS.index('VH')] == pytest.approx(0.0, abs=1e-9)
    assert counts[CANONICAL_SETTINGS.index('DD')] == pytest.approx(1250)


def test_simulated_counts_are_reproducible(settings):
    rho = DensityMatrix.psi_plus()
    assert simulate_tomography(rho, settings) == simulate_tomography(rho, settings)


def test_linear_inversion_of_exact_means(settings):
    target = DensityMatrix.psi_plus()
    estimate = linear_inversion(expected_counts(target, settings), settings)
    assert np.allclose(estimate, target.entries, atol=1e-9)


def test_cholesky_parametrization_round_trip():
    rho = 0.7 * DensityMatrix.psi_plus().entries + 0.3 * DensityMatrix.maximally_mixed().entries
    assert np.allclose(rho_from_params(t_params(rho)), rho)


@pytest.mark.parametrize("random_params", [np.linspace(-1, 1, 16), np.arange(16) % 3 - 0.5])
def test_any_parameters_give_a_physical_state(random_params):
    DensityMatrix(rho_from_params(random_params))


def test_mle_reconstructs_hv_from_poisson_counts(settings):
    target = DensityMatrix.from_label('HV')
    reconstruction = mle_reconstruct(simulate_tomography(target, settings), settings)
    assert fidelity(reconstruction.rho, target) >= 0.99
    assert reconstruction.iterations > 0


def test_mle_reconstructs_hv_from_exact_means(settings):
    target = DensityMatrix.from_label('HV')
    reconstruction = mle_reconstruct(expected_counts(target, settings), settings)
    assert fidelity(reconstruction.rho, target) >= 0.999


@pytest.mark.parametrize("target", [DensityMatrix.psi_plus(), DensityMatrix.maximally_mixed()])
def test_mle_reconstructs_other_states(target, settings):
    reconstruction = mle_reconstruct(simulate_tomography(target, settings), settings)
    assert fidelity(reconstruction.rho, target) >= 0.98


@pytest.mark.parametrize("target", [DensityMatrix.from_label('HV'), DensityMatrix.psi_plus(),
                                    DensityMatrix.maximally_mixed()])
def test_mle_recovers_exact_means(target, settings):
    reconstruction = mle_reconstruct(expected_counts(target, settings), settings)
    assert trace_distance(reconstruction.rho, target) < 1e-3


def test_mle_recovers_the_maximally_mixed_state_entrywise(settings):
    reconstruction = mle_reconstruct(expected_counts(DensityMatrix.maximally_mixed(), settings), settings)
    assert np.allclose(reconstruction.rho.entries, np.eye(4) / 4, atol=1e-3)


@pytest.mark.parametrize("target", [DensityMatrix.from_label('HV'), DensityMatrix.psi_plus()])
def test_log_likelihood_never_decreases(target, settings):
    reconstruction = mle_reconstruct(simulate_tomography(target, settings), settings)
    assert len(reconstruction.history) > 1
    assert np.all(np.diff(reconstruction.history) >= 0)


def test_mle_flags_non_convergence(settings, monkeypatch, caplog):
    monkeypatch.setattr(tomography, 'LIKELIHOOD_TOLERANCE', -math.inf)
    monkeypatch.setattr(tomography, 'MAX_ITERATIONS', 5)
    with caplog.at_level(logging.WARNING):
        reconstruction = mle_reconstruct(simulate_tomography(DensityMatrix.psi_plus(), settings), settings)
    assert reconstruction.converged is False
    assert reconstruction.iterations <= 5
    assert any(r.levelno == logging.WARNING and "did not converge" in r.getMessage() for r in caplog.records)


def test_mle_needs_counts(settings):
    with pytest.raises(NoCountsError):
        mle_reconstruct([0] * 16, settings)
    with pytest.raises(ValueError):
        mle_reconstruct([1] * 15, settings)
    with pytest.raises(ValueError):
        mle_reconstruct([-1] + [1] * 15, settings)


def test_entangled_target_is_psi_plus():
    modes = [ModeLabel(A_OUT, H, 0), ModeLabel(A_OUT, V, 0)]
    psi = to_first_quantized(entangled_target_state(), modes).ravel()
    rho = DensityMatrix.from_state_vector(psi)
    assert fidelity(rho, DensityMatrix.psi_plus()) == pytest.approx(1.0)
    assert rho.concurrence() == pytest.approx(1.0, abs=1e-7)


def test_counts_csv_round_trip(tmp_path, settings):
    path = tmp_path / "counts.csv"
    counts = simulate_tomography(DensityMatrix.from_label('HV'), settings)
    write_counts_csv(path, settings, counts)
    labels, reloaded = read_counts_csv(path)
    assert labels == CANONICAL_SETTINGS
    assert reloaded == [float(n) for n in counts]


def test_density_matrix_json_round_trip(tmp_path):
    path = tmp_path / "rho.json"
    rho = DensityMatrix.from_state_vector(np.array([1, 1j, 0, 1]) / math.sqrt(3))
    write_density_matrix_json(path, rho, {"fidelity": 0.5})
    assert np.allclose(read_density_matrix_json(path).entries, rho.entries)
