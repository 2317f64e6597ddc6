import math

import numpy as np
import pytest

from oracles import beam_splitter_expm, dense_lossy_qfi, embed_pure, full_loss, random_coeffs
from qbound.fock import (
    PHASE_CONVENTION,
    BlockDiagonalState,
    LossChannel,
    TwoModePureState,
    beam_splitter_apply,
    direct_sum,
    fock_state,
    loss_channel_apply,
    make_pure_state,
    noon_state,
    phase_derivative,
    phase_shift_apply,
    phase_shift_pure,
)

S = 1 / math.sqrt(2)


@pytest.mark.parametrize(
    "n, coeffs, expected",
    [(1, [1, 1], [S, S]), (2, [1, 0, 1], [S, 0, S]), (0, [5], [1.0])],
)
def test_make_pure_state_normalizes(n, coeffs, expected):
    state = make_pure_state(n, coeffs)
    np.testing.assert_allclose(state.coeffs, expected, atol=1e-15)


def test_make_pure_state_rejects_bad_input():
    with pytest.raises(ValueError, match="coefficients"):
        make_pure_state(2, [1, 1])
    with pytest.raises(ValueError, match="zero"):
        make_pure_state(1, [0, 0])


def test_pure_state_must_be_normalized():
    with pytest.raises(ValueError, match="normalized"):
        TwoModePureState(1, np.array([1.0, 1.0]))


def test_states_are_immutable():
    state = noon_state(3)
    with pytest.raises(ValueError):
        state.coeffs[0] = 0.0


def test_single_photon_splits_evenly():
    out = beam_splitter_apply(fock_state(1, 0), 0.5)
    np.testing.assert_allclose(np.abs(out.coeffs), [S, S], atol=1e-15)


def test_two_photons_on_balanced_splitter():
    out = beam_splitter_apply(fock_state(2, 0), 0.5)
    np.testing.assert_allclose(np.abs(out.coeffs) ** 2, [0.25, 0.5, 0.25], atol=1e-14)


def test_unit_transmissivity_is_identity(rng):
    c = random_coeffs(rng, 5)
    out = beam_splitter_apply(make_pure_state(5, c), 1.0)
    np.testing.assert_allclose(out.coeffs, c, atol=1e-14)


@pytest.mark.parametrize("t", [0.0, 0.13, 0.5, 0.81])
def test_beam_splitter_matches_matrix_exponential(rng, t):
    c = random_coeffs(rng, 4)
    out = beam_splitter_apply(make_pure_state(4, c), t)
    np.testing.assert_allclose(out.coeffs, beam_splitter_expm(c, t), atol=1e-12)


def test_two_balanced_splitters_give_one_photon_state():
    out = beam_splitter_apply(beam_splitter_apply(fock_state(1, 0), 0.5), 0.5)
    assert abs(np.linalg.norm(out.coeffs) - 1) < 1e-12
    # i on reflection: two reflections move the photon from arm a to arm b
    np.testing.assert_allclose(np.abs(out.coeffs), [1.0, 0.0], atol=1e-15)


def test_beam_splitter_rejects_bad_transmissivity():
    with pytest.raises(ValueError):
        beam_splitter_apply(fock_state(1, 0), 1.5)


def test_lossless_channel_is_identity(rng):
    c = random_coeffs(rng, 3)
    rho = loss_channel_apply(make_pure_state(3, c), LossChannel.symmetric(1.0))
    for m in range(3):
        assert np.max(np.abs(rho.blocks[m])) < 1e-15
    np.testing.assert_allclose(rho.blocks[3], np.outer(c, c.conj()), atol=1e-15)


def test_single_photon_loss_by_hand():
    eta = 0.37
    psi = make_pure_state(1, [1, 1])
    rho = loss_channel_apply(psi, LossChannel.symmetric(eta))
    np.testing.assert_allclose(rho.blocks[1], eta * psi.density_block(), atol=1e-15)
    np.testing.assert_allclose(rho.blocks[0], [[1 - eta]], atol=1e-15)


def test_full_loss_in_one_arm():
    rho = loss_channel_apply(fock_state(1, 0), LossChannel(0.0, 1.0))
    assert rho.weights[0] == pytest.approx(1.0, abs=1e-15)
    assert rho.weights[1] == pytest.approx(0.0, abs=1e-15)


def test_loss_matches_dense_kraus_oracle(rng):
    c = random_coeffs(rng, 4)
    eta_a, eta_b = 0.8, 0.45
    rho = loss_channel_apply(make_pure_state(4, c), LossChannel(eta_a, eta_b))
    psi, pairs = embed_pure(c)
    dense = full_loss(np.outer(psi, psi.conj()), pairs, eta_a, eta_b)
    index = {p: i for i, p in enumerate(pairs)}
    for m, block in enumerate(rho.blocks):
        sel = [index[(j, m - j)] for j in range(m + 1)]
        np.testing.assert_allclose(block, dense[np.ix_(sel, sel)], atol=1e-14)


def test_loss_channel_validates_eta():
    with pytest.raises(ValueError):
        LossChannel(1.2, 0.5)
    with pytest.raises(ValueError):
        LossChannel.symmetric(-0.1)


def test_mixed_state_loss_composes():
    psi = make_pure_state(4, [1, 2j, -1, 0.5, 3])
    twice = loss_channel_apply(loss_channel_apply(psi, LossChannel(0.7, 0.6)), LossChannel(0.5, 0.9))
    once = loss_channel_apply(psi, LossChannel(0.35, 0.54))
    assert twice.max_block_difference(once) < 1e-10


def test_phase_zero_is_identity():
    rho = loss_channel_apply(noon_state(3), LossChannel.symmetric(0.6))
    assert phase_shift_apply(rho, 0.0).max_block_difference(rho) == 0.0


def test_phase_on_single_photon_coherence():
    phi = 0.3
    # index j counts photons in arm a, so |1,0><0,1| sits at [1, 0]
    block = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex)
    state = BlockDiagonalState((np.zeros((1, 1)), block))
    out = phase_shift_apply(state, phi)
    assert out.blocks[1][1, 0] == pytest.approx(np.exp(1j * phi))


def test_phase_keeps_block_traces(rng):
    rho = loss_channel_apply(make_pure_state(5, random_coeffs(rng, 5)), LossChannel.symmetric(0.7))
    np.testing.assert_allclose(phase_shift_apply(rho, 1.234).weights, rho.weights, atol=1e-15)


def test_diagonal_state_has_zero_derivative():
    state = BlockDiagonalState((np.eye(1) * 0.5, np.diag([0.2, 0.3]).astype(complex)))
    d = phase_derivative(state)
    assert all(np.max(np.abs(b)) == 0 for b in d.blocks)


def test_derivative_of_balanced_single_photon():
    psi = make_pure_state(1, [1, 1])
    d = phase_derivative(BlockDiagonalState((np.zeros((1, 1)), psi.density_block())))
    np.testing.assert_allclose(d.blocks[1], [[0, -0.5j], [0.5j, 0]], atol=1e-15)


def test_derivative_matches_central_difference(rng):
    rho = loss_channel_apply(make_pure_state(4, random_coeffs(rng, 4)), LossChannel.symmetric(0.8))
    delta = 1e-4
    plus, minus = phase_shift_apply(rho, delta), phase_shift_apply(rho, -delta)
    d = phase_derivative(rho)
    for m in range(5):
        fd = (plus.blocks[m] - minus.blocks[m]) / (2 * delta)
        np.testing.assert_allclose(d.blocks[m], fd, atol=1e-8)
        assert abs(np.trace(d.blocks[m])) < 1e-12


def test_phase_commutes_with_loss(rng):
    for _ in range(10):
        n = int(rng.integers(1, 7))
        psi = make_pure_state(n, random_coeffs(rng, n))
        ch = LossChannel(*rng.uniform(0.2, 1.0, size=2))
        phi = rng.uniform(-np.pi, np.pi)
        a = phase_shift_apply(loss_channel_apply(psi, ch), phi)
        b = loss_channel_apply(phase_shift_pure(psi, phi), ch)
        assert a.max_block_difference(b) < 1e-10


def test_direct_sum_weights():
    rho = direct_sum([0.25, 0.75], [fock_state(1, 0), noon_state(2)])
    np.testing.assert_allclose(rho.weights, [0.0, 0.25, 0.75], atol=1e-15)
    rho.validate()


def test_validate_catches_bad_states():
    with pytest.raises(ValueError, match="trace"):
        BlockDiagonalState((np.eye(1) * 0.5,)).validate()
    with pytest.raises(ValueError, match="positive"):
        BlockDiagonalState((np.zeros((1, 1)), np.diag([1.5, -0.5]))).validate()
    with pytest.raises(ValueError, match="shape"):
        BlockDiagonalState((np.eye(2),))


def test_convention_is_recorded():
    rho = loss_channel_apply(noon_state(2), LossChannel.symmetric(0.5))
    assert rho.convention == PHASE_CONVENTION
    assert "n_b" in PHASE_CONVENTION


def test_dense_oracle_sanity():
    # single photon after loss: eta
    assert dense_lossy_qfi([S, S], 0.62) == pytest.approx(0.62, abs=1e-12)
