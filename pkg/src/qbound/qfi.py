"""Quantum Fisher information of lossy two-mode states and the loss bounds."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fock import (
    TOL,
    BlockDiagonalState,
    LossChannel,
    TwoModePureState,
    direct_sum,
    loss_channel_apply,
    phase_derivative,
    phase_shift_apply,
)


@dataclass(frozen=True)
class QfiResult:
    value: float
    # probability carried by eigenvalues below the SLD floor
    truncation_mass: float = 0.0

    def __post_init__(self):
        if self.value < 0:
            raise ValueError(f"negative QFI {self.value!r}")
        if not 0.0 <= self.truncation_mass <= 1.0:
            raise ValueError(f"truncation_mass {self.truncation_mass!r} outside [0, 1]")

    def __float__(self):
        return float(self.value)


def _block_sld(rho, drho, floor):
    """QFI contribution, SLD (in the original basis) and skipped mass of one block."""
    lam, vec = np.linalg.eigh(rho)
    lam = np.clip(lam, 0.0, None)
    d = vec.conj().T @ drho @ vec
    denom = lam[:, None] + lam[None, :]
    keep = denom >= floor
    l_eig = np.zeros_like(d)
    l_eig[keep] = 2.0 * d[keep] / denom[keep]
    value = 2.0 * float(np.sum(np.abs(d[keep]) ** 2 / denom[keep]))
    skipped = float(lam[2.0 * lam < floor].sum())
    return value, vec @ l_eig @ vec.conj().T, skipped


def sld_qfi(state: BlockDiagonalState, derivative: BlockDiagonalState, floor=TOL.eig_floor):
    """``F = 2 sum_ij |<i|d rho|j>|^2 / (l_i + l_j)`` summed over blocks.

    Eigenpairs with ``l_i + l_j < floor`` are left out.
    """
    if state.n_max != derivative.n_max:
        raise ValueError(
            f"block structures differ: n_max {state.n_max} vs {derivative.n_max}"
        )
    total, skipped = 0.0, 0.0
    for rho, drho in zip(state.blocks, derivative.blocks):
        v, _, s = _block_sld(rho, drho, floor)
        total += v
        skipped += s
    return QfiResult(max(total, 0.0), min(max(skipped, 0.0), 1.0))


def pure_qfi(state: TwoModePureState):
    """``4 Var(n_b)`` for a lossless pure probe."""
    p = np.abs(state.coeffs) ** 2
    nb = state.photons_b
    mean = p @ nb
    return QfiResult(max(4.0 * float(p @ (nb - mean) ** 2), 0.0))


def lossy_interferometer_qfi(probe: TwoModePureState, channel: LossChannel, phi=0.0):
    rho = phase_shift_apply(loss_channel_apply(probe, channel), phi)
    return sld_qfi(rho, phase_derivative(rho))


def mixture_qfi(weights, per_sector_states, channel: LossChannel, phi=0.0):
    """Exact QFI of the lossy output of an incoherent photon-number mixture."""
    w = np.asarray(weights, dtype=float)
    if w.shape != (len(per_sector_states),):
        raise ValueError("one weight per sector state required")
    if np.any(w < 0) or abs(w.sum() - 1.0) > TOL.trace:
        raise ValueError(f"weights must be nonnegative and sum to 1, got sum {w.sum()!r}")
    outputs = [loss_channel_apply(s, channel) for s in per_sector_states]
    rho = phase_shift_apply(direct_sum(w, outputs), phi)
    return sld_qfi(rho, phase_derivative(rho))


def qfi_bound_fixed_n(n, eta):
    """Upper bound ``N eta / (1 - eta)`` on the QFI of any N-photon probe."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    if not 0.0 <= eta < 1.0:
        raise ValueError(f"bound requires 0 <= eta < 1, got {eta!r}")
    return n * eta / (1.0 - eta)


def phase_bound_mean_n(n_mean, eta):
    """Lower bound on phase uncertainty (rad) at mean photon number ``n_mean``."""
    if not n_mean > 0:
        raise ValueError(f"n_mean must be positive, got {n_mean!r}")
    if not 0.0 < eta < 1.0:
        raise ValueError(f"eta must lie in (0, 1), got {eta!r}")
    return float(np.sqrt((1.0 - eta) / (eta * n_mean)))


def cramer_rao(qfi):
    qfi = float(qfi)
    if not qfi > 0:
        raise ValueError(f"QFI must be positive, got {qfi!r}")
    return 1.0 / np.sqrt(qfi)
