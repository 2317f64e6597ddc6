"""Two-mode Fock-space states with a fixed total photon number.

Basis convention: entry ``k`` of a coefficient vector is the amplitude of
``|k>_a |N-k>_b``, so the photon number in arm b is ``N - k``.  The phase is
imprinted as ``exp(-i n_b phi)`` on arm b (the single-arm convention).

Mixed states produced by photon loss are kept block diagonal: block ``m``
acts on the ``m``-photon subspace, basis index ``j`` = photons in arm a.
The full direct-sum matrix is never assembled.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb, factorial

import numpy as np

PHASE_CONVENTION = "single_arm: exp(-i*n_b*phi) on arm b"


@dataclass(frozen=True)
class Tolerances:
    """Numerical tolerances shared by validation and the QFI engine."""

    norm: float = 1e-12
    hermitian: float = 1e-12
    trace: float = 1e-10
    psd: float = 1e-10
    eig_floor: float = 1e-12


TOL = Tolerances()


def _frozen(a):
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TwoModePureState:
    n_total: int
    coeffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _frozen(self.coeffs))
        if self.n_total < 0:
            raise ValueError("n_total must be nonnegative")
        if self.coeffs.shape != (self.n_total + 1,):
            raise ValueError(
                f"expected {self.n_total + 1} coefficients, got shape {self.coeffs.shape}"
            )
        if abs(np.vdot(self.coeffs, self.coeffs).real - 1.0) > TOL.norm * (self.n_total + 1):
            raise ValueError("coefficients are not normalized; use make_pure_state")

    @property
    def photons_b(self):
        return self.n_total - np.arange(self.n_total + 1)

    def density_block(self):
        return np.outer(self.coeffs, self.coeffs.conj())


@dataclass(frozen=True)
class BlockDiagonalState:
    """Direct sum of per-photon-number blocks.

    ``blocks[m]`` is an ``(m+1) x (m+1)`` Hermitian matrix.  Used both for
    density matrices (total trace 1) and for their phase derivatives
    (total trace 0); only the former is checked by :meth:`validate`.
    """

    blocks: tuple = field(default_factory=tuple)
    convention: str = PHASE_CONVENTION

    def __post_init__(self):
        blocks = tuple(_frozen(b) for b in self.blocks)
        for m, b in enumerate(blocks):
            if b.shape != (m + 1, m + 1):
                raise ValueError(f"block {m} has shape {b.shape}, expected {(m + 1, m + 1)}")
        object.__setattr__(self, "blocks", blocks)

    @property
    def n_max(self):
        return len(self.blocks) - 1

    @property
    def weights(self):
        """Probability of each photon-number sector (block traces)."""
        return np.array([np.trace(b).real for b in self.blocks])

    def trace(self):
        return float(self.weights.sum())

    def validate(self, tol=TOL):
        for m, b in enumerate(self.blocks):
            if np.max(np.abs(b - b.conj().T), initial=0.0) > tol.hermitian:
                raise ValueError(f"block {m} is not Hermitian")
            if b.size and np.linalg.eigvalsh(b).min() < -tol.psd:
                raise ValueError(f"block {m} is not positive semidefinite")
        if abs(self.trace() - 1.0) > tol.trace:
            raise ValueError(f"total trace {self.trace()!r} differs from 1")
        return self

    def max_block_difference(self, other):
        if self.n_max != other.n_max:
            raise ValueError("block structures differ")
        return max(
            (float(np.max(np.abs(a - b))) for a, b in zip(self.blocks, other.blocks)),
            default=0.0,
        )


@dataclass(frozen=True)
class LossChannel:
    """Independent photon loss on both arms; eta is the power transmission."""

    eta_a: float
    eta_b: float

    def __post_init__(self):
        for name in ("eta_a", "eta_b"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v!r} outside [0, 1]")

    @classmethod
    def symmetric(cls, eta):
        return cls(eta, eta)


def make_pure_state(n_total, coeffs):
    coeffs = np.asarray(coeffs, dtype=complex).ravel()
    if n_total < 0 or coeffs.shape != (n_total + 1,):
        raise ValueError(f"need {n_total + 1} coefficients for N={n_total}, got {coeffs.size}")
    norm = np.linalg.norm(coeffs)
    if norm == 0.0:
        raise ValueError("zero coefficient vector")
    return TwoModePureState(int(n_total), coeffs / norm)


def fock_state(n_a, n_b):
    coeffs = np.zeros(n_a + n_b + 1)
    coeffs[n_a] = 1.0
    return make_pure_state(n_a + n_b, coeffs)


def noon_state(n):
    coeffs = np.zeros(n + 1)
    coeffs[0] = coeffs[n] = 1.0
    return make_pure_state(n, coeffs)


def _subspace_matrix(u, n):
    """Representation of a 2x2 mode transformation on the n-photon subspace.

    Creation operators transform as ``a^dag -> u[0,0] a^dag + u[1,0] b^dag`` and
    ``b^dag -> u[0,1] a^dag + u[1,1] b^dag``.
    """
    out = np.zeros((n + 1, n + 1), dtype=complex)
    fact = [float(factorial(i)) for i in range(n + 1)]
    for k in range(n + 1):
        rest = n - k
        for p in range(k + 1):
            left = comb(k, p) * u[0, 0] ** p * u[1, 0] ** (k - p)
            for q in range(rest + 1):
                j = p + q
                right = comb(rest, q) * u[0, 1] ** q * u[1, 1] ** (rest - q)
                out[j, k] += left * right
        # bosonic normalization sqrt(j!(n-j)! / (k!(n-k)!))
        out[:, k] /= np.sqrt(fact[k] * fact[rest])
    norms = np.sqrt([fact[j] * fact[n - j] for j in range(n + 1)])
    return out * norms[:, None]


def beam_splitter_apply(state, power_transmissivity):
    """Mix the two modes on a beam splitter (``i`` on reflection)."""
    t = float(power_transmissivity)
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"transmissivity {t!r} outside [0, 1]")
    st, sr = np.sqrt(t), np.sqrt(1.0 - t)
    u = np.array([[st, 1j * sr], [1j * sr, st]])
    out = _subspace_matrix(u, state.n_total) @ state.coeffs
    return make_pure_state(state.n_total, out)


def _loss_weights(n, eta):
    """``w[k, l] = sqrt(C(k, l) eta^(k-l) (1-eta)^l)`` for ``l <= k <= n``."""
    k = np.arange(n + 1)[:, None]
    l = np.arange(n + 1)[None, :]
    binom = np.array([[comb(i, j) for j in range(n + 1)] for i in range(n + 1)], dtype=float)
    with np.errstate(invalid="ignore"):
        w = binom * np.power(eta, np.clip(k - l, 0, None)) * np.power(1.0 - eta, l)
    w[l > k] = 0.0
    return np.sqrt(w)


def kraus_structure(n, channel):
    """Per output block ``m``: index array ``idx`` and weights ``w``.

    Row ``l_a`` of block ``m`` corresponds to the Kraus operator losing
    ``l_a`` photons from arm a and ``n - m - l_a`` from arm b; its
    (unnormalized) output vector is ``w[l_a] * c[idx[l_a]]``.
    """
    wa = _loss_weights(n, channel.eta_a)
    wb = _loss_weights(n, channel.eta_b)
    out = []
    for m in range(n + 1):
        lost = n - m
        la = np.arange(lost + 1)[:, None]
        idx = la + np.arange(m + 1)[None, :]
        w = wa[idx, la] * wb[n - idx, lost - la]
        out.append((idx, w))
    return out


def loss_blocks(coeffs, structure):
    blocks = []
    for idx, w in structure:
        v = w * coeffs[idx]
        blocks.append(v.T @ v.conj())
    return blocks


def loss_channel_apply(state, channel):
    """Apply independent photon loss to both arms.

    Kraus element on one mode: ``|n> -> sqrt(C(n,l) eta^(n-l) (1-eta)^l) |n-l>``.
    The result has one block per surviving total photon number.  Mixed
    (block-diagonal) inputs are mapped block by block.
    """
    if isinstance(state, BlockDiagonalState):
        out = [np.zeros((k + 1, k + 1), dtype=complex) for k in range(state.n_max + 1)]
        for m, rho in enumerate(state.blocks):
            for k, (idx, w) in enumerate(kraus_structure(m, channel)):
                for row, wrow in zip(idx, w):
                    out[k] += wrow[:, None] * rho[np.ix_(row, row)] * wrow[None, :]
        return BlockDiagonalState(tuple(out), state.convention)
    return BlockDiagonalState(tuple(loss_blocks(state.coeffs, kraus_structure(state.n_total, channel))))


def _photons_b(m):
    return m - np.arange(m + 1)


def phase_shift_apply(state, phi):
    blocks = []
    for m, b in enumerate(state.blocks):
        d = np.exp(-1j * _photons_b(m) * phi)
        blocks.append(d[:, None] * b * d.conj()[None, :])
    return BlockDiagonalState(tuple(blocks), state.convention)


def phase_shift_pure(state, phi):
    return TwoModePureState(state.n_total, np.exp(-1j * state.photons_b * phi) * state.coeffs)


def phase_derivative(state):
    """Exact ``d rho / d phi = -i [n_b, rho]``, blockwise."""
    blocks = []
    for m, b in enumerate(state.blocks):
        g = _photons_b(m)
        blocks.append(-1j * (g[:, None] - g[None, :]) * b)
    return BlockDiagonalState(tuple(blocks), state.convention)


def as_block_state(state):
    """View a pure N-photon state as a block-diagonal density matrix."""
    if isinstance(state, BlockDiagonalState):
        return state
    n = state.n_total
    blocks = [np.zeros((m + 1, m + 1), dtype=complex) for m in range(n)]
    return BlockDiagonalState(tuple(blocks) + (state.density_block(),))


def direct_sum(weights, states):
    """Incoherent mixture ``sum_i p_i rho_i`` of block-diagonal states.

    No coherences between inputs are created; blocks with the same photon
    number simply add.  Pure states are embedded as a single block.
    """
    states = [as_block_state(s) for s in states]
    n_max = max(s.n_max for s in states)
    blocks = [np.zeros((m + 1, m + 1), dtype=complex) for m in range(n_max + 1)]
    for p, s in zip(weights, states):
        for m, b in enumerate(s.blocks):
            blocks[m] = blocks[m] + p * b
    return BlockDiagonalState(tuple(blocks))
