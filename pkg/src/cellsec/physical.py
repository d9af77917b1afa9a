"""Channels, regularized channel inversion precoding, SINRs, and secrecy rates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, DomainError, NumericsError
from .geometry import NetworkRealization
from .params import SystemParams

FROBENIUS_TOL = 1e-10


def sample_channel(n_users: int, n_antennas: int, rng: np.random.Generator) -> np.ndarray:
    """Rayleigh-fading channel matrix with unit-variance complex entries.

    Row j is the conjugated channel vector of user j; shape (n_users, n_antennas).
    """
    re = rng.standard_normal((n_users, n_antennas))
    im = rng.standard_normal((n_users, n_antennas))
    return (re + 1j * im) / math.sqrt(2.0)


@dataclass
class PrecoderResult:
    """Precoding matrix (n_antennas x n_users) and its power normalization."""

    matrix: np.ndarray
    normalization: float

    @property
    def n_users(self) -> int:
        return self.matrix.shape[1]


def rci_precoder(
    channel: np.ndarray, regularizer: float, gram_side: str = "auto"
) -> PrecoderResult:
    """Regularized channel inversion precoder for one cell.

    The matrix is H^H (H H^H + N xi I)^-1 scaled so its Frobenius norm is
    exactly 1; the scale factor is returned as ``normalization``.

    ``gram_side`` selects which Gram matrix is inverted: "users" uses the
    K x K form above, "antennas" the algebraically identical N x N form
    (H^H H + N xi I)^-1 H^H, and "auto" picks the smaller one.
    """
    h = np.asarray(channel)
    if h.ndim != 2 or h.shape[0] < 1:
        raise DomainError("channel must be a (n_users, n_antennas) matrix")
    if not regularizer > 0.0:
        raise DomainError("regularizer must be strictly positive")
    k, n = h.shape
    if gram_side == "auto":
        gram_side = "antennas" if k > n else "users"

    ridge = n * regularizer
    try:
        if gram_side == "users":
            gram = h @ h.conj().T
            unnorm = np.linalg.solve(gram + ridge * np.eye(k), h).conj().T
        elif gram_side == "antennas":
            gram_n = h.conj().T @ h
            unnorm = np.linalg.solve(gram_n + ridge * np.eye(n), h.conj().T)
        else:
            raise DomainError(f"unknown gram_side {gram_side!r}")
    except np.linalg.LinAlgError as exc:
        cond = np.linalg.cond(h @ h.conj().T + ridge * np.eye(k))
        raise NumericsError(
            f"precoder linear solve failed (condition number {cond:.3g})"
        ) from exc

    # The trace normalization equals the squared Frobenius norm of the
    # unnormalized matrix; both Gram forms share the nonzero spectrum.
    zeta = float(np.sum(np.abs(unnorm) ** 2))
    return PrecoderResult(matrix=unnorm / math.sqrt(zeta), normalization=zeta)


def precoder_trace_normalization(channel: np.ndarray, regularizer: float) -> float:
    """Spectral form of the power normalization, sum of l / (l + N xi)^2 over
    the Gram eigenvalues; equals PrecoderResult.normalization."""
    h = np.asarray(channel)
    ridge = h.shape[1] * regularizer
    eigs = np.linalg.eigvalsh(h @ h.conj().T)
    return float(np.sum(eigs / (eigs + ridge) ** 2))


def _rci_batch(h_stack: np.ndarray, regularizer: float) -> np.ndarray:
    """Frobenius-normalized RCI precoders for a stack of same-shape channels.

    h_stack has shape (m, k, n); the result has shape (m, n, k).
    """
    m, k, n = h_stack.shape
    ridge = n * regularizer
    gram = h_stack @ np.conjugate(np.swapaxes(h_stack, 1, 2))
    gram += ridge * np.eye(k)
    unnorm = np.conjugate(np.swapaxes(np.linalg.solve(gram, h_stack), 1, 2))
    zeta = np.sum(np.abs(unnorm) ** 2, axis=(1, 2))
    return unnorm / np.sqrt(zeta)[:, None, None], zeta


def inter_cell_gain(channel_vec: np.ndarray, precoder: PrecoderResult) -> float:
    """Aggregate interference power gain from a cell to an outside victim.

    Sum over the cell's streams of |h^H w~_j|^2 with the per-stream vectors
    rescaled by sqrt(n_users); its mean equals the number of streams.
    """
    proj = channel_vec @ precoder.matrix
    return float(precoder.n_users * np.sum(np.abs(proj) ** 2))


def leakage_gain(channel_vec: np.ndarray, precoder: PrecoderResult, column: int) -> float:
    """Leakage power gain of one precoded stream at an outside victim."""
    proj = channel_vec @ precoder.matrix[:, column]
    return float(precoder.n_users * np.abs(proj) ** 2)


@dataclass
class ChannelSet:
    """Fading draws for every (transmitter, victim) pair one scene needs.

    ``cells`` maps each nonempty BS index to its own-cell channel matrix,
    rows aligned with ``members[bs]`` (user indices, ascending). ``to_origin``
    holds the channel vector from each interfering BS to the typical user.
    ``external_unit`` holds one unit-variance complex draw per external user;
    multiplied by the norm of the tagged precoder column it reproduces the
    inner product of that user's channel with the precoding vector.
    """

    cells: dict[int, np.ndarray]
    members: dict[int, np.ndarray]
    to_origin: dict[int, np.ndarray]
    external_unit: np.ndarray
    external_users: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))


def sample_channel_set(
    realization: NetworkRealization, params: SystemParams, rng: np.random.Generator
) -> ChannelSet:
    """Draw one block-fading state for the scene."""
    n = params.n_antennas
    members = realization.cell_members()
    cells = {}
    for b in sorted(members):
        cells[b] = sample_channel(len(members[b]), n, rng)
    to_origin = {}
    for b in sorted(members):
        if b != realization.tagged_bs_index:
            to_origin[b] = sample_channel(1, n, rng)[0]
    externals = realization.external_eavesdroppers
    re = rng.standard_normal(len(externals))
    im = rng.standard_normal(len(externals))
    return ChannelSet(
        cells=cells,
        members=members,
        to_origin=to_origin,
        external_unit=(re + 1j * im) / math.sqrt(2.0),
        external_users=externals,
    )


def build_precoders(
    channels: ChannelSet, params: SystemParams
) -> dict[int, PrecoderResult]:
    """RCI precoders for every nonempty cell, batched by cell size."""
    xi = params.regularizer
    by_size: dict[int, list[int]] = {}
    for b, h in channels.cells.items():
        by_size.setdefault(h.shape[0], []).append(b)
    out: dict[int, PrecoderResult] = {}
    for size, cells in by_size.items():
        stack = np.stack([channels.cells[b] for b in cells])
        mats, zetas = _rci_batch(stack, xi)
        for b, mat, zeta in zip(cells, mats, zetas):
            out[b] = PrecoderResult(matrix=mat, normalization=float(zeta))
    return out


@dataclass
class SinrBreakdown:
    """Per-scene SINRs at the typical user and the equivalent eavesdropper,
    with the raw interference and leakage ingredients."""

    legit_sinr: float
    eav_sinr: float
    intra_interference: float
    inter_interference: float
    intra_leakage: float
    ext_leakage: float


def compute_sinrs(
    realization: NetworkRealization,
    channels: ChannelSet,
    precoders: dict[int, PrecoderResult],
    params: SystemParams,
) -> SinrBreakdown:
    """SINRs of the typical user and of the cooperating malicious users.

    The eavesdropper side models the worst case: all other users jointly
    cancel every message but the typical user's and combine their receptions,
    so their SINRs add.
    """
    rho = params.snr
    eta = params.path_loss_exp
    c = realization.tagged_bs_index
    if c not in channels.cells or c not in precoders:
        raise ContractError("tagged-cell channel or precoder is missing")
    h_tagged = channels.cells[c]
    w_tagged = precoders[c].matrix
    members = channels.members[c]
    if h_tagged.shape[0] != len(members) or w_tagged.shape[1] != len(members):
        raise ContractError("tagged-cell channel/precoder shape mismatch")
    o_pos = int(np.searchsorted(members, 0))
    if o_pos >= len(members) or members[o_pos] != 0:
        raise ContractError("typical user is not a member of the tagged cell")

    h_o = h_tagged[o_pos]
    proj = h_o @ w_tagged
    signal = float(np.abs(proj[o_pos]) ** 2)
    intra_interference = float(np.sum(np.abs(proj) ** 2) - np.abs(proj[o_pos]) ** 2)

    y = realization.tagged_distance
    inter = 0.0
    for b, h in channels.cells.items():
        if b == c:
            continue
        if b not in channels.to_origin or b not in precoders:
            raise ContractError(f"missing cross channel or precoder for cell {b}")
        cross = channels.to_origin[b] @ precoders[b].matrix
        dist = float(np.hypot(*realization.bs_points[b]))
        inter += float(np.sum(np.abs(cross) ** 2)) * dist ** (-eta)

    gamma_o = (rho * y ** (-eta) * signal) / (
        rho * y ** (-eta) * intra_interference + rho * inter + 1.0
    )

    # Intra-cell leakage of the typical user's stream at its cell mates.
    leak_proj = h_tagged @ w_tagged[:, o_pos]
    leak_gains = np.abs(leak_proj) ** 2
    mate_rows = np.arange(len(members)) != o_pos
    intra_leakage = float(np.sum(leak_gains[mate_rows]))
    mate_pos = realization.user_points[members[mate_rows]]
    mate_dist = np.hypot(*(mate_pos - realization.bs_points[c]).T)
    intra_leak_weighted = float(np.sum(mate_dist ** (-eta) * leak_gains[mate_rows]))

    externals = channels.external_users
    if len(channels.external_unit) != len(externals):
        raise ContractError("external channel draws do not match the external users")
    if len(externals):
        w_norm2 = float(np.sum(np.abs(w_tagged[:, o_pos]) ** 2))
        ext_gains = w_norm2 * np.abs(channels.external_unit) ** 2
        ext_pos = realization.user_points[externals]
        ext_dist = np.hypot(*(ext_pos - realization.bs_points[c]).T)
        ext_leakage = float(np.sum(ext_gains * ext_dist ** (-eta)))
    else:
        ext_leakage = 0.0

    gamma_m = rho * intra_leak_weighted + rho * ext_leakage
    return SinrBreakdown(
        legit_sinr=gamma_o,
        eav_sinr=gamma_m,
        intra_interference=intra_interference,
        inter_interference=inter,
        intra_leakage=intra_leakage,
        ext_leakage=ext_leakage,
    )


def secrecy_rate(sinrs: SinrBreakdown) -> float:
    """Achievable secrecy rate in bits per channel use, clamped at zero."""
    return rate_from_sinr_pair(sinrs.legit_sinr, sinrs.eav_sinr)


def rate_from_sinr_pair(gamma_legit, gamma_eav):
    """max(0, log2(1 + gamma_legit) - log2(1 + gamma_eav)); broadcasts."""
    diff = np.log2(1.0 + np.asarray(gamma_legit)) - np.log2(1.0 + np.asarray(gamma_eav))
    out = np.maximum(diff, 0.0)
    return float(out) if out.ndim == 0 else out


def approx_secrecy_rate(tagged_distance, interference, leakage, det_eq, params: SystemParams):
    """Large-system secrecy rate approximation for a ball-model scene.

    ``interference`` and ``leakage`` are the per-user normalized shot-noise
    terms; ``det_eq`` supplies the deterministic equivalents of the in-cell
    signal and crosstalk powers. Broadcasts over array inputs.
    """
    rho = params.snr
    path_gain = np.asarray(tagged_distance, dtype=float) ** (-params.path_loss_exp)
    gamma_legit = (rho * det_eq.alpha * path_gain) / (
        rho * det_eq.chi * path_gain + rho * np.asarray(interference) + 1.0
    )
    gamma_eav = rho * det_eq.chi * path_gain + rho * np.asarray(leakage)
    return rate_from_sinr_pair(gamma_legit, gamma_eav)
