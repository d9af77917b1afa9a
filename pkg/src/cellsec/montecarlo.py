"""Monte Carlo estimation harness for outage, mean rate, and shot-noise samples.

Trials use counter-based per-trial RNG streams keyed by (master seed, trial
index), so results are bit-identical regardless of execution order or worker
count. Two-level averaging: geometries outer, fading redraws inner.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import analytic, geometry, physical
from .errors import ContractError, DomainError
from .params import SystemParams

SAMPLE_LABELS = ("interference", "leakage", "rate", "rate_approx")


def trial_rng(master_seed: int, trial_index: int) -> np.random.Generator:
    """Independent counter-based stream for one trial."""
    seq = np.random.SeedSequence((int(master_seed), int(trial_index)))
    return np.random.Generator(np.random.Philox(seq))


@dataclass(frozen=True)
class EstimateWithCI:
    """Monte Carlo estimate with its normal-theory 95% confidence interval."""

    mean: float
    std_error: float
    n_trials: int
    ci95_low: float
    ci95_high: float

    @classmethod
    def from_mean_se(cls, mean: float, std_error: float, n_trials: int) -> "EstimateWithCI":
        return cls(
            mean=mean,
            std_error=std_error,
            n_trials=n_trials,
            ci95_low=mean - 1.96 * std_error,
            ci95_high=mean + 1.96 * std_error,
        )


@dataclass
class SampleSet:
    values: np.ndarray
    label: str

    def __post_init__(self):
        if self.label not in SAMPLE_LABELS:
            raise DomainError(f"label must be one of {SAMPLE_LABELS}")
        self.values = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(self.values)):
            raise DomainError("sample values must be finite")


def _ball_scene(params: SystemParams, window: float, rng: np.random.Generator):
    """Distances needed by the ball-model rate: serving distance, interferer
    path gains, external-user path gains."""
    eta = params.path_loss_exp
    y = float(geometry.sample_nearest_bs_distance(params.bs_density, rng))
    bs_radii = geometry.annulus_radii(params.bs_density, y, max(window, y), rng)
    ext_radii = geometry.annulus_radii(
        params.user_density, params.cell_radius, window, rng
    )
    return y, bs_radii ** (-eta), ext_radii ** (-eta)


def _ball_shot_noise(k: int, bs_gains_pl, ext_gains_pl, rng):
    g_i = rng.gamma(k, 1.0, len(bs_gains_pl))
    g_l = rng.exponential(1.0, len(ext_gains_pl))
    i_hat = float(g_i @ bs_gains_pl) / k
    l_hat = float(g_l @ ext_gains_pl) / k
    return i_hat, l_hat


def _trial_rates(params, mode, n_fadings, rng, det_eq, window):
    if mode == "ball_approx":
        y, bs_pl, ext_pl = _ball_scene(params, window, rng)
        rates = np.empty(n_fadings)
        for f in range(n_fadings):
            i_hat, l_hat = _ball_shot_noise(params.users_per_cell, bs_pl, ext_pl, rng)
            rates[f] = physical.approx_secrecy_rate(y, i_hat, l_hat, det_eq, params)
        return rates
    if mode == "exact":
        realization = geometry.build_realization(params, "exact", rng)
        scene = _ExactScene(realization, params)
        return scene.draw_rates(rng, n_fadings)
    raise DomainError(f"unknown mode {mode!r}")


def _complex_normal(rng, shape, dtype=np.float64):
    out = np.empty(shape, dtype=np.complex64 if dtype == np.float32 else np.complex128)
    out.real = rng.standard_normal(shape, dtype=dtype)
    out.imag = rng.standard_normal(shape, dtype=dtype)
    out *= dtype(1.0 / math.sqrt(2.0))
    return out


class _ExactScene:
    """Per-realization tables for fast fading redraws of the exact-mode rate.

    Computes the same quantities as physical.compute_sinrs, with the channel
    draws and precoders batched across same-size cells.
    """

    def __init__(self, realization, params: SystemParams):
        self.params = params
        eta = params.path_loss_exp
        c = realization.tagged_bs_index
        members = realization.cell_members()
        self.tagged_members = members[c]
        self.o_pos = int(np.flatnonzero(self.tagged_members == 0)[0])
        self.y = realization.tagged_distance
        mates = np.delete(self.tagged_members, self.o_pos)
        mate_vec = realization.user_points[mates] - realization.bs_points[c]
        self.mate_pl = np.hypot(mate_vec[:, 0], mate_vec[:, 1]) ** (-eta)
        ext = np.flatnonzero(realization.association != c)
        ext_vec = realization.user_points[ext] - realization.bs_points[c]
        self.ext_pl = np.hypot(ext_vec[:, 0], ext_vec[:, 1]) ** (-eta)
        groups: dict[int, list[int]] = {}
        for b, mem in members.items():
            if b != c:
                groups.setdefault(len(mem), []).append(b)
        self.groups = []
        for size in sorted(groups):
            cells = groups[size]
            dist = np.hypot(*realization.bs_points[cells].T)
            self.groups.append((size, len(cells), dist ** (-eta)))

    def draw_rates(self, rng: np.random.Generator, n_fadings: int) -> np.ndarray:
        """Secrecy rates for a batch of independent fading states.

        All channel draws and precoder solves are stacked across fadings and
        same-size cells, so the per-fading linear-algebra overhead amortizes.
        """
        p = self.params
        rho, n = p.snr, p.n_antennas
        k_c = len(self.tagged_members)
        o = self.o_pos
        f = n_fadings

        h_c = _complex_normal(rng, (f, k_c, n))
        w_c, _ = physical._rci_batch(h_c, p.regularizer)
        proj = np.einsum("fn,fnk->fk", h_c[:, o, :], w_c)
        signal = np.abs(proj[:, o]) ** 2
        intra = np.sum(np.abs(proj) ** 2, axis=1) - signal

        # Interfering cells: their aggregate gains enter a Monte Carlo mean
        # whose statistical error dwarfs single precision, so the bulk draws
        # and solves run in complex64.
        inter = np.zeros(f)
        for size, count, pl in self.groups:
            h_stack = _complex_normal(rng, (f * count, size, n), np.float32)
            w_stack, _ = physical._rci_batch(h_stack, p.regularizer)
            h_victim = _complex_normal(rng, (f * count, n), np.float32)
            cross = np.einsum("mn,mnk->mk", h_victim, w_stack)
            gains = np.sum(np.abs(cross) ** 2, axis=1, dtype=np.float64).reshape(f, count)
            inter += gains @ pl

        leak_proj = np.einsum("fkn,fn->fk", np.delete(h_c, o, axis=1), w_c[:, :, o])
        intra_leak = (np.abs(leak_proj) ** 2) @ self.mate_pl
        w_norm2 = np.sum(np.abs(w_c[:, :, o]) ** 2, axis=1)
        ext_leak = w_norm2 * (rng.exponential(1.0, (f, len(self.ext_pl))) @ self.ext_pl)

        path = self.y ** (-p.path_loss_exp)
        gamma_o = rho * path * signal / (rho * path * intra + rho * inter + 1.0)
        gamma_m = rho * intra_leak + rho * ext_leak
        return physical.rate_from_sinr_pair(gamma_o, gamma_m)


def _run_trials(params, mode, n_geometries, n_fadings, seed):
    if n_geometries < 1 or n_fadings < 1:
        raise DomainError("n_geometries and n_fadings must be at least 1")
    det_eq = analytic.deterministic_equivalents(params.load_ratio, params.regularizer)
    window = geometry.simulation_window_radius(params)
    all_rates = np.empty((n_geometries, n_fadings))
    for g in range(n_geometries):
        rng = trial_rng(seed, g)
        all_rates[g] = _trial_rates(params, mode, n_fadings, rng, det_eq, window)
    return all_rates


def estimate_outage(
    params: SystemParams,
    mode: str,
    n_geometries: int,
    n_fadings: int,
    seed: int,
) -> EstimateWithCI:
    """Fraction of (geometry, fading) trials with zero secrecy rate, with a
    binomial standard error."""
    rates = _run_trials(params, mode, n_geometries, n_fadings, seed)
    n = rates.size
    p = float(np.count_nonzero(rates <= 0.0)) / n
    se = math.sqrt(p * (1.0 - p) / n)
    return EstimateWithCI.from_mean_se(p, se, n)


def estimate_mean_rate(
    params: SystemParams,
    mode: str,
    n_geometries: int,
    n_fadings: int,
    seed: int,
) -> EstimateWithCI:
    """Sample mean of the secrecy rate; fadings are averaged per geometry first
    and the standard error is taken across geometry means."""
    rates = _run_trials(params, mode, n_geometries, n_fadings, seed)
    geo_means = rates.mean(axis=1)
    mean = float(geo_means.mean())
    se = 0.0 if len(geo_means) < 2 else float(geo_means.std(ddof=1) / math.sqrt(len(geo_means)))
    return EstimateWithCI.from_mean_se(mean, se, rates.size)


def collect_interference_leakage(
    params: SystemParams,
    n_samples: int,
    condition: str = "fixed",
    seed: int = 0,
    path: str = "fast",
    tail_fraction: float = geometry.DEFAULT_TAIL_FRACTION,
) -> tuple[SampleSet, SampleSet]:
    """Samples of the per-user normalized interference and leakage terms.

    condition "fixed" pins the serving distance at the equal-area cell radius;
    "random" draws it from the nearest-BS law per sample. The fast path draws
    the power gains from their known laws; the channel path builds every gain
    from explicit precoders and channel vectors and exists as a cross-check.
    """
    if n_samples < 1:
        raise DomainError("n_samples must be at least 1")
    if condition not in ("fixed", "random"):
        raise DomainError("condition must be 'fixed' or 'random'")
    if path not in ("fast", "channel"):
        raise DomainError("path must be 'fast' or 'channel'")
    eta = params.path_loss_exp
    k = params.users_per_cell
    window = geometry.simulation_window_radius(params, tail_fraction)
    interference = np.empty(n_samples)
    leakage = np.empty(n_samples)
    for i in range(n_samples):
        rng = trial_rng(seed, i)
        y = (
            params.cell_radius
            if condition == "fixed"
            else float(geometry.sample_nearest_bs_distance(params.bs_density, rng))
        )
        bs_pl = geometry.annulus_radii(params.bs_density, y, max(window, y), rng) ** (-eta)
        ext_pl = geometry.annulus_radii(
            params.user_density, params.cell_radius, window, rng
        ) ** (-eta)
        if path == "fast":
            interference[i], leakage[i] = _ball_shot_noise(k, bs_pl, ext_pl, rng)
        else:
            interference[i], leakage[i] = _channel_level_shot_noise(
                params, bs_pl, ext_pl, rng
            )
    return (
        SampleSet(values=interference, label="interference"),
        SampleSet(values=leakage, label="leakage"),
    )


def _channel_level_shot_noise(params, bs_pl, ext_pl, rng):
    """Shot-noise terms with gains formed from explicit channels and precoders."""
    k, n = params.users_per_cell, params.n_antennas
    n_bs = len(bs_pl)
    i_hat = 0.0
    if n_bs:
        h_stack = (
            rng.standard_normal((n_bs, k, n)) + 1j * rng.standard_normal((n_bs, k, n))
        ) / math.sqrt(2.0)
        w_stack, _ = physical._rci_batch(h_stack, params.regularizer)
        h_victim = (
            rng.standard_normal((n_bs, n)) + 1j * rng.standard_normal((n_bs, n))
        ) / math.sqrt(2.0)
        cross = np.einsum("bn,bnk->bk", h_victim, w_stack)
        gains = k * np.sum(np.abs(cross) ** 2, axis=1)
        i_hat = float(gains @ bs_pl) / k

    h_cell = physical.sample_channel(k, n, rng)
    w_cell = physical.rci_precoder(h_cell, params.regularizer).matrix
    w_typ = w_cell[:, 0]
    l_hat = 0.0
    if len(ext_pl):
        h_ext = (
            rng.standard_normal((len(ext_pl), n)) + 1j * rng.standard_normal((len(ext_pl), n))
        ) / math.sqrt(2.0)
        inner = h_ext @ w_typ
        gains = k * np.abs(inner) ** 2
        l_hat = float(gains @ ext_pl) / k
    return i_hat, l_hat


def empirical_laplace(samples, s_grid) -> list[float]:
    """(1/n) sum of exp(-s x) per grid point; values lie in (0, 1] and are
    nonincreasing in s for nonnegative samples."""
    values = samples.values if isinstance(samples, SampleSet) else np.asarray(samples, dtype=float)
    if values.size == 0:
        raise ContractError("empirical_laplace needs at least one sample")
    return [float(np.mean(np.exp(-float(s) * values))) for s in s_grid]


def write_sample_dump(path: str, samples: SampleSet) -> None:
    """One value per line, preceded by a '# label' header."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# {samples.label}\n")
        for v in samples.values:
            fh.write(f"{float(v)!r}\n")


def write_estimates_csv(path: str, swept_name: str, entries) -> None:
    """Rows of (swept value, estimate, std_error, n)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{swept_name},estimate,std_error,n\n")
        for value, est in entries:
            fh.write(
                f"{float(value)!r},{float(est.mean)!r},{float(est.std_error)!r},{est.n_trials}\n"
            )
