"""Model parameters, their derivations, and the closed-form regularizer.

Every other module consumes a validated :class:`SystemParams`.  Noise power is
normalized to 1 so the transmit power and the SNR coincide; only the linear
SNR is stored.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .errors import DomainError


def optimal_regularization(load_ratio: float, snr: float) -> float:
    """Regularizer maximizing the large-system secrecy rate of an isolated cell.

    Parameters
    ----------
    load_ratio : users per antenna (beta), > 0.
    snr : linear transmit SNR, > 0.

    Returns the closed-form optimum.  Raises DomainError for non-positive
    inputs, for a negative radicand, or when the formula yields a
    non-positive value (it is not clamped).
    """
    b, rho = float(load_ratio), float(snr)
    if not (b > 0.0) or not (rho > 0.0):
        raise DomainError("load_ratio and snr must be strictly positive")
    radicand = b * b * (rho * rho + rho + 1.0) - b * 2.0 * rho * (rho - 1.0) + rho * rho
    if radicand < 0.0:
        raise DomainError(f"regularizer radicand is negative ({radicand:g})")
    num = (
        -2.0 * rho * rho * (1.0 - b) ** 2
        + 6.0 * rho * b
        + 2.0 * b * b
        - 2.0 * (b * (rho + 1.0) - rho) * math.sqrt(radicand)
    )
    den = 6.0 * rho * rho * (b + 2.0) + 6.0 * rho * b
    xi = num / den
    if not math.isfinite(xi) or xi <= 0.0:
        raise DomainError(
            f"closed-form regularizer is not strictly positive at "
            f"load_ratio={b:g}, snr={rho:g} (got {xi:g})"
        )
    return xi


@dataclass(frozen=True)
class SystemParams:
    """Immutable scalar model parameters plus derived quantities.

    ``cell_radius`` is the equal-area ball radius 1/sqrt(pi * bs_density) used
    by the analytic path; ``user_density`` is always users_per_cell * bs_density.
    Instances are safe to share across threads.
    """

    n_antennas: int
    users_per_cell: int
    load_ratio: float
    snr: float
    path_loss_exp: float
    bs_density: float
    user_density: float
    regularizer: float
    cell_radius: float

    def with_snr(self, snr: float, rederive_regularizer: bool = True) -> "SystemParams":
        """Copy of the parameters at a different SNR."""
        return derive_params(
            n_antennas=self.n_antennas,
            users_per_cell=self.users_per_cell,
            snr=snr,
            path_loss_exp=self.path_loss_exp,
            bs_density=self.bs_density,
            regularizer=None if rederive_regularizer else self.regularizer,
        )

    def with_bs_density(self, bs_density: float) -> "SystemParams":
        """Copy of the parameters at a different BS density (fixed cell load)."""
        return derive_params(
            n_antennas=self.n_antennas,
            users_per_cell=self.users_per_cell,
            snr=self.snr,
            path_loss_exp=self.path_loss_exp,
            bs_density=bs_density,
            regularizer=self.regularizer,
        )


def snr_db_to_linear(snr_db: float) -> float:
    return 10.0 ** (snr_db / 10.0)


def derive_params(
    n_antennas: int,
    users_per_cell: int | None = None,
    load_ratio: float | None = None,
    snr: float | None = None,
    snr_db: float | None = None,
    path_loss_exp: float = 4.0,
    bs_density: float = 0.1,
    regularizer: float | None = None,
    round_users: bool = False,
) -> SystemParams:
    """Validate raw inputs and build a :class:`SystemParams`.

    Exactly one of ``snr`` / ``snr_db`` must be given, and at least one of
    ``users_per_cell`` / ``load_ratio``.  The user density is computed as
    users_per_cell * bs_density, never accepted independently.  When
    ``load_ratio`` implies a non-integer user count it is rejected unless
    ``round_users`` is set.
    """
    if (snr is None) == (snr_db is None):
        raise DomainError("exactly one of snr and snr_db is required")
    rho = float(snr) if snr is not None else snr_db_to_linear(float(snr_db))
    if not rho > 0.0:
        raise DomainError("snr must be strictly positive")

    n = int(n_antennas)
    if n < 1:
        raise DomainError("n_antennas must be a positive integer")

    if users_per_cell is None and load_ratio is None:
        raise DomainError("one of users_per_cell and load_ratio is required")
    if users_per_cell is not None:
        if users_per_cell != int(users_per_cell) or int(users_per_cell) < 1:
            raise DomainError("users_per_cell must be a positive integer")
        k = int(users_per_cell)
        if load_ratio is not None and not math.isclose(load_ratio, k / n):
            raise DomainError("users_per_cell and load_ratio are inconsistent")
    else:
        k_real = float(load_ratio) * n
        k = round(k_real)
        if k < 1 or (not round_users and not math.isclose(k_real, k, abs_tol=1e-9)):
            raise DomainError(
                f"load_ratio {load_ratio:g} does not give an integer user count "
                f"for n_antennas={n} (got {k_real:g}); pass round_users=True to round"
            )

    eta = float(path_loss_exp)
    if eta <= 2.0:
        raise DomainError(
            f"path_loss_exp must exceed 2 (got {eta:g}): the interference and "
            "leakage moments diverge otherwise"
        )
    lam_b = float(bs_density)
    if not lam_b > 0.0:
        raise DomainError("bs_density must be strictly positive")

    beta = k / n
    xi = float(regularizer) if regularizer is not None else optimal_regularization(beta, rho)
    if xi <= 0.0:
        raise DomainError("regularizer must be strictly positive")

    return SystemParams(
        n_antennas=n,
        users_per_cell=k,
        load_ratio=beta,
        snr=rho,
        path_loss_exp=eta,
        bs_density=lam_b,
        user_density=k * lam_b,
        regularizer=xi,
        cell_radius=1.0 / math.sqrt(math.pi * lam_b),
    )


_CONFIG_KEYS = {
    "n_antennas",
    "users_per_cell",
    "load_ratio",
    "snr_db",
    "snr_linear",
    "path_loss_exp",
    "bs_density",
    "regularizer",
    "round_users",
}


def validate_raw_config(raw: dict) -> list[str]:
    """Collect every constraint violation in a raw config dict, without raising."""
    problems = []
    if not isinstance(raw, dict):
        return ["config must be a JSON object"]
    unknown = sorted(set(raw) - _CONFIG_KEYS)
    if unknown:
        problems.append(f"unknown keys: {', '.join(unknown)}")
    if "snr_db" in raw and "snr_linear" in raw:
        problems.append("snr_db and snr_linear are mutually exclusive")
    if "snr_db" not in raw and "snr_linear" not in raw:
        problems.append("one of snr_db and snr_linear is required")
    if "n_antennas" not in raw:
        problems.append("n_antennas is required")
    if "users_per_cell" not in raw and "load_ratio" not in raw:
        problems.append("one of users_per_cell and load_ratio is required")
    eta = raw.get("path_loss_exp")
    if eta is not None and eta <= 2.0:
        problems.append(
            f"path_loss_exp={eta:g} is invalid: moments of the interference and "
            "leakage diverge unless the exponent exceeds 2"
        )
    if problems:
        return problems
    try:
        params_from_dict(raw)
    except DomainError as exc:
        problems.append(str(exc))
    return problems


def params_from_dict(raw: dict) -> SystemParams:
    """Build SystemParams from a JSON-style dict (see validate_raw_config)."""
    if "snr_db" in raw and "snr_linear" in raw:
        raise DomainError("snr_db and snr_linear are mutually exclusive")
    return derive_params(
        n_antennas=raw.get("n_antennas", 0),
        users_per_cell=raw.get("users_per_cell"),
        load_ratio=raw.get("load_ratio"),
        snr=raw.get("snr_linear"),
        snr_db=raw.get("snr_db"),
        path_loss_exp=raw.get("path_loss_exp", 4.0),
        bs_density=raw.get("bs_density", 0.1),
        regularizer=raw.get("regularizer"),
        round_users=bool(raw.get("round_users", False)),
    )


def params_to_dict(params: SystemParams) -> dict:
    """Serialize to the JSON config form accepted by params_from_dict."""
    return {
        "n_antennas": params.n_antennas,
        "users_per_cell": params.users_per_cell,
        "snr_linear": params.snr,
        "path_loss_exp": params.path_loss_exp,
        "bs_density": params.bs_density,
        "regularizer": params.regularizer,
    }


def load_params(path: str) -> SystemParams:
    with open(path, "r", encoding="utf-8") as fh:
        return params_from_dict(json.load(fh))


@dataclass(frozen=True)
class CooperationConfig:
    """Cooperation range of malicious users.

    ``coop_radius`` is the largest distance at which two malicious users can
    still exchange data.
    """

    coop_radius: float

    def __post_init__(self):
        if not self.coop_radius > 0.0:
            raise DomainError("coop_radius must be strictly positive")

    @classmethod
    def from_power_model(
        cls,
        tx_power: float,
        noise_power: float,
        detection_threshold: float,
        path_loss_exp: float,
    ) -> "CooperationConfig":
        """Derive the radius from the power-law link budget.

        With path loss d**(-eta), the largest usable distance solves
        tx_power * d**(-eta) / noise_power = detection_threshold.
        """
        if min(tx_power, noise_power, detection_threshold, path_loss_exp) <= 0.0:
            raise DomainError("power-model inputs must be strictly positive")
        return cls(coop_radius=(tx_power / (detection_threshold * noise_power)) ** (1.0 / path_loss_exp))
