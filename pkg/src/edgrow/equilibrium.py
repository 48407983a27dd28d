"""Equilibrium family of the exchange dynamics under the curl-free condition.

Product-form stationary states are indexed by a fugacity ``phi``: the weight
of size ``l`` is ``phi**l * Q_l / Z(phi)`` where ``Q_l`` multiplies the
forward/backward rate ratios of successive monomer attachments and
``Z(phi)`` is the normalizing power series.  The radius of convergence
``phi_c`` and the density reachable at it, ``rho_c``, organize the phase
diagram: densities up to ``rho_c`` are carried by a normalizable state,
anything beyond condenses.

Everything is computed in log space: the weights ``Q_l`` span hundreds of
orders of magnitude already for geometric-type kernels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Optional, Tuple

import numpy as np

from .kernels import Kernel, ZeroRateError

__all__ = [
    "ChemicalPotential",
    "EquilibriumProfile",
    "PhiCEstimate",
    "CriticalDensityInfo",
    "DivergentSeriesError",
    "SupercriticalDensityError",
    "InconclusiveDensityError",
    "estimate_critical_fugacity",
    "chemical_potential",
    "partition_sum",
    "density_at_fugacity",
    "fugacity_for_density",
    "critical_density",
    "critical_density_info",
    "equilibrium_profile",
    "equilibrium_free_energy",
    "profile_to_csv",
    "profile_summary",
    "tagged_value",
]


class DivergentSeriesError(ValueError):
    """Requested fugacity lies outside the radius of convergence."""


class SupercriticalDensityError(ValueError):
    """Requested density exceeds the critical density."""

    def __init__(self, rho: float, rho_c: float):
        super().__init__(f"supercritical: rho={rho!r} exceeds rho_c={rho_c!r}")
        self.rho = rho
        self.rho_c = rho_c


class InconclusiveDensityError(RuntimeError):
    """The critical-density extrapolation did not stabilize."""


class PhiCEstimate(NamedTuple):
    value: float
    converged: bool
    tail_deviation: float


@dataclass(frozen=True, eq=False)
class ChemicalPotential:
    """Log-space prefix products of attachment-rate ratios.

    ``log_q[l]`` is the log weight of size ``l`` with ``log_q[0] = 0`` and
    increments ``log K(1, l-1) - log K(l, 0)``.  ``phi_c_estimate`` is the
    sampled radius of convergence of the associated power series (may be
    ``inf``).
    """

    log_q: np.ndarray
    phi_c_estimate: float
    phi_c_converged: bool
    k_max: int

    def __post_init__(self):
        if self.log_q[0] != 0.0:
            raise ValueError("log_q[0] must be 0 (unit weight at size 0)")
        if len(self.log_q) != self.k_max + 1:
            raise ValueError("log_q must cover sizes 0..k_max")


@dataclass(frozen=True)
class EquilibriumProfile:
    """Normalized equilibrium state truncated at ``k_max``.

    ``omega[l] = exp(l log phi + log_q[l] - log Z)`` against the full-range
    partition value, so the truncated entries sum to at most 1 and the defect
    is bounded by ``truncation_tail_bound``.  ``density`` is the full-series
    mean cluster mass at this fugacity.
    """

    omega: np.ndarray
    phi: float
    z_value: float
    log_z: float
    density: float
    truncation_tail_bound: float
    k_max: int


def estimate_critical_fugacity(
    kernel: Kernel, k_probe: int = 1 << 16, rel_tol: float = 1e-6
) -> PhiCEstimate:
    """Estimate the limiting detachment/attachment rate ratio.

    The ratio ``r_k = K(k, 0) / K(1, k-1)`` is sampled on a dyadic ladder up
    to ``k_probe`` and extrapolated to ``k -> infinity`` by Richardson steps
    (rate families built from rational expressions have exact expansions in
    ``1/k``, so the extrapolation reaches machine precision).  A plain tail
    average cannot resolve ``1/k`` corrections to the accuracy the critical
    constants need, which is why the ladder is extrapolated instead of
    averaged; the tail window deviation is still reported.  A ratio that
    grows monotonically and substantially across the ladder is flagged as a
    divergent (infinite) radius.
    """
    if k_probe < 16:
        raise ValueError("k_probe must be at least 16")
    k0 = 1 << int(math.floor(math.log2(k_probe)))
    levels = 1
    while levels < 7 and (k0 >> levels) >= 16:
        levels += 1
    nodes = np.array([k0 >> (levels - 1 - i) for i in range(levels)], dtype=float)
    r = np.array(
        [kernel(int(k), 0) / kernel(1, int(k) - 1) for k in nodes], dtype=float
    )

    window = np.unique(np.linspace(k0 // 2, k0, 9, dtype=int))
    r_window = np.array([kernel(int(k), 0) / kernel(1, int(k) - 1) for k in window])
    mean = float(np.mean(r_window))
    tail_dev = float(np.max(np.abs(r_window - mean)) / max(abs(mean), 1e-300))

    increasing = bool(np.all(np.diff(r) > 0))
    if r[-1] > 1e12 or (increasing and r[-1] >= 8.0 * max(r[0], 1e-300)):
        return PhiCEstimate(math.inf, True, tail_dev)

    # Richardson table for nodes doubling toward k0 (h = 1/k halving).
    table = [r.copy()]
    for m in range(1, levels):
        prev = table[-1]
        factor = 2.0**m
        table.append((factor * prev[1:] - prev[:-1]) / (factor - 1.0))
    value = float(table[-1][-1])
    increment = abs(value - float(table[-2][-1])) if levels >= 2 else math.inf
    converged = increment <= rel_tol * max(abs(value), 1e-300)
    return PhiCEstimate(max(value, 0.0), bool(converged), tail_dev)


def chemical_potential(
    kernel: Kernel, k_max: int, phi_c: Optional[float] = None
) -> ChemicalPotential:
    """Accumulate ``log_q`` for sizes ``0..k_max`` and attach a ``phi_c`` estimate."""
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    ls = np.arange(1, k_max + 1, dtype=float)
    attach = kernel.rate_fn(np.ones_like(ls), ls - 1.0)  # K(1, l-1)
    detach = kernel.rate_fn(ls, np.zeros_like(ls))  # K(l, 0)
    bad = np.nonzero((attach <= 0.0) | (detach <= 0.0))[0]
    if bad.size:
        l = int(bad[0]) + 1
        raise ZeroRateError(
            f"zero-rate: K(1,{l - 1}) or K({l},0) vanishes; chemical potential undefined"
        )
    increments = np.log(attach) - np.log(detach)
    log_q = np.concatenate(([0.0], np.cumsum(increments)))
    if phi_c is None:
        estimate = estimate_critical_fugacity(kernel, max(1 << 16, 16))
        phi_c_value, converged = estimate.value, estimate.converged
    else:
        phi_c_value, converged = float(phi_c), True
    return ChemicalPotential(
        log_q=log_q, phi_c_estimate=phi_c_value, phi_c_converged=converged, k_max=int(k_max)
    )


def _log_terms(cp: ChemicalPotential, phi: float) -> np.ndarray:
    ls = np.arange(cp.k_max + 1, dtype=float)
    return ls * math.log(phi) + cp.log_q


def _check_fugacity(cp: ChemicalPotential, phi: float) -> None:
    if phi < 0.0:
        raise ValueError("fugacity must be nonnegative")
    if math.isfinite(cp.phi_c_estimate) and phi > cp.phi_c_estimate * (1.0 + 1e-9):
        raise DivergentSeriesError(
            f"divergent: phi={phi!r} exceeds phi_c={cp.phi_c_estimate!r}"
        )


def partition_sum(cp: ChemicalPotential, phi: float) -> Tuple[float, float]:
    """Normalizing series and a tail bound for its truncation.

    Returns ``(z_value, tail_bound)``.  The bound is geometric, computed from
    the largest term ratio seen on the top decile of the range together with
    ``phi/phi_c``; when that ratio reaches 1 (e.g. exactly at the critical
    fugacity) the remainder has no geometric majorant and the bound is
    reported as ``inf`` rather than invented.
    """
    _check_fugacity(cp, phi)
    if phi == 0.0:
        return 1.0, 0.0
    t = _log_terms(cp, phi)
    log_z = _log_sum(t)
    z = math.exp(log_z) if log_z < 709.0 else math.inf
    tail = _geometric_tail(cp, phi, t)
    return z, tail


def _geometric_tail(cp: ChemicalPotential, phi: float, log_terms: np.ndarray) -> float:
    ratios = np.exp(np.diff(log_terms))
    top = ratios[max(0, int(0.9 * len(ratios))) :]
    q = float(np.max(top)) if top.size else 0.0
    if math.isfinite(cp.phi_c_estimate) and cp.phi_c_estimate > 0.0:
        q = max(q, phi / cp.phi_c_estimate)
    if q >= 1.0 - 1e-12:
        return math.inf
    last = math.exp(log_terms[-1])
    return last * q / (1.0 - q)


# Series terms below this fraction of the peak cannot move the sum by an ulp;
# dropping them is the evaluation-time form of adaptive truncation.
_LOG_CUTOFF = math.log(1e-18)


def _log_sum(values: np.ndarray) -> float:
    """Log of a sum of exponentials over the terms that can contribute."""
    m = float(np.max(values))
    if not math.isfinite(m):
        return -math.inf
    kept = values[values >= m + _LOG_CUTOFF]
    return m + math.log(float(np.sum(np.exp(kept - m))))


def density_at_fugacity(cp: ChemicalPotential, phi: float) -> float:
    """Mean cluster mass of the equilibrium state at fugacity ``phi``."""
    _check_fugacity(cp, phi)
    if phi == 0.0:
        return 0.0
    t = _log_terms(cp, phi)
    ls = np.arange(cp.k_max + 1, dtype=float)
    with np.errstate(divide="ignore"):
        log_num = _log_sum(t[1:] + np.log(ls[1:]))
    log_den = _log_sum(t)
    return math.exp(log_num - log_den)


def fugacity_for_density(
    cp: ChemicalPotential, rho: float, rel_tol: float = 1e-10
) -> float:
    """Invert the strictly increasing density map by bisection.

    Densities at (or numerically indistinguishable from) the critical value
    return the critical fugacity exactly.  Raises
    :class:`SupercriticalDensityError` beyond it.
    """
    if rho < 0.0:
        raise ValueError("density must be nonnegative")
    if rho == 0.0:
        return 0.0
    rho_c = critical_density(cp)
    if rho > rho_c * (1.0 + 1e-9) + 1e-12:
        raise SupercriticalDensityError(rho, rho_c)

    phi_c = cp.phi_c_estimate
    if math.isfinite(phi_c):
        hi = phi_c
        rho_hi = density_at_fugacity(cp, hi)
        if rho >= rho_hi:
            # At the truncation in use, no fugacity below phi_c reaches rho;
            # the requested density is certified subcritical, so the critical
            # fugacity is the inverse.
            return phi_c
    else:
        hi = 1.0
        while density_at_fugacity(cp, hi) < rho:
            hi *= 2.0
            if hi > 1e12:
                raise InconclusiveDensityError(
                    "could not bracket the requested density"
                )
    lo = 0.0
    target_tol = rel_tol * max(1.0, rho)
    phi = 0.5 * (lo + hi)
    for _ in range(200):
        phi = 0.5 * (lo + hi)
        value = density_at_fugacity(cp, phi)
        err = value - rho
        if abs(err) <= target_tol:
            return phi
        if err > 0.0:
            hi = phi
        else:
            lo = phi
        if hi - lo <= 1e-17 * max(hi, 1.0):
            break
    value = density_at_fugacity(cp, phi)
    if abs(value - rho) <= 10.0 * target_tol:
        return phi
    raise InconclusiveDensityError(
        f"bisection stalled at phi={phi!r} with density error {value - rho!r}"
    )


@dataclass(frozen=True)
class CriticalDensityInfo:
    """How the critical density was obtained.

    ``ladder`` holds the densities along the dyadic fugacity ladder
    ``phi_j = phi_c (1 - 2^-j)``; ``last_increment`` is the final ladder step;
    ``method`` is one of ``"infinite-radius"``, ``"ladder-divergent"``,
    ``"direct-tail"`` or ``"ladder"``.
    """

    value: float
    ladder: Tuple[float, ...]
    last_increment: float
    method: str


def _algebraic_tail(
    log_terms: np.ndarray, k_max: int
) -> Optional[Tuple[float, float]]:
    """Tail estimate for an eventually algebraically decaying positive series.

    Fits the local power ``p`` from the term ratio between ``k_max/2`` and
    ``k_max`` and integrates ``C l^-p`` beyond the truncation.  Returns
    ``(tail, p)`` or ``None`` when the terms do not decay algebraically.
    """
    n = k_max
    half = n // 2
    if half < 2:
        return None
    t_n = log_terms[n]
    t_half = log_terms[half]
    if not (math.isfinite(t_n) and math.isfinite(t_half)) or t_n >= t_half:
        return None
    p = (t_half - t_n) / math.log(n / half)
    if p <= 1.05:
        return None
    tail = math.exp(t_n) * n / (p - 1.0)
    return tail, p


@lru_cache(maxsize=64)
def critical_density_info(cp: ChemicalPotential) -> CriticalDensityInfo:
    """Supremum of the density map on ``[0, phi_c]`` with extrapolation detail.

    The dyadic ladder establishes whether the supremum is finite (a ladder
    racing past 1e12 means an infinite critical density).  When the series
    still converges at ``phi_c`` itself, the truncated direct sums are
    completed with an algebraic tail estimate, which is what makes the value
    accurate to ~1/k_max^2 instead of the raw 1/k_max truncation error.
    """
    phi_c = cp.phi_c_estimate
    if math.isinf(phi_c):
        return CriticalDensityInfo(math.inf, (), math.nan, "infinite-radius")
    if phi_c <= 0.0:
        return CriticalDensityInfo(0.0, (), 0.0, "ladder")

    ladder = []
    stable_steps = 0
    phi_last = phi_c * 0.5
    for j in range(1, 49):
        phi_j = phi_c * (1.0 - 0.5**j)
        value = density_at_fugacity(cp, phi_j)
        if ladder:
            increment = abs(value - ladder[-1]) / max(abs(value), 1e-300)
            stable_steps = stable_steps + 1 if increment < 1e-8 else 0
        ladder.append(value)
        phi_last = phi_j
        if value > 1e12:
            return CriticalDensityInfo(
                math.inf, tuple(ladder), math.inf, "ladder-divergent"
            )
        if stable_steps >= 2:
            break
    last_inc = abs(ladder[-1] - ladder[-2]) if len(ladder) >= 2 else math.nan
    stabilized = stable_steps >= 2

    # A ladder that flattens out may have hit the truncation ceiling rather
    # than a genuine limit: the density series at the last rung must have
    # decayed within the available range for the plateau to mean anything.
    t_last = _log_terms(cp, phi_last)
    ls_all = np.arange(cp.k_max + 1, dtype=float)
    with np.errstate(divide="ignore"):
        log_density_terms = t_last + np.log(ls_all)
    log_series_sum = _log_sum(log_density_terms[1:])
    truncation_clean = (log_density_terms[-1] - log_series_sum) < math.log(1e-10)

    # Direct evaluation at phi_c, completed by algebraic tails when available.
    t = _log_terms(cp, phi_c)
    ls = np.arange(cp.k_max + 1, dtype=float)
    with np.errstate(divide="ignore"):
        log_num_terms = t + np.log(ls)
    num_tail = _algebraic_tail(log_num_terms, cp.k_max)
    den_tail = _algebraic_tail(t, cp.k_max)
    if num_tail is not None and den_tail is not None:
        num = math.exp(_log_sum(log_num_terms[1:])) + num_tail[0]
        den = math.exp(_log_sum(t)) + den_tail[0]
        direct = num / den
        defect = num_tail[0] / den
        if direct >= ladder[-1] - 1e-9 and direct - ladder[-1] <= 3.0 * defect + 1e-6 * max(
            1.0, direct
        ):
            return CriticalDensityInfo(float(direct), tuple(ladder), last_inc, "direct-tail")
    if stabilized and truncation_clean:
        return CriticalDensityInfo(ladder[-1], tuple(ladder), last_inc, "ladder")
    if not truncation_clean and all(
        b >= a * (1.0 - 1e-12) for a, b in zip(ladder, ladder[1:])
    ):
        # The ladder kept climbing until the series overflowed the truncation
        # window; in the untruncated system it would climb without bound.
        return CriticalDensityInfo(math.inf, tuple(ladder), last_inc, "ladder-ceiling")
    raise InconclusiveDensityError(
        "inconclusive: fugacity ladder did not stabilize and the critical-point "
        "series offers no algebraic tail"
    )


def critical_density(cp: ChemicalPotential) -> float:
    """Largest density carried by a normalizable equilibrium (may be ``inf``)."""
    return critical_density_info(cp).value


def equilibrium_profile(
    cp: ChemicalPotential,
    phi: Optional[float] = None,
    rho: Optional[float] = None,
    k_max: Optional[int] = None,
) -> EquilibriumProfile:
    """Normalized equilibrium state for a given fugacity or density.

    Exactly one of ``phi`` and ``rho`` must be given.  The profile is cut at
    ``k_max`` (default: the chemical-potential range) while the normalization
    uses the full range, so the entries sum to at most 1.
    """
    if (phi is None) == (rho is None):
        raise ValueError("specify exactly one of phi and rho")
    if phi is None:
        phi = fugacity_for_density(cp, rho)
    k_prof = cp.k_max if k_max is None else min(int(k_max), cp.k_max)
    z, series_tail = partition_sum(cp, phi)
    if phi == 0.0:
        omega = np.zeros(k_prof + 1)
        omega[0] = 1.0
        return EquilibriumProfile(
            omega=omega, phi=0.0, z_value=1.0, log_z=0.0, density=0.0,
            truncation_tail_bound=0.0, k_max=k_prof,
        )
    t = _log_terms(cp, phi)
    log_z = _log_sum(t)
    omega = np.exp(t[: k_prof + 1] - log_z)
    density = density_at_fugacity(cp, phi)
    mass_defect = max(0.0, 1.0 - float(np.sum(omega)))
    z_for_bound = math.exp(log_z)
    tail_bound = mass_defect + (series_tail / z_for_bound if math.isfinite(series_tail) else math.inf)
    return EquilibriumProfile(
        omega=omega,
        phi=float(phi),
        z_value=z,
        log_z=log_z,
        density=density,
        truncation_tail_bound=tail_bound,
        k_max=k_prof,
    )


def equilibrium_free_energy(profile: EquilibriumProfile) -> float:
    """Closed-form free energy of an equilibrium state: ``rho log phi - log Z``."""
    if profile.phi == 0.0:
        return 0.0
    return profile.density * math.log(profile.phi) - profile.log_z


def tagged_value(x: float) -> dict:
    """JSON-safe representation of a possibly infinite quantity."""
    if math.isinf(x):
        return {"finite": False, "value": None}
    return {"finite": True, "value": x}


def profile_to_csv(profile: EquilibriumProfile, cp: ChemicalPotential, path) -> None:
    """Write ``l, omega_l, log_q_l`` rows in full double precision."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("l,omega_l,log_q_l\n")
        for l in range(profile.k_max + 1):
            fh.write(f"{l},{profile.omega[l]:.17g},{cp.log_q[l]:.17g}\n")


def profile_summary(profile: EquilibriumProfile, cp: ChemicalPotential) -> dict:
    """Self-describing scalar summary of an equilibrium computation."""
    return {
        "phi": profile.phi,
        "z": tagged_value(profile.z_value),
        "density": profile.density,
        "rho_c": tagged_value(critical_density(cp)),
        "phi_c": tagged_value(cp.phi_c_estimate),
        "truncation_tail_bound": tagged_value(profile.truncation_tail_bound),
        "k_max": cp.k_max,
    }
