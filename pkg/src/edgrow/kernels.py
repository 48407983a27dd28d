"""Rate kernels for monomer exchange between clusters.

A kernel assigns the rate ``K(k, j)`` at which a cluster of size ``k >= 1``
hands a monomer to a cluster of size ``j >= 0``.  Built-in families cover the
constant kernel, the "condensing" family ``1 + c/k`` (finite critical
density), separable products ``b_k * a_j`` defined through a small rational
expression grammar, and an additive family that violates the curl-free
(Becker-Doring) condition and is useful as a negative control.

The module also hosts executable audits of the structural conditions the
longtime theory needs: linear growth bounds, discrete regularity, continuity
at infinity, sublinear envelopes and the curl-free condition itself.  The
audits sample a finite grid and say so; they are evidence, not proofs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Callable, Mapping, Optional, Tuple

import numpy as np

from ._expr import RateExpressionError, compile_rational

__all__ = [
    "Kernel",
    "KernelDomainError",
    "ZeroRateError",
    "AssumptionReport",
    "constant_kernel",
    "condensing_kernel",
    "separable_kernel",
    "additive_kernel",
    "kernel_from_spec",
    "kernel_spec",
    "eval_kernel",
    "bda_residual",
    "audit_assumptions",
    "kernel_matrix",
    "log_kernel_matrix",
]


class KernelDomainError(ValueError):
    """Arguments outside the kernel domain (donor size must be >= 1)."""


class ZeroRateError(ValueError):
    """A rate needed by an identity or a product is zero."""


@dataclass(frozen=True, eq=False)
class Kernel:
    """Immutable exchange-rate map ``(k, j) -> K(k, j)``.

    Attributes
    ----------
    family:
        Label of the built-in family (or ``"custom"``).
    growth_constant:
        Declared constant ``C`` such that ``K(k, j) <= C * k * (j + 1)`` is
        expected to hold; the audit checks it on a grid.
    separable:
        ``(b, a)`` vectorized factor maps when ``K(k, j) = b(k) * a(j)``
        exactly, else ``None``.  Enables the O(N) birth/death fast path.
    params:
        Constructor parameters, kept so a kernel can be serialized back into
        a config (checkpoints are self-describing).
    """

    family: str
    rate_fn: Callable[[np.ndarray, np.ndarray], np.ndarray]
    growth_constant: float
    separable: Optional[Tuple[Callable, Callable]] = None
    params: Mapping[str, Any] = field(default_factory=dict)

    def __call__(self, k, j):
        """Rate of a size-``k`` cluster passing a monomer to a size-``j`` one."""
        k_arr = np.asarray(k)
        j_arr = np.asarray(j)
        if np.any(k_arr < 1):
            raise KernelDomainError("donor size k must be >= 1")
        if np.any(j_arr < 0):
            raise KernelDomainError("acceptor size j must be >= 0")
        out = self.rate_fn(np.asarray(k_arr, dtype=float), np.asarray(j_arr, dtype=float))
        if np.ndim(k) == 0 and np.ndim(j) == 0:
            return float(out)
        return out

    def rate_grid(self, n_k: int, n_j: int) -> np.ndarray:
        """Dense table ``K(k, j)`` for ``k = 1..n_k``, ``j = 0..n_j-1``."""
        ks = np.arange(1, n_k + 1, dtype=float)[:, None]
        js = np.arange(0, n_j, dtype=float)[None, :]
        return self.rate_fn(np.broadcast_to(ks, (n_k, n_j)), np.broadcast_to(js, (n_k, n_j)))


def eval_kernel(kernel: Kernel, k: int, j: int) -> float:
    """Evaluate one rate with domain checks (pure; same inputs, same output)."""
    if k < 1:
        raise KernelDomainError("donor size k must be >= 1")
    if j < 0:
        raise KernelDomainError("acceptor size j must be >= 0")
    return float(kernel(k, j))


def _probe_growth_constant(rate_fn, n: int = 64) -> float:
    ks = np.arange(1, n + 1, dtype=float)[:, None]
    js = np.arange(0, n, dtype=float)[None, :]
    table = rate_fn(np.broadcast_to(ks, (n, n)), np.broadcast_to(js, (n, n)))
    ratio = table / (ks * (js + 1.0))
    return float(np.max(ratio))


def constant_kernel(value: float = 1.0) -> Kernel:
    """Size-independent exchange: every pair reacts at the same rate."""
    if value <= 0:
        raise ValueError("constant kernel rate must be positive")
    v = float(value)
    b = compile_rational(v)
    a = compile_rational(1.0)
    return Kernel(
        family="constant",
        rate_fn=lambda k, j: np.full(np.broadcast(k, j).shape, v),
        growth_constant=v,
        separable=(b, a),
        params={"value": v},
    )


def condensing_kernel(strength: float = 3.0) -> Kernel:
    """Donor-only kernel ``K(k, j) = 1 + strength / k``.

    Small clusters evaporate faster than large ones absorb, which caps the
    density the equilibrium family can carry: with the default strength 3 the
    critical fugacity is 1/4 and the critical density is 1.
    """
    if strength <= 0:
        raise ValueError("condensing strength must be positive")
    s = float(strength)
    b = compile_rational(f"1 + {s!r}/k")
    a = compile_rational(1.0)
    return Kernel(
        family="condensing",
        rate_fn=lambda k, j: (1.0 + s / k) * np.ones(np.broadcast(k, j).shape),
        growth_constant=1.0 + s,
        separable=(b, a),
        params={"c": s},
    )


def separable_kernel(b="k", a="1", growth_constant: Optional[float] = None) -> Kernel:
    """Product kernel ``K(k, j) = b(k) * a(j)`` from rational expressions."""
    b_fn = compile_rational(b)
    a_fn = compile_rational(a)

    def rate(k, j):
        return b_fn(k) * a_fn(j)

    if growth_constant is None:
        growth_constant = _probe_growth_constant(rate)
    return Kernel(
        family="separable",
        rate_fn=rate,
        growth_constant=float(growth_constant),
        separable=(b_fn, a_fn),
        params={"b": str(b), "a": str(a)},
    )


def additive_kernel(donor_coeff: float = 1.0, acceptor_coeff: float = 2.0) -> Kernel:
    """Non-separable ``K(k, j) = donor_coeff*k + acceptor_coeff*(j+1)``.

    Violates the curl-free condition, so it has no product-form equilibria;
    used to exercise the audit failure paths.
    """
    ck = float(donor_coeff)
    cj = float(acceptor_coeff)
    if ck < 0 or cj < 0 or ck + cj == 0:
        raise ValueError("additive kernel needs nonnegative, not both zero, coefficients")

    def rate(k, j):
        return ck * k + cj * (j + 1.0)

    return Kernel(
        family="additive",
        rate_fn=rate,
        growth_constant=ck + cj,
        separable=None,
        params={"donor_coeff": ck, "acceptor_coeff": cj},
    )


_FAMILIES = {
    "constant": lambda p: constant_kernel(p.get("value", 1.0)),
    "condensing": lambda p: condensing_kernel(p.get("c", 3.0)),
    "separable": lambda p: separable_kernel(p.get("b", "k"), p.get("a", "1")),
    "additive": lambda p: additive_kernel(
        p.get("donor_coeff", 1.0), p.get("acceptor_coeff", 2.0)
    ),
}


def kernel_from_spec(spec: Mapping[str, Any]) -> Kernel:
    """Build a kernel from a config mapping like ``{"family": "condensing", "c": 3.0}``."""
    if not isinstance(spec, Mapping) or "family" not in spec:
        raise RateExpressionError("kernel spec must be a mapping with a 'family' key")
    family = spec["family"]
    if family not in _FAMILIES:
        raise RateExpressionError(
            f"unknown kernel family {family!r}; choose from {sorted(_FAMILIES)}"
        )
    params = {key: value for key, value in spec.items() if key != "family"}
    return _FAMILIES[family](params)


def kernel_spec(kernel: Kernel) -> dict:
    """Round-trippable config mapping for a built-in kernel."""
    return {"family": kernel.family, **dict(kernel.params)}


@lru_cache(maxsize=8)
def kernel_matrix(kernel: Kernel, n: int) -> np.ndarray:
    """Cached table ``M[i-1, j] = K(i, j)`` for ``i = 1..n``, ``j = 0..n-1``.

    This single table drives both the generic O(N^2) birth/death sums and the
    pairwise dissipation loops.  Kernels are immutable, so caching by identity
    is safe.
    """
    return kernel.rate_grid(n, n)


@lru_cache(maxsize=8)
def log_kernel_matrix(kernel: Kernel, n: int) -> np.ndarray:
    """Cached elementwise log of :func:`kernel_matrix` (−inf where the rate is 0)."""
    with np.errstate(divide="ignore"):
        return np.log(kernel_matrix(kernel, n))


def bda_residual(kernel: Kernel, k: int, l: int) -> float:
    """Log-space defect of the curl-free identity at the pair ``(k, l)``.

    Zero exactly when ``K(k,l-1) K(1,k-1) K(l,0) = K(l,k-1) K(1,l-1) K(k,0)``.
    Computed as a sum of logs so that huge rates cannot overflow.
    Raises :class:`ZeroRateError` when any of the six factors vanishes: the
    identity is undefined off the support of the kernel.
    """
    if k < 1 or l < 1:
        raise KernelDomainError("the curl-free identity needs k, l >= 1")
    factors = [
        kernel(k, l - 1),
        kernel(1, k - 1),
        kernel(l, 0),
        kernel(l, k - 1),
        kernel(1, l - 1),
        kernel(k, 0),
    ]
    if any(f == 0.0 for f in factors):
        raise ZeroRateError(f"zero-rate: curl-free identity undefined at (k, l) = ({k}, {l})")
    logs = [math.log(f) for f in factors]
    return abs(logs[0] + logs[1] + logs[2] - logs[3] - logs[4] - logs[5])


@dataclass(frozen=True)
class AssumptionReport:
    """Finite-grid audit of the structural kernel conditions.

    All verdicts are sampled on ``probe_range`` and labeled as such; a flag
    being ``True`` means "no violation found on the grid", never a proof.
    ``k3_ratio_deviation`` estimates the continuity-at-infinity defect on the
    top decile of the grid, ``k4_ok`` tests sublinearity of the empirical
    donor envelopes, and ``bda_max_residual`` is the largest curl-free defect
    over pairs where the identity is defined (NaN when no pair is).
    """

    k1_ok: bool
    k2_ok: bool
    k3_ratio_deviation: float
    k4_ok: bool
    bda_max_residual: float
    probe_range: Tuple[int, int]
    growth_constant: float
    zero_rate_pairs: int

    def as_dict(self) -> dict:
        return {
            "k1_ok": self.k1_ok,
            "k2_ok": self.k2_ok,
            "k3_ratio_deviation": self.k3_ratio_deviation,
            "k4_ok": self.k4_ok,
            "bda_max_residual": self.bda_max_residual,
            "probe_range": list(self.probe_range),
            "growth_constant": self.growth_constant,
            "zero_rate_pairs": self.zero_rate_pairs,
            "verdict_basis": "sampled",
        }


def _sampled_sublinear(seq: np.ndarray) -> bool:
    """Grid verdict for ``s_k / k -> 0``: the normalized value at the top of the
    range must have dropped to at most 3/4 of its mid-range value (or be tiny)."""
    n = len(seq)
    if n < 4:
        return True
    hi = n - 1
    mid = n // 2
    top = seq[hi] / (hi + 1)
    middle = seq[mid] / (mid + 1)
    if top <= 1e-12:
        return True
    return bool(top <= 0.75 * middle)


def audit_assumptions(kernel: Kernel, k_max: int, l_max: int) -> AssumptionReport:
    """Evaluate every structural condition on the full ``k_max x l_max`` grid."""
    if k_max < 2 or l_max < 2:
        raise ValueError("probe grid must be at least 2 x 2")
    n_k, n_l = int(k_max), int(l_max)
    ks = np.arange(1, n_k + 1, dtype=float)
    js = np.arange(0, n_l, dtype=float)  # acceptor sizes j = l - 1
    table = kernel.rate_fn(
        np.broadcast_to(ks[:, None], (n_k, n_l)), np.broadcast_to(js[None, :], (n_k, n_l))
    )
    c_k = kernel.growth_constant

    # Linear growth: 0 <= K(k, l-1) <= C k l on the whole grid.
    bound = c_k * ks[:, None] * (js[None, :] + 1.0)
    k1_ok = bool(np.all(table >= 0.0) and np.all(table <= bound * (1 + 1e-12)))

    # Discrete regularity: increments in either argument grow at most linearly.
    d_acceptor = np.abs(np.diff(table, axis=1))  # |K(k, j) - K(k, j-1)|, j >= 1
    d_donor = np.abs(np.diff(table, axis=0))  # |K(k+1, j) - K(k, j)|
    k2_ok = bool(
        np.all(d_acceptor <= c_k * ks[:, None] * (1 + 1e-12))
        and np.all(d_donor <= c_k * (js[None, :] + 1.0) * (1 + 1e-12))
    )

    # Continuity at infinity: consecutive-argument ratios approach 1; sampled on
    # the top decile of the grid because only the tail carries the limit.
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio_acceptor = table[:, 1:] / table[:, :-1]
        ratio_donor = table[1:, :] / table[:-1, :]
    top_j = max(1, int(0.9 * (n_l - 1)))
    top_k = max(1, int(0.9 * (n_k - 1)))
    dev = 0.0
    band_a = ratio_acceptor[:, top_j:]
    band_d = ratio_donor[top_k:, :]
    for band in (band_a, band_d):
        finite = band[np.isfinite(band)]
        if finite.size:
            dev = max(dev, float(np.max(np.abs(finite - 1.0))))

    # Sublinear envelopes: the tightest donor profiles allowed by the two-sided
    # bounds, b_k = max_j K(k, j)/(j+1) and d_k = max_j K(k, j)/K(1, j).
    with np.errstate(divide="ignore", invalid="ignore"):
        b_profile = np.max(table / (js[None, :] + 1.0), axis=1)
        first_row = table[0, :]
        valid = first_row > 0
        if np.any(valid):
            d_profile = np.max(table[:, valid] / first_row[valid][None, :], axis=1)
        else:
            d_profile = b_profile
    k4_ok = _sampled_sublinear(b_profile) and _sampled_sublinear(d_profile)

    bda_max, zero_pairs = _bda_grid(kernel, min(n_k, n_l))

    return AssumptionReport(
        k1_ok=k1_ok,
        k2_ok=k2_ok,
        k3_ratio_deviation=dev,
        k4_ok=k4_ok,
        bda_max_residual=bda_max,
        probe_range=(n_k, n_l),
        growth_constant=c_k,
        zero_rate_pairs=zero_pairs,
    )


def _bda_grid(kernel: Kernel, n: int) -> Tuple[float, int]:
    """Max curl-free defect over the n x n pair grid, counting undefined pairs."""
    ks = np.arange(1, n + 1, dtype=float)
    pair_k = np.broadcast_to(ks[:, None], (n, n))
    pair_l = np.broadcast_to(ks[None, :], (n, n))
    terms = [
        kernel.rate_fn(pair_k, pair_l - 1.0),
        kernel.rate_fn(np.ones_like(pair_k), pair_k - 1.0),
        kernel.rate_fn(pair_l, np.zeros_like(pair_l)),
        kernel.rate_fn(pair_l, pair_k - 1.0),
        kernel.rate_fn(np.ones_like(pair_l), pair_l - 1.0),
        kernel.rate_fn(pair_k, np.zeros_like(pair_k)),
    ]
    stacked = np.stack(terms)
    defined = np.all(stacked > 0.0, axis=0)
    zero_pairs = int(stacked.shape[1] * stacked.shape[2] - np.count_nonzero(defined))
    if not np.any(defined):
        return math.nan, zero_pairs
    with np.errstate(divide="ignore"):
        logs = np.log(stacked)
    residual = np.abs(logs[0] + logs[1] + logs[2] - logs[3] - logs[4] - logs[5])
    return float(np.max(residual[defined])), zero_pairs
