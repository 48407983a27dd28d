"""Equilibria, the partition series, and the condensation threshold.

Under the curl-free condition the stationary states form a one-parameter
family indexed by a fugacity phi: weight(l) ~ phi^l Q_l / Z(phi).  The
radius of convergence phi_c of Z and the density rho_c carried at phi_c
split the phase diagram: densities <= rho_c are representable, anything
above condenses into ever-larger clusters.
"""

import math

import numpy as np

from edgrow import (
    chemical_potential,
    condensing_kernel,
    constant_kernel,
    critical_density_info,
    density_at_fugacity,
    equilibrium_profile,
    fugacity_for_density,
    partition_sum,
    separable_kernel,
)

print("=== critical constants per family ===")
for label, kernel, k_max in (
    ("constant   K = 1", constant_kernel(), 20_000),
    ("condensing K = 1 + 3/k", condensing_kernel(3.0), 10**6),
    ("separable  K = k", separable_kernel("k", "1"), 5_000),
):
    cp = chemical_potential(kernel, k_max)
    info = critical_density_info(cp)
    rho_c = "inf" if math.isinf(info.value) else f"{info.value:.9f}"
    print(
        f"  {label:25s} phi_c = {cp.phi_c_estimate:<12g} rho_c = {rho_c:12s} "
        f"(method: {info.method})"
    )

print()
print("=== condensing kernel in detail ===")
kernel = condensing_kernel(3.0)
cp = chemical_potential(kernel, 10**6)
z_at_crit, _ = partition_sum(cp, 0.25)
print(f"partition value at the critical fugacity: Z(1/4) = {z_at_crit:.12f}")
print("fugacity-density curve (strictly increasing up to rho_c = 1):")
for rho in (0.1, 0.25, 0.5, 0.75, 0.9, 0.99, 1.0):
    phi = fugacity_for_density(cp, rho)
    back = density_at_fugacity(cp, phi)
    print(f"  rho = {rho:4.2f}  ->  phi = {phi:.10f}   (density check {back:.10f})")

print()
print("=== equilibrium profiles ===")
profile_half = equilibrium_profile(cp, rho=0.5, k_max=12)
profile_crit = equilibrium_profile(cp, phi=0.25, k_max=12)
print("  l    omega_l at rho=0.5     omega_l at phi_c")
for l in range(8):
    print(f"  {l}    {profile_half.omega[l]:.10f}      {profile_crit.omega[l]:.10f}")
print(f"critical profile mass on the truncated range: {profile_crit.density:.6f}")
print("  (the tail-corrected supremum is rho_c = 1; see the table above)")
print(f"omega_0 at the critical fugacity = {profile_crit.omega[0]:.10f} (exactly 2/3)")

print()
print("Supercritical densities have no normalizable equilibrium:")
try:
    fugacity_for_density(cp, 2.0)
except Exception as exc:
    print(f"  fugacity_for_density(cp, 2.0) -> {type(exc).__name__}: {exc}")
