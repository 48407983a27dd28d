"""Supercritical quench: weak convergence and escaping excess mass.

The condensing kernel 1 + 3/k carries at most density rho_c = 1 in a
normalizable equilibrium.  Starting at density 2, the small-cluster bulk
relaxes to the *critical* profile while the excess density drifts into
ever-larger clusters: per-size concentrations converge, the mass-weighted
norm does not.  At a finite truncation the escaping mass eventually parks
near the boundary, which the trajectory record flags.
"""

import warnings

import numpy as np

from edgrow import (
    AnalysisConfig,
    IntegratorConfig,
    chemical_potential,
    classify_longtime,
    condensing_kernel,
    equilibrium_profile,
    integrate,
    monodisperse_state,
    tail_mass,
)

kernel = condensing_kernel(3.0)
cp = chemical_potential(kernel, 200_000)
n_trunc = 192

print("density 2 = twice the critical density; all mass starts in 4-clusters")
state0 = monodisperse_state(2.0, 4, n_trunc)
cfg = IntegratorConfig(t_end=4000.0, record_every=100.0, atol=1e-14)
with warnings.catch_warnings():
    warnings.simplefilter("ignore", RuntimeWarning)  # boundary pile-up expected
    traj = integrate(kernel, state0, cfg)

report = classify_longtime(traj, cp, AnalysisConfig(excess_band_start=48))
omega_crit = equilibrium_profile(cp, phi=0.25, k_max=n_trunc).omega

print(f"regime: {report.regime} (rho_c = {report.rho_c:.6f})")
print()
print("   t      max|c_k - w_k| (k<=10)   excess mass (k>=48)   boundary band")
for i, t in enumerate(traj.times):
    if i % 8 == 0 or i == traj.sample_count - 1:
        low = np.max(np.abs(traj.states[i][:11] - omega_crit[:11]))
        print(
            f"  {t:6.0f}        {low:11.3e}            {report.excess_mass_series[i]:8.4f}"
            f"              {report.boundary_mass_series[i]:8.4f}"
        )

print()
print(f"count and mass stay conserved: drifts {traj.moment_drift()}")
print(f"low-size concentrations approach the critical profile (weak-style")
print(f"convergence), while the excess {report.target_density - report.rho_c:.3f} "
      f"lives in the large-size band.")
print(f"free-energy gap to the condensation limit value: "
      f"{report.free_energy_limit_gap:+.4e}")
if report.truncation_contaminated_from is not None:
    print(f"boundary band exceeded 1% of the density at t = "
          f"{report.truncation_contaminated_from:.0f}: from there on the")
    print("large-cluster motion is truncation-limited (the untruncated system")
    print("would keep pushing the excess to larger sizes instead).")
