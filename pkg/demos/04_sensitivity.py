# %% [markdown]
# # Sensitivity budget
# Combine the peak-shift and fluorescence channels and sweep NV density.

# %%
from nvefield.sensitivity import (
    density_sweep,
    microwave_free_sensitivity,
    optimal_density,
    perpendicular_suppression,
    required_bias_field,
    sensitivity_breakdown,
)

for label, rho in (("measured sample", 8.0), ("optimal", optimal_density()[0])):
    b = sensitivity_breakdown(rho)
    print(f"{label:>15} ({rho:.4f} ppm): eta_F {b.eta_f:.4f}, eta_Pi {b.eta_pi:.4f}, eta {b.eta_total:.4f} V/cm/sqrt(Hz)")

# %%
sw = density_sweep(1e-7, 1e6, 131)
print(f"log-log slopes: low {sw.slope_low:.3f}, high {sw.slope_high:.3f}, conventional {sw.slope_conventional_high:.3f}")

# %%
eta, rho = microwave_free_sensitivity(2.0)
print(f"microwave-free at 2 THz thermal width: {eta * 1e3:.0f} mV/cm/sqrt(Hz) at {rho:.1f} ppm")
print(f"bias field to isolate one group at 10 GHz linewidth: {required_bias_field(1e4):.0f} V/cm")
for frac in (1e-3, 1e-2):
    print(f"perpendicular probe {frac:g} E0 -> shift {perpendicular_suppression(frac * 1.4e5, 1.4e5):.3e} V/cm")
