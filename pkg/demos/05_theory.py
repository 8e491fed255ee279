# %% [markdown]
# # Microscopic estimates
# Orbital dipoles set the excited-state susceptibilities; a spin-spin mechanism gives a
# ground-state estimate.

# %%
from nvefield.theory import OrbitalInputs, comparison_markdown, comparison_table, excited_dipoles_from_orbitals

d = excited_dipoles_from_orbitals()
print(f"dipoles (e A): perp {d.d_perp:.3f}, par {d.d_par:.3f}, transition {d.d_perp_prime:.3f}")
print(comparison_markdown(comparison_table()))

# %% [markdown]
# The ground-state estimate scales as the inverse square of the orbital extent.

# %%
for x1 in (1.0, 1.34, 2.0):
    rows = comparison_table(OrbitalInputs(x1_expectation=x1))
    print(f"<x>_1 = {x1:.2f} A -> {rows[3]['chi_perp']:.1f} Hz/(V/cm)")
