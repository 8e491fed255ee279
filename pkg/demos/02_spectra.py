# %% [markdown]
# # Resonant ODMR spectra
# Under resonant excitation only NVs whose excited-state branch matches the laser contribute
# an inverted-contrast signal. Their transverse field splits the ground-state line.

# %%
import numpy as np

from nvefield.fitting import extract_peak_splitting
from nvefield.spectrum import PRESET_OMEGA, PRESETS, SampleParams, SpectrumModel, symmetric_grid

model = SpectrumModel(SampleParams())
omega = symmetric_grid(15.0, 0.03)
for d in (0.0, 200.0, 500.0):
    spec = model.resonant_spectrum(d, None, omega)
    print(f"detuning {d:5.0f} GHz: Pi_perp = {extract_peak_splitting(spec, d).pi_perp:.3f} MHz")

# %% [markdown]
# Temperature presets change the broadening and the weight of the off-resonant background.

# %%
for name, preset in PRESETS.items():
    m = model.with_params(epsilon_c=preset.epsilon_c)
    s = m.total_spectrum(0.0, preset.broadening, PRESET_OMEGA)
    print(f"{name:>4}: max {s.signal.max():+.3e}, min {s.signal.min():+.3e}")

# %% [markdown]
# Fraction of resonantly driven configurations and the relative fluorescence.

# %%
for d in np.arange(-400.0, 401.0, 100.0):
    f = model.config_fractions(d)
    print(f"{d:6.0f} GHz  F_R {f.f_resonant:.2e}  F_OR {f.f_offresonant:.3f}  fluorescence {model.fluorescence(d):.3f}")
