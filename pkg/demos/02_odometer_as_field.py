# %% [markdown]
# The critical odometer is a shifted Gaussian field
#
# For Gaussian initial mass on a torus, the odometer has the law of
# `eta - min eta`, where `eta` is the bi-Laplacian Gaussian field.  This
# script compares the two on a small torus and then looks at how the mean
# odometer grows with the side length.

# %%
import numpy as np

from divsandpile.experiments import exp_equality_in_law, exp_scaling, phi
from divsandpile.green import variogram_fourier

rep = exp_equality_in_law(6, 2, 500, seed=1, bootstrap=50)
for line in rep.lines():
    print(line)
print("mean odometer        ", rep.data["mean_odometer"])
print("mean min-shifted eta ", rep.data["mean_min_shifted_field"])

# %% [markdown]
# The variogram `E(eta_0 - eta_x)^2` has a closed Fourier form.  In three
# dimensions it grows roughly linearly in the lag.

# %%
for r in (1, 2, 4, 8):
    v = variogram_fourier(32, 3, (r, 0, 0))
    print(f"lag {r}: variogram {v:8.4f}   ratio to |x| {v / r:.4f}")

# %% [markdown]
# The mean odometer at the origin grows like `n^(3/2)` on a cycle.  The
# spectral sampler makes a few hundred draws per size cheap.

# %%
table = exp_scaling(1, [32, 64, 128, 256], 100, seed=3)
for row in table.rows:
    print(f"n={row.n:4d}  E u = {row.mean:10.3f} +- {row.se:.3f}   "
          f"E u / phi = {row.mean / phi(1, row.n):.4f}")
print(f"fitted slope {table.slope:.3f}, 95% interval {np.round(table.ci, 3)}")
