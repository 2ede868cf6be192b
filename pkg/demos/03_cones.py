# %% [markdown]
# Deterministic configurations on planar cones
#
# Put mass `m` on the cone `{x >= 0, |y| <= a x}`.  A stabilization
# certificate is a nonnegative function `v` with `s + Lv <= 1` away from
# a finite set, plus enough holes elsewhere to absorb the leftover excess.
# With mass one on the full right half-line of the cone of slope one, the
# odometer keeps growing as the box is enlarged.

# %%
from fractions import Fraction

from divsandpile.experiments import cone_certificate, cone_explode, exp_s0_line

a = Fraction(1, 2)
threshold = (1 + a * a) / (2 * a)
print("critical mass for a = 1/2:", threshold)

for m in (1.0, 1.25, 1.4):
    rep = cone_certificate(a, m, 60)
    print(f"m = {m}: certificate {'holds' if rep.passed else 'fails'}")
    for c in rep.failures():
        print("   ", c.line())

# %% [markdown]
# The line configuration (mass `x` at `(x, 0)`) is exactly balanced by the
# cone function of slope one.

# %%
for line in exp_s0_line(80).lines():
    print(line)

# %%
radii = [8, 16, 32, 64]
rep = cone_explode(1.0, radii)
for r, u in zip(radii, rep.data["u_probe"]):
    print(f"box radius {r:3d}: u(1, 0) = {u:8.3f}")
print("divergence consistent:", rep.data["divergence_consistent"])
