"""Generate reference tables for erfcx and phi_odd with mpmath (50 digits)."""
import math
import random
import mpmath as mp

mp.mp.dps = 50
rng = random.Random(20240611)


def erfcx(z):
    return mp.exp(z * z) * mp.erfc(z)


def fmt(z, w):
    return "%.17e %.17e %.17e %.17e" % (z.real, z.imag, float(mp.re(w)), float(mp.im(w)))


def sector_points(n, amin, amax, rmin, rmax):
    pts = []
    for _ in range(n):
        r = math.exp(rng.uniform(math.log(rmin), math.log(rmax)))
        a = rng.uniform(amin, amax)
        pts.append(complex(r * math.cos(a), r * math.sin(a)))
    return pts


pts = sector_points(900, -0.75 * math.pi, 0.75 * math.pi, 1e-3, 50.0)
for x in [0.0, 1e-8, 0.5, 1.0, 2.0, 5.0, 6.0, 10.0, 27.0, 50.0]:
    pts.append(complex(x, 0.0))
    pts.append(complex(0.0, x))
    pts.append(complex(0.0, -x))
    pts.append(complex(-x * 0.7, x * 0.7))
for r in [2.5, 3.0, 4.0, 5.5, 6.5, 8.0, 12.0, 30.0]:
    for a in [0.1, 0.7, 1.2, 1.5, 1.6, 2.0, 2.3]:
        pts.append(complex(r * math.cos(a), r * math.sin(a)))
# left-region points whose values stay representable
pts += sector_points(1000 - len(pts), 0.75 * math.pi, math.pi, 1e-2, 12.0)
with open("crates/core/tests/data/erfcx_ref.txt", "w") as f:
    f.write("# re(z) im(z) re(erfcx) im(erfcx)\n")
    for z in pts:
        zz = mp.mpc(z.real, z.imag)
        f.write(fmt(z, erfcx(zz)) + "\n")

phi = sector_points(500, 0.25 * math.pi, 0.75 * math.pi, 1e-3, 40.0)
phi += sector_points(500, -0.75 * math.pi, -0.25 * math.pi, 1e-3, 40.0)
with open("crates/core/tests/data/phi_odd_ref.txt", "w") as f:
    f.write("# re(z) im(z) re(phi) im(phi)\n")
    for z in phi:
        zz = mp.mpc(z.real, z.imag)
        f.write(fmt(z, erfcx(zz) - erfcx(-zz)) + "\n")
