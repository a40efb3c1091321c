"""Independent high-precision oracle for the inverse geodesic problem.

Uses the exact integral formulation on the auxiliary sphere: the distance
integral is an incomplete elliptic integral of the second kind (evaluated
with scipy.special.ellipeinc) and the longitude integral is evaluated by
adaptive quadrature.  The departure azimuth is found with Brent root
finding on the (monotone) longitude equation.  No truncated series and no
Newton iteration are involved, so this is an independent check on the
production series solver.

Run as a script to regenerate the frozen case file:

    python tests/oracles/geodesic_oracle.py tests/data/geodesic_cases.json
"""

from __future__ import annotations

import json
import math
import random
import sys

from scipy import integrate, optimize, special

WGS84_A = 6378137.0
WGS84_F = 1.0 / 298.257223563


def _reduced_latitude(lat_deg, f):
    phi = math.radians(lat_deg)
    if abs(lat_deg) == 90.0:
        return math.copysign(math.pi / 2.0, phi)
    return math.atan((1.0 - f) * math.tan(phi))


def _distance_integral(sigma1, sigma2, k2, b):
    # b * integral of sqrt(1 + k2 sin^2 s) ds = b * (E(s2, -k2) - E(s1, -k2))
    return b * (special.ellipeinc(sigma2, -k2) - special.ellipeinc(sigma1, -k2))


def _longitude_term(sigma1, sigma2, k2, f):
    def integrand(s):
        return (2.0 - f) / (1.0 + (1.0 - f) * math.sqrt(1.0 + k2 * math.sin(s) ** 2))

    val, _ = integrate.quad(integrand, sigma1, sigma2,
                            epsabs=1e-13, epsrel=1e-13, limit=300)
    return val


def _spherical_coords(beta, alpha0_sin, alpha0_cos, cos_alpha):
    # arc position sigma and longitude omega of a point at reduced latitude
    # beta on a great circle with node azimuth alpha0
    sigma = math.atan2(math.sin(beta), math.cos(beta) * cos_alpha)
    omega = math.atan2(alpha0_sin * math.sin(sigma), math.cos(sigma))
    return sigma, omega


def inverse_distance(lat1, lon1, lat2, lon2, a=WGS84_A, f=WGS84_F):
    """High-precision geodesic distance in meters."""
    b = a * (1.0 - f)
    e2 = f * (2.0 - f)
    ep2 = e2 / (1.0 - e2)

    # canonical arrangement: |beta1| >= |beta2|, beta1 <= 0, lam12 in [0, pi]
    lam12 = math.radians(lon2 - lon1)
    lam12 = math.atan2(math.sin(lam12), math.cos(lam12))
    lam12 = abs(lam12)
    if abs(lat1) < abs(lat2):
        lat1, lat2 = lat2, lat1
    if lat1 > 0:
        lat1, lat2 = -lat1, -lat2

    beta1 = _reduced_latitude(lat1, f)
    beta2 = _reduced_latitude(lat2, f)

    if lat1 == lat2 and lam12 == 0.0:
        return 0.0

    # meridional geodesic
    if lam12 == 0.0:
        return abs(_distance_integral(beta1, beta2, ep2, b))

    # equatorial geodesic (stays on the equator only while short enough)
    if beta1 == 0.0 and beta2 == 0.0 and lam12 <= (1.0 - f) * math.pi:
        return a * lam12

    def lambda12(alpha1):
        salp0 = math.sin(alpha1) * math.cos(beta1)
        calp0 = math.sqrt(max(0.0, 1.0 - salp0 ** 2))
        sigma1, omega1 = _spherical_coords(beta1, salp0, calp0, math.cos(alpha1))
        calp2 = math.sqrt(max(0.0, calp0 ** 2 - math.sin(beta2) ** 2)) / math.cos(beta2)
        sigma2, omega2 = _spherical_coords(beta2, salp0, calp0, calp2)
        k2 = ep2 * calp0 ** 2
        lam = (omega2 - omega1) - f * salp0 * _longitude_term(sigma1, sigma2, k2, f)
        return lam, sigma1, sigma2, k2

    lo, hi = 1e-12, math.pi - 1e-12
    flo = lambda12(lo)[0] - lam12
    fhi = lambda12(hi)[0] - lam12
    if flo >= 0.0:
        alpha1 = lo
    elif fhi <= 0.0:
        alpha1 = hi
    else:
        alpha1 = optimize.brentq(lambda al: lambda12(al)[0] - lam12, lo, hi,
                                 xtol=1e-15, rtol=8.9e-16, maxiter=200)
    _, sigma1, sigma2, k2 = lambda12(alpha1)
    return _distance_integral(sigma1, sigma2, k2, b)


def build_cases(seed=20240613):
    """Deterministic point-pair suite spanning the geometries of interest."""
    rng = random.Random(seed)
    cases = []

    def add(kind, lat1, lon1, lat2, lon2):
        cases.append({
            "kind": kind,
            "p1": [lat1, lon1],
            "p2": [lat2, lon2],
            "distance_m": inverse_distance(lat1, lon1, lat2, lon2),
        })

    # closed-form anchors
    add("equatorial", 0.0, 0.0, 0.0, 1.0)
    add("meridional", 0.0, 0.0, 1.0, 0.0)

    for _ in range(12):
        dlon = rng.uniform(0.01, 120.0)
        lon0 = rng.uniform(-180.0, 180.0)
        add("equatorial", 0.0, lon0, 0.0, lon0 + dlon)
    for _ in range(12):
        lat0 = rng.uniform(-80.0, 60.0)
        dlat = rng.uniform(0.01, 25.0)
        lon0 = rng.uniform(-180.0, 180.0)
        add("meridional", lat0, lon0, lat0 + dlat, lon0)
    for _ in range(10):
        # polar-ish geometry
        add("polar", rng.uniform(75.0, 89.9), rng.uniform(-180.0, 180.0),
            rng.uniform(75.0, 89.9), rng.uniform(-180.0, 180.0))
    for _ in range(8):
        # near-antipodal pairs, the classically hard region
        lat1 = rng.uniform(-45.0, 45.0)
        lon1 = rng.uniform(-180.0, 180.0)
        lat2 = -lat1 + rng.uniform(-0.4, 0.4)
        lon2 = lon1 + 180.0 + rng.uniform(-0.4, 0.4)
        add("near_antipodal", lat1, lon1, lat2, lon2)
    add("near_antipodal", 0.0, 0.0, 0.5, 179.5)
    # exact poles (meridional arcs through the singular latitude)
    add("polar", 90.0, 0.0, 0.0, 0.0)
    add("polar", 90.0, 0.0, -90.0, 0.0)
    add("polar", -90.0, 37.0, 12.0, -120.0)
    while len(cases) < 120:
        add("random", rng.uniform(-85.0, 85.0), rng.uniform(-180.0, 180.0),
            rng.uniform(-85.0, 85.0), rng.uniform(-180.0, 180.0))
    return cases


def main(argv):
    out_path = argv[1] if len(argv) > 1 else "tests/data/geodesic_cases.json"
    cases = build_cases()
    with open(out_path, "w") as fh:
        json.dump({"ellipsoid": {"a": WGS84_A, "f": WGS84_F}, "cases": cases},
                  fh, indent=1)
    print(f"wrote {len(cases)} cases to {out_path}")


if __name__ == "__main__":
    main(sys.argv)
