"""Rotationally symmetric domains and their meridian-plane discretization.

A domain is described by its meridian profile g(r): the body of revolution
{ |x_n| < g(r), r = |x'| < R } with g continuous, nonincreasing, g(R) = 0.
The half-plane (r, z) with z = x_n is discretized on a uniform grid; nodes
are classified inside/outside and cut stencil arms carry fractional
boundary distances theta in (0, 1] for Shortley-Weller stencils.

The homotopy family interpolates the profile between the ball of radius
a = g(0) (t = 0) and the target profile (t = 1):

    g_t(r) = t*g(r) + (1-t)*sqrt(a^2 - r^2)
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .errors import InvalidProfileError, ResolutionTooCoarseError

THETA_MIN = 0.1  # conditioning clamp for tiny cut fractions
_BISECT_STEPS = 45  # 2^-45 < 1e-13 relative arm tolerance


@dataclass(frozen=True)
class ProfileFunction:
    """Meridian profile g: [0, R] -> [0, a0], extended by zero beyond R."""

    kind: str
    params: tuple
    g: Callable[[np.ndarray], np.ndarray]
    R: float
    a0: float

    def __call__(self, r):
        return self.g(np.asarray(r, dtype=float))


def ball(a: float) -> ProfileFunction:
    """Profile of the ball of radius a: g(r) = sqrt(a^2 - r^2)."""
    a = float(a)
    if a <= 0:
        raise InvalidProfileError("ball radius must be positive")

    def g(r):
        return np.sqrt(np.maximum(a * a - r * r, 0.0))

    return ProfileFunction("ball", (a,), g, a, a)


def spheroid(a: float, b: float) -> ProfileFunction:
    """Spheroid with equatorial radius a and axial semi-height b."""
    a, b = float(a), float(b)
    if a <= 0 or b <= 0:
        raise InvalidProfileError("spheroid semi-axes must be positive")

    def g(r):
        return b * np.sqrt(np.maximum(1.0 - (r / a) ** 2, 0.0))

    return ProfileFunction("spheroid", (a, b), g, a, b)


def polynomial_bump(coeffs) -> ProfileFunction:
    """Profile given by a polynomial in r (ascending coefficients).

    The first positive zero defines R; the profile is clipped at zero and
    extended by zero beyond R.
    """
    coeffs = tuple(float(c) for c in coeffs)
    poly = np.polynomial.Polynomial(coeffs)
    a0 = float(poly(0.0))
    if not np.isfinite(a0) or a0 <= 0:
        raise InvalidProfileError("bump polynomial must be positive at r = 0")
    R = _first_zero_of(poly)

    def g(r):
        r = np.asarray(r, dtype=float)
        vals = np.where(r < R, poly(r), 0.0)
        return np.maximum(vals, 0.0)

    return ProfileFunction("bump", coeffs, g, R, a0)


def tabulated(knots, values) -> ProfileFunction:
    """Monotone piecewise-cubic (PCHIP) profile through (r_k, g_k) knots.

    PCHIP preserves the monotonicity of the data, so nonincreasing knots
    yield a nonincreasing profile. Non-monotone data is representable (the
    validator reports it) but still interpolated shape-preservingly.
    """
    knots = np.asarray(knots, dtype=float)
    values = np.asarray(values, dtype=float)
    if knots.ndim != 1 or knots.shape != values.shape or knots.size < 2:
        raise InvalidProfileError("tabulated profile needs matching 1-d knot/value arrays")
    if not np.all(np.diff(knots) > 0):
        raise InvalidProfileError("tabulated knots must be strictly increasing in r")
    if knots[0] != 0.0:
        raise InvalidProfileError("tabulated profile must start at r = 0")
    if not np.all(np.isfinite(values)):
        raise InvalidProfileError("tabulated profile values must be finite")
    interp = PchipInterpolator(knots, values, extrapolate=False)
    a0 = float(values[0])

    def raw(r):
        r = np.asarray(r, dtype=float)
        vals = interp(np.clip(r, knots[0], knots[-1]))
        vals = np.where(r > knots[-1], 0.0, vals)
        return vals

    R = _first_zero_of(raw, hi=float(knots[-1]))

    def g(r):
        r = np.asarray(r, dtype=float)
        return np.maximum(np.where(r < R, raw(r), 0.0), 0.0)

    return ProfileFunction("tabulated", (tuple(knots), tuple(values)), g, R, a0)


def tabulated_from_file(path) -> ProfileFunction:
    """Load a tabulated profile from a two-column ASCII file `r g`.

    Lines starting with `#` are comments.
    """
    data = np.loadtxt(path, comments="#", ndmin=2)
    if data.shape[1] != 2:
        raise InvalidProfileError(f"{path}: expected two columns `r g`")
    return tabulated(data[:, 0], data[:, 1])


def _first_zero_of(f, hi: float | None = None) -> float:
    """First positive zero of a scalar profile-like function."""
    r_hi = hi if hi is not None else 1.0
    for _ in range(40):
        rs = np.linspace(0.0, r_hi, 4097)
        vals = np.asarray(f(rs), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise InvalidProfileError("profile returned non-finite values")
        nonpos = np.nonzero(vals <= 0.0)[0]
        if nonpos.size and nonpos[0] > 0:
            k = nonpos[0]
            if vals[k] == 0.0:
                return float(rs[k])
            return float(brentq(lambda r: float(f(r)), rs[k - 1], rs[k], xtol=1e-14))
        if hi is not None:
            return r_hi
        r_hi *= 2.0
        if r_hi > 1e6:
            break
    raise InvalidProfileError("profile has no positive zero")


@dataclass(frozen=True)
class MeridianDomain:
    """A simple rotationally symmetric domain in R^n along the x_n axis."""

    n: int
    profile: ProfileFunction
    description: str = ""

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("spatial dimension must be >= 2")

    def inside(self, r, z):
        """Membership test: 0 <= r < R and |z| < g(r)."""
        r = np.asarray(r, dtype=float)
        z = np.asarray(z, dtype=float)
        return (r >= 0) & (np.abs(z) < self.profile(r))


@dataclass(frozen=True)
class HomotopyFamily:
    """Continuous deformation from the ball B_a (t=0) to the target (t=1)."""

    target: MeridianDomain
    a: float = 0.0

    def __post_init__(self):
        if self.a == 0.0:
            object.__setattr__(self, "a", self.target.profile.a0)

    def profile_at(self, r, t: float):
        """g_t(r) = t*g(r) + (1-t)*sqrt(a^2 - r^2), both parts zero-extended."""
        if not 0.0 <= t <= 1.0:
            raise ValueError("homotopy parameter t must lie in [0, 1]")
        r = np.asarray(r, dtype=float)
        cap = np.sqrt(np.maximum(self.a * self.a - r * r, 0.0))
        return t * self.target.profile(r) + (1.0 - t) * cap

    def first_zero(self, t: float) -> float:
        R = self.target.profile.R
        if t <= 0.0:
            return self.a
        if t >= 1.0:
            return R
        return max(self.a, R)

    def domain_at(self, t: float) -> MeridianDomain:
        """Materialize the intermediate domain Omega_t as a MeridianDomain."""
        R_t = self.first_zero(t)
        a0_t = float(self.profile_at(0.0, t))
        prof = ProfileFunction(
            "homotopy", (self.target.profile.kind, t),
            lambda r, _t=t: self.profile_at(r, _t), R_t, a0_t)
        return MeridianDomain(self.target.n, prof, f"homotopy t={t:g}")


def profile_at_t(h: HomotopyFamily, r, t: float):
    """Module-level alias for the interpolated profile evaluation."""
    return h.profile_at(r, t)


@dataclass(frozen=True)
class MeridianGrid:
    """Uniform embedded-boundary grid on [0, rmax] x [-zmax, zmax].

    Arrays are indexed [j, i] with j the z index (ascending) and i the
    r index. `theta_*` hold the fractional arm lengths toward E(+r),
    W(-r), N(+z), S(-z); they are 1.0 on full arms and in [THETA_MIN, 1]
    where the arm crosses the boundary. Mirror symmetry in z is exact by
    construction. x_n stays on the vertical axis of the plot plane: the
    node (i=0, j=mid) is the origin o.
    """

    nr: int
    nz: int
    rs: np.ndarray
    zs: np.ndarray
    hr: float
    hz: float
    inside: np.ndarray            # bool (nz, nr)
    interior: np.ndarray          # inside, all four arms full
    boundary_adjacent: np.ndarray  # inside, at least one cut arm
    theta_e: np.ndarray
    theta_w: np.ndarray
    theta_n: np.ndarray
    theta_s: np.ndarray
    rmax: float
    zmax: float
    t: float
    g: Callable = field(repr=False, default=None)
    j_equator: int = 0

    @property
    def origin_index(self):
        return (self.j_equator, 0)

    def node_count_inside(self) -> int:
        return int(np.count_nonzero(self.inside))

    def mirror_j(self, j):
        return self.nz - 1 - j


def _symmetric_axis(zmax: float, nz: int) -> np.ndarray:
    """z coordinates with exact bitwise mirror symmetry about z = 0."""
    half = (nz + 1) // 2
    zpos = np.linspace(0.0, zmax, half)
    return np.concatenate([-zpos[:0:-1], zpos])


def build_grid(d, nr: int, nz: int, *, t: float | None = None,
               rmax: float | None = None, zmax: float | None = None) -> MeridianGrid:
    """Classify nodes and compute cut-arm fractions for a domain.

    `d` is a MeridianDomain, or a HomotopyFamily with the parameter `t`.
    Explicit rmax/zmax let a fixed bounding box cover a whole homotopy run.
    """
    if nr < 9 or nz < 9:
        raise ValueError("nr and nz must be at least 9")
    if nz % 2 == 0:
        raise ValueError("nz must be odd so the equator z = 0 is a grid line")

    if isinstance(d, HomotopyFamily):
        if t is None:
            raise ValueError("build_grid on a HomotopyFamily requires t")
        g = lambda r: d.profile_at(r, t)
        R_t = d.first_zero(t)
        t_val = float(t)
    else:
        g = d.profile
        R_t = d.profile.R
        t_val = 1.0 if t is None else float(t)

    g0 = float(g(np.array(0.0)))
    if not np.isfinite(g0) or g0 <= 0:
        raise InvalidProfileError("profile must be positive at r = 0")
    rmax = float(rmax) if rmax is not None else R_t
    zmax = float(zmax) if zmax is not None else g0

    rs = np.linspace(0.0, rmax, nr)
    zs = _symmetric_axis(zmax, nz)
    hr = rs[1] - rs[0]
    hz = zs[(nz + 1) // 2] - zs[(nz - 1) // 2]

    if 2.0 * g0 < 3.0 * hz or R_t < 3.0 * hr:
        raise ResolutionTooCoarseError(
            f"domain core ({2 * g0:.3g} x {R_t:.3g}) thinner than 3 cells at "
            f"spacing ({hz:.3g}, {hr:.3g})")

    gvals = np.asarray(g(rs), dtype=float)
    if not np.all(np.isfinite(gvals)):
        raise InvalidProfileError("profile returned non-finite values on the grid")

    # Classify the upper half (z >= 0) and mirror; |zs| is bitwise even.
    inside = np.abs(zs)[:, None] < gvals[None, :]

    theta_e = np.ones_like(inside, dtype=float)
    theta_w = np.ones_like(theta_e)
    theta_n = np.ones_like(theta_e)
    theta_s = np.ones_like(theta_e)

    def inside_pt(r, z):
        return np.abs(z) < np.asarray(g(np.maximum(r, 0.0)), dtype=float)

    jmid = (nz - 1) // 2
    Z, Rc = np.meshgrid(zs, rs, indexing="ij")

    def cut_fraction(target, mask, dr, dz):
        """Bisect the inside/outside transition along one arm direction."""
        jj, ii = np.nonzero(mask)
        if jj.size == 0:
            return
        r0, z0 = Rc[jj, ii], Z[jj, ii]
        lo = np.zeros(jj.size)
        hi = np.ones(jj.size)
        for _ in range(_BISECT_STEPS):
            mid = 0.5 * (lo + hi)
            ok = inside_pt(r0 + mid * dr, z0 + mid * dz)
            lo = np.where(ok, mid, lo)
            hi = np.where(ok, hi, mid)
        target[jj, ii] = np.clip(0.5 * (lo + hi), THETA_MIN, 1.0)

    upper = np.zeros_like(inside)
    upper[jmid:, :] = inside[jmid:, :]

    # East arms: neighbor outside the domain or off the grid edge.
    nbr_in = np.zeros_like(inside)
    nbr_in[:, :-1] = inside[:, 1:]
    cut_fraction(theta_e, upper & ~nbr_in, hr, 0.0)

    # West arms (not at the axis column, where even reflection applies).
    nbr_in = np.zeros_like(inside)
    nbr_in[:, 1:] = inside[:, :-1]
    mask = upper & ~nbr_in
    mask[:, 0] = False
    cut_fraction(theta_w, mask, -hr, 0.0)

    # North arms.
    nbr_in = np.zeros_like(inside)
    nbr_in[:-1, :] = inside[1:, :]
    cut_fraction(theta_n, upper & ~nbr_in, 0.0, hz)

    # South arms.
    nbr_in = np.zeros_like(inside)
    nbr_in[1:, :] = inside[:-1, :]
    cut_fraction(theta_s, upper & ~nbr_in, 0.0, -hz)

    # Mirror the upper half onto the lower half: N and S swap.
    theta_e[:jmid, :] = theta_e[nz - 1:jmid:-1, :]
    theta_w[:jmid, :] = theta_w[nz - 1:jmid:-1, :]
    theta_n[:jmid, :] = theta_s[nz - 1:jmid:-1, :]
    theta_s[:jmid, :] = theta_n[nz - 1:jmid:-1, :]

    cut_any = ((theta_e < 1.0) | (theta_w < 1.0) | (theta_n < 1.0) | (theta_s < 1.0))
    # Arms toward off-grid or outside neighbors that were classified with
    # theta = 1 (boundary exactly on the neighbor node) still make the node
    # boundary-adjacent for bookkeeping purposes.
    e_in = np.zeros_like(inside); e_in[:, :-1] = inside[:, 1:]
    w_in = np.zeros_like(inside); w_in[:, 1:] = inside[:, :-1]
    w_in[:, 0] = True  # axis reflection arm counts as full
    n_in = np.zeros_like(inside); n_in[:-1, :] = inside[1:, :]
    s_in = np.zeros_like(inside); s_in[1:, :] = inside[:-1, :]
    open_arm = ~(e_in & w_in & n_in & s_in)

    boundary_adjacent = inside & (cut_any | open_arm)
    interior = inside & ~boundary_adjacent

    return MeridianGrid(
        nr=nr, nz=nz, rs=rs, zs=zs, hr=float(hr), hz=float(hz),
        inside=inside, interior=interior, boundary_adjacent=boundary_adjacent,
        theta_e=theta_e, theta_w=theta_w, theta_n=theta_n, theta_s=theta_s,
        rmax=rmax, zmax=zmax, t=t_val, g=g, j_equator=jmid)


@dataclass
class ValidationReport:
    """Outcome of the simple-domain checks, one line per condition."""

    checks: list  # of (name, passed, detail)
    flags: list   # advisory notes, e.g. "domain nonconvex"

    @property
    def passed(self) -> bool:
        return all(ok for _, ok, _ in self.checks)

    def __str__(self):
        lines = [f"[{'pass' if ok else 'FAIL'}] {name}: {detail}"
                 for name, ok, detail in self.checks]
        lines += [f"[note] {f}" for f in self.flags]
        return "\n".join(lines)


def validate_simple_domain(d: MeridianDomain, samples: int = 513) -> ValidationReport:
    """Check the defining properties of a simple rotationally symmetric domain.

    Positivity on [0, R), vanishing at R, and sampled monotonicity of the
    profile. Monotone g implies convexity along every coordinate axis, and
    the profile parameterization is even in x_n by construction; both facts
    are recorded as structural checks. A non-concave profile is flagged
    (the domain is then nonconvex) but is not a failure.
    """
    prof = d.profile
    R, a0 = prof.R, prof.a0
    rs = np.linspace(0.0, R, samples)
    vals = np.asarray(prof(rs), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise InvalidProfileError("profile returned non-finite values")

    eps = 1e-12 * max(a0, 1.0)
    checks = []
    checks.append(("g positive on [0, R)",
                   bool(np.all(vals[:-1] > 0.0)),
                   f"min over samples {vals[:-1].min():.3g}"))
    gR = float(prof(np.array(R)))
    checks.append(("g(R) = 0", abs(gR) <= eps, f"g({R:g}) = {gR:.3g}"))
    diffs = np.diff(vals)
    checks.append(("g nonincreasing",
                   bool(np.all(diffs <= eps)),
                   f"max sampled increase {diffs.max():.3g}"))
    checks.append(("even in x_n", True, "structural: |x_n| < g(r) parameterization"))
    checks.append(("x_i-convex for every axis", bool(np.all(diffs <= eps)),
                   "monotone profile makes every axis-parallel chord interior"))

    flags = []
    dd = vals[2:] - 2.0 * vals[1:-1] + vals[:-2]
    if np.any(dd > 1e-10 * max(a0, 1.0)):
        flags.append("domain nonconvex: profile is not concave")
    return ValidationReport(checks, flags)
