"""Initial-data generators: multi-scale odd bump ladders and perturbations.

Every family is built from a single radial mollifier placed at reflected
centers.  The 2D ladder stacks the four-bump tile eta_0 at dyadic scales
2^-k; the scale range and the normalizing prefactor depend on the family:

    hA_2d:            k in [A, 2A],          prefactor c(A)/A
    gA_2d_compact:    k in [A, A + ln A],    prefactor 1/(llll(A) sqrt(ln A))
    gA_3d:            k in [A, 2A],          prefactor sqrt(ln A)/A
    tilde_gA_3d:      k in [A, A + sqrt(A)], prefactor sqrt(ln A)/sqrt(A)
    besov_seed:       k in (A, A + ln A),    prefactor (ln A)^eps1 / ln A

with eps1 = (1 - 1/q)/2.  "paper" prefactor mode uses the iterated-log
formulas literally (rejected when non-positive); "lab" mode substitutes an
explicit constant c > 0 so that desk-scale A remains non-degenerate.  The
normalization c(A) of the hA family is exposed as a configuration choice
(sqrt_log or log) rather than fixed.

All generators are exact analytic callables sampled onto grids; supports of
distinct shells are pairwise disjoint by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .spectral import GridSpec2D, SpectralField2D

__all__ = [
    "BumpProfile",
    "SeedSpec",
    "PatchLayout",
    "ResolutionError",
    "PrefactorError",
    "mollifier_profile",
    "plateau_profile",
    "make_eta0",
    "make_scale_family",
    "make_perturbation_beta",
    "make_layout",
    "make_reflected_gaussian",
    "eta0_callable",
    "family_callable",
    "family_shells",
    "family_prefactor",
    "geometric_centers",
]

FAMILIES_2D = ("eta0", "eta_k", "hA_2d", "gA_2d_compact", "besov_seed",
               "custom_reflected_gaussian")
FAMILIES_AXI = ("gA_3d", "tilde_gA_3d")


class ResolutionError(ValueError):
    """A requested bump scale is not resolvable on the given grid."""

    def __init__(self, radius: float, h: float, box_length: float, cells: float = 8.0):
        self.required_n = int(2 ** math.ceil(math.log2(cells * box_length / radius)))
        super().__init__(
            f"bump radius {radius:.3e} spans {radius / h:.2f} cells < {cells:g}; "
            f"need n >= {self.required_n} at this box length"
        )


class PrefactorError(ValueError):
    """Paper-mode prefactor is non-positive or undefined at this A."""


# -- radial profiles ----------------------------------------------------------


def mollifier_profile(rho) -> np.ndarray:
    """The standard C^infinity mollifier exp(1 - 1/(1 - rho^2)) on rho < 1."""
    rho = np.asarray(rho, dtype=np.float64)
    inside = rho < 1.0
    out = np.zeros_like(rho)
    r2 = np.where(inside, rho, 0.0) ** 2
    with np.errstate(divide="ignore"):
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - r2[inside]))
    return out


def _smoothstep(t: np.ndarray) -> np.ndarray:
    t = np.clip(t, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        g = np.where(t > 0.0, np.exp(-1.0 / np.where(t > 0.0, t, 1.0)), 0.0)
        gc = np.where(t < 1.0, np.exp(-1.0 / np.where(t < 1.0, 1.0 - t, 1.0)), 0.0)
    return g / (g + gc)


def plateau_profile(rho) -> np.ndarray:
    """Perturbation bump: 1 on rho <= 1, 0 on rho >= 2, C^infinity glue."""
    rho = np.asarray(rho, dtype=np.float64)
    return _smoothstep(2.0 - rho)


@dataclass(frozen=True)
class BumpProfile:
    """Radial bump used by the seed generators.

    kind 'standard_mollifier' is exp(1 - 1/(1-|x/r|^2)); it is C^infinity,
    radial, supported in the closed ball of the given radius, with maximum
    equal to `amplitude` at the center.
    """

    kind: str = "standard_mollifier"
    radius: float = 0.125
    amplitude: float = 1.0

    def __post_init__(self):
        if self.kind != "standard_mollifier":
            raise ValueError(f"unknown profile kind {self.kind}")
        if not (self.radius > 0 and self.amplitude > 0):
            raise ValueError("radius and amplitude must be positive")

    def __call__(self, x1, x2, center=(0.0, 0.0)) -> np.ndarray:
        rho = np.hypot(x1 - center[0], x2 - center[1]) / self.radius
        return self.amplitude * mollifier_profile(rho)

    def l1(self) -> float:
        """Closed-form-quality |phi|_1 via radial quadrature."""
        from scipy.integrate import quad
        val, _ = quad(lambda r: 2 * np.pi * r * mollifier_profile(r), 0.0, 1.0)
        return self.amplitude * self.radius**2 * val


# -- eta_0 and the dyadic ladder ----------------------------------------------


def eta0_callable(profile: BumpProfile):
    """eta_0(x) = sum over a1,a2 = +-1 of a1 a2 phi((x - (a1,a2)) / r).

    Odd in x1 and in x2; the four bumps are pairwise disjoint whenever
    profile.radius < 1.
    """

    def fn(x1, x2):
        out = np.zeros(np.broadcast(x1, x2).shape)
        for a1 in (-1.0, 1.0):
            for a2 in (-1.0, 1.0):
                out += a1 * a2 * profile(x1, x2, center=(a1, a2))
        return out

    return fn


def eta_k_callable(k: int, sep_exp: float, amplitude: float = 1.0):
    """eta_k(x) = eta_0(2^k x) with bump radius 2^-(k+sep_exp)."""
    prof = BumpProfile(radius=2.0**-sep_exp, amplitude=amplitude)
    base = eta0_callable(prof)
    s = 2.0**k

    def fn(x1, x2):
        return base(s * x1, s * x2)

    return fn


def make_eta0(grid: GridSpec2D, profile: BumpProfile | None = None) -> SpectralField2D:
    """Sample eta_0 on the grid; rejects unresolvable radii (< 8 cells)."""
    profile = profile or BumpProfile()
    if profile.radius < 8.0 * grid.h:
        raise ResolutionError(profile.radius, grid.h, grid.box_length)
    return SpectralField2D.from_function(grid, eta0_callable(profile))


# -- seed specifications -------------------------------------------------------


@dataclass(frozen=True)
class SeedSpec:
    """Parameters of one seed family instance.

    prefactor_mode 'paper' evaluates the literal iterated-log prefactor
    (rejecting A below the validity threshold); 'lab' uses the explicit
    constant lab_c.  sep_exp controls the bump radius 2^-(k+sep_exp)
    (10 in the paper, 3 by default at desk scale).  hA_normalization picks
    the reading of the ambiguous hA prefactor c(A)/A.
    """

    family: str
    A: float = 1.0
    prefactor_mode: str = "lab"
    lab_c: float = 1.0
    sep_exp: float = 3.0
    k: int | None = None          # for family 'eta_k'
    q: float = 2.0                # Besov aggregation index for besov_seed
    hA_normalization: str = "sqrt_log"
    gaussian_scale: float = 1.0   # for custom_reflected_gaussian
    amplitude: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES_2D + FAMILIES_AXI:
            raise ValueError(f"unknown family {self.family}")
        if self.prefactor_mode not in ("paper", "lab"):
            raise ValueError("prefactor_mode must be 'paper' or 'lab'")
        if self.prefactor_mode == "lab" and not self.lab_c > 0:
            raise ValueError("lab prefactor constant must be positive")

    def to_dict(self) -> dict:
        d = {
            "family": self.family, "A": self.A,
            "prefactor_mode": self.prefactor_mode, "lab_c": self.lab_c,
            "sep_exp": self.sep_exp, "q": self.q,
            "hA_normalization": self.hA_normalization,
            "amplitude": self.amplitude,
        }
        if self.k is not None:
            d["k"] = self.k
        if self.family == "custom_reflected_gaussian":
            d["gaussian_scale"] = self.gaussian_scale
        return d


def eps1(q: float) -> float:
    """The Besov interpolation exponent eps1 = (1 - 1/q)/2."""
    if q == np.inf or q == "inf":
        return 0.5
    return 0.5 * (1.0 - 1.0 / q)


def family_shells(spec: SeedSpec) -> list:
    """Integer shell indices k of the family's dyadic range."""
    A = spec.A
    fam = spec.family
    if fam == "eta0":
        return [0]
    if fam == "eta_k":
        if spec.k is None:
            raise ValueError("family eta_k needs the index k")
        return [spec.k]
    if fam in ("hA_2d", "gA_3d"):
        lo, hi = A, 2 * A
    elif fam == "gA_2d_compact":
        lo, hi = A, A + math.log(A)
    elif fam == "tilde_gA_3d":
        lo, hi = A, A + math.sqrt(A)
    elif fam == "besov_seed":
        ks = [k for k in range(math.floor(A) + 1, math.ceil(A + math.log(A)))
              if A < k < A + math.log(A)]
        if not ks:
            raise PrefactorError(
                f"besov_seed range (A, A + ln A) contains no integer at A={A}")
        return ks
    elif fam == "custom_reflected_gaussian":
        return []
    else:
        raise ValueError(fam)
    return [k for k in range(math.ceil(lo), math.floor(hi) + 1)]


def family_prefactor(spec: SeedSpec) -> float:
    """Normalizing prefactor, mode-aware; paper mode validates positivity."""
    if spec.prefactor_mode == "lab":
        return spec.lab_c
    A = spec.A
    fam = spec.family
    try:
        if fam in ("eta0", "eta_k", "custom_reflected_gaussian"):
            return 1.0
        if fam == "hA_2d":
            c = math.sqrt(math.log(A)) if spec.hA_normalization == "sqrt_log" \
                else math.log(A)
            return c / A
        if fam == "gA_2d_compact":
            llll = math.log(math.log(math.log(math.log(A))))
            val = 1.0 / (llll * math.sqrt(math.log(A)))
        elif fam == "gA_3d":
            val = math.sqrt(math.log(A)) / A
        elif fam == "tilde_gA_3d":
            val = math.sqrt(math.log(A)) / math.sqrt(A)
        elif fam == "besov_seed":
            val = math.log(A) ** eps1(spec.q) / math.log(A)
        else:
            raise ValueError(fam)
    except ValueError as exc:  # math domain error in the log chain
        raise PrefactorError(
            f"paper prefactor of {fam} undefined at A={A}: {exc}; "
            f"increase A above the validity threshold or use lab mode"
        ) from None
    if not (val > 0 and math.isfinite(val)):
        raise PrefactorError(
            f"paper prefactor of {fam} non-positive at A={A} (value {val}); "
            f"increase A above the validity threshold or use lab mode")
    return val


def family_callable(spec: SeedSpec):
    """Analytic (x1, x2) -> values callable for a 2D family."""
    if spec.family not in FAMILIES_2D:
        raise ValueError(f"{spec.family} is an axisymmetric family")
    if spec.family == "custom_reflected_gaussian":
        s = spec.gaussian_scale
        amp = spec.amplitude

        def fn(x1, x2):
            return amp * (x1 / s) * (x2 / s) * np.exp(-(x1**2 + x2**2) / s**2)

        return fn
    pref = family_prefactor(spec) * spec.amplitude
    shells = family_shells(spec)
    parts = [eta_k_callable(k, spec.sep_exp) for k in shells]

    def fn(x1, x2):
        out = np.zeros(np.broadcast(x1, x2).shape)
        for part in parts:
            out += part(x1, x2)
        return pref * out

    return fn


def min_shell_radius(spec: SeedSpec) -> float:
    shells = family_shells(spec)
    if not shells:
        return spec.gaussian_scale
    return 2.0 ** -(max(shells) + spec.sep_exp)


def support_radius(spec: SeedSpec) -> float:
    """Radius of the ball (around 0) containing the family's support."""
    shells = family_shells(spec)
    if not shells:
        return 6.0 * spec.gaussian_scale  # |g| < 1e-14 * peak beyond 6 sigma
    kmin = min(shells)
    return 2.0**-kmin * math.sqrt(2.0) + 2.0 ** -(kmin + spec.sep_exp)


def make_scale_family(grid, spec: SeedSpec):
    """Sample a seed family on a grid.

    2D families require a GridSpec2D and return a SpectralField2D; the
    axisymmetric families (gA_3d, tilde_gA_3d) accept an AxiGrid and return
    the scalar omega^theta samples on its (r, z) mesh.

    Raises:
        ResolutionError: when the smallest bump radius spans < 8 cells.
        PrefactorError: paper-mode prefactor invalid at this A.
    """
    if spec.family in FAMILIES_AXI:
        return _make_axi_family(grid, spec)
    if not isinstance(grid, GridSpec2D):
        raise TypeError("2D families need a GridSpec2D")
    rmin = min_shell_radius(spec)
    if spec.family != "custom_reflected_gaussian" and rmin < 8.0 * grid.h:
        raise ResolutionError(rmin, grid.h, grid.box_length)
    return SpectralField2D.from_function(grid, family_callable(spec))


# -- axisymmetric ladder -------------------------------------------------------


def axi_eta_k_callable(k: int, sep_exp: float):
    """Axisymmetric shell: two opposite-sign bumps at (r, z) = (2^-k, +-2^-k).

    Odd in z; supported away from the axis r = 0.
    """
    radius = 2.0 ** -(k + sep_exp)
    center_r = 2.0**-k

    def fn(r, z):
        out = np.zeros(np.broadcast(r, z).shape)
        for e1 in (-1.0, 1.0):
            rho = np.hypot(r - center_r, z - e1 * center_r) / radius
            out += e1 * mollifier_profile(rho)
        return out

    return fn


def axi_family_callable(spec: SeedSpec):
    if spec.family not in FAMILIES_AXI:
        raise ValueError(f"{spec.family} is not an axisymmetric family")
    pref = family_prefactor(spec) * spec.amplitude
    parts = [axi_eta_k_callable(k, spec.sep_exp) for k in family_shells(spec)]

    def fn(r, z):
        out = np.zeros(np.broadcast(r, z).shape)
        for part in parts:
            out += part(r, z)
        return pref * out

    return fn


def _make_axi_family(axigrid, spec: SeedSpec) -> np.ndarray:
    rmin = min_shell_radius(spec)
    h = max(axigrid.h_r, axigrid.h_z)
    if rmin < 8.0 * h:
        raise ResolutionError(rmin, h, axigrid.r_max)
    rr, zz = axigrid.meshgrid()
    return axi_family_callable(spec)(rr, zz)


# -- reflected Gaussian (deformation-growth family) ----------------------------


def make_reflected_gaussian(grid: GridSpec2D, scale: float = 1.0,
                            amplitude: float = 1.0) -> SpectralField2D:
    """g(x) = amp * (x1 x2 / s^2) exp(-|x|^2/s^2): odd-odd, B = amp * pi/8.

    The odd-data functional B = integral of g * x1 x2 / |x|^4 is
    scale-invariant; only the amplitude moves it.
    """
    spec = SeedSpec(family="custom_reflected_gaussian",
                    gaussian_scale=scale, amplitude=amplitude)
    return make_scale_family(grid, spec)


# -- perturbations -------------------------------------------------------------


def perturbation_envelope(x_star, delta: float):
    """The even bump sum b(x): reflected plateau bumps of width delta.

    b(x) = (1/delta) * sum over distinct reflections (+-x1*, +-x2*) of
    Phi0((x - center)/delta), with Phi0 the plateau profile (=1 on |x| <=
    delta, 0 beyond 2*delta).  Even in x1 and x2 for every x_star.
    """
    a, c = float(x_star[0]), float(x_star[1])
    centers = {(s1 * a, s2 * c) for s1 in (-1.0, 1.0) for s2 in (-1.0, 1.0)}

    def fn(x1, x2):
        out = np.zeros(np.broadcast(x1, x2).shape)
        for (ca, cc) in centers:
            rho = np.hypot(x1 - ca, x2 - cc) / delta
            out += plateau_profile(rho)
        return out / delta

    return fn, sorted(centers)


def make_perturbation_beta(grid: GridSpec2D, k: float, M: float, x_star,
                           delta: float, variant: str = "prop",
                           orientation: int = 1) -> SpectralField2D:
    """The norm-inflation perturbation.

    variant 'prop' (the generic recipe):
        beta(x) = (1/(10 k)) sin(k x_d) b(x) M^(-1/2),
    with d = `orientation` the oscillation direction; variant 'odd'
    (the compact-support recipe, odd in both variables):
        beta(x) = (1/k) sin(k x1) sin(x2) b(x) M^(-1/2).

    Preconditions (violations raise ValueError/ResolutionError):
        - k lies inside the dealias band and k L / (2 pi) is an integer
          (sin(k x) must be box-periodic);
        - delta spans >= 8 cells and 4*delta <= min nonzero |x_star_i|
          so the reflected bumps stay disjoint;
        - for the 'odd' variant, L is a multiple of 2 pi (sin(x2) must
          be periodic).
    """
    kmax = grid.dealias_band * 2.0 * np.pi / grid.box_length
    if k > kmax:
        raise ValueError(f"k={k} beyond the dealias band (max {kmax:.6g})")
    m_int = k * grid.box_length / (2.0 * np.pi)
    if abs(m_int - round(m_int)) > 1e-9:
        raise ValueError(f"k={k} is not periodic on a box of length {grid.box_length}")
    if delta < 8.0 * grid.h:
        raise ResolutionError(delta, grid.h, grid.box_length)
    min_nz = min((abs(c) for c in x_star if abs(c) > 0), default=np.inf)
    if 4.0 * delta > min_nz:
        raise ValueError(
            f"delta={delta} too large for x_star={tuple(x_star)}: reflected "
            f"bumps would overlap (need 4*delta <= {min_nz:.3g})")
    if orientation not in (1, 2):
        raise ValueError("orientation must be 1 or 2")
    b_fn, _ = perturbation_envelope(x_star, delta)
    if variant == "prop":
        def fn(x1, x2):
            xd = x1 if orientation == 1 else x2
            return np.sin(k * xd) * b_fn(x1, x2) / (10.0 * k * np.sqrt(M))
    elif variant == "odd":
        ratio = grid.box_length / (2.0 * np.pi)
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("'odd' variant needs a box length multiple of 2 pi")
        def fn(x1, x2):
            return np.sin(k * x1) * np.sin(x2) * b_fn(x1, x2) / (k * np.sqrt(M))
    else:
        raise ValueError(f"unknown beta variant {variant}")
    return SpectralField2D.from_function(grid, fn)


# -- patch layouts -------------------------------------------------------------


def geometric_centers(count: int) -> list:
    """Patch centers z_0 = (-2,0), z_1 = (0,0), z_j = (sum_{i<j} 100/2^i, 0).

    Consecutive gaps are |z_{j+1} - z_j| = 100 / 2^j for j >= 1.
    """
    out = [(-2.0, 0.0), (0.0, 0.0)]
    acc = 0.0
    for j in range(2, count):
        acc = sum(100.0 / 2.0**i for i in range(1, j))
        out.append((acc, 0.0))
    return out[:count]


@dataclass
class PatchLayout:
    """Finite collection of translated seed patches.

    patches: list of (SeedSpec, center, amplitude) triples.
    separation_rule: 'explicit_centers' trusts the given centers;
    ('min_distance', R) additionally rejects layouts whose minimum
    pairwise support distance falls below R.
    """

    patches: list
    separation_rule: tuple | str = "explicit_centers"

    def support_radii(self) -> list:
        return [support_radius(spec) * 1.0 for (spec, _, _) in self.patches]


def make_layout(grid: GridSpec2D, layout: PatchLayout):
    """Sum of translated patches plus a separation/budget report.

    Returns:
        (field, report) with report keys: min_support_distance,
        l1_budget, linf_budget, centers.

    Raises:
        ValueError: overlapping supports, or a patch leaving the box.
    """
    x1, x2 = grid.meshgrid()
    total = np.zeros_like(x1)
    radii = layout.support_radii()
    centers = [np.asarray(c, dtype=float) for (_, c, _) in layout.patches]
    half = grid.box_length / 2.0
    for (spec, center, amp), rad in zip(layout.patches, radii):
        c = np.asarray(center, dtype=float)
        if np.any(np.abs(c) + rad > half):
            raise ValueError(
                f"patch at {tuple(c)} with support radius {rad:.3g} "
                f"overflows the box [-{half:g}, {half:g})^2")
        fn = family_callable(spec)
        total += amp * fn(x1 - c[0], x2 - c[1])
    min_dist = np.inf
    for i in range(len(centers)):
        for j in range(i + 1, len(centers)):
            d = float(np.hypot(*(centers[i] - centers[j]))) - radii[i] - radii[j]
            min_dist = min(min_dist, d)
    if min_dist < 0:
        raise ValueError(f"patch supports overlap (min distance {min_dist:.3g})")
    if isinstance(layout.separation_rule, tuple) and \
            layout.separation_rule[0] == "min_distance":
        if min_dist < layout.separation_rule[1]:
            raise ValueError(
                f"minimum support distance {min_dist:.3g} below the declared "
                f"rule {layout.separation_rule[1]:g}")
    field = SpectralField2D(grid, values=total)
    report = {
        "min_support_distance": float(min_dist),
        "l1_budget": field.l1(),
        "linf_budget": field.linf(),
        "centers": [tuple(map(float, c)) for c in centers],
    }
    return field, report
