"""Norms used by the critical-norm diagnostics.

Lebesgue, homogeneous/inhomogeneous Sobolev, Besov via Littlewood-Paley
projections, and Lorentz norms via the nonincreasing rearrangement.  The
array-level functions are dimension-agnostic (used for 2D fields and for
3D rasters of axisymmetric data); SpectralField2D wrappers sit on top.

Normalization: all norms carry the physical cell measure (h^d), so that on
compactly supported data they approximate the corresponding integrals over
R^d.  With this convention, for example, |sin(x1)|_{L2} = sqrt(2) * pi on
the box [-pi, pi)^2 and the Hdot^1 norm of the same field is pi * sqrt(2).

The Littlewood-Paley bump is fixed once: psi(r) = 1 on [0, 1], 0 on
[2, inf), and a C-infinity smoothstep glue in between (see projector_psi).
Besov values depend on this choice; it is never varied between runs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field

import numpy as np

from .spectral import SpectralField2D, gradient, riesz

__all__ = [
    "projector_psi",
    "lp_projection",
    "lp_norm",
    "sobolev_norm",
    "besov_norm",
    "lorentz_norm",
    "lorentz_norm_weighted",
    "riesz_interp_check",
    "dyadic_bands",
    "NormReport",
]


# -- the fixed projector bump -------------------------------------------------


def _smoothstep(t: np.ndarray) -> np.ndarray:
    """C-infinity monotone step: 0 at t<=0, 1 at t>=1."""
    t = np.clip(t, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        g = np.where(t > 0.0, np.exp(-1.0 / np.where(t > 0.0, t, 1.0)), 0.0)
        gc = np.where(t < 1.0, np.exp(-1.0 / np.where(t < 1.0, 1.0 - t, 1.0)), 0.0)
    return g / (g + gc)


def projector_psi(r) -> np.ndarray:
    """Radial profile of the LP bump: psi = 1 on [0,1], 0 on [2,inf), C^inf."""
    r = np.asarray(r, dtype=np.float64)
    return _smoothstep(2.0 - r)


def _band_multiplier(kabs: np.ndarray, N: float) -> np.ndarray:
    """Multiplier of P_N: psi(|k|/N) - psi(2|k|/N)."""
    return projector_psi(kabs / N) - projector_psi(2.0 * kabs / N)


def _low_multiplier(kabs: np.ndarray, N: float) -> np.ndarray:
    """Multiplier of P_{<=N}: psi(|k|/N)."""
    return projector_psi(kabs / N)


# -- array-level machinery ----------------------------------------------------


def _box_lengths(values: np.ndarray, box) -> tuple:
    d = values.ndim
    if np.isscalar(box):
        return (float(box),) * d
    if len(box) != d:
        raise ValueError("box length tuple does not match array dimension")
    return tuple(float(b) for b in box)


def _cell_measure(values: np.ndarray, box) -> float:
    Ls = _box_lengths(values, box)
    m = 1.0
    for L, n in zip(Ls, values.shape):
        m *= L / n
    return m


def _kgrids(shape: tuple, Ls: tuple):
    """Physical wavenumber component arrays for the rfftn layout."""
    axes = []
    d = len(shape)
    for ax, (n, L) in enumerate(zip(shape, Ls)):
        h = L / n
        if ax == d - 1:
            k = 2.0 * np.pi * np.fft.rfftfreq(n, d=h)
        else:
            k = 2.0 * np.pi * np.fft.fftfreq(n, d=h)
        sh = [1] * d
        sh[ax] = -1
        axes.append(k.reshape(sh))
    return axes

def _kabs(shape: tuple, Ls: tuple) -> np.ndarray:
    ks = _kgrids(shape, Ls)
    return np.sqrt(sum(k**2 for k in ks))


def _rfft_weights(shape: tuple) -> np.ndarray:
    """Half-spectrum multiplicity weights along the last (rfft) axis."""
    n_last = shape[-1]
    w = np.full(n_last // 2 + 1, 2.0)
    w[0] = 1.0
    if n_last % 2 == 0:
        w[-1] = 1.0
    sh = [1] * len(shape)
    sh[-1] = -1
    return w.reshape(sh)


def _spectrum(values: np.ndarray, Ls: tuple):
    """(coeffs/n_total, |k|, weights): normalized amplitudes of exp(ik.x)."""
    c = np.fft.rfftn(values)
    ntot = values.size
    amp2 = np.abs(c) ** 2 / ntot**2
    kabs = _kabs(values.shape, Ls)
    w = _rfft_weights(values.shape)
    return amp2, kabs, w


def lp_norm(values: np.ndarray, box, p) -> float:
    """L^p norm with physical cell measure."""
    if p == np.inf or p == "inf":
        return float(np.max(np.abs(values)))
    meas = _cell_measure(values, box)
    return float((np.sum(np.abs(values) ** p) * meas) ** (1.0 / p))


def sobolev_norm(values: np.ndarray, box, s: float, homogeneous: bool = True) -> float:
    """Sobolev norm via Plancherel: (sum |k|^{2s} |a_k|^2 vol)^(1/2).

    For homogeneous s < 0 the zero mode must vanish (it is rejected
    otherwise); for s >= 0 the zero mode carries weight |k|^{2s} = 0.
    """
    Ls = _box_lengths(values, box)
    vol = float(np.prod(Ls))
    amp2, kabs, w = _spectrum(values, Ls)
    if homogeneous:
        if s < 0:
            zero_amp = np.sqrt(amp2.flat[0])
            scale = np.sqrt(np.sum(amp2 * w) * vol)
            if zero_amp > 1e-12 * max(scale / np.sqrt(vol), 1e-300):
                raise ValueError(
                    "homogeneous Sobolev norm with s < 0 requires a mean-zero "
                    f"field (zero-mode amplitude {zero_amp:.3e})"
                )
        with np.errstate(divide="ignore"):
            mult = np.where(kabs > 0, kabs, 1.0) ** (2.0 * s)
        mult = np.where(kabs > 0, mult, 0.0)
    else:
        mult = (1.0 + kabs**2) ** s
    return float(np.sqrt(np.sum(amp2 * mult * w) * vol))


def dyadic_bands(shape: tuple, box) -> list:
    """Resolvable dyadic band centers N = 2^j for a given grid.

    The lowest band still touches the smallest nonzero wavenumber 2*pi/L;
    the highest does not exceed the Nyquist magnitude pi/h.
    """
    if np.isscalar(box):
        Ls = (float(box),) * len(shape)
    else:
        Ls = tuple(float(b) for b in box)
    kmin = min(2.0 * np.pi / L for L in Ls)
    knyq = max(np.pi * n / L for n, L in zip(shape, Ls))
    jlo = int(np.floor(np.log2(kmin / 2.0)))
    jhi = int(np.floor(np.log2(knyq)))
    return [2.0**j for j in range(jlo, jhi + 1)]


def lp_projection(values: np.ndarray, box, N: float) -> np.ndarray:
    """Littlewood-Paley projection P_N applied to a sample array.

    Raises:
        ValueError: if N exceeds the Nyquist magnitude of the grid.
    """
    Ls = _box_lengths(values, box)
    knyq = max(np.pi * n / L for n, L in zip(values.shape, Ls))
    if N > knyq:
        raise ValueError(f"band N={N} beyond Nyquist magnitude {knyq:.3g}")
    kabs = _kabs(values.shape, Ls)
    c = np.fft.rfftn(values) * _band_multiplier(kabs, N)
    return np.fft.irfftn(c, s=values.shape)


def low_projection(values: np.ndarray, box, N: float) -> np.ndarray:
    """P_{<=N} f (smooth low-pass companion of lp_projection)."""
    Ls = _box_lengths(values, box)
    kabs = _kabs(values.shape, Ls)
    c = np.fft.rfftn(values) * _low_multiplier(kabs, N)
    return np.fft.irfftn(c, s=values.shape)


def besov_norm(values: np.ndarray, box, s: float, p, q,
               bands=None, homogeneous: bool = True):
    """Homogeneous Besov (semi)norm and its dyadic band profile.

    Returns:
        (value, band_profile) where band_profile is a list of
        (N, N^s * |P_N f|_p) over the resolvable dyadic ladder.
        For q = inf the value is the max of the profile; otherwise the
        l^q sum.  With homogeneous=False, |f|_p is added to the seminorm.
    """
    if not (1 <= q) and q != np.inf:
        raise ValueError("q must lie in [1, inf]")
    if bands is None:
        bands = dyadic_bands(values.shape, box)
    profile = []
    for N in bands:
        pn = lp_projection(values, box, N)
        profile.append((N, N**s * lp_norm(pn, box, p)))
    vals = np.array([v for (_, v) in profile])
    if q == np.inf or q == "inf":
        semi = float(np.max(vals)) if len(vals) else 0.0
    else:
        semi = float(np.sum(vals**q) ** (1.0 / q))
    if not homogeneous:
        semi += lp_norm(values, box, p)
    return semi, profile


def lorentz_norm_weighted(samples: np.ndarray, weights: np.ndarray, p: float, q) -> float:
    """Lorentz L^{p,q} norm of |samples| with per-sample cell measures.

    The nonincreasing rearrangement of the data is the step function taking
    the sorted values on consecutive measure intervals; the quasi-norm
    integral of (t^{1/p} f*(t))^q dt/t is evaluated exactly on that step
    function (no interpolation).
    """
    if not (1.0 < p < np.inf):
        raise ValueError("lorentz_norm requires p in (1, inf)")
    v = np.abs(np.asarray(samples, dtype=np.float64)).ravel()
    w = np.broadcast_to(np.asarray(weights, dtype=np.float64), v.shape).ravel()
    nz = v > 0.0
    v = v[nz]
    w = w[nz]
    if v.size == 0:
        return 0.0
    order = np.argsort(v)[::-1]
    v = v[order]
    w = w[order]
    t = np.cumsum(w)
    if q == np.inf or q == "inf":
        return float(np.max(v * t ** (1.0 / p)))
    if q < 1:
        raise ValueError("q must lie in [1, inf]")
    t0 = np.concatenate(([0.0], t[:-1]))
    pieces = v**q * (p / q) * (t ** (q / p) - t0 ** (q / p))
    return float(np.sum(pieces) ** (1.0 / q))


def lorentz_norm(values: np.ndarray, box, p: float, q) -> float:
    """Lorentz norm on a uniform grid (cell measure h^d)."""
    meas = _cell_measure(values, box)
    return lorentz_norm_weighted(values.ravel(), np.full(values.size, meas), p, q)


# -- field-level wrappers -----------------------------------------------------


def field_lp(f: SpectralField2D, p) -> float:
    return lp_norm(f.values, f.grid.box_length, p)


def field_sobolev(f: SpectralField2D, s: float, homogeneous: bool = True) -> float:
    return sobolev_norm(f.values, f.grid.box_length, s, homogeneous)


def field_besov(f: SpectralField2D, s: float, p, q, homogeneous: bool = True):
    return besov_norm(f.values, f.grid.box_length, s, p, q, homogeneous=homogeneous)


def field_lorentz(f: SpectralField2D, p: float, q) -> float:
    return lorentz_norm(f.values, f.grid.box_length, p, q)


def field_lp_projection(f: SpectralField2D, N: float) -> SpectralField2D:
    return SpectralField2D(f.grid, values=lp_projection(f.values, f.grid.box_length, N))


def riesz_interp_check(f: SpectralField2D) -> float:
    """Ratio |R11 f|_inf / (|f|_2^(1/2) |grad f|_inf^(1/2)).

    The interpolation inequality bounds this ratio by an absolute constant;
    the invariant suite asserts ratio <= 10 across the generator corpus.

    Raises:
        ValueError: on the zero field (the ratio is 0/0).
    """
    l2 = f.l2()
    if l2 == 0.0:
        raise ValueError("riesz_interp_check rejects the zero field (0/0)")
    g1, g2 = gradient(f)
    grad_inf = float(np.max(np.hypot(g1.values, g2.values)))
    num = riesz(f, 1, 1).linf()
    return num / (np.sqrt(l2) * np.sqrt(grad_inf))


# -- NormReport ---------------------------------------------------------------


def _norm_key(kind: str, **kw) -> str:
    if kind == "Lp":
        return f"Lp:p={_fmt(kw['p'])}"
    if kind == "Hdot":
        return f"Hdot:s={_fmt(kw['s'])}"
    if kind == "H":
        return f"H:s={_fmt(kw['s'])}"
    if kind == "Bdot":
        return f"Bdot:s={_fmt(kw['s'])}:p={_fmt(kw['p'])}:q={_fmt(kw['q'])}"
    if kind == "Lorentz":
        return f"Lorentz:p={_fmt(kw['p'])}:q={_fmt(kw['q'])}"
    raise ValueError(f"unknown norm kind {kind}")


def _fmt(x) -> str:
    if x == np.inf or x == "inf":
        return "inf"
    xf = float(x)
    return str(int(xf)) if xf == int(xf) else repr(xf)


@dataclass
class NormReport:
    """Bundle of norms of one field at one time.

    entries maps stable descriptor keys (e.g. "Hdot:s=1",
    "Bdot:s=1.5:p=2:q=inf", "Lorentz:p=3:q=1") to values; band_profile
    holds (N, N^s |P_N f|_p) pairs for the last Besov entry computed.
    """

    time: float = 0.0
    entries: dict = dc_field(default_factory=dict)
    band_profile: list = dc_field(default_factory=list)

    def add(self, kind: str, value: float, **kw):
        self.entries[_norm_key(kind, **kw)] = float(value)

    def to_json(self) -> str:
        payload = {
            "format_version": 1,
            "time": self.time,
            "entries": self.entries,
            "band_profile": [[float(N), float(v)] for (N, v) in self.band_profile],
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "NormReport":
        d = json.loads(text)
        rep = cls(time=d["time"], entries=d["entries"],
                  band_profile=[tuple(x) for x in d["band_profile"]])
        return rep


def standard_report(f: SpectralField2D, time: float = 0.0,
                    besov=(1.0, 2, 2), lorentz=(3.0, 1)) -> NormReport:
    """Default norm bundle: L1/L2/Linf, Hdot1, one Besov, one Lorentz entry."""
    rep = NormReport(time=time)
    for p in (1, 2, np.inf):
        rep.add("Lp", field_lp(f, p), p=p)
    rep.add("Hdot", field_sobolev(f, 1.0), s=1)
    s, p, q = besov
    val, prof = field_besov(f, s, p, q)
    rep.add("Bdot", val, s=s, p=p, q=q)
    rep.band_profile = prof
    lp_, lq_ = lorentz
    rep.add("Lorentz", field_lorentz(f, lp_, lq_), p=lp_, q=lq_)
    return rep
