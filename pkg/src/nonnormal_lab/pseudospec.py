"""Pseudospectral stability diagnostics.

The resolvent field is stored through ``sigma_min(z I - J)``: the
epsilon-pseudospectrum is its sublevel set ``{z : sigma_min(z I - J) < eps}``,
equivalently ``{z : ||(z I - J)^{-1}|| > 1/eps}``. Everything downstream
(pseudospectral radius, Kreiss constant, degeneracy scaling) is built from
pointwise evaluations of that field, which keeps every search step a pure
function of (J, z).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linalg import EigenDecomposition, as_square_matrix, operator_norm_2

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class DivergingSupremumError(RuntimeError):
    """The Kreiss supremum diverges because the spectral radius is >= 1."""


class GridDomainError(ValueError):
    """The requested grid cannot resolve the target set."""


class BracketError(RuntimeError):
    """A 1-d boundary bracket could not be established."""


@dataclass(frozen=True)
class GridSpec:
    """Rectangular complex-plane sampling grid."""

    re_min: float
    re_max: float
    im_min: float
    im_max: float
    n_re: int
    n_im: int

    def __post_init__(self):
        if self.n_re < 2 or self.n_im < 2:
            raise ValueError("grid resolution must be at least 2 per axis")
        if not (self.re_min < self.re_max and self.im_min < self.im_max):
            raise ValueError("grid ranges must be non-empty intervals")

    def re_values(self) -> np.ndarray:
        return np.linspace(self.re_min, self.re_max, self.n_re)

    def im_values(self) -> np.ndarray:
        return np.linspace(self.im_min, self.im_max, self.n_im)

    def spacing(self) -> tuple[float, float]:
        return (
            (self.re_max - self.re_min) / (self.n_re - 1),
            (self.im_max - self.im_min) / (self.n_im - 1),
        )


@dataclass(frozen=True)
class PseudospectrumGrid:
    """``sigma_min(z I - J)`` sampled on a grid.

    ``values[i, j]`` belongs to ``z = re_values()[j] + 1j * im_values()[i]``.
    """

    spec: GridSpec
    values: np.ndarray


def _resolvent_sigma_grid(J: np.ndarray, zs: np.ndarray) -> np.ndarray:
    """sigma_min(z I - J) for a flat array of shift points, batched."""
    n = J.shape[0]
    eye = np.eye(n, dtype=np.complex128)
    out = np.empty(zs.size)
    # keep the stacked (chunk, n, n) workspace around ~32 MiB
    chunk = max(1, int(2_000_000 // (n * n)))
    for k in range(0, zs.size, chunk):
        zz = zs[k : k + chunk]
        shifted = zz[:, None, None] * eye - J
        out[k : k + chunk] = np.linalg.svd(shifted, compute_uv=False)[:, -1]
    return out


def sigma_min_at(J, z: complex) -> float:
    """Pointwise resolvent field, ``sigma_min(z I - J)``."""
    J = as_square_matrix(J, "J").astype(np.complex128, copy=False)
    return float(_resolvent_sigma_grid(J, np.array([complex(z)]))[0])


def _check_far_field(J: np.ndarray, spec: GridSpec, values: np.ndarray) -> None:
    # Weyl bound sanity: | sigma_min(zI - J) - |z| | <= ||J||_2, checked at
    # corners far outside the spectrum. A violation means a broken kernel.
    s = operator_norm_2(J)
    re = spec.re_values()
    im = spec.im_values()
    for i, j in ((0, 0), (0, spec.n_re - 1), (spec.n_im - 1, 0), (spec.n_im - 1, spec.n_re - 1)):
        z = abs(re[j] + 1j * im[i])
        if z >= 2.0 * s and abs(values[i, j] - z) > s * (1.0 + 1e-9) + 1e-12:
            raise RuntimeError("far-field sanity band violated at a grid corner")


def pseudospectrum(J, re_range, im_range, resolution) -> PseudospectrumGrid:
    """Evaluate ``sigma_min(z I - J)`` over a rectangular grid.

    ``resolution`` is a per-axis count or a ``(n_re, n_im)`` pair. The
    result is deterministic in (J, ranges, resolution).
    """
    J = as_square_matrix(J, "J").astype(np.complex128, copy=False)
    if np.isscalar(resolution):
        n_re = n_im = int(resolution)
    else:
        n_re, n_im = (int(r) for r in resolution)
    spec = GridSpec(float(re_range[0]), float(re_range[1]), float(im_range[0]), float(im_range[1]), n_re, n_im)
    zs = (spec.re_values()[None, :] + 1j * spec.im_values()[:, None]).ravel()
    values = _resolvent_sigma_grid(J, zs).reshape(spec.n_im, spec.n_re)
    _check_far_field(J, spec, values)
    return PseudospectrumGrid(spec, values)


def write_grid_csv(grid: PseudospectrumGrid, path, comments=()) -> None:
    """CSV export: header ``re,im,sigma_min``, one row per node, re fastest."""
    re = grid.spec.re_values()
    im = grid.spec.im_values()
    with open(path, "w", newline="") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        fh.write("re,im,sigma_min\n")
        for i in range(grid.spec.n_im):
            for j in range(grid.spec.n_re):
                fh.write(f"{float(re[j])!r},{float(im[i])!r},{float(grid.values[i, j])!r}\n")


def pseudospectral_radius(J, epsilon: float, grid_spec: GridSpec) -> float:
    """Max ``|z|`` over grid nodes inside the epsilon sublevel set.

    The estimate carries half a grid diagonal of spacing uncertainty.
    Raises :class:`GridDomainError` when the sublevel set touches the grid
    edge (domain too small to contain its boundary) or when no node falls
    inside it (grid too coarse).
    """
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    grid = pseudospectrum(
        J,
        (grid_spec.re_min, grid_spec.re_max),
        (grid_spec.im_min, grid_spec.im_max),
        (grid_spec.n_re, grid_spec.n_im),
    )
    inside = grid.values < epsilon
    if not inside.any():
        raise GridDomainError("no grid node inside the sublevel set; refine or recenter the grid")
    if inside[0, :].any() or inside[-1, :].any() or inside[:, 0].any() or inside[:, -1].any():
        raise GridDomainError("sublevel set touches the grid edge; enlarge the domain")
    zs = np.abs(grid.spec.re_values()[None, :] + 1j * grid.spec.im_values()[:, None])
    return float(zs[inside].max())


@dataclass(frozen=True)
class KreissEstimate:
    """Certified lower bound on the Kreiss constant plus its search spec.

    ``value`` is the supremum of ``(|z| - 1) / sigma_min(z I - J)`` over
    every point the search evaluated, seeded with 1.0 (the |z| -> inf
    limit of the objective, a valid lower bound for any operator).
    ``argmax_z`` is None when that asymptotic seed was never beaten.
    """

    value: float
    argmax_z: complex | None
    grid_spec: dict


def _golden_max(f, lo: float, hi: float, iters: int = 16):
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def kreiss_constant(J, radial_grid: int = 48, angular_grid: int = 96, refine_iters: int = 12) -> KreissEstimate:
    """Lower-bound estimate of ``sup_{|z|>1} (|z|-1) ||(z I - J)^{-1}||``.

    Search: coarse polar grid over the annulus ``|z| in (1, 1 + 10(1-rho)]``
    followed by `refine_iters` local refinement rounds, each running a
    golden-section pass on the radius at the incumbent angle and a
    shrinking angle sweep at the incumbent radius. Improvements are the
    only accepted updates, so the estimate is monotone non-decreasing
    across rounds and remains a certified lower bound of the supremum.
    """
    J = as_square_matrix(J, "J").astype(np.complex128, copy=False)
    if radial_grid < 2 or angular_grid < 2 or refine_iters < 0:
        raise ValueError("degenerate Kreiss search grid")
    rho = float(np.abs(np.linalg.eigvals(J)).max())
    if rho >= 1.0:
        raise DivergingSupremumError(f"spectral radius {rho:.6g} >= 1; the supremum diverges")
    eye = np.eye(J.shape[0], dtype=np.complex128)

    def objective(z: complex) -> float:
        s = np.linalg.svd(z * eye - J, compute_uv=False)[-1]
        return float("inf") if s == 0.0 else (abs(z) - 1.0) / float(s)

    outer = 1.0 + 10.0 * (1.0 - rho)
    radii = 1.0 + (outer - 1.0) * np.arange(1, radial_grid + 1) / radial_grid
    angles = 2.0 * np.pi * np.arange(angular_grid) / angular_grid

    best_val = 1.0
    best_z = None
    best_r = best_th = None
    zs = (radii[:, None] * np.exp(1j * angles)[None, :]).ravel()
    sig = _resolvent_sigma_grid(J, zs)
    vals = (np.abs(zs) - 1.0) / np.where(sig > 0.0, sig, np.nan)
    k = int(np.nanargmax(vals))
    if vals[k] > best_val:
        best_val = float(vals[k])
        best_z = complex(zs[k])
        best_r, best_th = float(abs(zs[k])), float(np.angle(zs[k]))

    if best_r is not None:
        dr = (outer - 1.0) / radial_grid
        dth = 2.0 * np.pi / angular_grid
        for _ in range(refine_iters):
            lo = max(1.0 + 1e-12, best_r - dr)
            hi = best_r + dr
            r_star, v_star = _golden_max(lambda r: objective(r * np.exp(1j * best_th)), lo, hi)
            if v_star > best_val:
                best_val, best_r = v_star, r_star
                best_z = best_r * np.exp(1j * best_th)
            for th in np.linspace(best_th - dth, best_th + dth, 9):
                v = objective(best_r * np.exp(1j * th))
                if v > best_val:
                    best_val, best_th = v, float(th)
                    best_z = best_r * np.exp(1j * best_th)
            dr *= 0.5
            dth *= 0.5

    search = {
        "radial_grid": radial_grid,
        "angular_grid": angular_grid,
        "refine_iters": refine_iters,
        "annulus": (1.0, outer),
        "rho": rho,
    }
    return KreissEstimate(float(best_val), None if best_z is None else complex(best_z), search)


@dataclass(frozen=True)
class PrecursorReport:
    """Transient-amplification precursor window derived from (kappa_V, rho)."""

    kappa_V: float
    rho: float
    t_c: int | None
    amplification_possible: bool
    eigenvalue_unstable: bool


def precursor_from_values(kappa_V: float, rho: float) -> PrecursorReport:
    """Precursor window ``t_c = ceil(log kappa_V / log(1/rho))``.

    ``t_c`` is defined only for ``kappa_V > 1`` and ``0 < rho < 1``.
    ``rho > 1`` is flagged eigenvalue-unstable instead: the spectral
    criterion already fires, so no precursor window applies. The
    amplification flag states whether ``kappa_V > rho**-t`` holds for
    some integer t >= 1.
    """
    kappa_V = float(kappa_V)
    rho = float(rho)
    if kappa_V < 1.0 - 1e-9:
        raise ValueError(f"kappa_V must be >= 1, got {kappa_V}")
    kappa_V = max(kappa_V, 1.0)
    if rho < 0.0:
        raise ValueError("rho must be nonnegative")
    if rho > 1.0:
        return PrecursorReport(kappa_V, rho, None, True, True)
    if rho == 1.0:
        return PrecursorReport(kappa_V, rho, None, kappa_V > 1.0, False)
    possible = rho > 0.0 and kappa_V > 1.0 / rho
    if kappa_V > 1.0 and rho > 0.0:
        t_c = int(math.ceil(math.log(kappa_V) / math.log(1.0 / rho)))
    else:
        t_c = None
    return PrecursorReport(kappa_V, rho, t_c, possible, False)


def precursor(eigdec: EigenDecomposition) -> PrecursorReport:
    """Precursor report straight from an eigendecomposition."""
    return precursor_from_values(eigdec.kappa_V, eigdec.spectral_radius)


def ep_scaling_probe(J, lambda_center: complex, epsilons, n_rays: int = 8) -> float:
    """Fitted exponent of ``dist(center, boundary of Lambda_eps)`` vs eps.

    For each epsilon the boundary distance is found by radial bisection
    of ``sigma_min(z I - J) = eps`` along ``n_rays`` rays from the probe
    center, keeping the smallest crossing over rays. The returned value
    is the least-squares slope of log(dist) against log(eps): 1/2 at an
    exact order-2 eigenvalue degeneracy, 1 at a well-separated eigenvalue
    of a normal operator.
    """
    J = as_square_matrix(J, "J").astype(np.complex128, copy=False)
    eps = [float(e) for e in epsilons]
    if len(eps) < 4:
        raise ValueError("need at least 4 epsilon values")
    if any(e <= 0.0 for e in eps):
        raise ValueError("epsilons must be positive")
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ValueError("epsilons must be strictly decreasing")
    if n_rays < 3:
        raise ValueError("need at least 3 rays")
    eye = np.eye(J.shape[0], dtype=np.complex128)
    z0 = complex(lambda_center)

    def smin(z: complex) -> float:
        return float(np.linalg.svd(z * eye - J, compute_uv=False)[-1])

    if smin(z0) >= min(eps):
        raise BracketError(
            f"probe center is not inside the sublevel set at eps={min(eps):.3g} "
            f"(sigma_min={smin(z0):.3g})"
        )
    cap = 2.0 * (operator_norm_2(J) + abs(z0) + max(eps)) + 1.0
    dists = []
    for e in eps:
        best = math.inf
        for k in range(n_rays):
            ray = np.exp(2j * np.pi * k / n_rays)
            hi = e
            while smin(z0 + hi * ray) <= e:
                hi *= 2.0
                if hi > cap:
                    raise BracketError("no boundary crossing found along a probe ray")
            lo = 0.0
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                if smin(z0 + mid * ray) < e:
                    lo = mid
                else:
                    hi = mid
                if hi - lo <= 1e-14 * hi:
                    break
            best = min(best, 0.5 * (lo + hi))
        dists.append(best)
    slope = np.polyfit(np.log(eps), np.log(dists), 1)[0]
    return float(slope)
