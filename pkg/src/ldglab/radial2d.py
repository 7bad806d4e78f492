"""Constrained 2D minimization on the unit disc in the equivariant class.

Energy of a profile f = (f0, f1, f2) at coupling lambda:

    E_lam(f) = pi * int_0^1 ( |f'|^2 + (|f1|^2 + 4 |f2|^2)/r^2
                              + 2 lam (1 - beta(f)) / (3 sqrt 6) ) r dr

minimized over profiles pinned to f(1) = (-1/2, 0, sqrt3/2) and to a class
tag at the origin: f0(0) = +1 (class N) or -1 (class S).  The minimizer is
found by projected gradient descent: a semi-implicit (backward-Euler in the
linear part, stabilized in the potential) step followed by nodewise
renormalization, with backtracking on the discrete energy so every accepted
iteration decreases it.  A plain explicit stepper is kept for cross-checks.

The module also provides the Euler-Lagrange residual, the e*_lam / e_lam
energy curves, bisection for the biaxial-escape threshold lambda_*, and the
second-variation (Hessian) diagnostic.

Sign note: the zero-order k^2/r^2 terms enter the Euler-Lagrange system as
f_k'' + f_k'/r - k^2 f_k / r^2 + |grad u|^2 f_k = lam grad_tan W(f)_k, the
variational equations of the energy above (checked against the closed-form
harmonic solutions).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import closed_forms, descent
from .profiles import BOUNDARY_F, RadialProfile, profile_from_map, uniform_grid
from .tensor_core import (
    SQRT2,
    SQRT3,
    SQRT6,
    beta_arrays,
    grad_w_tan_arrays,
    hessian_w_homog,
)

SIX_PI = 6.0 * np.pi

#: Paper-certified bracket for the biaxial-escape threshold lambda_*.
LAMBDA_STAR_LOWER = 24.0 * SQRT2 / (2.0 * np.pi - 3.0 * SQRT3)
LAMBDA_STAR_UPPER = 3.0**8 * (SQRT6 / 4.0) * np.pi**2

@dataclass
class SolveOptions:
    step: float = 0.1
    max_iters: int = 20000
    grad_tol: float = 1e-5
    energy_tol: float = 1e-13
    seed: int = 0
    stepper: str = "semi_implicit"  # or "explicit"
    cascade: bool = True
    verbose: bool = False

    def __post_init__(self):
        if self.step <= 0 or self.max_iters <= 0 or self.grad_tol <= 0 or self.energy_tol <= 0:
            raise ValueError("solver options must be positive")


@dataclass
class MinResult2D:
    profile: RadialProfile
    energy: float
    dirichlet: float
    potential: float
    residual: float
    iterations: int
    class_tag: str
    beta_min: float
    beta_max: float
    converged: bool = True
    escaped: bool = False


# ---------------------------------------------------------------------------
# Discretization: gradient matrix, quadrature weights, stiffness matrices.
# ---------------------------------------------------------------------------


def _trapezoid_weights(r: np.ndarray) -> np.ndarray:
    w = np.zeros_like(r)
    dr = np.diff(r)
    w[0] = dr[0] / 2.0
    w[-1] = dr[-1] / 2.0
    w[1:-1] = (dr[:-1] + dr[1:]) / 2.0
    return w


def _gradient_matrix(r: np.ndarray) -> sp.csr_matrix:
    """Sparse matrix reproducing np.gradient(., r, edge_order=2)."""
    n = r.size
    rows, cols, vals = [], [], []
    hm = r[1:-1] - r[:-2]
    hp = r[2:] - r[1:-1]
    a = -hp / (hm * (hm + hp))
    b = (hp - hm) / (hm * hp)
    c = hm / (hp * (hm + hp))
    for i in range(1, n - 1):
        rows += [i, i, i]
        cols += [i - 1, i, i + 1]
        vals += [a[i - 1], b[i - 1], c[i - 1]]

    def edge(i0, i1, i2):
        x0, x1, x2 = r[i0], r[i1], r[i2]
        c0 = (2 * x0 - x1 - x2) / ((x0 - x1) * (x0 - x2))
        c1 = (x0 - x2) / ((x1 - x0) * (x1 - x2))
        c2 = (x0 - x1) / ((x2 - x0) * (x2 - x1))
        return c0, c1, c2

    c0, c1, c2 = edge(0, 1, 2)
    rows += [0, 0, 0]
    cols += [0, 1, 2]
    vals += [c0, c1, c2]
    c0, c1, c2 = edge(n - 1, n - 2, n - 3)
    rows += [n - 1, n - 1, n - 1]
    cols += [n - 1, n - 2, n - 3]
    vals += [c0, c1, c2]
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


class _Discretization:
    """Grid-bound operators shared by energy, descent, and Hessian assembly.

    The Dirichlet term uses the segment form sum_i r_{i+1/2} |df_i|^2 / h_i
    (piecewise-linear elements), whose variational derivative is the
    conservative second-order radial Laplacian; zeroth-order terms use
    trapezoid weights with the 1/r^2 integrand taken as 0 on the axis.
    """

    def __init__(self, r: np.ndarray):
        self.r = r
        self.n = r.size
        self.w = _trapezoid_weights(r)
        self.grad = _gradient_matrix(r)
        self.wr = self.w * r
        self.h_seg = np.diff(r)
        self.rmid = 0.5 * (r[:-1] + r[1:])
        self.seg_coef = self.rmid / self.h_seg
        inv_r2 = np.zeros_like(r)
        inv_r2[1:] = 1.0 / r[1:] ** 2
        self.inv_r2 = inv_r2
        # Tridiagonal segment stiffness: gradient of pi * sum seg_coef |df|^2.
        n = self.n
        main = np.zeros(n)
        main[:-1] += self.seg_coef
        main[1:] += self.seg_coef
        a_seg = sp.diags(
            [-self.seg_coef, main, -self.seg_coef], offsets=(-1, 0, 1)
        )
        self.stiff = {}
        for k in (0, 1, 2):
            pen = sp.diags(self.wr * (k * k) * inv_r2)
            self.stiff[k] = (2.0 * np.pi * (a_seg + pen)).tocsc()
        self.mass = 2.0 * np.pi * self.wr  # diagonal, vanishes at r = 0
        self.interior = np.arange(1, self.n - 1)

    def grad_sq(self, f0, f1, f2) -> np.ndarray:
        """|grad u|^2 along the profile (finite limit on the axis)."""
        d0 = self.grad @ f0
        d1 = self.grad @ f1
        d2 = self.grad @ f2
        g = np.abs(d0) ** 2 + np.abs(d1) ** 2 + np.abs(d2) ** 2
        g[1:] += (np.abs(f1[1:]) ** 2 + 4.0 * np.abs(f2[1:]) ** 2) / self.r[1:] ** 2
        g[0] += np.abs(d1[0]) ** 2 + 4.0 * np.abs(d2[0]) ** 2
        return g

    def dirichlet_quad(self, f0, f1, f2) -> float:
        """pi * int (|f'|^2 + (|f1|^2 + 4 |f2|^2)/r^2) r dr, segment form."""
        acc = 0.0
        for f in (f0, f1, f2):
            df = np.abs(np.diff(f)) ** 2
            acc += float(np.sum(self.seg_coef * df))
        pen = (np.abs(f1) ** 2 + 4.0 * np.abs(f2) ** 2) * self.inv_r2
        acc += float(np.sum(self.wr * pen))
        return np.pi * acc


_DISC_CACHE: dict[bytes, _Discretization] = {}


def _disc_for(r: np.ndarray) -> _Discretization:
    key = r.tobytes()
    d = _DISC_CACHE.get(key)
    if d is None:
        d = _Discretization(r.copy())
        if len(_DISC_CACHE) > 32:
            _DISC_CACHE.clear()
        _DISC_CACHE[key] = d
    return d


# ---------------------------------------------------------------------------
# Energy and Euler-Lagrange residual.
# ---------------------------------------------------------------------------


def radial_energy(profile: RadialProfile, lam: float):
    """(total, dirichlet, potential) by the module's quadrature.

    total = dirichlet + lam * potential, with potential the integral of
    2 W over the disc by composite trapezoid (the 1/r^2 integrand is
    evaluated as 0 at r = 0: the r weight vanishes and f1, f2 vanish
    there) and the derivative term in segment-midpoint form.  This is
    the exact objective the projected descent decreases.
    """
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    profile.validate()
    d = _disc_for(profile.grid)
    f0, f1, f2 = profile.f0, profile.f1, profile.f2
    dirichlet = d.dirichlet_quad(f0, f1, f2)
    wdens = 2.0 * (1.0 - beta_arrays(f0, f1, f2)) / (3.0 * SQRT6)
    potential = np.pi * float(np.sum(d.wr * wdens))
    return dirichlet + lam * potential, dirichlet, potential


def _second_deriv_interior(f, r):
    """3-point second derivative at interior nodes (exact on quadratics)."""
    hm = r[1:-1] - r[:-2]
    hp = r[2:] - r[1:-1]
    return 2.0 * (
        f[:-2] * hp - f[1:-1] * (hm + hp) + f[2:] * hm
    ) / (hm * hp * (hm + hp))


def el_residual_2d(profile: RadialProfile, lam: float) -> float:
    """Max-norm residual of the lambda-modified radial EL system.

    Interior residual only; a profile whose boundary node deviates from
    the anchoring datum is still evaluated, with the mismatch warned.
    """
    profile.validate(boundary=False)
    mismatch = profile.boundary_mismatch()
    if mismatch > 1e-9:
        import warnings

        warnings.warn(
            f"boundary datum mismatch {mismatch:.3g}; residual is interior-only",
            stacklevel=2,
        )
    d = _disc_for(profile.grid)
    r = profile.grid
    f0, f1, f2 = profile.f0.astype(complex), profile.f1, profile.f2
    g2 = d.grad_sq(profile.f0, f1, f2)
    gw0, gw1, gw2 = grad_w_tan_arrays(profile.f0, f1, f2)
    res_max = 0.0
    for k, (f, gw) in enumerate(((f0, gw0), (f1, gw1), (f2, gw2))):
        d1 = d.grad @ f
        d2v = _second_deriv_interior(f, r)
        res = (
            d2v
            + d1[1:-1] / r[1:-1]
            - (k * k) * f[1:-1] / r[1:-1] ** 2
            + g2[1:-1] * f[1:-1]
            - lam * np.asarray(gw, dtype=complex)[1:-1]
        )
        res_max = max(res_max, float(np.max(np.abs(res))))
    return res_max


# ---------------------------------------------------------------------------
# Canonical initializers.
# ---------------------------------------------------------------------------


def preset_profile(
    name: str, grid: np.ndarray, noise: float = 0.0, seed: int = 0
) -> RadialProfile:
    """Named starting profiles: 'uS', 'ghbar', 'ghbar-neg', 'bubbled'.

    'bubbled' is g_hbar with the center value flipped to -E0 across the
    first grid cell: the cheap class-S competitor at strong coupling.
    Optional tangential noise (relative amplitude) is applied away from
    the pinned nodes, then everything is renormalized.
    """
    grid = np.asarray(grid, dtype=float)
    if name == "uS":
        p = profile_from_map(closed_forms.small_solution_us, grid)
    elif name == "ghbar":
        p = profile_from_map(closed_forms.g_hbar, grid)
    elif name == "ghbar-neg":
        p = profile_from_map(lambda z: closed_forms.g_hbar(-z), grid)
    elif name == "bubbled":
        p = profile_from_map(closed_forms.g_hbar, grid)
        p.f0[0] = -1.0
    else:
        raise ValueError(f"unknown preset {name!r}")
    if noise > 0.0:
        rng = np.random.default_rng(seed)
        sh = grid.shape
        p.f0 = p.f0 + noise * rng.standard_normal(sh)
        p.f1 = p.f1 + noise * (rng.standard_normal(sh) + 1j * rng.standard_normal(sh))
        p.f2 = p.f2 + noise * (rng.standard_normal(sh) + 1j * rng.standard_normal(sh))
        norms = p.node_norms()
        p.f0 /= norms
        p.f1 /= norms
        p.f2 /= norms
        _impose_pins(p, 1.0 if p.f0[0] > 0 else -1.0)
    return p


def _impose_pins(p: RadialProfile, pin: float) -> None:
    p.f0[0], p.f1[0], p.f2[0] = pin, 0.0, 0.0
    p.f0[-1], p.f1[-1], p.f2[-1] = BOUNDARY_F


# ---------------------------------------------------------------------------
# Projected gradient descent.
# ---------------------------------------------------------------------------


def _problem_for(grid: np.ndarray, lam: float, pin: float) -> descent.Problem:
    d = _disc_for(grid)
    interior = d.interior

    def project(v0, v1, v2):
        v0[0], v1[0], v2[0] = pin, 0.0, 0.0
        v0[-1], v1[-1], v2[-1] = BOUNDARY_F
        return v0, v1, v2

    return descent.Problem(
        stiff=(d.stiff[0], d.stiff[1], d.stiff[2]),
        mass=d.mass,
        free=(interior, interior, interior),
        project=project,
        lam=lam,
    )


def minimize_2d(
    lam: float,
    class_tag: str,
    init: RadialProfile | str,
    opts: SolveOptions | None = None,
    grid: np.ndarray | None = None,
) -> MinResult2D:
    """Projected gradient descent within a class; monotone in energy.

    init may be a RadialProfile or a preset name; a preset requires grid.
    The initial profile must carry the requested class pin and the
    boundary datum.  Returns the converged state with its energy split,
    EL residual, and beta range; class escape is flagged, not fatal.
    """
    opts = opts or SolveOptions()
    if class_tag not in ("N", "S"):
        raise ValueError("class must be 'N' or 'S'")
    if isinstance(init, str):
        if grid is None:
            raise ValueError("preset init requires a grid")
        init = preset_profile(init, grid, seed=opts.seed)
    init.validate()
    if init.class_tag != class_tag:
        raise ValueError(
            f"init carries class {init.class_tag}, requested {class_tag}"
        )

    grids = [init.grid]
    if opts.cascade and init.n >= 257:
        n = init.n
        levels = []
        while n >= 257:
            n = (n - 1) // 2 + 1
            levels.append(n)
        for nl in levels[:3]:
            grids.insert(0, np.linspace(0.0, 1.0, nl))
        # Cascade assumes a uniform fine grid; fall back if it is not.
        if np.max(np.abs(np.diff(init.grid) - np.diff(init.grid)[0])) > 1e-12:
            grids = [init.grid]

    prof = init
    total_iters = 0
    for gi, g in enumerate(grids):
        if g.size != prof.n:
            prof = prof.interp_to(g)
        it_budget = opts.max_iters if gi == len(grids) - 1 else max(500, opts.max_iters // 4)
        prof, iters, converged = _descend(prof, lam, opts, it_budget)
        total_iters += iters

    energy, dirichlet, potential = radial_energy(prof, lam)
    beta = prof.beta()
    escaped = bool(np.sign(prof.f0[1]) != np.sign(prof.f0[0]))
    return MinResult2D(
        profile=prof,
        energy=energy,
        dirichlet=dirichlet,
        potential=potential,
        residual=el_residual_2d(prof, lam),
        iterations=total_iters,
        class_tag=class_tag,
        beta_min=float(np.min(beta)),
        beta_max=float(np.max(beta)),
        converged=converged,
        escaped=escaped,
    )


def _descend(prof: RadialProfile, lam: float, opts: SolveOptions, max_iters: int):
    pin = 1.0 if prof.f0[0] > 0 else -1.0
    problem = _problem_for(prof.grid, lam, pin)
    step = opts.step if opts.stepper == "semi_implicit" else opts.step * prof.grid[1] ** 2
    dopts = descent.DescentOptions(
        step=step,
        max_iters=max_iters,
        grad_tol=opts.grad_tol,
        energy_tol=opts.energy_tol,
        stepper=opts.stepper,
        verbose=opts.verbose,
    )
    fields, it, converged = descent.descend(
        problem, (prof.f0, prof.f1, prof.f2), dopts
    )
    out = RadialProfile(prof.grid.copy(), *fields)
    _impose_pins(out, pin)
    return out, it, converged


# ---------------------------------------------------------------------------
# Energy curves and the escape threshold.
# ---------------------------------------------------------------------------


@dataclass
class CurveRow:
    lam: float
    estar: float
    e: float
    beta_min: float
    beta_max: float
    global_class: str
    valid: bool
    estar_fine: float = math.nan
    potential: float = math.nan
    multi_start_spread: float = math.nan


def _best_class_s(lam, grid, opts, warm: RadialProfile | None):
    """Lowest-energy class-S solve over warm start and canonical inits.

    Also returns the spread (max - min) of the converged energies: the
    empirical multi-start disagreement used to report on uniqueness.
    """
    inits: list[RadialProfile | str] = []
    if warm is not None:
        inits.append(warm.interp_to(grid) if warm.n != grid.size else warm)
    inits += ["uS", "bubbled"]
    best = None
    energies = []
    for ini in inits:
        try:
            res = minimize_2d(lam, "S", ini, opts, grid=grid)
        except RuntimeError:
            continue
        if res.converged:
            energies.append(res.energy)
        if best is None or res.energy < best.energy:
            best = res
    if best is None:
        raise RuntimeError(f"all class-S solves failed at lambda={lam}")
    spread = max(energies) - min(energies) if len(energies) > 1 else math.nan
    return best, spread


def energy_curve(
    lambdas,
    opts: SolveOptions | None = None,
    n: int = 1025,
    richardson: bool = True,
) -> list[CurveRow]:
    """e*_lam (class-S minimum) and e_lam = min(6 pi, e*_lam) along a sweep.

    Ascends the sorted lambda values with warm starts, also trying the
    canonical inits at every point and keeping the lowest energy.  With
    richardson=True each e* is extrapolated from grids (n, 2n-1).
    """
    opts = opts or SolveOptions()
    lambdas = list(lambdas)
    if any(l < 0 for l in lambdas) or sorted(lambdas) != lambdas:
        raise ValueError("lambda values must be sorted and nonnegative")
    grid_c = uniform_grid(n)
    grid_f = uniform_grid(2 * n - 1) if richardson else None
    rows: list[CurveRow] = []
    warm = None
    for lam in lambdas:
        try:
            res, spread = _best_class_s(lam, grid_c, opts, warm)
            warm = res.profile
            estar = res.energy
            estar_fine = math.nan
            if richardson:
                res_f = minimize_2d(lam, "S", res.profile.interp_to(grid_f), opts)
                estar_fine = res_f.energy
                estar = (4.0 * estar_fine - res.energy) / 3.0
            e = min(SIX_PI, estar)
            if estar <= SIX_PI:
                bmin, bmax, gclass, pot = res.beta_min, res.beta_max, "S", res.potential
            else:
                gh = minimize_2d(lam, "N", "ghbar", opts, grid=grid_c)
                bmin, bmax, gclass, pot = gh.beta_min, gh.beta_max, "N", gh.potential
            rows.append(
                CurveRow(lam, estar, e, bmin, bmax, gclass, True, estar_fine, pot, spread)
            )
        except RuntimeError:
            rows.append(
                CurveRow(lam, math.nan, math.nan, math.nan, math.nan, "?", False)
            )
    return rows


def estimate_lambda_star(
    tol: float = 0.5,
    opts: SolveOptions | None = None,
    n: int = 1025,
    bracket: tuple[float, float] | None = None,
):
    """Bisection for lambda_*: the unique solution of e*_lam = 6 pi.

    Returns (lo, hi, point_estimate).  The seed bracket defaults to the
    certified interval [24 sqrt2/(2 pi - 3 sqrt3), 3^8 (sqrt6/4) pi^2];
    a missing sign change there is reported as an error with both
    endpoint energies.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    opts = opts or SolveOptions()
    grid = uniform_grid(n)
    lo, hi = bracket if bracket is not None else (LAMBDA_STAR_LOWER, LAMBDA_STAR_UPPER)

    warm: dict[str, RadialProfile | None] = {"lo": None, "hi": None}

    def g(lam, side):
        res, _ = _best_class_s(lam, grid, opts, warm[side])
        warm[side] = res.profile
        return res.energy - SIX_PI

    g_lo = g(lo, "lo")
    g_hi = g(hi, "hi")
    if not (g_lo < 0.0 < g_hi):
        raise RuntimeError(
            "no sign change over the seed bracket: "
            f"e*({lo:.4g}) - 6pi = {g_lo:.4g}, e*({hi:.4g}) - 6pi = {g_hi:.4g}"
        )
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if g(mid, "lo") < 0.0:
            lo = mid
        else:
            hi = mid
    if bracket is None and not (LAMBDA_STAR_LOWER <= lo and hi <= LAMBDA_STAR_UPPER):
        raise RuntimeError(
            f"bisection result [{lo}, {hi}] escaped the certified interval"
        )
    return lo, hi, 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# Second variation (Hessian) diagnostic.
# ---------------------------------------------------------------------------


def _tangent_frames(f0, f1, f2):
    """Per-node orthonormal bases of the tangent space, shape (n, 5, 4)."""
    n = f0.size
    u = np.stack([f0, f1.real, f1.imag, f2.real, f2.imag], axis=1)
    frames = np.zeros((n, 5, 4))
    eye = np.eye(5)
    for i in range(n):
        # Gram-Schmidt of the coordinate frame against u_i.
        cols = []
        for j in range(5):
            v = eye[j] - np.dot(eye[j], u[i]) * u[i]
            for c in cols:
                v = v - np.dot(v, c) * c
            nv = np.linalg.norm(v)
            if nv > 1e-8:
                cols.append(v / nv)
            if len(cols) == 4:
                break
        frames[i] = np.stack(cols, axis=1)
    return frames


def second_variation_form(profile: RadialProfile, lam: float, phi) -> float:
    """Value of the second-variation quadratic form at an equivariant field.

    phi = (p0, p1, p2) with p0 real and p1, p2 complex node arrays; it is
    tangentially projected along the profile and forced to vanish at the
    pinned nodes before evaluation.
    """
    d = _disc_for(profile.grid)
    f0, f1, f2 = profile.f0, profile.f1, profile.f2
    p0 = np.asarray(phi[0], dtype=float).copy()
    p1 = np.asarray(phi[1], dtype=complex).copy()
    p2 = np.asarray(phi[2], dtype=complex).copy()
    dot = p0 * f0 + (p1 * np.conj(f1)).real + (p2 * np.conj(f2)).real
    p0, p1, p2 = p0 - dot * f0, p1 - dot * f1, p2 - dot * f2
    for p in (p0, p1, p2):
        p[0] = 0.0
        p[-1] = 0.0
    quad = (
        float(p0 @ (d.stiff[0] @ p0))
        + float((np.conj(p1) @ (d.stiff[1] @ p1)).real)
        + float((np.conj(p2) @ (d.stiff[2] @ p2)).real)
    )
    g2 = d.grad_sq(f0, f1, f2)
    quad -= float(
        np.sum(d.mass * g2 * (p0**2 + np.abs(p1) ** 2 + np.abs(p2) ** 2))
    )
    if lam != 0.0:
        u5 = np.stack([f0, f1.real, f1.imag, f2.real, f2.imag], axis=1)
        p5 = np.stack([p0, p1.real, p1.imag, p2.real, p2.imag], axis=1)
        for i in range(profile.n):
            if d.mass[i] == 0.0:
                continue
            h = hessian_w_homog(u5[i])
            quad += lam * d.mass[i] * float(p5[i] @ h @ p5[i])
    return quad


def second_variation_spectrum(
    profile: RadialProfile,
    lam: float,
    modes: int = 6,
    residual_threshold: float = 0.05,
):
    """Smallest eigenvalue of the projected Hessian at a converged minimizer.

    Assembles the quadratic form over nodewise-tangent equivariant fields
    vanishing at r = 0 and r = 1 and solves the generalized eigenproblem
    against the L2(pi r dr) mass; returns (smallest, eigenvalue array).
    Raises if the profile is not stationary enough.
    """
    res = el_residual_2d(profile, lam)
    if res > residual_threshold:
        raise ValueError(
            f"profile is not stationary (EL residual {res:.3g} > {residual_threshold})"
        )
    d = _disc_for(profile.grid)
    n = profile.n
    f0, f1, f2 = profile.f0, profile.f1, profile.f2
    comp_pen = [0, 1, 1, 2, 2]
    blocks = [d.stiff[comp_pen[c]] for c in range(5)]
    big = sp.block_diag(blocks, format="csr")

    def expand(idx_comp, idx_node):
        return idx_comp * n + idx_node

    g2 = d.grad_sq(f0, f1, f2)
    diag_term = np.concatenate([d.mass * g2 for _ in range(5)])
    big = big - sp.diags(diag_term)

    if lam != 0.0:
        u5 = np.stack([f0, f1.real, f1.imag, f2.real, f2.imag], axis=1)
        rows, cols, vals = [], [], []
        for i in range(n):
            if d.mass[i] == 0.0:
                continue
            h = lam * d.mass[i] * hessian_w_homog(u5[i])
            for a in range(5):
                for b in range(5):
                    if h[a, b] != 0.0:
                        rows.append(expand(a, i))
                        cols.append(expand(b, i))
                        vals.append(h[a, b])
        big = big + sp.csr_matrix((vals, (rows, cols)), shape=(5 * n, 5 * n))

    frames = _tangent_frames(f0, f1, f2)
    rows, cols, vals = [], [], []
    interior = np.arange(1, n - 1)
    for jj, i in enumerate(interior):
        for a in range(5):
            for b in range(4):
                v = frames[i, a, b]
                if v != 0.0:
                    rows.append(expand(a, i))
                    cols.append(4 * jj + b)
                    vals.append(v)
    t = sp.csr_matrix((vals, (rows, cols)), shape=(5 * n, 4 * interior.size))
    h_t = (t.T @ big @ t).tocsc()
    m_t = sp.diags(np.repeat(d.mass[interior], 4)).tocsc()
    k = min(modes, h_t.shape[0] - 2)
    vals = spla.eigsh(h_t, k=k, M=m_t, sigma=-2.0, which="LM", return_eigenvectors=False)
    vals = np.sort(vals)
    return float(vals[0]), vals
