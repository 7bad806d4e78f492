"""Axisymmetric 3D solver on smoothed cylinders.

The domain is a vertical cylinder of half-height h and radius ell whose
meridian rectangle has its corners rounded by 4-norm discs of radius rho
(a C^{3,1} boundary).  Equivariant fields reduce to three profiles
f = (f0, f1, f2) on the meridian half-section, with energy

    E_lam = pi * int ( |grad f|^2 + (|f1|^2 + 4 |f2|^2)/r^2 + 2 lam W(f) ) r dr dz.

The solver is the shared projected-descent engine on a masked uniform
(r, z) grid: interior nodes are unknowns, the exterior-adjacent layer
carries the homeotropic (outward normal) data pulled back to the nearest
boundary point, the axis column keeps f1 = f2 = 0 with f0 free (its unit
norm forces the +/-1 trace).  Downstream diagnostics: axis-trace
singularity detection, torus/split classification, the radial /
horizontal / vertical energy identities, and the singularity instability
quadratic form.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp

from . import descent
from .radial2d import SolveOptions, minimize_2d, uniform_grid
from .tensor_core import SQRT6, beta_arrays, q_to_u

__all__ = [
    "CylinderGeometry",
    "MeridianField",
    "SingularityRecord",
    "MinResult3D",
    "build_geometry",
    "homeotropic_data",
    "meridian_energy",
    "minimize_3d",
    "axis_trace",
    "detect_singularities",
    "classify",
    "energy_identity_residuals",
    "radial_monotonicity",
    "instability_form",
    "EtaSpec",
    "tangent_map_field",
]


# ---------------------------------------------------------------------------
# Geometry.
# ---------------------------------------------------------------------------


def _four_norm_excess(r, z, ell, h, rho):
    """4-norm distance to the deflated rectangle minus rho; < 0 inside."""
    a = np.maximum(np.abs(r) - (ell - rho), 0.0)
    b = np.maximum(np.abs(z) - (h - rho), 0.0)
    return (a**4 + b**4) ** 0.25 - rho


@dataclass
class CylinderGeometry:
    """Smoothed rho-cylinder sampled on a uniform meridian lattice."""

    h: float
    ell: float
    rho: float
    r: np.ndarray
    z: np.ndarray
    interior: np.ndarray  # bool (nz, nr)
    dirichlet: np.ndarray  # bool (nz, nr): data-carrying layer
    normals: np.ndarray  # (nz, nr, 2) outward normal at dirichlet nodes
    foot: np.ndarray  # (nz, nr, 2) nearest boundary point of dirichlet nodes

    @property
    def nr(self) -> int:
        return self.r.size

    @property
    def nz(self) -> int:
        return self.z.size

    @property
    def hr(self) -> float:
        return float(self.r[1] - self.r[0])

    @property
    def hz(self) -> float:
        return float(self.z[1] - self.z[0])

    @property
    def active(self) -> np.ndarray:
        return self.interior | self.dirichlet

    def level(self, r, z):
        return _four_norm_excess(r, z, self.ell, self.h, self.rho)

    def normal_at(self, i: int, j: int) -> np.ndarray:
        """Outward boundary normal stored at a data-layer node.

        Raises for nodes outside the data layer (interior or exterior),
        where no boundary normal is defined.
        """
        if not self.dirichlet[i, j]:
            raise ValueError(f"node ({i}, {j}) carries no boundary normal")
        return self.normals[i, j]

    def mask_to_csv(self, path) -> None:
        """Dump the node classification (0 exterior, 1 interior, 2 data layer)."""
        code = np.zeros((self.nz, self.nr), dtype=int)
        code[self.interior] = 1
        code[self.dirichlet] = 2
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "x3", "mask"])
            for i in range(self.nz):
                for j in range(self.nr):
                    w.writerow([repr(float(self.r[j])), repr(float(self.z[i])), int(code[i, j])])


def build_geometry(h: float, ell: float, rho: float, target_h: float = 0.025) -> CylinderGeometry:
    """Mask a uniform meridian lattice by 4-disc membership.

    A node is interior iff its 4-norm distance to the deflated rectangle
    is body rho (equivalently, it lies in some admissible 4-disc).  The
    Dirichlet layer is every non-interior node 4-adjacent to an interior
    one; it stores the outward normal and nearest boundary point of the
    smoothed boundary curve.
    """
    if not (h > 0 and ell > 0 and 0 < 2 * rho < min(h, ell)):
        raise ValueError("need h, ell > 0 and 0 < 2 rho < min(h, ell)")
    nr = max(int(round(ell / target_h)), 8) + 1
    nz = 2 * max(int(round(h / target_h)), 8) + 1
    r = np.linspace(0.0, ell, nr)
    z = np.linspace(-h, h, nz)
    rr = r[None, :] * np.ones((nz, 1))
    zz = z[:, None] * np.ones((1, nr))
    phi = _four_norm_excess(rr, zz, ell, h, rho)
    interior = phi < -1e-12 * rho  # roundoff guard for nodes on the boundary
    shifted = np.zeros_like(interior)
    for ax, d in ((0, 1), (0, -1), (1, 1), (1, -1)):
        shifted |= np.roll(interior, d, axis=ax)
    # Rolls wrap around; wrapped rows/cols cannot be adjacent in-grid.
    dirichlet = shifted & ~interior

    # Nearest boundary point: from the clamped center of the touching 4-disc.
    cr = np.clip(rr, -(ell - rho), ell - rho)
    cz = np.clip(zz, -(h - rho), h - rho)
    dr = rr - cr
    dz = zz - cz
    q4 = (dr**4 + dz**4) ** 0.25
    with np.errstate(invalid="ignore", divide="ignore"):
        scale = np.where(q4 > 0, rho / np.where(q4 > 0, q4, 1.0), 0.0)
    foot_r = cr + dr * scale
    foot_z = cz + dz * scale
    # Outward normal of the 4-norm sphere at the foot point.
    fr = foot_r - cr
    fz = foot_z - cz
    nr_ = fr**3
    nz_ = fz**3
    nn = np.sqrt(nr_**2 + nz_**2)
    nn = np.where(nn > 0, nn, 1.0)
    normals = np.stack([nr_ / nn, nz_ / nn], axis=-1)
    foot = np.stack([foot_r, foot_z], axis=-1)

    geom = CylinderGeometry(h, ell, rho, r, z, interior, dirichlet, normals, foot)
    _check_inclusions(geom)
    return geom


def _check_inclusions(geom: CylinderGeometry) -> None:
    """Nodewise inclusions R^h_{ell-rho} u R^{h-rho}_ell c R^h_{ell,rho} c R^h_ell."""
    rr = geom.r[None, :] * np.ones((geom.nz, 1))
    zz = geom.z[:, None] * np.ones((1, geom.nr))
    inner = ((np.abs(rr) < geom.ell - geom.rho) & (np.abs(zz) < geom.h)) | (
        (np.abs(rr) < geom.ell) & (np.abs(zz) < geom.h - geom.rho)
    )
    outer = (np.abs(rr) < geom.ell) & (np.abs(zz) < geom.h)
    if np.any(inner & ~geom.interior) or np.any(geom.interior & ~outer):
        raise AssertionError("smoothed-rectangle inclusions violated by the mask")


# ---------------------------------------------------------------------------
# Fields and boundary data.
# ---------------------------------------------------------------------------


@dataclass
class MeridianField:
    geom: CylinderGeometry
    f0: np.ndarray
    f1: np.ndarray
    f2: np.ndarray

    def beta(self) -> np.ndarray:
        return beta_arrays(self.f0, self.f1, self.f2)

    def node_norms(self) -> np.ndarray:
        return np.sqrt(self.f0**2 + np.abs(self.f1) ** 2 + np.abs(self.f2) ** 2)

    def validate(self, tol: float = 1e-9) -> None:
        act = self.geom.active
        if np.max(np.abs(self.node_norms()[act] - 1.0)) > tol:
            raise ValueError("active node norms deviate from 1 beyond tolerance")
        axis = act[:, 0]
        if np.max(np.abs(self.f1[axis, 0])) > tol or np.max(np.abs(self.f2[axis, 0])) > tol:
            raise ValueError("f1, f2 must vanish on the axis")

    def copy(self) -> "MeridianField":
        return MeridianField(self.geom, self.f0.copy(), self.f1.copy(), self.f2.copy())

    def to_csv(self, path) -> None:
        g = self.geom
        beta = self.beta()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "x3", "f0", "Re f1", "Im f1", "Re f2", "Im f2", "beta"])
            act = g.active
            for i in range(g.nz):
                for j in range(g.nr):
                    if not act[i, j]:
                        continue
                    w.writerow(
                        [
                            repr(float(g.r[j])),
                            repr(float(g.z[i])),
                            repr(float(self.f0[i, j])),
                            repr(float(self.f1[i, j].real)),
                            repr(float(self.f1[i, j].imag)),
                            repr(float(self.f2[i, j].real)),
                            repr(float(self.f2[i, j].imag)),
                            repr(float(beta[i, j])),
                        ]
                    )


def homeotropic_tensor(normal3, normalized: bool = True) -> np.ndarray:
    """Boundary tensor n x n - Id/3, unit-normalized by default."""
    n = np.asarray(normal3, dtype=float)
    n = n / np.linalg.norm(n)
    q = np.outer(n, n) - np.eye(3) / 3.0
    if normalized:
        q = q * np.sqrt(1.5)
    return q


def homeotropic_data(geom: CylinderGeometry, normalized: bool = True):
    """(f0, f1, f2) arrays holding the outward-normal data on the layer.

    The normal is rotated into 3D in the meridian plane (phi = 0), the
    tensor sqrt(3/2)(n x n - Id/3) converted to u-coordinates; caps give
    (1, 0, 0) and the straight lateral wall (-1/2, 0, sqrt3/2).
    """
    g = geom
    f0 = np.zeros((g.nz, g.nr))
    f1 = np.zeros((g.nz, g.nr), dtype=complex)
    f2 = np.zeros((g.nz, g.nr), dtype=complex)
    idx = np.argwhere(g.dirichlet)
    for i, j in idx:
        n2 = g.normals[i, j]
        u = q_to_u(homeotropic_tensor([n2[0], 0.0, n2[1]], normalized))
        f0[i, j] = u.u0
        f1[i, j] = u.u1
        f2[i, j] = u.u2
    return f0, f1, f2


# ---------------------------------------------------------------------------
# Discrete energy: masked segment/trapezoid quadrature.
# ---------------------------------------------------------------------------


class _MeridianDisc:
    """Stiffness, mass, and index bookkeeping on the masked lattice."""

    def __init__(self, geom: CylinderGeometry):
        self.geom = geom
        nz, nr = geom.nz, geom.nr
        hr, hz = geom.hr, geom.hz
        act = geom.active
        inter = geom.interior
        n_all = nz * nr
        flat = lambda i, j: i * nr + j

        rows, cols, vals = [], [], []

        def add_edges(ii, jj, ii2, jj2, coef):
            a = flat(ii, jj)
            b = flat(ii2, jj2)
            rows.extend([a, b, a, b])
            cols.extend([a, b, b, a])
            vals.extend([coef, coef, -coef, -coef])

        # r-edges: include when both endpoints active and one interior.
        i_idx, j_idx = np.nonzero(
            act[:, :-1] & act[:, 1:] & (inter[:, :-1] | inter[:, 1:])
        )
        rmid = 0.5 * (geom.r[j_idx] + geom.r[j_idx + 1])
        coef_r = hz * rmid / hr
        add_edges(i_idx, j_idx, i_idx, j_idx + 1, coef_r)
        # z-edges.
        i_idx, j_idx = np.nonzero(
            act[:-1, :] & act[1:, :] & (inter[:-1, :] | inter[1:, :])
        )
        coef_z = hr * geom.r[j_idx] / hz
        add_edges(i_idx, j_idx, i_idx + 1, j_idx, coef_z)

        rows = np.concatenate([np.atleast_1d(v) for v in rows])
        cols = np.concatenate([np.atleast_1d(v) for v in cols])
        vals = np.concatenate([np.atleast_1d(v) for v in vals])
        lap = sp.csr_matrix((vals, (rows, cols)), shape=(n_all, n_all))

        m = np.zeros((nz, nr))
        m[inter] = hr * hz
        m *= geom.r[None, :]
        # Lumped P1 mass on the axis column keeps those unknowns inertial.
        m[:, 0] = np.where(inter[:, 0], hz * hr**2 / 6.0, 0.0)
        self.m_flat = m.ravel()
        inv_r2 = np.zeros(nr)
        inv_r2[1:] = 1.0 / geom.r[1:] ** 2
        pen_flat = (m * inv_r2[None, :]).ravel()

        self.stiff = {}
        for k in (0, 1, 2):
            self.stiff[k] = (2.0 * np.pi * (lap + sp.diags(k * k * pen_flat))).tocsc()
        self.mass = 2.0 * np.pi * self.m_flat

        inter_flat = inter.ravel()
        axis_col = np.zeros((nz, nr), dtype=bool)
        axis_col[:, 0] = True
        axis_flat = axis_col.ravel()
        self.free0 = np.nonzero(inter_flat)[0]
        self.free12 = np.nonzero(inter_flat & ~axis_flat)[0]


_MDISC_CACHE: dict[int, _MeridianDisc] = {}


def _mdisc_for(geom: CylinderGeometry) -> _MeridianDisc:
    key = id(geom)
    d = _MDISC_CACHE.get(key)
    if d is None:
        d = _MeridianDisc(geom)
        if len(_MDISC_CACHE) > 8:
            _MDISC_CACHE.clear()
        _MDISC_CACHE[key] = d
    return d


def _problem_for(field: MeridianField, lam: float) -> descent.Problem:
    geom = field.geom
    d = _mdisc_for(geom)
    bf0, bf1, bf2 = field.f0.copy(), field.f1.copy(), field.f2.copy()
    dir_mask = geom.dirichlet
    axis = np.zeros_like(dir_mask)
    axis[:, 0] = True
    nz, nr = geom.nz, geom.nr

    def project(v0, v1, v2):
        v0 = v0.reshape(nz, nr)
        v1 = v1.reshape(nz, nr)
        v2 = v2.reshape(nz, nr)
        v0[dir_mask] = bf0[dir_mask]
        v1[dir_mask] = bf1[dir_mask]
        v2[dir_mask] = bf2[dir_mask]
        v1[axis] = 0.0
        v2[axis] = 0.0
        # Unit norm on the axis forces the trace values +/-1.
        v0[:, 0] = np.where(v0[:, 0] >= 0, 1.0, -1.0)
        v0[dir_mask] = bf0[dir_mask]
        return v0.ravel(), v1.ravel(), v2.ravel()

    axis_flat = np.nonzero(geom.interior[:, 0])[0] * nr
    return descent.Problem(
        stiff=(d.stiff[0], d.stiff[1], d.stiff[2]),
        mass=d.mass,
        free=(d.free0, d.free12, d.free12),
        project=project,
        lam=lam,
        snap_nodes=axis_flat,
    )


def meridian_energy(field: MeridianField, lam: float):
    """(total, dirichlet, potential); total = dirichlet + lam * potential."""
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    field.validate()
    p = _problem_for(field, 0.0)
    f0 = field.f0.ravel()
    f1 = field.f1.ravel()
    f2 = field.f2.ravel()
    dirichlet = descent.energy(p, f0, f1, f2)
    w = (1.0 - beta_arrays(f0, f1, f2)) / (3.0 * SQRT6)
    potential = float(np.sum(p.mass * w))
    return dirichlet + lam * potential, dirichlet, potential


# ---------------------------------------------------------------------------
# Seeds and minimization.
# ---------------------------------------------------------------------------


@dataclass
class SingularityRecord:
    position: float
    jump: tuple[int, int]


@dataclass
class MinResult3D:
    field: MeridianField
    energy: float
    dirichlet: float
    potential: float
    residual: float
    iterations: int
    converged: bool
    singularities: list[SingularityRecord]
    classification: str
    beta_min: float
    beta_max: float
    seed_name: str = ""


def seed_field(geom: CylinderGeometry, lam: float, kind: str,
               opts: SolveOptions | None = None) -> MeridianField:
    """'split-seed' (vertical extension of the 2D class-S minimizer) or
    'torus-seed' (constant E0 interior), glued to the homeotropic layer."""
    bf0, bf1, bf2 = homeotropic_data(geom)
    f0 = np.ones((geom.nz, geom.nr))
    f1 = np.zeros((geom.nz, geom.nr), dtype=complex)
    f2 = np.zeros((geom.nz, geom.nr), dtype=complex)
    if kind == "torus-seed":
        pass
    elif kind == "split-seed":
        lam2d = lam * geom.ell**2
        res = minimize_2d(lam2d, "S", "uS", opts or SolveOptions(), grid=uniform_grid(513))
        prof = res.profile
        s = np.clip(geom.r / geom.ell, 0.0, 1.0)
        p0 = np.interp(s, prof.grid, prof.f0)
        p1 = np.interp(s, prof.grid, prof.f1.real) + 1j * np.interp(s, prof.grid, prof.f1.imag)
        p2 = np.interp(s, prof.grid, prof.f2.real) + 1j * np.interp(s, prof.grid, prof.f2.imag)
        nr_ = np.sqrt(p0**2 + np.abs(p1) ** 2 + np.abs(p2) ** 2)
        f0[:] = (p0 / nr_)[None, :]
        f1[:] = (p1 / nr_)[None, :]
        f2[:] = (p2 / nr_)[None, :]
    else:
        raise ValueError(f"unknown seed kind {kind!r}")
    dm = geom.dirichlet
    f0[dm], f1[dm], f2[dm] = bf0[dm], bf1[dm], bf2[dm]
    f1[:, 0] = 0.0
    f2[:, 0] = 0.0
    f0[:, 0] = np.where(f0[:, 0] >= 0, 1.0, -1.0)
    f0[dm], f1[dm], f2[dm] = bf0[dm], bf1[dm], bf2[dm]
    fld = MeridianField(geom, f0, f1, f2)
    return fld


def el_residual_3d(field: MeridianField, lam: float) -> float:
    """Mass-weighted L2 residual of the meridian EL system at interior nodes."""
    g = field.geom
    d = _mdisc_for(g)
    p = _problem_for(field, lam)
    g0, g1, g2 = descent.riemannian_gradient(
        p, field.f0.ravel(), field.f1.ravel(), field.f2.ravel()
    )
    total = sum(float(np.sum(p.mass * np.abs(gg) ** 2)) for gg in (g0, g1, g2))
    return math.sqrt(total / float(np.sum(p.mass)))


def interp_field(src: MeridianField, geom: CylinderGeometry, lam: float = 0.0) -> MeridianField:
    """Bilinear transfer of a field onto another grid of the same cylinder."""
    sg = src.geom

    def interp(arr):
        re = _bilinear(sg.z, sg.r, arr.real, geom.z, geom.r)
        if np.iscomplexobj(arr):
            return re + 1j * _bilinear(sg.z, sg.r, arr.imag, geom.z, geom.r)
        return re

    f0 = interp(src.f0)
    f1 = interp(src.f1)
    f2 = interp(src.f2)
    n = np.sqrt(f0**2 + np.abs(f1) ** 2 + np.abs(f2) ** 2)
    n = np.where(n > 1e-9, n, 1.0)
    f0, f1, f2 = f0 / n, f1 / n, f2 / n
    bf0, bf1, bf2 = homeotropic_data(geom)
    dm = geom.dirichlet
    f0[dm], f1[dm], f2[dm] = bf0[dm], bf1[dm], bf2[dm]
    f1[:, 0] = 0.0
    f2[:, 0] = 0.0
    f0[:, 0] = np.where(f0[:, 0] >= 0, 1.0, -1.0)
    f0[dm], f1[dm], f2[dm] = bf0[dm], bf1[dm], bf2[dm]
    return MeridianField(geom, f0, f1, f2)


def _bilinear(zs, rs, arr, z_new, r_new):
    iz = np.clip(np.searchsorted(zs, z_new) - 1, 0, zs.size - 2)
    jr = np.clip(np.searchsorted(rs, r_new) - 1, 0, rs.size - 2)
    tz = (z_new - zs[iz]) / (zs[iz + 1] - zs[iz])
    tr = (r_new - rs[jr]) / (rs[jr + 1] - rs[jr])
    tz = np.clip(tz, 0.0, 1.0)[:, None]
    tr = np.clip(tr, 0.0, 1.0)[None, :]
    a = arr[np.ix_(iz, jr)]
    b = arr[np.ix_(iz + 1, jr)]
    c = arr[np.ix_(iz, jr + 1)]
    d = arr[np.ix_(iz + 1, jr + 1)]
    return (
        a * (1 - tz) * (1 - tr)
        + b * tz * (1 - tr)
        + c * (1 - tz) * tr
        + d * tz * tr
    )


def minimize_3d(
    geom: CylinderGeometry,
    lam: float,
    init: MeridianField | str = "split-seed",
    opts: SolveOptions | None = None,
) -> MinResult3D:
    """Projected gradient descent for the meridian energy; monotone.

    init is a MeridianField or one of the named seeds.  With opts.cascade
    the descent first runs on a twice-coarser mask and transfers the
    result.  Returns the field with its energy split, residual, axis
    trace singularity list, and torus/split classification.
    """
    opts = opts or SolveOptions()
    seed_name = init if isinstance(init, str) else "custom"
    if isinstance(init, str) and opts.cascade:
        coarse = build_geometry(geom.h, geom.ell, geom.rho, target_h=2.0 * geom.hr)
        pre = minimize_3d(
            coarse,
            lam,
            seed_field(coarse, lam, init, opts),
            replace(opts, cascade=False, max_iters=max(500, opts.max_iters // 3)),
        )
        init = interp_field(pre.field, geom, lam)
    elif isinstance(init, str):
        init = seed_field(geom, lam, init, opts)
    init.validate()
    problem = _problem_for(init, lam)
    dopts = descent.DescentOptions(
        step=opts.step,
        max_iters=opts.max_iters,
        grad_tol=opts.grad_tol,
        energy_tol=opts.energy_tol,
        stepper=opts.stepper,
        verbose=opts.verbose,
    )
    fields, iters, converged = descent.descend(
        problem,
        (init.f0.ravel(), init.f1.ravel(), init.f2.ravel()),
        dopts,
    )
    nz, nr = geom.nz, geom.nr
    out = MeridianField(
        geom,
        fields[0].reshape(nz, nr),
        fields[1].reshape(nz, nr),
        fields[2].reshape(nz, nr),
    )
    total, dirichlet, potential = meridian_energy(out, lam)
    sing = detect_singularities(out)
    cls = "Split" if sing else "Torus"
    beta = out.beta()[geom.active]
    return MinResult3D(
        field=out,
        energy=total,
        dirichlet=dirichlet,
        potential=potential,
        residual=el_residual_3d(out, lam),
        iterations=iters,
        converged=converged,
        singularities=sing,
        classification=cls,
        beta_min=float(np.min(beta)),
        beta_max=float(np.max(beta)),
        seed_name=seed_name,
    )


# ---------------------------------------------------------------------------
# Axis trace, singularities, classification.
# ---------------------------------------------------------------------------


class UnresolvedAxisError(RuntimeError):
    """The axis trace is ambiguous over a span; refine the grid."""


def axis_trace(field: MeridianField, threshold: float = 0.9):
    """(z values, f0 values, tags) along the axis; tags are +/-1 or 0."""
    g = field.geom
    act = g.active[:, 0]
    zs = g.z[act]
    vals = field.f0[act, 0]
    tags = np.where(np.abs(vals) > threshold, np.sign(vals).astype(int), 0)
    return zs, vals, tags


def detect_singularities(
    field: MeridianField, threshold: float = 0.9, max_unresolved_span: int = 3
) -> list[SingularityRecord]:
    """Sign changes of the axis trace, positioned by linear interpolation.

    A run of more than max_unresolved_span consecutive untagged nodes
    without a sign change raises UnresolvedAxisError.
    """
    zs, vals, tags = axis_trace(field, threshold)
    records: list[SingularityRecord] = []
    tagged = np.nonzero(tags != 0)[0]
    if tagged.size == 0:
        raise UnresolvedAxisError("no resolved axis values at all")
    # Untagged margins at the ends count as unresolved spans.
    if tagged[0] > max_unresolved_span or (zs.size - 1 - tagged[-1]) > max_unresolved_span:
        raise UnresolvedAxisError("unresolved axis region at the axis ends")
    for a, b in zip(tagged[:-1], tagged[1:]):
        gap = b - a - 1
        if tags[a] == tags[b]:
            if gap > max_unresolved_span:
                raise UnresolvedAxisError(
                    f"unresolved axis region of {gap} nodes near z={zs[a]:.3f}"
                )
            continue
        # Genuine sign change: locate the zero crossing of f0 inside.
        seg_z = zs[a : b + 1]
        seg_v = vals[a : b + 1]
        pos = None
        for i in range(seg_v.size - 1):
            if seg_v[i] == 0.0:
                pos = float(seg_z[i])
                break
            if seg_v[i] * seg_v[i + 1] < 0:
                t = seg_v[i] / (seg_v[i] - seg_v[i + 1])
                pos = float(seg_z[i] + t * (seg_z[i + 1] - seg_z[i]))
                break
        if pos is None:
            pos = float(0.5 * (seg_z[0] + seg_z[-1]))
        records.append(SingularityRecord(pos, (int(tags[a]), int(tags[b]))))
    return records


def classify(field: MeridianField, ring_eps: float = 1e-2):
    """'Split' iff the axis trace has singularities, else 'Torus'.

    Torus results also report the deep-biaxiality ring: the connected
    off-axis region where beta < -1 + ring_eps (None when absent).
    """
    sing = detect_singularities(field)
    if sing:
        return "Split", sing, None
    g = field.geom
    beta = field.beta()
    deep = (beta <= -1.0 + ring_eps) & g.interior
    deep[:, 0] = False
    if not np.any(deep):
        return "Torus", [], None
    # Connected components by flood fill; keep those avoiding the axis.
    labels = _label_components(deep)
    best = None
    for lab in range(1, labels.max() + 1):
        cells = np.nonzero(labels == lab)
        rmin = g.r[cells[1].min()]
        if rmin <= g.hr / 2:
            continue
        ring = {
            "r_range": (float(g.r[cells[1].min()]), float(g.r[cells[1].max()])),
            "z_range": (float(g.z[cells[0].min()]), float(g.z[cells[0].max()])),
            "cells": int(cells[0].size),
        }
        if best is None or ring["cells"] > best["cells"]:
            best = ring
    return "Torus", [], best


def _label_components(mask: np.ndarray) -> np.ndarray:
    labels = np.zeros(mask.shape, dtype=int)
    cur = 0
    for i0, j0 in zip(*np.nonzero(mask)):
        if labels[i0, j0]:
            continue
        cur += 1
        stack = [(i0, j0)]
        labels[i0, j0] = cur
        while stack:
            i, j = stack.pop()
            for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                a, b = i + di, j + dj
                if (
                    0 <= a < mask.shape[0]
                    and 0 <= b < mask.shape[1]
                    and mask[a, b]
                    and not labels[a, b]
                ):
                    labels[a, b] = cur
                    stack.append((a, b))
    return labels


# ---------------------------------------------------------------------------
# Energy identities (Pohozaev-type diagnostics).
# ---------------------------------------------------------------------------


def _row_full(geom: CylinderGeometry, i: int) -> bool:
    return bool(np.all(geom.active[i, :]))


def _slice_energy_2d(field: MeridianField, i: int, lam: float) -> float:
    """2D energy of the horizontal slice at row i over the disc D_ell."""
    g = field.geom
    r = g.r
    w = np.empty_like(r)
    w[0] = (r[1] - r[0]) / 2
    w[-1] = (r[-1] - r[-2]) / 2
    w[1:-1] = (r[2:] - r[:-2]) / 2
    out = 0.0
    for k, f in enumerate((field.f0[i].astype(complex), field.f1[i], field.f2[i])):
        df = np.gradient(f, r, edge_order=2)
        dens = np.abs(df) ** 2
        if k:
            dens[1:] += (k * k) * np.abs(f[1:]) ** 2 / r[1:] ** 2
        out += float(np.sum(w * r * dens))
    wpot = 2.0 * lam * (1.0 - beta_arrays(field.f0[i], field.f1[i], field.f2[i])) / (3.0 * SQRT6)
    out += float(np.sum(w * r * wpot))
    return np.pi * out


def _dz_row(field: MeridianField, i: int):
    """Central z-derivatives of (f0, f1, f2) along row i."""
    hz = field.geom.hz
    out = []
    for f in (field.f0, field.f1, field.f2):
        out.append((f[i + 1, :] - f[i - 1, :]) / (2.0 * hz))
    return out


def _vertical_lhs(field: MeridianField, lam: float, t: float) -> tuple[float, float]:
    g = field.geom
    i = int(round((t + g.h) / g.hz))
    if not (0 < i < g.nz - 1 and _row_full(g, i)):
        raise ValueError(f"slice at x3={t} is not an interior full row")
    e2d = _slice_energy_2d(field, i, lam)
    d0, d1, d2 = _dz_row(field, i)
    dens = np.abs(d0) ** 2 + np.abs(d1) ** 2 + np.abs(d2) ** 2
    r = g.r
    w = np.empty_like(r)
    w[0] = (r[1] - r[0]) / 2
    w[-1] = (r[-1] - r[-2]) / 2
    w[1:-1] = (r[2:] - r[:-2]) / 2
    dz_term = 2.0 * np.pi * float(np.sum(w * r * dens))
    return e2d, dz_term


def vertical_identity_residual(field: MeridianField, lam: float, t1: float, t2: float) -> float:
    """Relative mismatch of the vertical energy identity between two slices."""
    e1, dz1 = _vertical_lhs(field, lam, t1)
    e2, dz2 = _vertical_lhs(field, lam, t2)
    lhs = e1 - 0.5 * dz1
    rhs = e2 - 0.5 * dz2
    return abs(lhs - rhs) / max(abs(e1), abs(e2), 1e-12)


def _wall_j(geom: CylinderGeometry) -> int:
    return geom.nr - 1


def _wall_normal_derivative(field: MeridianField):
    """One-sided second-order d/dr of (f0, f1, f2) at the lateral wall."""
    g = field.geom
    hr = g.hr
    j = _wall_j(g)
    out = []
    for f in (field.f0, field.f1, field.f2):
        out.append((3.0 * f[:, j] - 4.0 * f[:, j - 1] + f[:, j - 2]) / (2.0 * hr))
    return out


def horizontal_identity_residual(field: MeridianField, lam: float, s: float) -> float:
    """Relative mismatch of the horizontal energy identity at height s."""
    g = field.geom
    if not (0 < s <= g.h - g.rho):
        raise ValueError("need 0 < s <= h - rho")
    i_lo = int(round((-s + g.h) / g.hz))
    i_hi = int(round((s + g.h) / g.hz))
    ell = g.ell
    dn0, dn1, dn2 = _wall_normal_derivative(field)
    dn2sum = np.abs(dn0) ** 2 + np.abs(dn1) ** 2 + np.abs(dn2) ** 2
    rows = np.arange(i_lo, i_hi + 1)
    wz = np.full(rows.size, g.hz)
    wz[0] = wz[-1] = g.hz / 2
    # |grad_tan Q_b|^2 = 3/ell^2 on the wall; W(Q_b) = 0 there.
    wall_term = 2.0 * np.pi * ell**2 * float(
        np.sum(wz * (1.5 / ell**2 - 0.5 * dn2sum[rows]))
    )

    # Volume term over the interior cylinder rows.
    r = g.r
    wr = np.empty_like(r)
    wr[0] = (r[1] - r[0]) / 2
    wr[-1] = (r[-1] - r[-2]) / 2
    wr[1:-1] = (r[2:] - r[:-2]) / 2
    vol = 0.0
    for i in rows:
        d0, d1, d2 = _dz_row(field, i)
        dens = np.abs(d0) ** 2 + np.abs(d1) ** 2 + np.abs(d2) ** 2
        dens = dens + 2.0 * lam * (
            1.0 - beta_arrays(field.f0[i], field.f1[i], field.f2[i])
        ) / (3.0 * SQRT6)
        vol += float(np.sum(wr * r * dens)) * (wz[i - i_lo])
    vol *= 2.0 * np.pi

    # Cap term: (x'.grad_x' Q) : dQ/dn over the two horizontal caps.
    cap = 0.0
    for i, sign in ((i_hi, +1.0), (i_lo, -1.0)):
        d0z, d1z, d2z = _dz_row(field, i)
        acc = np.zeros_like(r)
        for f, dz in (
            (field.f0[i].astype(complex), d0z.astype(complex)),
            (field.f1[i], d1z),
            (field.f2[i], d2z),
        ):
            dr = np.gradient(f, r, edge_order=2)
            acc += (dr * np.conj(dz)).real
        cap += sign * 2.0 * np.pi * float(np.sum(wr * r * r * acc))
    lhs = wall_term
    rhs = vol + cap
    return abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-12)


def _ball_mask(geom: CylinderGeometry, radius: float):
    rr = geom.r[None, :] ** 2 + geom.z[:, None] ** 2
    return (rr < radius**2) & geom.interior


def _energy_density(field: MeridianField, lam: float):
    """Pointwise 1/2 |grad Q|^2 + lam W on interior nodes (np.gradient based)."""
    g = field.geom
    dens = np.zeros((g.nz, g.nr))
    for k, f in enumerate((field.f0.astype(complex), field.f1, field.f2)):
        dr = np.gradient(f, g.r, axis=1, edge_order=2)
        dz = np.gradient(f, g.z, axis=0, edge_order=2)
        dens += 0.5 * (np.abs(dr) ** 2 + np.abs(dz) ** 2)
        if k:
            with np.errstate(divide="ignore", invalid="ignore"):
                pen = (k * k) * np.abs(f) ** 2 / g.r[None, :] ** 2
            pen[:, 0] = 0.0
            dens += 0.5 * pen
    dens += lam * (1.0 - beta_arrays(field.f0, field.f1, field.f2)) / (3.0 * SQRT6)
    return dens


def _vol_weights(g: CylinderGeometry) -> np.ndarray:
    return g.hr * g.hz * np.broadcast_to(g.r[None, :], (g.nz, g.nr))


def energy_in_ball(field: MeridianField, lam: float, radius: float, z0: float = 0.0) -> float:
    g = field.geom
    rr = g.r[None, :] ** 2 + (g.z[:, None] - z0) ** 2
    mask = (rr < radius**2) & g.interior
    dens = _energy_density(field, lam)
    vol = _vol_weights(g)
    return 2.0 * np.pi * float(np.sum(dens[mask] * vol[mask]))


def energy_in_cylinder(field: MeridianField, lam: float, r_max: float, z_max: float) -> float:
    g = field.geom
    mask = (g.r[None, :] < r_max) & (np.abs(g.z[:, None]) < z_max) & g.interior
    dens = _energy_density(field, lam)
    vol = _vol_weights(g)
    return 2.0 * np.pi * float(np.sum(dens[mask] * vol[mask]))


def radial_monotonicity(field: MeridianField, lam: float, radii) -> np.ndarray:
    """(1/r) E_lam(Q, Omega cap B_r) sampled at the given radii."""
    return np.array([energy_in_ball(field, lam, r) / r for r in radii])


def radial_identity_residual(
    field: MeridianField, lam: float, r1: float, r2: float, n_quad: int = 48
) -> float:
    """Relative mismatch of the radial energy identity between r1 < r2.

    Valid for ell <= r1 < r2 <= h - rho on a cigar-type geometry.
    """
    g = field.geom
    if not (g.ell <= r1 < r2 <= g.h - g.rho):
        raise ValueError("need ell <= r1 < r2 <= h - rho")
    dens = _energy_density(field, lam)
    vol = _vol_weights(g)
    rr = np.sqrt(g.r[None, :] ** 2 + g.z[:, None] ** 2)

    def e_ball(radius):
        m = (rr < radius) & g.interior
        return 2.0 * np.pi * float(np.sum(dens[m] * vol[m]))

    # Radial-derivative volume term.
    dr_ = [np.gradient(f, g.r, axis=1, edge_order=2) for f in (field.f0.astype(complex), field.f1, field.f2)]
    dz_ = [np.gradient(f, g.z, axis=0, edge_order=2) for f in (field.f0.astype(complex), field.f1, field.f2)]
    er = g.r[None, :] / np.where(rr > 0, rr, 1.0)
    ez = g.z[:, None] / np.where(rr > 0, rr, 1.0)
    rad2 = sum(np.abs(er * a + ez * b) ** 2 for a, b in zip(dr_, dz_))
    shell = (rr >= r1) & (rr < r2) & g.interior
    mid_term = 2.0 * np.pi * float(np.sum((rad2 / np.where(rr > 0, rr, 1.0))[shell] * vol[shell]))

    # Potential double integral.
    wdens = lam * (1.0 - beta_arrays(field.f0, field.f1, field.f2)) / (3.0 * SQRT6)
    radii = np.linspace(r1, r2, n_quad)
    wq = np.full(n_quad, (r2 - r1) / (n_quad - 1))
    wq[0] = wq[-1] = wq[0] / 2
    pot_term = 0.0
    wall_term = 0.0
    dn0, dn1, dn2 = _wall_normal_derivative(field)
    dn2sum = np.abs(dn0) ** 2 + np.abs(dn1) ** 2 + np.abs(dn2) ** 2
    for rad, wgt in zip(radii, wq):
        m = (rr < rad) & g.interior
        pot_term += wgt / rad**2 * 2.0 * np.pi * float(np.sum((2.0 * wdens)[m] * vol[m]))
        # Lateral wall portion inside B_rad: |z| < sqrt(rad^2 - ell^2).
        zmax = math.sqrt(max(rad**2 - g.ell**2, 0.0))
        rows = np.abs(g.z) < zmax
        integrand = 1.5 / g.ell**2 - 0.5 * dn2sum[rows]
        wall_term += wgt / rad**2 * 2.0 * np.pi * g.ell**2 * float(np.sum(integrand) * g.hz)
    lhs = e_ball(r1) / r1 + mid_term + pot_term
    rhs = e_ball(r2) / r2 + wall_term
    return abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-12)


def energy_identity_residuals(
    field: MeridianField,
    lam: float,
    r1: float | None = None,
    r2: float | None = None,
    s: float | None = None,
    t1: float = 0.0,
    t2: float | None = None,
):
    """(radial, horizontal, vertical) relative residuals with sane defaults."""
    g = field.geom
    sing_z = [rec.position for rec in detect_singularities(field)]

    def clear_of_sing(t):
        return all(abs(t - zs) > 4 * g.hz for zs in sing_z)

    out = {}
    if g.h - g.rho > g.ell:
        r1 = r1 if r1 is not None else g.ell * 1.05
        r2 = r2 if r2 is not None else (g.h - g.rho) * 0.95
        out["radial"] = radial_identity_residual(field, lam, r1, r2)
    else:
        out["radial"] = math.nan
    s = s if s is not None else (g.h - g.rho) * 0.8
    out["horizontal"] = horizontal_identity_residual(field, lam, s)
    if t2 is None:
        t2 = (g.h - g.rho) * 0.5
    if clear_of_sing(t1) and clear_of_sing(t2):
        out["vertical"] = vertical_identity_residual(field, lam, t1, t2)
    else:
        out["vertical"] = math.nan
    return out


# ---------------------------------------------------------------------------
# Synthetic tangent-map field and the instability quadratic form.
# ---------------------------------------------------------------------------


def tangent_map_field(geom: CylinderGeometry, z0: float) -> MeridianField:
    """Degree-zero tangent map centered at (0, 0, z0) in f-coordinates.

    f = ((z - z0)/s, r/s, 0) with s = |x - p|; the boundary layer keeps
    the same values (this is a diagnostic field, not an admissible one).
    """
    g = geom
    rr = g.r[None, :] * np.ones((g.nz, 1))
    zz = g.z[:, None] * np.ones((1, g.nr)) - z0
    s = np.sqrt(rr**2 + zz**2)
    if np.min(s) < 1e-9 * min(g.hr, g.hz):
        raise ValueError("center coincides with a grid node; shift z0")
    f0 = zz / s
    f1 = (rr / s).astype(complex)
    f2 = np.zeros_like(f1)
    f1[:, 0] = 0.0
    f0[:, 0] = np.sign(f0[:, 0])
    return MeridianField(g, f0, f1, f2)


@dataclass
class EtaSpec:
    """Radial test profile: s^-a (1-s)^b on [s_min, 1), linear below s_min.

    The linear continuation to 0 keeps the profile W^{1,2} and contributes
    negatively to the Hardy deficit, so small s_min is harmless.
    """

    a: float = 0.49
    b: float = 2.0
    s_min: float = 0.1

    def __post_init__(self):
        if not (0.0 <= self.a < 1.5 and self.b >= 1.0 and 0.0 < self.s_min < 0.5):
            raise ValueError("need 0 <= a < 1.5, b >= 1, 0 < s_min < 1/2")

    def _core(self, s):
        return s ** (-self.a) * (1.0 - s) ** self.b

    def value(self, s):
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        mid = (s >= self.s_min) & (s < 1.0)
        scl = np.where(mid, s, 0.5)
        out = np.where(mid, self._core(scl), out)
        low = (s > 0.0) & (s < self.s_min)
        out = np.where(low, self._core(self.s_min) * s / self.s_min, out)
        return out

    def derivative(self, s):
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        mid = (s >= self.s_min) & (s < 1.0)
        scl = np.where(mid, s, 0.5)
        dcore = self._core(scl) * (-self.a / scl - self.b / (1.0 - scl))
        out = np.where(mid, dcore, out)
        low = (s > 0.0) & (s < self.s_min)
        out = np.where(low, self._core(self.s_min) / self.s_min, out)
        return out

    def hardy_deficit(self, n: int = 20000) -> float:
        """4 pi int (eta'^2 - 2 eta^2 / s^2) s^2 ds; must be negative."""
        s = np.linspace(1e-9, 1.0 - 1e-9, n)
        e = self.value(s)
        de = self.derivative(s)
        integrand = (de**2 - 2.0 * e**2 / s**2) * s**2
        return 4.0 * np.pi * float(np.trapezoid(integrand, s))


def instability_form(
    field: MeridianField,
    lam: float,
    p_z: float,
    r_ball: float,
    eta: EtaSpec | None = None,
    vbar: complex = 1.0 + 0.0j,
    n_phi: int = 32,
    fd_step: float = 1e-4,
) -> float:
    """Second variation along Phi(x) = r^-1/2 eta(|x-p|/r) vbar, vbar in L2.

    Evaluates int |grad Phi_T|^2 - |grad Q|^2 |Phi_T|^2
    + lam D^2W(Q) Phi_T : Phi_T over the ball by meridian quadrature with
    an exact phi reduction (the integrand is a trigonometric polynomial).
    Raises if eta fails the Hardy-deficit admissibility check or the ball
    pokes out of the domain.
    """
    eta = eta or EtaSpec()
    deficit = eta.hardy_deficit()
    if not deficit < 0.0:
        raise ValueError(f"test function not admissible: Hardy deficit {deficit:.4g} >= 0")
    g = field.geom
    vb = vbar / abs(vbar)
    rr = g.r[None, :] * np.ones((g.nz, 1))
    zz = g.z[:, None] * np.ones((1, g.nr))
    s_dist = np.sqrt(rr**2 + (zz - p_z) ** 2) / r_ball
    ball = s_dist < 1.0
    if np.any(ball & ~g.interior):
        raise ValueError("ball B_r(p) exceeds the domain; reduce r")
    supp = ball & (rr > 0)  # axis nodes carry zero volume weight
    if not np.any(supp):
        raise ValueError("support contains no interior nodes; increase r or refine")

    gval = r_ball ** (-0.5) * eta.value(s_dist)
    gprm = r_ball ** (-1.5) * eta.derivative(s_dist)
    with np.errstate(invalid="ignore", divide="ignore"):
        es_r = rr / (s_dist * r_ball)
        es_z = (zz - p_z) / (s_dist * r_ball)
    # grad g = eta' * unit radial direction about p (no phi component).
    ggrad_r = gprm * es_r
    ggrad_z = gprm * es_z

    # Meridian derivatives of f2 and |grad Q|^2.
    dfr = [np.gradient(f, g.r, axis=1, edge_order=2) for f in (field.f0.astype(complex), field.f1, field.f2)]
    dfz = [np.gradient(f, g.z, axis=0, edge_order=2) for f in (field.f0.astype(complex), field.f1, field.f2)]
    gradsq = np.zeros((g.nz, g.nr))
    for k in range(3):
        gradsq += np.abs(dfr[k]) ** 2 + np.abs(dfz[k]) ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        pen = (np.abs(field.f1) ** 2 + 4.0 * np.abs(field.f2) ** 2) / rr**2
    pen[:, 0] = 0.0
    gradsq += pen

    idx = np.nonzero(supp)
    f0v = field.f0[idx]
    f1v = field.f1[idx]
    f2v = field.f2[idx]
    d2r = dfr[2][idx]
    d2z = dfz[2][idx]
    rv = rr[idx]
    vol = 2.0 * np.pi / n_phi * g.hr * g.hz * rv
    phis = np.arange(n_phi) * 2.0 * np.pi / n_phi

    total = 0.0
    for phi in phis:
        ph1 = np.exp(1j * phi)
        ph2 = np.exp(2j * phi)
        w = (f2v * ph2 * np.conj(vb)).real
        dw_r = (d2r * ph2 * np.conj(vb)).real
        dw_z = (d2z * ph2 * np.conj(vb)).real
        dw_phi = (2j * f2v * ph2 * np.conj(vb)).real / rv
        gv = gval[idx]
        ggr = ggrad_r[idx]
        ggz = ggrad_z[idx]
        grad_g_sq = ggr**2 + ggz**2
        gg_dot_gw = ggr * dw_r + ggz * dw_z
        grad_w_sq = dw_r**2 + dw_z**2 + dw_phi**2
        phi_t_sq = gv**2 * (1.0 - w**2)
        term = (
            (1.0 - w**2) * grad_g_sq
            - 2.0 * gv * w * gg_dot_gw
            + gv**2 * grad_w_sq
            + gv**2 * w**2 * gradsq[idx]
        )
        term = term - gradsq[idx] * phi_t_sq
        if lam != 0.0:
            # Second difference of the 0-homogeneous potential along Phi_T.
            u5 = np.stack(
                [
                    f0v,
                    (f1v * ph1).real,
                    (f1v * ph1).imag,
                    (f2v * ph2).real,
                    (f2v * ph2).imag,
                ],
                axis=-1,
            )
            v5 = np.zeros_like(u5)
            v5[:, 3] = vb.real
            v5[:, 4] = vb.imag
            pt5 = gv[:, None] * (v5 - w[:, None] * u5)
            wplus = _w_homog(u5 + fd_step * pt5)
            wmid = _w_homog(u5)
            wminus = _w_homog(u5 - fd_step * pt5)
            term = term + lam * (wplus - 2.0 * wmid + wminus) / fd_step**2
        total += float(np.sum(term * vol))
    return total


def _w_homog(u5: np.ndarray) -> np.ndarray:
    """Degree-zero homogeneous reduced potential on stacked real-5 vectors."""
    u0 = u5[..., 0]
    u1 = u5[..., 1] + 1j * u5[..., 2]
    u2 = u5[..., 3] + 1j * u5[..., 4]
    n = np.sqrt(u0**2 + np.abs(u1) ** 2 + np.abs(u2) ** 2)
    b = u0 * (u0**2 + 1.5 * np.abs(u1) ** 2 - 3.0 * np.abs(u2) ** 2) + 1.5 * np.sqrt(
        3.0
    ) * (u1**2 * np.conj(u2)).real
    return (1.0 - b / n**3) / (3.0 * SQRT6)
