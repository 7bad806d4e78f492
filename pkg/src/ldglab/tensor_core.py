"""Algebra of admissible Q-tensors and their R+C+C coordinates.

A liquid-crystal order parameter is a symmetric traceless 3x3 matrix Q.
The five-dimensional space of such matrices carries a distinguished
orthonormal basis (E0, E11, E12, E21, E22) splitting it into rotation
eigenspaces of degree 0, 1, 2 about the vertical axis, which identifies
Q with a point u = (u0, u1, u2) in R + C + C.  Everything downstream
(energies, Euler-Lagrange systems, descent) works in u-coordinates; the
matrix picture is kept around as an oracle.

Conventions:
  * beta(u) in [-1, 1] is the signed biaxiality sqrt(6) tr(Q^3)/|Q|^3;
    +1 is the positively uniaxial vacuum, -1 the negatively uniaxial
    disclination-core value.
  * The reduced potential on the unit sphere is
    W(u) = (1 - beta(u)) / (3 sqrt 6) >= 0, zero exactly on the vacuum
    manifold (an embedded RP^2).
  * All vectorized helpers accept arrays f0 (real), f1, f2 (complex) of
    a common shape and broadcast elementwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SQRT2 = np.sqrt(2.0)
SQRT3 = np.sqrt(3.0)
SQRT6 = np.sqrt(6.0)

#: Unit-norm tolerance accepted on entry by sphere-constrained operations.
UNIT_NORM_TOL = 1e-10

#: Symmetry/tracelessness tolerance accepted by q_to_u.
TENSOR_TOL = 1e-12

# Orthonormal basis of the admissible space, degree 0 / 1 / 2 blocks.
E0 = np.array([[-1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 2.0]]) / SQRT6
E11 = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]) / SQRT2
E12 = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0]]) / SQRT2
E21 = np.array([[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 0.0]]) / SQRT2
E22 = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]]) / SQRT2

BASIS = (E0, E11, E12, E21, E22)


@dataclass(frozen=True)
class UVector:
    """A point of R + C + C, the universal state of the model."""

    u0: float
    u1: complex
    u2: complex

    def norm_sq(self) -> float:
        return float(self.u0**2 + abs(self.u1) ** 2 + abs(self.u2) ** 2)

    def norm(self) -> float:
        return float(np.sqrt(self.norm_sq()))

    def as_real5(self) -> np.ndarray:
        """Real coordinates (u0, Re u1, Im u1, Re u2, Im u2)."""
        return np.array(
            [self.u0, self.u1.real, self.u1.imag, self.u2.real, self.u2.imag]
        )

    @staticmethod
    def from_real5(v) -> "UVector":
        v = np.asarray(v, dtype=float)
        return UVector(float(v[0]), complex(v[1], v[2]), complex(v[3], v[4]))

    def renormalized(self) -> "UVector":
        n = self.norm()
        if n == 0.0:
            raise ValueError("cannot renormalize the zero vector")
        return UVector(self.u0 / n, self.u1 / n, self.u2 / n)


def _require_unit(u: UVector, tol: float = UNIT_NORM_TOL) -> None:
    if abs(u.norm() - 1.0) > tol:
        raise ValueError(f"input must be unit norm within {tol}: |u| = {u.norm()!r}")


def u_to_q(u: UVector) -> np.ndarray:
    """Matrix of the isometric correspondence (symmetric, traceless)."""
    a = -u.u0 / SQRT3 + u.u2.real
    b = -u.u0 / SQRT3 - u.u2.real
    return (
        np.array(
            [
                [a, u.u2.imag, u.u1.real],
                [u.u2.imag, b, u.u1.imag],
                [u.u1.real, u.u1.imag, 2.0 * u.u0 / SQRT3],
            ]
        )
        / SQRT2
    )


def q_to_u(q: np.ndarray, tol: float = 1e-12) -> UVector:
    """Inverse of u_to_q; rejects non-symmetric or non-traceless input."""
    q = np.asarray(q, dtype=float)
    if q.shape != (3, 3):
        raise ValueError("expected a 3x3 matrix")
    if np.max(np.abs(q - q.T)) > tol:
        raise ValueError("matrix is not symmetric within tolerance")
    if abs(np.trace(q)) > tol:
        raise ValueError("matrix is not traceless within tolerance")
    u0 = float(np.sum(q * E0))
    u1 = complex(np.sum(q * E11), np.sum(q * E12))
    u2 = complex(np.sum(q * E21), np.sum(q * E22))
    return UVector(u0, u1, u2)


def det_q(u: UVector) -> float:
    """Determinant of the corresponding matrix, in closed form."""
    t = (2.0 * u.u0 / SQRT3) * (u.u0**2 / 3.0 + 0.5 * abs(u.u1) ** 2 - abs(u.u2) ** 2)
    return float((t + (u.u1**2 * np.conj(u.u2)).real) / (2.0 * SQRT2))


def beta_tilde(u: UVector) -> float:
    """Signed biaxiality sqrt(6) tr(Q^3)/|Q|^3; scale invariant, in [-1, 1]."""
    n = u.norm()
    if n == 0.0:
        raise ValueError("signed biaxiality is undefined at Q = 0")
    # tr(Q^3) = 3 det(Q) for traceless Q.
    return float(3.0 * SQRT6 * det_q(u) / n**3)


def potential_w(u: UVector) -> float:
    """Reduced potential W = (1 - beta)/(3 sqrt 6) on the unit sphere."""
    _require_unit(u)
    return (1.0 - beta_tilde(u)) / (3.0 * SQRT6)


def grad_w_tangential(u: UVector) -> UVector:
    """Tangential gradient of W at a unit vector; vanishes on the vacuum."""
    _require_unit(u)
    g0, g1, g2 = grad_w_tan_arrays(
        np.asarray(u.u0), np.asarray(u.u1, dtype=complex), np.asarray(u.u2, dtype=complex)
    )
    return UVector(float(g0), complex(g1), complex(g2))


# ---------------------------------------------------------------------------
# Vectorized field helpers (shared by the 1D and 2D solvers).
# ---------------------------------------------------------------------------


def beta_arrays(f0, f1, f2):
    """Signed biaxiality of unit-norm samples, elementwise.

    Equals f0 (f0^2 + 3/2 |f1|^2 - 3 |f2|^2) + (3 sqrt3 / 2) Re(f1^2 conj f2);
    valid for |f| = 1.
    """
    return f0 * (f0**2 + 1.5 * np.abs(f1) ** 2 - 3.0 * np.abs(f2) ** 2) + (
        1.5 * SQRT3
    ) * (f1**2 * np.conj(f2)).real


def potential_w_arrays(f0, f1, f2):
    """Reduced potential W of unit-norm samples, elementwise."""
    return (1.0 - beta_arrays(f0, f1, f2)) / (3.0 * SQRT6)


def grad_w_tan_arrays(f0, f1, f2):
    """Tangential gradient of W at unit-norm samples, elementwise.

    Components match the zero-order terms of the Euler-Lagrange systems:
        g0 = (|f2|^2 - f0^2 - |f1|^2/2 + beta f0) / sqrt6
        g1 = (-sqrt3 f2 conj(f1) - f0 f1 + beta f1) / sqrt6
        g2 = (-(sqrt3/2) f1^2 + 2 f0 f2 + beta f2) / sqrt6
    """
    beta = beta_arrays(f0, f1, f2)
    g0 = (np.abs(f2) ** 2 - f0**2 - 0.5 * np.abs(f1) ** 2 + beta * f0) / SQRT6
    g1 = (-SQRT3 * f2 * np.conj(f1) - f0 * f1 + beta * f1) / SQRT6
    g2 = (-(SQRT3 / 2.0) * f1**2 + 2.0 * f0 * f2 + beta * f2) / SQRT6
    return g0, g1, g2


def renormalize_arrays(f0, f1, f2):
    """Project samples to the unit sphere nodewise."""
    n = np.sqrt(f0**2 + np.abs(f1) ** 2 + np.abs(f2) ** 2)
    if np.any(n == 0.0):
        raise ValueError("cannot renormalize a zero sample")
    return f0 / n, f1 / n, f2 / n


# ---------------------------------------------------------------------------
# Degree-zero homogeneous extension (second-variation machinery).
# ---------------------------------------------------------------------------


def grad_w_homog(v: np.ndarray) -> np.ndarray:
    """Gradient of the 0-homogeneous extension of W, in real-5 coordinates.

    The extension W(v) = (1 - beta(v))/(3 sqrt6) with beta 0-homogeneous is
    what enters second variations: its gradient is automatically tangent on
    the unit sphere, where it coincides with grad_w_tangential.
    """
    v = np.asarray(v, dtype=float)
    u0 = v[0]
    u1 = complex(v[1], v[2])
    u2 = complex(v[3], v[4])
    n2 = u0**2 + abs(u1) ** 2 + abs(u2) ** 2
    if n2 == 0.0:
        raise ValueError("gradient undefined at 0")
    n = np.sqrt(n2)
    # Cubic form B(u) with beta = B/|u|^3.
    bval = u0 * (u0**2 + 1.5 * abs(u1) ** 2 - 3.0 * abs(u2) ** 2) + (1.5 * SQRT3) * (
        u1**2 * np.conj(u2)
    ).real
    db0 = 3.0 * u0**2 + 1.5 * abs(u1) ** 2 - 3.0 * abs(u2) ** 2
    db1 = 3.0 * u0 * u1 + 3.0 * SQRT3 * np.conj(u1) * u2
    db2 = -6.0 * u0 * u2 + (1.5 * SQRT3) * u1**2
    dbeta = (
        np.array([db0, db1.real, db1.imag, db2.real, db2.imag]) / n**3
        - 3.0 * bval * v / n**5
    )
    return -dbeta / (3.0 * SQRT6)


def hessian_w_homog(v: np.ndarray, step: float = 1e-6) -> np.ndarray:
    """5x5 Hessian of the 0-homogeneous W by central differences of its gradient."""
    v = np.asarray(v, dtype=float)
    h = np.zeros((5, 5))
    for j in range(5):
        e = np.zeros(5)
        e[j] = step
        h[:, j] = (grad_w_homog(v + e) - grad_w_homog(v - e)) / (2.0 * step)
    return 0.5 * (h + h.T)
