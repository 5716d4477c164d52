"""Equations and numerical fluxes: scalar advection, 2D Euler, and the
axisymmetric Euler system written as a source-term extension.

Euler states are (..., 4) arrays of conservative variables
[rho, rho*u, rho*v, E] with p = (gamma - 1)(E - rho |v|^2 / 2).  A state is
admissible when both density and pressure are strictly positive.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .reconstruction import PositivityError

GAMMA_DEFAULT = 1.4

UPWIND = "upwind"
LLF = "llf"
HLLC = "hllc"
FLUXES = (UPWIND, LLF, HLLC)


@dataclass
class EulerState:
    """A single Euler state with derived primitive quantities."""

    rho: float
    u: float
    v: float
    E: float
    gamma: float = GAMMA_DEFAULT

    @classmethod
    def from_primitive(cls, rho, u, v, p, gamma=GAMMA_DEFAULT) -> "EulerState":
        E = p / (gamma - 1.0) + 0.5 * rho * (u * u + v * v)
        return cls(rho, u, v, E, gamma)

    @classmethod
    def from_conservative(cls, U, gamma=GAMMA_DEFAULT) -> "EulerState":
        rho, mx, my, E = (float(x) for x in U)
        return cls(rho, mx / rho, my / rho, E, gamma)

    @property
    def conservative(self) -> np.ndarray:
        return np.array([self.rho, self.rho * self.u, self.rho * self.v, self.E])

    @property
    def p(self) -> float:
        return (self.gamma - 1.0) * (
            self.E - 0.5 * self.rho * (self.u**2 + self.v**2)
        )

    @property
    def sound_speed(self) -> float:
        return float(np.sqrt(self.gamma * self.p / self.rho))

    @property
    def admissible(self) -> bool:
        return self.rho > 0.0 and self.p > 0.0


def primitive(U: np.ndarray, gamma: float = GAMMA_DEFAULT):
    """(rho, u, v, p) arrays from conservative (..., 4) states."""
    rho = U[..., 0]
    u = U[..., 1] / rho
    v = U[..., 2] / rho
    p = (gamma - 1.0) * (U[..., 3] - 0.5 * rho * (u * u + v * v))
    return rho, u, v, p


def conservative(rho, u, v, p, gamma: float = GAMMA_DEFAULT) -> np.ndarray:
    out = np.empty(np.broadcast(rho, u, v, p).shape + (4,))
    out[..., 0] = rho
    out[..., 1] = rho * u
    out[..., 2] = rho * v
    out[..., 3] = p / (gamma - 1.0) + 0.5 * rho * (u * u + v * v)
    return out


def pressure(U: np.ndarray, gamma: float = GAMMA_DEFAULT) -> np.ndarray:
    return primitive(U, gamma)[3]


def is_admissible(U: np.ndarray, gamma: float = GAMMA_DEFAULT) -> np.ndarray:
    """Elementwise membership in the admissible set (rho > 0 and p > 0)."""
    rho = U[..., 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        p = pressure(U, gamma)
    return (rho > 0.0) & (p > 0.0)


def in_admissible_closure(U: np.ndarray) -> np.ndarray:
    """Closure membership in polynomial form (no division): rho >= 0 and
    rho E - |m|^2 / 2 >= 0.  The zero state passes."""
    rho = U[..., 0]
    q = rho * U[..., 3] - 0.5 * (U[..., 1] ** 2 + U[..., 2] ** 2)
    return (rho >= 0.0) & (q >= 0.0)


def require_admissible(U: np.ndarray, gamma: float, where: str) -> None:
    ok = is_admissible(U, gamma)
    if not ok.all():
        bad = int(np.nonzero(~np.asarray(ok).ravel())[0][0])
        raise PositivityError(f"{where}: state {bad} left the admissible set")


def max_wave_speed(U: np.ndarray, gamma: float = GAMMA_DEFAULT) -> float:
    """max(|v| + c) over the given states."""
    rho, u, v, p = primitive(U, gamma)
    c = np.sqrt(gamma * p / rho)
    return float((np.sqrt(u * u + v * v) + c).max(initial=0.0))


def euler_flux(U: np.ndarray, n: np.ndarray, gamma: float = GAMMA_DEFAULT):
    """Directional physical flux F(U) . n for (..., 4) states."""
    rho, u, v, p = primitive(U, gamma)
    vn = u * n[..., 0] + v * n[..., 1]
    out = np.empty_like(U)
    out[..., 0] = rho * vn
    out[..., 1] = rho * u * vn + p * n[..., 0]
    out[..., 2] = rho * v * vn + p * n[..., 1]
    out[..., 3] = (U[..., 3] + p) * vn
    return out


def scalar_upwind_flux(u_minus, u_plus, n, velocity):
    """Upwind flux for linear advection: (v.n) times the upwind trace."""
    vn = velocity[..., 0] * n[..., 0] + velocity[..., 1] * n[..., 1]
    return vn * np.where(vn >= 0.0, u_minus, u_plus)


def llf_flux(U_minus, U_plus, n, a, gamma: float = GAMMA_DEFAULT):
    """Lax-Friedrichs flux with dissipation speed a (one constant for all
    faces keeps the positivity argument intact)."""
    fm = euler_flux(U_minus, n, gamma)
    fp = euler_flux(U_plus, n, gamma)
    return 0.5 * (fm + fp) - 0.5 * a * (U_plus - U_minus)


def hllc_flux(U_minus, U_plus, n, gamma: float = GAMMA_DEFAULT):
    """Three-wave HLLC flux with Roe-averaged Einfeldt wave speeds."""
    rl, ul, vl, pl = primitive(U_minus, gamma)
    rr, ur, vr, pr = primitive(U_plus, gamma)
    nx, ny = n[..., 0], n[..., 1]
    unl = ul * nx + vl * ny
    unr = ur * nx + vr * ny
    cl = np.sqrt(gamma * pl / rl)
    cr = np.sqrt(gamma * pr / rr)

    # Roe averages for the Einfeldt speed estimates.
    sl_ = np.sqrt(rl)
    sr_ = np.sqrt(rr)
    w = sl_ / (sl_ + sr_)
    u_roe = w * ul + (1.0 - w) * ur
    v_roe = w * vl + (1.0 - w) * vr
    hl = (U_minus[..., 3] + pl) / rl
    hr = (U_plus[..., 3] + pr) / rr
    h_roe = w * hl + (1.0 - w) * hr
    q2 = u_roe * u_roe + v_roe * v_roe
    c_roe = np.sqrt(np.maximum((gamma - 1.0) * (h_roe - 0.5 * q2), 1e-300))
    un_roe = u_roe * nx + v_roe * ny

    S_L = np.minimum(unl - cl, un_roe - c_roe)
    S_R = np.maximum(unr + cr, un_roe + c_roe)
    if not (np.isfinite(S_L).all() and np.isfinite(S_R).all()):
        raise PositivityError("HLLC wave-speed estimate is not finite")

    dl = rl * (S_L - unl)
    dr = rr * (S_R - unr)
    S_M = (pr - pl + unl * dl - unr * dr) / (dl - dr)
    p_star = pl + dl * (S_M - unl)

    def star(U, r, un, p, S, S_M):
        fac = r * (S - un) / (S - S_M)
        out = np.empty_like(U)
        out[..., 0] = fac
        out[..., 1] = fac * (U[..., 1] / r + (S_M - un) * nx)
        out[..., 2] = fac * (U[..., 2] / r + (S_M - un) * ny)
        out[..., 3] = fac * (
            U[..., 3] / r + (S_M - un) * (S_M + p / (r * (S - un)))
        )
        return out

    FL = euler_flux(U_minus, n, gamma)
    FR = euler_flux(U_plus, n, gamma)
    with np.errstate(divide="ignore", invalid="ignore"):
        UsL = star(U_minus, rl, unl, pl, S_L, S_M)
        UsR = star(U_plus, rr, unr, pr, S_R, S_M)
        FsL = FL + S_L[..., None] * (UsL - U_minus)
        FsR = FR + S_R[..., None] * (UsR - U_plus)

    cond_L = (S_L >= 0.0)[..., None]
    cond_sL = (S_M >= 0.0)[..., None]
    cond_sR = (S_R >= 0.0)[..., None]
    return np.where(cond_L, FL, np.where(cond_sL, FsL, np.where(cond_sR, FsR, FR)))


def mirror_state(U: np.ndarray, n: np.ndarray) -> np.ndarray:
    """Reflect the velocity about the wall plane with normal n."""
    vn = U[..., 1] * n[..., 0] + U[..., 2] * n[..., 1]
    out = U.copy()
    out[..., 1] -= 2.0 * vn * n[..., 0]
    out[..., 2] -= 2.0 * vn * n[..., 1]
    return out


def axisymmetric_terms(U: np.ndarray, position: np.ndarray, gamma=GAMMA_DEFAULT):
    """Fluxes and source of the radius-weighted axisymmetric Euler system.

    With the radius-weighted state (r rho, r rho u, r rho v, r E) the flux
    functions coincide with the plain Euler fluxes (they are homogeneous of
    degree one), and the source is (0, p, 0, 0) with p the physical
    pressure, i.e. the pressure of U divided by the radius.
    """
    r = np.asarray(position, dtype=float)[..., 0]
    if np.any(r < 0.0):
        raise ValueError("axisymmetric radius must be non-negative")
    ex = np.zeros(U.shape[:-1] + (2,))
    ex[..., 0] = 1.0
    ey = np.zeros_like(ex)
    ey[..., 1] = 1.0
    f = euler_flux(U, ex, gamma)
    g = euler_flux(U, ey, gamma)
    s = np.zeros_like(U)
    s[..., 1] = pressure(U, gamma) / r
    return f, g, s
