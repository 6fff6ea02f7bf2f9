"""Reduced quadratic-system coefficients over a biorthogonal mode basis.

The Galerkin reduction of the perturbed convection dynamics onto the mode
set {e_j} produces dX/dt = K(X) + M X + f with

    M_ij = < {psi_j, theta*_i}, u1 >,     K_ijl = -M_ij(theta_l) + O(1/nu),
    f_i  = < theta*_i, eta1 >,

where {f, g} = f_x g_y - f_y g_x.  With psi_j = Psi_j(y) sin(k_j x) and
theta-parts on cos(k x), the x-integrals collapse to the resonant Fourier
slots: writing u1 = sum_n u_n(y) cos(n x),

    M_ij = q_ij [ int zt_ij u_{k_i+k_j} dy + int z_ij u_{|k_i-k_j|} dy ],

with z/zt the plus/minus combinations of k_j Psi_j dTheta*_i and
k_i dPsi_j Theta*_i, q_ij = 1/2 off the diagonal; the |k_i-k_j| = 0 slot
pairs with u_0 at weight 1 (inner product normalized to (2/pi) per unit
x-interval so matched cosines integrate to the plain y-integral).

The basis may be either the closed-form critical-mode shapes (default;
the design-level objects) or numerically computed pencil modes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import json

import numpy as np

from .grid import Grid
from .profile import ScaleParams, TemperatureProfile
from .spectral import (ModeBasis, SpectralError, biorthogonalize,
                       solve_conjugate_modes, solve_modes, assemble_pencil)

__all__ = [
    "FourierProfileSet",
    "ReducedSystem",
    "asymptotic_profiles",
    "asymptotic_basis",
    "numeric_basis",
    "zeta_profiles",
    "compute_M",
    "compute_K",
    "compute_f",
    "eta_for_f",
    "paper_resonant_factor",
]


@dataclass
class FourierProfileSet:
    """Map from cosine index n >= 0 to a sampled y-profile; missing n is 0."""

    entries: dict[int, np.ndarray] = field(default_factory=dict)

    def get(self, n: int, size: int) -> np.ndarray:
        return self.entries.get(n, np.zeros(size))

    def __setitem__(self, n: int, prof: np.ndarray):
        if not np.all(np.isfinite(prof)):
            raise ValueError("profile must be finite")
        self.entries[int(n)] = prof

    def scaled(self, c: float) -> "FourierProfileSet":
        return FourierProfileSet({n: c * v for n, v in self.entries.items()})

    def plus(self, other: "FourierProfileSet") -> "FourierProfileSet":
        out = dict(self.entries)
        for n, v in other.entries.items():
            out[n] = out.get(n, 0.0) + v
        return FourierProfileSet(out)


# ---------------------------------------------------------------------------
# bases
# ---------------------------------------------------------------------------

def asymptotic_profiles(k: int, params: ScaleParams, grid: Grid):
    """Leading-order critical-mode shapes sampled on the grid.

    Psi = y^2 e^{-ky}; Theta = amp (e^{-by} - e^{-ky}) with the layer
    transfer amplitude amp = 2|C_U|(1+3r) beta/(beta+k); Theta* =
    (k y^2 + y) e^{-ky} with unit slope at the wall (the conjugate scale is
    fixed afterwards by biorthogonality).
    """
    y = grid.nodes
    b, r, beta = params.b, params.r, params.beta
    psi = y**2 * np.exp(-k * y)
    amp = 2.0 * abs(params.C_U) * (1.0 + 3.0 * r) * beta / (beta + k)
    theta = amp * (np.exp(-b * y) - np.exp(-k * y))
    thetastar = (k * y**2 + y) * np.exp(-k * y)
    return psi, theta, thetastar


def _asym_derivatives(k: int, params: ScaleParams, grid: Grid):
    y = grid.nodes
    dpsi = (2.0 * y - k * y**2) * np.exp(-k * y)
    # d/dy (k y^2 + y) e^{-ky} = (1 + 2ky - k(k y^2 + y)) e^{-ky}
    dthetastar = (1.0 + 2.0 * k * y - k * (k * y**2 + y)) * np.exp(-k * y)
    return dpsi, dthetastar


def asymptotic_basis(wavenumbers, params: ScaleParams, grid: Grid,
                     orthonormalize: bool = True) -> ModeBasis:
    """Closed-form mode basis over the wavenumber set, biorthogonalized."""
    ks = tuple(int(k) for k in wavenumbers)
    psi, dpsi, theta, thetastar, dthetastar = [], [], [], [], []
    for k in ks:
        P, Th, Ts = asymptotic_profiles(k, params, grid)
        dP, dTs = _asym_derivatives(k, params, grid)
        psi.append(P)
        dpsi.append(dP)
        theta.append(Th)
        thetastar.append(Ts)
        dthetastar.append(dTs)
    basis = ModeBasis(wavenumbers=ks, grid=grid, psi=psi, dpsi=dpsi,
                      theta=theta, thetastar=thetastar, dthetastar=dthetastar)
    if orthonormalize:
        basis = biorthogonalize(basis)
    return basis


def numeric_basis(wavenumbers, profile: TemperatureProfile, grid: Grid,
                  orthonormalize: bool = True) -> ModeBasis:
    """Basis from the leading pencil modes and their adjoints."""
    ks = tuple(int(k) for k in wavenumbers)
    psi, dpsi, theta, thetastar, dthetastar, phi = [], [], [], [], [], []
    Dy = grid.diff
    for k in ks:
        pen = assemble_pencil(k, profile, grid)
        mode = solve_modes(k, pen, halfplane=np.inf, nev=1, refine=False)[0]
        conj = solve_conjugate_modes(k, profile, grid, nev=4)
        cm = min(conj, key=lambda c: abs(c.lam - mode.lam))
        if abs(cm.lam - mode.lam) > 1e-6 * max(1.0, abs(mode.lam)):
            raise SpectralError("adjoint eigenvalue does not match the direct one")
        psi.append(np.real(mode.psi))
        dpsi.append(np.real(Dy @ mode.psi))
        theta.append(np.real(mode.w))
        thetastar.append(np.real(cm.wtilde))
        dthetastar.append(np.real(Dy @ cm.wtilde))
        phi.append(np.real(cm.phi))
    basis = ModeBasis(wavenumbers=ks, grid=grid, psi=psi, dpsi=dpsi,
                      theta=theta, thetastar=thetastar,
                      dthetastar=dthetastar, phi=phi)
    if orthonormalize:
        basis = biorthogonalize(basis)
    return basis


# ---------------------------------------------------------------------------
# quadratures
# ---------------------------------------------------------------------------

def zeta_profiles(i: int, j: int, basis: ModeBasis):
    """(zeta_ij, zeta~_ij): the difference- and sum-slot y-kernels of M."""
    ki = basis.wavenumbers[i]
    kj = basis.wavenumbers[j]
    zeta = (kj * basis.psi[j] * basis.dthetastar[i]
            + ki * basis.dpsi[j] * basis.thetastar[i])
    zeta_t = (kj * basis.psi[j] * basis.dthetastar[i]
              - ki * basis.dpsi[j] * basis.thetastar[i])
    return zeta, zeta_t


def _slot_weight(delta: int) -> float:
    return 1.0 if delta == 0 else 0.5


def compute_M(u1: FourierProfileSet, basis: ModeBasis) -> np.ndarray:
    """M_ij = <{psi_j, theta*_i}, u1> via the resonant Fourier slots."""
    N = basis.size
    g = basis.grid
    m = len(g.nodes)
    M = np.zeros((N, N))
    for i in range(N):
        for j in range(N):
            ki, kj = basis.wavenumbers[i], basis.wavenumbers[j]
            zeta, zeta_t = zeta_profiles(i, j, basis)
            sig = ki + kj
            dif = abs(ki - kj)
            val = 0.5 * g.integrate(zeta_t * u1.get(sig, m))
            val += _slot_weight(dif) * g.integrate(zeta * u1.get(dif, m))
            M[i, j] = val
    return M


def compute_M_2d(u1: FourierProfileSet, basis: ModeBasis, nx: int = 256) -> np.ndarray:
    """Independent 2-D tensor-grid evaluation of <{psi_j, theta*_i}, u1>.

    Trapezoid in x over [0, pi] with the (2/pi) normalization; used as the
    oracle for compute_M.
    """
    g = basis.grid
    m = len(g.nodes)
    x = np.linspace(0.0, np.pi, nx)
    N = basis.size
    u1_xy = np.zeros((nx, m))
    for n, prof in u1.entries.items():
        u1_xy += np.cos(n * x)[:, None] * prof[None, :]
    M = np.zeros((N, N))
    for i in range(N):
        for j in range(N):
            ki, kj = basis.wavenumbers[i], basis.wavenumbers[j]
            # {psi_j, theta*_i} = k_j Psi_j dTheta*_i cos(k_j x)cos(k_i x)
            #                    + k_i dPsi_j Theta*_i sin(k_j x)sin(k_i x)
            fy1 = kj * basis.psi[j] * basis.dthetastar[i]
            fy2 = ki * basis.dpsi[j] * basis.thetastar[i]
            fx1 = np.cos(kj * x) * np.cos(ki * x)
            fx2 = np.sin(kj * x) * np.sin(ki * x)
            integrand = fx1[:, None] * fy1[None, :] + fx2[:, None] * fy2[None, :]
            integrand = integrand * u1_xy
            trap = getattr(np, "trapezoid", np.trapz)
            ix = trap(integrand, x, axis=0)
            M[i, j] = (2.0 / np.pi) * g.integrate(ix)
    return M


def compute_K(basis: ModeBasis, nu: float, symmetrize: bool = True,
              sparsity_tol: float = 1e-3, include_velocity: bool = False):
    """K_ijl = -M_ij(theta_l), symmetrized over (j, l).

    Only Fourier-resonant triples are populated; the sparsity of the rest
    is reported (not projected).  include_velocity adds the conjugate
    stream contribution (an O(1/nu) correction) when the basis carries phi.
    """
    N = basis.size
    K = np.zeros((N, N, N))
    for l in range(N):
        kl = basis.wavenumbers[l]
        u1 = FourierProfileSet({kl: basis.theta[l]})
        K[:, :, l] = -compute_M(u1, basis)
    if include_velocity and basis.phi is not None:
        K += _velocity_contribution(basis)
    if symmetrize:
        K = 0.5 * (K + np.swapaxes(K, 1, 2))
    ks = basis.wavenumbers
    resonant = np.zeros((N, N, N), dtype=bool)
    for i in range(N):
        for j in range(N):
            for l in range(N):
                si, sj, sl = ks[i], ks[j], ks[l]
                resonant[i, j, l] = (si == sj + sl) or (si == abs(sj - sl))
    kmax_res = np.max(np.abs(K[resonant])) if resonant.any() else 0.0
    off = np.abs(K[~resonant]).max() if (~resonant).any() else 0.0
    info = {"max_resonant": float(kmax_res), "max_nonresonant": float(off),
            "sparsity_ok": bool(off <= sparsity_tol * max(kmax_res, 1e-300))}
    return K, info


def _velocity_contribution(basis: ModeBasis) -> np.ndarray:
    """<{psi_j, psi-velocity of e_l}, v*_i>-type cross terms, O(1/nu)."""
    N = basis.size
    g = basis.grid
    Dy = g.diff
    out = np.zeros((N, N, N))
    for i in range(N):
        if basis.phi is None:
            break
        dphi = Dy @ basis.phi[i]
        for j in range(N):
            for l in range(N):
                ki, kj, kl = (basis.wavenumbers[m] for m in (i, j, l))
                if ki != kj + kl and ki != abs(kj - kl):
                    continue
                # velocity advection term (v_j . grad) v_l projected on v*_i;
                # scale is ||phi|| = O(1/nu), kept only as a cross-check.
                term = (kj * basis.psi[j] * (Dy @ (Dy @ basis.psi[l]))
                        - kl * basis.dpsi[j] * (Dy @ basis.psi[l]))
                out[i, j, l] = -0.25 * g.integrate(term * dphi)
    return out


def compute_f(eta1: FourierProfileSet, basis: ModeBasis) -> np.ndarray:
    """f_i = <theta*_i, eta1>: the k_i cosine slot against Theta*_i."""
    g = basis.grid
    m = len(g.nodes)
    return np.array([g.integrate(basis.thetastar[i] * eta1.get(basis.wavenumbers[i], m))
                     for i in range(basis.size)])


def eta_for_f(f_target: np.ndarray, basis: ModeBasis) -> FourierProfileSet:
    """Inverse of compute_f: heat-source profiles achieving a target f."""
    g = basis.grid
    out = FourierProfileSet()
    for i, fi in enumerate(f_target):
        ts = basis.thetastar[i]
        norm = g.integrate(ts * ts)
        out[basis.wavenumbers[i]] = (fi / norm) * ts
    return out


def paper_resonant_factor(kj: int, kl: int) -> float:
    """Reference closed form J = 2 (2(kj+kl))^{-3} (kj - 5 kl)."""
    return 2.0 * (2.0 * (kj + kl)) ** (-3.0) * (kj - 5.0 * kl)


# ---------------------------------------------------------------------------
# reduced system container
# ---------------------------------------------------------------------------

@dataclass
class ReducedSystem:
    """The quadratic ODE data dX/dt = K(X) + M X + f over N modes."""

    N: int
    K: np.ndarray
    M: np.ndarray
    f: np.ndarray
    kset: tuple[int, ...]
    R0: float = 1.0

    def validate(self):
        if self.K.shape != (self.N, self.N, self.N):
            raise ValueError("K must be N x N x N")
        if not np.allclose(self.K, np.swapaxes(self.K, 1, 2), atol=1e-12):
            raise ValueError("K must be symmetric in its last two indices")

    def to_json(self) -> str:
        self.validate()
        doc = {"N": self.N, "kset": list(self.kset),
               "K": self.K.tolist(), "M": self.M.tolist(),
               "f": self.f.tolist(), "R0": self.R0}
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ReducedSystem":
        doc = json.loads(text)
        sys = cls(N=int(doc["N"]), K=np.array(doc["K"]), M=np.array(doc["M"]),
                  f=np.array(doc["f"]), kset=tuple(doc["kset"]),
                  R0=float(doc["R0"]))
        sys.validate()
        return sys
