"""Inverse problems: wavenumber sets, decomposition checks, and synthesis
of the forcing profiles that realize a prescribed linear term.

The wavenumber machinery guarantees that every unordered pair of base
wavenumbers has a distinct sum (a Sidon set) with no base element
divisible by 5, so the resonance map (j, l) -> k_j + k_l is injective and
all the inverse linear systems decouple.

The control of M works through exponential moments.  For the critical-
mode shapes the M kernels reduce to

    z_ij  = y^2 [(k_j + 2k_i) + 2 k_i^2 y - 2 k_i^2 k_j y^2] e^{-(k_i+k_j) y},
    zt_ij = y^2 [(k_j - 2k_i) + 2 k_i (k_j - k_i) y] e^{-(k_i+k_j) y},

so prescribing the moments V^{(p)}_{n,m} = int y^{2+p} e^{-my} u_n dy with
V^{(2)} = 0 and zeroing the sum-slot moments turns every entry of M into a
2x2 linear solve per unordered pair (one scalar equation on the diagonal).
"""
from __future__ import annotations

from dataclasses import dataclass, field
import json

import numpy as np
from numpy.polynomial import legendre

from .grid import Grid, make_grid
from .profile import TemperatureProfile
from .reduction import FourierProfileSet, ModeBasis, compute_M, zeta_profiles

__all__ = [
    "WavenumberSet",
    "ControlSolution",
    "ControlError",
    "sidon_set",
    "extended_set",
    "verify_decomposition",
    "solve_moment_targets",
    "moment_profile",
    "build_u1",
    "g1_from_u1",
    "control_solve",
]


class ControlError(ValueError):
    pass


# ---------------------------------------------------------------------------
# wavenumber sets
# ---------------------------------------------------------------------------

def sidon_set(p: int) -> list[int]:
    """Base wavenumbers with pairwise-distinct sums, none divisible by 5.

    Inductive rule: seed {1, 7}; extend by the smallest odd integer that
    exceeds every existing pairwise sum and is not a multiple of 5.
    """
    if p < 1:
        raise ControlError("p must be a positive integer")
    base = [1] if p == 1 else [1, 7]
    while len(base) < p:
        cand = max(a + b for a in base for b in base) + 1
        if cand % 2 == 0:
            cand += 1
        while cand % 5 == 0:
            cand += 2
        base.append(cand)
        _check_sidon(base)
    _check_sidon(base)
    return base


def _check_sidon(base) -> None:
    sums = {}
    for i in range(len(base)):
        for j in range(i, len(base)):
            s = base[i] + base[j]
            if s in sums:
                raise ControlError(f"pairwise sums collide: {s}")
            sums[s] = (i, j)
    if any(b % 5 == 0 for b in base):
        raise ControlError("base element divisible by 5")


@dataclass(frozen=True)
class WavenumberSet:
    """Base Sidon wavenumbers plus all unordered pairwise sums.

    full = base followed by the sorted sums; sumIndex maps the unordered
    base pair (j, l) (0-based) to the index of k_j + k_l in full.
    """

    p: int
    base: tuple[int, ...]
    full: tuple[int, ...]
    sum_index: dict = field(hash=False)

    @property
    def N(self) -> int:
        return len(self.full)

    def index_of_sum(self, j: int, l: int) -> int:
        return self.sum_index[(min(j, l), max(j, l))]

    def validate(self) -> None:
        _check_sidon(self.base)
        if len(set(self.full)) != len(self.full):
            raise ControlError("extended set has repeated entries")
        if self.N != self.p + self.p * (self.p + 1) // 2:
            raise ControlError("wrong extended-set size")
        pair_map = {}
        for i in range(self.N):
            for j in range(i, self.N):
                key = (abs(self.full[j] - self.full[i]), self.full[i] + self.full[j])
                if key in pair_map:
                    raise ControlError("pair map (|k_j-k_i|, k_j+k_i) not injective")
                pair_map[key] = (i, j)


def extended_set(p: int) -> WavenumberSet:
    base = sidon_set(p)
    sums = sorted(base[j] + base[l] for j in range(p) for l in range(j, p))
    full = tuple(base) + tuple(sums)
    sum_index = {}
    for j in range(p):
        for l in range(j, p):
            sum_index[(j, l)] = full.index(base[j] + base[l])
    ws = WavenumberSet(p=p, base=tuple(base), full=full, sum_index=sum_index)
    ws.validate()
    return ws


def verify_decomposition(K: np.ndarray, kset: WavenumberSet,
                         rhs: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    """Solve sum_i K_{i j l} chi_i = b_{jl} over the fast indices.

    The Sidon structure makes the system block-diagonal: each unordered
    (j, l) couples to the single fast index with k = k_j + k_l.  Raises if
    the wavenumber set violates the mod-5 condition (the resonant
    coefficient is then not guaranteed nonzero) or if a resonant
    coefficient vanishes numerically.
    """
    p = kset.p
    N = kset.N
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape != (p, p):
        raise ControlError("rhs must be p x p")
    for kj in kset.base:
        for kl in kset.base:
            if kj == 5 * kl:
                raise ControlError(
                    f"decomposition violated: base pair ({kj},{kl}) with k_j = 5 k_l "
                    "makes the resonant coefficient vanish")
    pairs = [(j, l) for j in range(p) for l in range(j, p)]
    A = np.zeros((len(pairs), N - p))
    b = np.zeros(len(pairs))
    for row, (j, l) in enumerate(pairs):
        for i in range(p, N):
            A[row, i - p] = K[i, j, l]
        b[row] = 0.5 * (rhs[j, l] + rhs[l, j])
        diag = K[kset.index_of_sum(j, l), j, l]
        if abs(diag) < 1e-12 * max(1.0, np.max(np.abs(K))):
            raise ControlError(f"vanishing resonant coefficient at pair ({j},{l})")
    chi = np.linalg.solve(A, b)
    resid = np.max(np.abs(A @ chi - b))
    if resid > tol * max(1.0, np.max(np.abs(b))):
        raise ControlError(f"decomposition residual {resid:.2e} exceeds tolerance")
    return chi


# ---------------------------------------------------------------------------
# moment machinery
# ---------------------------------------------------------------------------

def moment_profile(targets: dict, h: float, n_quad: int = 500,
                   basis_factor: int = 6, reg: float = 1e-12,
                   atol: float = 1e-8) -> np.ndarray:
    """Least-norm W with prescribed moments int y^p e^{-my} W dy = a_{m,p}.

    targets maps (m, p) to the desired value; the (m, p) pairs must be
    distinct.  W is expanded over bump functions y^2 (h-y)^2 times shifted
    Legendre polynomials (so W and W' vanish at both ends), with
    basis_factor times as many members as constraints; the least-norm
    coefficients come from the regularized normal equations.  Returns the
    Legendre coefficient vector wrapped in a callable-friendly form; use
    eval_profile to sample it.
    """
    items = sorted(targets.items())
    if len({mp for mp, _ in items}) != len(items):
        raise ControlError("moment targets must have distinct (m, p) pairs")
    ncon = len(items)
    nb = max(basis_factor * ncon, 8)
    g = make_grid(h, n_quad, alpha=2.5)
    y = g.nodes
    bump = (y**2) * (h - y) ** 2
    # Legendre argument mapped exponentially: the moment functionals are
    # concentrated at y = O(1), where a polynomial in y/h has no resolution
    t = 1.0 - 2.0 * np.exp(-y)
    B = np.array([bump * legendre.legval(t, [0] * q + [1]) for q in range(nb)])
    A = np.zeros((ncon, nb))
    for row, ((m, pexp), _) in enumerate(items):
        wfun = y**pexp * np.exp(-m * y)
        A[row] = B @ (g.weights * wfun)
    a = np.array([v for _, v in items])
    # row equilibration evens out the wildly different exponential-moment
    # scales; the minimum-norm solve is taken by SVD (the regularized
    # normal equations bias the solution once the Gram matrix gets stiff)
    row_scale = np.linalg.norm(A, axis=1)
    if np.min(row_scale) <= 0:
        raise ControlError("degenerate moment functional")
    As = A / row_scale[:, None]
    ash = a / row_scale
    sv = np.linalg.svd(As, compute_uv=False)
    if sv[0] / max(sv[-1], 1e-300) > 1e13:
        raise ControlError("nearly dependent moment functionals; enlarge basis")
    rcond = max(reg, 1e-13)
    coeffs, *_ = np.linalg.lstsq(As, ash, rcond=rcond)
    for _ in range(3):     # iterative refinement against the stiff scales
        resid = ash - As @ coeffs
        if np.max(np.abs(resid)) < 1e-12:
            break
        coeffs = coeffs + np.linalg.lstsq(As, resid, rcond=rcond)[0]
    achieved = A @ coeffs
    err = np.max(np.abs(achieved - a))
    if err > atol * max(1.0, np.max(np.abs(a))) + 1e-10:
        raise ControlError(f"moment targets missed by {err:.2e}")
    return coeffs


def eval_profile(coeffs: np.ndarray, h: float, y) -> np.ndarray:
    """Sample the bump-basis profile at points y."""
    y = np.asarray(y, dtype=float)
    bump = (y**2) * (h - y) ** 2
    t = 1.0 - 2.0 * np.exp(-y)
    return bump * legendre.legval(t, coeffs)


# ---------------------------------------------------------------------------
# control of M
# ---------------------------------------------------------------------------

def _normalizers(basis: ModeBasis):
    """Per-(i,j) amplitude of the sampled z-kernels against the closed forms.

    For the closed-form basis the projection recovers the exact amplitude
    products; for a numeric basis it is the best L2 fit.
    """
    N = basis.size
    g = basis.grid
    y = g.nodes
    q = np.zeros((N, N))
    for i in range(N):
        for j in range(N):
            ki, kj = basis.wavenumbers[i], basis.wavenumbers[j]
            zeta, _ = zeta_profiles(i, j, basis)
            eta = (y**2 * ((kj + 2 * ki) + 2 * ki**2 * y - 2 * ki**2 * kj * y**2)
                   * np.exp(-(ki + kj) * y))
            q[i, j] = g.integrate(zeta * eta) / g.integrate(eta * eta)
    return q


@dataclass
class ControlSolution:
    target: np.ndarray
    moment_targets: dict
    profiles: FourierProfileSet
    coeffs: dict
    u0: float
    gamma: float
    achieved: np.ndarray | None = None

    def to_json(self, grid: Grid) -> str:
        prof = {str(n): [[float(y), float(v)] for y, v in
                         zip(grid.nodes, vals)]
                for n, vals in self.profiles.entries.items()}
        doc = {"T": self.target.tolist(), "profiles": prof,
               "u0": self.u0, "gamma": self.gamma}
        if self.achieved is not None:
            doc["achieved_M"] = self.achieved.tolist()
        return json.dumps(doc, sort_keys=True)


def solve_moment_targets(T: np.ndarray, kset_full, normalizers: np.ndarray):
    """Moment values X=V^(0), Y=V^(1) per unordered index pair achieving T.

    Off-diagonal pairs solve the ordered 2x2 system

        (k_j + 2 k_i) X + 2 k_i^2 Y = Tbar_ij,
        (k_i + 2 k_j) X + 2 k_j^2 Y = Tbar_ji,

    (determinant 2(k_j-k_i)(k_i^2+3k_ik_j+k_j^2) != 0); the diagonal uses
    the single equation 3 k X = Tbar with Y fixed to 0.  V^(2) moments and
    all sum-slot moments are zeroed as side conditions.
    """
    T = np.asarray(T, dtype=float)
    N = len(kset_full)
    if T.shape != (N, N):
        raise ControlError("target matrix must be N x N")
    out = {}
    for i in range(N):
        for j in range(i, N):
            ki, kj = kset_full[i], kset_full[j]
            dif, sig = abs(kj - ki), ki + kj
            if i == j:
                tbar = T[i, i] / normalizers[i, i]
                X = tbar / (3.0 * ki)
                Y = 0.0
            else:
                tij = 2.0 * T[i, j] / normalizers[i, j]
                tji = 2.0 * T[j, i] / normalizers[j, i]
                A = np.array([[(kj + 2.0 * ki), 2.0 * ki**2],
                              [(ki + 2.0 * kj), 2.0 * kj**2]])
                det = np.linalg.det(A)
                if abs(det) < 1e-10:
                    raise ControlError(f"singular moment block at pair ({i},{j})")
                X, Y = np.linalg.solve(A, [tij, tji])
            out[(dif, sig)] = {"X": float(X), "Y": float(Y), "pair": (i, j)}
    return out


def build_u1(moments: dict, h: float) -> dict:
    """Per-slot bump-basis coefficients of u1 from the moment targets.

    Slot n = |k_j - k_i| carries (X, Y, 0) at exponent m = k_i + k_j;
    slot n = k_i + k_j carries zero moments at m = n (suppressing the
    sum-slot kernels).  A slot shared by several pairs accumulates all its
    (m, p) constraints; slots constrained to zero only are dropped (the
    least-norm profile is identically zero).
    """
    slot_targets: dict[int, dict] = {}
    for (dif, sig), rec in moments.items():
        st = slot_targets.setdefault(dif, {})
        for pexp, val in ((2, rec["X"]), (3, rec["Y"]), (4, 0.0)):
            key = (sig, pexp)
            if key in st and abs(st[key] - val) > 1e-12:
                raise ControlError("conflicting moment assignments")
            st[key] = val
        stz = slot_targets.setdefault(sig, {})
        for pexp in (2, 3, 4):
            stz.setdefault((sig, pexp), 0.0)
    coeffs = {}
    for n, targets in sorted(slot_targets.items()):
        if all(abs(v) < 1e-300 for v in targets.values()):
            continue
        # the binding accuracy gate for the control chain is the achieved-M
        # report; the per-slot moment check is a looser sanity guard here
        coeffs[n] = moment_profile(targets, h, atol=1e-6)
    return coeffs


def g1_from_u1(u1: FourierProfileSet, grid: Grid, profile: TemperatureProfile,
               u0: float, gamma: float):
    """Exact inversion g1 = -u1 / ((U - u0) + gamma u1).

    Returns a sampler g1(x) -> values on the grid nodes (x scalar or
    array); requires u0 > sup |U| so the denominator stays away from zero.
    """
    sup_u = profile.sup_abs_u()
    if u0 <= sup_u:
        raise ControlError("need u0 > sup |U|")
    uy = profile.u(grid.nodes)
    m = len(grid.nodes)

    def u1_at(x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.zeros((len(x), m))
        for n, prof in u1.entries.items():
            out += np.cos(n * x)[:, None] * prof[None, :]
        return out

    def g1(x):
        u1v = u1_at(x)
        den = (uy - u0)[None, :] + gamma * u1v
        if np.min(np.abs(den)) < 1e-8 * (abs(u0) + sup_u):
            raise ControlError("g1 denominator within tolerance of zero; enlarge u0")
        return np.squeeze(-u1v / den)

    g1.u1_at = u1_at
    return g1


def control_solve(T: np.ndarray, basis: ModeBasis, kset: WavenumberSet,
                  profile: TemperatureProfile, u0: float | None = None,
                  gamma: float | None = None) -> ControlSolution:
    """End-to-end synthesis of u1 achieving M(u1) = T over the basis."""
    g = basis.grid
    q = _normalizers(basis)
    moments = solve_moment_targets(T, basis.wavenumbers, q)
    coeffs = build_u1(moments, g.h)
    profiles = FourierProfileSet(
        {n: eval_profile(c, g.h, g.nodes) for n, c in coeffs.items()})
    achieved = compute_M(profiles, basis)
    p = profile.params
    if u0 is None:
        u0 = 2.0 * profile.sup_abs_u() + 1.0
    if gamma is None:
        gamma = p.gamma
    return ControlSolution(target=np.asarray(T, dtype=float),
                           moment_targets=moments, profiles=profiles,
                           coeffs=coeffs, u0=float(u0), gamma=float(gamma),
                           achieved=achieved)
