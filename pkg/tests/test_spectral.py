import numpy as np
import pytest

from obrealize.profile import DesignPolynomial, build_profile
from obrealize.reduction import numeric_basis
from obrealize.spectral import (SpectralError, assemble_pencil, biorthogonalize,
                                default_grid, semigroup_decay,
                                solve_conjugate_modes, solve_modes,
                                spectrum_report, _schur_operator)


def test_decoupled_heat_block(params30):
    """With U_y = 0 the temperature block reduces to the Robin Laplacian:
    eigenvalues -(k^2 + rho_m), checked against a bisection oracle for the
    smallest Robin mode."""
    from dataclasses import replace
    from scipy.optimize import brentq
    p = replace(params30, C_U=0.0, Cbar_U=1.0)
    prof = build_profile(p, DesignPolynomial.zero())
    assert float(np.max(np.abs(prof.u_y(np.linspace(0, p.h, 99))))) == 0.0
    grid = default_grid(prof, n=300)
    k = 1
    pen = assemble_pencil(k, prof, grid)
    A, _, _, _ = _schur_operator(pen)
    lam = np.linalg.eigvals(A)
    lead = np.sort(lam.real)[::-1][:3]
    # oracle: smallest rho >= 0 with sqrt(rho) tan/cot matching Robin data:
    # solutions of s cos(s h) (beta ... ) -- use the determinant of the
    # 2x2 boundary system for w = A cos(s y) + B sin(s y)
    beta, beta1, h = p.beta, prof.params.beta1, p.h

    def det(s):
        # w = A cos(sy) + B sin(sy); rows: w'(0) = beta w(0), w'(h) = beta1 w(h)
        return np.linalg.det(np.array([
            [-beta, s],
            [-s * np.sin(s * h) - beta1 * np.cos(s * h),
             s * np.cos(s * h) - beta1 * np.sin(s * h)]]))

    roots = []
    ss = np.linspace(1e-4, 1.0, 4000)
    vals = [det(s) for s in ss]
    for i in range(len(ss) - 1):
        if np.sign(vals[i]) != np.sign(vals[i + 1]):
            roots.append(brentq(det, ss[i], ss[i + 1]))
        if len(roots) >= 3:
            break
    oracle = [-(k * k + r * r) for r in roots]
    assert lead[0] == pytest.approx(oracle[0], abs=2e-6)
    assert lead[1] == pytest.approx(oracle[1], abs=2e-6)


def test_boundary_rows_enforced(profile30, grid30):
    pen = assemble_pencil(2, profile30, grid30)
    modes = solve_modes(2, pen, halfplane=np.inf, nev=1, refine=False)
    m = modes[0]
    assert m.boundary_residual < 1e-8
    assert m.pencil_residual < 1e-6
    assert m.rho2 == 1.0
    Dy = grid30.diff
    d2 = (Dy @ (Dy @ m.psi))[grid30.i0]
    assert d2 == pytest.approx(2.0, rel=1e-9)


def test_refinement_filter_accepts_physical_mode(profile30, grid30):
    pen = assemble_pencil(1, profile30, grid30)
    modes = solve_modes(1, pen, halfplane=2.0, nev=1, refine=True)
    assert len(modes) == 1


def test_conjugate_spectrum_matches_direct(profile30, grid30):
    k = 2
    pen = assemble_pencil(k, profile30, grid30)
    direct = solve_modes(k, pen, halfplane=np.inf, nev=3, refine=False)
    conj = solve_conjugate_modes(k, profile30, grid30, nev=3)
    for dm in direct[:2]:
        best = min(abs(cm.lam - dm.lam) for cm in conj)
        assert best < 1e-8 * max(1.0, abs(dm.lam))


def test_conjugate_stream_small(profile30, grid30):
    # || phi || / || wtilde || = O(1/nu)
    cm = solve_conjugate_modes(3, profile30, grid30, nev=1)[0]
    ratio = np.max(np.abs(cm.phi)) / np.max(np.abs(cm.wtilde))
    assert ratio < 1e3 / profile30.params.nu


def test_biorthogonal_numeric_basis(profile30, grid30):
    basis = numeric_basis((1, 2), profile30, grid30)
    assert np.max(np.abs(basis.gram - np.eye(2))) < 1e-8


def test_duplicated_mode_raises(profile30, grid30):
    basis = numeric_basis((1, 2), profile30, grid30, orthonormalize=False)
    basis.wavenumbers = (1, 1)
    basis.psi[1] = basis.psi[0]
    basis.theta[1] = basis.theta[0]
    basis.thetastar[1] = basis.thetastar[0]
    basis.dthetastar[1] = basis.dthetastar[0]
    basis.dpsi[1] = basis.dpsi[0]
    basis.phi = None
    with pytest.raises(SpectralError):
        biorthogonalize(basis)


def test_spectrum_report(profile30):
    p = profile30.params
    rep = spectrum_report([1, 7], 9, p, profile30.poly, profile30,
                          pencil_kmax=4, finite_ks=())
    assert rep.kernel_residual < 1e-6
    assert rep.gap > 0.0
    assert rep.passed
    csv = rep.to_csv()
    assert csv.splitlines()[0] == "k,Re_lambda,Im_lambda,method,in_kernel_set"
    ks = {r.k for r in rep.records}
    assert ks == set(range(1, 10))
    # pencil attempted only for k <= pencil_kmax
    assert all(r.lam_pencil is None for r in rep.records if r.k > 4)


def test_spectrum_report_apriori_bound(profile30):
    from obrealize.scalar import kbar_bound
    p = profile30.params
    kmax = int(kbar_bound(p)) + 3
    rep = spectrum_report([1, 7], kmax, p, profile30.poly, profile30,
                          pencil_kmax=2, finite_ks=())
    gapped = [r for r in rep.records if r.method == "apriori-gapped"]
    assert gapped and all(r.k > kbar_bound(p) for r in gapped)
    assert all(r.lam_design is None for r in gapped)


def test_semigroup_rate_matches_pencil(profile30, grid30):
    pen = assemble_pencil(2, profile30, grid30)
    A, _, _, _ = _schur_operator(pen)
    lead = np.max(np.linalg.eigvals(A).real)
    rate, diag = semigroup_decay(2, profile30, grid30, horizon=10.0)
    assert abs(rate - lead) <= 0.02 * abs(lead)


def test_mode_csv_export(profile30, grid30):
    pen = assemble_pencil(1, profile30, grid30)
    mode = solve_modes(1, pen, halfplane=np.inf, nev=1, refine=False)[0]
    csv = mode.to_csv()
    lines = csv.strip().split("\n")
    assert lines[0] == "y,Re_psi,Im_psi,Re_w,Im_w"
    assert len(lines) == len(grid30.nodes) + 1


@pytest.mark.xfail(reason="at desk-scale b the leading adjoint mode sits at "
                          "lambda = O(-1); the (k y^2 + y)e^{-ky} shape only "
                          "holds for critical modes; see the decisions notes",
                   strict=True)
def test_conjugate_temperature_matches_asymptotic_shape(profile50):
    g = default_grid(profile50)
    cm = solve_conjugate_modes(1, profile50, g, nev=1)[0]
    y = g.nodes
    wt = np.real(cm.wtilde)
    wt = wt / np.max(np.abs(wt))
    ref = (y**2 + y) * np.exp(-y)
    ref = ref / np.max(np.abs(ref))
    if wt[np.argmax(np.abs(wt))] * ref[np.argmax(np.abs(ref))] < 0:
        wt = -wt
    assert np.max(np.abs(wt - ref)) < 0.1


@pytest.mark.xfail(reason="the engineered zeros live in the design (scalar) "
                          "equation; the collocation operator's leading "
                          "eigenvalue at desk-scale b stays O(1) negative, "
                          "so a pencil kernel mode decays over unit time; "
                          "see the decisions notes", strict=True)
def test_kernel_mode_neutral_under_evolution(profile30, grid30):
    pen = assemble_pencil(1, profile30, grid30)
    mode = solve_modes(1, pen, halfplane=np.inf, nev=1, refine=False)[0]
    w0 = np.real(mode.w)
    rate, _ = semigroup_decay(1, profile30, grid30, horizon=1.0, dt=5e-4,
                              x0=w0, fit_fraction=0.9)
    assert abs(np.expm1(rate * 1.0)) < 1e-4
