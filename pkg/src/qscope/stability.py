"""Both sides of the stability estimates, the log-modulus fit, and the noise
sweeps that probe the Lipschitz-to-logarithmic transition near critical
points.

Two sweep modes:
  * "bump":  perturb the coefficient by an interior bump vanishing on the
    boundary (q~ = q + eps*b, b = sin(pi x) sin(pi y)), forward-solve the
    perturbed problem, and compare true coefficient pairs. This is the
    direct check of the weighted estimate.
  * "noise": perturb the data on J, reconstruct, and compare the recovered
    coefficient with the true one, including per-band sup errors by distance
    to the nodal set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import ScalarField, dist_to_zero_set, h1_norm, linf_norm
from .data import InternalData, add_noise, data_diff_h1, synthesize
from .forward import Problem, solve_forward
from .recon import ReconOptions, reconstruct_w

DIST_BANDS = ((0.0, 0.05), (0.05, 0.1), (0.1, 0.2), (0.2, math.inf))

STABILITY_CSV_HEADER = (
    "eps,data_err,weighted_lhs,weighted_rhs,weighted_ratio,"
    "sup_err_all,sup_err_b0,sup_err_b1,sup_err_b2,sup_err_b3,"
    "theta,phi_C0,phi_C1,phi_residual"
)


@dataclass
class StabilityRecord:
    eps: float
    data_err: float
    weighted_lhs: float
    weighted_rhs: float
    weighted_ratio: float
    sup_err_all: float
    sup_err_bands: tuple
    theta: float
    # 0.0 until a sweep-level fit is available (at least 4 usable pairs)
    phi_C0: float = 0.0
    phi_C1: float = 0.0
    phi_residual: float = 0.0

    def csv_row(self) -> str:
        cells = [self.eps, self.data_err, self.weighted_lhs, self.weighted_rhs,
                 self.weighted_ratio, self.sup_err_all, *self.sup_err_bands,
                 self.theta, self.phi_C0, self.phi_C1, self.phi_residual]
        return ",".join(repr(float(c)) for c in cells)


@dataclass(frozen=True)
class PhiFit:
    C0: float
    C1: float
    residual: float


def weighted_sides(q: ScalarField, q_t: ScalarField,
                   d: InternalData, d_t: InternalData):
    """Left and right side of the weighted estimate: H1 norm of
    sqrt(I)*(q - q~) versus the square root of the H1 data error."""
    if q.grid.shape != q_t.grid.shape or d.grid.shape != q.grid.shape:
        raise ValueError("fields live on different grids")
    lhs = h1_norm(ScalarField(q.grid, d.J.values * (q.values - q_t.values)))
    rhs = math.sqrt(data_diff_h1(d, d_t))
    return lhs, rhs


def interp_check(d: InternalData, d_t: InternalData,
                 u: ScalarField, u_t: ScalarField, theta: float):
    """Sup norm of u^2 - u~^2 versus the data error to the power theta; the
    boundedness of their ratio is the interpolation step behind the sup-norm
    stability."""
    sup = linf_norm(ScalarField(u.grid, u.values**2 - u_t.values**2))
    derr = data_diff_h1(d, d_t)
    return sup, derr**theta


def phi_eval(s: float, C0: float, C1: float) -> float:
    """Log-stability modulus C0 * (1/|ln(C1 |ln s|)| + s)."""
    if s <= 0.0 or s == 1.0:
        raise ValueError("s must be positive and different from 1")
    ls = abs(math.log(s))
    inner = C1 * ls
    if inner <= 0.0 or inner == 1.0:
        raise ValueError("C1*|ln s| = 1 is a singular point of the modulus")
    return C0 * (1.0 / abs(math.log(inner)) + s)


def _phi_misfit(svals: np.ndarray, evals: np.ndarray,
                C0: float, C1: float) -> float:
    """Relative least-squares misfit ||pred - e||^2 / ||e||^2."""
    with np.errstate(divide="ignore", invalid="ignore"):
        inner = np.abs(np.log(C1 * np.abs(np.log(svals))))
        pred = C0 * (1.0 / inner + svals)
    if not np.all(np.isfinite(pred)):
        return math.inf
    return float(np.sum((pred - evals) ** 2) / np.sum(evals**2))


def phi_fit(pairs) -> PhiFit:
    """Fit (C0, C1) of the modulus to (s, error) pairs: logarithmic grid
    search refined by coordinate descent (the modulus is non-smooth in C1,
    so a bracketing search beats general-purpose least squares here)."""
    pairs = [(float(s), float(e)) for s, e in pairs]
    if len(pairs) < 4:
        raise ValueError("phi_fit needs at least 4 pairs")
    svals = np.array([p[0] for p in pairs])
    evals = np.array([p[1] for p in pairs])
    if np.any(svals <= 0.0) or np.any(svals == 1.0):
        raise ValueError("s values must be positive and different from 1")
    if np.any(evals <= 0.0):
        raise ValueError("error values must be positive")

    # phi is linear in C0, so the optimal C0 for a given C1 is closed-form
    # least squares; only C1 needs a bracketing search (the |ln C1 |ln s||
    # term is non-smooth in C1, so a grid plus zoom beats smooth optimizers)
    def solve_c0(c1):
        with np.errstate(divide="ignore", invalid="ignore"):
            basis = 1.0 / np.abs(np.log(c1 * np.abs(np.log(svals)))) + svals
        if not np.all(np.isfinite(basis)):
            return math.inf, 0.0
        denom = float(basis @ basis)
        if denom == 0.0:
            return math.inf, 0.0
        c0 = max(float(basis @ evals) / denom, 1e-300)
        return _phi_misfit(svals, evals, c0, c1), c0

    c1_lo, c1_hi = 1e-4, 1e4
    best = (math.inf, 0.0, c1_lo)
    for _ in range(10):
        for c1 in np.logspace(math.log10(c1_lo), math.log10(c1_hi), 101):
            m, c0 = solve_c0(c1)
            if m < best[0]:
                best = (m, c0, c1)
        zoom = (c1_hi / c1_lo) ** (2.0 / 100)
        c1_lo, c1_hi = best[2] / zoom, best[2] * zoom
    m_best, c0, c1 = best
    return PhiFit(float(c0), float(c1), math.sqrt(m_best))


def coefficient_bump(grid) -> ScalarField:
    """Interior profile vanishing on the boundary, keeping q - q~ in H_0^1."""
    return ScalarField.from_function(
        grid, lambda X, Y: np.sin(np.pi * X) * np.sin(np.pi * Y))


def _band_sups(diff: np.ndarray, dist: np.ndarray):
    sups = []
    for lo, hi in DIST_BANDS:
        sel = (dist >= lo) & (dist < hi)
        sups.append(float(np.max(np.abs(diff[sel]))) if sel.any() else 0.0)
    return tuple(sups)


def stability_sweep(p: Problem, eps_list, opts: ReconOptions = ReconOptions(),
                    theta: float = 0.2, mode: str = "noise",
                    model: str = "deterministic", seed: int = 0,
                    tol: float = 1e-10):
    """One StabilityRecord per eps; phi is fitted across the sweep and its
    constants repeated in every record."""
    if not (0.0 < theta < 0.25):
        raise ValueError("theta must lie in (0, 1/4)")
    if mode not in ("noise", "bump"):
        raise ValueError(f"unknown sweep mode {mode!r}")

    u, rep = solve_forward(p, tol=tol)
    if not rep.converged:
        raise RuntimeError("forward solve did not converge")
    d = synthesize(p.q, u)
    dist = dist_to_zero_set(u).values
    g_abs = ScalarField(p.grid, np.abs(p.g.values))
    bump = coefficient_bump(p.grid)

    records = []
    for eps in eps_list:
        eps = float(eps)
        if mode == "bump":
            q_t = ScalarField(p.grid, p.q.values + eps * bump.values)
            u_t, rep_t = solve_forward(
                Problem(p.grid, p.A, q_t, p.g), tol=tol)
            if not rep_t.converged:
                raise RuntimeError("perturbed forward solve did not converge")
            d_t = synthesize(q_t, u_t)
            diff = p.q.values - q_t.values
        else:
            d_t = add_noise(d, model, eps, seed) if eps > 0 else d
            rec = reconstruct_w(d_t, p.A, g_abs, opts)
            diff = p.q.values - rec.q_rec.values

        derr = data_diff_h1(d, d_t)
        lhs = h1_norm(ScalarField(p.grid, d.J.values * diff))
        rhs = math.sqrt(derr)
        records.append(StabilityRecord(
            eps=eps,
            data_err=derr,
            weighted_lhs=lhs,
            weighted_rhs=rhs,
            weighted_ratio=lhs / rhs if rhs > 0 else 0.0,
            sup_err_all=float(np.max(np.abs(diff))),
            sup_err_bands=_band_sups(diff, dist),
            theta=theta,
        ))

    fit_pairs = [(r.data_err**theta, r.sup_err_all)
                 for r in records if r.data_err > 0 and r.sup_err_all > 0]
    if len(fit_pairs) >= 4:
        fit = phi_fit(fit_pairs)
        for r in records:
            r.phi_C0, r.phi_C1, r.phi_residual = fit.C0, fit.C1, fit.residual
    records.sort(key=lambda r: r.eps)
    return records


def write_stability_csv(records, path) -> None:
    lines = [STABILITY_CSV_HEADER]
    lines.extend(r.csv_row() for r in records)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
