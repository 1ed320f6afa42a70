"""Coefficient recovery from internal data.

The modulus w = |u| satisfies w * div(A grad w) = -I with w = |g| on the
boundary. We solve it by Picard iteration, lagging the denominator:

    div(A grad w_{k+1}) = -I / max(w_k, w_floor),   w_{k+1} = |g| on the boundary,

with damping between iterates, started from the harmonic lift of |g|. Each
step is one symmetric positive definite solve, which stays robust where the
data degenerates along the nodal set.

The equation plus boundary data alone do not single out |u|: smooth positive
solutions exist that bridge over the valleys where the data vanishes. The
missing information is the zero set of J = sqrt(I), which is visible in the
data itself. We therefore pin the thin strip {J <= j_pin} as interior
Dirichlet nodes at w = J * mu, where mu ~ 1/sqrt(q) is read off as w/J away
from the strip and smoothly extended into it. The coefficient is then
q = I / w^2 with a division safeguard.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import Grid, RegionMask, ScalarField, TensorField, gradient, l2_norm, linf_norm
from .data import InternalData
from .forward import Problem, apply_lq, assemble, dirichlet_lift_rhs, solve_forward
from .sparse import SparseMatrix, cg_solve
from . import data as data_mod


@dataclass(frozen=True)
class ReconOptions:
    w_floor: float = 1e-6
    damping: float = 0.7
    max_picard: int = 200
    picard_tol: float = 1e-8
    trust_threshold: float = 0.1
    linear_tol: float = 1e-10
    # valley pinning: nodes with J <= pin_factor * h * max|grad J| are held
    # at w = J*mu during the linear solves; mu clipped to [mu_lo, mu_hi],
    # i.e. an a priori coefficient range [1/mu_hi^2, 1/mu_lo^2]
    pin_factor: float = 2.0
    mu_lo: float = 0.05
    mu_hi: float = 10.0

    def __post_init__(self):
        if self.w_floor <= 0.0:
            raise ValueError("w_floor must be positive")
        if not (0.0 < self.damping <= 1.0):
            raise ValueError("damping must lie in (0, 1]")
        if not (0.0 < self.mu_lo < self.mu_hi):
            raise ValueError("need 0 < mu_lo < mu_hi")


@dataclass
class ReconResult:
    w: ScalarField
    q_rec: ScalarField
    trust: RegionMask
    iterations: int
    history: list = field(default_factory=list)
    converged: bool = False
    nonlinear_residual: float = float("nan")


def recover_q(d: InternalData, w: ScalarField, opts: ReconOptions) -> ScalarField:
    """q = I / max(w, w_floor)^2."""
    if float(np.min(w.values)) < 0.0:
        raise ValueError("w must be nonnegative")
    safe = np.maximum(w.values, opts.w_floor)
    return ScalarField(w.grid, d.I.values / safe**2)


def _extend_mu(grid: Grid, mu: np.ndarray, known: np.ndarray,
               sweeps: int = 200) -> np.ndarray:
    """Fill mu on ~known nodes by neighbor-averaging sweeps with the known
    values held fixed (a cheap discrete harmonic extension; exact for
    constant mu). The unknown strip is thin, so a fixed sweep count is
    plenty and keeps the result deterministic."""
    out = mu.copy()
    fill = ~known
    if not fill.any():
        return out
    out[fill] = np.median(mu[known]) if known.any() else 1.0
    for _ in range(sweeps):
        avg = np.zeros_like(out)
        cnt = np.zeros_like(out)
        avg[1:, :] += out[:-1, :]
        cnt[1:, :] += 1
        avg[:-1, :] += out[1:, :]
        cnt[:-1, :] += 1
        avg[:, 1:] += out[:, :-1]
        cnt[:, 1:] += 1
        avg[:, :-1] += out[:, 1:]
        cnt[:, :-1] += 1
        out[fill] = avg[fill] / cnt[fill]
    return out


def _pin_threshold(d: InternalData, opts: ReconOptions) -> float:
    gx, gy = gradient(d.J)
    slope = math.hypot(linf_norm(gx), linf_norm(gy))
    h = max(d.grid.hx, d.grid.hy)
    return opts.pin_factor * h * slope


def reconstruct_w(d: InternalData, A: TensorField, g_abs: ScalarField,
                  opts: ReconOptions = ReconOptions(),
                  w0: ScalarField | None = None) -> ReconResult:
    """Picard iteration for w ~ |u| from the internal data."""
    grid = d.grid
    nx, ny = grid.shape
    interior = (slice(1, -1), slice(1, -1))
    J = d.J.values

    M = assemble(grid, A, None)  # -div(A grad .), SPD
    lift = dirichlet_lift_rhs(grid, A, None, g_abs)

    # pinned valley strip (interior nodes where the data vanishes to grid
    # accuracy); empty when the solution has no critical points
    j_pin = _pin_threshold(d, opts)
    pin2d = (J <= j_pin) & grid.interior()
    pin = pin2d[interior].ravel()
    free = ~pin

    M_ff = SparseMatrix.from_csr(M._csr[free, :][:, free]) if pin.any() else M

    def mu_field(w):
        """w/J off the valley, clipped, harmonically extended into it."""
        known = J > 2.0 * j_pin
        mu = np.ones(grid.shape)
        mu[known] = np.clip(w[known] / J[known], opts.mu_lo, opts.mu_hi)
        return _extend_mu(grid, mu, known)

    def linear_step(w_prev, src_interior):
        """One Dirichlet solve with the valley pinned at w = J*mu."""
        rhs = lift + src_interior.ravel()
        w_full = np.zeros(grid.shape)
        b = grid.boundary()
        w_full[b] = g_abs.values[b]
        if pin.any():
            mu = mu_field(w_prev)
            w_pin2d = J * mu
            ext = np.zeros(grid.shape)
            ext[pin2d] = w_pin2d[pin2d]
            # move pinned-column couplings to the right-hand side
            rhs = rhs + (-np.asarray(M._csr @ ext[interior].ravel()))
            x, rep = cg_solve(M_ff, rhs[free], tol=opts.linear_tol)
            if not rep.converged:
                raise RuntimeError("pinned linear sub-solve failed to converge")
            xi = np.empty(pin.size)
            xi[free] = x
            xi[pin] = w_pin2d[pin2d]
            w_full[interior] = xi.reshape(nx - 2, ny - 2)
        else:
            x, rep = cg_solve(M, rhs, tol=opts.linear_tol)
            if not rep.converged:
                raise RuntimeError("linear sub-solve failed to converge")
            w_full[interior] = x.reshape(nx - 2, ny - 2)
        return w_full

    if w0 is None:
        # harmonic lift of |g| (valley already pinned, mu starting at w/J = 1)
        w = linear_step(J, np.zeros((nx - 2, ny - 2)))
    else:
        w = w0.values.copy()

    history = []
    converged = False
    it = 0
    for it in range(1, opts.max_picard + 1):
        src = d.I.values[interior] / np.maximum(w[interior], opts.w_floor)
        w_new = linear_step(w, src)
        w_new = (1.0 - opts.damping) * w + opts.damping * w_new
        num = l2_norm(ScalarField(grid, w_new - w))
        den = max(l2_norm(ScalarField(grid, w)), 1e-300)
        history.append(num / den)
        w = w_new
        if history[-1] <= opts.picard_tol:
            converged = True
            break

    w = np.maximum(w, 0.0)
    wf = ScalarField(grid, w)
    # nonlinear residual of w*div(A grad w) = -I at interior nodes
    resid = np.zeros(grid.shape)
    resid[interior] = w[interior] * apply_lq(grid, A, None, w)[interior] + d.I.values[interior]
    nonlinear_residual = l2_norm(ScalarField(grid, resid))

    q_rec = recover_q(d, wf, opts)
    trust = RegionMask(grid, w >= opts.trust_threshold,
                       f"trust(|u|>={opts.trust_threshold:g})")
    return ReconResult(wf, q_rec, trust, it, history, converged, nonlinear_residual)


def roundtrip(p: Problem, eps: float, seed: int = 0,
              opts: ReconOptions = ReconOptions(),
              model: str = "deterministic", tol: float = 1e-10):
    """Forward solve, synthesize, perturb, reconstruct, compare.

    Returns (ReconResult, summary dict). The eps = 0 path is the uniqueness
    oracle: the recovered q must match the true one on the trust region.
    """
    u, rep = solve_forward(p, tol=tol)
    if not rep.converged:
        raise RuntimeError("forward solve did not converge")
    d = data_mod.synthesize(p.q, u)
    d_noisy = data_mod.add_noise(d, model, eps, seed) if eps > 0 else d
    g_abs = ScalarField(p.grid, np.abs(p.g.values))
    rec = reconstruct_w(d_noisy, p.A, g_abs, opts)

    diff = np.abs(rec.q_rec.values - p.q.values)
    sel = rec.trust.mask
    q_scale = max(float(np.max(np.abs(p.q.values[sel]))), 1e-300) if sel.any() else 1.0
    summary = {
        "eps": eps,
        "data_err": data_mod.data_diff_h1(d_noisy, d) if eps > 0 else 0.0,
        "trust_fraction": float(sel.mean()),
        "q_err_trust_abs": float(np.max(diff[sel])) if sel.any() else float("nan"),
        "q_err_trust_rel": float(np.max(diff[sel])) / q_scale if sel.any() else float("nan"),
        "picard_iterations": rec.iterations,
        "converged": rec.converged,
    }
    return rec, summary
