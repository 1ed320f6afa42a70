"""Internal data I = q u^2 and J = sqrt(I): synthesis, controlled noise on J,
and persistence.

Noise is injected on J (not I) because the stability estimates measure data
error as the H1 norm of sqrt(I) - sqrt(I~); perturbing J gives exact control
of that abscissa. After noise, J is clipped at 0 so I~ = J~^2 stays a valid
energy density.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .grid import Grid, ScalarField, dump_field, h1_norm, load_field
from .rng import SplitMix64

NOISE_MODELS = ("deterministic", "random")


@dataclass(frozen=True)
class InternalData:
    I: ScalarField
    J: ScalarField
    model: str = "none"
    eps: float = 0.0
    seed: int = 0

    @property
    def grid(self) -> Grid:
        return self.I.grid


def synthesize(q: ScalarField, u: ScalarField) -> InternalData:
    """Noiseless data I = q u^2, J = sqrt(I) = sqrt(q) |u|."""
    if q.grid.shape != u.grid.shape:
        raise ValueError("q and u live on different grids")
    if float(np.min(q.values)) < 0.0:
        raise ValueError("negative q rejected: I = q u^2 must be an energy density")
    I = q.values * u.values**2
    return InternalData(ScalarField(q.grid, I), ScalarField(q.grid, np.sqrt(I)))


def _deterministic_bump(grid: Grid) -> ScalarField:
    f = ScalarField.from_function(
        grid, lambda X, Y: np.sin(3 * np.pi * X) * np.sin(3 * np.pi * Y))
    return ScalarField(grid, f.values / h1_norm(f))


def _random_bump(grid: Grid, seed: int) -> ScalarField:
    """Smooth seeded field: low-frequency sine modes with SplitMix64
    coefficients, normalized to unit H1 norm."""
    rng = SplitMix64(seed)
    X, Y = grid.coords()
    vals = np.zeros(grid.shape)
    for m in range(1, 5):
        for n in range(1, 5):
            vals += rng.next_symmetric() * np.sin(m * np.pi * X) * np.sin(n * np.pi * Y)
    f = ScalarField(grid, vals)
    nrm = h1_norm(f)
    if nrm == 0.0:
        return _deterministic_bump(grid)
    return ScalarField(grid, vals / nrm)


def noise_profile(grid: Grid, model: str, seed: int = 0) -> ScalarField:
    if model == "deterministic":
        return _deterministic_bump(grid)
    if model == "random":
        return _random_bump(grid, seed)
    raise ValueError(f"unknown noise model {model!r}")


def add_noise(d: InternalData, model: str, eps: float, seed: int = 0) -> InternalData:
    """J~ = max(J + eps * rho, 0) with ||rho||_H1 = 1; I~ = J~^2."""
    if eps < 0.0:
        raise ValueError("eps must be nonnegative")
    if eps == 0.0:
        return d
    rho = noise_profile(d.grid, model, seed)
    Jt = np.maximum(d.J.values + eps * rho.values, 0.0)
    return InternalData(ScalarField(d.grid, Jt**2), ScalarField(d.grid, Jt),
                        model, eps, seed)


def data_diff_h1(d1: InternalData, d2: InternalData) -> float:
    """The data-error term of the stability estimates: H1 norm of J1 - J2."""
    if d1.grid.shape != d2.grid.shape:
        raise ValueError("data sets live on different grids")
    return h1_norm(ScalarField(d1.grid, d1.J.values - d2.J.values))


def save_data(d: InternalData, directory, stem: str = "data") -> None:
    dump_field(d.I, os.path.join(directory, f"{stem}_I.txt"))
    dump_field(d.J, os.path.join(directory, f"{stem}_J.txt"))
    with open(os.path.join(directory, f"{stem}_meta.txt"), "w") as fh:
        fh.write(f"{d.model} {d.eps!r} {d.seed}\n")


def load_data(directory, stem: str = "data") -> InternalData:
    I = load_field(os.path.join(directory, f"{stem}_I.txt"))
    J = load_field(os.path.join(directory, f"{stem}_J.txt"))
    with open(os.path.join(directory, f"{stem}_meta.txt")) as fh:
        model, eps, seed = fh.read().split()
    return InternalData(I, J, model, float(eps), int(seed))
