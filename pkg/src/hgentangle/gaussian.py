"""Multimode Gaussian states in phase space.

Conventions used throughout the package:

* quadratures are ordered ``x1, p1, x2, p2, ...`` (xpxp ordering);
* variances are in shot-noise units, so the vacuum covariance is the identity;
* a homodyne detector with local-oscillator phase ``phi`` reads
  ``X(phi) = x cos(phi) + p sin(phi)``.

Every transform returns a new :class:`GaussianState`; states are immutable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    InvalidModeSet,
    InvalidParameter,
    OrderMismatch,
    UnknownMode,
    UnphysicalState,
)

PHYSICALITY_TOL = 1e-9
SYMMETRY_TOL = 1e-12
NORM_TOL = 1e-9


def db_to_linear(db: float) -> float:
    """Convert a noise level in dB relative to shot noise into a variance."""
    return 10.0 ** (db / 10.0)


def linear_to_db(variance: float) -> float:
    return 10.0 * np.log10(variance)


def rotation_matrix(phi: float) -> np.ndarray:
    """2x2 phase-space rotation by ``phi``."""
    c, s = np.cos(phi), np.sin(phi)
    return np.array([[c, -s], [s, c]])


def symplectic_form(n_modes: int) -> np.ndarray:
    """The xpxp symplectic form ``Omega = diag([[0, 1], [-1, 0]], ...)``."""
    return np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def symplectic_eigenvalues(cov: np.ndarray) -> np.ndarray:
    """Sorted symplectic eigenvalues of a covariance matrix.

    These are the moduli of the eigenvalues of ``i Omega V``, which come in
    +/- pairs; each value is returned once.
    """
    n = cov.shape[0] // 2
    eig = np.linalg.eigvals(1j * symplectic_form(n) @ cov)
    return np.sort(np.abs(eig))[::2]


@dataclass(frozen=True)
class ModeLabel:
    """Name and Hermite-Gaussian indices of one spatial mode.

    ``orientation`` is the rotation of the mode pattern about the beam axis
    and is kept in ``[0, pi)``.
    """

    name: str
    n: int = 0
    m: int = 0
    orientation: float = 0.0

    def __post_init__(self):
        if self.n < 0 or self.m < 0:
            raise InvalidParameter(f"mode indices must be non-negative, got ({self.n}, {self.m})")
        object.__setattr__(self, "orientation", float(self.orientation) % np.pi)

    @property
    def order(self) -> int:
        return self.n + self.m


HG10 = ModeLabel("HG10", 1, 0)
HG01 = ModeLabel("HG01", 0, 1)


@dataclass(frozen=True)
class SqueezerSpec:
    """Output of a squeezed source described by its measured noise levels.

    The state is a squeezed thermal state whose minimum and maximum
    quadrature variances are ``squeezing_dB`` and ``antisqueezing_dB``
    relative to shot noise; the minimum lies at LO phase ``squeezing_angle``.
    """

    squeezing_dB: float
    antisqueezing_dB: float
    squeezing_angle: float = 0.0

    @property
    def v_min(self) -> float:
        return db_to_linear(self.squeezing_dB)

    @property
    def v_max(self) -> float:
        return db_to_linear(self.antisqueezing_dB)

    def problems(self) -> list[str]:
        """Reasons this spec is unphysical; empty if it is fine."""
        out = []
        if self.squeezing_dB > 0:
            out.append(f"squeezing_dB must be <= 0, got {self.squeezing_dB}")
        if self.antisqueezing_dB < 0:
            out.append(f"antisqueezing_dB must be >= 0, got {self.antisqueezing_dB}")
        if self.v_min * self.v_max < 1.0 - PHYSICALITY_TOL:
            out.append(
                "variance product "
                f"{self.v_min * self.v_max:.6g} < 1 violates the uncertainty relation"
            )
        return out

    def covariance(self) -> np.ndarray:
        r = rotation_matrix(self.squeezing_angle)
        return r @ np.diag([self.v_min, self.v_max]) @ r.T


@dataclass(frozen=True, eq=False)
class GaussianState:
    """Mean vector and covariance matrix over ``len(modes)`` spatial modes."""

    modes: tuple[ModeLabel, ...]
    mean: np.ndarray
    cov: np.ndarray
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        modes = tuple(self.modes)
        if not modes:
            raise InvalidModeSet("a state needs at least one mode")
        names = [mode.name for mode in modes]
        if len(set(names)) != len(names):
            raise InvalidModeSet(f"duplicate mode labels: {names}")
        n = len(modes)
        mean = np.asarray(self.mean, dtype=float).reshape(-1)
        cov = np.asarray(self.cov, dtype=float)
        if mean.shape != (2 * n,) or cov.shape != (2 * n, 2 * n):
            raise InvalidParameter(
                f"expected mean of shape {(2 * n,)} and cov of shape {(2 * n, 2 * n)}, "
                f"got {mean.shape} and {cov.shape}"
            )
        scale = max(1.0, float(np.max(np.abs(cov))))
        if np.max(np.abs(cov - cov.T)) > SYMMETRY_TOL * scale:
            raise UnphysicalState("covariance matrix is not symmetric")
        cov = 0.5 * (cov + cov.T)
        mean.flags.writeable = False
        cov.flags.writeable = False
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "_index", {name: i for i, name in enumerate(names)})

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    def index(self, mode: ModeLabel | str) -> int:
        name = mode if isinstance(mode, str) else mode.name
        try:
            return self._index[name]
        except KeyError:
            raise UnknownMode(f"mode {name!r} not in state {list(self._index)}") from None

    def mode(self, name: str) -> ModeLabel:
        return self.modes[self.index(name)]

    def block(self, mode: ModeLabel | str) -> np.ndarray:
        k = self.index(mode)
        return np.array(self.cov[2 * k : 2 * k + 2, 2 * k : 2 * k + 2])

    def symplectic_eigenvalues(self) -> np.ndarray:
        return symplectic_eigenvalues(self.cov)

    def is_physical(self, tol: float = PHYSICALITY_TOL) -> bool:
        return bool(np.min(self.symplectic_eigenvalues()) >= 1.0 - tol)

    def check_physical(self) -> "GaussianState":
        nu = np.min(self.symplectic_eigenvalues())
        if nu < 1.0 - PHYSICALITY_TOL:
            raise UnphysicalState(f"smallest symplectic eigenvalue {nu:.12g} < 1")
        return self

    def transformed(self, S: np.ndarray, noise: np.ndarray | None = None) -> "GaussianState":
        """Apply ``V -> S V S^T + noise`` and ``mean -> S mean``."""
        cov = S @ self.cov @ S.T
        if noise is not None:
            cov = cov + noise
        return GaussianState(self.modes, S @ self.mean, 0.5 * (cov + cov.T))


def vacuum(modes: Sequence[ModeLabel]) -> GaussianState:
    modes = tuple(modes)
    if not modes:
        raise InvalidModeSet("vacuum() needs at least one mode")
    n = len(modes)
    return GaussianState(modes, np.zeros(2 * n), np.eye(2 * n))


def _embed(state: GaussianState, indices: Sequence[int], small: np.ndarray) -> np.ndarray:
    """Identity on the full space with ``small`` acting on the given modes."""
    S = np.eye(2 * state.n_modes)
    slots = [2 * k + j for k in indices for j in (0, 1)]
    S[np.ix_(slots, slots)] = small
    return S


def apply_squeezed_thermal(
    state: GaussianState, mode: ModeLabel | str, spec: SqueezerSpec
) -> GaussianState:
    """Replace ``mode`` by the squeezed thermal state described by ``spec``.

    The mode's correlations with the rest of the state are discarded, as for a
    freshly prepared source field; means of the mode are reset to zero.
    """
    k = state.index(mode)
    problems = spec.problems()
    if problems:
        raise UnphysicalState("; ".join(problems))
    cov = np.array(state.cov)
    cov[2 * k : 2 * k + 2, :] = 0.0
    cov[:, 2 * k : 2 * k + 2] = 0.0
    cov[2 * k : 2 * k + 2, 2 * k : 2 * k + 2] = spec.covariance()
    mean = np.array(state.mean)
    mean[2 * k : 2 * k + 2] = 0.0
    return GaussianState(state.modes, mean, cov)


def apply_phase(state: GaussianState, mode: ModeLabel | str, phi: float) -> GaussianState:
    k = state.index(mode)
    return state.transformed(_embed(state, [k], rotation_matrix(phi)))


def basis_rotation_matrix(theta: float) -> np.ndarray:
    """4x4 symplectic mixing two modes: ``x_A' = cos x_A + sin x_B``, same for p."""
    c, s = np.cos(theta), np.sin(theta)
    return np.kron(np.array([[c, s], [-s, c]]), np.eye(2))


def apply_basis_rotation(
    state: GaussianState, mode_a: ModeLabel | str, mode_b: ModeLabel | str, theta: float
) -> GaussianState:
    """Re-express two same-order modes in a basis rotated by ``theta``.

    Equivalent to a lossless beamsplitter with amplitude transmittance
    ``cos(theta)``; ``theta = pi/4`` is the 50/50 case.
    """
    a, b = state.index(mode_a), state.index(mode_b)
    if a == b:
        raise InvalidModeSet("basis rotation needs two distinct modes")
    order_a, order_b = state.modes[a].order, state.modes[b].order
    if order_a != order_b:
        raise OrderMismatch(
            f"cannot mix modes of order {order_a} and {order_b} by spatial rotation"
        )
    return state.transformed(_embed(state, [a, b], basis_rotation_matrix(theta)))


def apply_loss(state: GaussianState, mode: ModeLabel | str, eta: float) -> GaussianState:
    """Pure-loss channel of power transmittance ``eta`` on one mode."""
    if not 0.0 <= eta <= 1.0:
        raise InvalidParameter(f"transmittance must lie in [0, 1], got {eta}")
    k = state.index(mode)
    S = _embed(state, [k], np.sqrt(eta) * np.eye(2))
    noise = np.zeros_like(state.cov)
    noise[2 * k : 2 * k + 2, 2 * k : 2 * k + 2] = (1.0 - eta) * np.eye(2)
    return state.transformed(S, noise)


def quadrature_vector(
    state: GaussianState, coeffs: Mapping[str, float] | Sequence[float], phi: float
) -> np.ndarray:
    """Length-2N vector ``q`` such that ``q . r`` is the measured quadrature."""
    if isinstance(coeffs, Mapping):
        c = np.zeros(state.n_modes)
        for name, value in coeffs.items():
            c[state.index(name)] = value
    else:
        c = np.asarray(coeffs, dtype=float)
        if c.shape != (state.n_modes,):
            raise InvalidParameter(
                f"need {state.n_modes} mode coefficients, got {c.shape[0] if c.ndim else c}"
            )
    if abs(float(c @ c) - 1.0) > NORM_TOL:
        raise InvalidParameter(f"mode coefficients must be normalised, sum of squares = {c @ c}")
    q = np.empty(2 * state.n_modes)
    q[0::2] = c * np.cos(phi)
    q[1::2] = c * np.sin(phi)
    return q


def quadrature_variance(
    state: GaussianState, coeffs: Mapping[str, float] | Sequence[float], phi: float
) -> float:
    """Homodyne variance of the mode combination ``coeffs`` at LO phase ``phi``."""
    q = quadrature_vector(state, coeffs, phi)
    return float(q @ state.cov @ q)


def sum_diff_variances(
    state: GaussianState, mode_a: ModeLabel | str, mode_b: ModeLabel | str, phi: float
) -> tuple[float, float]:
    """``Var[(X_A + X_B)/sqrt2]`` at ``phi`` and ``Var[(X_A - X_B)/sqrt2]`` at ``phi + pi/2``."""
    a, b = state.index(mode_a), state.index(mode_b)
    r = 1.0 / np.sqrt(2.0)
    c_sum = np.zeros(state.n_modes)
    c_sum[a], c_sum[b] = r, r
    c_diff = np.zeros(state.n_modes)
    c_diff[a], c_diff[b] = r, -r
    return (
        quadrature_variance(state, c_sum, phi),
        quadrature_variance(state, c_diff, phi + np.pi / 2),
    )


def two_mode_source(
    spec_a: SqueezerSpec,
    spec_b: SqueezerSpec,
    modes: tuple[ModeLabel, ModeLabel] = (HG10, HG01),
) -> GaussianState:
    """Two independent squeezed modes, as produced by the degenerate OPA."""
    state = vacuum(modes)
    state = apply_squeezed_thermal(state, modes[0], spec_a)
    return apply_squeezed_thermal(state, modes[1], spec_b)
