"""EPDiff flow on Diff(T^d) and the left projection to densities.

This is the cross-validation side: geodesics of the right-invariant metric with
inertia operator A = (1 - Laplacian)^(k+1), integrated in Eulerian momentum
form with the flow map co-integrated as a periodic displacement. Horizontal
initial momenta m = rho * grad p project onto density geodesics, which the
density module computes independently.

Compositions use exact band-limited Fourier evaluation at displaced points, so
the spatial error budget stays spectral.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import geodesic
from .spectral import (
    Grid,
    ScalarField,
    VectorField,
    check_same_grid,
    l2_norm_values,
)
from .geodesic import SolverAbort, _symbols


@dataclass
class DiffeoState:
    """Torus diffeomorphism phi(x) = x + disp(x) with Eulerian velocity u."""

    disp: VectorField
    u: VectorField
    k: int

    def __post_init__(self):
        check_same_grid(self.disp.grid, self.u.grid)

    @property
    def grid(self) -> Grid:
        return self.disp.grid


@dataclass
class MomentumField:
    """Momentum m = A u paired with a DiffeoState."""

    m: VectorField


def identity_state(grid: Grid, u: VectorField, k: int) -> DiffeoState:
    zeros = tuple(np.zeros(grid.shape) for _ in range(grid.dim))
    return DiffeoState(VectorField(grid, zeros), u, k)


def eval_periodic(grid: Grid, values: np.ndarray, points) -> np.ndarray:
    """Evaluate a band-limited grid field at arbitrary points (exact).

    points: array of shape (dim, ...) with arbitrary real coordinates; the
    Fourier series handles periodicity without wrapping. Nyquist modes are
    dropped (they are zero for dealiased fields anyway).
    """
    fhat = np.fft.fftn(values)
    k1 = grid.wavenumbers[0].astype(np.float64).copy()
    nyq = grid.n // 2
    keep = np.abs(grid.wavenumbers[0]) != nyq
    pts = [np.asarray(p).ravel() for p in points]
    if grid.dim == 1:
        e = np.exp(1j * np.outer(pts[0], k1[keep]))
        out = (e @ fhat[keep]).real / grid.npoints
    else:
        fsub = fhat[np.ix_(keep, keep)]
        e0 = np.exp(1j * np.outer(pts[0], k1[keep]))
        e1 = np.exp(1j * np.outer(pts[1], k1[keep]))
        out = ((e0 @ fsub) * e1).sum(axis=1).real / grid.npoints
    return out.reshape(np.asarray(points[0]).shape)


def _dealias(grid: Grid, values: np.ndarray) -> np.ndarray:
    return np.fft.ifftn(np.fft.fftn(values) * grid.dealias_mask).real


def _grad_raw(grid: Grid, values: np.ndarray):
    fhat = np.fft.fftn(values)
    return [np.fft.ifftn(ik * fhat).real for ik in grid.ik]


def _epdiff_rhs_raw(grid: Grid, k: int, u: list) -> list:
    """u_t = -Ainv{(u.grad)m + (div u)m + (grad u)^T m}, m = Au, dealiased."""
    ainv_band, mask, _ = _symbols(grid, k)
    a_sym = (1.0 + grid.ksq) ** (k + 1)
    m = [np.fft.ifftn(a_sym * np.fft.fftn(ui)).real for ui in u]
    du = [_grad_raw(grid, ui) for ui in u]   # du[i][j] = d_j u_i
    dm = [_grad_raw(grid, mi) for mi in m]
    divu = sum(du[j][j] for j in range(grid.dim))
    out = []
    for i in range(grid.dim):
        conv = sum(u[j] * dm[i][j] for j in range(grid.dim))
        stretch = sum(m[j] * du[j][i] for j in range(grid.dim))
        total = conv + divu * m[i] + stretch
        out.append(-np.fft.ifftn(ainv_band * np.fft.fftn(total)).real)
    return out


def epdiff_rhs(u: VectorField, k: int) -> VectorField:
    out = _epdiff_rhs_raw(u.grid, k, list(u.components))
    return VectorField(u.grid, tuple(out))


def jacobian_det(grid: Grid, disp: list) -> np.ndarray:
    """det(I + grad disp) on the grid (spectral derivatives)."""
    d = [_grad_raw(grid, di) for di in disp]
    if grid.dim == 1:
        return 1.0 + d[0][0]
    return (1.0 + d[0][0]) * (1.0 + d[1][1]) - d[0][1] * d[1][0]


def _flow_rhs(grid: Grid, k: int, disp: list, u: list):
    udot = _epdiff_rhs_raw(grid, k, u)
    points = [x + di for x, di in zip(grid.coords, disp)]
    dispdot = [eval_periodic(grid, ui, points) for ui in u]
    return dispdot, udot


def integrate_epdiff(state0: DiffeoState, T: float, dt: float,
                     store_every: int = 1) -> list:
    """RK4 on the coupled system (phi_t = u o phi, EPDiff for u).

    Returns the list of stored (t, DiffeoState). Aborts when the flow map stops
    being a grid-resolved diffeomorphism (nonpositive Jacobian).
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    grid = state0.grid
    k = state0.k
    disp = [c.copy() for c in state0.disp.components]
    u = [c.copy() for c in state0.u.components]
    n_steps = max(1, int(round(T / dt)))
    out = [(0.0, state0)]
    for i in range(n_steps):
        d1, u1 = _flow_rhs(grid, k, disp, u)
        d2, u2 = _flow_rhs(grid, k,
                           [a + 0.5 * dt * b for a, b in zip(disp, d1)],
                           [a + 0.5 * dt * b for a, b in zip(u, u1)])
        d3, u3 = _flow_rhs(grid, k,
                           [a + 0.5 * dt * b for a, b in zip(disp, d2)],
                           [a + 0.5 * dt * b for a, b in zip(u, u2)])
        d4, u4 = _flow_rhs(grid, k,
                           [a + dt * b for a, b in zip(disp, d3)],
                           [a + dt * b for a, b in zip(u, u3)])
        disp = [a + (dt / 6.0) * (b1 + 2 * b2 + 2 * b3 + b4)
                for a, b1, b2, b3, b4 in zip(disp, d1, d2, d3, d4)]
        u = [a + (dt / 6.0) * (b1 + 2 * b2 + 2 * b3 + b4)
             for a, b1, b2, b3, b4 in zip(u, u1, u2, u3, u4)]
        t = (i + 1) * dt
        jac = jacobian_det(grid, disp)
        if jac.min() <= 0.0:
            raise SolverAbort(
                f"t={t:.6g}: Jacobian lost positivity (min {jac.min():.3e})",
                time=t)
        if (i + 1) % store_every == 0 or (i + 1) == n_steps:
            out.append((t, DiffeoState(
                VectorField(grid, tuple(c.copy() for c in disp)),
                VectorField(grid, tuple(c.copy() for c in u)), k)))
    return out


class InversionError(RuntimeError):
    """Fixed-point inversion of the flow map failed to converge."""


def invert_map(grid: Grid, disp: list, tol: float = 1e-12,
               damping: float = 0.5, max_iter: int = 200) -> list:
    """Inverse displacement q with (x + q) + disp(x + q) = x, by damped fixed point."""
    q = [-di.copy() for di in disp]
    for _ in range(max_iter):
        points = [x + qi for x, qi in zip(grid.coords, q)]
        res = [qi + eval_periodic(grid, di, points)
               for qi, di in zip(q, disp)]
        err = max(np.abs(r).max() for r in res)
        q = [qi - damping * r for qi, r in zip(q, res)]
        if err < tol:
            return q
    raise InversionError(
        f"map inversion stalled at residual {err:.3e} after {max_iter} iterations")


def project_left(phi: DiffeoState):
    """Left projection: rho = Jac(phi^{-1}), normalized to unit mass."""
    rho, _ = project_left_report(phi)
    return rho


def project_left_report(phi: DiffeoState):
    """As project_left, also returning the pre-normalization mass error."""
    grid = phi.grid
    jac = jacobian_det(grid, list(phi.disp.components))
    if jac.min() <= 0.0:
        raise SolverAbort(f"Jacobian not positive (min {jac.min():.3e})")
    q = invert_map(grid, list(phi.disp.components))
    rho_vals = jacobian_det(grid, q)
    mass = float(rho_vals.mean())
    return ScalarField(grid, rho_vals / mass), abs(mass - 1.0)


def pushforward_density(rho0: ScalarField, phi: DiffeoState):
    """Pushforward (rho0 o phi^{-1}) * Jac(phi^{-1}), normalized to unit mass.

    This is the left projection of the flow started at a diffeomorphism
    projecting to rho0, computed without constructing that diffeomorphism:
    the flow from the identity composed on the right leaves it invariant.
    """
    grid = phi.grid
    check_same_grid(grid, rho0.grid)
    q = invert_map(grid, list(phi.disp.components))
    points = [x + qi for x, qi in zip(grid.coords, q)]
    vals = eval_periodic(grid, rho0.values, points) * jacobian_det(grid, q)
    mass = float(vals.mean())
    return ScalarField(grid, vals / mass)


def horizontal_lift(rho: ScalarField, p: ScalarField, phi: DiffeoState,
                    rtol: float = 1e-6) -> VectorField:
    """Eulerian horizontal velocity u = Ainv(rho grad p) over the fiber of phi.

    Rejects rho that disagrees with project_left(phi); compose the result with
    phi (eval_periodic at x + disp) for the Lagrangian form.
    """
    check_same_grid(rho.grid, phi.grid)
    projected = project_left(phi)
    mismatch = l2_norm_values(projected.values - rho.values)
    if mismatch > rtol:
        raise ValueError(
            f"rho does not match the projection of phi (L2 error {mismatch:.3e})")
    state = geodesic.make_state(rho.grid, rho.values, p.values, phi.k)
    return geodesic.horizontal_velocity(state)


def horizontality_defect(u: VectorField, rho: ScalarField, k: int) -> float:
    """L2 norm of the divergence-free Hodge component of w = (1/rho) Au."""
    grid = u.grid
    check_same_grid(grid, rho.grid)
    if rho.values.min() <= 0.0:
        raise ValueError("rho must be strictly positive")
    a_sym = (1.0 + grid.ksq) ** (k + 1)
    m = [np.fft.ifftn(a_sym * np.fft.fftn(c)).real for c in u.components]
    w = [mi / rho.values for mi in m]
    what = [np.fft.fftn(wi) for wi in w]
    ksq = grid.ksq.copy()
    zero = (0,) * grid.dim
    ksq[zero] = 1.0
    kdotw = sum(km * wh for km, wh in zip(grid.k_mesh, what))
    sq = 0.0
    for km, wh in zip(grid.k_mesh, what):
        grad_part = km * kdotw / ksq
        grad_part[zero] = 0.0  # the constant mode is divergence-free
        tilde = wh - grad_part
        sq += float((np.abs(tilde) ** 2).sum()) / grid.npoints ** 2
    return float(np.sqrt(sq))


def epdiff_energy(u: VectorField, k: int) -> float:
    """Right-invariant energy <Au, u> (conserved along EPDiff solutions)."""
    grid = u.grid
    a_sym = (1.0 + grid.ksq) ** (k + 1)
    total = 0.0
    for c in u.components:
        au = np.fft.ifftn(a_sym * np.fft.fftn(c)).real
        total += float((au * c).mean())
    return total


def cross_validate(rho0: ScalarField, p0: ScalarField, k: int, T: float,
                   dt: float, n_checks: int = 11) -> dict:
    """Run the density geodesic and the lifted horizontal EPDiff flow side by side.

    Reports the L2 discrepancy between the density trajectory and the left
    projection of the EPDiff trajectory, the worst horizontality defect, and
    the relative energy drift on both sides.
    """
    if k < 0:
        raise ValueError("cross validation requires k >= 0")
    grid = rho0.grid
    n_steps = max(1, int(round(T / dt)))
    stride = max(1, n_steps // max(1, n_checks - 1))

    traj = geodesic.shoot(rho0, p0, k, T, dt, store_every=stride)
    state0 = traj.states[0]
    u0 = geodesic.horizontal_velocity(state0)
    ep = integrate_epdiff(identity_state(grid, u0, k), T, dt,
                          store_every=stride)

    ep_by_time = {round(t / dt): s for t, s in ep}
    discrepancies = []
    defects = []
    for t, dstate in zip(traj.times, traj.states):
        key = round(t / dt)
        if key not in ep_by_time:
            continue
        phi = ep_by_time[key]
        rho_ep = pushforward_density(rho0, phi)
        discrepancies.append(
            l2_norm_values(rho_ep.values - dstate.rho.values))
        defects.append(horizontality_defect(phi.u, rho_ep, k))

    e_dens = [d.energy for d in traj.diagnostics]
    e_ep = [epdiff_energy(s.u, k) for _, s in ep]

    def rel_drift(values):
        ref = abs(values[0])
        if ref == 0.0:
            return 0.0
        return float(max(abs(v - values[0]) for v in values) / ref)

    return {
        "grid": {"dim": grid.dim, "n": grid.n},
        "k": k,
        "dt": dt,
        "T": T,
        "l2_discrepancy_final": discrepancies[-1],
        "l2_discrepancy_max": max(discrepancies),
        "horizontality_defect_max": max(defects),
        "energy_drift_density": rel_drift(e_dens),
        "energy_drift_epdiff": rel_drift(e_ep),
    }
