"""Constrained mesh deformation.

The deformed vertex set ``c'`` minimises ``E1 + E2 + E3`` subject to the
edge- and altitude-orientation inequalities. Nonlinear quantities (edge
length ratios, altitude ratios, per-triangle scale factors) are frozen at
the current iterate, which turns the energy into a separable quadratic; the
x and y systems share one sparse SPD matrix that is factorised once.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import factorized

import clarabel

from .geometry import perpendicular_feet
from .mesh import CORNERS, LEFT, RIGHT, TOP, BOTTOM, TriangleClasses, TriMesh

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverParams:
    tau: float = 0.4
    eps_t: float = 0.02
    eps_p: float = 0.05
    vertex_tol: float = 0.5
    factor_tol: float = 0.1
    max_outer: int = 100
    max_smooth: int = 500
    max_halvings: int = 20

    def __post_init__(self):
        for name in ("tau", "eps_t", "eps_p", "vertex_tol", "factor_tol", "max_outer", "max_smooth"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


class DegenerateEdgeError(ArithmeticError):
    pass


# --- scale factors --------------------------------------------------------

def _edge_vectors(mesh: TriMesh, points: np.ndarray) -> np.ndarray:
    te = mesh.tri_edges
    return points[te[..., 0]] - points[te[..., 1]]


def optimal_scale_factors(mesh: TriMesh, c_prime: np.ndarray) -> np.ndarray:
    """Least-squares uniform scale taking each triangle's edges onto ``c_prime``'s."""
    d = _edge_vectors(mesh, mesh.vertices)
    dp = _edge_vectors(mesh, np.asarray(c_prime, dtype=np.float64))
    return (d * dp).sum(axis=(1, 2)) / (d * d).sum(axis=(1, 2))


def smoothing_pairs(mesh: TriMesh, classes: TriangleClasses):
    """Edge-adjacent feature-triangle pairs with the number of feature sets they share."""
    adj = mesh.tri_adjacency
    fr = classes.feature_regions
    mult = np.array([len(fr[a] & fr[b]) for a, b in adj], dtype=np.float64)
    keep = mult > 0
    return adj[keep], mult[keep]


def smooth_scale_factors(theta, classes: TriangleClasses, mesh: TriMesh,
                         factor_tol: float = 0.1, max_smooth: int = 500) -> np.ndarray:
    """Jacobi sweeps on the feature-set smoothing objective, starting from ones.

    Sweeps stop once the result is provably within ``factor_tol`` of the
    minimiser. Non-feature triangles keep their own factor.
    """
    theta = np.asarray(theta, dtype=np.float64)
    feature = classes.feature
    u = np.where(feature, 1.0, theta)
    pairs, mult = smoothing_pairs(mesh, classes)
    T = len(theta)
    n_q = np.bincount(pairs.ravel(), weights=np.repeat(mult, 2), minlength=T)
    w = classes.tri_weight
    coupling = mult * (w[pairs[:, 0]] + w[pairs[:, 1]])
    a, b = pairs[:, 0], pairs[:, 1]
    C = sparse.coo_matrix((np.concatenate([coupling, coupling]), (np.concatenate([a, b]), np.concatenate([b, a]))),
                          shape=(T, T)).tocsr()
    denom = n_q + np.asarray(C.sum(axis=1)).ravel()
    isolated = feature & (n_q == 0)
    u[isolated] = theta[isolated]
    active = feature & (n_q > 0)
    if not active.any():
        return u
    # Jacobi contracts the max-norm error by rho per sweep, so the distance to
    # the minimiser is at most rho / (1 - rho) times the last change
    rho = float(np.max((denom[active] - n_q[active]) / denom[active]))
    bound = rho / (1.0 - rho) if rho > 0 else 0.0
    for _ in range(max_smooth):
        nxt = u.copy()
        nxt[active] = (n_q[active] * theta[active] + (C @ u)[active]) / denom[active]
        change = np.max(np.abs(nxt - u))
        u = nxt
        if change * bound < factor_tol:
            break
    return u


# --- energies ---------------------------------------------------------------

E1, E2, E3 = 0, 1, 2


@dataclass
class EnergyTerms:
    """Quadratic residual terms ``weight * |(c'_i - c'_j) - target|^2``."""
    i: np.ndarray
    j: np.ndarray
    weight: np.ndarray
    target: np.ndarray  # (n, 2)
    kind: np.ndarray

    def residuals(self, c_prime: np.ndarray) -> np.ndarray:
        return c_prime[self.i] - c_prime[self.j] - self.target

    def energy(self, c_prime: np.ndarray) -> np.ndarray:
        """Per-kind totals ``(E1, E2, E3)``."""
        r = self.residuals(c_prime)
        per = self.weight * (r * r).sum(axis=1)
        return np.bincount(self.kind, weights=per, minlength=3)

    def gradient(self, c_prime: np.ndarray) -> np.ndarray:
        g = 2.0 * self.weight[:, None] * self.residuals(c_prime)
        out = np.zeros_like(c_prime, dtype=np.float64)
        np.add.at(out, self.i, g)
        np.add.at(out, self.j, -g)
        return out


def altitude_vectors(mesh: TriMesh, points: np.ndarray):
    """For every triangle edge, the foot of the altitude from the opposite
    vertex and the vector foot -> vertex. Shapes (T, 3, 2)."""
    te = mesh.tri_edges
    opp = mesh.triangles
    pi = points[te[..., 0]].reshape(-1, 2)
    pj = points[te[..., 1]].reshape(-1, 2)
    pz = points[opp].reshape(-1, 2)
    foot, _ = perpendicular_feet(pi, pj, pz)
    shape = te.shape[:2] + (2,)
    return foot.reshape(shape), (pz - foot).reshape(shape)


def altitude_jacobian(mesh: TriMesh, points: np.ndarray):
    """Altitude vectors (T, 3, 2) and their derivatives (T, 3, 2, 3, 2) with
    respect to the coordinates of the edge endpoints and the opposite vertex,
    in the order (i, j, z)."""
    te = mesh.tri_edges
    pi = points[te[..., 0]]
    pj = points[te[..., 1]]
    pz = points[mesh.triangles]
    d = pj - pi
    u = pz - pi
    dd = (d * d).sum(-1)[..., None, None]
    du = (d * u).sum(-1)[..., None, None]
    alt = u - (du / dd)[..., 0] * d
    eye = np.eye(2)
    outer_dd = d[..., :, None] * d[..., None, :]
    d_u = eye - outer_dd / dd
    d_d = -(du / dd) * eye - d[..., :, None] * u[..., None, :] / dd + 2.0 * du * outer_dd / (dd * dd)
    jac = np.stack([-d_u - d_d, d_d, d_u], axis=-2)  # (T, 3, 2, 3, 2)
    return alt, jac


def frozen_ratios(mesh: TriMesh, c_prime: np.ndarray):
    """Edge length ratios (per unique edge) and altitude ratios (T, 3) at ``c_prime``."""
    c = mesh.vertices
    e = mesh.edges
    new_len = np.linalg.norm(c_prime[e[:, 0]] - c_prime[e[:, 1]], axis=1)
    if np.any(new_len == 0):
        raise DegenerateEdgeError("deformed mesh has a zero-length edge")
    edge_ratio = new_len / np.linalg.norm(c[e[:, 0]] - c[e[:, 1]], axis=1)
    _, alt = altitude_vectors(mesh, c)
    _, alt_p = altitude_vectors(mesh, c_prime)
    perp_ratio = np.linalg.norm(alt_p, axis=2) / np.linalg.norm(alt, axis=2)
    return edge_ratio, perp_ratio


def assemble_terms(mesh: TriMesh, classes: TriangleClasses, theta_u, edge_ratio, perp_ratio,
                   tau: float) -> EnergyTerms:
    c = mesh.vertices
    te = mesh.tri_edges.reshape(-1, 2)
    d_tri = c[te[:, 0]] - c[te[:, 1]]
    T = mesh.n_triangles

    w1 = np.repeat(classes.tri_weight, 3)
    t1 = np.repeat(np.asarray(theta_u, dtype=np.float64), 3)[:, None] * d_tri

    e = mesh.edges
    d_edge = c[e[:, 0]] - c[e[:, 1]]
    t2 = np.asarray(edge_ratio)[:, None] * d_edge

    wr = np.repeat(classes.region_weights[classes.region_of], 3)
    t3 = np.asarray(perp_ratio).reshape(-1)[:, None] * d_tri

    i = np.concatenate([te[:, 0], e[:, 0], te[:, 0], te[:, 0]])
    j = np.concatenate([te[:, 1], e[:, 1], te[:, 1], te[:, 1]])
    weight = np.concatenate([w1, np.ones(len(e)), wr, tau * wr])
    target = np.concatenate([t1, t2, t3, d_tri])
    kind = np.concatenate([np.full(3 * T, E1), np.full(len(e), E2), np.full(6 * T, E3)])
    return EnergyTerms(i, j, weight, target, kind)


def evaluate_energy(mesh: TriMesh, c_prime, theta_u, classes: TriangleClasses, tau: float = 0.4):
    """Return ``(E1, E2, E3, E_o)`` with ratios taken from ``c_prime`` itself."""
    c_prime = np.asarray(c_prime, dtype=np.float64)
    er, pr = frozen_ratios(mesh, c_prime)
    e1, e2, e3 = assemble_terms(mesh, classes, theta_u, er, pr, tau).energy(c_prime)
    return float(e1), float(e2), float(e3), float(e1 + e2 + e3)


# --- constraints --------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    kind: str  # "edge" or "altitude"
    index: tuple
    axis: int
    value: float


def constraint_products(mesh: TriMesh, c_prime: np.ndarray, reference: np.ndarray | None = None):
    """Orientation products against ``reference`` (default: the original mesh).

    Returns ``(edge_prod (E, 2), alt_prod (T, 3, 2))``.
    """
    c = mesh.vertices if reference is None else reference
    e = mesh.edges
    edge_prod = (c_prime[e[:, 0]] - c_prime[e[:, 1]]) * (c[e[:, 0]] - c[e[:, 1]])
    _, alt = altitude_vectors(mesh, c)
    _, alt_p = altitude_vectors(mesh, c_prime)
    return edge_prod, alt_p * alt


@dataclass
class Exemptions:
    edge: np.ndarray  # (E, 2) bool
    altitude: np.ndarray  # (T, 3, 2) bool


def zero_difference_exemptions(mesh: TriMesh) -> Exemptions:
    """Axes whose original difference is exactly zero carry no constraint."""
    c = mesh.vertices
    e = mesh.edges
    _, alt = altitude_vectors(mesh, c)
    return Exemptions(edge=(c[e[:, 0]] - c[e[:, 1]]) == 0, altitude=alt == 0)


def feasibility_exemptions(mesh: TriMesh, start: np.ndarray, eps_t: float, eps_p: float) -> Exemptions:
    """Axes already below their slack at ``start`` (includes zero differences)."""
    edge_prod, alt_prod = constraint_products(mesh, start)
    zero = zero_difference_exemptions(mesh)
    return Exemptions(edge=zero.edge | (edge_prod < eps_t), altitude=zero.altitude | (alt_prod < eps_p))


def constraint_margins(mesh: TriMesh, c_prime, eps_t: float, eps_p: float, exempt: Exemptions | None = None):
    if exempt is None:
        exempt = zero_difference_exemptions(mesh)
    edge_prod, alt_prod = constraint_products(mesh, np.asarray(c_prime, dtype=np.float64))
    edge_m = np.where(exempt.edge, np.inf, edge_prod - eps_t)
    alt_m = np.where(exempt.altitude, np.inf, alt_prod - eps_p)
    return edge_m, alt_m


def is_feasible(mesh, c_prime, eps_t, eps_p, exempt=None) -> bool:
    edge_m, alt_m = constraint_margins(mesh, c_prime, eps_t, eps_p, exempt)
    return bool(np.all(edge_m >= 0) and np.all(alt_m >= 0))


def constraint_check(mesh: TriMesh, c_prime, eps_t: float = 0.02, eps_p: float = 0.05,
                     exempt: Exemptions | None = None) -> list[Violation]:
    """Every violated edge/altitude orientation inequality; empty when all hold."""
    edge_m, alt_m = constraint_margins(mesh, c_prime, eps_t, eps_p, exempt)
    out = []
    for k, ax in zip(*np.nonzero(edge_m < 0)):
        out.append(Violation("edge", tuple(int(v) for v in mesh.edges[k]), int(ax), float(edge_m[k, ax] + eps_t)))
    for t, e, ax in zip(*np.nonzero(alt_m < 0)):
        out.append(Violation("altitude", (int(t), int(e)), int(ax), float(alt_m[t, e, ax] + eps_p)))
    return out


# --- outer solve ------------------------------------------------------------------

@dataclass
class DeformState:
    c_prime: np.ndarray
    theta: np.ndarray
    theta_u: np.ndarray
    energies: tuple
    converged: bool = False
    status: str = ""
    iterations: int = 0
    trace: list = field(default_factory=list)
    iterates: list = field(default_factory=list)
    exemptions: Exemptions | None = None


def initial_guess(mesh: TriMesh, target_w: float, target_h: float) -> np.ndarray:
    c0 = mesh.vertices * np.array([target_w / mesh.width, target_h / mesh.height])
    tags = mesh.boundary_tags
    c0[mesh.tag_mask(LEFT, "corner-tl", "corner-bl"), 0] = 0.0
    c0[mesh.tag_mask(RIGHT, "corner-tr", "corner-br"), 0] = float(target_w)
    c0[mesh.tag_mask(TOP, "corner-tl", "corner-tr"), 1] = 0.0
    c0[mesh.tag_mask(BOTTOM, "corner-bl", "corner-br"), 1] = float(target_h)
    assert len(tags) == len(c0)
    return c0


def system_matrix(mesh: TriMesh, terms: EnergyTerms) -> sparse.csr_matrix:
    n = mesh.n_vertices
    i, j, w = terms.i, terms.j, terms.weight
    rows = np.concatenate([i, j, i, j])
    cols = np.concatenate([i, j, j, i])
    vals = np.concatenate([w, w, -w, -w])
    return sparse.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()


def system_rhs(mesh: TriMesh, terms: EnergyTerms) -> np.ndarray:
    wt = terms.weight[:, None] * terms.target
    b = np.zeros((mesh.n_vertices, 2))
    np.add.at(b, terms.i, wt)
    np.add.at(b, terms.j, -wt)
    return b


class _AxisSolver:
    def __init__(self, L: sparse.csr_matrix, fixed: np.ndarray, values: np.ndarray):
        self.free = np.nonzero(~fixed)[0]
        self.fixed = np.nonzero(fixed)[0]
        self.values = values[self.fixed]
        L = L.tocsc()
        self.L_fx = L[self.free][:, self.fixed]
        self.solve_ff = factorized(L[self.free][:, self.free].tocsc())

    def __call__(self, b: np.ndarray) -> np.ndarray:
        x = np.empty(len(b))
        x[self.fixed] = self.values
        x[self.free] = self.solve_ff(b[self.free] - self.L_fx @ self.values)
        return x


# Interior-point solutions sit marginally inside their bounds; tighten the
# slacks a little so the exact check downstream passes.
QP_SLACK = 1e-6
QP_PASSES = 4


class _ConstrainedStep:
    """Quadratic step with the orientation inequalities: edge products are
    linear in ``c'``; altitude products are linearised at the current iterate."""

    def __init__(self, mesh: TriMesh, L: sparse.csr_matrix, fixed_x, fixed_y, c0, exempt: Exemptions,
                 eps_t: float, eps_p: float):
        n = mesh.n_vertices
        self.mesh, self.n, self.exempt = mesh, n, exempt
        self.eps_t, self.eps_p = eps_t, eps_p
        self.P = sparse.triu(sparse.block_diag([L, L])).tocsc()
        fixed = np.concatenate([np.nonzero(fixed_x)[0], n + np.nonzero(fixed_y)[0]])
        self.fixed = fixed
        self.A_eq = sparse.csr_matrix((np.ones(fixed.size), (np.arange(fixed.size), fixed)), shape=(fixed.size, 2 * n))
        self.b_eq = np.concatenate([c0[fixed_x, 0], c0[fixed_y, 1]])

        # edge rows: d_a * (c'_i - c'_j) >= eps_t for every non-exempt (edge, axis)
        c = mesh.vertices
        e = mesh.edges
        d = c[e[:, 0]] - c[e[:, 1]]
        k, ax = np.nonzero(~exempt.edge)
        rows = np.repeat(np.arange(k.size), 2)
        cols = np.stack([e[k, 0] + ax * n, e[k, 1] + ax * n], axis=1).ravel()
        vals = np.stack([d[k, ax], -d[k, ax]], axis=1).ravel()
        self.G_edge = sparse.csr_matrix((vals, (rows, cols)), shape=(k.size, 2 * n))
        self.h_edge = np.full(k.size, eps_t + QP_SLACK)

        _, alt0 = altitude_vectors(mesh, c)
        self.alt0 = alt0
        self.alt_idx = np.nonzero(~exempt.altitude)

    def _altitude_rows(self, cp: np.ndarray):
        mesh, n = self.mesh, self.n
        alt, jac = altitude_jacobian(mesh, cp)
        t, e, a = self.alt_idx
        m = t.size
        g = alt[t, e, a] * self.alt0[t, e, a]
        grad = jac[t, e, a] * self.alt0[t, e, a][:, None, None]  # (m, 3, 2)
        te = mesh.tri_edges
        verts = np.stack([te[t, e, 0], te[t, e, 1], mesh.triangles[t, e]], axis=1)  # (m, 3)
        cols = (verts[:, :, None] + n * np.arange(2)[None, None, :]).reshape(m, 6)
        flat_cp = np.concatenate([cp[:, 0], cp[:, 1]])
        G = sparse.csr_matrix((grad.reshape(m, 6).ravel(), (np.repeat(np.arange(m), 6), cols.ravel())),
                              shape=(m, 2 * n))
        h = self.eps_p + QP_SLACK - g + G @ flat_cp
        return G, h

    def __call__(self, cp: np.ndarray, b: np.ndarray) -> np.ndarray | None:
        G_alt, h_alt = self._altitude_rows(cp)
        A = sparse.vstack([self.A_eq, -self.G_edge, -G_alt]).tocsc()
        rhs = np.concatenate([self.b_eq, -self.h_edge, -h_alt])
        q = -np.concatenate([b[:, 0], b[:, 1]])
        cones = [clarabel.ZeroConeT(self.A_eq.shape[0]),
                 clarabel.NonnegativeConeT(self.G_edge.shape[0] + G_alt.shape[0])]
        settings = clarabel.DefaultSettings()
        settings.verbose = False
        sol = clarabel.DefaultSolver(self.P, q, A, rhs, cones, settings).solve()
        if str(sol.status) not in ("Solved", "AlmostSolved"):
            log.warning("constrained step failed (%s)", sol.status)
            return None
        z = np.asarray(sol.x)
        z[self.fixed] = self.b_eq  # pinned coordinates exactly, not to solver tolerance
        return np.stack([z[:self.n], z[self.n:]], axis=1)


def _no_flips(mesh: TriMesh, pts: np.ndarray) -> bool:
    return bool(np.all(mesh.areas(pts) > 0))


def solve_retarget_mesh(mesh: TriMesh, classes: TriangleClasses, target_w: int, target_h: int,
                        params: SolverParams = SolverParams(), keep_iterates: bool = False) -> DeformState:
    """Alternate between refreshing the frozen ratios / smoothed scale factors
    and a constrained quadratic solve for the vertices, from the axis-scaled
    initial guess, until no vertex moves by ``vertex_tol`` or more."""
    if target_w < 2 or target_h < 2:
        raise ValueError("target dimensions must be >= 2")
    c0 = initial_guess(mesh, target_w, target_h)
    exempt = feasibility_exemptions(mesh, c0, params.eps_t, params.eps_p)
    if not _no_flips(mesh, c0):
        raise DegenerateEdgeError("initial guess folds a triangle")

    fixed_x = mesh.tag_mask(LEFT, RIGHT, *CORNERS)
    fixed_y = mesh.tag_mask(TOP, BOTTOM, *CORNERS)
    ones = np.ones(mesh.n_triangles)
    er, pr = frozen_ratios(mesh, c0)
    L = system_matrix(mesh, assemble_terms(mesh, classes, ones, er, pr, params.tau))
    solve_x = _AxisSolver(L, fixed_x, c0[:, 0])
    solve_y = _AxisSolver(L, fixed_y, c0[:, 1])
    constrained = _ConstrainedStep(mesh, L, fixed_x, fixed_y, c0, exempt, params.eps_t, params.eps_p)

    def acceptable(pts):
        return _no_flips(mesh, pts) and is_feasible(mesh, pts, params.eps_t, params.eps_p, exempt)

    cp = c0
    state = DeformState(c_prime=cp, theta=optimal_scale_factors(mesh, cp), theta_u=ones,
                        energies=evaluate_energy(mesh, cp, ones, classes, params.tau), exemptions=exempt)
    if keep_iterates:
        state.iterates.append(cp.copy())
    status = "max_outer"
    for it in range(1, params.max_outer + 1):
        theta = optimal_scale_factors(mesh, cp)
        theta_u = smooth_scale_factors(theta, classes, mesh, params.factor_tol, params.max_smooth)
        er, pr = frozen_ratios(mesh, cp)
        b = system_rhs(mesh, assemble_terms(mesh, classes, theta_u, er, pr, params.tau))
        cand = np.stack([solve_x(b[:, 0]), solve_y(b[:, 1])], axis=1)
        if not acceptable(cand):
            # sequential linearisation: re-solve around the previous candidate
            # while its altitude products still miss their bound
            around = cp
            for _ in range(QP_PASSES):
                qp = constrained(around, b)
                if qp is None:
                    break
                cand = around = qp
                if acceptable(cand):
                    break
        step = cand - cp
        proposed = float(np.max(np.linalg.norm(step, axis=1)))
        alpha = 1.0
        trial = None
        for _ in range(params.max_halvings + 1):
            t = cp + alpha * step
            if acceptable(t):
                trial = t
                break
            alpha *= 0.5
        if trial is None:
            status = "infeasible"
            log.warning("step damping failed at iteration %d; keeping previous iterate", it)
            break
        disp = float(np.max(np.linalg.norm(trial - cp, axis=1)))
        cp = trial
        energies = evaluate_energy(mesh, cp, theta_u, classes, params.tau)
        state.trace.append({"iteration": it, "E1": energies[0], "E2": energies[1], "E3": energies[2],
                            "E_o": energies[3], "max_disp": disp, "step": alpha})
        state.c_prime, state.theta, state.theta_u, state.energies = cp, theta, theta_u, energies
        state.iterations = it
        if keep_iterates:
            state.iterates.append(cp.copy())
        # judged on the proposed move so that a heavily damped step is not mistaken for convergence
        if proposed < params.vertex_tol:
            status = "converged"
            break
    state.converged = status == "converged"
    state.status = status
    if not state.converged:
        log.warning("mesh solve stopped without converging (%s)", status)
    return state


def write_trace(path, state: DeformState) -> None:
    with open(path, "w") as fh:
        fh.write("iteration E1 E2 E3 E_o max_disp\n")
        for row in state.trace:
            fh.write(f"{row['iteration']} {row['E1']:.9g} {row['E2']:.9g} {row['E3']:.9g} "
                     f"{row['E_o']:.9g} {row['max_disp']:.9g}\n")
