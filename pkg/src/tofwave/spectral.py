"""Linear analysis of the front: limit matrices, dispersion curves, the critical
spatial eigenvalue branch, the block-matrix classifier, the discretized
linearization with its adjoint null vector, and resolvent/spectrum probes.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.integrate import trapezoid
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigs, eigsh, splu

from . import fd
from .errors import (
    BranchCollision,
    InsufficientSamples,
    NoConvergence,
    NullSpaceAmbiguous,
    SingularA,
    SolveFailed,
)
from .gridw import Grid, WeightedNormSpec, derivative, weight_power
from .model import ModelParams, RestState, S_omega, evaluate_Df, rotation_scaling
from .profile import WaveProfile


# ---------------------------------------------------------------- limit matrices


@dataclass
class LimitMatrices:
    A: np.ndarray
    c: float
    C_minus: np.ndarray
    C_plus: np.ndarray
    sigma1: float
    sigma2: float

    @classmethod
    def build(cls, params: ModelParams, rest: RestState, c: float) -> "LimitMatrices":
        A = params.A
        if abs(np.linalg.det(A)) < 1e-14:
            raise SingularA("diffusion matrix is singular")
        g1, g2 = (float(a) for a in params.g(0.0))
        S = S_omega(rest.omega)
        C_minus = S + rotation_scaling(g1, g2)
        C_plus = S + evaluate_Df(params, rest.v_inf)
        return cls(A, float(c), C_minus, C_plus, rest.sigma1, rest.sigma2)

    def C(self, side: str) -> np.ndarray:
        return self.C_plus if side == "plus" else self.C_minus

    def M(self, s: complex, side: str) -> np.ndarray:
        """First-order form (0, I; A^-1 (s I - C), -c A^-1) of A u'' + c u' + C u = s u."""
        Ainv = np.linalg.inv(self.A)
        top = np.hstack([np.zeros((2, 2)), np.eye(2)])
        bottom = np.hstack([Ainv @ (s * np.eye(2) - self.C(side)), -self.c * Ainv])
        return np.vstack([top, bottom]).astype(complex)

    def M_plus(self, s: complex) -> np.ndarray:
        return self.M(s, "plus")

    def M_minus(self, s: complex) -> np.ndarray:
        return self.M(s, "minus")

    def D(self, nu: float, side: str) -> np.ndarray:
        """Dispersion matrix -nu^2 A + i nu c I + C."""
        return -(nu * nu) * self.A + 1j * nu * self.c * np.eye(2) + self.C(side)


# ---------------------------------------------------------------- dispersion curves


@dataclass
class SpectralCurve:
    branch_id: int
    side: str
    nu: np.ndarray
    s: np.ndarray

    def residuals(self, lm: LimitMatrices) -> np.ndarray:
        return np.array([abs(np.linalg.det(si * np.eye(2) - lm.D(n, self.side))) for n, si in zip(self.nu, self.s)])


def eig2(M: np.ndarray) -> np.ndarray:
    """Eigenvalues of a complex 2x2 matrix in closed form."""
    tr = M[0, 0] + M[1, 1]
    det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
    half = 0.5 * tr
    disc = np.sqrt(half * half - det + 0j)
    r1 = half + disc if abs(half + disc) >= abs(half - disc) else half - disc
    r2 = det / r1 if r1 != 0 else half - disc
    return np.array([r1, r2])


def dispersion_curves(params: ModelParams, rest: RestState, c: float, nu_grid) -> list[SpectralCurve]:
    """Roots s of det(s I - D(nu)) = 0 for both sides, grouped into continuous branches."""
    lm = LimitMatrices.build(params, rest, c)
    nu_grid = np.asarray(nu_grid, dtype=float)
    curves = []
    for side in ("plus", "minus"):
        roots = np.array([eig2(lm.D(n, side)) for n in nu_grid])
        for i in range(1, len(nu_grid)):
            prev = roots[i - 1]
            a, b = roots[i]
            if abs(a - prev[0]) + abs(b - prev[1]) > abs(b - prev[0]) + abs(a - prev[1]):
                roots[i] = [b, a]
        for br in range(2):
            curves.append(SpectralCurve(br, side, nu_grid.copy(), roots[:, br].copy()))
    return curves


def critical_curve(curves: list[SpectralCurve]) -> SpectralCurve:
    """The plus-side branch passing closest to the origin."""
    plus = [cv for cv in curves if cv.side == "plus"]
    return min(plus, key=lambda cv: float(np.min(np.abs(cv.s))))


def write_curves_csv(path, curves: list[SpectralCurve]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["nu", "re_s", "im_s", "branch", "side"])
        for cv in curves:
            for n, s in zip(cv.nu, cv.s):
                w.writerow([repr(float(n)), repr(float(s.real)), repr(float(s.imag)), cv.branch_id, cv.side])


# ---------------------------------------------------------------- crescent geometry


@dataclass(frozen=True)
class CrescentParams:
    kappa: float
    gamma: float
    rho: float
    delta: float

    def __post_init__(self):
        if min(self.kappa, self.gamma, self.rho, self.delta) <= 0:
            raise ValueError("crescent parameters must be positive")
        if not self.delta < self.rho:
            raise ValueError("need delta < rho")


@dataclass
class TangencyFit:
    kappa_fit: float
    residual: float
    n_samples: int


def fit_tangency(curve: SpectralCurve | np.ndarray, radius: float = 0.1) -> TangencyFit:
    """Least-squares fit of Re s = -kappa (Im s)^2 on samples with |s| < radius."""
    s = curve.s if isinstance(curve, SpectralCurve) else np.asarray(curve, dtype=complex)
    sel = np.abs(s) < radius
    y = s.imag[sel]
    r = s.real[sel]
    if np.count_nonzero(y != 0.0) < 3:
        raise InsufficientSamples(f"only {np.count_nonzero(sel)} samples within |s| < {radius}")
    y2 = y * y
    kappa = -float(np.dot(r, y2) / np.dot(y2, y2))
    res = float(np.sqrt(np.mean((r + kappa * y2) ** 2)))
    return TangencyFit(kappa, res, int(np.count_nonzero(sel)))


def crescent_bound(im_s, p: CrescentParams):
    a = np.abs(im_s)
    return -p.kappa * np.minimum(a, p.rho) ** 2 + p.gamma * np.minimum(p.rho - a, 0.0)


def crescent_contains(s, p: CrescentParams, origin_tol: float = 0.0):
    """Membership in {s != 0 : Re s >= bound(Im s)} intersected with the closed delta-ball."""
    s = np.asarray(s, dtype=complex)
    inside = (s.real >= crescent_bound(s.imag, p)) & (np.abs(s) <= p.delta) & (np.abs(s) > origin_tol)
    return bool(inside) if inside.ndim == 0 else inside


def fit_crescent(curves: list[SpectralCurve], kappa_fit: float, factor: float = 0.9,
                 origin_tol: float = 1e-14) -> CrescentParams:
    """Crescent fitted to the sampled dispersion set.

    kappa = factor * kappa_fit; rho is half the smallest |Im s| at which a
    sample enters the parabola Re s >= -kappa (Im s)^2; gamma is factor times
    the largest slope keeping every sample with |Im s| > rho outside; delta = rho/2.
    """
    s = np.concatenate([cv.s for cv in curves])
    s = s[np.abs(s) > origin_tol]
    kappa = factor * kappa_fit
    entering = s[s.real >= -kappa * s.imag ** 2]
    rho = 0.5 * (float(np.min(np.abs(entering.imag))) if entering.size else float(np.max(np.abs(s.imag))))
    for _ in range(60):
        far = s[np.abs(s.imag) > rho]
        gap = -kappa * rho * rho - far.real
        if far.size == 0:
            gamma = 1.0
            break
        if np.all(gap > 0):
            gamma = factor * float(np.min(gap / (np.abs(far.imag) - rho)))
            break
        rho *= 0.5
    else:
        raise NoConvergence("could not fit a crescent to the dispersion samples")
    return CrescentParams(kappa, gamma, rho, 0.5 * rho)


# ---------------------------------------------------------------- small eigenproblems


def char_poly(M: np.ndarray) -> np.ndarray:
    """Monic characteristic polynomial coefficients (highest degree first), Faddeev-LeVerrier."""
    M = np.asarray(M, dtype=complex)
    n = M.shape[0]
    coeffs = [1.0 + 0j]
    Mk = np.zeros_like(M)
    I = np.eye(n)
    for k in range(1, n + 1):
        Mk = M @ (Mk + coeffs[-1] * I)
        coeffs.append(-np.trace(Mk) / k)
    return np.array(coeffs)


def eigens_4x4(M: np.ndarray, tol: float = 1e-10, max_iter: int = 2000) -> np.ndarray:
    """Eigenvalues of a small matrix as roots of its characteristic polynomial.

    Durand-Kerner iteration followed by Newton refinement; the residual
    |det(lambda I - M)| must fall below tol * scale with scale = max(1, |M|)^n.
    """
    M = np.asarray(M, dtype=complex)
    if not np.all(np.isfinite(M)):
        raise NoConvergence("matrix has non-finite entries")
    n = M.shape[0]
    p = char_poly(M)
    dp = np.polyder(p)
    radius = 1.0 + float(np.max(np.abs(p[1:])))
    z = radius * (0.4 + 0.9j) ** np.arange(n)
    for _ in range(max_iter):
        num = np.polyval(p, z)
        den = np.array([np.prod(z[i] - np.delete(z, i)) for i in range(n)])
        den[den == 0] = 1e-300
        step = num / den
        z = z - step
        if np.max(np.abs(step)) <= 1e-15 * max(1.0, float(np.max(np.abs(z)))):
            break
    for i in range(n):
        for _ in range(5):
            d = np.polyval(dp, z[i])
            if d == 0:
                break
            cand = z[i] - np.polyval(p, z[i]) / d
            if abs(np.polyval(p, cand)) < abs(np.polyval(p, z[i])):
                z[i] = cand
            else:
                break
    scale = max(1.0, float(np.linalg.norm(M, 2))) ** n
    resid = np.array([abs(np.linalg.det(zi * np.eye(n) - M)) for zi in z])
    if np.max(resid) > tol * scale:
        raise NoConvergence(f"characteristic residual {np.max(resid):.3e} exceeds tolerance")
    return z


# ---------------------------------------------------------------- critical branch


def predicted_lambda_derivatives(params: ModelParams, rest: RestState, c: float) -> dict:
    """lambda'(0) = 1/c and lambda''(0) = 2 q / c for the branch through the origin.

    q is fixed by c^2 sigma1 q = -(alpha1 sigma1 + alpha2 sigma2); the opposite sign
    choice is reported as `q_opposite_sign` for comparison.
    """
    comb = params.alpha1 * rest.sigma1 + params.alpha2 * rest.sigma2
    q = -comb / (c * c * rest.sigma1)
    return {"d1": 1.0 / c, "d2": 2.0 * q / c, "q": q, "q_opposite_sign": -q, "kappa_fit": -q}


def _branch_step(lm: LimitMatrices, lam_prev: complex, gap_prev: float, s: complex):
    ev = eigens_4x4(lm.M_plus(s))
    d = np.abs(ev - lam_prev)
    i = int(np.argmin(d))
    if d[i] > 0.4 * gap_prev:
        raise BranchCollision(f"branch jump at s = {s}: moved {d[i]:.3e}, radius {0.4 * gap_prev:.3e}")
    others = np.delete(ev, i)
    return ev[i], float(np.min(np.abs(others - ev[i])))


def follow_branch(lm: LimitMatrices, s_path) -> np.ndarray:
    """Continue the eigenvalue of M+(s) that vanishes at s = 0 along s_path (starting at 0)."""
    s_path = np.asarray(s_path, dtype=complex)
    if s_path[0] != 0:
        raise ValueError("path must start at s = 0")
    ev = eigens_4x4(lm.M_plus(0.0))
    i = int(np.argmin(np.abs(ev)))
    lam = ev[i]
    gap = float(np.min(np.abs(np.delete(ev, i) - lam)))
    out = [lam]
    for s in s_path[1:]:
        lam, gap = _branch_step(lm, lam, gap, s)
        out.append(lam)
    return np.array(out)


def _lambda_at(lm: LimitMatrices, s: complex, n_sub: int = 8) -> complex:
    return follow_branch(lm, np.linspace(0.0, s, n_sub + 1))[-1]


@dataclass
class LambdaBranch:
    lambda0: complex
    d1: complex
    d2: complex
    predicted: dict
    paths: list = field(default_factory=list)  # (a, s samples, lambda samples, min ratio)

    @property
    def min_ratio(self) -> float:
        vals = [p["min_ratio"] for p in self.paths if math.isfinite(p["min_ratio"])]
        return min(vals) if vals else float("nan")


def track_lambda(params: ModelParams, rest: RestState, c: float, s_path=None, h: float = 0.02,
                 path_slopes=None, tau_max: float = 0.1, n_tau: int = 40) -> LambdaBranch:
    """Critical branch lambda(s) of M+(s): value and Richardson derivatives at 0,
    plus Re lambda / |lambda|^2 along parabolic paths s = i tau - a tau^2.
    """
    lm = LimitMatrices.build(params, rest, c)
    lam0 = follow_branch(lm, [0.0])[0]

    def D1(hh):
        return (_lambda_at(lm, hh) - _lambda_at(lm, -hh)) / (2 * hh)

    def D2(hh):
        return (_lambda_at(lm, hh) - 2 * lam0 + _lambda_at(lm, -hh)) / (hh * hh)

    d1 = (4 * D1(h / 2) - D1(h)) / 3
    d2 = (4 * D2(h / 2) - D2(h)) / 3
    pred = predicted_lambda_derivatives(params, rest, c)
    branch = LambdaBranch(lam0, d1, d2, pred)
    if path_slopes is None:
        kstar = 0.9 * (-c * float(np.real(d2)) / 2.0)
        path_slopes = np.linspace(0.0, kstar, 5)
    for a in path_slopes:
        for sgn in (1.0, -1.0):
            taus = sgn * np.linspace(0.0, tau_max, n_tau + 1)
            s = 1j * taus - a * taus ** 2
            lam = follow_branch(lm, s)
            ratio = lam[1:].real / np.abs(lam[1:]) ** 2
            branch.paths.append({"a": float(a), "sign": sgn, "s": s, "lambda": lam, "min_ratio": float(np.min(ratio))})
    if s_path is not None:
        branch.paths.append({"a": float("nan"), "sign": 0.0, "s": np.asarray(s_path),
                             "lambda": follow_branch(lm, s_path), "min_ratio": float("nan")})
    return branch


# ---------------------------------------------------------------- block-matrix classifier


def classify_block_matrix(A, B, C, tol: float = 1e-9) -> tuple[int, int, int]:
    """Counts (stable, center, unstable) of eigenvalues of (0, I; A^-1 C, -A^-1 B)."""
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    B = np.atleast_2d(np.asarray(B, dtype=complex))
    C = np.atleast_2d(np.asarray(C, dtype=complex))
    m = A.shape[0]
    if np.linalg.cond(A) > 1e12:
        raise SingularA("A is singular or nearly so")
    Ainv = np.linalg.inv(A)
    M = np.block([[np.zeros((m, m)), np.eye(m)], [Ainv @ C, -Ainv @ B]])
    ev = np.linalg.eigvals(M)
    t = tol * max(1.0, float(np.linalg.norm(M, 2)))
    re = ev.real
    return int(np.sum(re < -t)), int(np.sum(np.abs(re) <= t)), int(np.sum(re > t))


def lower_spectral_bound(A) -> float:
    """min over unit x of Re x^H A x, i.e. the smallest eigenvalue of the Hermitian part."""
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    return float(np.linalg.eigvalsh(0.5 * (A + A.conj().T))[0])


def _random_orthogonal(m: int, rng: np.random.Generator, complex_: bool = False) -> np.ndarray:
    Z = rng.normal(size=(m, m)) + (1j * rng.normal(size=(m, m)) if complex_ else 0.0)
    Q, R = np.linalg.qr(Z)
    return Q * (np.diag(R) / np.abs(np.diag(R)))[None, :]


def random_block_instance(m: int, kind: str, rng: np.random.Generator, margin: float = 0.9):
    """Random (A, B, C) meeting the hypotheses of the hyperbolic ("hyperbolic") or the
    simple-center ("center") block-matrix case.

    hyperbolic: real A, B and complex C with positive lower spectral bounds for A and C
    and |B - B^T|^2 <= margin * 16 lambda^-(A) lambda^-(C).
    center: B = b I with b > 0, C with lower bound 0 and a simple zero eigenvalue.
    """
    Qa = _random_orthogonal(m, rng)
    A = Qa @ np.diag(rng.uniform(0.5, 3.0, m)) @ Qa.T
    Ka = rng.normal(size=(m, m))
    A = A + 0.5 * (Ka - Ka.T)
    if kind == "hyperbolic":
        U = _random_orthogonal(m, rng, complex_=True)
        C = U @ np.diag(rng.uniform(0.5, 3.0, m) + 1j * rng.normal(size=m)) @ U.conj().T
        N = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
        C = C + 0.5 * (N - N.conj().T)
        Bs = rng.normal(size=(m, m))
        Kb = rng.normal(size=(m, m))
        skew = Kb - Kb.T
        limit = math.sqrt(margin * 16.0 * lower_spectral_bound(A) * lower_spectral_bound(C))
        skew *= rng.uniform(0.0, 1.0) * limit / np.linalg.norm(skew, 2)
        B = 0.5 * (Bs + Bs.T) + 0.5 * skew
        return A, B, C
    if kind == "center":
        U = _random_orthogonal(m, rng, complex_=True)
        d = np.concatenate([[0.0], rng.uniform(0.5, 3.0, m - 1) + 1j * rng.normal(size=m - 1)])
        C = U @ np.diag(d) @ U.conj().T
        B = rng.uniform(0.2, 3.0) * np.eye(m)
        return A, B, C
    raise ValueError(f"unknown instance kind {kind!r}")


# ---------------------------------------------------------------- discrete linearization


@dataclass
class DiscreteOperator:
    matrix: sparse.csc_matrix
    grid: Grid
    profile: WaveProfile
    adjoint: bool = False

    def apply(self, u: np.ndarray) -> np.ndarray:
        """Apply to a full (N, 2) field; end values are ignored and the result has zero ends."""
        return fd.embed_interior(self.matrix @ fd.flatten_interior(u), self.grid.N)


def _profile_jacobian_terms(profile: WaveProfile) -> np.ndarray:
    S = S_omega(profile.omega)
    return S[None, :, :] + evaluate_Df(profile.params, profile.v_star[1:-1])


def assemble_L(profile: WaveProfile) -> DiscreteOperator:
    """A D2 + c D1 + S_omega + Df(v_star) with homogeneous Dirichlet ends."""
    diag = _profile_jacobian_terms(profile)
    M = fd.linear_operator(profile.params.A, profile.c, profile.grid.h, diag)
    return DiscreteOperator(M, profile.grid, profile)


def assemble_L_adjoint(profile: WaveProfile) -> DiscreteOperator:
    """A^T D2 - c D1 + S_omega^T + Df(v_star)^T assembled from the formal adjoint."""
    diag = np.transpose(_profile_jacobian_terms(profile), (0, 2, 1))
    M = fd.linear_operator(profile.params.A.T, -profile.c, profile.grid.h, diag)
    return DiscreteOperator(M, profile.grid, profile, adjoint=True)


def adjoint_transpose_difference(L: DiscreteOperator, L_adj: DiscreteOperator) -> float:
    """Largest entry of |L^T - L_adj| (zero on a uniform grid away from boundary rows)."""
    D = (L.matrix.T - L_adj.matrix).tocoo()
    return float(np.max(np.abs(D.data))) if D.nnz else 0.0


def inner(u: np.ndarray, v: np.ndarray, grid: Grid) -> float:
    """Unweighted L2 inner product by the trapezoidal rule."""
    return float(trapezoid(np.sum(np.conj(u) * v, axis=-1).real, dx=grid.h))


def kernel_residual(L: DiscreteOperator) -> float:
    """||L v_star_x|| / ||v_star_x|| in the discrete L2 norm."""
    vx = L.profile.v_star_x
    r = L.apply(vx)
    return math.sqrt(inner(r, r, L.grid) / inner(vx, vx, L.grid))


def weighted_norm_complex(v: np.ndarray, spec: WeightedNormSpec, grid: Grid) -> float:
    total = 0.0
    w2 = weight_power(grid.x, 2.0 * spec.k)
    d = v
    for j in range(spec.sobolev_order + 1):
        if j > 0:
            d = derivative(d, grid.h)
        total += trapezoid(w2 * np.sum(np.abs(d) ** 2, axis=-1), dx=grid.h)
    return math.sqrt(total)


def smallest_singular_values(matrix: sparse.spmatrix, k: int = 2) -> np.ndarray:
    """k smallest singular values by shift-invert Lanczos on M^T M with one sparse LU."""
    lu = splu(sparse.csc_matrix(matrix))
    n = matrix.shape[0]
    MtM = LinearOperator((n, n), matvec=lambda x: matrix.T @ (matrix @ x), dtype=float)
    inv = LinearOperator((n, n), matvec=lambda x: lu.solve(lu.solve(x, trans="T")), dtype=float)
    vals = eigsh(MtM, k=k, sigma=0.0, OPinv=inv, which="LM", return_eigenvectors=False, v0=np.ones(n))
    return np.sort(np.sqrt(np.abs(vals)))


@dataclass
class AdjointNullVector:
    psi2: np.ndarray
    eigenvalue: float
    residual: float
    singular_values: np.ndarray
    right_tail_max: float
    left_tail_rate: float


def adjoint_null_vector(L_adj: DiscreteOperator, profile: WaveProfile | None = None, tol: float = 1e-6,
                        max_iter: int = 50, check_separation: bool = True) -> AdjointNullVector:
    """Near-null vector of the discrete adjoint by inverse iteration, normalized by (psi2, v_star_x) = 1."""
    profile = profile or L_adj.profile
    grid = L_adj.grid
    M = L_adj.matrix
    lu = splu(M)
    n = M.shape[0]
    x = np.ones(n) / math.sqrt(n)
    lam = 0.0
    res = float("inf")
    for _ in range(max_iter):
        y = lu.solve(x)
        x = y / np.linalg.norm(y)
        Mx = M @ x
        lam = float(x @ Mx)
        res = float(np.linalg.norm(Mx))
        if res < tol * 1e-3:
            break
    if res > tol:
        raise NoConvergence(f"inverse iteration residual {res:.3e}")
    sv = smallest_singular_values(M) if check_separation else np.array([res, float("inf")])
    if check_separation and sv[1] < 10.0 * sv[0]:
        raise NullSpaceAmbiguous(f"smallest singular values {sv[0]:.3e}, {sv[1]:.3e} not separated")
    # Newton refinement of (x, lam) on M x = lam x, (x, v_star_x) = 1; repeated
    # residual corrections carry the tails to full relative precision
    e_row = grid.h * fd.flatten_interior(profile.v_star_x)
    x = x / float(e_row @ x)
    I = sparse.identity(n, format="csc")
    for _ in range(12):
        r = np.concatenate([M @ x - lam * x, [float(e_row @ x) - 1.0]])
        J = sparse.bmat([[M - lam * I, sparse.csc_matrix(-x[:, None])], [sparse.csc_matrix(e_row[None, :]), None]],
                        format="csc")
        d = splu(J).solve(-r)
        x = x + d[:-1]
        lam = lam + float(d[-1])
        live = np.abs(x) > 1e-280
        if float(np.max(np.abs(d[:-1][live]) / np.abs(x[live]))) < 1e-6:
            break
    psi = fd.embed_interior(x, grid.N)
    mag = np.sqrt(np.sum(psi * psi, axis=-1))
    xg = grid.x
    sel = (xg < -0.1 * grid.L) & (xg > -0.4 * grid.L) & (mag > 1e-280)
    rate = float(np.polyfit(xg[sel], np.log(mag[sel]), 1)[0]) if np.count_nonzero(sel) > 5 else float("nan")
    right_max = float(np.max(mag[xg > 0])) if np.any(xg > 0) else float("nan")
    Mpsi = M @ fd.flatten_interior(psi)
    rel = float(np.linalg.norm(Mpsi) / np.linalg.norm(fd.flatten_interior(psi)))
    return AdjointNullVector(psi, lam, rel, sv, right_max, rate)


def projector_Pk(r: np.ndarray, psi2: np.ndarray, v_star_x: np.ndarray, grid: Grid) -> np.ndarray:
    """Rank-one projection v_star_x (psi2, r)."""
    return v_star_x * inner(psi2, r, grid)


# ---------------------------------------------------------------- probes


@dataclass
class ResolventRow:
    s: complex
    norm_v: float
    norm_Pkr: float
    norm_r_strong: float


def resolvent_probe(L: DiscreteOperator, r: np.ndarray, s_path, k: float, mu: float,
                    psi2: np.ndarray) -> list[ResolventRow]:
    """Solve (s I - L) v = r along s_path and record weighted norms."""
    grid = L.grid
    vx = L.profile.v_star_x
    Pr = projector_Pk(r, psi2, vx, grid)
    nPr = weighted_norm_complex(Pr, WeightedNormSpec(k, 0), grid)
    nQr = weighted_norm_complex(r - Pr, WeightedNormSpec(k + 1.0 + mu, 0), grid)
    n = L.matrix.shape[0]
    I = sparse.identity(n, format="csc", dtype=complex)
    rhs = fd.flatten_interior(r).astype(complex)
    rows = []
    for s in s_path:
        try:
            lu = splu((s * I - L.matrix.astype(complex)).tocsc())
            v = lu.solve(rhs)
        except RuntimeError as exc:
            raise SolveFailed(str(exc), s=s) from exc
        if not np.all(np.isfinite(v)):
            raise SolveFailed("non-finite resolvent solution", s=s)
        V = np.zeros((grid.N, 2), dtype=complex)
        V[1:-1] = v.reshape(-1, 2)
        rows.append(ResolventRow(complex(s), weighted_norm_complex(V, WeightedNormSpec(k, 1), grid), nPr, nQr))
    return rows


def write_probe_csv(path, rows: list[ResolventRow]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["re_s", "im_s", "norm_v", "norm_Pkr", "norm_r_strong"])
        for row in rows:
            w.writerow([repr(row.s.real), repr(row.s.imag), repr(row.norm_v), repr(row.norm_Pkr), repr(row.norm_r_strong)])


def loglog_slope(s_abs, values) -> float:
    return float(np.polyfit(np.log(np.asarray(s_abs)), np.log(np.asarray(values)), 1)[0])


def numerical_kernel_dim(sv: np.ndarray, separation: float = 10.0) -> int:
    """Number of singular values below the largest relative gap, if that gap exceeds separation."""
    sv = np.sort(np.asarray(sv, dtype=float))
    ratios = sv[1:] / np.maximum(sv[:-1], 1e-300)
    i = int(np.argmax(ratios))
    return i + 1 if ratios[i] >= separation else 0


def morse_index(lm: LimitMatrices, s: complex, side: str) -> int:
    ev = np.linalg.eigvals(lm.M(s, side))
    return int(np.sum(ev.real > 0))


@dataclass
class SpectrumReport:
    candidates: list  # dicts with s, artifact flag, reason
    violations: list
    kernel_dims: tuple
    singular_values_L: np.ndarray
    singular_values_L2: np.ndarray


def point_spectrum_probe(L: DiscreteOperator, box: tuple, beta_E: float = 0.0, n_shifts: tuple = (4, 4),
                         k_per_shift: int = 6, artifact_radius: float = 0.05, kernel_tol: float = 1e-6,
                         separation: float = 10.0, nu_max: float = 20.0) -> SpectrumReport:
    """Eigenvalues of the discrete operator in box = (re_min, re_max, im_min, im_max).

    A candidate is an essential-spectrum artifact when it lies within artifact_radius of a
    dispersion curve or where a limit matrix has a Morse index different from its value far to
    the right (truncated essential spectrum). The rest are isolated; those with Re >= -beta_E,
    other than the translation eigenvalue at 0, are reported as violations.
    """
    prof = L.profile
    lm = LimitMatrices.build(prof.params, prof.rest, prof.c)
    re0, re1, im0, im1 = box
    M = L.matrix
    found = []
    Mc = M.astype(complex)
    norm_est = float(sparse.linalg.norm(M, 1))
    if re0 > norm_est:
        found = []
    else:
        shifts = [complex(sr, si) for sr in np.linspace(re0, re1, n_shifts[0]) for si in np.linspace(im0, im1, n_shifts[1])]
        if re0 <= 0.0 <= re1 and im0 <= 0.0 <= im1:
            shifts.append(complex(1e-3, 0.0))  # resolves the translation eigenvalue
        for sigma in shifts:
            try:
                vals = eigs(Mc, k=k_per_shift, sigma=sigma, return_eigenvectors=False,
                            v0=np.ones(M.shape[0], dtype=complex), maxiter=300, tol=1e-10)
            except ArpackNoConvergence as exc:
                vals = exc.eigenvalues
            except RuntimeError:
                continue
            found.extend(vals)
    found = [s for s in found if re0 <= s.real <= re1 and im0 <= s.imag <= im1]
    uniq = []
    for s in sorted(found, key=lambda z: (round(z.real, 8), round(z.imag, 8))):
        if all(abs(s - u) > 1e-8 * max(1.0, abs(s)) for u in uniq):
            uniq.append(s)
    nu = np.linspace(-nu_max, nu_max, 4001)
    curve_pts = np.concatenate([cv.s for cv in dispersion_curves(prof.params, prof.rest, prof.c, nu)])
    far_right = complex(norm_est + 10.0, 0.0)
    ref_index = {side: morse_index(lm, far_right, side) for side in ("plus", "minus")}
    cands, viol = [], []
    for s in uniq:
        dist = float(np.min(np.abs(curve_pts - s)))
        shifted = [side for side in ("plus", "minus") if morse_index(lm, s, side) != ref_index[side]]
        if abs(s) < kernel_tol:
            reason = "translation eigenvalue"
            artifact = False
        elif dist < artifact_radius:
            reason = f"within {dist:.2e} of a dispersion curve"
            artifact = True
        elif shifted:
            reason = "inside essential spectrum (" + ", ".join(shifted) + " side)"
            artifact = True
        else:
            reason = "isolated"
            artifact = False
        entry = {"s": s, "artifact": artifact, "reason": reason, "distance_to_curves": dist}
        cands.append(entry)
        if reason == "isolated" and s.real >= -beta_E:
            viol.append(entry)
    sv1 = smallest_singular_values(M, k=3)
    M2 = (M @ M).tocsc()
    sv2 = smallest_singular_values(M2, k=3)
    dims = (numerical_kernel_dim(sv1, separation), numerical_kernel_dim(sv2, separation))
    return SpectrumReport(cands, viol, dims, sv1, sv2)
