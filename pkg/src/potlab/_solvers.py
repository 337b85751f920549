"""Shared linear-algebra kernels: factorized SPD solves, matrix functions,
eigenvalue bounds and induced p-norm estimation.

Internal module; the public API lives in the domain modules.  Every routine
is deterministic for fixed inputs and seeds.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

# Size thresholds (number of unknowns) for switching solver strategies.
DENSE_SOLVE_MAX = 1500
SPLU_MAX = 12000
DENSE_SPECTRAL_MAX = 4000

CG_TOL = 1e-12
CHEB_TOL = 1e-8
CHEB_MAX_DEGREE = 900


class SolverError(RuntimeError):
    pass


class NotPositiveDefiniteError(SolverError):
    """Raised when a solve/factorization requires S > 0 and it fails.

    Carries ``lambda_min`` when an eigenvalue estimate is available.
    """

    def __init__(self, message, lambda_min=None):
        super().__init__(message)
        self.lambda_min = lambda_min


def _as_csr(S):
    if sp.issparse(S):
        return S.tocsr()
    return sp.csr_matrix(S)


class SymmetricPencil:
    """Factorized access to a real symmetric matrix S (usually SPD).

    Wraps the dense / sparse-LU / conjugate-gradient strategies behind one
    object so callers never branch on size.  Spectral quantities (bounds,
    full decomposition, matrix functions) are computed lazily and cached.
    """

    def __init__(self, S, dense_solve_max=DENSE_SOLVE_MAX, splu_max=SPLU_MAX,
                 dense_spectral_max=DENSE_SPECTRAL_MAX):
        self.S = _as_csr(S)
        if self.S.shape[0] != self.S.shape[1]:
            raise ValueError("pencil matrix must be square")
        self.n = self.S.shape[0]
        self.dense_solve_max = dense_solve_max
        self.splu_max = splu_max
        self.dense_spectral_max = dense_spectral_max
        self._chol = None
        self._splu = None
        self._eigh = None
        self._lambda_min = None
        self._lambda_max = None
        self._lambda_hint = None
        self._cheb = {}
        self._diag = self.S.diagonal().copy()

    def set_lambda_bounds(self, lo, hi=None):
        """Install certified spectral bounds (skips iterative estimation)."""
        self._lambda_hint = (float(lo), None if hi is None else float(hi))

    # -- solving ---------------------------------------------------------

    def _ensure_chol(self):
        if self._chol is None:
            dense = self.S.toarray()
            try:
                self._chol = sla.cho_factor(dense, lower=True)
            except sla.LinAlgError as exc:
                lam = float(sla.eigvalsh(dense, subset_by_index=[0, 0])[0])
                raise NotPositiveDefiniteError(
                    f"matrix not positive definite (lambda_min={lam:.3e})",
                    lambda_min=lam) from exc
        return self._chol

    def _ensure_splu(self):
        if self._splu is None:
            self._splu = spla.splu(self.S.tocsc())
        return self._splu

    def solve(self, b, tol=CG_TOL):
        """Return S^{-1} b.  b may be a vector or a matrix of columns."""
        b = np.asarray(b, dtype=float)
        single = b.ndim == 1
        B = b[:, None] if single else b
        if self.n <= self.dense_solve_max:
            X = sla.cho_solve(self._ensure_chol(), B)
        elif self.n <= self.splu_max:
            lu = self._ensure_splu()
            X = np.column_stack([lu.solve(B[:, j]) for j in range(B.shape[1])])
        else:
            X = np.empty_like(B)
            M = self._jacobi()
            for j in range(B.shape[1]):
                x, info = spla.cg(self.S, B[:, j], rtol=tol, atol=0.0,
                                  maxiter=20 * self.n, M=M)
                if info != 0:
                    raise SolverError(f"CG failed to converge (info={info})")
                X[:, j] = x
        return X[:, 0] if single else X

    def _jacobi(self):
        d = self._diag.copy()
        bad = d <= 0
        if bad.any():
            d[bad] = 1.0
        return sp.diags(1.0 / d).tocsr()

    # -- spectral bounds ---------------------------------------------------

    def gershgorin_upper(self):
        row_abs = np.abs(self.S).sum(axis=1)
        return float(np.max(row_abs))

    def eigh(self):
        """Full dense spectral decomposition; only below the dense cap."""
        if self.n > self.dense_spectral_max:
            raise SolverError(
                f"dense spectral decomposition capped at {self.dense_spectral_max} "
                f"unknowns, got {self.n}")
        if self._eigh is None:
            w, V = sla.eigh(self.S.toarray())
            self._eigh = (w, V)
        return self._eigh

    def lambda_min(self):
        if self._lambda_min is None:
            if self._lambda_hint is not None:
                return self._lambda_hint[0]
            if self.n <= self.dense_spectral_max:
                if self._eigh is not None:
                    self._lambda_min = float(self._eigh[0][0])
                else:
                    self._lambda_min = float(
                        sla.eigvalsh(self.S.toarray(), subset_by_index=[0, 0])[0])
            else:
                self._lambda_min = self._lobpcg_extreme(largest=False)
        return self._lambda_min

    def lambda_max(self):
        if self._lambda_max is None:
            if self._lambda_hint is not None and self._lambda_hint[1] is not None:
                return self._lambda_hint[1]
            if self.n <= self.dense_spectral_max:
                if self._eigh is not None:
                    self._lambda_max = float(self._eigh[0][-1])
                else:
                    self._lambda_max = float(
                        sla.eigvalsh(self.S.toarray(),
                                     subset_by_index=[self.n - 1, self.n - 1])[0])
            else:
                self._lambda_max = self._lobpcg_extreme(largest=True)
        return self._lambda_max

    def _lobpcg_extreme(self, largest, tol=2e-6, maxiter=1200):
        rng = np.random.default_rng(0x5eed)
        k = min(3, self.n - 1) or 1
        X = rng.standard_normal((self.n, k))
        try:
            vals, _ = spla.lobpcg(self.S, X, M=self._jacobi(), largest=largest,
                                  tol=tol, maxiter=maxiter, verbosityLevel=0)
        except Exception as exc:  # pragma: no cover - lobpcg rarely throws
            raise SolverError(f"LOBPCG failed: {exc}") from exc
        return float(np.max(vals) if largest else np.min(vals))

    def spectral_interval(self, safety=0.05):
        """Interval [a, b] with a <= lambda_min, lambda_max <= b (a > 0 required).

        Uses the certified hint / Gershgorin bound; never runs an iterative
        eigensolver for the upper end (the Chebyshev degree only grows like
        the square root of the overestimation factor).
        """
        lo = self.lambda_min()
        if lo <= 0:
            raise NotPositiveDefiniteError(
                f"spectral interval requested for non-positive matrix "
                f"(lambda_min={lo:.3e})", lambda_min=lo)
        if self.n <= self.dense_spectral_max:
            hi = self.lambda_max()
        elif self._lambda_hint is not None and self._lambda_hint[1] is not None:
            hi = self._lambda_hint[1]
        else:
            hi = self.gershgorin_upper()
        return lo * (1 - safety), max(hi * (1 + safety), lo * (1 + safety))

    # -- matrix functions --------------------------------------------------

    def func_apply(self, func, B, tol=CHEB_TOL):
        """Apply func(S) to columns of B: dense spectra or Chebyshev."""
        B = np.asarray(B, dtype=float)
        if self.n <= self.dense_spectral_max:
            w, V = self.eigh()
            fw = func(w)
            if B.ndim == 1:
                return V @ (fw * (V.T @ B))
            return V @ (fw[:, None] * (V.T @ B))
        a, b = self.spectral_interval()
        key = (getattr(func, "__name__", repr(func)), round(np.log(a), 6),
               round(np.log(b), 6), tol)
        if key not in self._cheb:
            self._cheb[key] = chebyshev_coefficients(func, a, b, tol)
        return chebyshev_apply(self.S, self._cheb[key], a, b, B)

    def inv_sqrt_apply(self, B, tol=CHEB_TOL):
        lo = self.lambda_min()
        if lo <= 0:
            raise NotPositiveDefiniteError(
                f"inverse square root needs S > 0 (lambda_min={lo:.3e})",
                lambda_min=lo)
        f = lambda x: 1.0 / np.sqrt(x)
        f.__name__ = "inv_sqrt"
        return self.func_apply(f, B, tol=tol)

    def sqrt_apply(self, B, tol=CHEB_TOL):
        f = lambda x: np.sqrt(np.maximum(x, 0.0))
        f.__name__ = "sqrt"
        return self.func_apply(f, B, tol=tol)

    def expm_apply(self, t, B):
        """Apply e^{-t S} to columns of B."""
        B = np.asarray(B, dtype=float)
        if self.n <= self.dense_spectral_max:
            w, V = self.eigh()
            ew = np.exp(-t * w)
            if B.ndim == 1:
                return V @ (ew * (V.T @ B))
            return V @ (ew[:, None] * (V.T @ B))
        return spla.expm_multiply(-t * self.S.tocsc(), B)


# -- Chebyshev approximation ---------------------------------------------


def chebyshev_coefficients(func, a, b, tol, max_degree=CHEB_MAX_DEGREE):
    """Chebyshev coefficients of func on [a, b] to relative sup error tol.

    Degree grows geometrically until an independent fine grid confirms the
    target accuracy; raises SolverError at the degree cap.
    """
    if not (0 < a < b):
        raise ValueError("need 0 < a < b")
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    xs_check = mid + half * np.cos(np.linspace(0, np.pi, 731))
    f_check = func(xs_check)
    scale = np.max(np.abs(f_check))
    deg = 32
    while True:
        j = np.arange(deg + 1)
        theta = (j + 0.5) * np.pi / (deg + 1)
        nodes = mid + half * np.cos(theta)
        fv = func(nodes)
        # Discrete cosine transform at Chebyshev points of the first kind.
        k = j[:, None]
        T = np.cos(k * theta[None, :])
        coeffs = (2.0 / (deg + 1)) * (T @ fv)
        coeffs[0] *= 0.5
        approx = _clenshaw_scalar(coeffs, (xs_check - mid) / half)
        err = np.max(np.abs(approx - f_check))
        if err <= tol * scale:
            return coeffs
        if deg >= max_degree:
            raise SolverError(
                f"Chebyshev degree cap {max_degree} reached (err={err:.2e})")
        deg = min(max_degree, int(deg * 1.6) + 8)


def _clenshaw_scalar(coeffs, y):
    b1 = np.zeros_like(y)
    b2 = np.zeros_like(y)
    for c in coeffs[:0:-1]:
        b1, b2 = 2.0 * y * b1 - b2 + c, b1
    return y * b1 - b2 + coeffs[0]


def chebyshev_apply(S, coeffs, a, b, B):
    """Clenshaw evaluation of the Chebyshev series of f(S) applied to B."""
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    B = np.asarray(B, dtype=float)
    single = B.ndim == 1
    X = B[:, None] if single else B

    def Y(V):  # mapped operator (2S - (a+b)) / (b-a)
        return (S @ V - mid * V) / half

    b1 = np.zeros_like(X)
    b2 = np.zeros_like(X)
    for c in coeffs[:0:-1]:
        b1, b2 = 2.0 * Y(b1) - b2 + c * X, b1
    out = Y(b1) - b2 + coeffs[0] * X
    return out[:, 0] if single else out


# -- pencil eigenvalues ----------------------------------------------------


def pencil_lambda_max(A, pencil, seed=0x51ab, tol=1e-9, maxiter=None):
    """Largest eigenvalue of A x = lambda B x, A symmetric PSD, B SPD.

    B is given as a SymmetricPencil.  Dense path below the spectral cap,
    Lanczos on B^{-1/2} A B^{-1/2} above it.
    """
    n = pencil.n
    A = _as_csr(A)
    if n <= pencil.dense_spectral_max:
        Ad = A.toarray()
        Bd = pencil.S.toarray()
        try:
            w = sla.eigh(Ad, Bd, eigvals_only=True,
                         subset_by_index=[n - 1, n - 1])
            return float(w[0])
        except sla.LinAlgError:
            # subset drivers are flaky on fully degenerate pencils
            w = sla.eigh(Ad, Bd, eigvals_only=True)
            return float(w[-1])

    def mv(x):
        y = pencil.inv_sqrt_apply(x)
        y = A @ y
        return pencil.inv_sqrt_apply(y)

    op = spla.LinearOperator((n, n), matvec=mv)
    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(n)
    vals = spla.eigsh(op, k=1, which="LA", v0=v0, tol=tol,
                      maxiter=maxiter, return_eigenvectors=False)
    return float(vals[0])


def pencil_lambda_max_lowrank(weights, pencil, indices):
    """Largest eigenvalue of (diag(weights on indices), B) pencils.

    weights >= 0 supported on `indices`; equals the top eigenvalue of the
    small matrix  D^{1/2} (B^{-1})_{II} D^{1/2}  with D = diag(weights).
    Exact up to the solve tolerance; intended for low-rank mass terms.
    Results are memoized on the pencil (the solves dominate the cost).
    """
    idx = np.asarray(indices, dtype=int)
    w = np.asarray(weights, dtype=float)
    if idx.size == 0:
        return 0.0
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    cache = getattr(pencil, "_lowrank_cache", None)
    if cache is None:
        cache = {}
        pencil._lowrank_cache = cache
    key = (w.tobytes(), idx.tobytes())
    if key in cache:
        return cache[key]
    sub_key = idx.tobytes()
    sub_cache = getattr(pencil, "_lowrank_solves", None)
    if sub_cache is None:
        sub_cache = {}
        pencil._lowrank_solves = sub_cache
    if sub_key not in sub_cache:
        E = np.zeros((pencil.n, idx.size))
        E[idx, np.arange(idx.size)] = 1.0
        X = pencil.solve(E)
        sub_cache[sub_key] = X[idx, :]
    Binv_sub = sub_cache[sub_key]
    sq = np.sqrt(w)
    small = (sq[:, None] * Binv_sub) * sq[None, :]
    small = 0.5 * (small + small.T)
    vals = sla.eigvalsh(small)
    out = float(vals[-1])
    cache[key] = out
    return out


# -- induced p-norms -------------------------------------------------------


def _dual_vector(y, p):
    """Duality map: returns z with <z, y> = ||y||_p and ||z||_q = 1."""
    ay = np.abs(y)
    ny = np.linalg.norm(y, p) if p != np.inf else ay.max()
    if ny == 0:
        return np.zeros_like(y)
    if p == np.inf:
        z = np.zeros_like(y)
        i = int(np.argmax(ay))
        z[i] = np.sign(y[i])
        return z
    if p == 1:
        return np.sign(y)
    z = np.sign(y) * (ay / ny) ** (p - 1)
    return z


def pnorm_lower_boyd(apply_A, apply_At, n_in, p, q=None, seed=0, starts=8,
                     max_iter=60, tol=1e-9, extra_starts=()):
    """Best lower bound for the induced plain l^p -> l^q norm of A.

    Nonlinear power iteration (Boyd/Higham), generalized to mixed norms;
    each evaluated ratio is a certified lower bound and the best witness is
    returned.  q defaults to p.
    """
    if p <= 1 or not np.isfinite(p):
        raise ValueError("Boyd iteration needs 1 < p < inf")
    q = p if q is None else q
    p_dual = p / (p - 1.0)
    rng = np.random.default_rng(seed)
    start_vecs = [np.ones(n_in)]
    for v in extra_starts:
        start_vecs.append(np.asarray(v, dtype=float))
    while len(start_vecs) < starts:
        start_vecs.append(rng.standard_normal(n_in))
    best_gamma = 0.0
    best_witness = start_vecs[0]
    for x in start_vecs:
        nx = np.linalg.norm(x, p)
        if nx == 0:
            continue
        x = x / nx
        gamma_prev = 0.0
        for _ in range(max_iter):
            y = apply_A(x)
            gamma = np.linalg.norm(y, q)
            if gamma == 0:
                break
            if gamma > best_gamma:
                best_gamma = gamma
                best_witness = x.copy()
            z = apply_At(_dual_vector(y, q))
            nz = np.linalg.norm(z, p_dual)
            if nz <= gamma * (1 + 1e-14) and nz <= np.dot(z, x) * (1 + 1e-10):
                break
            if abs(gamma - gamma_prev) <= tol * gamma:
                break
            gamma_prev = gamma
            x = _dual_vector(z, p_dual)
            x = x / np.linalg.norm(x, p)
    return best_gamma, best_witness


def _dual_columns(Y, p):
    out = np.zeros_like(Y)
    for j in range(Y.shape[1]):
        out[:, j] = _dual_vector(Y[:, j], p)
    return out


def pnorm_lower_boyd_block(apply_A, apply_At, n_in, p, q=None, seed=0,
                           starts=8, max_iter=40, tol=1e-6, extra_starts=()):
    """Blocked variant of the Boyd lower bound: all starts iterate together.

    Matrix-free operators amortize expensive polynomial applies over the
    block, which is why this exists; results match the sequential routine
    up to the per-column stopping rule.
    """
    if p <= 1 or not np.isfinite(p):
        raise ValueError("Boyd iteration needs 1 < p < inf")
    q = p if q is None else q
    p_dual = p / (p - 1.0)
    rng = np.random.default_rng(seed)
    cols = [np.ones(n_in)]
    for v in extra_starts:
        cols.append(np.asarray(v, dtype=float))
    while len(cols) < starts + len(extra_starts) + 1:
        cols.append(rng.standard_normal(n_in))
    X = np.column_stack(cols)
    X = X / np.array([np.linalg.norm(X[:, j], p) for j in range(X.shape[1])])
    best_gamma = 0.0
    best_witness = X[:, 0].copy()
    gamma_prev = np.zeros(X.shape[1])
    active = np.ones(X.shape[1], dtype=bool)
    for _ in range(max_iter):
        Y = apply_A(X)
        gam = np.array([np.linalg.norm(Y[:, j], q) for j in range(Y.shape[1])])
        jbest = int(np.argmax(gam))
        if gam[jbest] > best_gamma:
            best_gamma = float(gam[jbest])
            best_witness = X[:, jbest].copy()
        Z = apply_At(_dual_columns(Y, q))
        conv = np.abs(gam - gamma_prev) <= tol * np.maximum(gam, 1e-300)
        active &= ~conv
        if not active.any():
            break
        gamma_prev = gam
        Xn = _dual_columns(Z, p_dual)
        norms = np.array([np.linalg.norm(Xn[:, j], p)
                          for j in range(Xn.shape[1])])
        norms[norms == 0] = 1.0
        X = np.where(active[None, :], Xn / norms[None, :], X)
    return best_gamma, best_witness


def pnorm_exact_dense(B, p):
    """Exact induced p-norm of a dense matrix for p in {1, 2, inf}."""
    B = np.asarray(B, dtype=float)
    if p == 1:
        return float(np.max(np.abs(B).sum(axis=0))) if B.size else 0.0
    if p == np.inf:
        return float(np.max(np.abs(B).sum(axis=1))) if B.size else 0.0
    if p == 2:
        if B.size == 0:
            return 0.0
        return float(sla.svdvals(B)[0])
    raise ValueError("exact norms only for p in {1, 2, inf}")


def interpolation_upper(norm1, norm2, p, p1, p2):
    """Riesz-Thorin style upper bound for the p-norm from exact p1, p2 norms."""
    if not (min(p1, p2) <= p <= max(p1, p2)):
        raise ValueError("p must lie between the bracketing exponents")
    inv = lambda r: 0.0 if np.isinf(r) else 1.0 / r
    denom = inv(p1) - inv(p2)
    theta = 0.0 if denom == 0 else (inv(p1) - inv(p)) / denom
    return float(norm1 ** (1 - theta) * norm2 ** theta)
