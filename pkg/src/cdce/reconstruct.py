"""Joint and independent reconstruction of an image pair from row measurements.

The joint problem is

    min  ||psi* I1||_1 + ||psi* I2||_1
    s.t. Phi1 I1 = Y1,  Phi2 I2 = Y2,  ||I2 - A I1||^2 <= eps

and is solved by a parallel proximal (PPXA) iteration that averages three
proximity operators: wavelet soft thresholding of both images, the affine
measurement projections, and the projection onto the correlation ball.  A
short alternating-projection polish afterwards drives the constraint
violations to solver precision.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np
import pywt
from scipy.sparse.linalg import LinearOperator, cg

from .core import as_image, psnr
from .errors import ConfigError, NumericalError, ShapeError
from .sensing import MeasurementSet, SensingMatrix, check_provenance
from .warp import WarpOperator

WAVELETS = ("haar", "db4")
SOLVERS = ("direct", "cg")
EPS_SCALES = ("normalized", "raw")
REPORT_COLUMNS = ("rate", "scheme", "psnr_I1", "psnr_I2", "psnr_mean", "iterations", "wall_ms")

_SQRT1_2 = math.sqrt(0.5)


# ---------------------------------------------------------------- wavelets

def _haar_axis(x, axis):
    x = np.moveaxis(x, axis, 0)
    n = x.shape[0]
    h = n // 2
    a = (x[0 : 2 * h : 2] + x[1 : 2 * h : 2]) * _SQRT1_2
    d = (x[0 : 2 * h : 2] - x[1 : 2 * h : 2]) * _SQRT1_2
    if n % 2:
        # an odd trailing sample passes through into the approximation
        a = np.concatenate([a, x[-1:]], axis=0)
    return np.moveaxis(np.concatenate([a, d], axis=0), 0, axis)


def _ihaar_axis(y, axis):
    y = np.moveaxis(y, axis, 0)
    n = y.shape[0]
    h = n // 2
    a, d = y[: n - h], y[n - h :]
    x = np.empty_like(y)
    x[0 : 2 * h : 2] = (a[:h] + d) * _SQRT1_2
    x[1 : 2 * h : 2] = (a[:h] - d) * _SQRT1_2
    if n % 2:
        x[-1] = a[-1]
    return np.moveaxis(x, 0, axis)


@dataclass(frozen=True)
class SparsityBasis:
    """Separable orthonormal 2-D wavelet basis.

    ``analyze`` is psi* and ``synthesize`` is psi; coefficients are packed
    into an array of the image shape with the approximation band in the
    top-left corner.  The Haar transform accepts any size (an odd trailing
    sample at some level is carried into the approximation band unchanged,
    which keeps the transform orthonormal).  ``db4`` is the four-tap
    Daubechies filter with periodized boundaries and needs both dimensions
    divisible by ``2**levels``.
    """

    family: str = "haar"
    levels: int = 4

    def __post_init__(self):
        if self.family not in WAVELETS:
            raise ConfigError(f"unknown wavelet {self.family!r}; expected one of {WAVELETS}")
        if int(self.levels) < 1:
            raise ConfigError("wavelet levels must be >= 1")
        object.__setattr__(self, "levels", int(self.levels))

    def check(self, shape):
        if self.family == "db4":
            step = 2**self.levels
            if shape[0] % step or shape[1] % step:
                raise ConfigError(f"db4 with {self.levels} levels needs dims divisible by {step}, got {shape}")

    def approx_shape(self, shape):
        n1, n2 = shape
        for _ in range(self.levels):
            if self.family == "haar":
                n1, n2 = -(-n1 // 2), -(-n2 // 2)
            else:
                n1, n2 = n1 // 2, n2 // 2
        return n1, n2

    def analyze(self, img) -> np.ndarray:
        img = np.asarray(img, dtype=np.float64)
        self.check(img.shape)
        if self.family == "db4":
            c = pywt.wavedec2(img, "db2", mode="periodization", level=self.levels)
            return pywt.coeffs_to_array(c)[0]
        out = img.copy()
        r, c = img.shape
        for _ in range(self.levels):
            blk = _haar_axis(_haar_axis(out[:r, :c], 0), 1)
            out[:r, :c] = blk
            r, c = -(-r // 2), -(-c // 2)
        return out

    def synthesize(self, coeffs) -> np.ndarray:
        coeffs = np.asarray(coeffs, dtype=np.float64)
        self.check(coeffs.shape)
        if self.family == "db4":
            slices = self._db4_slices(coeffs.shape)
            c = pywt.array_to_coeffs(coeffs, slices, output_format="wavedec2")
            return pywt.waverec2(c, "db2", mode="periodization")
        sizes = [coeffs.shape]
        for _ in range(self.levels - 1):
            r, c = sizes[-1]
            sizes.append((-(-r // 2), -(-c // 2)))
        out = coeffs.copy()
        for r, c in reversed(sizes):
            out[:r, :c] = _ihaar_axis(_ihaar_axis(out[:r, :c], 1), 0)
        return out

    def _db4_slices(self, shape):
        c = pywt.wavedec2(np.zeros(shape), "db2", mode="periodization", level=self.levels)
        return pywt.coeffs_to_array(c)[1]


def soft_threshold(c, t) -> np.ndarray:
    """``sign(c) * max(|c| - t, 0)`` elementwise."""
    if not t > 0:
        raise ConfigError("threshold must be positive")
    c = np.asarray(c, dtype=np.float64)
    return np.sign(c) * np.maximum(np.abs(c) - t, 0.0)


def _l1_prox(img, basis: SparsityBasis, t):
    """Prox of ``t * ||psi* I||_1`` with the approximation band left free."""
    c = basis.analyze(img)
    r, k = basis.approx_shape(img.shape)
    keep = c[:r, :k].copy()
    c = soft_threshold(c, t)
    c[:r, :k] = keep
    return basis.synthesize(c)


# ---------------------------------------------------------------- projections

def project_measurements(img, S: SensingMatrix, Y: MeasurementSet, return_info=False):
    """Euclidean projection onto ``{I : Phi I = Y}``.

    Orthonormal rows give the closed form ``I + Phi^T (Y - Phi I)``.  For the
    Bernoulli ensemble each row's ``phi phi^T`` system is solved instead (by
    pseudo-inverse, since random sign rows can repeat) and the returned info
    says so.
    """
    check_provenance(Y, S)
    img = np.asarray(img, dtype=np.float64)
    r = Y.y - S.apply(img)
    if S.orthonormal:
        out, method = img + S.adjoint(r), "orthonormal"
    else:
        gram = np.einsum("kmn,kpn->kmp", S.blocks, S.blocks)
        w = np.einsum("kmp,kp->km", np.linalg.pinv(gram, hermitian=True), r)
        out, method = img + S.adjoint(w), "normal-equations"
    if return_info:
        return out, {"method": method}
    return out


def _corr_direct(x1, x2, A: WarpOperator, kappa, mult):
    # eliminating v from the normal equations leaves a diagonal system in u
    # because A^T A is diagonal for a selection operator
    u = (x1 + kappa * A.adjoint(x2)) / (1.0 + kappa * mult)
    v = (1.0 - kappa) * x2 + kappa * A.predict(u)
    return u, v


def _corr_cg(x1, x2, A: WarpOperator, mu, tol):
    n = x1.size
    shape = x1.shape

    def mv(z):
        u, v = z[:n].reshape(shape), z[n:].reshape(shape)
        r = v - A.predict(u)
        return np.concatenate([(u - mu * A.adjoint(r)).ravel(), (v + mu * r).ravel()])

    op = LinearOperator((2 * n, 2 * n), matvec=mv, dtype=np.float64)
    b = np.concatenate([x1.ravel(), x2.ravel()])
    z, info = cg(op, b, x0=b.copy(), rtol=tol, atol=0.0, maxiter=10 * n)
    if info != 0:
        res = float(np.linalg.norm(mv(z) - b) / max(np.linalg.norm(b), 1e-300))
        raise NumericalError(f"conjugate gradient did not converge (info={info})", residual=res)
    return z[:n].reshape(shape), z[n:].reshape(shape)


def project_correlation(img1, img2, A: WarpOperator, eps, solver="direct", cg_tol=1e-10,
                        bisect_tol=1e-10, max_halvings=100):
    """Projection of the pair onto ``{(u, v) : ||v - A u||^2 <= eps}``.

    The minimizer is ``z = (I + mu L^T L)^{-1} x`` with ``L = [-A, I]``;
    ``mu`` is found by bisection on the decreasing map ``mu -> ||L z||^2``.
    ``solver="direct"`` uses the exact elementwise solve available for
    selection operators (bisecting on ``kappa = mu / (1 + mu)`` in [0, 1]),
    ``solver="cg"`` runs conjugate gradients on the stacked system.
    Bisection stops once the constraint is met within ``bisect_tol * eps``.
    """
    if eps < 0:
        raise ConfigError("eps must be >= 0")
    if solver not in SOLVERS:
        raise ConfigError(f"unknown solver {solver!r}")
    x1 = np.asarray(img1, dtype=np.float64)
    x2 = np.asarray(img2, dtype=np.float64)
    if x1.shape != x2.shape or x1.shape != A.shape:
        raise ShapeError(f"pair {x1.shape}/{x2.shape} vs warp {A.shape}")

    def excess(u, v):
        return float(np.sum((v - A.predict(u)) ** 2))

    if excess(x1, x2) <= eps:
        return x1.copy(), x2.copy()
    mult = np.bincount(A.source_index.ravel(), minlength=A.size).reshape(A.shape).astype(np.float64)
    if eps == 0 or solver == "direct":
        if eps == 0:
            return _corr_direct(x1, x2, A, 1.0, mult)
        lo, hi = 0.0, 1.0
        best = _corr_direct(x1, x2, A, hi, mult)
        for _ in range(max_halvings):
            mid = 0.5 * (lo + hi)
            u, v = _corr_direct(x1, x2, A, mid, mult)
            f = excess(u, v)
            if f <= eps:
                hi, best = mid, (u, v)
                if eps - f <= bisect_tol * eps:
                    break
            else:
                lo = mid
        return best

    hi = 1.0
    best = _corr_cg(x1, x2, A, hi, cg_tol)
    while excess(*best) > eps:
        hi *= 2.0
        if hi > 1e15:
            raise NumericalError("could not bracket the multiplier", residual=excess(*best) - eps)
        best = _corr_cg(x1, x2, A, hi, cg_tol)
    lo = 0.0 if hi == 1.0 else hi / 2.0
    for _ in range(max_halvings):
        mid = 0.5 * (lo + hi)
        u, v = _corr_cg(x1, x2, A, mid, cg_tol)
        f = excess(u, v)
        if f <= eps:
            hi, best = mid, (u, v)
            if eps - f <= bisect_tol * eps:
                break
        else:
            lo = mid
    return best


# ---------------------------------------------------------------- solvers

@dataclass(frozen=True)
class ReconParams:
    """Reconstruction settings.

    ``gamma`` is the soft threshold applied to wavelet detail coefficients
    (raw 0-255 intensity units); it decays geometrically by ``gamma_decay``
    every ``decay_every`` iterations.  ``eps`` is a squared norm summed over
    the image.  With ``eps_scale="normalized"`` it is measured on intensities
    rescaled to [0, 1], so the raw tolerance is ``eps * 255**2``; with
    ``"raw"`` it is used as is.
    ``weights`` are the PPXA averaging weights of the (sparsity, measurement,
    correlation) terms; ``None`` means uniform.
    ``polish_iters`` caps the closing alternating projections onto the
    constraint sets; 0 disables the closing step in both solvers.
    """

    eps: float = 14.0
    eps_scale: str = "normalized"
    gamma: float = 10.0
    gamma_decay: float = 0.97
    decay_every: int = 10
    max_iters: int = 300
    rel_tol: float = 1e-5
    weights: tuple = None
    wavelet: str = "haar"
    levels: int = 4
    relaxation: float = 1.0
    polish_iters: int = 500
    solver: str = "direct"

    def __post_init__(self):
        if self.eps < 0:
            raise ConfigError("eps must be >= 0")
        if self.eps_scale not in EPS_SCALES:
            raise ConfigError(f"eps_scale must be one of {EPS_SCALES}")
        if not self.gamma > 0:
            raise ConfigError("gamma must be > 0")
        if not 0 < self.gamma_decay <= 1:
            raise ConfigError("gamma_decay must be in (0, 1]")
        if self.max_iters < 1 or self.decay_every < 1:
            raise ConfigError("iteration counts must be >= 1")
        if not 0 < self.relaxation < 2:
            raise ConfigError("relaxation must be in (0, 2)")
        if self.solver not in SOLVERS:
            raise ConfigError(f"unknown solver {self.solver!r}")
        if self.weights is not None:
            w = tuple(float(x) for x in self.weights)
            if len(w) != 3 or min(w) <= 0:
                raise ConfigError("weights must be three positive numbers")
            s = sum(w)
            object.__setattr__(self, "weights", tuple(x / s for x in w))
        SparsityBasis(self.wavelet, self.levels)

    @property
    def eps_raw(self) -> float:
        return self.eps * (255.0**2 if self.eps_scale == "normalized" else 1.0)

    @property
    def basis(self) -> SparsityBasis:
        return SparsityBasis(self.wavelet, self.levels)

    def gamma_at(self, it: int) -> float:
        return self.gamma * self.gamma_decay ** (it // self.decay_every)


@dataclass
class ReconResult:
    """Reconstructed images (unclamped) with solver diagnostics.

    Unpacks as the image tuple, so ``i1, i2 = joint_reconstruct(...)`` works.
    """

    images: tuple
    iterations: int
    converged: bool
    wall_ms: float
    violations: list = field(default_factory=list, repr=False)
    final_violation: dict = field(default_factory=dict)

    def __iter__(self):
        return iter(self.images)

    def clamped(self):
        return tuple(np.clip(im, 0, 255) for im in self.images)

    def psnr(self, *originals):
        return tuple(psnr(c, as_image(o)) for c, o in zip(self.clamped(), originals))


def _measurement_violation(img, S, Y):
    return float(np.linalg.norm(Y.y - S.apply(img)))


def _correlation_excess(u, v, A, eps):
    return max(0.0, float(np.sum((v - A.predict(u)) ** 2)) - eps)


def independent_reconstruct(Y: MeasurementSet, S: SensingMatrix, P: ReconParams = None) -> ReconResult:
    """Iterative soft thresholding for ``gamma ||psi* I||_1 + 1/2 ||Y - Phi I||^2``.

    Unit step size (orthonormal rows have Lipschitz constant one), started
    from the pre-image.  When the iteration cap is hit the last iterate is
    returned with ``converged=False``.  With ``P.polish_iters > 0`` the
    result is finally projected onto ``{I : Phi I = Y}``, as in the joint
    solver, so full-rate measurements return the image exactly; set it to 0
    to get the raw penalized solution.
    """
    P = P or ReconParams()
    check_provenance(Y, S)
    basis = P.basis
    basis.check(S.shape)
    t0 = time.perf_counter()
    x = S.adjoint(Y.y)
    converged = False
    it = 0
    hist = []
    for it in range(1, P.max_iters + 1):
        g = x + S.adjoint(Y.y - S.apply(x))
        new = _l1_prox(g, basis, P.gamma_at(it - 1))
        change = np.linalg.norm(new - x) / max(np.linalg.norm(x), 1e-12)
        x = new
        hist.append({"measurement": _measurement_violation(x, S, Y), "change": float(change)})
        if change < P.rel_tol:
            converged = True
            break
    if P.polish_iters > 0:
        x = project_measurements(x, S, Y)
    wall = 1e3 * (time.perf_counter() - t0)
    return ReconResult((x,), it, converged, wall, hist, {"measurement": _measurement_violation(x, S, Y)})


def joint_reconstruct(Y1: MeasurementSet, Y2: MeasurementSet, S1: SensingMatrix, S2: SensingMatrix,
                      A: WarpOperator, P: ReconParams = None) -> ReconResult:
    """Joint recovery of both views under the correlation constraint.

    ``P.eps = inf`` drops the correlation term; the views then decouple and
    each one is solved by :func:`independent_reconstruct`.
    """
    P = P or ReconParams()
    check_provenance(Y1, S1)
    check_provenance(Y2, S2)
    if S1.shape != S2.shape or S1.shape != A.shape:
        raise ShapeError(f"sensing {S1.shape}/{S2.shape} vs warp {A.shape}")
    basis = P.basis
    basis.check(S1.shape)
    eps = P.eps_raw
    if not math.isfinite(eps):
        r1 = independent_reconstruct(Y1, S1, P)
        r2 = independent_reconstruct(Y2, S2, P)
        final = {"measurement": max(r1.final_violation["measurement"], r2.final_violation["measurement"])}
        return ReconResult((r1.images[0], r2.images[0]), max(r1.iterations, r2.iterations),
                           r1.converged and r2.converged, r1.wall_ms + r2.wall_ms, [], final)
    w = P.weights or (1 / 3, 1 / 3, 1 / 3)
    lam = P.relaxation
    t0 = time.perf_counter()

    def prox(i, pair, it):
        u, v = pair
        if i == 0:
            t = P.gamma_at(it) / w[0]
            return _l1_prox(u, basis, t), _l1_prox(v, basis, t)
        if i == 1:
            return project_measurements(u, S1, Y1), project_measurements(v, S2, Y2)
        return project_correlation(u, v, A, eps, solver=P.solver)

    y_norm = max(np.linalg.norm(Y1.y), np.linalg.norm(Y2.y), 1e-12)

    def violation(pair):
        meas = max(_measurement_violation(pair[0], S1, Y1), _measurement_violation(pair[1], S2, Y2))
        corr = _correlation_excess(pair[0], pair[1], A, eps)
        # unit-free summary: measurement residual relative to ||Y||, excess relative to eps
        rel = max(meas / y_norm, corr / eps if eps > 0 else corr)
        return {"measurement": meas, "correlation": corr, "relative": rel}

    active = (0, 1, 2)
    x = np.stack([S1.adjoint(Y1.y), S2.adjoint(Y2.y)])
    y = {i: x.copy() for i in active}
    hist = []
    converged = False
    it = 0
    for it in range(1, P.max_iters + 1):
        p = {i: np.stack(prox(i, y[i], it - 1)) for i in active}
        pbar = sum(w[i] * p[i] for i in active)
        for i in active:
            y[i] = y[i] + lam * (2 * pbar - x - p[i])
        new = x + lam * (pbar - x)
        change = np.linalg.norm(new - x) / max(np.linalg.norm(x), 1e-12)
        x = new
        hist.append({**violation(x), "change": float(change)})
        if change < P.rel_tol:
            converged = True
            break

    # feasibility polish: alternate the constraint projections, ending on the
    # measurement sets so the returned pair is measurement consistent
    u, v = x
    u, v = project_measurements(u, S1, Y1), project_measurements(v, S2, Y2)
    for _ in range(P.polish_iters):
        if _correlation_excess(u, v, A, eps) <= 1e-4 * max(eps, 1e-12):
            break
        u, v = project_correlation(u, v, A, eps, solver=P.solver)
        u, v = project_measurements(u, S1, Y1), project_measurements(v, S2, Y2)
    final = violation((u, v))
    wall = 1e3 * (time.perf_counter() - t0)
    return ReconResult((u, v), it, converged, wall, hist, final)


# ---------------------------------------------------------------- reporting

def report_row(rate, scheme, result: ReconResult, img1, img2) -> dict:
    p1, p2 = result.psnr(img1, img2)
    return {"rate": rate, "scheme": scheme, "psnr_I1": p1, "psnr_I2": p2,
            "psnr_mean": 0.5 * (p1 + p2), "iterations": result.iterations,
            "wall_ms": round(result.wall_ms, 3)}


def write_report_csv(path, rows, extra: dict = None):
    extra = extra or {}
    names = list(REPORT_COLUMNS)
    for r in rows:
        names += [k for k in r if k not in names]
    names += [k for k in extra if k not in names]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=names)
        w.writeheader()
        for r in rows:
            w.writerow({**r, **extra})


def with_eps(P: ReconParams, eps) -> ReconParams:
    return replace(P, eps=eps)
