"""Action of e^{tA} on dense panels for symmetric matvec-only operators.

Spectral bounds come from a short Lanczos sweep; the exponential is then a
truncated Chebyshev series evaluated by the three-term recurrence, costing
exactly ``degree`` operator applications per panel.
"""

from dataclasses import dataclass

import numpy as np
import scipy.fft

from . import rng
from .errors import BreakdownBeforeOneStep, DegreeOverflow, NonFiniteValue

MAX_DEGREE = 20000
PAD_FRACTION = 0.1
PAD_FLOOR = 1.0


@dataclass(frozen=True)
class SpectralInterval:
    lo: float
    hi: float

    def __post_init__(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi)) or self.lo > self.hi:
            raise NonFiniteValue(f"bad spectral interval [{self.lo}, {self.hi}]")


@dataclass(frozen=True)
class ChebPlan:
    interval: SpectralInterval
    t: float
    coeffs: np.ndarray

    @property
    def degree(self):
        return len(self.coeffs) - 1


def estimate_interval(matvec, dim, probes=40, seed=0):
    """Enclosing interval for the spectrum of a symmetric operator.

    Runs ``probes`` Lanczos steps (with reorthogonalization) from a seeded
    Gaussian start and pads the Ritz extremes by 10% of their spread plus an
    absolute floor of 1.0, insurance against Lanczos underestimation.
    """
    if dim == 0:
        raise BreakdownBeforeOneStep("operator has dimension zero")
    if probes < 1:
        raise ValueError("probes must be >= 1")
    steps = min(int(probes), dim)
    gen = rng.substream(seed, rng.LANCZOS)
    v = gen.standard_normal(dim)
    v /= np.linalg.norm(v)
    V = np.zeros((dim, steps))
    alphas, betas = [], []
    for j in range(steps):
        V[:, j] = v
        w = matvec(v)
        alpha = float(v @ w)
        alphas.append(alpha)
        w = w - alpha * v
        if j > 0:
            w = w - betas[-1] * V[:, j - 1]
        # full reorthogonalization; cheap at these budget sizes
        w = w - V[:, : j + 1] @ (V[:, : j + 1].T @ w)
        beta = float(np.linalg.norm(w))
        if j == steps - 1 or beta < 1e-14 * max(1.0, abs(alpha)):
            break
        betas.append(beta)
        v = w / beta
    T = np.diag(alphas)
    if betas:
        off = np.array(betas[: len(alphas) - 1])
        T += np.diag(off, 1) + np.diag(off, -1)
    ritz = np.linalg.eigvalsh(T)
    lo, hi = float(ritz[0]), float(ritz[-1])
    pad = PAD_FRACTION * (hi - lo) + PAD_FLOOR
    return SpectralInterval(lo - pad, hi + pad)


def _cheb_coeffs(t, lo, hi, degree):
    """Chebyshev coefficients of e^{tx} on [lo, hi] via cosine transform."""
    n = degree + 1
    center = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    theta = np.pi * (np.arange(n) + 0.5) / n
    with np.errstate(over="ignore"):
        samples = np.exp(t * (center + half * np.cos(theta)))
    coeffs = scipy.fft.dct(samples, type=2) / n
    coeffs[0] *= 0.5
    return coeffs


def plan_cheb(t, interval, tol=1e-8):
    """Truncated Chebyshev plan for e^{tx} on the interval.

    The sampling degree doubles from 8 until the trailing coefficients drop
    below ``tol`` relative to the largest one, then the tail is trimmed.
    Raises DegreeOverflow past degree 20000: loosen tol or shrink |t|.
    """
    if not (0.0 < tol < 1.0):
        raise ValueError("tol must lie in (0, 1)")
    lo, hi = float(interval.lo), float(interval.hi)
    t = float(t)
    d = 8
    while True:
        coeffs = _cheb_coeffs(t, lo, hi, d)
        if not np.all(np.isfinite(coeffs)):
            raise NonFiniteValue("exponential overflow while planning; shrink |t| or the interval")
        cmax = np.max(np.abs(coeffs))
        if cmax == 0.0 or np.max(np.abs(coeffs[-2:])) <= tol * cmax:
            break
        if 2 * d > MAX_DEGREE:
            raise DegreeOverflow(f"needed degree > {MAX_DEGREE} for tol={tol}")
        d *= 2
    keep = np.nonzero(np.abs(coeffs) > tol * cmax)[0]
    degree = max(1, (int(keep[-1]) + 1) if len(keep) else 1)
    return ChebPlan(interval=interval, t=t, coeffs=coeffs[: degree + 1].copy())


def expm_multiply(matvec, plan, Z):
    """W ~ e^{tA} Z by the Chebyshev three-term recurrence.

    Uses exactly ``plan.degree`` applications of the operator per call. The
    plan's interval must enclose spec(A); overflow here is the symptom of a
    violated enclosure and raises NonFiniteValue.
    """
    vec = Z.ndim == 1
    Z2 = np.ascontiguousarray(Z if not vec else Z[:, None], dtype=np.float64)
    lo, hi = plan.interval.lo, plan.interval.hi
    center = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    if half == 0.0:
        half = 1.0

    def scaled(V):
        return (matvec(V) - center * V) / half

    coeffs = plan.coeffs
    with np.errstate(over="ignore", invalid="ignore"):
        Tprev = Z2
        out = coeffs[0] * Z2
        Tcur = scaled(Z2)
        out = out + coeffs[1] * Tcur
        for k in range(2, len(coeffs)):
            Tnext = 2.0 * scaled(Tcur) - Tprev
            out = out + coeffs[k] * Tnext
            Tprev, Tcur = Tcur, Tnext
    if not np.all(np.isfinite(out)):
        raise NonFiniteValue("non-finite exponential action; spectral interval violated?")
    return out[:, 0] if vec else out
