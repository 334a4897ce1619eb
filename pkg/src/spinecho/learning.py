"""Structure learning from echo data: ingestion with covariance
propagation, cost functions, parameter sweeps with bootstrapped confidence
intervals, and the decoherence-limited distance estimate."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .otoc import OtocCurve


def ingest_nmr_repeats(raw: np.ndarray, times=None) -> OtocCurve:
    """Average repeated measurements and propagate the t=0 normalization.

    raw has one row per repeat; the first column is the t=0 amplitude that
    normalizes the rest.  The returned covariance includes the rank-one
    off-diagonal terms induced by the shared normalizer (first-order
    propagation of the standard errors of the means).
    """
    raw = np.asarray(raw, dtype=float)
    if raw.ndim != 2 or raw.shape[0] < 2 or raw.shape[1] < 2:
        raise ValueError("need >= 2 repeats and a t=0 column plus data columns")
    n_rep, n_col = raw.shape
    mean = raw.mean(axis=0)
    if abs(mean[0]) < 1e-300:
        raise ZeroDivisionError("zero t=0 amplitude; cannot normalize")
    cov_raw = np.cov(raw, rowvar=False, ddof=1) / n_rep  # covariance of means
    a0 = mean[0]
    c = mean[1:] / a0
    # first order: dc_i = dA_i / a0 - c_i dA_0 / a0
    jac = np.zeros((n_col - 1, n_col))
    jac[:, 0] = -c / a0
    jac[:, 1:] = np.eye(n_col - 1) / a0
    cov = jac @ cov_raw @ jac.T
    cov = 0.5 * (cov + cov.T)
    if times is None:
        times = np.arange(1, n_col, dtype=float)
    return OtocCurve(
        np.asarray(times, dtype=float), c,
        stderr=np.sqrt(np.clip(np.diag(cov), 0.0, None)),
        covariance=cov,
        metadata={"method": "nmr_repeats", "n_repeats": n_rep},
    )


def covariance_weighted_error(
    c_exp: OtocCurve, c_sim: np.ndarray, inverse_weighting: bool = False
) -> float:
    """[(dC)^T S (dC)]^(1/2) / Trace[S]^(1/2) with S the data covariance.

    The printed convention weights by the covariance itself; the
    statistically conventional inverse weighting is available behind the
    flag.
    """
    if c_exp.covariance is None:
        raise ValueError("experimental curve carries no covariance")
    c_sim = np.asarray(c_sim, dtype=float)
    if c_sim.shape != c_exp.values.shape:
        raise ValueError("simulation grid does not match the data grid")
    d = c_exp.values - c_sim
    sigma = c_exp.covariance
    if inverse_weighting:
        sigma = np.linalg.inv(sigma)
    return float(np.sqrt(d @ sigma @ d) / np.sqrt(np.trace(sigma)))


def combine_covariance(sigma_nmr: np.ndarray, sigma_qc: np.ndarray) -> np.ndarray:
    """Sigma_tot = [S_N^-1 (S_N^-1 + S_Q)^-1 S_Q^-1]^-1, evaluated verbatim."""
    s_n = np.asarray(sigma_nmr, dtype=float)
    s_q = np.asarray(sigma_qc, dtype=float)
    for name, s in (("NMR", s_n), ("QC", s_q)):
        cond = np.linalg.cond(s)
        if not np.isfinite(cond) or cond > 1e14:
            raise np.linalg.LinAlgError(
                f"{name} covariance is singular (condition {cond:.2e})")
    s_n_inv = np.linalg.inv(s_n)
    s_q_inv = np.linalg.inv(s_q)
    inner = np.linalg.inv(s_n_inv + s_q)
    return np.linalg.inv(s_n_inv @ inner @ s_q_inv)


@dataclass
class LearningResult:
    parameter: str
    estimate: float
    ci_low: float
    ci_high: float
    cost_curve: list[tuple[float, float, float]]
    fit_family: str
    boundary_minimum: bool = False
    bootstrap_estimates: np.ndarray | None = None

    def __post_init__(self):
        if not (self.ci_low <= self.estimate <= self.ci_high):
            raise ValueError("confidence interval must bracket the estimate")


def _fit_minimum(x: np.ndarray, y: np.ndarray, family: str) -> tuple[float, bool]:
    lo, hi = x.min(), x.max()
    if family in ("cubic", "quadratic"):
        deg = 3 if family == "cubic" else 2
        coef = np.polyfit(x, y, deg)
        grid = np.linspace(lo, hi, 2001)
        vals = np.polyval(coef, grid)
        k = int(np.argmin(vals))
        boundary = k in (0, len(grid) - 1)
        if not boundary:
            g0 = grid[k]
            dp = np.polyder(coef)
            ddp = np.polyder(dp)
            for _ in range(40):
                slope = np.polyval(dp, g0)
                curv = np.polyval(ddp, g0)
                if curv <= 0:
                    break
                step = slope / curv
                g0 = float(np.clip(g0 - step, lo, hi))
                if abs(step) < 1e-14:
                    break
            return g0, False
        return float(grid[k]), True
    if family == "gp_rbf":
        # minimal RBF interpolator with jitter
        span = hi - lo
        ell = span / max(len(x) - 1, 1) * 1.5
        k = np.exp(-0.5 * ((x[:, None] - x[None, :]) / ell) ** 2)
        alpha = np.linalg.solve(k + 1e-8 * np.eye(len(x)), y)
        grid = np.linspace(lo, hi, 4001)
        kg = np.exp(-0.5 * ((grid[:, None] - x[None, :]) / ell) ** 2)
        vals = kg @ alpha
        kk = int(np.argmin(vals))
        return float(grid[kk]), kk in (0, len(grid) - 1)
    raise ValueError(f"unknown fit family {family!r}")


def sweep_and_estimate(
    cost_points,
    fit: str = "cubic",
    resamples: int = 1000,
    mode: str = "point_resample",
    seed: int = 0,
    parameter: str = "parameter",
) -> LearningResult:
    """Fit a cost sweep, locate the interior minimum, and bootstrap a 2-sigma CI.

    point_resample perturbs each cost by its Gaussian error;
    repeat_resample resamples the sweep points with replacement (case
    resampling).  Boundary minima are reported with a flag rather than
    raised.
    """
    pts = sorted((float(p), float(c), float(e)) for p, c, e in cost_points)
    x = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    e = np.array([p[2] for p in pts])
    order = {"cubic": 3, "quadratic": 2, "gp_rbf": 2}[fit]
    if len(x) < order + 2:
        raise ValueError("not enough sweep points for the fit family")
    est, boundary = _fit_minimum(x, y, fit)
    rng = np.random.default_rng(seed)
    boots = np.empty(resamples)
    for b in range(resamples):
        if mode == "point_resample":
            yb = y + rng.normal(size=len(y)) * e
            xb = x
        elif mode == "repeat_resample":
            idx = rng.integers(0, len(x), size=len(x))
            if len(np.unique(x[idx])) < order + 2:
                boots[b] = np.nan
                continue
            xb, yb = x[idx], y[idx]
        else:
            raise ValueError(f"unknown bootstrap mode {mode!r}")
        try:
            boots[b], _ = _fit_minimum(np.asarray(xb), np.asarray(yb), fit)
        except Exception:
            boots[b] = np.nan
    boots = boots[np.isfinite(boots)]
    if len(boots):
        sd = boots.std(ddof=1)
        ci = (est - 2.0 * sd, est + 2.0 * sd)
    else:
        ci = (est, est)
    return LearningResult(
        parameter=parameter, estimate=float(est),
        ci_low=float(min(ci[0], est)), ci_high=float(max(ci[1], est)),
        cost_curve=pts, fit_family=fit, boundary_minimum=boundary,
        bootstrap_estimates=boots,
    )


ISOTROPIC_GEOMETRY_FACTOR = 4.0 * np.pi
DIPOLAR_LOBE_FACTOR = 0.6  # from the equipotential-volume integration V = 0.2 r^3


def max_otoc_distance(
    tau_d: float,
    t_exp: float,
    rho_s: float,
    zeta: float = 1.0,
    geometry: str = "isotropic",
) -> float:
    """Decoherence-limited OTOC range r_c in Angstrom.

    r_c = [tau_d / (g rho_s t_exp) * (9 + 3 zeta) / zeta]^(1/3) with
    g = 4 pi for spherically symmetric cluster growth and g = 0.6 when the
    cluster follows the dipolar equipotential lobes.
    """
    if min(tau_d, t_exp, rho_s) <= 0 or not 0 < zeta <= 1:
        raise ValueError("inputs must be positive with zeta in (0, 1]")
    g = {"isotropic": ISOTROPIC_GEOMETRY_FACTOR,
         "dipolar_lobes": DIPOLAR_LOBE_FACTOR}[geometry]
    return float((tau_d / (g * rho_s * t_exp) * (9.0 + 3.0 * zeta) / zeta) ** (1.0 / 3.0))
