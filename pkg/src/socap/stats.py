"""Regression and test battery for settlement-level models.

OLS with classical standard errors, variance inflation factors, partial
F-test feature importances, the Mann-Whitney U test, Spearman correlation
and marginal-effect curves, plus the four-model comparison per outcome.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Hashable, Optional, Sequence

import numpy as np
import scipy.linalg
from scipy import stats as sps

CONTROL_COLUMNS = (
    "income_per_capita", "log_n_contracts", "log_population", "iwiw_use_rate",
    "mayor_victory_margin", "pct_hs_grads", "distance_to_capital_minutes",
    "share_inactive", "unemployment_rate", "share_over_60", "has_university",
)
NETWORK_COLUMNS = ("F", "D")
DEPENDENT_COLUMNS = ("mean_csb", "mean_cri")
MODEL_SPECS = {
    "base": (),
    "fragmentation": ("F",),
    "diversity": ("D",),
    "full": ("F", "D"),
}


class ZeroVarianceError(ValueError):
    pass


class RankDeficientError(np.linalg.LinAlgError):
    def __init__(self, dependent: list):
        self.dependent = dependent
        super().__init__(f"design matrix is rank deficient; dependent columns: {dependent}")


@dataclass
class SettlementRow:
    settlement_id: Hashable
    mean_csb: float
    mean_cri: float
    F: float
    D: float
    controls: dict = field(default_factory=dict)

    def value(self, name: str) -> float:
        if name in ("mean_csb", "mean_cri", "F", "D"):
            return getattr(self, name)
        return self.controls[name]


# -- standardization ----------------------------------------------------------

def standardize(X, names: Optional[Sequence[str]] = None):
    """Z-score each column with the sample (n-1) standard deviation.

    Returns
    -------
    Z : ndarray
    mean, sd : ndarray
        Per-column parameters, so ``X = Z * sd + mean``.
    """
    X = np.asarray(X, dtype=float)
    squeeze = X.ndim == 1
    X = X.reshape(X.shape[0], -1)
    mean = X.mean(axis=0)
    sd = X.std(axis=0, ddof=1)
    bad = ~(sd > 0)
    if bad.any():
        j = int(np.flatnonzero(bad)[0])
        label = names[j] if names is not None else j
        raise ZeroVarianceError(f"column {label!r} has zero variance")
    Z = (X - mean) / sd
    return (Z.ravel() if squeeze else Z), mean, sd


# -- OLS ----------------------------------------------------------------------

@dataclass
class RegressionResult:
    names: list
    params: np.ndarray
    bse: np.ndarray
    tvalues: np.ndarray
    pvalues: np.ndarray
    cov_params: np.ndarray
    resid: np.ndarray
    rsquared: float
    rsquared_adj: float
    fvalue: float
    f_pvalue: float
    nobs: int
    df_model: int
    df_resid: int
    ssr: float
    X: np.ndarray = field(repr=False, default=None)
    y: np.ndarray = field(repr=False, default=None)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"{name!r} not in model") from None

    def coef(self, name: str) -> float:
        return float(self.params[self.index(name)])

    def conf_int(self, level: float = 0.95) -> np.ndarray:
        t = sps.t.ppf(0.5 + level / 2, self.df_resid)
        return np.column_stack([self.params - t * self.bse, self.params + t * self.bse])

    def summary_dict(self) -> dict:
        return {
            "coefficients": {n: {"coef": float(b), "se": float(s), "t": float(t), "p": float(p)}
                             for n, b, s, t, p in zip(self.names, self.params, self.bse,
                                                      self.tvalues, self.pvalues)},
            "nobs": self.nobs, "rsquared": self.rsquared, "rsquared_adj": self.rsquared_adj,
            "fvalue": self.fvalue, "f_pvalue": self.f_pvalue, "df_model": self.df_model,
            "df_resid": self.df_resid,
        }


def _is_constant(col: np.ndarray) -> bool:
    return bool(np.all(col == col[0])) and col[0] != 0


def ols_fit(y, X, names: Optional[Sequence[str]] = None, rank_tol: float = 1e-10) -> RegressionResult:
    """Least squares via column-pivoted QR with homoskedastic inference.

    ``X`` should carry its own intercept column; one is detected as a
    constant nonzero column and excluded from the model degrees of freedom.

    Raises
    ------
    RankDeficientError
        Lists the columns that are linear combinations of the others.
    """
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n, k = X.shape
    names = list(names) if names is not None else [f"x{j}" for j in range(k)]
    if n <= k:
        raise ValueError(f"need more observations ({n}) than columns ({k})")
    Q, R, piv = scipy.linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > rank_tol * diag[0])) if k else 0
    if rank < k:
        raise RankDeficientError([names[j] for j in piv[rank:]])
    beta_p = scipy.linalg.solve_triangular(R, Q.T @ y)
    beta = np.empty(k)
    beta[piv] = beta_p
    resid = y - X @ beta
    ssr = float(resid @ resid)
    df_resid = n - k
    sigma2 = ssr / df_resid
    Rinv = scipy.linalg.solve_triangular(R, np.eye(k))
    cov_p = sigma2 * (Rinv @ Rinv.T)
    cov = np.empty_like(cov_p)
    cov[np.ix_(piv, piv)] = cov_p
    bse = np.sqrt(np.diag(cov))
    tvalues = beta / bse
    pvalues = 2 * sps.t.sf(np.abs(tvalues), df_resid)
    has_const = any(_is_constant(X[:, j]) for j in range(k))
    centre = y.mean() if has_const else 0.0
    tss = float(np.sum((y - centre) ** 2))
    r2 = 1 - ssr / tss if tss > 0 else np.nan
    df_model = k - 1 if has_const else k
    r2_adj = 1 - (1 - r2) * (n - has_const) / df_resid
    if df_model > 0 and np.isfinite(r2):
        fvalue = (r2 / df_model) / ((1 - r2) / df_resid) if r2 < 1 else np.inf
        f_p = float(sps.f.sf(fvalue, df_model, df_resid))
    else:
        fvalue, f_p = np.nan, np.nan
    return RegressionResult(names, beta, bse, tvalues, pvalues, cov, resid, r2, r2_adj,
                            float(fvalue), f_p, n, df_model, df_resid, ssr, X, y)


def add_constant(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    X = X.reshape(X.shape[0], -1)
    return np.column_stack([np.ones(X.shape[0]), X])


# -- VIF ----------------------------------------------------------------------

def vif(X, names: Optional[Sequence[str]] = None) -> dict:
    """Variance inflation factor of each predictor column (no intercept in ``X``).

    Columns are centred and scaled to unit norm, then each is regressed on
    the others plus an intercept. The scaling makes the result independent
    of column units. A constant column or a perfect fit reports ``inf``.
    """
    X = np.asarray(X, dtype=float)
    n, k = X.shape
    names = list(names) if names is not None else [f"x{j}" for j in range(k)]
    if k < 2:
        raise ValueError("VIF needs at least two predictors")
    Xc = X - X.mean(axis=0)
    norms = np.sqrt(np.sum(Xc ** 2, axis=0))
    flat = (np.ptp(X, axis=0) == 0) | ~(norms > 0)
    S = Xc / np.where(flat, 1.0, norms)
    out = {}
    for j in range(k):
        if flat[j]:
            # a constant column is collinear with the intercept
            out[names[j]] = math.inf
            continue
        others = add_constant(np.delete(S, j, axis=1))
        target = S[:, j]
        coef, *_ = np.linalg.lstsq(others, target, rcond=None)
        ssr = float(np.sum((target - others @ coef) ** 2))
        tss = float(np.sum((target - target.mean()) ** 2))
        r2 = min(max(1 - ssr / tss, 0.0), 1.0)
        out[names[j]] = math.inf if r2 >= 1 - 1e-12 else 1.0 / (1.0 - r2)
    return out


# -- ANOVA importances ------------------------------------------------------------

@dataclass(frozen=True)
class FeatureImportance:
    name: str
    F: float
    p: float
    significant: bool


def partial_f_test(fit: RegressionResult, drop: Sequence[str]):
    """F test of the full model against the model without ``drop``."""
    keep = [j for j, nm in enumerate(fit.names) if nm not in set(drop)]
    q = len(fit.names) - len(keep)
    Xr = fit.X[:, keep]
    if Xr.shape[1]:
        coef, *_ = np.linalg.lstsq(Xr, fit.y, rcond=None)
        ssr_r = float(np.sum((fit.y - Xr @ coef) ** 2))
    else:
        ssr_r = float(fit.y @ fit.y)
    F = ((ssr_r - fit.ssr) / q) / (fit.ssr / fit.df_resid)
    return float(F), float(sps.f.sf(F, q, fit.df_resid))


def anova_f_importance(fit: RegressionResult, alpha: float = 0.05,
                       exclude: Sequence[str] = ("const",)) -> list[FeatureImportance]:
    """Partial (drop-one) F test per feature, sorted by decreasing F."""
    out = []
    for nm in fit.names:
        if nm in exclude:
            continue
        F, p = partial_f_test(fit, [nm])
        out.append(FeatureImportance(nm, F, p, p < alpha))
    return sorted(out, key=lambda r: -r.F)


# -- Mann-Whitney U -----------------------------------------------------------

@dataclass(frozen=True)
class MwuResult:
    U: float
    p: float
    n1: int
    n2: int
    method: str


def _exact_u_counts(n1: int, n2: int) -> np.ndarray:
    """Number of rank arrangements giving each U = 0..n1*n2 (enumerated)."""
    counts = np.zeros(n1 * n2 + 1, dtype=np.int64)
    n = n1 + n2
    for pos in itertools.combinations(range(n), n1):
        u = sum(pos) - n1 * (n1 - 1) // 2
        counts[u] += 1
    return counts


def mann_whitney_u(a, b, exact_max_n: int = 12) -> MwuResult:
    """Two-sided Mann-Whitney U test; ``U`` counts pairs with a > b (ties 1/2).

    Small tie-free designs (n1 + n2 <= ``exact_max_n``) use the exact null
    distribution. Otherwise the normal approximation with tie-corrected
    variance and a 0.5 continuity correction is used.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n1, n2 = a.size, b.size
    if n1 == 0 or n2 == 0:
        raise ValueError("both samples must be nonempty")
    ranks = sps.rankdata(np.concatenate([a, b]))
    U = float(ranks[:n1].sum() - n1 * (n1 + 1) / 2)
    n = n1 + n2
    _, tie_counts = np.unique(ranks, return_counts=True)
    has_ties = bool(np.any(tie_counts > 1))
    if n <= exact_max_n and not has_ties:
        counts = _exact_u_counts(n1, n2)
        total = counts.sum()
        u = int(round(U))
        lower = counts[:u + 1].sum() / total
        upper = counts[u:].sum() / total
        return MwuResult(U, float(min(1.0, 2 * min(lower, upper))), n1, n2, "exact")
    mu = n1 * n2 / 2
    tie_term = float(np.sum(tie_counts ** 3 - tie_counts)) / (n * (n - 1))
    var = n1 * n2 / 12 * ((n + 1) - tie_term)
    if var <= 0:
        return MwuResult(U, 1.0, n1, n2, "normal_approx")
    z = max(abs(U - mu) - 0.5, 0.0) / math.sqrt(var)
    return MwuResult(U, float(min(1.0, 2 * sps.norm.sf(z))), n1, n2, "normal_approx")


def mwu_power(n1: int, n2: int, shift: float, sd: float, alpha: float = 0.05, reps: int = 2000,
              seed: int = 0) -> float:
    """Monte Carlo power of :func:`mann_whitney_u` against a location shift.

    Both groups are normal with standard deviation ``sd``; the first is moved
    by ``shift``. Returns the share of replicates rejecting at ``alpha``.
    """
    if reps < 1:
        raise ValueError("reps must be positive")
    rng = np.random.default_rng(seed)
    hits = 0
    for _ in range(reps):
        a = rng.normal(shift, sd, n1)
        b = rng.normal(0.0, sd, n2)
        hits += mann_whitney_u(a, b).p < alpha
    return hits / reps


# -- rank correlation -----------------------------------------------------------

def spearman_rho(x, y) -> float:
    """Pearson correlation of midranks; NaN when either input is constant."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.size < 3:
        raise ValueError("spearman_rho needs two equal-length vectors of length >= 3")
    rx, ry = sps.rankdata(x), sps.rankdata(y)
    rx -= rx.mean()
    ry -= ry.mean()
    denom = math.sqrt(float(rx @ rx) * float(ry @ ry))
    if denom == 0:
        return math.nan
    return float(rx @ ry) / denom


# -- marginal effects -----------------------------------------------------------

@dataclass
class MarginalEffects:
    feature: str
    grid: np.ndarray
    prediction: np.ndarray
    se: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    level: float


def marginal_effects(fit: RegressionResult, feature: str, grid, level: float = 0.90,
                     const: str = "const") -> MarginalEffects:
    """Prediction as ``feature`` moves over ``grid`` with other features at 0.

    The band is ``prediction +/- z * se`` with ``z`` the normal quantile for
    ``level`` and ``se`` from the coefficient covariance.
    """
    j = fit.index(feature)
    c = fit.index(const)
    grid = np.asarray(grid, dtype=float)
    pred = fit.params[c] + grid * fit.params[j]
    V = fit.cov_params
    var = V[c, c] + 2 * grid * V[c, j] + grid ** 2 * V[j, j]
    se = np.sqrt(var)
    z = sps.norm.ppf(0.5 + level / 2)
    return MarginalEffects(feature, grid, pred, se, pred - z * se, pred + z * se, level)


# -- model suite ----------------------------------------------------------------

@dataclass
class ModelSuite:
    """Fits per dependent variable and model name, with the standardization used."""

    fits: dict
    feature_means: dict
    feature_sds: dict
    n: int
    standardize_dv: bool

    def table(self, dv: str) -> dict:
        return self.fits[dv]


def design(rows: Sequence[SettlementRow], features: Sequence[str]) -> np.ndarray:
    return np.array([[r.value(f) for f in features] for r in rows], dtype=float)


def model_suite(rows: Sequence[SettlementRow], controls: Sequence[str] = CONTROL_COLUMNS,
                dependents: Sequence[str] = DEPENDENT_COLUMNS, standardize_dv: bool = False,
                specs: dict = MODEL_SPECS) -> ModelSuite:
    """Controls-only, +F, +D and +F+D fits for each dependent variable.

    Every predictor is standardized over ``rows``; the outcome only when
    ``standardize_dv`` is set.
    """
    features = list(NETWORK_COLUMNS) + list(controls)
    k_max = max(len(controls) + len(v) for v in specs.values())
    if len(rows) < k_max + 2:
        raise ValueError(f"need at least {k_max + 2} rows, got {len(rows)}")
    Z, mean, sd = standardize(design(rows, features), features)
    col = {f: Z[:, j] for j, f in enumerate(features)}
    fits = {}
    for dv in dependents:
        y = np.array([r.value(dv) for r in rows], dtype=float)
        if standardize_dv:
            y, _, _ = standardize(y, [dv])
        fits[dv] = {}
        for name, extra in specs.items():
            cols = list(extra) + list(controls)
            X = add_constant(np.column_stack([col[c] for c in cols]))
            fits[dv][name] = ols_fit(y, X, ["const"] + cols)
    return ModelSuite(fits, dict(zip(features, mean)), dict(zip(features, sd)), len(rows), standardize_dv)


def stars(p: float) -> str:
    if p < 0.01:
        return "***"
    if p < 0.05:
        return "**"
    if p < 0.1:
        return "*"
    return ""


def render_table(fits: dict, title: str = "", labels: Optional[dict] = None) -> str:
    """Aligned-text regression table: coefficient+stars over (SE), then fit rows."""
    labels = labels or {}
    cols = list(fits)
    names = []
    for f in fits.values():
        for nm in f.names:
            if nm != "const" and nm not in names:
                names.append(nm)
    names = [n for n in NETWORK_COLUMNS if n in names] + [n for n in names if n not in NETWORK_COLUMNS]
    names.append("const")
    lw = max([len(labels.get(n, n)) for n in names] + [22])
    cw = max(12, max(len(c) for c in cols) + 2)
    lines = []
    if title:
        lines.append(title)
    lines.append(" " * lw + "".join(f"{c:>{cw}}" for c in cols))
    lines.append("-" * (lw + cw * len(cols)))
    for nm in names:
        coef_cells, se_cells = [], []
        for c in cols:
            f = fits[c]
            if nm in f.names:
                j = f.index(nm)
                coef_cells.append(f"{f.params[j]:.3f}{stars(f.pvalues[j])}")
                se_cells.append(f"({f.bse[j]:.3f})")
            else:
                coef_cells.append("")
                se_cells.append("")
        lines.append(f"{labels.get(nm, nm):<{lw}}" + "".join(f"{x:>{cw}}" for x in coef_cells))
        lines.append(" " * lw + "".join(f"{x:>{cw}}" for x in se_cells))
    lines.append("-" * (lw + cw * len(cols)))
    for label, fn in (("Observations", lambda f: f"{f.nobs}"),
                      ("R2", lambda f: f"{f.rsquared:.3f}"),
                      ("Adjusted R2", lambda f: f"{f.rsquared_adj:.3f}"),
                      ("F Statistic", lambda f: f"{f.fvalue:.3f}{stars(f.f_pvalue)}")):
        lines.append(f"{label:<{lw}}" + "".join(f"{fn(fits[c]):>{cw}}" for c in cols))
    lines.append("Note: *p<0.1; **p<0.05; ***p<0.01")
    return "\n".join(lines) + "\n"
