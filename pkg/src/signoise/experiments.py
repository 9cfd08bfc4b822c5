"""Monte-Carlo studies of estimator behavior across a ladder of sample sizes.

Four study kinds:

``normality``  normalized estimation errors against their Gaussian limit:
               per-coordinate KS tests, variance agreement, and (at the
               largest rung) full covariance agreement with the inverse
               information.
``rate``       log-log regression of RMSE against the design size, drift
               block against total time and variance block against the
               number of observations; both slopes should sit near -1/2.
``lan``        the local likelihood-ratio structure: distribution of the
               central sequence, decay of the expansion remainder along
               the ladder, and the unit-mean identity for the ratio.
``risk``       worst-case normalized risk over a small lattice of nearby
               truths, compared against the expected loss of the limiting
               Gaussian.

Every study is a pure function of its config: replicate r of rung n reads
a dedicated counter-based stream, results are assembled by replicate
index, and reports exclude wall-clock, so the report bytes are identical
for any worker count.  Failed replicates are dropped, counted, and fail a
study only when their rate exceeds one percent.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats as _stats

from . import config as _config
from .errors import ConfigError, DomainError, SignoiseError
from .estimate import (
    Prior,
    closed_form_mle,
    has_closed_form,
    mle_numeric,
    posterior_mean_importance,
    posterior_mean_quadrature,
)
from .increments import MomentCache
from .information import InformationBundle, empirical_fisher, periodic_limit_fisher
from .likelihood import normalized_log_ratio
from .model import Theta
from .sampling import TimeGrid
from .simulate import IncrementSample, derive_seed, normal_stream

__all__ = [
    "StudyConfig",
    "StudyReport",
    "normality_study",
    "rate_study",
    "lan_study",
    "risk_study",
    "run_study",
    "study_from_dict",
    "save_report",
    "gaussian_expected_loss",
]

_FAILURE_RATE_LIMIT = 0.01
_REMAINDER_FLOOR = 1e-10


# ---------------------------------------------------------------------------
# config and report containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StudyConfig:
    """Declarative study description; everything pickles and digests.

    ``model``/``space``/``theta``/``grid`` are plain config dicts (see the
    config module) so worker processes can rebuild the objects themselves.
    """

    kind: str
    model: dict
    space: dict
    theta: dict
    grid: dict
    n_values: tuple[int, ...]
    replicates: int
    seed: int
    estimator: str = "auto"
    batches: int = 20
    info_source: str = "empirical"
    limit_period: float | None = None
    limit_regime: str = "vanishing_step"
    ks_level: float = 1e-3
    cov_rel_tol: float = 0.10
    slope_tol: float = 0.10
    directions: tuple[tuple[float, ...], ...] = ()
    delta_ks_max: float = 0.05
    ratio_se_factor: float = 4.0
    losses: tuple[tuple[str, float], ...] = (("power", 2.0),)
    risk_epsilon: float = 0.05
    risk_band: tuple[float, float] = (0.9, 1.3)
    prior: dict | None = None
    bayes_rel_tol: float = 1e-5
    bayes_draws: int = 4000

    def __post_init__(self):
        if self.kind not in ("normality", "rate", "lan", "risk"):
            raise ConfigError(f"unknown study kind {self.kind!r}", key="kind")
        object.__setattr__(self, "n_values", tuple(int(n) for n in self.n_values))
        if not self.n_values or any(n < 1 for n in self.n_values):
            raise ConfigError("n_values must be positive integers", key="n_values")
        if list(self.n_values) != sorted(set(self.n_values)):
            raise ConfigError("n_values must be strictly increasing", key="n_values")
        if self.replicates < 100:
            raise ConfigError(
                f"replicates must be >= 100, got {self.replicates}", key="replicates"
            )
        if not (2 <= self.batches <= self.replicates):
            raise ConfigError("batches must lie in [2, replicates]", key="batches")
        if self.kind == "rate":
            if len(self.n_values) < 2 or self.n_values[-1] < 10 * self.n_values[0]:
                raise ConfigError(
                    "ladder too short: the rate study needs n_values spanning at "
                    "least one decade",
                    key="n_values",
                )
        if self.info_source not in ("empirical", "limit"):
            raise ConfigError(
                f"info_source must be 'empirical' or 'limit', got {self.info_source!r}",
                key="info_source",
            )
        if self.info_source == "limit" and self.limit_period is None:
            raise ConfigError("info_source 'limit' needs limit_period", key="limit_period")
        object.__setattr__(
            self, "directions", tuple(tuple(float(x) for x in w) for w in self.directions)
        )
        object.__setattr__(
            self, "losses", tuple((str(k), float(a)) for k, a in self.losses)
        )
        for kind, _a in self.losses:
            if kind not in ("power", "indicator"):
                raise ConfigError(f"unknown loss kind {kind!r}", key="losses")

    def digest(self) -> str:
        return _config.digest(asdict(self))


@dataclass
class StudyReport:
    """Study output: metric rows, pass/fail checks, and provenance."""

    kind: str
    seed: int
    config_digest: str
    rows: list[dict] = field(default_factory=list)
    checks: list[dict] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def check_lines(self) -> list[str]:
        lines = []
        for c in self.checks:
            tag = "PASS" if c["passed"] else "FAIL"
            lines.append(f"{tag} {c['name']}: {c['detail']}")
        return lines

    def to_json(self) -> str:
        payload = {
            "kind": self.kind,
            "seed": self.seed,
            "config_digest": self.config_digest,
            "rows": self.rows,
            "checks": self.checks,
            "meta": self.meta,
            "passed": self.passed,
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def _check(name: str, passed: bool, detail: str, observed: float, threshold: float) -> dict:
    return {
        "name": name,
        "passed": bool(passed),
        "detail": detail,
        "observed": float(observed),
        "threshold": float(threshold),
    }


def _row(n: int, metric: str, coord: str, value: float, se: float | None = None) -> dict:
    return {
        "n": int(n),
        "metric": metric,
        "coord": coord,
        "value": float(value),
        "se": None if se is None else float(se),
    }


def _batch_se(values: np.ndarray, batches: int) -> float:
    """Standard error of the mean from contiguous batch means."""
    values = np.asarray(values, dtype=float)
    b = min(batches, values.size)
    if b < 2:
        return float("nan")
    means = np.array([chunk.mean() for chunk in np.array_split(values, b)])
    return float(means.std(ddof=1) / math.sqrt(b))


# ---------------------------------------------------------------------------
# per-process context and replicate tasks
# ---------------------------------------------------------------------------


@dataclass
class _Context:
    model: object
    space: object
    grid: TimeGrid
    cache: MomentCache
    theta: Theta
    mean: np.ndarray
    sd: np.ndarray
    grid_digest: str
    prior: Prior
    moments_memo: dict = field(default_factory=dict)

    def moments_at(self, vec_key: tuple):
        if vec_key not in self.moments_memo:
            theta = Theta.from_vector(np.array(vec_key), self.model.p)
            self.moments_memo[vec_key] = self.cache.moments(theta)
        return self.moments_memo[vec_key]


_CONTEXTS: dict[tuple, _Context] = {}


def _get_context(cfg: StudyConfig, n: int) -> _Context:
    key = (cfg.digest(), n)
    if key not in _CONTEXTS:
        model = _config.build_model(cfg.model)
        space = _config.build_space(cfg.space)
        grid = _config.build_grid_for(cfg.grid, n)
        theta = _config.build_theta(cfg.theta, model.p, model.q)
        cache = MomentCache(model, grid)
        m = cache.moments(theta)
        prior = _config.build_prior(cfg.prior) if cfg.prior else Prior()
        _CONTEXTS[key] = _Context(
            model=model,
            space=space,
            grid=grid,
            cache=cache,
            theta=theta,
            mean=m.mean,
            sd=np.sqrt(m.var),
            grid_digest=grid.digest(),
            prior=prior,
        )
    return _CONTEXTS[key]


def _reference_bundle(cfg: StudyConfig, ctx: _Context) -> InformationBundle:
    if cfg.info_source == "limit":
        offsets = cfg.grid.get("offsets") if cfg.grid.get("kind") == "pattern" else None
        return periodic_limit_fisher(
            ctx.model,
            ctx.theta,
            float(cfg.limit_period),
            regime=cfg.limit_regime,
            offsets=offsets,
            grid=ctx.grid,
        )
    return empirical_fisher(ctx.cache.moments(ctx.theta), ctx.grid)


def _estimate_one(ctx: _Context, cfg: StudyConfig, task: dict, r: int) -> np.ndarray | None:
    """One replicate of an estimation task; None marks a failed replicate."""
    theta_vec = task.get("theta_vec")
    if theta_vec is None:
        theta, mean, sd = ctx.theta, ctx.mean, ctx.sd
    else:
        theta = Theta.from_vector(np.asarray(theta_vec), ctx.model.p)
        m = ctx.moments_at(tuple(theta_vec))
        mean, sd = m.mean, np.sqrt(m.var)
    z = normal_stream(task["seed"], r, ctx.grid.n)
    y = mean + sd * z
    sample = IncrementSample(y, task["seed"], r, ctx.grid_digest, theta)
    name = task["estimator"]
    try:
        if name == "auto":
            name = "mle-closed" if has_closed_form(ctx.model) else "mle"
        if name == "mle-closed":
            est = closed_form_mle(ctx.model, ctx.space, ctx.grid, sample, cache=ctx.cache)
        elif name == "mle":
            est = mle_numeric(ctx.model, ctx.space, ctx.grid, sample, cache=ctx.cache)
        elif name == "bayes":
            res = posterior_mean_quadrature(
                ctx.model,
                ctx.space,
                ctx.grid,
                sample,
                prior=ctx.prior,
                rel_tol=cfg.bayes_rel_tol,
                cache=ctx.cache,
            )
            return res.theta.vector
        elif name == "bayes-is":
            res = posterior_mean_importance(
                ctx.model,
                ctx.space,
                ctx.grid,
                sample,
                prior=ctx.prior,
                draws=cfg.bayes_draws,
                seed=derive_seed(task["seed"], "is", r),
                cache=ctx.cache,
            )
            return res.theta.vector
        else:
            raise ConfigError(f"unknown estimator {name!r}", key="estimator")
        return est.theta.vector
    except ConfigError:
        raise
    except (SignoiseError, np.linalg.LinAlgError):
        return None


def _lan_one(ctx: _Context, cfg: StudyConfig, task: dict, r: int):
    """One replicate of the local-expansion task.

    Returns (central_sequence, log_ratios, remainders) with one entry per
    configured direction, or None on failure.
    """
    z = normal_stream(task["seed"], r, ctx.grid.n)
    y = ctx.mean + ctx.sd * z
    sample = IncrementSample(y, task["seed"], r, ctx.grid_digest, ctx.theta)
    scaling = np.asarray(task["scaling"])
    directions = task["directions"]
    try:
        log_ratios = np.empty(len(directions))
        remainders = np.empty(len(directions))
        central = None
        for j, w in enumerate(directions):
            dec = normalized_log_ratio(
                ctx.model,
                ctx.space,
                ctx.theta,
                np.asarray(w, dtype=float),
                ctx.grid,
                sample,
                scaling,
                cache=ctx.cache,
            )
            log_ratios[j] = dec.log_ratio
            remainders[j] = dec.remainder
            central = dec.score_term
        if central is None:  # no directions configured: probe at w = 0
            dec = normalized_log_ratio(
                ctx.model,
                ctx.space,
                ctx.theta,
                np.zeros(ctx.model.d),
                ctx.grid,
                sample,
                scaling,
                cache=ctx.cache,
            )
            central = dec.score_term
        return central, log_ratios, remainders
    except SignoiseError:
        return None


_TASK_FNS = {"estimate": _estimate_one, "lan": _lan_one}


def _eval_chunk(args):
    cfg, n, task, r_lo, r_hi = args
    ctx = _get_context(cfg, n)
    fn = _TASK_FNS[task["op"]]
    return [fn(ctx, cfg, task, r) for r in range(r_lo, r_hi)]


def _map_replicates(cfg: StudyConfig, n: int, task: dict, workers: int) -> list:
    """Run one task over all replicates, assembled in replicate order.

    Chunk boundaries depend only on the replicate count, never on the
    worker count, and chunk outputs are concatenated in submission order;
    combined with counter-based streams this makes the result list
    independent of parallelism.
    """
    m = cfg.replicates
    chunk = max(1, -(-m // 64))
    args = [(cfg, n, task, lo, min(lo + chunk, m)) for lo in range(0, m, chunk)]
    if workers <= 1:
        chunks = [_eval_chunk(a) for a in args]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_eval_chunk, args))
    return [item for ch in chunks for item in ch]


def _collect_estimates(
    cfg: StudyConfig, n: int, task: dict, workers: int
) -> tuple[np.ndarray, int]:
    """Stack per-replicate estimate vectors; returns (estimates, failures)."""
    raw = _map_replicates(cfg, n, task, workers)
    good = [v for v in raw if v is not None]
    failures = len(raw) - len(good)
    if not good:
        raise DomainError(f"every replicate failed at n={n}")
    return np.stack(good), failures


def _failure_check(report: StudyReport, n: int, failures: int, replicates: int) -> None:
    rate = failures / replicates
    report.checks.append(
        _check(
            f"failure-rate[n={n}]",
            rate <= _FAILURE_RATE_LIMIT,
            f"{failures}/{replicates} replicates failed",
            rate,
            _FAILURE_RATE_LIMIT,
        )
    )


def _norm_scale(grid: TimeGrid, p: int, q: int) -> np.ndarray:
    """Per-coordinate error normalizers: sqrt(T) drift, sqrt(n) variance."""
    return np.concatenate(
        [np.full(p, math.sqrt(grid.total_time)), np.full(q, math.sqrt(grid.n))]
    )


def _coord_names(p: int, q: int) -> list[str]:
    return [f"alpha[{j}]" for j in range(p)] + [f"beta[{j}]" for j in range(q)]


# ---------------------------------------------------------------------------
# normality
# ---------------------------------------------------------------------------


def normality_study(cfg: StudyConfig, workers: int = 1) -> StudyReport:
    """Normalized-error normality and covariance agreement along the ladder."""
    if cfg.kind != "normality":
        raise ConfigError(f"config kind is {cfg.kind!r}, expected 'normality'", key="kind")
    report = StudyReport(cfg.kind, cfg.seed, cfg.digest())
    failures_meta: dict[str, int] = {}
    for rung, n in enumerate(cfg.n_values):
        ctx = _get_context(cfg, n)
        bundle = _reference_bundle(cfg, ctx)
        cov_ref = bundle.joint_inverse
        names = _coord_names(ctx.model.p, ctx.model.q)
        task = {
            "op": "estimate",
            "estimator": cfg.estimator,
            "seed": derive_seed(cfg.seed, "normality", rung),
        }
        estimates, failures = _collect_estimates(cfg, n, task, workers)
        failures_meta[str(n)] = failures
        _failure_check(report, n, failures, cfg.replicates)

        scale = _norm_scale(ctx.grid, ctx.model.p, ctx.model.q)
        u = (estimates - ctx.theta.vector) * scale
        for k, name in enumerate(names):
            bias = float(u[:, k].mean())
            report.rows.append(_row(n, "bias", name, bias, _batch_se(u[:, k], cfg.batches)))
            var = float(u[:, k].var(ddof=1))
            centered = u[:, k] - u[:, k].mean()
            m4 = float(np.mean(centered**4))
            var_se = math.sqrt(max(m4 - var**2, 0.0) / u.shape[0])
            report.rows.append(_row(n, "variance", name, var, var_se))
            ref_sd = math.sqrt(cov_ref[k, k])
            ks = _stats.kstest(u[:, k], "norm", args=(0.0, ref_sd))
            report.rows.append(_row(n, "ks_stat", name, float(ks.statistic)))
            report.rows.append(_row(n, "ks_pvalue", name, float(ks.pvalue)))
            report.checks.append(
                _check(
                    f"normal[n={n}, {name}]",
                    ks.pvalue >= cfg.ks_level,
                    f"KS p-value {ks.pvalue:.3g} at level {cfg.ks_level:g}",
                    float(ks.pvalue),
                    cfg.ks_level,
                )
            )
            report.checks.append(
                _check(
                    f"variance[n={n}, {name}]",
                    abs(var - cov_ref[k, k]) <= 3.0 * var_se,
                    f"|{var:.4g} - {cov_ref[k, k]:.4g}| vs 3*SE = {3*var_se:.4g}",
                    float(abs(var - cov_ref[k, k])),
                    3.0 * var_se,
                )
            )
        if rung == len(cfg.n_values) - 1 and u.shape[1] > 0:
            cov_emp = np.cov(u, rowvar=False).reshape(u.shape[1], u.shape[1])
            gap = float(np.abs(cov_emp - cov_ref).max())
            ref_norm = float(np.abs(cov_ref).max())
            for a in range(u.shape[1]):
                for b in range(u.shape[1]):
                    report.rows.append(
                        _row(n, "covariance", f"{names[a]},{names[b]}", float(cov_emp[a, b]))
                    )
            report.checks.append(
                _check(
                    f"covariance[n={n}]",
                    gap <= cfg.cov_rel_tol * ref_norm,
                    f"max entry gap {gap:.4g} vs {cfg.cov_rel_tol:g} * {ref_norm:.4g}",
                    gap,
                    cfg.cov_rel_tol * ref_norm,
                )
            )
    report.meta = _meta(cfg, failures_meta)
    return report


# ---------------------------------------------------------------------------
# rate
# ---------------------------------------------------------------------------


def rate_study(cfg: StudyConfig, workers: int = 1) -> StudyReport:
    """RMSE decay slopes against total time (drift) and count (variance)."""
    if cfg.kind != "rate":
        raise ConfigError(f"config kind is {cfg.kind!r}, expected 'rate'", key="kind")
    report = StudyReport(cfg.kind, cfg.seed, cfg.digest())
    failures_meta: dict[str, int] = {}
    log_T, log_n = [], []
    log_rmse_drift, log_rmse_var = [], []
    for rung, n in enumerate(cfg.n_values):
        ctx = _get_context(cfg, n)
        p, q = ctx.model.p, ctx.model.q
        task = {
            "op": "estimate",
            "estimator": cfg.estimator,
            "seed": derive_seed(cfg.seed, "rate", rung),
        }
        estimates, failures = _collect_estimates(cfg, n, task, workers)
        failures_meta[str(n)] = failures
        _failure_check(report, n, failures, cfg.replicates)
        err = estimates - ctx.theta.vector
        if p:
            sq = np.sum(err[:, :p] ** 2, axis=1)
            rmse = math.sqrt(float(sq.mean()))
            report.rows.append(
                _row(n, "rmse_drift", "", rmse, _batch_se(sq, cfg.batches) / (2.0 * rmse))
            )
            log_T.append(math.log(ctx.grid.total_time))
            log_rmse_drift.append(math.log(rmse))
        if q:
            sq = np.sum(err[:, p:] ** 2, axis=1)
            rmse = math.sqrt(float(sq.mean()))
            report.rows.append(
                _row(n, "rmse_var", "", rmse, _batch_se(sq, cfg.batches) / (2.0 * rmse))
            )
            log_n.append(math.log(n))
            log_rmse_var.append(math.log(rmse))

    rate_points: dict[str, list[list[float]]] = {}
    for label, xs, ys in (
        ("drift", log_T, log_rmse_drift),
        ("var", log_n, log_rmse_var),
    ):
        if len(xs) < 2:
            continue
        rate_points[label] = [[float(x), float(y)] for x, y in zip(xs, ys)]
        fit = _stats.linregress(xs, ys)
        slope_se = float(fit.stderr) if np.isfinite(fit.stderr) else float("nan")
        report.rows.append(_row(0, f"slope_{label}", "", float(fit.slope), slope_se))
        report.checks.append(
            _check(
                f"slope-{label}",
                abs(fit.slope + 0.5) <= cfg.slope_tol,
                f"slope {fit.slope:.4f} within {cfg.slope_tol:g} of -0.5",
                float(abs(fit.slope + 0.5)),
                cfg.slope_tol,
            )
        )
    report.meta = _meta(cfg, failures_meta)
    report.meta["rate_points"] = rate_points
    return report


# ---------------------------------------------------------------------------
# local expansion
# ---------------------------------------------------------------------------


def lan_study(cfg: StudyConfig, workers: int = 1) -> StudyReport:
    """Central-sequence normality, remainder decay, unit-mean ratio identity."""
    if cfg.kind != "lan":
        raise ConfigError(f"config kind is {cfg.kind!r}, expected 'lan'", key="kind")
    report = StudyReport(cfg.kind, cfg.seed, cfg.digest())
    failures_meta: dict[str, int] = {}
    directions = [list(w) for w in cfg.directions]
    if not directions:
        # no directions configured: probe w = 0 so the remainder table still
        # appears, with every entry exactly zero
        directions = [[0.0] * _config.build_model(cfg.model).d]
    mean_abs_remainder: dict[int, list[float]] = {j: [] for j in range(len(directions))}
    last_rung = len(cfg.n_values) - 1
    for rung, n in enumerate(cfg.n_values):
        ctx = _get_context(cfg, n)
        bundle = _reference_bundle(cfg, ctx)
        scaling = bundle.local_scaling
        names = _coord_names(ctx.model.p, ctx.model.q)
        task = {
            "op": "lan",
            "seed": derive_seed(cfg.seed, "lan", rung),
            "scaling": scaling,
            "directions": directions,
        }
        raw = _map_replicates(cfg, n, task, workers)
        good = [v for v in raw if v is not None]
        failures = len(raw) - len(good)
        failures_meta[str(n)] = failures
        _failure_check(report, n, failures, cfg.replicates)
        if not good:
            raise DomainError(f"every replicate failed at n={n}")
        central = np.stack([g[0] for g in good])
        log_ratios = np.stack([g[1] for g in good])
        remainders = np.stack([g[2] for g in good])

        for k, name in enumerate(names):
            ks = _stats.kstest(central[:, k], "norm")
            report.rows.append(_row(n, "central_ks_stat", name, float(ks.statistic)))
            report.rows.append(_row(n, "central_ks_pvalue", name, float(ks.pvalue)))
            if rung == last_rung:
                report.checks.append(
                    _check(
                        f"central-normal[n={n}, {name}]",
                        ks.statistic < cfg.delta_ks_max,
                        f"KS distance {ks.statistic:.4f} vs {cfg.delta_ks_max:g}",
                        float(ks.statistic),
                        cfg.delta_ks_max,
                    )
                )
        for j, w in enumerate(directions):
            wname = f"w{j}"
            abs_rem = np.abs(remainders[:, j])
            m_rem = float(abs_rem.mean())
            mean_abs_remainder[j].append(m_rem)
            report.rows.append(
                _row(n, "mean_abs_remainder", wname, m_rem, _batch_se(abs_rem, cfg.batches))
            )
            ratios = np.exp(log_ratios[:, j])
            m_ratio = float(ratios.mean())
            se_ratio = _batch_se(ratios, cfg.batches)
            report.rows.append(_row(n, "mean_ratio", wname, m_ratio, se_ratio))
            slack = cfg.ratio_se_factor * se_ratio + 1e-12
            report.checks.append(
                _check(
                    f"unit-mean-ratio[n={n}, {wname}]",
                    abs(m_ratio - 1.0) <= slack,
                    f"|{m_ratio:.5f} - 1| vs {cfg.ratio_se_factor:g}*SE = {slack:.5f}",
                    float(abs(m_ratio - 1.0)),
                    slack,
                )
            )
    for j in range(len(directions)):
        seq = mean_abs_remainder[j]
        if len(seq) >= 2:
            # drift-only directions in linear families make the log-ratio
            # exactly quadratic, so the remainder is zero up to roundoff and
            # the ladder is pure noise; such a ladder counts as converged
            # rather than failing the strict decrease on 1e-14 jitter
            converged = all(v <= _REMAINDER_FLOOR for v in seq)
            decreasing = all(b < a for a, b in zip(seq, seq[1:]))
            report.checks.append(
                _check(
                    f"remainder-decay[w{j}]",
                    decreasing or converged,
                    "mean |remainder| strictly decreasing along the ladder: "
                    + " > ".join(f"{v:.4g}" for v in seq)
                    + (" (at the roundoff floor)" if converged else ""),
                    float(seq[-1]),
                    float(seq[0]),
                )
            )
    report.meta = _meta(cfg, failures_meta)
    return report


# ---------------------------------------------------------------------------
# risk
# ---------------------------------------------------------------------------


def gaussian_expected_loss(cov: np.ndarray, loss: tuple[str, float], nodes: int = 24) -> float:
    """E[L(|xi|)] for xi ~ N(0, cov).

    Quadratic power loss has the closed form trace(cov); anything else is
    computed by tensor Gauss-Hermite quadrature (d <= 4).
    """
    cov = np.asarray(cov, dtype=float)
    kind, a = loss
    if kind == "power" and a == 2.0:
        return float(np.trace(cov))
    d = cov.shape[0]
    if d > 4:
        raise DomainError("tensor quadrature for the loss bound is limited to d <= 4")
    eigvals, eigvecs = np.linalg.eigh(0.5 * (cov + cov.T))
    eigvals = np.clip(eigvals, 0.0, None)
    transform = eigvecs * np.sqrt(eigvals)
    x, w = np.polynomial.hermite_e.hermegauss(nodes)
    w = w / math.sqrt(2.0 * math.pi)
    mesh = np.meshgrid(*([x] * d), indexing="ij")
    z = np.stack([m.ravel() for m in mesh], axis=-1)
    wt = w
    for _ in range(d - 1):
        wt = np.multiply.outer(wt, w)
    xi = z @ transform.T
    r = np.linalg.norm(xi, axis=1)
    return float(wt.ravel() @ _loss_values(r, loss))


def _loss_values(r: np.ndarray, loss: tuple[str, float]) -> np.ndarray:
    kind, a = loss
    if kind == "power":
        return r**a
    return (r > a).astype(float)


def risk_study(cfg: StudyConfig, workers: int = 1) -> StudyReport:
    """Worst-case normalized risk over a nearby-truth lattice vs the limit."""
    if cfg.kind != "risk":
        raise ConfigError(f"config kind is {cfg.kind!r}, expected 'risk'", key="kind")
    report = StudyReport(cfg.kind, cfg.seed, cfg.digest())
    failures_meta: dict[str, int] = {}
    for rung, n in enumerate(cfg.n_values):
        ctx = _get_context(cfg, n)
        d = ctx.model.d
        center = ctx.theta.vector
        shifts = [np.zeros(d)]
        for k in range(d):
            eps = cfg.risk_epsilon * ctx.space.widths[k]
            for sgn in (+1.0, -1.0):
                e = np.zeros(d)
                e[k] = sgn * eps
                shifts.append(e)
        lattice = [center + s for s in shifts]
        for j, point in enumerate(lattice):
            if not ctx.space.contains(Theta.from_vector(point, ctx.model.p)):
                raise ConfigError(
                    f"risk lattice point {j} leaves the parameter box; shrink "
                    "risk_epsilon or move the truth inward",
                    key="risk_epsilon",
                )
        bundle = _reference_bundle(cfg, ctx)
        cov_ref = bundle.joint_inverse
        scale = _norm_scale(ctx.grid, ctx.model.p, ctx.model.q)

        loss_records: dict[int, list[tuple[float, float]]] = {
            i: [] for i in range(len(cfg.losses))
        }
        total_failures = 0
        for j, point in enumerate(lattice):
            task = {
                "op": "estimate",
                "estimator": cfg.estimator,
                "seed": derive_seed(cfg.seed, "risk", rung, j),
                "theta_vec": [float(v) for v in point],
            }
            estimates, failures = _collect_estimates(cfg, n, task, workers)
            total_failures += failures
            u = (estimates - point) * scale
            r = np.linalg.norm(u, axis=1)
            for i, loss in enumerate(cfg.losses):
                vals = _loss_values(r, loss)
                mean_loss = float(vals.mean())
                se = _batch_se(vals, cfg.batches)
                loss_records[i].append((mean_loss, se))
                report.rows.append(
                    _row(n, f"risk[{_loss_name(loss)}]", f"point{j}", mean_loss, se)
                )
        failures_meta[str(n)] = total_failures
        _failure_check(report, n, total_failures, cfg.replicates * len(lattice))

        for i, loss in enumerate(cfg.losses):
            bound = gaussian_expected_loss(cov_ref, loss)
            sups = max(loss_records[i], key=lambda t: t[0])
            sup_risk, sup_se = sups
            report.rows.append(_row(n, f"sup_risk[{_loss_name(loss)}]", "", sup_risk, sup_se))
            report.rows.append(_row(n, f"bound[{_loss_name(loss)}]", "", bound))
            if loss[0] == "power" and bound > 0.0:
                ratio = sup_risk / bound
                lo, hi = cfg.risk_band
                slack = 3.0 * sup_se / bound
                passed = (ratio - slack) <= hi and (ratio + slack) >= lo
                report.rows.append(_row(n, f"risk_ratio[{_loss_name(loss)}]", "", ratio))
                report.checks.append(
                    _check(
                        f"risk-ratio[n={n}, {_loss_name(loss)}]",
                        passed,
                        f"sup/bound = {ratio:.4f} in [{lo:g}, {hi:g}] with 3*SE slack "
                        f"{slack:.4f}",
                        ratio,
                        hi,
                    )
                )
    report.meta = _meta(cfg, failures_meta)
    return report


def _loss_name(loss: tuple[str, float]) -> str:
    kind, a = loss
    return f"{kind}:{a:g}"


# ---------------------------------------------------------------------------
# dispatch, persistence
# ---------------------------------------------------------------------------


def _meta(cfg: StudyConfig, failures: dict[str, int]) -> dict:
    return {
        "estimator": cfg.estimator,
        "info_source": cfg.info_source,
        "replicates": cfg.replicates,
        "batches": cfg.batches,
        "n_values": list(cfg.n_values),
        "theta": cfg.theta,
        "failures": failures,
    }


_STUDIES = {
    "normality": normality_study,
    "rate": rate_study,
    "lan": lan_study,
    "risk": risk_study,
}


def run_study(cfg: StudyConfig, workers: int = 1) -> StudyReport:
    return _STUDIES[cfg.kind](cfg, workers=workers)


_STUDY_FIELD_KEYS = {
    "kind", "model", "space", "theta", "grid", "n_values", "replicates", "seed",
    "estimator", "batches", "info_source", "limit_period", "limit_regime",
    "ks_level", "cov_rel_tol", "slope_tol", "directions", "delta_ks_max",
    "ratio_se_factor", "losses", "risk_epsilon", "risk_band", "prior",
    "bayes_rel_tol", "bayes_draws",
}


def study_from_dict(cfg: dict) -> StudyConfig:
    """Validate a raw study config dict and build the StudyConfig.

    Nested model/space/theta/grid dicts are built once here so malformed
    entries surface as ConfigError before any replicate runs; estimator
    applicability and the Bayes dimension guard are checked here too.
    """
    _config._check_keys(
        cfg,
        _STUDY_FIELD_KEYS,
        {"kind", "model", "space", "theta", "grid", "n_values", "replicates", "seed"},
        "study",
    )
    model = _config.build_model(cfg["model"])
    space = _config.build_space(cfg["space"])
    theta = _config.build_theta(cfg["theta"], model.p, model.q)
    if model.p != space.p or model.q != space.q:
        raise ConfigError(
            f"model dims ({model.p}, {model.q}) do not match the box "
            f"({space.p}, {space.q})",
            key="space",
        )
    if not space.contains(theta):
        raise ConfigError("theta lies outside the parameter box", key="theta")

    n_values = cfg["n_values"]
    if not isinstance(n_values, list) or not n_values:
        raise ConfigError("n_values must be a non-empty list", key="n_values")
    for n in n_values:
        _config.build_grid_for(cfg["grid"], int(n))

    estimator = cfg.get("estimator", "auto")
    if estimator not in ("auto", "mle", "mle-closed", "bayes", "bayes-is"):
        raise ConfigError(f"unknown estimator {estimator!r}", key="estimator")
    if estimator == "mle-closed" and not has_closed_form(model):
        raise ConfigError(
            "estimator 'mle-closed' needs a linear drift with known or scaled "
            "noise",
            key="estimator",
        )
    if estimator == "bayes" and space.d > 4:
        raise ConfigError(
            f"dimension guard: the bayes estimator's tensor cubature is limited "
            f"to d <= 4, got d = {space.d}",
            key="estimator",
        )

    directions = cfg.get("directions", [])
    if not isinstance(directions, list):
        raise ConfigError("directions must be a list of vectors", key="directions")
    for w in directions:
        if not isinstance(w, list) or len(w) != space.d:
            raise ConfigError(
                f"each direction must be a length-{space.d} vector", key="directions"
            )

    losses = cfg.get("losses", [["power", 2.0]])
    if not isinstance(losses, list):
        raise ConfigError("losses must be a list of [kind, level] pairs", key="losses")
    loss_tuples = []
    for item in losses:
        if not (isinstance(item, list) and len(item) == 2):
            raise ConfigError("each loss must be a [kind, level] pair", key="losses")
        loss_tuples.append((str(item[0]), float(item[1])))

    band = cfg.get("risk_band", [0.9, 1.3])
    if not (isinstance(band, list) and len(band) == 2):
        raise ConfigError("risk_band must be [lo, hi]", key="risk_band")

    if cfg.get("prior") is not None:
        _config.build_prior(cfg["prior"])

    return StudyConfig(
        kind=cfg["kind"],
        model=cfg["model"],
        space=cfg["space"],
        theta=cfg["theta"],
        grid=cfg["grid"],
        n_values=tuple(int(n) for n in n_values),
        replicates=int(cfg["replicates"]),
        seed=int(cfg["seed"]),
        estimator=estimator,
        batches=int(cfg.get("batches", 20)),
        info_source=cfg.get("info_source", "empirical"),
        limit_period=(
            None if cfg.get("limit_period") is None else float(cfg["limit_period"])
        ),
        limit_regime=cfg.get("limit_regime", "vanishing_step"),
        ks_level=float(cfg.get("ks_level", 1e-3)),
        cov_rel_tol=float(cfg.get("cov_rel_tol", 0.10)),
        slope_tol=float(cfg.get("slope_tol", 0.10)),
        directions=tuple(tuple(float(x) for x in w) for w in directions),
        delta_ks_max=float(cfg.get("delta_ks_max", 0.05)),
        ratio_se_factor=float(cfg.get("ratio_se_factor", 4.0)),
        losses=tuple(loss_tuples),
        risk_epsilon=float(cfg.get("risk_epsilon", 0.05)),
        risk_band=(float(band[0]), float(band[1])),
        prior=cfg.get("prior"),
        bayes_rel_tol=float(cfg.get("bayes_rel_tol", 1e-5)),
        bayes_draws=int(cfg.get("bayes_draws", 4000)),
    )


def save_report(report: StudyReport, out_dir, stem: str = "report") -> list[str]:
    """Write the JSON report, a CSV of its rows, and rate-plot data files.

    Returns the written paths.  Bytes depend only on the report contents.
    """
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    json_path = os.path.join(out_dir, f"{stem}.json")
    with open(json_path, "w") as fh:
        fh.write(report.to_json())
    paths.append(json_path)

    csv_path = os.path.join(out_dir, f"{stem}.csv")
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["kind", "n", "metric", "coord", "value", "se"])
        for row in report.rows:
            w.writerow(
                [
                    report.kind,
                    row["n"],
                    row["metric"],
                    row["coord"],
                    repr(row["value"]),
                    "" if row["se"] is None else repr(row["se"]),
                ]
            )
    paths.append(csv_path)

    if report.kind == "rate":
        for label, points in report.meta.get("rate_points", {}).items():
            dat_path = os.path.join(out_dir, f"{stem}_{label}.dat")
            with open(dat_path, "w") as fh:
                fh.write(f"# log_size log_rmse_{label}\n")
                for x, y in points:
                    fh.write(f"{x!r} {y!r}\n")
            paths.append(dat_path)
    return paths
