"""ERGM estimation: Monte Carlo MLE, noise-aware missing-data MLE, exact
small-graph fits, and a sampled KL divergence for utility reporting.

The two Monte Carlo fits share one outer loop.  At the current center theta_c
a fresh sample is drawn and the sampled log-likelihood-ratio surface

    plain:    l(d) = d.g_obs - logmeanexp(S_model @ d)
    missing:  l(d) = logmeanexp(S_cond @ d) - logmeanexp(S_model @ d)

is maximized over ||d|| <= step_bound (d = theta - theta_c).  The step is
declared converged when the maximizer is interior with a small gradient (the
first-order condition: observed or conditional means match the reweighted
model means) and the estimated gain of the step is below llr_tol.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize
from scipy.stats import norm

from ._util import (
    derive_seed,
    floor_eigenvalues,
    logmeanexp,
    significance_stars,
    softmax_weights,
    weighted_mean_cov,
)
from .mcmc import ChainConfig, sample_conditional, sample_ergm
from .netgraph import Graph, NodeAttributes
from .privacy import MechanismParams
from .terms import (
    DYAD_INDEPENDENT,
    CompiledModel,
    ModelError,
    ModelSpec,
    _as_compiled,
    compute_stats,
)

__all__ = [
    "FitConfig",
    "KLConfig",
    "FitResult",
    "KLEstimate",
    "SampleSummary",
    "InferenceError",
    "MLEDoesNotExistError",
    "SeparationError",
    "mcmle_fit",
    "missing_data_fit",
    "missing_information",
    "exact_fit_small",
    "dyad_independent_fit",
    "kl_utility",
    "denoise",
    "wald_table",
]

EIG_FLOOR = 1e-8


class InferenceError(RuntimeError):
    """Estimation could not produce a usable answer."""


class MLEDoesNotExistError(InferenceError):
    """Observed statistics sit on the boundary of the attainable set."""


class SeparationError(InferenceError):
    """Perfect separation in a dyad-independent fit."""


@dataclass(frozen=True)
class FitConfig:
    draws: int = 1024
    burn_in: int | None = None
    interval: int | None = None
    proposal: str = "uniform"
    max_iter: int = 30
    step_bound: float = 0.5
    grad_tol: float | None = None      # default 0.01 * sqrt(q)
    llr_tol: float = 0.01
    retries: int = 3
    seed: int = 0

    def chain(self, seed: int, draws: int | None = None, store_graphs: bool = False) -> ChainConfig:
        return ChainConfig(
            burn_in=self.burn_in,
            interval=self.interval,
            draws=self.draws if draws is None else draws,
            proposal=self.proposal,
            seed=seed,
            store_graphs=store_graphs,
        )


@dataclass(frozen=True)
class KLConfig:
    segments: int = 8
    draws: int = 2000
    burn_in: int | None = None
    interval: int | None = None
    proposal: str = "uniform"
    seed: int = 0


@dataclass
class SampleSummary:
    mean: np.ndarray
    cov: np.ndarray


@dataclass
class FitResult:
    method: str
    names: tuple[str, ...]
    theta: np.ndarray
    std_errors: np.ndarray
    info: np.ndarray
    iterations: int
    converged: bool
    warnings: tuple[str, ...] = ()
    sample_summaries: dict[str, SampleSummary] = field(default_factory=dict)


@dataclass
class KLEstimate:
    """Clamped KL divergence estimate; raw keeps the unclamped value."""

    value: float
    raw: float
    segments: tuple[float, ...] = ()

    def __float__(self):
        return self.value


# -- shared pieces -----------------------------------------------------------


def _maximize(value_grad, q: int, bound: float):
    """Maximize a sampled log-likelihood-ratio surface over ||d||_2 <= bound.

    Returns (d, value, gradient_norm, interior).
    """

    def neg(d):
        v, g = value_grad(d)
        return -v, -g

    constraint = {
        "type": "ineq",
        "fun": lambda d: bound**2 - float(d @ d),
        "jac": lambda d: -2.0 * d,
    }
    res = optimize.minimize(
        neg,
        np.zeros(q),
        jac=True,
        method="SLSQP",
        constraints=[constraint],
        options={"maxiter": 200, "ftol": 1e-12},
    )
    d = res.x
    norm_d = float(np.linalg.norm(d))
    if norm_d > bound:
        d = d * (bound / norm_d)
        norm_d = bound
    value, grad = value_grad(d)
    return d, float(value), float(np.linalg.norm(grad)), norm_d < bound - 1e-9


def _lr_plain(S, g_obs):
    def value_grad(d):
        a = S @ d
        value = float(d @ g_obs) - float(logmeanexp(a))
        grad = g_obs - softmax_weights(a) @ S
        return value, grad

    return value_grad


def _lr_missing(S_cond, S_model):
    def value_grad(d):
        ac = S_cond @ d
        am = S_model @ d
        value = float(logmeanexp(ac)) - float(logmeanexp(am))
        grad = softmax_weights(ac) @ S_cond - softmax_weights(am) @ S_model
        return value, grad

    return value_grad


def _outside_box(g_obs, S) -> bool:
    return bool(np.any(g_obs > S.max(axis=0)) or np.any(g_obs < S.min(axis=0)))


def _cycling(prev_delta, delta, interior) -> bool:
    """Two consecutive full-length steps pointing nearly opposite ways: the
    outer iteration is bouncing across the optimum instead of approaching it."""
    if interior or prev_delta is None:
        return False
    denom = float(np.linalg.norm(prev_delta) * np.linalg.norm(delta))
    return denom > 0.0 and float(prev_delta @ delta) / denom < -0.5


def _se_from_info(info):
    pd_info, floored = floor_eigenvalues(info, EIG_FLOOR)
    se = np.sqrt(np.diag(np.linalg.inv(pd_info)))
    return pd_info, se, floored


def _resolve_grad_tol(cfg: FitConfig, q: int) -> float:
    return 0.01 * np.sqrt(q) if cfg.grad_tol is None else cfg.grad_tol


# -- Monte Carlo MLE ---------------------------------------------------------


def mcmle_fit(
    model: ModelSpec | CompiledModel,
    x: Graph,
    attrs: NodeAttributes | None = None,
    theta0=None,
    cfg: FitConfig = FitConfig(),
) -> FitResult:
    """Maximum likelihood via iterated sampled likelihood-ratio maximization."""
    cm = _as_compiled(model, x, attrs)
    g_obs = compute_stats(cm, x)
    warnings: list[str] = []
    if theta0 is None:
        theta0 = _default_theta0(cm, x, warnings)
    theta = np.asarray(theta0, dtype=np.float64).copy()
    if theta.shape != (cm.q,):
        raise ValueError(f"theta0 must have length {cm.q}")
    grad_tol = _resolve_grad_tol(cfg, cm.q)

    draws = cfg.draws
    converged = False
    S = None
    center = theta.copy()
    delta = np.zeros(cm.q)
    iterations = 0
    bound = cfg.step_bound
    prev_delta = None

    for it in range(cfg.max_iter):
        iterations = it + 1
        for attempt in range(cfg.retries + 1):
            seed = derive_seed(cfg.seed, "mcmle", it, attempt)
            ss = sample_ergm(cm, theta, init=x, cfg=cfg.chain(seed, draws))
            S = ss.stats
            if not _outside_box(g_obs, S):
                break
            if attempt < cfg.retries:
                draws *= 2
                warnings.append(f"degenerate sample at iteration {it}; draws -> {draws}")
        else:
            warnings.append("observed statistics outside sampled range after retries")
        center = theta.copy()
        delta, value, grad_norm, interior = _maximize(_lr_plain(S, g_obs), cm.q, bound)
        theta = center + delta
        if interior and grad_norm <= grad_tol and value <= cfg.llr_tol:
            converged = True
            break
        if _cycling(prev_delta, delta, interior):
            bound = max(bound / 2.0, cfg.step_bound / 16.0)
        elif value <= 10 * cfg.llr_tol and bound < cfg.step_bound:
            # near-stationary: restore the trust region so the maximizer can
            # come to rest inside it
            bound = min(2.0 * bound, cfg.step_bound)
        prev_delta = None if interior else delta

    log_w = S @ (theta - center)
    _, info = weighted_mean_cov(S, log_w)
    info_pd, se, floored = _se_from_info(info)
    if floored:
        warnings.append("information matrix floored to positive definite")
    mean, cov = weighted_mean_cov(S)
    return FitResult(
        method="mcmle",
        names=cm.names,
        theta=theta,
        std_errors=se,
        info=info_pd,
        iterations=iterations,
        converged=converged,
        warnings=tuple(warnings),
        sample_summaries={"model": SampleSummary(mean, cov)},
    )


def missing_data_fit(
    model: ModelSpec | CompiledModel,
    y: Graph,
    gamma: MechanismParams,
    attrs: NodeAttributes | None = None,
    theta0=None,
    cfg: FitConfig = FitConfig(),
) -> FitResult:
    """MLE of the ERGM under the release mechanism, treating the true graph
    as missing data: maximizes the likelihood of y itself.

    Each iteration draws one sample conditioned on the release and one from
    the bare model, and maximizes the two-sample likelihood-ratio estimate.
    When no starting point is given, the face-value fit of the released graph
    seeds the iteration.
    """
    cm = _as_compiled(model, y, attrs)
    warnings: list[str] = []
    if theta0 is None:
        naive = mcmle_fit(cm, y, cfg=replace(cfg, seed=derive_seed(cfg.seed, "missing-start")))
        theta0 = naive.theta
        if not naive.converged:
            warnings.append("face-value starting fit did not converge")
    theta = np.asarray(theta0, dtype=np.float64).copy()
    if theta.shape != (cm.q,):
        raise ValueError(f"theta0 must have length {cm.q}")

    if gamma.eps_worst() == 0.0:
        return FitResult(
            method="missing-data",
            names=cm.names,
            theta=theta,
            std_errors=np.full(cm.q, np.nan),
            info=np.zeros((cm.q, cm.q)),
            iterations=0,
            converged=False,
            warnings=tuple(
                warnings
                + ["non-identifiable: the release carries no edge information (eps = 0)"]
            ),
        )

    grad_tol = _resolve_grad_tol(cfg, cm.q)
    converged = False
    S_cond = S_model = None
    center = theta.copy()
    iterations = 0
    draws = cfg.draws
    boosts = 0
    bound = cfg.step_bound
    prev_delta = None
    # carry chain state between iterations so each round starts equilibrated
    cond_init = model_init = y

    for it in range(cfg.max_iter):
        iterations = it + 1
        seed_c = derive_seed(cfg.seed, "missing-cond", it)
        seed_m = derive_seed(cfg.seed, "missing-model", it)
        cond = sample_conditional(cm, theta, gamma, y, cfg=cfg.chain(seed_c, draws), init=cond_init)
        ss = sample_ergm(cm, theta, init=model_init, cfg=cfg.chain(seed_m, draws))
        S_cond, S_model = cond.stats, ss.stats
        cond_init, model_init = cond.final_graph, ss.final_graph
        center = theta.copy()
        delta, value, grad_norm, interior = _maximize(
            _lr_missing(S_cond, S_model), cm.q, bound
        )
        theta = center + delta
        if interior and grad_norm <= grad_tol and value <= cfg.llr_tol:
            converged = True
            break
        if _cycling(prev_delta, delta, interior):
            bound = max(bound / 2.0, cfg.step_bound / 16.0)
        elif value <= 10 * cfg.llr_tol:
            # near-stationary: the remaining apparent gain is noise-limited,
            # so restore the trust region and enlarge the sample
            if bound < cfg.step_bound:
                bound = min(2.0 * bound, cfg.step_bound)
            elif boosts < cfg.retries:
                boosts += 1
                draws *= 2
                warnings.append(
                    f"gain {value:.3g} above tolerance at iteration {it}; draws -> {draws}"
                )
        prev_delta = None if interior else delta

    shift = theta - center
    _, cov_model = weighted_mean_cov(S_model, S_model @ shift)
    _, cov_cond = weighted_mean_cov(S_cond, S_cond @ shift)
    info = cov_model - cov_cond
    info_pd, se, floored = _se_from_info(info)
    if floored:
        warnings.append("information difference not positive definite; floored")
    men_m, cov_m = weighted_mean_cov(S_model)
    mean_c, cov_c = weighted_mean_cov(S_cond)
    return FitResult(
        method="missing-data",
        names=cm.names,
        theta=theta,
        std_errors=se,
        info=info_pd,
        iterations=iterations,
        converged=converged,
        warnings=tuple(warnings),
        sample_summaries={
            "model": SampleSummary(men_m, cov_m),
            "conditional": SampleSummary(mean_c, cov_c),
        },
    )


def missing_information(
    model: ModelSpec | CompiledModel,
    theta,
    y: Graph,
    gamma: MechanismParams,
    attrs: NodeAttributes | None = None,
    cfg: FitConfig = FitConfig(),
) -> np.ndarray:
    """Monte Carlo estimate of the missing-data information at theta:
    Cov[g] under the model minus Cov[g] conditional on the release."""
    cm = _as_compiled(model, y, attrs)
    theta = np.asarray(theta, dtype=np.float64)
    S_cond = sample_conditional(
        cm, theta, gamma, y, cfg=cfg.chain(derive_seed(cfg.seed, "info-cond"))
    ).stats
    S_model = sample_ergm(
        cm, theta, init=y, cfg=cfg.chain(derive_seed(cfg.seed, "info-model"))
    ).stats
    _, cov_model = weighted_mean_cov(S_model)
    _, cov_cond = weighted_mean_cov(S_cond)
    return cov_model - cov_cond


def _default_theta0(cm: CompiledModel, x: Graph, warnings: list[str]) -> np.ndarray:
    """Dyad-independent fit on the dyad-independent sub-model, zeros elsewhere."""
    theta0 = np.zeros(cm.q)
    sub_terms = tuple(t for t in cm.spec.terms if t.kind in DYAD_INDEPENDENT)
    if not sub_terms:
        return theta0
    try:
        sub_fit = dyad_independent_fit(ModelSpec(sub_terms), x, cm.attrs)
    except (InferenceError, ModelError) as exc:
        warnings.append(f"theta0 fallback to zeros ({exc})")
        return theta0
    for name, value in zip(sub_fit.names, sub_fit.theta):
        theta0[cm.names.index(name)] = value
    return theta0


# -- exact and oracle fits ---------------------------------------------------


def _enumerate_stats(cm: CompiledModel, max_dyads: int):
    from .netgraph import dyad_count

    nd = dyad_count(cm.n, cm.directed)
    if nd > max_dyads:
        raise InferenceError(f"exact enumeration capped at {max_dyads} dyads, graph has {nd}")
    count = 1 << nd
    bits = ((np.arange(count)[:, None] >> np.arange(nd)[None, :]) & 1).astype(bool)
    if cm.dyad_independent:
        G = bits.astype(np.float64) @ cm.dyadcov_flat().T
    else:
        G = np.empty((count, cm.q))
        for idx in range(count):
            G[idx] = compute_stats(cm, Graph(cm.n, cm.directed, bits[idx]))
    return bits, G


def exact_fit_small(
    model: ModelSpec | CompiledModel,
    x: Graph,
    attrs: NodeAttributes | None = None,
    max_dyads: int = 20,
) -> FitResult:
    """Exact MLE by enumerating every graph on the dyad set (small n only)."""
    cm = _as_compiled(model, x, attrs)
    g_obs = compute_stats(cm, x)
    _, G = _enumerate_stats(cm, max_dyads)

    col_min, col_max = G.min(axis=0), G.max(axis=0)
    degenerate = col_max - col_min < 1e-12
    if np.any(degenerate):
        bad = [cm.names[k] for k in np.flatnonzero(degenerate)]
        raise ModelError(f"statistics constant over all graphs (non-identifiable): {bad}")
    on_boundary = (g_obs <= col_min + 1e-12) | (g_obs >= col_max - 1e-12)
    if np.any(on_boundary):
        bad = [cm.names[k] for k in np.flatnonzero(on_boundary)]
        raise MLEDoesNotExistError(
            f"observed statistics on the boundary of the attainable range: {bad}"
        )

    theta = np.zeros(cm.q)
    info = np.eye(cm.q)
    for iteration in range(200):
        a = G @ theta
        a_max = a.max()
        w = np.exp(a - a_max)
        Z = w.sum()
        probs = w / Z
        mean = probs @ G
        grad = g_obs - mean
        info = G.T @ (G * probs[:, None]) - np.outer(mean, mean)
        if np.abs(grad).max() < 1e-10:
            break
        step = np.linalg.solve(info + 1e-12 * np.eye(cm.q), grad)
        loglik = float(theta @ g_obs) - (np.log(Z) + a_max)
        t = 1.0
        for _ in range(60):
            cand = theta + t * step
            ca = G @ cand
            cll = float(cand @ g_obs) - float(np.logaddexp.reduce(ca))
            if cll > loglik:
                break
            t *= 0.5
        theta = theta + t * step
        if np.abs(theta).max() > 40.0:
            raise MLEDoesNotExistError("Newton iterates diverging; no finite MLE")
    se = np.sqrt(np.diag(np.linalg.inv(info)))
    return FitResult(
        method="exact",
        names=cm.names,
        theta=theta,
        std_errors=se,
        info=info,
        iterations=iteration + 1,
        converged=True,
    )


def dyad_independent_fit(
    model: ModelSpec | CompiledModel, x: Graph, attrs: NodeAttributes | None = None
) -> FitResult:
    """Closed-path logistic MLE, valid when every term is dyad-independent.

    Serves as the fast fitting path for such models and as an oracle for the
    Monte Carlo fitter.
    """
    cm = _as_compiled(model, x, attrs)
    if not cm.dyad_independent:
        raise InferenceError("model has dyad-dependent terms; use mcmle_fit")
    X = cm.dyadcov_flat().T.astype(np.float64)
    yv = x.states.astype(np.float64)

    beta = np.zeros(cm.q)
    H = np.eye(cm.q)
    for iteration in range(100):
        eta = X @ beta
        mu = 1.0 / (1.0 + np.exp(-eta))
        grad = X.T @ (yv - mu)
        w = mu * (1.0 - mu)
        H = X.T @ (X * w[:, None])
        if np.abs(grad).max() < 1e-10:
            break
        try:
            step = np.linalg.solve(H + 1e-12 * np.eye(cm.q), grad)
        except np.linalg.LinAlgError:
            raise InferenceError("singular information; collinear terms") from None
        loglik = float(yv @ eta - np.logaddexp(0.0, eta).sum())
        t = 1.0
        for _ in range(60):
            cand = beta + t * step
            ceta = X @ cand
            cll = float(yv @ ceta - np.logaddexp(0.0, ceta).sum())
            if cll > loglik:
                break
            t *= 0.5
        beta = beta + t * step
        if np.abs(beta).max() > 30.0:
            raise SeparationError("perfect separation: no finite MLE for the logistic fit")
    se = np.sqrt(np.diag(np.linalg.inv(H)))
    return FitResult(
        method="dyad-independent-oracle",
        names=cm.names,
        theta=beta,
        std_errors=se,
        info=H,
        iterations=iteration + 1,
        converged=True,
    )


# -- utility and denoising ---------------------------------------------------


def kl_utility(
    theta_x,
    theta_y,
    x: Graph,
    model: ModelSpec | CompiledModel,
    attrs: NodeAttributes | None = None,
    cfg: KLConfig = KLConfig(),
) -> KLEstimate:
    """KL divergence between the fits, (theta_x - theta_y).g(x) plus the
    log-normalizer ratio estimated by bridged importance sampling along the
    segment from theta_x to theta_y.  Negative estimates clamp to zero with
    the raw value retained.
    """
    cm = _as_compiled(model, x, attrs)
    tx = np.asarray(theta_x, dtype=np.float64)
    ty = np.asarray(theta_y, dtype=np.float64)
    if tx.shape != (cm.q,) or ty.shape != (cm.q,):
        raise ValueError(f"theta vectors must have length {cm.q}")
    g_x = compute_stats(cm, x)

    path = np.linspace(0.0, 1.0, cfg.segments + 1)[:, None] * (ty - tx)[None, :] + tx[None, :]
    chain = ChainConfig(
        burn_in=cfg.burn_in, interval=cfg.interval, draws=cfg.draws, proposal=cfg.proposal
    )
    segments = []
    for s in range(cfg.segments):
        cfg_s = replace(chain, seed=derive_seed(cfg.seed, "kl-segment", s))
        stats = sample_ergm(cm, path[s], init=x, cfg=cfg_s).stats
        segments.append(float(logmeanexp(stats @ (path[s + 1] - path[s]))))
    raw = float((tx - ty) @ g_x) + float(np.sum(segments))
    return KLEstimate(value=max(raw, 0.0), raw=raw, segments=tuple(segments))


def denoise(
    model: ModelSpec | CompiledModel,
    theta,
    y: Graph,
    gamma: MechanismParams,
    attrs: NodeAttributes | None = None,
    cfg: ChainConfig = ChainConfig(),
):
    """Posterior draws of the underlying graph given the release: sample
    x | y at the fitted parameters, keeping the retained graphs."""
    cfg = replace(cfg, store_graphs=True)
    return sample_conditional(model, theta, gamma, y, attrs=attrs, cfg=cfg)


def wald_table(fit: FitResult):
    """Per-parameter rows (name, estimate, se, z, p, stars) for reporting."""
    rows = []
    for k, name in enumerate(fit.names):
        se = fit.std_errors[k]
        z = fit.theta[k] / se if se > 0 else np.nan
        p = 2.0 * norm.sf(abs(z)) if np.isfinite(z) else np.nan
        rows.append(
            {
                "term": name,
                "estimate": float(fit.theta[k]),
                "std_error": float(se),
                "z": float(z),
                "p": float(p),
                "stars": significance_stars(p) if np.isfinite(p) else "",
            }
        )
    return rows
