"""Numerical certificates for the identities and inequalities the library
relies on.

Every check returns a CheckReport carrying its estimates, the theoretical
values or bounds, sample counts, standard errors, and a pass flag.  The
tolerance discipline is uniform: Monte Carlo equalities pass within 4
standard errors, one-sided Monte Carlo bounds within +3 standard errors,
and deterministic identities within 1e-12.  Checks draw all randomness from
the RngStream handed to them, so a report is reproducible bit-exactly from
(master seed, check name).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .geometry import RngStream, Subspace, gaussian_vector, random_subspace, stream_id_for
from .oracles import (
    CERT_GRID_POINTS,
    ConfidenceOracle,
    LinkFunction,
    SignOracle,
    local_linearity_constants,
)
from .objectives import (
    InnerFunction,
    RidgeObjective,
    initial_point,
    random_ridge_objective,
)

EQUALITY_SE_BAND = 4.0
BOUND_SE_BAND = 3.0
DETERMINISTIC_TOL = 1e-12

_MC_CHUNK = 200_000


@dataclass
class CheckReport:
    name: str
    passed: bool
    n_samples: int
    rule: str
    estimates: dict = field(default_factory=dict)
    theory: dict = field(default_factory=dict)
    standard_errors: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return asdict(self)


def _chunk_sizes(n: int, chunk: int = _MC_CHUNK):
    while n > 0:
        take = min(n, chunk)
        yield take
        n -= take


def check_projector_moments(subspace: Subspace, n: int, rng: RngStream) -> CheckReport:
    """E ||P s||^2, ||P s||^4, ||P s||^6 for Gaussian s against k, k(k+2),
    k(k+2)(k+4)."""
    if n < 2:
        raise ValueError("need at least 2 samples")
    k = subspace.dim
    sums = np.zeros(3)
    sq_sums = np.zeros(3)
    for take in _chunk_sizes(n):
        s = rng.gen.standard_normal((take, subspace.ambient_dim))
        # rows of the basis are orthonormal, so ||P s|| = ||U s||
        q = np.sum((s @ subspace.basis.T) ** 2, axis=1)
        for i, power in enumerate((1, 2, 3)):
            v = q**power
            sums[i] += v.sum()
            sq_sums[i] += (v * v).sum()
    means = sums / n
    variances = np.maximum(sq_sums / n - means**2, 0.0)
    ses = np.sqrt(variances / n)
    theory = np.array([k, k * (k + 2), k * (k + 2) * (k + 4)], dtype=np.float64)
    passed = bool(np.all(np.abs(means - theory) <= EQUALITY_SE_BAND * ses))
    names = ("second", "fourth", "sixth")
    return CheckReport(
        name="projector_moments",
        passed=passed,
        n_samples=n,
        rule=f"|estimate - theory| <= {EQUALITY_SE_BAND} SE for each moment",
        estimates={m: float(v) for m, v in zip(names, means)},
        theory={m: float(v) for m, v in zip(names, theory)},
        standard_errors={m: float(v) for m, v in zip(names, ses)},
    )


def check_cross_moment(
    subspace: Subspace, a: np.ndarray, n: int, rng: RngStream
) -> CheckReport:
    """E[(a' s)^2 ||P s||^2] against k ||a||^2 + 2 a' P a."""
    if n < 2:
        raise ValueError("need at least 2 samples")
    a = np.asarray(a, dtype=np.float64)
    k = subspace.dim
    theory = k * float(a @ a) + 2.0 * float(a @ subspace.project(a))
    total = 0.0
    total_sq = 0.0
    for take in _chunk_sizes(n):
        s = rng.gen.standard_normal((take, subspace.ambient_dim))
        v = (s @ a) ** 2 * np.sum((s @ subspace.basis.T) ** 2, axis=1)
        total += v.sum()
        total_sq += (v * v).sum()
    mean = float(total / n)
    se = math.sqrt(max(total_sq / n - mean**2, 0.0) / n)
    passed = bool(abs(mean - theory) <= EQUALITY_SE_BAND * se)
    return CheckReport(
        name="cross_moment",
        passed=passed,
        n_samples=n,
        rule=f"|estimate - theory| <= {EQUALITY_SE_BAND} SE",
        estimates={"cross_moment": float(mean)},
        theory={"cross_moment": theory},
        standard_errors={"cross_moment": se},
    )


def check_halfnormal(g: np.ndarray, n: int, rng: RngStream) -> CheckReport:
    """E |<g, s>| against sqrt(2/pi) ||g||."""
    if n < 2:
        raise ValueError("need at least 2 samples")
    g = np.asarray(g, dtype=np.float64)
    theory = math.sqrt(2.0 / math.pi) * float(np.linalg.norm(g))
    total = 0.0
    total_sq = 0.0
    for take in _chunk_sizes(n):
        v = np.abs(rng.gen.standard_normal((take, g.shape[0])) @ g)
        total += v.sum()
        total_sq += (v * v).sum()
    mean = float(total / n)
    se = math.sqrt(max(total_sq / n - mean**2, 0.0) / n)
    passed = bool(abs(mean - theory) <= EQUALITY_SE_BAND * se)
    return CheckReport(
        name="halfnormal",
        passed=passed,
        n_samples=n,
        rule=f"|estimate - theory| <= {EQUALITY_SE_BAND} SE",
        estimates={"abs_mean": float(mean)},
        theory={"abs_mean": theory},
        standard_errors={"abs_mean": se},
    )


def check_descent_ncrs(
    objective: RidgeObjective,
    advantage: float,
    theta: np.ndarray,
    alpha: float,
    n: int,
    rng: RngStream,
    se_band: float = BOUND_SE_BAND,
) -> CheckReport:
    """One-step descent inequality for the sign-comparison search.

    Simulates n independent single iterations from theta through a real
    SignOracle and checks

        p alpha sqrt(2/pi) ||grad f(theta)||
            <= E[f(theta) - f(theta')] + (L_f/2) k alpha^2 (+ 2 tau alpha sqrt(m))

    where the nuisance term enters exactly when the objective carries one.
    """
    if n < 2:
        raise ValueError("need at least 2 samples")
    theta = np.asarray(theta, dtype=np.float64)
    oracle = SignOracle(objective, advantage, rng)
    d = objective.ambient_dim
    f_theta = float(objective.value(theta))
    drops = np.zeros(n)
    for i in range(n):
        direction = gaussian_vector(rng, d)
        candidate = theta + alpha * direction
        if oracle.compare(theta, candidate) > 0:
            drops[i] = f_theta - float(objective.value(candidate))
    mean_drop = float(drops.mean())
    se = float(drops.std(ddof=1)) / math.sqrt(n)
    grad_norm = float(np.linalg.norm(objective.gradient(theta)))
    lhs = advantage * alpha * math.sqrt(2.0 / math.pi) * grad_norm
    curvature = 0.5 * objective.smoothness * objective.intrinsic_dim * alpha**2
    nuisance_term = 0.0
    if objective.nuisance is not None:
        nuisance_term = (
            2.0 * objective.nuisance.tau * alpha * math.sqrt(objective.nuisance.dim)
        )
    rhs = mean_drop + curvature + nuisance_term
    passed = lhs <= rhs + se_band * se
    return CheckReport(
        name="descent_ncrs",
        passed=passed,
        n_samples=n,
        rule=f"lhs <= mean drop + curvature (+ nuisance) + {se_band} SE",
        estimates={"mean_drop": mean_drop, "rhs": rhs},
        theory={
            "lhs": lhs,
            "curvature_term": curvature,
            "nuisance_term": nuisance_term,
            "grad_norm": grad_norm,
        },
        standard_errors={"mean_drop": se},
    )


def _point_at_gap(objective: RidgeObjective, gap: float) -> tuple[np.ndarray, np.ndarray]:
    """(worse, better) along the first active direction with f(worse) - f(better)
    equal to `gap`, by bisection on a monotone section of the ray."""
    if gap <= 0:
        raise ValueError("gap must be positive")
    u1 = objective.active.basis[0]
    inner = objective.inner
    # start of a section where f(c * u1) increases in c
    c_lo = 0.0
    if inner.kind == "quadratic_cosine":
        c_lo = inner.amplitude * inner.frequency

    def ray_value(c: float) -> float:
        return float(objective.value(c * u1))

    base = ray_value(c_lo)
    target = base + gap
    c_hi = max(2.0 * c_lo, 1.0)
    for _ in range(200):
        if ray_value(c_hi) >= target:
            break
        c_hi *= 2.0
    else:
        raise ValueError(f"gap {gap} is not reachable along the probe ray")
    lo, hi = c_lo, c_hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if ray_value(mid) < target:
            lo = mid
        else:
            hi = mid
    worse = 0.5 * (lo + hi) * u1
    better = c_lo * u1
    return worse, better


def check_vote_error(
    oracle: ConfidenceOracle, gap: float, votes: int, trials: int
) -> CheckReport:
    """Wrong-decision frequency of a majority vote against its certified bound.

    Builds a pair with value gap `gap` from the oracle's own objective, runs
    `trials` independent votes of length `votes`, and checks that the
    frequency of deciding against the better point is at most
    exp(-votes * rho_eff(gap) / (2C + 4/3)) within +3 binomial SE.
    """
    if votes < 1:
        raise ValueError("votes must be at least 1")
    if trials < 1:
        raise ValueError("trials must be at least 1")
    worse, better = _point_at_gap(oracle.objective, gap)
    realized = float(oracle.objective.value(worse)) - float(
        oracle.objective.value(better)
    )
    wrong = 0
    for _ in range(trials):
        total = float(np.sum(oracle.compare_batch(worse, better, votes)))
        if total <= 0.0:
            wrong += 1
    freq = wrong / trials
    bernstein = 2.0 * oracle.second_moment_bound + 4.0 / 3.0
    bound = math.exp(-votes * float(oracle.rho_effective(realized)) / bernstein)
    se = math.sqrt(bound * (1.0 - bound) / trials)
    passed = freq <= bound + BOUND_SE_BAND * se
    return CheckReport(
        name="vote_error",
        passed=passed,
        n_samples=trials,
        rule=f"frequency <= bound + {BOUND_SE_BAND} SE (binomial SE at the bound)",
        estimates={"wrong_decision_freq": freq},
        theory={"bound": bound, "gap": realized, "votes": float(votes)},
        standard_errors={"wrong_decision_freq": se},
    )


def check_vote_penalty(
    oracle: ConfidenceOracle,
    theta: np.ndarray,
    alpha: float,
    votes: int,
    trials: int,
    rng: RngStream,
) -> CheckReport:
    """Ranking-error penalty of the vote step (slow, indirect check).

    Estimates |E[gap * (1{vote accepts} - 1{true improvement})]| over fresh
    directions and compares it against

        gamma * (alpha sqrt(2/pi) ||grad f|| + (L_f/2) k alpha^2)
            + (2C + 4/3) / (e c votes),

    gamma = exp(-votes * rho_eff(r) / (2C + 4/3)) with (c, r) the oracle's
    certified linearity constants.
    """
    if trials < 2:
        raise ValueError("need at least 2 trials")
    theta = np.asarray(theta, dtype=np.float64)
    objective = oracle.objective
    d = objective.ambient_dim
    f_theta = float(objective.value(theta))
    terms = np.zeros(trials)
    for i in range(trials):
        direction = gaussian_vector(rng, d)
        candidate = theta + alpha * direction
        gap = float(objective.value(candidate)) - f_theta
        vote_accept = float(np.sum(oracle.compare_batch(theta, candidate, votes))) > 0.0
        true_improve = gap < 0.0
        terms[i] = gap * (float(vote_accept) - float(true_improve))
    mean = float(terms.mean())
    se = float(terms.std(ddof=1)) / math.sqrt(trials)
    c, r = oracle.linearity_constants
    bernstein = 2.0 * oracle.second_moment_bound + 4.0 / 3.0
    gamma = math.exp(-votes * float(oracle.rho_effective(r)) / bernstein)
    grad_norm = float(np.linalg.norm(objective.gradient(theta)))
    bound = gamma * (
        alpha * math.sqrt(2.0 / math.pi) * grad_norm
        + 0.5 * objective.smoothness * objective.intrinsic_dim * alpha**2
    ) + bernstein / (math.e * c * votes)
    passed = abs(mean) <= bound + BOUND_SE_BAND * se
    return CheckReport(
        name="vote_penalty",
        passed=passed,
        n_samples=trials,
        rule=f"|estimate| <= bound + {BOUND_SE_BAND} SE",
        estimates={"penalty": mean},
        theory={"bound": bound, "gamma": gamma, "grad_norm": grad_norm},
        standard_errors={"penalty": se},
    )


def check_link_reduction(link: LinkFunction, grid: np.ndarray | None = None) -> CheckReport:
    """Deterministic link identities: margin reduction, reflection symmetry,
    monotone margin, and the certified local-linearity inequality."""
    if grid is None:
        grid = np.linspace(-8.0 * link.scale, 8.0 * link.scale, 321)
    grid = np.asarray(grid, dtype=np.float64)
    sigma = np.asarray(link.probability(grid))
    margin = np.asarray(link.rho(np.abs(grid)))
    # signed margin identity: 2 sigma(u) - 1 = sign(u) rho(|u|)
    reduction_dev = float(np.max(np.abs((2.0 * sigma - 1.0) - np.sign(grid) * margin)))
    reflection_dev = float(
        np.max(np.abs(np.asarray(link.probability(-grid)) - (1.0 - sigma)))
    )
    t = np.sort(np.abs(grid))
    mono_violation = float(np.min(np.diff(np.asarray(link.rho(t))), initial=0.0))
    c, r = local_linearity_constants(link)
    tr = np.linspace(0.0, r, CERT_GRID_POINTS + 1)[1:]
    linearity_slack = float(np.min(np.asarray(link.rho(tr)) - 0.5 * c * tr))
    passed = (
        reduction_dev <= DETERMINISTIC_TOL
        and reflection_dev <= DETERMINISTIC_TOL
        and mono_violation >= -1e-15
        and linearity_slack >= -1e-15
    )
    return CheckReport(
        name="link_reduction",
        passed=passed,
        n_samples=grid.size,
        rule=f"deterministic identities within {DETERMINISTIC_TOL}",
        estimates={
            "reduction_deviation": reduction_dev,
            "reflection_deviation": reflection_dev,
            "monotonicity_violation": mono_violation,
            "linearity_slack": linearity_slack,
        },
        theory={"c": c, "r": r},
        standard_errors={},
    )


def check_grad_fd(
    objective: RidgeObjective,
    n_points: int,
    fd_step: float,
    rng: RngStream,
    tol: float = 1e-4,
) -> CheckReport:
    """Analytic gradient against central finite differences at random points."""
    if n_points < 1:
        raise ValueError("need at least 1 point")
    d = objective.ambient_dim
    eye = np.eye(d)
    worst = 0.0
    for _ in range(n_points):
        x = 2.0 * gaussian_vector(rng, d)
        plus = np.asarray(objective.value(x + fd_step * eye))
        minus = np.asarray(objective.value(x - fd_step * eye))
        fd = (plus - minus) / (2.0 * fd_step)
        grad = objective.gradient(x)
        rel = float(np.linalg.norm(fd - grad)) / max(1.0, float(np.linalg.norm(grad)))
        worst = max(worst, rel)
    passed = worst <= tol
    return CheckReport(
        name="grad_fd",
        passed=passed,
        n_samples=n_points,
        rule=f"max relative error <= {tol}",
        estimates={"max_rel_error": worst},
        theory={"tolerance": tol, "fd_step": fd_step},
        standard_errors={},
    )


def run_default_suite(master_seed: int, scale: float = 1.0) -> list[CheckReport]:
    """The standard certificate battery; sample sizes multiply by `scale`.

    Reduced scale shrinks Monte Carlo sample counts, so stochastic checks may
    fail there purely from noise; the deterministic ones are scale-free.
    """
    if scale <= 0:
        raise ValueError("scale must be positive")

    def sized(base: int) -> int:
        return max(1000, int(round(base * scale)))

    def stream(name: str) -> RngStream:
        return RngStream(master_seed, stream_id_for(0, f"check:{name}"))

    reports: list[CheckReport] = []

    rng = stream("projector_moments")
    space = random_subspace(stream("subspace"), 50, 7)
    reports.append(check_projector_moments(space, sized(1_000_000), rng))

    rng = stream("cross_moment")
    a_in = space.basis[0] * 2.0
    a_out = gaussian_vector(stream("cross-dir"), 50)
    a_out = a_out - space.project(a_out)
    for tag, a in (("in_range", a_in), ("general", a_in + a_out)):
        rep = check_cross_moment(space, a, sized(1_000_000), rng)
        rep.name = f"cross_moment_{tag}"
        reports.append(rep)

    rng = stream("halfnormal")
    g = gaussian_vector(stream("halfnormal-dir"), 40) * 1.7
    reports.append(check_halfnormal(g, sized(1_000_000), rng))

    for kind in ("logistic", "probit", "arctan"):
        rep = check_link_reduction(LinkFunction(kind=kind, scale=1.0))
        rep.name = f"link_reduction_{kind}"
        reports.append(rep)
    rep = check_link_reduction(LinkFunction(kind="logistic", scale=0.25))
    rep.name = "link_reduction_logistic_sharp"
    reports.append(rep)

    for kind in ("pure_quadratic", "quadratic_cosine", "bounded_well"):
        obj = random_ridge_objective(
            stream(f"fd-{kind}"), 20, 6, InnerFunction(kind=kind)
        )
        rep = check_grad_fd(obj, 25, 1e-5, stream(f"fd-points-{kind}"))
        rep.name = f"grad_fd_{kind}"
        reports.append(rep)
    obj = random_ridge_objective(
        stream("fd-nuisance"),
        20,
        6,
        InnerFunction(kind="quadratic_cosine"),
        tau=0.3,
        nuisance_dim=4,
    )
    rep = check_grad_fd(obj, 25, 1e-5, stream("fd-points-nuisance"))
    rep.name = "grad_fd_nuisance"
    reports.append(rep)

    for p in (0.1, 0.5):
        obj = random_ridge_objective(
            stream(f"descent-{p}"), 30, 5, InnerFunction(kind="quadratic_cosine")
        )
        theta = initial_point(obj, stream(f"descent-init-{p}"))
        rep = check_descent_ncrs(obj, p, theta, 0.05, sized(100_000), stream(f"descent-rng-{p}"))
        rep.name = f"descent_ncrs_p{p}"
        reports.append(rep)
    obj = random_ridge_objective(
        stream("descent-nuisance"),
        30,
        5,
        InnerFunction(kind="quadratic_cosine"),
        tau=0.3,
        nuisance_dim=4,
    )
    theta = initial_point(obj, stream("descent-nuisance-init"))
    rep = check_descent_ncrs(
        obj, 0.5, theta, 0.05, sized(100_000), stream("descent-nuisance-rng")
    )
    rep.name = "descent_ncrs_nearly_ridge"
    reports.append(rep)

    link = LinkFunction(kind="logistic", scale=1.0)
    for kind, votes in (
        ("deterministic_link", 5),
        ("engage_abstain", 25),
        ("noisy_engage", 25),
    ):
        obj = random_ridge_objective(
            stream(f"vote-{kind}"), 12, 4, InnerFunction(kind="pure_quadratic")
        )
        oracle = ConfidenceOracle(obj, kind, link, stream(f"vote-rng-{kind}"))
        rep = check_vote_error(oracle, 0.4, votes, sized(100_000))
        rep.name = f"vote_error_{kind}"
        reports.append(rep)

    obj = random_ridge_objective(
        stream("penalty"), 12, 4, InnerFunction(kind="pure_quadratic")
    )
    oracle = ConfidenceOracle(obj, "engage_abstain", link, stream("penalty-oracle"))
    theta = initial_point(obj, stream("penalty-init"))
    rep = check_vote_penalty(
        oracle, theta, 0.05, 16, sized(20_000), stream("penalty-rng")
    )
    reports.append(rep)

    return reports
