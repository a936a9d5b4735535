"""Scorer-level analysis: GMM clustering of embeddings, 2-D projection,
cluster profiles, correlation/p-value matrices and same-scorer case studies.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import betainc, logsumexp

from .core import Dataset, ResponseFeatures, scorer_summary, seeded_rng
from .head import ContentHead, ScorerSpecificHead

VAR_FLOOR = 1e-6
_LOG_2PI = np.log(2.0 * np.pi)


class CollapsedComponentError(RuntimeError):
    pass


@dataclass
class GmmModel:
    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    log_likelihood: list[float] = field(default_factory=list)
    n_iter: int = 0
    converged: bool = False
    # optional linear map applied to raw inputs: (x - center) @ basis
    center: np.ndarray | None = None
    basis: np.ndarray | None = None

    @property
    def k(self) -> int:
        return len(self.weights)

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if self.basis is None:
            return X
        return (X - self.center) @ self.basis

    def _log_joint(self, X: np.ndarray) -> np.ndarray:
        # log w_k + log N(x | mu_k, diag var_k), shape (N, K)
        X = self.transform(X)
        diff2 = (X[:, None, :] - self.means[None]) ** 2 / self.variances[None]
        log_det = np.log(self.variances).sum(axis=1)
        d = X.shape[1]
        return np.log(self.weights) - 0.5 * (diff2.sum(axis=2) + log_det + d * _LOG_2PI)

    def responsibilities(self, X) -> np.ndarray:
        lj = self._log_joint(X)
        return np.exp(lj - logsumexp(lj, axis=1, keepdims=True))

    def predict(self, X) -> np.ndarray:
        return self._log_joint(X).argmax(axis=1)

    def score(self, X) -> float:
        """Total log-likelihood of ``X``."""
        return float(logsumexp(self._log_joint(X), axis=1).sum())


def kmeans_pp_centers(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(X)
    centers = [X[rng.integers(n)]]
    d2 = ((X - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = rng.integers(n)
        else:
            idx = rng.choice(n, p=d2 / total)
        centers.append(X[idx])
        d2 = np.minimum(d2, ((X - X[idx]) ** 2).sum(axis=1))
    return np.array(centers)


def _em(X, means, rng, max_iter, tol):
    n, d = X.shape
    k = len(means)
    base_var = np.maximum(X.var(axis=0), VAR_FLOOR)
    model = GmmModel(np.full(k, 1.0 / k), means.copy(), np.tile(base_var, (k, 1)))
    prev = -np.inf
    for it in range(1, max_iter + 1):
        lj = model._log_joint(X)
        norm = logsumexp(lj, axis=1, keepdims=True)
        ll = float(norm.sum())
        model.log_likelihood.append(ll)
        model.n_iter = it
        if ll - prev < tol:
            model.converged = True
            break
        prev = ll
        resp = np.exp(lj - norm)
        nk = resp.sum(axis=0)
        weights = nk / n
        bad = np.flatnonzero(weights < 1e-8)
        if len(bad):
            return model, bad
        means = (resp.T @ X) / nk[:, None]
        var = (resp.T @ (X * X)) / nk[:, None] - means**2
        model.weights = weights
        model.means = means
        model.variances = np.maximum(var, VAR_FLOOR)
    return model, np.array([], dtype=np.intp)


def _fit_once(X, k, rng, max_iter, tol) -> GmmModel:
    means = kmeans_pp_centers(X, k, rng)
    model, bad = _em(X, means, rng, max_iter, tol)
    if len(bad):
        means = model.means.copy()
        means[bad] = X[rng.choice(len(X), size=len(bad), replace=False)]
        model, bad = _em(X, means, rng, max_iter, tol)
        if len(bad):
            raise CollapsedComponentError(f"mixture component(s) {bad.tolist()} collapsed twice")
    return model


def fit_gmm(X, k: int = 6, seed: int = 0, max_iter: int = 200, tol: float = 1e-7,
            n_init: int = 1) -> GmmModel:
    """Diagonal-covariance Gaussian mixture fitted by EM.

    Means start from k-means++ seeding. ``log_likelihood`` holds the data
    log-likelihood at the start of every iteration; the loop stops once an
    iteration improves it by less than ``tol``. A component whose weight
    collapses is re-seeded once (restarting EM); a second collapse raises.
    With ``n_init > 1`` the run with the highest final log-likelihood wins.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("embeddings must be a 2-D array")
    if len(X) < k:
        raise ValueError(f"need at least k={k} rows, got {len(X)}")
    if n_init < 1:
        raise ValueError("n_init must be positive")
    rng = seeded_rng(seed, "gmm")
    best = None
    for _ in range(n_init):
        model = _fit_once(X, k, rng, max_iter, tol)
        if best is None or model.log_likelihood[-1] > best.log_likelihood[-1]:
            best = model
    return best


def principal_axes(X, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Column mean and the top ``m`` principal directions of ``X`` as a (D, m) matrix.

    Each direction's sign is fixed so its first non-negligible loading is
    positive. Directions with (numerically) zero variance are left as zero columns.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or len(X) < 2:
        raise ValueError("need at least two rows")
    mean = X.mean(axis=0)
    Xc = X - mean
    evals, evecs = np.linalg.eigh(Xc.T @ Xc / len(X))
    order = np.argsort(evals)[::-1]
    V = np.zeros((X.shape[1], m))
    top = max(float(evals.max(initial=0.0)), 0.0)
    for col, idx in enumerate(order[:m]):
        if top == 0.0 or evals[idx] <= 1e-12 * top:
            continue
        v = evecs[:, idx]
        nz = np.flatnonzero(np.abs(v) > 1e-12)
        if len(nz) and v[nz[0]] < 0:
            v = -v
        V[:, col] = v
    return mean, V


def pca_2d(X) -> np.ndarray:
    """Project centered rows onto the top two principal directions."""
    mean, V = principal_axes(X, 2)
    return (np.asarray(X, dtype=np.float64) - mean) @ V


def cluster_embeddings(E, k: int = 6, seed: int = 0, dims: int | None = None,
                       n_init: int = 20, max_iter: int = 200, tol: float = 1e-7) -> GmmModel:
    """Fit a GMM to scorer embeddings, optionally in their top ``dims`` principal directions.

    ``dims=None`` or ``dims >= E.shape[1]`` clusters in the full space. The
    returned model carries the projection, so ``predict`` takes raw embeddings.
    """
    E = np.asarray(E, dtype=np.float64)
    if dims is not None and dims < 1:
        raise ValueError("dims must be positive")
    if dims is None or dims >= E.shape[1]:
        return fit_gmm(E, k, seed=seed, max_iter=max_iter, tol=tol, n_init=n_init)
    center, basis = principal_axes(E, dims)
    gmm = fit_gmm((E - center) @ basis, k, seed=seed, max_iter=max_iter, tol=tol, n_init=n_init)
    gmm.center, gmm.basis = center, basis
    return gmm


def default_cluster_dims(head: ScorerSpecificHead) -> int:
    """C - 1: the number of embedding directions that can move centered biases."""
    return head.num_categories - 1


# ---------------------------------------------------------------------------
# Cluster profiles

@dataclass
class ClusterProfile:
    cluster: int
    members: list[int]
    avg_bias: np.ndarray | None
    avg_temperature: float | None
    score_mean: float | None
    score_std: float | None
    avg_normalized_dist: np.ndarray | None
    features: ResponseFeatures | None

    @property
    def n(self) -> int:
        return len(self.members)


def centered(b: np.ndarray) -> np.ndarray:
    b = np.asarray(b, dtype=np.float64)
    return b - b.mean(axis=-1, keepdims=True)


def cluster_profiles(gmm: GmmModel, head: ScorerSpecificHead, ds: Dataset) -> list[ClusterProfile]:
    """One profile per mixture component, members assigned by max responsibility.

    Bias vectors are centered before averaging since the softmax only
    identifies them up to a constant shift.
    """
    if head.num_scorers != ds.num_scorers:
        raise ValueError("head and dataset cover different scorer sets")
    labels = gmm.predict(head.params["E"])
    biases = centered(head.biases())
    alphas = head.alphas()
    stats = [scorer_summary(ds, j) for j in range(ds.num_scorers)]
    out = []
    for c in range(gmm.k):
        members = np.flatnonzero(labels == c).tolist()
        if not members:
            out.append(ClusterProfile(c, [], None, None, None, None, None, None))
            continue
        mask = np.isin(ds.scorer_indices, members)
        scores = ds.scale.values[ds.categories[mask]]
        feats = ds.feature_matrix[mask].mean(axis=0)
        out.append(ClusterProfile(
            cluster=c,
            members=members,
            avg_bias=biases[members].mean(axis=0),
            avg_temperature=float(alphas[members].mean()),
            score_mean=float(scores.mean()),
            score_std=float(scores.std()),
            avg_normalized_dist=np.mean([stats[j].normalized_dist for j in members], axis=0),
            features=ResponseFeatures(*(float(v) for v in feats)),
        ))
    return out


# ---------------------------------------------------------------------------
# Correlations

@dataclass
class CorrelationReport:
    names: list[str]
    r: np.ndarray
    p: np.ndarray
    n: np.ndarray

    def rows(self):
        """Long format: (var_a, var_b, r, p, n) for every ordered pair."""
        for a, na in enumerate(self.names):
            for b, nb in enumerate(self.names):
                yield na, nb, float(self.r[a, b]), float(self.p[a, b]), int(self.n[a, b])


def t_two_sided_p(t: float, df: int) -> float:
    """Two-sided Student-t tail probability via the regularized incomplete beta."""
    if not np.isfinite(t):
        return 0.0
    return float(betainc(0.5 * df, 0.5, df / (df + t * t)))


def pearson(x, y) -> tuple[float, float]:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = len(x)
    if n != len(y):
        raise ValueError("columns differ in length")
    if n < 3:
        raise ValueError("need at least 3 observations")
    xc, yc = x - x.mean(), y - y.mean()
    sxx, syy = float(xc @ xc), float(yc @ yc)
    if sxx == 0.0 or syy == 0.0:
        return 0.0, 1.0
    r = float(xc @ yc) / np.sqrt(sxx * syy)
    r = max(-1.0, min(1.0, r))
    df = n - 2
    if abs(r) == 1.0:
        return r, 0.0
    t = r * np.sqrt(df / (1.0 - r * r))
    return r, t_two_sided_p(t, df)


def correlation_matrix(variables: dict[str, np.ndarray]) -> CorrelationReport:
    names = list(variables)
    cols = [np.asarray(variables[k], dtype=np.float64) for k in names]
    lengths = {len(c) for c in cols}
    if len(lengths) != 1:
        raise ValueError("columns differ in length")
    n = lengths.pop()
    if n < 3:
        raise ValueError("need at least 3 scorers")
    m = len(names)
    r = np.eye(m)
    p = np.zeros((m, m))
    for a in range(m):
        for b in range(a + 1, m):
            r[a, b], p[a, b] = pearson(cols[a], cols[b])
            r[b, a], p[b, a] = r[a, b], p[a, b]
    for a in range(m):
        if np.ptp(cols[a]) == 0:
            r[a, a], p[a, a] = 1.0, 1.0
    return CorrelationReport(names, r, p, np.full((m, m), n, dtype=np.intp))


def scorer_variables(head, ds: Dataset) -> dict[str, np.ndarray]:
    """Per-scorer columns for the correlation analysis.

    Bias and temperature come from the head: directly for a scorer-specific
    head, averaged over each scorer's own responses for a content head.
    """
    C = ds.scale.num_categories
    J = ds.num_scorers
    if isinstance(head, ScorerSpecificHead):
        bias = centered(head.biases())
        alpha = head.alphas()
    elif isinstance(head, ContentHead):
        R, jj = ds.representations, ds.scorer_indices
        pb = centered(head.bias(R, jj))
        pa = head.alpha(R, jj)
        counts = np.bincount(jj, minlength=J)
        bias = np.zeros((J, C))
        np.add.at(bias, jj, pb)
        bias /= counts[:, None]
        alpha = np.bincount(jj, weights=pa, minlength=J) / counts
    else:
        raise TypeError("correlation analysis needs a scorer-specific or content head")
    stats = [scorer_summary(ds, j) for j in range(J)]
    out = {f"bias_{ds.scale.to_score(c)}": bias[:, c] for c in range(C)}
    out["alpha"] = alpha
    out["score_mean"] = np.array([s.mean_score for s in stats])
    out["score_std"] = np.array([s.std_score for s in stats])
    out["math_token_pct"] = np.array([s.feature_means.math_token_pct for s in stats])
    out["image_pct"] = np.array([s.feature_means.image_pct for s in stats])
    out["token_length"] = np.array([s.feature_means.token_length for s in stats])
    return out


# ---------------------------------------------------------------------------
# Case study

@dataclass
class CaseStudyRow:
    pair_id: str
    true_score: int
    content_prediction: int
    scorer_prediction: int
    no_bias_prediction: int
    content_bias: np.ndarray


@dataclass
class CaseStudy:
    scorer_id: str
    overall_bias: np.ndarray
    rows: list[CaseStudyRow]


def case_study(content_head: ContentHead, scorer_head: ScorerSpecificHead, ds: Dataset,
               scorer_id: str, pair_ids) -> CaseStudy:
    """Compare content-driven, scorer-specific and no-bias predictions for one scorer.

    The no-bias prediction is the content head with its bias zeroed and its
    temperature fixed at 1, i.e. ``argmax W r``.
    """
    if scorer_id not in ds.scorer_index:
        raise KeyError(f"unknown scorer {scorer_id!r}")
    j = ds.scorer_index[scorer_id]
    mine = [i for i, p in enumerate(ds.points) if p.scorer_id == scorer_id]
    by_pair = {ds.points[i].pair_id: i for i in mine}
    R = ds.representations
    overall = content_head.bias(R[mine], j).mean(axis=0)
    rows = []
    for pid in pair_ids:
        if pid not in by_pair:
            raise KeyError(f"pair {pid!r} was not scored by {scorer_id!r}")
        i = by_pair[pid]
        r = R[i:i + 1]
        rows.append(CaseStudyRow(
            pair_id=pid,
            true_score=ds.points[i].score,
            content_prediction=ds.scale.to_score(content_head.predict(r, j)[0]),
            scorer_prediction=ds.scale.to_score(scorer_head.predict(r, j)[0]),
            no_bias_prediction=ds.scale.to_score(int(content_head.base_logits(r)[0].argmax())),
            content_bias=content_head.bias(r, j)[0],
        ))
    return CaseStudy(scorer_id, overall, rows)
