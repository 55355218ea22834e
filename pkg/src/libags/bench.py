"""Desk-scale benchmark harness on the gapped two-moons task.

One seed, one shared world: the data, the random-feature encoder, the
scoring model, and the test set are generated once per seed and reused
by every method. The adaptive selector runs first so its learned count
can be handed to each fixed-count baseline, which keeps the comparison
about *which* candidates were chosen rather than how many.

Scoring happens on encoded features while the selector's geometry runs
in the raw 2-D input space (probabilities injected via the pipeline's
external-probability path), where nearest-neighbor density is well posed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import FeatureMatrix, make_two_moons
from .errors import ValidationError
from .model import LogisticModel, RffEncoder, fit_logistic, fit_logistic_soft, one_hot, predict_proba, rff_encode
from .pipeline import PipelineConfig, run_selection
from .score import entropy_rows

METHODS = ("erm", "random", "noise", "uncertainty_only", "libags")

# Fixed offsets so each random role gets its own documented stream.
_ENCODER_SEED_OFFSET = 1_000_003
_BASELINE_SEED_OFFSET = 2_000_003

DEFAULT_N_PER_CLASS = 200
DEFAULT_NOISE_SD = 0.3
DEFAULT_GAP_HALFWIDTH = 0.55


@dataclass
class BenchResult:
    method: str
    accuracies: list
    aurocs: list
    m_hats: list

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def std_accuracy(self) -> float:
        return float(np.std(self.accuracies, ddof=1)) if len(self.accuracies) > 1 else 0.0

    @property
    def mean_auroc(self) -> float:
        return float(np.mean(self.aurocs))

    @property
    def std_auroc(self) -> float:
        return float(np.std(self.aurocs, ddof=1)) if len(self.aurocs) > 1 else 0.0


def auroc(scores, labels) -> float:
    """Probability a random positive outscores a random negative, ties at 1/2.

    Rank-based: average ranks of tied scores make the rank-sum formula
    agree exactly with pairwise counting.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValidationError("scores and labels must be vectors of equal length")
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0 or n_pos + n_neg != labels.size:
        raise ValidationError("labels must be binary with both classes present")
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(scores.size)
    sorted_scores = scores[order]
    i = 0
    while i < scores.size:
        j = i
        while j + 1 < scores.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    rank_sum = float(ranks[labels == 1].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def _evaluate(model: LogisticModel, test_encoded: FeatureMatrix, test_labels) -> tuple:
    proba = predict_proba(model, test_encoded)
    accuracy = float((proba.argmax(axis=1) == test_labels).mean())
    return accuracy, auroc(proba[:, 1], test_labels)


def _fit_with_extra(z_train, train_labels, extra_features, extra_targets, config):
    targets = one_hot(train_labels, 2)
    features = z_train.values
    if len(extra_features):
        features = np.vstack([features, extra_features])
        targets = np.vstack([targets, extra_targets])
    return fit_logistic_soft(FeatureMatrix(features), targets, config.l2, config.epochs, config.lr, config.seed)


def run_bench(methods, seeds, config: PipelineConfig, n_per_class: int = DEFAULT_N_PER_CLASS,
              noise_sd: float = DEFAULT_NOISE_SD, gap_halfwidth: float = DEFAULT_GAP_HALFWIDTH):
    """Run the requested methods over the seeds; returns one BenchResult each."""
    methods = list(methods)
    for name in methods:
        if name not in METHODS:
            raise ValidationError(f"unknown method '{name}'; choose from {METHODS}")
    results = {name: BenchResult(name, [], [], []) for name in methods}

    for seed in seeds:
        train, test, pool = make_two_moons(n_per_class, noise_sd, gap_halfwidth, seed)
        encoder = RffEncoder.create(2, config.rff_dim, config.rff_bandwidth, seed + _ENCODER_SEED_OFFSET)
        z_train = rff_encode(encoder, train.features)
        z_test = rff_encode(encoder, test.features)
        z_pool = rff_encode(encoder, pool.features)

        scoring = fit_logistic(z_train, train.labels, 2, config.l2, config.epochs, config.lr, config.seed)
        proba_train = predict_proba(scoring, z_train)
        proba_pool = predict_proba(scoring, z_pool)

        # Geometry in raw input space, scoring signal from the encoded model.
        report = run_selection(train, pool, config.replace(seed=seed), external_proba=(proba_train, proba_pool))
        m_hat = report.m_hat

        for name in methods:
            # Per-(seed, method) stream so a method's draws do not depend
            # on which other methods were requested.
            rng = np.random.default_rng(seed + _BASELINE_SEED_OFFSET + METHODS.index(name))
            if name == "erm":
                model = _fit_with_extra(z_train, train.labels, [], [], config)
            elif name == "libags":
                extra = z_pool.values[report.selected]
                soft = np.asarray(report.soft_labels, dtype=np.float64).reshape(m_hat, 2)
                model = _fit_with_extra(z_train, train.labels, extra, soft, config)
            elif name == "random":
                chosen = rng.choice(pool.n_rows, size=m_hat, replace=False) if m_hat else np.empty(0, dtype=int)
                model = _fit_with_extra(z_train, train.labels, z_pool.values[chosen], one_hot(pool.proposed_labels[chosen], 2), config)
            elif name == "noise":
                rows = rng.integers(0, train.n_rows, size=m_hat)
                scale = float(train.features.values.std(axis=0).mean())
                jitter = rng.normal(0.0, 0.1 * scale, size=(m_hat, 2))
                noisy = FeatureMatrix(train.features.values[rows] + jitter) if m_hat else None
                extra = rff_encode(encoder, noisy).values if m_hat else []
                model = _fit_with_extra(z_train, train.labels, extra, one_hot(train.labels[rows], 2), config)
            else:  # uncertainty_only
                top = np.argsort(-entropy_rows(proba_pool), kind="stable")[:m_hat]
                model = _fit_with_extra(z_train, train.labels, z_pool.values[top], one_hot(pool.proposed_labels[top], 2), config)
            accuracy, roc = _evaluate(model, z_test, test.labels)
            results[name].accuracies.append(accuracy)
            results[name].aurocs.append(roc)
            results[name].m_hats.append(m_hat if name != "erm" else 0)

    return [results[name] for name in methods]


def export_boundary_grid(model: LogisticModel, encoder, bounds, resolution: int, path) -> None:
    """Write (x1, x2, p_class1) over a uniform grid for external plotting.

    ``encoder`` may be None when the model consumes raw 2-D inputs.
    ``bounds`` is (x_min, x_max, y_min, y_max).
    """
    if resolution < 2:
        raise ValidationError(f"resolution must be at least 2, got {resolution}")
    x_min, x_max, y_min, y_max = bounds
    xs = np.linspace(x_min, x_max, resolution)
    ys = np.linspace(y_min, y_max, resolution)
    gx, gy = np.meshgrid(xs, ys)
    points = FeatureMatrix(np.column_stack([gx.ravel(), gy.ravel()]))
    encoded = rff_encode(encoder, points) if encoder is not None else points
    proba = predict_proba(model, encoded)
    with open(path, "w", newline="") as fh:
        fh.write("x1,x2,p_class1\n")
        for (x1, x2), p in zip(points.values, proba[:, 1]):
            fh.write(f"{x1:.17g},{x2:.17g},{p:.17g}\n")


def write_bench_csv(path, results) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("method,seed_index,accuracy,auroc,m_hat\n")
        for result in results:
            for i, (acc, roc, m) in enumerate(zip(result.accuracies, result.aurocs, result.m_hats)):
                fh.write(f"{result.method},{i},{acc:.17g},{roc:.17g},{m}\n")


def format_bench_summary(results) -> str:
    lines = ["method              accuracy            auroc               mean_m_hat"]
    for result in results:
        mean_m = float(np.mean(result.m_hats)) if result.m_hats else 0.0
        lines.append(
            f"{result.method:<18}  {result.mean_accuracy:.4f} +/- {result.std_accuracy:.4f}   "
            f"{result.mean_auroc:.4f} +/- {result.std_auroc:.4f}   {mean_m:.1f}"
        )
    return "\n".join(lines) + "\n"
