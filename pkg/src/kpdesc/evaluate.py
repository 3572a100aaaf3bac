"""Evaluation protocols: pair verification, sequence matching and retrieval,
and the parameter/robustness sweeps.

Pair sampling is seeded and uniform: positives are distinct patches sharing
a 3D-point label, negatives are patches with different labels.  Similarity
is always the dot product of l2-normalized descriptors.  Reports serialize
to line-oriented ``key=value`` text plus a CSV block for curves; identical
seeds and inputs produce byte-identical output.

The sequence protocols are deliberately simplified stand-ins for the full
published benchmark harness and label their reports ``HP-approx``:

* matching: per (reference, target) stack pair, a greedy one-to-one
  assignment by descending similarity; average precision of the assignment
  ranking, where an assignment is correct when it pairs corresponding rows.
* retrieval: every reference patch queries a pool of its true
  correspondences plus seeded distractor patches from other sequences;
  mean average precision over queries.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import whitening
from .datasets import LabeledPatchSet, PatchSequence
from .descriptor import DEFAULT_CONFIG, CARTESIAN, COMBINED, POLAR, DescriptorConfig, combined_from_parts, describe_batch
from .metrics import average_precision, fpr_at_recall
from .patch import ROTATION, TRANSLATION, SyntheticTransform, apply_synthetic_transform

DEFAULT_RECALL = 0.95
FULL_PAIR_BUDGET = 50_000
DESK_PAIR_BUDGET = 5_000


@dataclass
class EvalReport:
    """One evaluation outcome: metrics plus the configuration that made it."""

    protocol: str
    seed: int
    config: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    curve: list[dict] | None = None

    def to_text(self) -> str:
        lines = [f"protocol={self.protocol}", f"seed={self.seed}"]
        lines += [f"config.{k}={v}" for k, v in sorted(self.config.items())]
        lines += [f"metric.{k}={_fmt(v)}" for k, v in sorted(self.metrics.items())]
        if self.curve is not None:
            lines.append("curve:")
            lines.append(self.curve_csv().rstrip("\n"))
        return "\n".join(lines) + "\n"

    def curve_csv(self) -> str:
        if not self.curve:
            return ""
        keys = list(self.curve[0])
        rows = [",".join(keys)]
        rows += [",".join(_fmt(point[k]) for k in keys) for point in self.curve]
        return "\n".join(rows) + "\n"


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def sample_pairs(labels, n_pos: int, n_neg: int, rng: np.random.Generator):
    """Seeded uniform sample of matching and non-matching index pairs.

    Returns (idx_a, idx_b, is_match) arrays of length n_pos + n_neg.
    """
    labels = np.asarray(labels)
    pos_a, pos_b = sample_matching_pairs(labels, n_pos, rng)

    neg_pairs: list[tuple[int, int]] = []
    seen: set[tuple[int, int]] = set()
    n_items = labels.size
    while len(neg_pairs) < n_neg:
        a = rng.integers(0, n_items, size=2 * n_neg)
        b = rng.integers(0, n_items, size=2 * n_neg)
        for i, j in zip(a, b):
            if labels[i] == labels[j]:
                continue
            key = (int(i), int(j)) if i < j else (int(j), int(i))
            if key in seen:
                continue
            seen.add(key)
            neg_pairs.append((int(i), int(j)))
            if len(neg_pairs) == n_neg:
                break
    neg_a = np.asarray([p[0] for p in neg_pairs])
    neg_b = np.asarray([p[1] for p in neg_pairs])

    idx_a = np.concatenate([pos_a, neg_a])
    idx_b = np.concatenate([pos_b, neg_b])
    is_match = np.zeros(idx_a.size, dtype=bool)
    is_match[:n_pos] = True
    return idx_a, idx_b, is_match


def sample_matching_pairs(labels, n_pairs: int, rng: np.random.Generator):
    """Seeded uniform sample of matching index pairs only."""
    labels = np.asarray(labels)
    order = np.argsort(labels, kind="stable")
    sorted_labels = labels[order]
    boundaries = np.flatnonzero(np.diff(sorted_labels)) + 1
    pos_a, pos_b = [], []
    for group in np.split(order, boundaries):
        if group.size < 2:
            continue
        ia, ib = np.triu_indices(group.size, 1)
        pos_a.append(group[ia])
        pos_b.append(group[ib])
    if not pos_a:
        raise ValueError("no label occurs twice; cannot form matching pairs")
    pos_a = np.concatenate(pos_a)
    pos_b = np.concatenate(pos_b)
    if n_pairs > pos_a.size:
        raise ValueError(f"requested {n_pairs} matching pairs but only {pos_a.size} exist")
    sel = rng.choice(pos_a.size, size=n_pairs, replace=False)
    return pos_a[sel], pos_b[sel]


def pair_scores(descriptors: np.ndarray, idx_a, idx_b) -> np.ndarray:
    """Row-wise dot products of descriptor pairs."""
    d = np.asarray(descriptors, dtype=np.float64)
    return np.einsum("ij,ij->i", d[idx_a], d[idx_b])


def verification_report(
    descriptors: np.ndarray,
    labels,
    n_pos: int,
    n_neg: int,
    seed: int,
    recall: float = DEFAULT_RECALL,
    config: dict | None = None,
) -> EvalReport:
    """FPR at the target recall plus verification AP over sampled pairs."""
    rng = np.random.default_rng(seed)
    idx_a, idx_b, is_match = sample_pairs(labels, n_pos, n_neg, rng)
    scores = pair_scores(descriptors, idx_a, idx_b)
    report = EvalReport(
        protocol="verification-fpr95",
        seed=seed,
        config=dict(config or {}),
        metrics={
            "fpr": fpr_at_recall(scores, is_match, recall),
            "map": average_precision(scores, is_match),
        },
    )
    report.config.setdefault("recall", recall)
    report.config.setdefault("pairs_pos", n_pos)
    report.config.setdefault("pairs_neg", n_neg)
    return report


def greedy_one_to_one(sim: np.ndarray):
    """Greedy global assignment on a similarity matrix.

    Repeatedly takes the best remaining (row, column) entry.  Returns
    (rows, cols, scores) in assignment order.
    """
    n_r, n_c = sim.shape
    order = np.argsort(-sim, axis=None, kind="stable")
    used_r = np.zeros(n_r, dtype=bool)
    used_c = np.zeros(n_c, dtype=bool)
    rows, cols, scores = [], [], []
    n_assign = min(n_r, n_c)
    for flat in order:
        r, c = divmod(int(flat), n_c)
        if used_r[r] or used_c[c]:
            continue
        used_r[r] = True
        used_c[c] = True
        rows.append(r)
        cols.append(c)
        scores.append(sim[r, c])
        if len(rows) == n_assign:
            break
    return np.asarray(rows), np.asarray(cols), np.asarray(scores)


@dataclass
class SequenceDescriptors:
    """Descriptors of one sequence's reference and target stacks."""

    name: str
    ref: np.ndarray
    targets: dict[str, np.ndarray]


def describe_sequences(
    sequences: list[PatchSequence],
    variant: str,
    cfg: DescriptorConfig = DEFAULT_CONFIG,
    model: whitening.WhiteningModel | None = None,
    threads: int = 1,
) -> list[SequenceDescriptors]:
    """Extract (and optionally post-process) descriptors for every stack."""

    def run(stack):
        values, _ = describe_batch(stack, variant, cfg, threads=threads)
        return whitening.apply(model, values) if model is not None else values

    return [
        SequenceDescriptors(
            name=seq.name,
            ref=run(seq.ref),
            targets={name: run(stack) for name, stack in seq.targets.items()},
        )
        for seq in sequences
    ]


def matching_report(seq_descs: list[SequenceDescriptors], seed: int = 0, config: dict | None = None) -> EvalReport:
    """Greedy one-to-one matching AP averaged over (reference, target) pairs."""
    if not seq_descs:
        raise ValueError("no sequences to evaluate")
    aps = []
    for seq in seq_descs:
        for desc in seq.targets.values():
            rows, cols, scores = greedy_one_to_one(seq.ref @ desc.T)
            aps.append(average_precision(scores, rows == cols))
    report = EvalReport(
        protocol="matching-map",
        seed=seed,
        config=dict(config or {}),
        metrics={"map": float(np.mean(aps)) if aps else 0.0, "n_rankings": len(aps)},
    )
    report.config.setdefault("benchmark", "HP-approx")
    return report


def retrieval_report(
    seq_descs: list[SequenceDescriptors],
    seed: int = 0,
    n_distractors: int = 100,
    config: dict | None = None,
) -> EvalReport:
    """Mean AP of reference patches retrieving their true correspondences
    from a pool with seeded distractors."""
    if not seq_descs:
        raise ValueError("no sequences to evaluate")
    rng = np.random.default_rng(seed)
    # Flat pool of candidate distractors: (sequence index, stack, row).
    all_rows = []
    for s, seq in enumerate(seq_descs):
        for name, desc in seq.targets.items():
            for r in range(desc.shape[0]):
                all_rows.append((s, name, r))
    aps = []
    for s, seq in enumerate(seq_descs):
        if not seq.targets:
            continue
        others = [row for row in all_rows if row[0] != s]
        for q in range(seq.ref.shape[0]):
            relevant = np.stack([desc[q] for desc in seq.targets.values()])
            if others and n_distractors > 0:
                take = rng.choice(len(others), size=min(n_distractors, len(others)), replace=False)
                distractors = np.stack(
                    [seq_descs[si].targets[name][row] for si, name, row in (others[t] for t in take)]
                )
                pool = np.vstack([relevant, distractors])
            else:
                pool = relevant
            flags = np.zeros(pool.shape[0], dtype=bool)
            flags[: relevant.shape[0]] = True
            aps.append(average_precision(pool @ seq.ref[q], flags))
    if not aps:
        raise ValueError("sequences contain no target stacks; nothing to retrieve")
    report = EvalReport(
        protocol="retrieval-map",
        seed=seed,
        config=dict(config or {}),
        metrics={"map": float(np.mean(aps)), "n_queries": len(aps)},
    )
    report.config.setdefault("benchmark", "HP-approx")
    report.config.setdefault("n_distractors", n_distractors)
    return report


def sweep_attenuation(
    train_descriptors: np.ndarray,
    test_descriptors: np.ndarray,
    test_labels,
    grid,
    d_out: int,
    n_pos: int,
    n_neg: int,
    seed: int,
    recall: float = DEFAULT_RECALL,
) -> EvalReport:
    """Evaluate attenuated whitening over a grid of extents t with one shared
    pair sample (paired comparison)."""
    grid = list(grid)
    if not grid:
        raise ValueError("empty sweep grid")
    rng = np.random.default_rng(seed)
    idx_a, idx_b, is_match = sample_pairs(test_labels, n_pos, n_neg, rng)
    stats = whitening.estimate_stats(train_descriptors)
    curve = []
    for t in grid:
        model = whitening.fit_attenuated(stats, t=float(t), d_out=d_out)
        post = whitening.apply(model, test_descriptors)
        scores = pair_scores(post, idx_a, idx_b)
        curve.append(
            {
                "t": float(t),
                "fpr": fpr_at_recall(scores, is_match, recall),
                "map": average_precision(scores, is_match),
            }
        )
    best = min(curve, key=lambda point: point["fpr"])
    return EvalReport(
        protocol="shrink-sweep",
        seed=seed,
        config={"variant": "attenuated", "d_out": d_out, "recall": recall,
                "pairs_pos": n_pos, "pairs_neg": n_neg},
        metrics={"best_t": best["t"], "best_fpr": best["fpr"]},
        curve=curve,
    )


def sweep_shrinkage_index(
    train_descriptors: np.ndarray,
    test_descriptors: np.ndarray,
    test_labels,
    grid,
    d_out: int,
    n_pos: int,
    n_neg: int,
    seed: int,
    recall: float = DEFAULT_RECALL,
) -> EvalReport:
    """Evaluate shrinkage whitening over a grid of eigenvalue indices."""
    grid = [int(i) for i in grid]
    if not grid:
        raise ValueError("empty sweep grid")
    rng = np.random.default_rng(seed)
    idx_a, idx_b, is_match = sample_pairs(test_labels, n_pos, n_neg, rng)
    stats = whitening.estimate_stats(train_descriptors)
    curve = []
    for index in grid:
        model = whitening.fit_shrinkage(stats, d_out=d_out, shrink_index=index)
        post = whitening.apply(model, test_descriptors)
        scores = pair_scores(post, idx_a, idx_b)
        curve.append(
            {
                "index": index,
                "fpr": fpr_at_recall(scores, is_match, recall),
                "map": average_precision(scores, is_match),
            }
        )
    best = min(curve, key=lambda point: point["fpr"])
    return EvalReport(
        protocol="shrink-sweep",
        seed=seed,
        config={"variant": "shrinkage", "d_out": d_out, "recall": recall,
                "pairs_pos": n_pos, "pairs_neg": n_neg},
        metrics={"best_index": best["index"], "best_fpr": best["fpr"]},
        curve=curve,
    )


def descriptor_matrix(patches, variant: str, cfg: DescriptorConfig, threads: int = 1):
    if variant == COMBINED:
        vp, _ = describe_batch(patches, POLAR, cfg, threads=threads)
        vc, _ = describe_batch(patches, CARTESIAN, cfg, threads=threads)
        return vp, vc, np.stack([combined_from_parts(p, c) for p, c in zip(vp, vc)])
    values, _ = describe_batch(patches, variant, cfg, threads=threads)
    return None, None, values


def sweep_synthetic(
    test_set: LabeledPatchSet,
    models: dict[str, whitening.WhiteningModel],
    kind: str,
    grid,
    n_pos: int,
    n_neg: int,
    seed: int,
    cfg: DescriptorConfig = DEFAULT_CONFIG,
    recall: float = DEFAULT_RECALL,
    threads: int = 1,
) -> dict[str, EvalReport]:
    """Robustness curves: one patch of every sampled pair is transformed by
    each grid amount, then verification runs per descriptor config.

    ``models`` maps descriptor variants (polar / cartesian / combined) to the
    post-processing model applied to both sides of each pair.
    """
    if kind not in (ROTATION, TRANSLATION):
        raise ValueError(f"unknown transform kind {kind!r}")
    grid = list(grid)
    if not grid:
        raise ValueError("empty sweep grid")
    rng = np.random.default_rng(seed)
    idx_a, idx_b, is_match = sample_pairs(test_set.labels, n_pos, n_neg, rng)
    variants = list(models)

    base: dict[str, np.ndarray] = {}
    for variant in variants:
        _, _, values = descriptor_matrix(test_set.patches, variant, cfg, threads)
        base[variant] = whitening.apply(models[variant], values)

    unique_b, inverse_b = np.unique(idx_b, return_inverse=True)
    curves: dict[str, list[dict]] = {variant: [] for variant in variants}
    for amount in grid:
        if amount == 0:
            transformed_desc = {variant: base[variant][idx_b] for variant in variants}
        else:
            transform = SyntheticTransform(kind, amount)
            moved = [apply_synthetic_transform(test_set.patches[i], transform) for i in unique_b]
            transformed_desc = {}
            for variant in variants:
                _, _, values = descriptor_matrix(moved, variant, cfg, threads)
                transformed_desc[variant] = whitening.apply(models[variant], values)[inverse_b]
        for variant in variants:
            scores = np.einsum(
                "ij,ij->i", base[variant][idx_a], transformed_desc[variant]
            )
            curves[variant].append(
                {
                    "amount": float(amount),
                    "fpr": fpr_at_recall(scores, is_match, recall),
                    "map": average_precision(scores, is_match),
                }
            )
    reports = {}
    for variant in variants:
        reports[variant] = EvalReport(
            protocol="synth-sweep",
            seed=seed,
            config={"kind": kind, "variant": variant, "recall": recall,
                    "pairs_pos": n_pos, "pairs_neg": n_neg},
            metrics={"max_amount_fpr": curves[variant][-1]["fpr"]},
            curve=curves[variant],
        )
    return reports
