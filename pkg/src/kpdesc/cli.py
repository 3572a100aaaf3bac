"""Command-line interface.

Subcommands: extract, whiten fit/apply, eval verify/retrieval/matching,
sweep shrink/synth, analyze patchmap/slice/heatmap/hist.

Exit codes: 0 on success, 2 for input-format problems, 3 for numerical
failures.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import analysis, evaluate, storage, whitening
from .datasets import ingest_hpatches, ingest_phototourism, ingest_raw
from .descriptor import (
    CARTESIAN,
    COMBINED,
    DEFAULT_CONFIG,
    POLAR,
    POSTPROCESSED,
    combined_from_parts,
    describe_batch,
)
from .errors import InputFormatError, NumericalError
from .patch import ROTATION, TRANSLATION

VARIANT_CHOICES = (POLAR, CARTESIAN, COMBINED)

WHITEN_CHOICES = {
    "ws": whitening.SUPERVISED,
    "w": whitening.PCA,
    "wua": whitening.ATTENUATED,
    "wus": whitening.SHRINKAGE,
    "pcasqrt": whitening.PCA_SQRT,
}


def _load_labeled(directory: str, fmt: str):
    if fmt == "pt":
        return ingest_phototourism(directory)
    if fmt == "raw":
        return ingest_raw(directory)
    raise InputFormatError(f"format {fmt!r} does not provide a flat labeled patch set")


def _read_labels(path: str) -> np.ndarray:
    labels = []
    for line_no, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            labels.append(int(line.rsplit(",", 1)[-1]))
        except ValueError as exc:
            raise InputFormatError(f"{path}:{line_no}: expected an integer label") from exc
    if not labels:
        raise InputFormatError(f"{path}: no labels found")
    return np.asarray(labels, dtype=np.int64)


def _write_labels(path: Path, names, labels) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for name, label in zip(names, labels):
            writer.writerow([name, int(label)])


def _read_pairs(path: str) -> tuple[np.ndarray, np.ndarray]:
    a, b = [], []
    for line_no, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise InputFormatError(f"{path}:{line_no}: expected 'index,index'")
        try:
            a.append(int(parts[0]))
            b.append(int(parts[1]))
        except ValueError as exc:
            raise InputFormatError(f"{path}:{line_no}: expected integer indices") from exc
    if not a:
        raise InputFormatError(f"{path}: no pairs found")
    return np.asarray(a), np.asarray(b)


def cmd_extract(args) -> int:
    out = Path(args.out)
    if args.format == "hpatches":
        sequences = ingest_hpatches(args.input)
        rows, names = [], []
        for seq in sequences:
            stacks = [("ref", seq.ref)] + sorted(seq.targets.items())
            for stack_name, stack in stacks:
                values, _ = describe_batch(stack, args.variant, threads=args.threads)
                rows.append(values)
                names += [f"{seq.name}/{stack_name}/{r}" for r in range(values.shape[0])]
        values = np.vstack(rows)
        labels = np.zeros(values.shape[0], dtype=np.int64)
        storage.write_descriptors(out, values, args.variant)
        _write_labels(out.with_suffix(out.suffix + ".labels.csv"), names, labels)
    else:
        patch_set = _load_labeled(args.input, args.format)
        values, _ = describe_batch(patch_set.patches, args.variant, threads=args.threads)
        storage.write_descriptors(out, values, args.variant)
        names = [str(i) for i in range(len(patch_set))]
        _write_labels(out.with_suffix(out.suffix + ".labels.csv"), names, patch_set.labels)
    print(f"wrote {out}")
    return 0


def cmd_whiten_fit(args) -> int:
    values, _ = storage.read_descriptors(args.desc)
    values = values.astype(np.float64)
    variant = WHITEN_CHOICES[args.variant]
    stats = whitening.estimate_stats(values)
    if variant == whitening.SUPERVISED:
        if args.pairs:
            ia, ib = _read_pairs(args.pairs)
            if ia.max(initial=-1) >= values.shape[0] or ib.max(initial=-1) >= values.shape[0]:
                raise InputFormatError(f"{args.pairs}: pair index out of range")
        elif args.labels:
            labels = _read_labels(args.labels)
            rng = np.random.default_rng(args.seed)
            budget = min(args.pairs_budget, _n_matching_pairs(labels))
            ia, ib = evaluate.sample_matching_pairs(labels, budget, rng)
        else:
            raise InputFormatError("supervised whitening needs --pairs or --labels")
        intra = whitening.intraclass_covariance(values[ia], values[ib])
        model = whitening.fit_supervised(stats, intra, d_out=args.dim)
    elif variant == whitening.PCA:
        model = whitening.fit_pca_whitening(stats, d_out=args.dim)
    elif variant == whitening.ATTENUATED:
        model = whitening.fit_attenuated(stats, t=args.t, d_out=args.dim)
    elif variant == whitening.SHRINKAGE:
        model = whitening.fit_shrinkage(stats, d_out=args.dim, shrink_index=args.beta_index)
    else:
        model = whitening.fit_pca_sqrt(stats, d_out=args.dim)
    storage.write_model(args.out, model)
    print(f"wrote {args.out}")
    return 0


def _n_matching_pairs(labels) -> int:
    _, counts = np.unique(labels, return_counts=True)
    return int(np.sum(counts * (counts - 1) // 2))


def cmd_whiten_apply(args) -> int:
    values, _ = storage.read_descriptors(args.desc)
    model = storage.read_model(args.model)
    post = whitening.apply(model, values.astype(np.float64))
    storage.write_descriptors(args.out, post, POSTPROCESSED)
    print(f"wrote {args.out}")
    return 0


def cmd_eval(args) -> int:
    if args.task == "verify":
        values, _ = storage.read_descriptors(args.desc)
        labels = _read_labels(args.labels)
        if labels.size != values.shape[0]:
            raise InputFormatError(
                f"{args.labels}: {labels.size} labels for {values.shape[0]} descriptors"
            )
        report = evaluate.verification_report(
            values.astype(np.float64),
            labels,
            n_pos=args.pairs_pos,
            n_neg=args.pairs_neg,
            seed=args.seed,
            recall=args.recall,
            config={"desc": args.desc},
        )
    else:
        sequences = ingest_hpatches(args.input)
        model = storage.read_model(args.model) if args.model else None
        seq_descs = evaluate.describe_sequences(
            sequences, args.variant, model=model, threads=args.threads
        )
        config = {"variant": args.variant, "model": args.model or "none"}
        if args.task == "matching":
            report = evaluate.matching_report(seq_descs, seed=args.seed, config=config)
        else:
            report = evaluate.retrieval_report(
                seq_descs, seed=args.seed, n_distractors=args.distractors, config=config
            )
    text = report.to_text()
    Path(args.out).write_text(text)
    sys.stdout.write(text)
    return 0


def cmd_sweep(args) -> int:
    patch_set = _load_labeled(args.input, args.format)
    rng = np.random.default_rng(args.seed)
    unique_labels = np.unique(patch_set.labels)
    rng.shuffle(unique_labels)
    n_train = max(1, int(len(unique_labels) * args.train_frac))
    train_labels = set(unique_labels[:n_train].tolist())
    in_train = np.asarray([label in train_labels for label in patch_set.labels])

    if args.kind == "shrink":
        vp, _ = describe_batch(patch_set.patches, POLAR, threads=args.threads)
        vc, _ = describe_batch(patch_set.patches, CARTESIAN, threads=args.threads)
        values = np.stack([combined_from_parts(p, c) for p, c in zip(vp, vc)])
        grid = [float(g) for g in args.grid.split(",")]
        common = dict(
            train_descriptors=values[in_train],
            test_descriptors=values[~in_train],
            test_labels=patch_set.labels[~in_train],
            d_out=args.dim,
            n_pos=args.pairs_pos,
            n_neg=args.pairs_neg,
            seed=args.seed,
            recall=args.recall,
        )
        if args.variant == "wua":
            report = evaluate.sweep_attenuation(grid=grid, **common)
        else:
            report = evaluate.sweep_shrinkage_index(grid=[int(g) for g in grid], **common)
        reports = {args.variant: report}
    else:
        from .datasets import LabeledPatchSet

        grid = [float(g) for g in args.grid.split(",")]
        kind = ROTATION if args.transform == "rotation" else TRANSLATION
        models = {}
        train_set_patches = patch_set.patches[in_train]
        train_set_labels = patch_set.labels[in_train]
        n_train_pairs = min(args.pairs_budget, _n_matching_pairs(train_set_labels))
        ia, ib = evaluate.sample_matching_pairs(train_set_labels, n_train_pairs, rng)
        for variant in (POLAR, CARTESIAN, COMBINED):
            _, _, train_values = evaluate.descriptor_matrix(
                train_set_patches, variant, DEFAULT_CONFIG, args.threads
            )
            stats = whitening.estimate_stats(train_values)
            intra = whitening.intraclass_covariance(
                train_values[ia[:n_train_pairs]], train_values[ib[:n_train_pairs]]
            )
            d_out = min(args.dim, train_values.shape[1])
            models[variant] = whitening.fit_supervised(stats, intra, d_out=d_out)
        test_set = LabeledPatchSet(
            patches=patch_set.patches[~in_train], labels=patch_set.labels[~in_train]
        )
        reports = evaluate.sweep_synthetic(
            test_set,
            models,
            kind=kind,
            grid=grid,
            n_pos=args.pairs_pos,
            n_neg=args.pairs_neg,
            seed=args.seed,
            recall=args.recall,
            threads=args.threads,
        )
    out = Path(args.out)
    text = "".join(report.to_text() + "\n" for report in reports.values())
    out.write_text(text)
    sys.stdout.write(text)
    return 0


def cmd_analyze(args) -> int:
    if args.tool == "patchmap":
        model = storage.read_model(args.model) if args.model else None
        pmap = analysis.patch_map(
            args.width,
            args.px,
            args.py,
            args.ptheta,
            args.qtheta,
            variant=args.variant,
            model=model,
        )
        outdir = Path(args.outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        csv_path = outdir / analysis.map_filename(pmap, "csv")
        pgm_path = outdir / analysis.map_filename(pmap, "pgm")
        storage.write_map_csv(csv_path, pmap.values)
        storage.write_map_pgm(pgm_path, pmap.values)
        print(f"wrote {csv_path}\nwrote {pgm_path}")
    elif args.tool == "slice":
        grid = storage.read_map_csv(args.map)
        if args.axis == "row":
            if not 1 <= args.index <= grid.shape[0]:
                raise InputFormatError(f"row index {args.index} out of range")
            vector = grid[args.index - 1, :]
        else:
            if not 1 <= args.index <= grid.shape[1]:
                raise InputFormatError(f"column index {args.index} out of range")
            vector = grid[:, args.index - 1]
        np.savetxt(args.out, vector, delimiter=",", fmt="%.17g")
        print(f"wrote {args.out}")
    elif args.tool == "heatmap":
        patch_a = storage.read_pgm(args.patch_a)
        patch_b = storage.read_pgm(args.patch_b)
        model = storage.read_model(args.model) if args.model else None
        over_b, over_a = analysis.pair_heat_map(patch_a, patch_b, variant=args.variant, model=model)
        outdir = Path(args.outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        for name, grid in (("heat_second", over_b), ("heat_first", over_a)):
            storage.write_map_csv(outdir / f"{name}.csv", grid)
            storage.write_map_pgm(outdir / f"{name}.pgm", grid)
        print(f"wrote heat maps to {outdir}")
    else:  # hist
        values, _ = storage.read_descriptors(args.desc)
        values = values.astype(np.float64)
        labels = _read_labels(args.labels)
        rng = np.random.default_rng(args.seed)
        idx_a, idx_b, is_match = evaluate.sample_pairs(
            labels, args.pairs_pos, args.pairs_neg, rng
        )
        hist = analysis.similarity_histograms(
            values[idx_a[is_match]],
            values[idx_b[is_match]],
            values[idx_a[~is_match]],
            values[idx_b[~is_match]],
            bins=args.bins,
        )
        centers = 0.5 * (hist.bin_edges[:-1] + hist.bin_edges[1:])
        with open(args.out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["bin_center", "positives", "negatives"])
            for c, p, n in zip(centers, hist.counts_pos, hist.counts_neg):
                writer.writerow([f"{c:.17g}", int(p), int(n)])
        print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kpdesc", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="extract descriptors from a patch dataset")
    p.add_argument("--input", required=True)
    p.add_argument("--format", required=True, choices=("pt", "hpatches", "raw"))
    p.add_argument("--variant", required=True, choices=VARIANT_CHOICES)
    p.add_argument("--out", required=True)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_extract)

    whiten = sub.add_parser("whiten", help="fit or apply a post-processing model")
    wsub = whiten.add_subparsers(dest="subcommand", required=True)
    p = wsub.add_parser("fit")
    p.add_argument("--desc", required=True)
    p.add_argument("--pairs", help="CSV of matching index pairs (supervised)")
    p.add_argument("--labels", help="labels CSV; matching pairs are sampled from it")
    p.add_argument("--variant", required=True, choices=tuple(WHITEN_CHOICES))
    p.add_argument("--t", type=float, default=0.7)
    p.add_argument("--beta-index", type=int, default=40)
    p.add_argument("--dim", type=int, default=128)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pairs-budget", type=int, default=evaluate.FULL_PAIR_BUDGET)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_whiten_fit)
    p = wsub.add_parser("apply")
    p.add_argument("--desc", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_whiten_apply)

    p = sub.add_parser("eval", help="run an evaluation protocol")
    p.add_argument("task", choices=("verify", "retrieval", "matching"))
    p.add_argument("--desc", help="descriptor file (verify)")
    p.add_argument("--labels", help="labels CSV (verify)")
    p.add_argument("--input", help="sequence directory (retrieval/matching)")
    p.add_argument("--variant", default=COMBINED, choices=VARIANT_CHOICES)
    p.add_argument("--model", help="optional whitening model (retrieval/matching)")
    p.add_argument("--recall", type=float, default=evaluate.DEFAULT_RECALL)
    p.add_argument("--pairs-pos", type=int, default=evaluate.DESK_PAIR_BUDGET)
    p.add_argument("--pairs-neg", type=int, default=evaluate.DESK_PAIR_BUDGET)
    p.add_argument("--distractors", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="parameter or robustness sweep")
    p.add_argument("kind", choices=("shrink", "synth"))
    p.add_argument("--input", required=True)
    p.add_argument("--format", default="raw", choices=("pt", "raw"))
    p.add_argument("--variant", default="wua", choices=("wua", "wus"))
    p.add_argument("--transform", default="rotation", choices=("rotation", "translation"))
    p.add_argument("--grid", required=True, help="comma-separated grid values")
    p.add_argument("--dim", type=int, default=128)
    p.add_argument("--train-frac", type=float, default=0.5)
    p.add_argument("--recall", type=float, default=evaluate.DEFAULT_RECALL)
    p.add_argument("--pairs-pos", type=int, default=evaluate.DESK_PAIR_BUDGET)
    p.add_argument("--pairs-neg", type=int, default=evaluate.DESK_PAIR_BUDGET)
    p.add_argument("--pairs-budget", type=int, default=evaluate.DESK_PAIR_BUDGET)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("analyze", help="visualization and histogram exports")
    p.add_argument("tool", choices=("patchmap", "slice", "heatmap", "hist"))
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--px", type=float, default=20)
    p.add_argument("--py", type=float, default=20)
    p.add_argument("--ptheta", type=float, default=0.0)
    p.add_argument("--qtheta", type=float, default=0.0)
    p.add_argument("--variant", default=POLAR, choices=VARIANT_CHOICES)
    p.add_argument("--model")
    p.add_argument("--outdir", default=".")
    p.add_argument("--map", help="exported map CSV (slice)")
    p.add_argument("--axis", default="row", choices=("row", "column"))
    p.add_argument("--index", type=int, default=1)
    p.add_argument("--patch-a", help="first patch PGM (heatmap)")
    p.add_argument("--patch-b", help="second patch PGM (heatmap)")
    p.add_argument("--desc", help="descriptor file (hist)")
    p.add_argument("--labels", help="labels CSV (hist)")
    p.add_argument("--bins", type=int, default=50)
    p.add_argument("--pairs-pos", type=int, default=1000)
    p.add_argument("--pairs-neg", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="hist.csv")
    p.set_defaults(func=cmd_analyze)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputFormatError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
