"""Command-line interface: ``scorer-calib <subcommand> ...``.

Every option can also come from a TOML file passed with ``--config``; values
given on the command line win over the file, which wins over the built-in
defaults. Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .analysis import (
    case_study, cluster_embeddings, cluster_profiles, correlation_matrix, default_cluster_dims,
    pca_2d, scorer_variables,
)
from .core import DataError, Dataset, ScoreScale, load_dataset, make_folds, save_dataset
from .head import ContentHead, ScorerSpecificHead, UniversalHead, load_checkpoint, save_checkpoint
from .metrics import KappaWeighting, evaluate_dataset
from .optim import SELECTION_METRICS, TrainConfig, config_dict, cross_validate, train
from .synth import PRESETS, config_to_dict, default_archetypes, generate, preset

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger("scorer_calib")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2
HEAD_ORDER = ("universal", "scorer", "content")
LOSS_ORDER = ("ce", "mse", "oll")
CV_COLUMNS = ("head", "loss", "auc_mean", "auc_std", "rmse_mean", "rmse_std",
              "kappa_mean", "kappa_std", "kappa_weighting")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------------------
# Options shared between the command line and the config file

@dataclass(frozen=True)
class Opt:
    name: str              # dest / TOML key
    type: object
    default: object
    help: str
    choices: tuple | None = None
    flag: str | None = None

    @property
    def flags(self) -> list[str]:
        return [self.flag or "--" + self.name.replace("_", "-")]


def _bool(v):
    if isinstance(v, bool):
        return v
    s = str(v).lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _optional_int(v):
    return None if v in (None, "", "none", "None") else int(v)


def _floats3(v):
    vals = [float(x) for x in (v.split(",") if isinstance(v, str) else v)]
    if len(vals) != 3:
        raise ValueError("expected three comma-separated numbers")
    return tuple(vals)


TRAIN_OPTS = (
    Opt("head", str, "universal", "scoring head", HEAD_ORDER),
    Opt("loss", str, "ce", "training loss", LOSS_ORDER),
    Opt("k", int, 10, "number of folds"),
    Opt("test_fold", int, 9, "held-out test fold (train only)"),
    Opt("val_fold", int, 8, "validation fold for checkpoint selection (train only)"),
    Opt("lr", float, 1e-5, "Adam learning rate"),
    Opt("batch", int, 16, "minibatch size"),
    Opt("epochs", int, 10, "training epochs"),
    Opt("seed", int, 0, "seed for folds, initialization and shuffling"),
    Opt("embed_dim", _optional_int, None, "scorer embedding size (default: C)"),
    Opt("selection", str, "kappa_quadratic", "validation metric used to pick the checkpoint",
        SELECTION_METRICS),
    Opt("kappa", str, "quadratic", "kappa weighting reported in the cv summary",
        tuple(w.value for w in KappaWeighting)),
    Opt("min_score", int, 0, "lowest score on the scale"),
    Opt("max_score", int, 4, "highest score on the scale"),
)

SYNTH_OPTS = (
    Opt("preset", str, "table3", "archetype preset", tuple(sorted(PRESETS))),
    Opt("seed", int, 7, "generator seed"),
    Opt("n_scorers", int, None, "number of scorers J (default: preset)"),
    Opt("responses_per_scorer", int, None, "responses per scorer (default: preset)"),
    Opt("n_pairs", int, None, "size of the shared pair pool (default: preset)"),
    Opt("shared_pairs", float, None, "fraction of each scorer's pairs drawn from the shared pool"),
    Opt("D", int, None, "representation size (default: preset)", flag="--dim"),
    Opt("D_e", int, None, "nominal scorer embedding size (default: preset)", flag="--embed-dim"),
    Opt("C", int, None, "number of score categories (default: preset)", flag="--categories"),
    Opt("quality_logit_scale", float, None, "std of the true base weights (default: preset)"),
    Opt("bias_jitter", float, None, "per-scorer Gaussian bias noise (default: preset)"),
    Opt("feature_noise", _floats3, None, "feature noise std as a,b,c (default: preset)"),
    Opt("magnitude", float, None, "rebuild the six archetypes at this bias magnitude"),
    Opt("graded", _bool, None, "with --magnitude: graded instead of flat sign patterns"),
)

ANALYSIS_OPTS = (
    Opt("k", int, 6, "number of mixture components"),
    Opt("seed", int, 7, "clustering seed"),
    Opt("dims", int, None, "cluster in this many principal directions of the embeddings "
        "(default: C-1; 0 means the full embedding space)"),
    Opt("n_init", int, 20, "EM restarts; the best log-likelihood wins"),
    Opt("max_iter", int, 200, "EM iteration cap"),
)


def _add_opts(p: argparse.ArgumentParser, opts, section: str) -> None:
    for o in opts:
        kw = {"dest": o.name, "default": None, "type": o.type}
        if o.choices:
            kw["choices"] = o.choices
        p.add_argument(*o.flags, help=f"{o.help} (default: {o.default}; config [{section}].{o.name})", **kw)


def _merge(args, opts, section: str) -> dict:
    """Flags over ``[section]`` of the config file over built-in defaults."""
    file_vals = {}
    if args.config:
        try:
            with open(args.config, "rb") as fh:
                doc = tomllib.load(fh)
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise UsageError(f"bad config file: {exc}") from exc
        file_vals = doc.get(section, {})
        known = {o.name for o in opts}
        unknown = sorted(set(file_vals) - known)
        if unknown:
            raise UsageError(f"unknown keys in [{section}]: {', '.join(unknown)}")
    out = {}
    for o in opts:
        v = getattr(args, o.name)
        if v is None and o.name in file_vals:
            try:
                v = o.type(file_vals[o.name])
            except (TypeError, ValueError) as exc:
                raise UsageError(f"[{section}].{o.name}: {exc}") from exc
            if o.choices and v not in o.choices:
                raise UsageError(f"[{section}].{o.name} must be one of {o.choices}")
        out[o.name] = o.default if v is None else v
    return out


# ---------------------------------------------------------------------------
# Output helpers

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def write_json(path, doc) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


_PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
            "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


def scatter_svg(xy: np.ndarray, labels, names, size: int = 480, pad: int = 30) -> str:
    """Minimal 2-D scatter plot, one colour per cluster."""
    xy = np.asarray(xy, dtype=np.float64)
    lo, hi = xy.min(axis=0), xy.max(axis=0)
    span = np.where(hi - lo > 0, hi - lo, 1.0)
    pts = pad + (xy - lo) / span * (size - 2 * pad)
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
    ]
    for (x, y), c, name in zip(pts, labels, names):
        colour = _PALETTE[int(c) % len(_PALETTE)]
        lines.append(
            f'<circle cx="{x:.2f}" cy="{size - y:.2f}" r="4" fill="{colour}">'
            f"<title>{name} (cluster {int(c)})</title></circle>"
        )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Loading

def _scale(vals) -> ScoreScale:
    if vals["max_score"] <= vals["min_score"]:
        raise UsageError("max_score must exceed min_score")
    return ScoreScale(vals["min_score"], vals["max_score"])


def _load_data(path, scale: ScoreScale) -> Dataset:
    try:
        return load_dataset(path, scale)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc


def _load_ckpt(path):
    try:
        head, meta = load_checkpoint(path)
    except OSError as exc:
        raise DataError(f"cannot read checkpoint {path}: {exc}") from exc
    except (ValueError, KeyError) as exc:
        raise DataError(f"bad checkpoint {path}: {exc}") from exc
    return head, meta


def _ckpt_scale(meta) -> ScoreScale:
    s = meta.get("scale", {"min_score": 0, "max_score": 4})
    return ScoreScale(int(s["min_score"]), int(s["max_score"]))


def _aligned(ds: Dataset, head, meta, require_all: bool = False) -> Dataset:
    """Reindex ``ds`` so its scorers match the checkpoint's scorer order."""
    if isinstance(head, UniversalHead):
        return ds
    ids = meta.get("scorer_ids")
    if ids is None or len(ids) != head.num_scorers:
        raise DataError("checkpoint carries no usable scorer id list")
    known = set(ids)
    missing = sorted({p.scorer_id for p in ds.points} - known)
    if missing:
        raise DataError(f"scorers not in the checkpoint: {', '.join(missing[:5])}")
    out = Dataset(scale=ds.scale, points=ds.points, scorer_ids=tuple(ids))
    if require_all and (out.scorer_counts() == 0).any():
        absent = [ids[j] for j in np.flatnonzero(out.scorer_counts() == 0)]
        raise DataError(f"checkpoint scorers without data: {', '.join(absent[:5])}")
    return out


def _train_config(v) -> TrainConfig:
    try:
        return TrainConfig(
            head_kind=v["head"], loss=v["loss"], lr=v["lr"], batch_size=v["batch"],
            epochs=v["epochs"], seed=v["seed"], selection_metric=v["selection"],
            embed_dim=v["embed_dim"],
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _ckpt_meta(ds: Dataset, cfg: TrainConfig) -> dict:
    return {
        "scorer_ids": list(ds.scorer_ids),
        "scale": {"min_score": ds.scale.min_score, "max_score": ds.scale.max_score},
        "train_config": config_dict(cfg),
    }


# ---------------------------------------------------------------------------
# Subcommands

def cmd_synth(args) -> int:
    v = _merge(args, SYNTH_OPTS, "synth")
    overrides = {k: v[k] for k in ("n_scorers", "responses_per_scorer", "n_pairs", "shared_pairs",
                                   "D", "D_e", "C", "quality_logit_scale", "bias_jitter",
                                   "feature_noise") if v[k] is not None}
    if v["graded"] is not None and v["magnitude"] is None:
        raise UsageError("--graded only applies together with --magnitude")
    if v["magnitude"] is not None:
        if v["preset"] == "null":
            raise UsageError("--magnitude conflicts with --preset null")
        C = overrides.get("C", 5)
        try:
            arche = default_archetypes(C, magnitude=v["magnitude"], graded=bool(v["graded"]))
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        overrides["archetypes"] = tuple(arche)
    try:
        cfg = preset(v["preset"], seed=v["seed"], **overrides)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    ds, truth = generate(cfg)
    save_dataset(ds, args.out)
    if args.truth:
        doc = truth.to_dict()
        doc["config"] = config_to_dict(cfg)
        Path(args.truth).write_text(json.dumps(doc) + "\n", encoding="utf-8")
    log.info("wrote %d points from %d scorers to %s", len(ds), ds.num_scorers, args.out)
    return EXIT_OK


def cmd_train(args) -> int:
    v = _merge(args, TRAIN_OPTS, "train")
    if v["test_fold"] == v["val_fold"]:
        raise UsageError("--test-fold and --val-fold must differ")
    for f in ("test_fold", "val_fold"):
        if not 0 <= v[f] < v["k"]:
            raise UsageError(f"--{f.replace('_', '-')} must lie in [0, k)")
    cfg = _train_config(v)
    ds = _load_data(args.data, _scale(v))
    folds = make_folds(ds, v["k"], v["seed"])
    head, report = train(ds, folds, v["test_fold"], v["val_fold"], cfg)
    save_checkpoint(head, args.out, **_ckpt_meta(ds, cfg))
    if args.report:
        doc = report.to_dict()
        doc["config"] = config_dict(cfg)
        doc["folds"] = {"k": v["k"], "test": v["test_fold"], "validation": v["val_fold"]}
        write_json(args.report, doc)
    log.info("best epoch %d, test %s", report.best_epoch, report.test)
    return EXIT_OK


def cmd_cv(args) -> int:
    v = _merge(args, TRAIN_OPTS, "train")
    cfg = _train_config(v)
    if v["k"] < 3:
        raise UsageError("--k must be at least 3")
    ds = _load_data(args.data, _scale(v))
    res = cross_validate(ds, v["k"], cfg)
    kname = f"kappa_{v['kappa']}"
    row = [v["head"], v["loss"],
           *res.summary["auc"], *res.summary["rmse"], *res.summary[kname], v["kappa"]]
    write_csv(args.out, CV_COLUMNS, [row])
    if args.folds_out:
        header = ["fold", "val_fold", "best_epoch", "auc", "rmse",
                  "kappa_unweighted", "kappa_linear", "kappa_quadratic"]
        rows = []
        for f, rep in enumerate(res.reports):
            t = rep.test
            rows.append([f, (f + 1) % v["k"], rep.best_epoch, t.auc, t.rmse,
                         t.kappa_unweighted, t.kappa_linear, t.kappa_quadratic])
        write_csv(args.folds_out, header, rows)
    log.info("%s/%s %s = %.4f +- %.4f", v["head"], v["loss"], kname, *res.summary[kname])
    return EXIT_OK


def cmd_eval(args) -> int:
    head, meta = _load_ckpt(args.ckpt)
    ds = _aligned(_load_data(args.data, _ckpt_scale(meta)), head, meta)
    if ds.dim != head.dim:
        raise DataError(f"representation size {ds.dim} does not match checkpoint D={head.dim}")
    res = evaluate_dataset(head, ds).as_dict()
    if args.kappa != "all":
        res = {k: x for k, x in res.items() if not k.startswith("kappa_") or k == f"kappa_{args.kappa}"}
    text = json.dumps(res, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _scorer_head(path, what="checkpoint"):
    head, meta = _load_ckpt(path)
    if not isinstance(head, ScorerSpecificHead):
        raise DataError(f"{what} {path} is not a scorer-specific head")
    return head, meta


def cmd_cluster(args) -> int:
    v = _merge(args, ANALYSIS_OPTS, "analysis")
    head, meta = _scorer_head(args.ckpt)
    ds = _aligned(_load_data(args.data, _ckpt_scale(meta)), head, meta, require_all=True)
    E = head.params["E"]
    if len(E) < v["k"]:
        raise DataError(f"{len(E)} scorers cannot fill {v['k']} clusters")
    dims = default_cluster_dims(head) if v["dims"] is None else (v["dims"] or None)
    gmm = cluster_embeddings(E, v["k"], seed=v["seed"], dims=dims, n_init=v["n_init"],
                             max_iter=v["max_iter"])
    profiles = cluster_profiles(gmm, head, ds)
    C = ds.scale.num_categories
    cats = [ds.scale.to_score(c) for c in range(C)]
    header = (["cluster", "n"] + [f"bias_{s}" for s in cats]
              + ["temperature", "score_mean", "score_std"] + [f"dist_{s}" for s in cats]
              + ["math_token_pct", "image_pct", "token_length"])
    rows = []
    for p in profiles:
        if p.n == 0:
            rows.append([p.cluster, 0] + [None] * (len(header) - 2))
            continue
        rows.append([p.cluster, p.n, *p.avg_bias, p.avg_temperature, p.score_mean, p.score_std,
                     *p.avg_normalized_dist, *p.features.as_tuple()])
    write_csv(args.out, header, rows)
    labels = gmm.predict(E)
    if args.coords or args.svg:
        xy = pca_2d(E)
        if args.coords:
            write_csv(args.coords, ["scorer_id", "cluster", "x", "y"],
                      [[sid, int(c), x, y] for sid, c, (x, y) in zip(ds.scorer_ids, labels, xy)])
        if args.svg:
            Path(args.svg).write_text(scatter_svg(xy, labels, ds.scorer_ids), encoding="utf-8")
    return EXIT_OK


def cmd_correlate(args) -> int:
    head, meta = _load_ckpt(args.ckpt)
    if not isinstance(head, (ScorerSpecificHead, ContentHead)):
        raise DataError("correlation analysis needs a scorer-specific or content checkpoint")
    ds = _aligned(_load_data(args.data, _ckpt_scale(meta)), head, meta, require_all=True)
    if ds.num_scorers < 3:
        raise DataError("correlation analysis needs at least 3 scorers")
    report = correlation_matrix(scorer_variables(head, ds))
    write_csv(args.out, ["var_a", "var_b", "r", "p", "n"], report.rows())
    return EXIT_OK


def cmd_case_study(args) -> int:
    content, cmeta = _load_ckpt(args.content_ckpt)
    if not isinstance(content, ContentHead):
        raise DataError(f"{args.content_ckpt} is not a content-driven head")
    scorer, smeta = _scorer_head(args.scorer_ckpt)
    if cmeta.get("scorer_ids") != smeta.get("scorer_ids"):
        raise DataError("the two checkpoints were trained on different scorer sets")
    ds = _aligned(_load_data(args.data, _ckpt_scale(cmeta)), content, cmeta, require_all=True)
    pairs = [p for p in args.pairs.split(",") if p]
    if not pairs:
        raise UsageError("--pairs needs at least one pair id")
    try:
        study = case_study(content, scorer, ds, args.scorer, pairs)
    except KeyError as exc:
        raise DataError(exc.args[0]) from exc
    cats = [ds.scale.to_score(c) for c in range(ds.scale.num_categories)]
    header = (["pair_id", "true_score", "content_prediction", "scorer_prediction",
               "no_bias_prediction"] + [f"bias_{s}" for s in cats])
    # first row: the scorer's overall bias, averaged over all of its pairs
    rows = [["overall", None, None, None, None, *study.overall_bias]]
    for r in study.rows:
        rows.append([r.pair_id, r.true_score, r.content_prediction, r.scorer_prediction,
                     r.no_bias_prediction, *r.content_bias])
    write_csv(args.out, header, rows)
    return EXIT_OK


def cmd_report(args) -> int:
    rows = {}
    for path in args.inputs:
        try:
            with open(path, newline="", encoding="utf-8") as fh:
                for rec in csv.DictReader(fh):
                    key = (rec["head"], rec["loss"])
                    if key in rows:
                        raise DataError(f"duplicate row for {key[0]}/{key[1]} in {path}")
                    rows[key] = rec
        except OSError as exc:
            raise DataError(f"cannot read {path}: {exc}") from exc
        except KeyError as exc:
            raise DataError(f"{path} is not a cv summary (missing {exc.args[0]})") from exc
    if not rows:
        raise DataError("no cv rows to report")
    order = {(h, l): i for i, (h, l) in enumerate((h, l) for h in HEAD_ORDER for l in LOSS_ORDER)}
    table = []
    for key in sorted(rows, key=lambda k: (order.get(k, len(order)), k)):
        rec = rows[key]
        try:
            cells = [f"{float(rec[m + '_mean']):.3f} ± {float(rec[m + '_std']):.3f}"
                     for m in ("auc", "rmse", "kappa")]
        except (KeyError, ValueError) as exc:
            raise DataError(f"bad cv row for {key[0]}/{key[1]}: {exc}") from exc
        table.append([key[0], key[1], *cells, rec.get("kappa_weighting", "")])
    write_csv(args.out, ["head", "loss", "auc", "rmse", "kappa", "kappa_weighting"], table)
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="scorer-calib", description=__doc__.splitlines()[0],
                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr (default: off)")
    sub = p.add_subparsers(dest="command", metavar="command", parser_class=_Parser)

    def add(name, fn, help_, opts=None, section=None):
        sp = sub.add_parser(name, help=help_, description=help_)
        sp.set_defaults(func=fn)
        if opts is not None:
            sp.add_argument("--config", help=f"TOML file with a [{section}] table (default: none)")
            _add_opts(sp, opts, section)
        return sp

    sp = add("synth", cmd_synth, "generate a synthetic dataset with planted scorer archetypes",
             SYNTH_OPTS, "synth")
    sp.add_argument("--out", required=True, help="dataset JSONL to write (required)")
    sp.add_argument("--truth", help="ground-truth JSON to write (default: none)")

    sp = add("train", cmd_train, "train one head on one (test, validation) fold pair",
             TRAIN_OPTS, "train")
    sp.add_argument("--data", required=True, help="dataset JSONL (required)")
    sp.add_argument("--out", required=True, help="checkpoint JSON to write (required)")
    sp.add_argument("--report", help="training report JSON to write (default: none)")

    sp = add("cv", cmd_cv, "cross-validate one head/loss over all fold rotations", TRAIN_OPTS, "train")
    sp.add_argument("--data", required=True, help="dataset JSONL (required)")
    sp.add_argument("--out", required=True, help="one-row summary CSV to write (required)")
    sp.add_argument("--folds-out", help="per-fold test metrics CSV to write (default: none)")

    sp = add("eval", cmd_eval, "score a checkpoint on a dataset")
    sp.add_argument("--ckpt", required=True, help="checkpoint JSON (required)")
    sp.add_argument("--data", required=True, help="dataset JSONL (required)")
    sp.add_argument("--kappa", default="all", choices=("all",) + tuple(w.value for w in KappaWeighting),
                    help="kappa weighting(s) to report (default: all)")
    sp.add_argument("--out", help="metrics JSON to write (default: stdout)")

    sp = add("cluster", cmd_cluster, "cluster scorer embeddings and profile the clusters",
             ANALYSIS_OPTS, "analysis")
    sp.add_argument("--ckpt", required=True, help="scorer-specific checkpoint JSON (required)")
    sp.add_argument("--data", required=True, help="dataset JSONL the checkpoint was trained on (required)")
    sp.add_argument("--out", required=True, help="cluster profile CSV to write (required)")
    sp.add_argument("--coords", help="2-D coordinates CSV to write (default: none)")
    sp.add_argument("--svg", help="2-D scatter SVG to write (default: none)")

    sp = add("correlate", cmd_correlate, "correlate scorer parameters with scoring behaviour and features")
    sp.add_argument("--ckpt", required=True, help="scorer-specific or content checkpoint JSON (required)")
    sp.add_argument("--data", required=True, help="dataset JSONL (required)")
    sp.add_argument("--out", required=True, help="long-format correlation CSV to write (required)")

    sp = add("case-study", cmd_case_study, "compare predictions of one scorer on chosen pairs")
    sp.add_argument("--content-ckpt", required=True, help="content-driven checkpoint JSON (required)")
    sp.add_argument("--scorer-ckpt", required=True, help="scorer-specific checkpoint JSON (required)")
    sp.add_argument("--data", required=True, help="dataset JSONL (required)")
    sp.add_argument("--scorer", required=True, help="scorer id (required)")
    sp.add_argument("--pairs", required=True, help="comma-separated pair ids (required)")
    sp.add_argument("--out", required=True, help="case-study CSV to write (required)")

    sp = add("report", cmd_report, "merge cv summaries into one table in the standard row order")
    sp.add_argument("inputs", nargs="+", help="cv summary CSV files")
    sp.add_argument("--out", required=True, help="table CSV to write (required)")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("no subcommand given")
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(message)s")
        return args.func(args)
    except SystemExit as exc:  # --help
        return exc.code if isinstance(exc.code, int) else EXIT_OK
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


dispatch = main


if __name__ == "__main__":
    sys.exit(main())
