"""Command-line pipeline driver.

Subcommands cover the path from raw documents to figures: ``ingest`` builds
the term-document matrix and design table, ``anchors`` and ``fit`` run the
factorization, ``regress`` estimates covariate effects, ``simulate`` runs
the synthetic recovery study, and ``report`` renders the delimited outputs
to PNG. Every run writes a ``manifest.json`` recording the command, a hash
of the effective configuration, the seed, the input paths, the tool version,
and per-stage timings in milliseconds.

Option values resolve as: command-line flags > ``--config`` JSON file >
built-in defaults. Exit codes: 0 success, 2 usage or input validation
failure, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import __version__
from .anchors import AnchorSet, select_anchors
from .corpus import (
    DesignMatrix,
    PreprocessConfig,
    TermDocumentMatrix,
    build_design,
    build_tdm,
    load_documents_csv,
    load_documents_jsonl,
    load_tdm,
    preprocess,
    save_tdm,
)
from .factorize import fit as fit_model
from .factorize import load_model, save_model
from .nnls import NnlsError
from .regress import (
    MODE_DOCUMENT,
    beta_fit,
    bootstrap_effects,
    normalize_prevalence,
    predict_beta,
    wald_summary,
)
from .report import render_interval_plot, render_mse_plot
from .simulate import make_config, run_study, write_mse_table_csv, write_results_csv


# ---------------------------------------------------------------------------
# run plumbing: config merging, hashing, manifests, stage timers


class _StageTimer:
    def __init__(self):
        self.timings_ms = {}

    @contextmanager
    def stage(self, name):
        start = time.perf_counter()
        yield
        self.timings_ms[name] = round((time.perf_counter() - start) * 1000.0, 3)


def _read_json_object(path):
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as err:
        raise ValueError(f"{path}: invalid JSON ({err})") from None
    if not isinstance(payload, dict):
        raise ValueError(f"{path}: config must be a JSON object")
    return payload


def _effective_config(args, defaults):
    """Merge defaults, the optional JSON config file, and explicit flags."""
    merged = dict(defaults)
    config_path = getattr(args, "config", None)
    if config_path:
        loaded = _read_json_object(config_path)
        unknown = sorted(set(loaded) - set(defaults))
        if unknown:
            raise ValueError(
                f"{config_path}: unknown config key(s): {', '.join(unknown)}"
            )
        merged.update(loaded)
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    return merged


def _config_hash(config):
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _write_manifest(directory, command, config, seed, inputs, timer):
    payload = {
        "command": command,
        "config_hash": _config_hash(config),
        "config": config,
        "seed": seed,
        "inputs": {name: str(path) for name, path in inputs.items() if path},
        "version": __version__,
        "timings_ms": timer.timings_ms,
    }
    path = Path(directory) / "manifest.json"
    _write_json(path, payload)
    return path


def _finite_or_none(value):
    """Map non-finite floats to None so payloads stay valid strict JSON."""
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _finite_or_none(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_finite_or_none(v) for v in value]
    return value


def _write_json(path, payload):
    Path(path).write_text(
        json.dumps(_finite_or_none(payload), indent=2, sort_keys=True, allow_nan=False)
        + "\n",
        encoding="utf-8",
    )


def _resolve_threads(value):
    if value is not None:
        return max(1, int(value))
    env = os.environ.get("BRETT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"BRETT_THREADS must be an integer, got {env!r}") from None
    return 1


def _ensure_dir(path):
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    return path


# ---------------------------------------------------------------------------
# shared file formats


def _write_design_csv(design: DesignMatrix, path):
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["doc_id", *design.column_names])
        for doc_id, row in zip(design.doc_ids, design.Z):
            writer.writerow([doc_id, *(repr(float(v)) for v in row)])


def _read_design_csv(path):
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty design file") from None
        if not header or header[0] != "doc_id" or len(header) < 2:
            raise ValueError(f"{path}: header must be doc_id followed by column names")
        names = tuple(header[1:])
        ids, rows = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}:{lineno}: expected {len(header)} fields")
            ids.append(row[0])
            try:
                rows.append([float(v) for v in row[1:]])
            except ValueError as err:
                raise ValueError(f"{path}:{lineno}: {err}") from None
    if not rows:
        raise ValueError(f"{path}: no design rows")
    return DesignMatrix(np.asarray(rows), names, tuple(ids))


def _load_anchorset(path):
    payload = _read_json_object(path)
    try:
        entries = sorted(payload["anchors"], key=lambda e: e["order"])
        indices = tuple(int(e["index"]) for e in entries)
        residuals = tuple(
            float(e["residual"]) for e in entries if e.get("residual") is not None
        )
    except (KeyError, TypeError) as err:
        raise ValueError(f"{path}: malformed anchors file ({err})") from None
    return AnchorSet(
        indices=indices,
        excluded_terms=frozenset(payload.get("excluded_terms", ())),
        pick_residuals=residuals,
    )


def _level_labels(Z, names):
    """Describe each unique design row by its non-intercept entries."""
    keep = [k for k, name in enumerate(names) if name != "intercept"]
    labels = []
    for row in Z:
        if not keep:
            labels.append("all")
            continue
        parts = []
        for k in keep:
            value = row[k]
            text = str(int(value)) if float(value).is_integer() else f"{value:g}"
            parts.append(f"{names[k]}={text}")
        labels.append(", ".join(parts))
    return labels


# ---------------------------------------------------------------------------
# ingest


_INGEST_DEFAULTS = {
    "format": None,
    "covariates": [],
    "contrasts": "treatment",
    "baselines": {},
    "min_term_count": 1,
    "stopwords": None,
    "lowercase": True,
}


def cmd_ingest(args):
    config = _effective_config(args, _INGEST_DEFAULTS)
    if args.no_lowercase:
        config["lowercase"] = False
    if isinstance(config["covariates"], str):
        config["covariates"] = [c for c in config["covariates"].split(",") if c]
    if isinstance(config["baselines"], list):
        pairs = {}
        for item in config["baselines"]:
            name, sep, level = item.partition("=")
            if not sep or not name:
                raise ValueError(f"--baseline expects NAME=LEVEL, got {item!r}")
            pairs[name] = level
        config["baselines"] = pairs

    fmt = config["format"]
    if fmt is None:
        suffix = Path(args.docs).suffix.lower()
        fmt = {"jsonl": "jsonl", "json": "jsonl", "csv": "csv"}.get(suffix.lstrip("."))
    if fmt not in ("jsonl", "csv"):
        raise ValueError(f"cannot infer input format from {args.docs!r}; pass --format")
    config["format"] = fmt

    timer = _StageTimer()
    with timer.stage("read"):
        loader = load_documents_jsonl if fmt == "jsonl" else load_documents_csv
        docs = loader(args.docs)
        if not docs:
            raise ValueError(f"{args.docs}: no documents")
    with timer.stage("preprocess"):
        stopwords = ()
        if config["stopwords"]:
            stopwords = Path(config["stopwords"]).read_text(encoding="utf-8").split()
        pre = PreprocessConfig(lowercase=config["lowercase"], stopwords=frozenset(stopwords))
        cleaned = preprocess(docs, pre)
    with timer.stage("build"):
        tdm = build_tdm(cleaned, min_term_count=config["min_term_count"])
        design = build_design(
            cleaned, config["covariates"], contrasts=config["contrasts"],
            baselines=config["baselines"],
        )
    out_dir = _ensure_dir(args.out_dir)
    with timer.stage("write"):
        save_tdm(tdm, out_dir)
        _write_design_csv(design, out_dir / "design.csv")
    _write_manifest(
        out_dir, "ingest", config, None,
        {"docs": args.docs, "stopwords": config["stopwords"]}, timer,
    )
    print(
        f"ingested {len(tdm.doc_ids)} documents, {len(tdm.vocabulary)} terms -> {out_dir}"
    )


# ---------------------------------------------------------------------------
# anchors


_ANCHORS_DEFAULTS = {"num_topics": None, "exclude_terms": None}


def cmd_anchors(args):
    config = _effective_config(args, _ANCHORS_DEFAULTS)
    if config["num_topics"] is None:
        raise ValueError("--num-topics is required")
    timer = _StageTimer()
    with timer.stage("load"):
        tdm = load_tdm(args.data)
        excluded = ()
        if config["exclude_terms"]:
            excluded = Path(config["exclude_terms"]).read_text(encoding="utf-8").split()
    with timer.stage("select"):
        anchors = select_anchors(tdm, config["num_topics"], excluded_terms=excluded)
    out_dir = _ensure_dir(args.out_dir)
    with timer.stage("write"):
        payload = {
            "anchors": [
                {
                    "term": tdm.vocabulary[idx],
                    "index": int(idx),
                    "order": order,
                    "residual": float(anchors.pick_residuals[order]),
                }
                for order, idx in enumerate(anchors.indices)
            ],
            "excluded_terms": sorted(anchors.excluded_terms),
        }
        _write_json(out_dir / "anchors.json", payload)
    _write_manifest(
        out_dir, "anchors", config, None,
        {"data": args.data, "exclude_terms": config["exclude_terms"]}, timer,
    )
    terms = ", ".join(tdm.vocabulary[i] for i in anchors.indices)
    print(f"selected {len(anchors.indices)} anchors: {terms}")


# ---------------------------------------------------------------------------
# fit


_FIT_DEFAULTS = {"num_topics": None, "anchors": None}


def cmd_fit(args):
    config = _effective_config(args, _FIT_DEFAULTS)
    if config["num_topics"] is None and config["anchors"] is None:
        raise ValueError("pass --num-topics or a precomputed --anchors file")
    timer = _StageTimer()
    with timer.stage("load"):
        tdm = load_tdm(args.tdm)
    with timer.stage("anchors"):
        if config["anchors"] is not None:
            anchors = _load_anchorset(config["anchors"])
        else:
            anchors = select_anchors(tdm, config["num_topics"])
    with timer.stage("fit"):
        model, fit_report = fit_model(tdm, anchors)
    out_dir = _ensure_dir(args.out)
    with timer.stage("write"):
        save_model(model, out_dir)
        _write_json(
            out_dir / "fit_report.json",
            {
                "frobenius_residual": fit_report.frobenius_residual,
                "relative_residual": fit_report.relative_residual,
                "nnls_iterations_total": fit_report.nnls_iterations_total,
                "nnls_iterations_max": fit_report.nnls_iterations_max,
                "empty_documents": list(fit_report.empty_documents),
            },
        )
    _write_manifest(
        out_dir, "fit", config, None,
        {"tdm": args.tdm, "anchors": config["anchors"]}, timer,
    )
    print(
        f"fitted {model.n_topics} topics on {len(tdm.vocabulary)}x{len(tdm.doc_ids)}; "
        f"relative residual {fit_report.relative_residual:.3e}"
    )


# ---------------------------------------------------------------------------
# regress


_REGRESS_DEFAULTS = {
    "method": "ols-bootstrap",
    "topic": None,
    "boot": 2000,
    "alpha": 0.05,
    "seed": 0,
    "precision_link": "log",
    "drop_zero_docs": False,
}


def _resolve_topic(model, text):
    if text is None:
        return None
    if text.lstrip("-").isdigit():
        index = int(text)
        if not 0 <= index < model.n_topics:
            raise ValueError(f"topic index {index} out of range [0, {model.n_topics})")
        return index
    if text in model.anchor_terms:
        return model.anchor_terms.index(text)
    raise ValueError(
        f"unknown topic {text!r}; anchor terms are: {', '.join(model.anchor_terms)}"
    )


def _bootstrap_outputs(model, design, config):
    # the anchor rows of the original matrix are recovered from the stored
    # factor scaled back by the anchor weights
    block = model.lambdas[:, None] * model.theta
    block_tdm = TermDocumentMatrix(
        sp.csr_matrix(block), tuple(model.anchor_terms), tuple(model.doc_ids)
    )
    anchors = AnchorSet(indices=tuple(range(model.n_topics)))
    result = bootstrap_effects(
        block_tdm, anchors, design,
        n_boot=config["boot"], alpha=config["alpha"], seed=config["seed"],
    )

    has_interval = result.lower is not None
    coefficients = []
    for t, label in enumerate(result.topic_labels):
        for p, name in enumerate(result.coefficient_names):
            lower = float(result.lower[p, t]) if has_interval else None
            upper = float(result.upper[p, t]) if has_interval else None
            if has_interval:
                flag = "NS" if lower <= 0.0 <= upper else ""
            else:
                flag = None  # point estimates only, no test
            coefficients.append(
                {
                    "topic": label,
                    "coefficient": name,
                    "estimate": float(result.point_estimate[p, t]),
                    "se": float(result.draws[:, p, t].std(ddof=1)) if config["boot"] > 1 else None,
                    "lower": lower,
                    "upper": upper,
                    "flag": flag,
                }
            )

    Z, names = design.Z, design.column_names
    profiles = np.unique(Z, axis=0)
    labels = _level_labels(profiles, names)
    plot_rows = []
    for label, row in zip(labels, profiles):
        fitted = row @ result.point_estimate  # per-topic fitted prevalence
        if has_interval:
            draws = np.einsum("bpt,p->bt", result.draws, row)
            lo = np.percentile(draws, 100.0 * config["alpha"] / 2.0, axis=0)
            hi = np.percentile(draws, 100.0 * (1.0 - config["alpha"] / 2.0), axis=0)
        else:
            lo = hi = None
        for t, topic in enumerate(result.topic_labels):
            plot_rows.append(
                [
                    topic,
                    label,
                    repr(float(fitted[t])),
                    "" if lo is None else repr(float(lo[t])),
                    "" if hi is None else repr(float(hi[t])),
                ]
            )
    return coefficients, plot_rows, {"n_resampled": result.n_resampled}


def _beta_outputs(model, design, topic_index, config):
    prevalence = normalize_prevalence(model.theta, MODE_DOCUMENT)
    result = beta_fit(
        prevalence, design, topic=topic_index,
        precision_link=config["precision_link"],
        drop_zero_columns=config["drop_zero_docs"],
    )
    label = model.anchor_terms[topic_index]
    coefficients = [{"topic": label, **row} for row in wald_summary(result, config["alpha"])]

    Z, names = design.Z, design.column_names
    profiles = np.unique(Z, axis=0)
    labels = _level_labels(profiles, names)
    mean, lower, upper = predict_beta(result, profiles, level=1.0 - config["alpha"])
    mean, lower, upper = np.atleast_1d(mean), np.atleast_1d(lower), np.atleast_1d(upper)
    plot_rows = [
        [label, lv, repr(float(m)), repr(float(lo)), repr(float(hi))]
        for lv, m, lo, hi in zip(labels, mean, lower, upper)
    ]
    extra = {"converged": result.converged, "log_likelihood": result.log_likelihood}
    return coefficients, plot_rows, extra


def cmd_regress(args):
    config = _effective_config(args, _REGRESS_DEFAULTS)
    if config["topic"] is not None:
        config["topic"] = str(config["topic"])
    if config["method"] not in ("ols-bootstrap", "beta"):
        raise ValueError(f"unknown method {config['method']!r}")
    timer = _StageTimer()
    with timer.stage("load"):
        model = load_model(args.model)
        design = _read_design_csv(args.design)
        if design.doc_ids != model.doc_ids:
            raise ValueError("design doc_ids do not match the model's document order")
    topic_index = _resolve_topic(model, config["topic"])
    with timer.stage("estimate"):
        if config["method"] == "ols-bootstrap":
            coefficients, plot_rows, extra = _bootstrap_outputs(model, design, config)
            if topic_index is not None:
                label = model.anchor_terms[topic_index]
                coefficients = [c for c in coefficients if c["topic"] == label]
                plot_rows = [r for r in plot_rows if r[0] == label]
        else:
            if topic_index is None:
                raise ValueError("the beta method needs --topic (anchor term or index)")
            coefficients, plot_rows, extra = _beta_outputs(model, design, topic_index, config)
    out_dir = _ensure_dir(args.out_dir)
    with timer.stage("write"):
        _write_json(
            out_dir / "effects.json",
            {
                "method": config["method"],
                "alpha": config["alpha"],
                "n_boot": config["boot"] if config["method"] == "ols-bootstrap" else None,
                "coefficients": coefficients,
                **extra,
            },
        )
        with open(out_dir / "plot_data.csv", "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["topic", "level", "estimate", "lower", "upper"])
            writer.writerows(plot_rows)
    _write_manifest(
        out_dir, "regress", config, config["seed"],
        {"model": args.model, "design": args.design}, timer,
    )
    print(f"wrote {len(coefficients)} coefficient rows -> {out_dir / 'effects.json'}")


# ---------------------------------------------------------------------------
# simulate


_SIMULATE_DEFAULTS = {
    "n_terms": 200,
    "n_topics": 4,
    "doc_grid": [50, 100],
    "words_grid": [500, 2000],
    "n_replicates": 100,
    "effect_coefficients": [0.0, 0.75],
    "allocation_precision": 500.0,
    "anchor_weights": None,
    "background_share": 0.5,
    "zipf_exponent": 0.0,
    "seed": 0,
}

_FULL_GRID_OVERRIDES = {
    "n_terms": 1000,
    "doc_grid": [100, 500, 1000],
    "words_grid": [1000, 5000, 10000, 15000, 25000],
    "n_replicates": 1000,
}


def cmd_simulate(args):
    defaults = dict(_SIMULATE_DEFAULTS)
    if args.full_grid:
        defaults.update(_FULL_GRID_OVERRIDES)
        print(
            "warning: --full-grid runs 1000 replicates at up to 25000 words/document; "
            "this is a long batch job",
            file=sys.stderr,
        )
    config = _effective_config(args, defaults)
    threads = _resolve_threads(args.threads)
    timer = _StageTimer()
    with timer.stage("configure"):
        study = make_config(
            n_terms=config["n_terms"],
            n_topics=config["n_topics"],
            doc_grid=config["doc_grid"],
            words_grid=config["words_grid"],
            n_replicates=config["n_replicates"],
            effect_coefficients=tuple(config["effect_coefficients"]),
            allocation_precision=config["allocation_precision"],
            anchor_weights=config["anchor_weights"],
            background_share=config["background_share"],
            zipf_exponent=config["zipf_exponent"],
            seed=config["seed"],
        )
    with timer.stage("run"):
        result = run_study(study, threads=threads)
    out_path = Path(args.out)
    _ensure_dir(out_path.parent)
    with timer.stage("write"):
        write_results_csv(result, out_path)
        write_mse_table_csv(result, out_path.parent / "mse_table.csv")
    _write_manifest(
        out_path.parent, "simulate", config, config["seed"],
        {"config": getattr(args, "config", None)}, timer,
    )
    print(
        f"wrote {len(result.rows)} replicate rows -> {out_path}; "
        f"mse table -> {out_path.parent / 'mse_table.csv'}"
    )


# ---------------------------------------------------------------------------
# report


def cmd_report(args):
    if not args.mse_table and not args.plot_data:
        raise ValueError("pass --mse-table and/or --plot-data")
    out_dir = _ensure_dir(args.out_dir)
    timer = _StageTimer()
    written = []
    with timer.stage("render"):
        if args.mse_table:
            written.append(render_mse_plot(args.mse_table, out_dir / "mse_vs_words.png"))
        if args.plot_data:
            written.append(
                render_interval_plot(args.plot_data, out_dir / "predicted_shares.png")
            )
    config = {"mse_table": args.mse_table, "plot_data": args.plot_data}
    _write_manifest(
        out_dir, "report", config, None,
        {"mse_table": args.mse_table, "plot_data": args.plot_data}, timer,
    )
    print("wrote " + ", ".join(str(p) for p in written))


# ---------------------------------------------------------------------------
# parser


def build_parser():
    parser = argparse.ArgumentParser(
        prog="brett",
        description="Anchor-word topic factorization with covariate-effect inference.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("ingest", help="build a term-document matrix and design table")
    p.add_argument("--docs", required=True, help="JSONL or CSV document file")
    p.add_argument("--format", choices=("jsonl", "csv"), help="input format (default: by extension)")
    p.add_argument("--covariates", help="comma-separated covariate field names")
    p.add_argument("--contrasts", choices=("treatment", "sum_to_zero"))
    p.add_argument(
        "--baseline", dest="baselines", action="append", metavar="NAME=LEVEL",
        help="baseline level for a categorical covariate (repeatable)",
    )
    p.add_argument("--min-count", dest="min_term_count", type=int, help="drop rarer terms")
    p.add_argument("--stopwords", help="file with one stopword per line")
    p.add_argument("--no-lowercase", action="store_true", help="keep original casing")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--out-dir", required=True, help="output directory")
    p.set_defaults(handler=cmd_ingest)

    p = sub.add_parser("anchors", help="select anchor terms from an ingested matrix")
    p.add_argument("--data", required=True, help="ingest output directory")
    p.add_argument("--num-topics", dest="num_topics", type=int)
    p.add_argument("--exclude-terms", dest="exclude_terms", help="file of terms to skip")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--out-dir", required=True, help="output directory")
    p.set_defaults(handler=cmd_anchors)

    p = sub.add_parser("fit", help="factorize an ingested matrix into topics")
    p.add_argument("--tdm", required=True, help="ingest output directory")
    p.add_argument("--num-topics", dest="num_topics", type=int)
    p.add_argument("--anchors", help="precomputed anchors.json (skips selection)")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--out", required=True, help="model output directory")
    p.set_defaults(handler=cmd_fit)

    p = sub.add_parser("regress", help="estimate covariate effects from a fitted model")
    p.add_argument("--model", required=True, help="model directory from `brett fit`")
    p.add_argument("--design", required=True, help="design.csv from `brett ingest`")
    p.add_argument("--method", choices=("ols-bootstrap", "beta"))
    p.add_argument("--topic", help="anchor term or topic index (required for beta)")
    p.add_argument("--boot", type=int, help="bootstrap draws (0 = point estimates only)")
    p.add_argument("--alpha", type=float, help="interval tail mass (default 0.05)")
    p.add_argument("--seed", type=int)
    p.add_argument("--precision-link", dest="precision_link", choices=("log", "logit"))
    p.add_argument(
        "--drop-zero-docs", action="store_true", default=None,
        help="drop documents with no topic mass instead of squeezing",
    )
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--out-dir", required=True, help="output directory")
    p.set_defaults(handler=cmd_regress)

    p = sub.add_parser("simulate", help="run the synthetic effect-recovery study")
    p.add_argument("--config", help="JSON config file with generator settings")
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int, help="worker threads (default: BRETT_THREADS or 1)")
    p.add_argument(
        "--full-grid", action="store_true",
        help="use the large corpus grid (1000 replicates; long batch job)",
    )
    p.add_argument("--out", required=True, help="results CSV path")
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("report", help="render delimited outputs to PNG figures")
    p.add_argument("--mse-table", dest="mse_table", help="mse_table.csv from `brett simulate`")
    p.add_argument("--plot-data", dest="plot_data", help="plot_data.csv from `brett regress`")
    p.add_argument("--out-dir", required=True, help="output directory")
    p.set_defaults(handler=cmd_report)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = getattr(args, "handler", None)
    if handler is None:
        parser.print_help(sys.stderr)
        return 2
    try:
        handler(args)
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except (NnlsError, RuntimeError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
