"""Command-line entry point: ``hatescan <command> --config run.json``.

Exit codes: 0 success, 1 data/runtime error, 2 configuration error.
"""

from __future__ import annotations

import argparse
import datetime as dt
import hashlib
import json
import logging
import sys
from dataclasses import dataclass, field as dc_field, replace
from pathlib import Path

from . import augment as aug
from .corpus import (
    LabeledComment,
    SentimentLabel,
    dump_csv,
    label_summary,
    load_comments,
    load_labeled_jsonl,
    load_labels,
    make_folds,
    select,
    source_summary,
    stratified_split,
    write_comments,
    write_labeled_jsonl,
)
from .errors import ConfigError, HatescanError
from .evaluation import cross_validate, evaluate_model
from .features import FeatureConfig, fit_vocabulary
from .fieldscan import aggregate_by_source, aggregate_weekly, apply_models, emit_reports, term_frequencies
from .linmodels import (
    DEFAULT_C_GRID,
    LbfgsConfig,
    LrConfig,
    OvrModel,
    SvmConfig,
    TrainSpec,
    fit_pipeline,
    load_model,
    save_model,
    train_fingerprint,
    tune_svm_c,
)
from .textprep import LanguageFilter, PipelineConfig, clean_corpus, preprocess

log = logging.getLogger("hatescan")

FORMAT_VERSION = 1


@dataclass
class RunConfig:
    seed: int = 0
    paths: dict = dc_field(default_factory=dict)
    pipeline: dict = dc_field(default_factory=dict)
    features: dict = dc_field(default_factory=dict)
    lr: dict = dc_field(default_factory=dict)
    lbfgs: dict = dc_field(default_factory=dict)
    svm: dict = dc_field(default_factory=dict)
    eval: dict = dc_field(default_factory=dict)
    field: dict = dc_field(default_factory=dict)
    augment: dict = dc_field(default_factory=dict)
    base_dir: Path = Path(".")

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except OSError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc.msg})") from None
        known = {"seed", "paths", "pipeline", "features", "lr", "lbfgs", "svm", "eval", "field", "augment"}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"{path}: unknown config section(s) {sorted(unknown)}")
        return cls(**raw, base_dir=path.parent)

    # -- paths
    def path(self, key: str, required: bool = True, must_exist: bool = True) -> Path | None:
        value = self.paths.get(key)
        if value is None:
            if required:
                raise ConfigError(f"config is missing paths.{key}")
            return None
        p = Path(value)
        p = p if p.is_absolute() else self.base_dir / p
        if must_exist and not p.exists():
            raise ConfigError(f"paths.{key} does not exist: {p}")
        return p

    @property
    def output_dir(self) -> Path:
        out = self.path("output_dir", required=False, must_exist=False) or self.base_dir / "out"
        out.mkdir(parents=True, exist_ok=True)
        return out

    # -- typed sections
    def pipeline_config(self) -> PipelineConfig:
        lf = LanguageFilter(
            stopword_hit_threshold=float(self.pipeline.get("stopword_hit_threshold", 0.05)),
            min_tokens=int(self.pipeline.get("min_tokens", 3)),
        )
        return PipelineConfig.from_files(
            stopwords=self.path("stopwords", required=False),
            negations=self.path("negations", required=False),
            lemmas=self.path("lemmas", required=False),
            language_filter=lf,
        )

    def train_spec(self, task: str, algo: str) -> TrainSpec:
        try:
            svm = {k: v for k, v in self.svm.items() if k != "grid"}
            return TrainSpec(
                task=task,
                algo=algo,
                features=FeatureConfig(**self.features),
                lr=LrConfig.from_dict({"seed": self.seed, **self.lr}),
                lbfgs=LbfgsConfig(**self.lbfgs),
                svm=SvmConfig(**{"seed": self.seed, **svm}),
            )
        except TypeError as exc:
            raise ConfigError(f"invalid model configuration: {exc}") from None

    def date(self, key: str, default: str) -> dt.date:
        try:
            return dt.date.fromisoformat(self.field.get(key, default))
        except ValueError:
            raise ConfigError(f"field.{key} is not an ISO date") from None


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(out: Path, command: str, cfg: RunConfig, outputs: list[Path], extra=None) -> None:
    doc = {
        "format_version": FORMAT_VERSION,
        "command": command,
        "seed": cfg.seed,
        "outputs": {p.name: _sha256(p) for p in outputs},
        **(extra or {}),
    }
    (out / f"{command}_manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n",
                                                  encoding="utf-8")


def _dump_json(path: Path, doc: dict) -> Path:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


# ---------------------------------------------------------------- data assembly

def _labeled_items(cfg: RunConfig, pcfg: PipelineConfig, task: str) -> list[LabeledComment]:
    """Scraped labeled comments that survive cleaning, plus configured augmented files."""
    corpus = load_comments(cfg.path("comments"))
    labeled = load_labels(cfg.path("labels"), corpus)
    kept, _ = clean_corpus(corpus, pcfg)
    kept_ids = {c.id for c in kept}
    items = [x for x in labeled if x.id in kept_ids]
    if len(items) < len(labeled):
        log.info("%d labeled comment(s) removed by cleaning", len(labeled) - len(items))
    for extra in cfg.paths.get("augmented", []) or []:
        p = Path(extra)
        p = p if p.is_absolute() else cfg.base_dir / p
        if not p.is_file():
            raise ConfigError(f"augmented file does not exist: {p}")
        items.extend(load_labeled_jsonl(p))
    return [x for x in items if x.label(task) is not None]


def _split(cfg: RunConfig, items, task):
    ev = cfg.eval
    return stratified_split(items, float(ev.get("split_ratio", 0.8)), task, cfg.seed,
                            bool(ev.get("include_augmented_in_test", False)))


# ---------------------------------------------------------------- commands

def cmd_prepare(cfg: RunConfig, args) -> int:
    pcfg = cfg.pipeline_config()
    corpus = load_comments(cfg.path("comments"))
    kept, drops = clean_corpus(corpus, pcfg)
    out = cfg.output_dir
    cleaned = out / "cleaned.jsonl"
    write_comments(kept, cleaned)
    drops_csv = out / "drops.csv"
    drops_csv.write_text(dump_csv([{"id": d.comment_id, "reason": d.reason, "detail": d.detail}
                                   for d in drops], ["id", "reason", "detail"]), encoding="utf-8")
    _write_manifest(out, "prepare", cfg, [cleaned, drops_csv],
                    {"kept": len(kept), "dropped": len(drops),
                     "pipeline_fingerprint": pcfg.fingerprint()})
    print(f"kept {len(kept)}, dropped {len(drops)}")
    return 0


def cmd_stats(cfg: RunConfig, args) -> int:
    corpus = load_comments(cfg.path("comments"))
    labeled = load_labels(cfg.path("labels"), corpus)
    doc = {
        "format_version": FORMAT_VERSION,
        "seed": cfg.seed,
        "n_comments": len(corpus),
        "n_labeled": len(labeled),
        "labels": label_summary(labeled),
        "sources": source_summary([x.comment for x in labeled]),
    }
    out = cfg.output_dir
    _dump_json(out / "stats.json", doc)
    for task in ("hate", "sentiment"):
        s = doc["labels"][task]
        print(f"{task} (n={s['n']}):")
        for lab, count in s["counts"].items():
            print(f"  {lab:<14}{count:>7}{s['percent'][lab]:>8.2f}%")
    print("sources:", ", ".join(f"{k} {v['n']} ({v['percent']:.2f}%)" for k, v in doc["sources"].items()))
    return 0


def cmd_train(cfg: RunConfig, args) -> int:
    task, algo = args.task, args.algo
    pcfg = cfg.pipeline_config()
    spec = cfg.train_spec(task, algo)
    items = _labeled_items(cfg, pcfg, task)
    plan = _split(cfg, items, task)
    train = select(items, plan.train_ids)
    docs = {x.id: preprocess(x.comment.raw_text, pcfg, x.id) for x in train}
    tuning = None
    if algo == "svm" and args.tune:
        grid = cfg.svm.get("grid", list(DEFAULT_C_GRID))
        best_c, table = tune_svm_c(train, docs, spec, grid, int(cfg.eval.get("k", 10)), cfg.seed)
        spec = replace(spec, svm=replace(spec.svm, c=best_c))
        tuning = {"grid": grid, "best_c": best_c, "table": table}
        for row in table:
            print(f"c={row['c']:<6} mean macro-F1 {row['mean_macro_f1']:.4f}")
        print(f"selected c={best_c}")
    train_docs = [docs[x.id] for x in train]
    vocab = fit_vocabulary(train_docs, spec.features)
    model = fit_pipeline(train_docs, [x.label(task) for x in train], spec, vocab,
                         pcfg.fingerprint(), train_fingerprint(plan.train_ids, cfg.seed))
    if tuning is not None:
        model = _with_config(model, tuning=tuning)
    out = cfg.output_dir
    model_path = out / f"model_{task}_{algo}.json"
    save_model(model, model_path)
    split_path = out / f"split_{task}.json"
    split_path.write_text(plan.to_json() + "\n", encoding="utf-8")
    _write_manifest(out, f"train_{task}_{algo}", cfg, [model_path, split_path])
    rep = evaluate_model(model, train_docs, [x.label(task) for x in train])
    status = "converged" if model.converged else "NOT converged (max_iter or stalled line search)"
    print(f"trained {task}/{algo} on {len(train)} items; {status}")
    print(f"training accuracy {rep.accuracy:.4f}")
    print(f"wrote {model_path.name}")
    return 0


def _with_config(model, **extra):
    if isinstance(model, OvrModel):
        return OvrModel({k: replace(m, config={**m.config, **extra}) for k, m in model.components.items()})
    return replace(model, config={**model.config, **extra})


def _spec_from_model(model, cfg: RunConfig) -> TrainSpec:
    conf = model.config
    spec = cfg.train_spec(model.task, model.algo)
    spec = replace(spec, features=model.features)
    if model.algo == "lr":
        spec = replace(spec, lr=LrConfig(**conf["lr"]), lbfgs=LbfgsConfig(**conf["lbfgs"]))
    else:
        spec = replace(spec, svm=SvmConfig(**conf["svm"]))
    return spec


def cmd_evaluate(cfg: RunConfig, args) -> int:
    model_path = Path(args.model)
    model = load_model(model_path)
    task = model.task
    pcfg = cfg.pipeline_config()
    if model.pipeline_fingerprint != pcfg.fingerprint():
        raise HatescanError("fingerprint mismatch: model was trained with a different text pipeline")
    items = _labeled_items(cfg, pcfg, task)
    plan = _split(cfg, items, task)
    if train_fingerprint(plan.train_ids, cfg.seed) != model.train_fingerprint:
        raise HatescanError("fingerprint mismatch: model was not trained on this split/seed")
    train, test = select(items, plan.train_ids), select(items, plan.test_ids)
    docs = {x.id: preprocess(x.comment.raw_text, pcfg, x.id) for x in items}
    threshold = args.threshold if args.threshold is not None else float(cfg.field.get("threshold", 0.5))
    test_rep = evaluate_model(model, [docs[x.id] for x in test], [x.label(task) for x in test], threshold)
    train_rep = evaluate_model(model, [docs[x.id] for x in train], [x.label(task) for x in train], threshold)
    spec = _spec_from_model(model, cfg)
    folds = make_folds(train, int(cfg.eval.get("k", 10)), task, cfg.seed)
    cv = cross_validate(train, docs, spec, folds, pcfg.fingerprint())

    out = cfg.output_dir / model_path.stem
    out.mkdir(parents=True, exist_ok=True)
    eval_path = _dump_json(out / "eval.json", {
        "format_version": FORMAT_VERSION,
        "seed": cfg.seed,
        "task": task,
        "algo": model.algo,
        "converged": model.converged,
        "training_accuracy": train_rep.accuracy,
        "test": test_rep.to_dict(),
        "cv": cv.to_dict(),
    })
    cv_path = out / "cv.csv"
    cv_path.write_text(cv.to_csv(), encoding="utf-8")
    _write_manifest(out, "evaluate", cfg, [eval_path, cv_path])
    print(f"{task}/{model.algo}: test accuracy {test_rep.accuracy:.4f}, macro-F1 {test_rep.macro_f1:.4f}, "
          f"training accuracy {train_rep.accuracy:.4f}")
    for cls, value in test_rep.auroc.items():
        print(f"  AUROC[{cls}] = {'n/a' if value is None else format(value, '.4f')}")
    print(f"  {folds.k}-fold CV: accuracy {cv.mean['accuracy']:.4f} +/- {cv.std['accuracy']:.4f}, "
          f"macro-F1 {cv.mean['macro_f1']:.4f}")
    if not model.converged:
        print("  warning: model did not meet its convergence tolerance")
    return 0


def cmd_field(cfg: RunConfig, args) -> int:
    pcfg = cfg.pipeline_config()
    hate_model = load_model(args.hate_model)
    sent_model = load_model(args.sentiment_model)
    if hate_model.task != "hate" or not isinstance(sent_model, OvrModel):
        raise ConfigError("field needs a hate model and a sentiment (one-vs-rest) model")
    corpus = load_comments(cfg.path("field_comments"))
    threshold = args.threshold if args.threshold is not None else float(cfg.field.get("threshold", 0.5))
    preds, drops = apply_models(corpus, hate_model, sent_model, pcfg, threshold)
    start = cfg.date("range_start", "2023-10-02")
    end = cfg.date("range_end", "2023-11-20")
    breakdown = aggregate_by_source(preds)
    series = aggregate_weekly(preds, start, end)
    freqs = term_frequencies(corpus, pcfg, int(cfg.field.get("top_n", 50)))
    out = cfg.output_dir / "field"
    emit_reports(breakdown, series, freqs, out, cfg.seed,
                 {"threshold": threshold, "scored": len(preds), "dropped": len(drops)})
    for msg in breakdown.notices:
        print(msg, file=sys.stderr)
    if series.out_of_range:
        print(f"{len(series.out_of_range)} prediction(s) outside {start}..{end} excluded", file=sys.stderr)
    for src, st in breakdown.per_source.items():
        shares = ", ".join(f"{k} {v:.1%}" for k, v in st.sentiment_shares.items())
        print(f"{src}: n={st.n} hate {st.hate_rate:.1%} / no hate {st.no_hate_rate:.1%}; {shares}")
    return 0


def cmd_augment(cfg: RunConfig, args) -> int:
    opts = cfg.augment
    pcfg = cfg.pipeline_config()
    store = None
    if args.live:
        store = aug.ReplayStore()
    else:
        store = aug.ReplayStore.load(cfg.path("replay_store"))
    out = cfg.output_dir
    if args.kind == "backtranslate":
        items = aug.load_hate_suite(cfg.path("hate_suite"))
        client = (aug.DeepLTranslationClient.from_env(store=store) if args.live
                  else aug.ReplayTranslationClient(store))
        result = aug.back_translate_corpus(items, client, opts.get("source_lang", "EN"),
                                           opts.get("target_lang", "DE"), bool(opts.get("round_trip", False)))
    else:
        client = aug.ChatGenerationClient.from_env(store=store) if args.live else aug.ReplayGenerationClient(store)
        specs = opts.get("generate") or []
        if not specs:
            raise ConfigError("augment.generate lists no generation requests")
        result = []
        for entry in specs:
            try:
                spec = aug.GenerationSpec(entry["template"], SentimentLabel(entry["label"]),
                                          int(entry["count"]), entry.get("model", "gpt-4"))
            except (KeyError, ValueError) as exc:
                raise ConfigError(f"invalid augment.generate entry {entry!r}: {exc}") from None
            result.extend(aug.generate_labeled(spec, client, pcfg))
    path = out / f"augmented_{args.kind}.jsonl"
    write_labeled_jsonl(result, path)
    outputs = [path]
    if args.live:
        rec = out / f"replay_{args.kind}.jsonl"
        store.save(rec)
        outputs.append(rec)
    _write_manifest(out, f"augment_{args.kind}", cfg, outputs, {"items": len(result)})
    print(f"wrote {len(result)} augmented item(s) to {path.name}")
    return 0


COMMANDS = {
    "prepare": cmd_prepare,
    "stats": cmd_stats,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "field": cmd_field,
    "augment": cmd_augment,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hatescan", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, help="run configuration (JSON)")
        p.add_argument("--seed", type=int, help="override the run seed")
        return p

    add("prepare", "clean the comment corpus and write a drop report")
    add("stats", "label and source distribution of the annotated set")
    p = add("train", "train a hate or sentiment model")
    p.add_argument("--task", choices=("hate", "sentiment"), required=True)
    p.add_argument("--algo", choices=("lr", "svm"), default="lr")
    p.add_argument("--tune", action="store_true", help="cross-validated sweep of the SVM c")
    p = add("evaluate", "held-out and cross-validated evaluation of a model")
    p.add_argument("--model", required=True)
    p.add_argument("--threshold", type=float)
    p = add("field", "score a field corpus and write aggregate reports")
    p.add_argument("--hate-model", required=True)
    p.add_argument("--sentiment-model", required=True)
    p.add_argument("--threshold", type=float)
    p = add("augment", "produce augmented training items")
    p.add_argument("--kind", choices=("backtranslate", "generate"), required=True)
    p.add_argument("--live", action="store_true", help="call the live services (needs credentials)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = RunConfig.load(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except HatescanError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
