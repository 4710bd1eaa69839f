"""``xling`` command-line driver.

Stages read a JSON pipeline config and exchange files through a run
directory::

    reduced/<lang>.vec          normalized, reduced spaces (anchor, resource-rich)
    aligned/<lang>.vec          spaces mapped onto the anchor, plus <lang>.matrix.txt
    projected/<lang>.vec        dictionary projections of endangered languages,
                                plus <lang>.coverage.txt / .coverage.jsonl
    final/<lang>.vec            fine-tuned and re-aligned endangered spaces
    sentiment/                  model.xlsm and JSON reports
    manifest.json               config hash, versions, per-stage checksums
    metrics.jsonl               one JSON record per measured quantity

Exit codes: 0 success, 1 usage or configuration error, 2 data or format
error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import shutil
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .align import (REALIGN_ITERATIONS, RefinementConfig, SeedLexicon, align_supervised,
                    apply_alignment, load_seed_lexicon, save_matrix)
from .dict_project import build_endangered_embeddings, parse_dictionary_xml
from .dim_reduce import ReductionConfig, reduce
from .embed_store import (IDENTITY_POLICY, NormalizationPolicy, load_word2vec_text,
                          nearest_neighbors, normalize_vocab, save_word2vec_text)
from .errors import ConfigError, FormatError, XlingError
from .finetune import SkipGramConfig, parse_conllu, skipgram_finetune
from .sentiment import MODES, evaluate, load_corpus, load_model, save_model, train

log = logging.getLogger("xling")

ROLES = ("anchor", "resource-rich", "endangered")


# --------------------------------------------------------------------------
# configuration

@dataclass
class LanguageConfig:
    code: str
    role: str
    embeddings: Path | None = None
    normalization: NormalizationPolicy = IDENTITY_POLICY
    seed_lexicon: Path | None = None
    alignment: RefinementConfig | None = None
    dictionary: Path | None = None
    treebank: Path | None = None
    realign_to: str | None = None


@dataclass
class SentimentConfig:
    train: Path | None = None
    test: Path | None = None
    language: str | None = None
    train_language: str | None = None
    mode: str = "substitute"
    epochs: int = 30
    learning_rate: float = 0.1
    buckets: int = 2 ** 20
    bigram_keys: str = "source"


@dataclass
class PipelineConfig:
    languages: list[LanguageConfig]
    output_dir: Path
    rng_seed: int = 0
    reduction: ReductionConfig = field(default_factory=ReductionConfig)
    alignment: RefinementConfig = field(default_factory=RefinementConfig)
    realignment: RefinementConfig = field(
        default_factory=lambda: RefinementConfig(iterations=REALIGN_ITERATIONS))
    finetune: SkipGramConfig = field(default_factory=SkipGramConfig)
    sentiment: SentimentConfig = field(default_factory=SentimentConfig)
    config_sha256: str = ""

    @property
    def anchor(self) -> LanguageConfig:
        return next(lang for lang in self.languages if lang.role == "anchor")

    def by_role(self, *roles) -> list[LanguageConfig]:
        return [lang for lang in self.languages if lang.role in roles]

    def language(self, code) -> LanguageConfig:
        for lang in self.languages:
            if lang.code == code:
                return lang
        raise ConfigError(f"language {code!r} is not configured")


def _build(cls, data, where, **extra):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object")
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    try:
        return cls(**{**data, **extra})
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{where}: {e}") from None


def load_config(path, seed: int | None = None, out: str | None = None) -> PipelineConfig:
    path = Path(path)
    try:
        raw = path.read_bytes()
        doc = json.loads(raw.decode("utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ConfigError(f"{path}: invalid JSON ({e})") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")
    base = path.parent

    def p(value):
        return None if value is None else (base / value)

    allowed = {"languages", "output_dir", "rng_seed", "reduction", "alignment", "realignment",
               "finetune", "sentiment"}
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")

    languages = []
    codes = set()
    for i, entry in enumerate(doc.get("languages") or []):
        where = f"languages[{i}]"
        if not isinstance(entry, dict) or "code" not in entry or "role" not in entry:
            raise ConfigError(f"{where}: needs 'code' and 'role'")
        if entry["role"] not in ROLES:
            raise ConfigError(f"{where}: role must be one of {ROLES}")
        if entry["code"] in codes:
            raise ConfigError(f"{where}: duplicate language {entry['code']!r}")
        codes.add(entry["code"])
        entry = dict(entry)
        for key in ("embeddings", "seed_lexicon", "dictionary", "treebank"):
            entry[key] = p(entry.get(key))
        entry["normalization"] = _build(NormalizationPolicy, entry.get("normalization"),
                                        f"{where}.normalization")
        if entry.get("alignment") is not None:
            merged = {**(doc.get("alignment") or {}), **entry["alignment"]}
            entry["alignment"] = _build(RefinementConfig, merged, f"{where}.alignment")
        languages.append(_build(LanguageConfig, entry, where))

    anchors = [lang for lang in languages if lang.role == "anchor"]
    if len(anchors) != 1:
        raise ConfigError(f"exactly one anchor language required, found {len(anchors)}")
    for lang in languages:
        if lang.role != "endangered" and lang.embeddings is None:
            raise ConfigError(f"language {lang.code}: 'embeddings' path required")
        if lang.role == "endangered":
            if lang.dictionary is None:
                raise ConfigError(f"language {lang.code}: 'dictionary' path required")
            target = next((t for t in languages if t.code == lang.realign_to), None)
            if target is None or target.role == "endangered":
                raise ConfigError(f"language {lang.code}: 'realign_to' must name a configured "
                                  f"anchor or resource-rich language")

    finetune = dict(doc.get("finetune") or {})
    rng_seed = doc.get("rng_seed", 0) if seed is None else seed
    if not isinstance(rng_seed, int):
        raise ConfigError("rng_seed must be an integer")
    finetune["rng_seed"] = rng_seed
    realign = {"iterations": REALIGN_ITERATIONS, **(doc.get("realignment") or {})}
    output_dir = Path(out) if out is not None else p(doc.get("output_dir", "run"))

    config = PipelineConfig(
        languages=languages,
        output_dir=output_dir,
        rng_seed=rng_seed,
        reduction=_build(ReductionConfig, doc.get("reduction"), "reduction"),
        alignment=_build(RefinementConfig, doc.get("alignment"), "alignment"),
        realignment=_build(RefinementConfig, realign, "realignment"),
        finetune=_build(SkipGramConfig, finetune, "finetune"),
        sentiment=_build(SentimentConfig, doc.get("sentiment"), "sentiment"),
        config_sha256=hashlib.sha256(raw).hexdigest(),
    )
    s = config.sentiment
    s.train, s.test = p(s.train), p(s.test)
    if s.mode not in MODES:
        raise ConfigError(f"sentiment.mode must be one of {MODES}")
    return config


def _require_files(*paths):
    for path in paths:
        if path is None:
            continue
        if not Path(path).is_file():
            raise ConfigError(f"required file {path} does not exist")


# --------------------------------------------------------------------------
# run directory bookkeeping

class RunDir:
    def __init__(self, config: PipelineConfig):
        self.root = Path(config.output_dir)
        self.config = config

    def path(self, stage, name) -> Path:
        return self.root / stage / name

    def vec(self, stage, code) -> Path:
        return self.path(stage, f"{code}.vec")

    def require(self, stage, code, hint):
        p = self.vec(stage, code)
        if not p.is_file():
            raise ConfigError(f"{p} is missing; run `xling {hint}` first")
        return p

    def stage_dir(self, stage) -> Path:
        d = self.root / stage
        d.mkdir(parents=True, exist_ok=True)
        return d

    def metric(self, **record):
        self.root.mkdir(parents=True, exist_ok=True)
        with open(self.root / "metrics.jsonl", "a", encoding="utf-8") as f:
            f.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")

    def record_stage(self, stage, files):
        manifest_path = self.root / "manifest.json"
        if manifest_path.is_file():
            manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        else:
            manifest = {}
        manifest["config_sha256"] = self.config.config_sha256
        manifest["rng_seed"] = self.config.rng_seed
        manifest["versions"] = {"xling": __version__, "numpy": np.__version__}
        manifest.setdefault("stages", {})[stage] = {
            str(Path(f).relative_to(self.root).as_posix()): _sha256(f) for f in sorted(files)
        }
        manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                                 encoding="utf-8")


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# --------------------------------------------------------------------------
# stages

def cmd_reduce(config: PipelineConfig, args=None) -> int:
    langs = config.by_role("anchor", "resource-rich")
    _require_files(*(lang.embeddings for lang in langs))
    run = RunDir(config)
    spaces = {}
    for lang in langs:
        emb = load_word2vec_text(lang.embeddings, lang.code)
        spaces[lang.code] = normalize_vocab(emb, lang.normalization)
    out_dir = run.stage_dir("reduced")
    written = []
    for code, emb in spaces.items():
        if emb.dim == config.reduction.target_dim:
            log.info("%s: already %d-dimensional, not reduced", code, emb.dim)
        reduced = reduce(emb, config.reduction)
        path = out_dir / f"{code}.vec"
        save_word2vec_text(reduced, path)
        written.append(path)
        run.metric(stage="reduce", language=code, input_dim=emb.dim, output_dim=reduced.dim,
                   lemmas=len(reduced), vectors=reduced.n_vectors)
        log.info("%s: %d lemmas -> %s", code, len(reduced), path)
    run.record_stage("reduce", written)
    return 0


def _normalized_seed(seed: SeedLexicon, src: LanguageConfig, trg: LanguageConfig) -> SeedLexicon:
    return SeedLexicon(tuple((src.normalization.apply(s), trg.normalization.apply(t))
                             for s, t in seed), src.code, trg.code)


def cmd_align(config: PipelineConfig, args=None) -> int:
    anchor = config.anchor
    rich = config.by_role("resource-rich")
    for lang in rich:
        if lang.seed_lexicon is None:
            raise ConfigError(f"language {lang.code}: 'seed_lexicon' path required for alignment")
    _require_files(*(lang.seed_lexicon for lang in rich))
    run = RunDir(config)
    anchor_path = run.require("reduced", anchor.code, "reduce")
    rich_paths = {lang.code: run.require("reduced", lang.code, "reduce") for lang in rich}

    target = load_word2vec_text(anchor_path, anchor.code)
    jobs = []
    for lang in rich:
        seed = _normalized_seed(load_seed_lexicon(lang.seed_lexicon, lang.code, anchor.code),
                                lang, anchor)
        jobs.append((lang, load_word2vec_text(rich_paths[lang.code], lang.code), seed))

    out_dir = run.stage_dir("aligned")
    written = [out_dir / f"{anchor.code}.vec", out_dir / f"{anchor.code}.matrix.txt"]
    shutil.copyfile(anchor_path, written[0])
    save_matrix(np.eye(target.dim), written[1])
    for lang, source, seed in jobs:
        result = align_supervised(source, target, seed, lang.alignment or config.alignment)
        vec_path = out_dir / f"{lang.code}.vec"
        mat_path = out_dir / f"{lang.code}.matrix.txt"
        save_word2vec_text(apply_alignment(source, result), vec_path)
        save_matrix(result.mapping, mat_path)
        written += [vec_path, mat_path]
        run.metric(stage="align", language=lang.code, target=anchor.code,
                   seed_pairs=result.seed_pairs_used,
                   induced_sizes=result.induced_lexicon_size_per_iteration)
        log.info("%s -> %s: %d seed pairs, %d refinements", lang.code, anchor.code,
                 result.seed_pairs_used, result.iterations_run)
    run.record_stage("align", written)
    return 0


def _aligned_spaces(config, run):
    spaces, policies = {}, {}
    for lang in config.by_role("anchor", "resource-rich"):
        spaces[lang.code] = load_word2vec_text(run.require("aligned", lang.code, "align"), lang.code)
        policies[lang.code] = lang.normalization
    return spaces, policies


def cmd_project(config: PipelineConfig, args=None) -> int:
    endangered = config.by_role("endangered")
    _require_files(*(lang.dictionary for lang in endangered))
    run = RunDir(config)
    for lang in config.by_role("anchor", "resource-rich"):
        run.require("aligned", lang.code, "align")
    spaces, policies = _aligned_spaces(config, run)
    results = []
    for lang in endangered:
        dictionary = parse_dictionary_xml(lang.dictionary)
        results.append((lang, *build_endangered_embeddings(dictionary, spaces, lang.code, policies)))
    out_dir = run.stage_dir("projected")
    written = []
    for lang, emb, report in results:
        paths = [out_dir / f"{lang.code}.vec", out_dir / f"{lang.code}.coverage.txt",
                 out_dir / f"{lang.code}.coverage.jsonl"]
        save_word2vec_text(emb, paths[0])
        paths[1].write_text(report.to_text(), encoding="utf-8")
        paths[2].write_text(report.to_jsonl(), encoding="utf-8")
        written += paths
        run.metric(stage="project", language=lang.code, lexemes=report.lexemes,
                   projected=report.projected, skipped=report.skipped)
        log.info("%s: projected %d of %d lexemes", lang.code, report.projected, report.lexemes)
    run.record_stage("project", written)
    return 0


def cmd_finetune_realign(config: PipelineConfig, args=None) -> int:
    endangered = config.by_role("endangered")
    _require_files(*(lang.dictionary for lang in endangered),
                   *(lang.treebank for lang in endangered))
    run = RunDir(config)
    projected = {lang.code: run.require("projected", lang.code, "project") for lang in endangered}
    for lang in endangered:
        run.require("aligned", lang.realign_to, "align")
    out_dir = run.stage_dir("final")
    written = []
    for lang in endangered:
        emb = load_word2vec_text(projected[lang.code], lang.code)
        if lang.treebank is not None:
            corpus = parse_conllu(lang.treebank)
            emb = skipgram_finetune(emb, corpus, config.finetune)
            log.info("%s: fine-tuned on %d sentences", lang.code, len(corpus))
        target_cfg = config.language(lang.realign_to)
        target = load_word2vec_text(run.vec("aligned", target_cfg.code), target_cfg.code)
        if config.realignment.iterations > 0:
            dictionary = parse_dictionary_xml(lang.dictionary)
            seed = SeedLexicon(tuple((s, target_cfg.normalization.apply(t))
                                     for s, t in dictionary.pairs(target_cfg.code)),
                               lang.code, target_cfg.code)
            result = align_supervised(emb, target, seed, config.realignment)
            mapping = result.mapping
            run.metric(stage="finetune", language=lang.code, target=target_cfg.code,
                       seed_pairs=result.seed_pairs_used,
                       induced_sizes=result.induced_lexicon_size_per_iteration)
        else:
            mapping = np.eye(emb.dim)
        vec_path = out_dir / f"{lang.code}.vec"
        mat_path = out_dir / f"{lang.code}.matrix.txt"
        save_word2vec_text(apply_alignment(emb, mapping), vec_path)
        save_matrix(mapping, mat_path)
        written += [vec_path, mat_path]
    run.record_stage("finetune", written)
    return 0


def _space_path(run: RunDir, lang: LanguageConfig) -> Path:
    if lang.role == "endangered":
        return run.require("final", lang.code, "finetune")
    return run.require("aligned", lang.code, "align")


def cmd_nn(config: PipelineConfig | None, args) -> int:
    if args.source_embeddings and args.target_embeddings:
        src_path, trg_path = Path(args.source_embeddings), Path(args.target_embeddings)
        _require_files(src_path, trg_path)
        src_code, trg_code = args.source or "src", args.target or "trg"
    else:
        if config is None:
            raise ConfigError("nn needs --config or both --source-embeddings and --target-embeddings")
        if not args.source or not args.target:
            raise ConfigError("nn needs --source and --target language codes")
        run = RunDir(config)
        src_path = _space_path(run, config.language(args.source))
        trg_path = _space_path(run, config.language(args.target))
        src_code, trg_code = args.source, args.target
    if args.query is None:
        raise ConfigError("nn needs --query")
    source = load_word2vec_text(src_path, src_code)
    target = source if trg_path == src_path else load_word2vec_text(trg_path, trg_code)
    query = source.mean_vector(args.query)
    if query is None:
        print(f"xling: {args.query!r} is out of vocabulary for {src_code}", file=sys.stderr)
        return 2
    hits = nearest_neighbors(target, query, args.k, metric=args.metric, source=source)
    print(f"# {args.query} ({src_code}) -> {trg_code}, metric={args.metric}")
    for rank, (lemma, score) in enumerate(hits, start=1):
        print(f"{rank}\t{lemma}\t{score:.4f}")
    return 0


def cmd_sentiment_train(config: PipelineConfig, args=None) -> int:
    s = config.sentiment
    if s.train is None:
        raise ConfigError("sentiment.train corpus path required")
    _require_files(s.train)
    run = RunDir(config)
    lang = config.language(s.train_language) if s.train_language else config.anchor
    emb_path = _space_path(run, lang)
    corpus = load_corpus(s.train)
    if not corpus:
        raise ConfigError(f"{s.train}: no positive/negative examples")
    emb = load_word2vec_text(emb_path, lang.code)
    model = train(corpus, emb, epochs=s.epochs, learning_rate=s.learning_rate,
                  rng_seed=config.rng_seed, buckets=s.buckets)
    out_dir = run.stage_dir("sentiment")
    model_path = out_dir / "model.xlsm"
    report_path = out_dir / "train_report.json"
    save_model(model, model_path)
    report = {"language": lang.code, "examples": len(corpus), "epochs": model.trained_epochs,
              "accuracy_trace": model.accuracy_trace}
    report_path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    final = model.accuracy_trace[-1] if model.accuracy_trace else float("nan")
    run.metric(stage="sentiment-train", language=lang.code, train_accuracy=final)
    print(f"trained {model.trained_epochs} epochs on {len(corpus)} examples; "
          f"training accuracy {final:.4f}")
    run.record_stage("sentiment-train", [model_path, report_path])
    return 0


def cmd_sentiment_eval(config: PipelineConfig, args) -> int:
    s = config.sentiment
    mode = getattr(args, "mode", None) or s.mode
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}")
    if s.test is None or s.language is None:
        raise ConfigError("sentiment.test and sentiment.language are required")
    _require_files(s.test)
    run = RunDir(config)
    model_path = run.path("sentiment", "model.xlsm")
    if not model_path.is_file():
        raise ConfigError(f"{model_path} is missing; run `xling sentiment-train` first")
    lang = config.language(s.language)
    source = load_word2vec_text(_space_path(run, lang), lang.code)
    anchor = load_word2vec_text(run.require("aligned", config.anchor.code, "align"),
                                config.anchor.code)
    dictionary, resources = None, None
    if mode == "boost":
        if lang.dictionary is None:
            raise ConfigError(f"boost mode needs a dictionary for {lang.code}")
        dictionary = parse_dictionary_xml(lang.dictionary)
        resources, _ = _aligned_spaces(config, run)
    test = load_corpus(s.test)
    if not test:
        raise FormatError(f"{s.test}: test set holds no positive/negative examples")
    model = load_model(model_path)
    report = evaluate(test, model, source, anchor, mode, dictionary, resources, s.bigram_keys)
    out_path = run.stage_dir("sentiment") / f"eval_{lang.code}_{mode}.json"
    out_path.write_text(json.dumps({"language": lang.code, "mode": mode,
                                    "accuracy": report.accuracy, "correct": report.correct,
                                    "total": report.total, "confusion": report.confusion},
                                   indent=2, sort_keys=True) + "\n", encoding="utf-8")
    run.metric(stage="sentiment-eval", language=lang.code, mode=mode, accuracy=report.accuracy)
    sys.stdout.write(report.to_text())
    run.record_stage(f"sentiment-eval-{lang.code}-{mode}", [out_path])
    return 0


COMMANDS = {
    "reduce": cmd_reduce,
    "align": cmd_align,
    "project": cmd_project,
    "finetune": cmd_finetune_realign,
    "nn": cmd_nn,
    "sentiment-train": cmd_sentiment_train,
    "sentiment-eval": cmd_sentiment_eval,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="xling", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"xling {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=name != "nn", help="pipeline JSON config")
        cmd.add_argument("--seed", type=int, help="override rng_seed")
        cmd.add_argument("--out", help="override output_dir")
        cmd.add_argument("-v", "--verbose", action="store_true")
        if name == "nn":
            cmd.add_argument("--query", required=True)
            cmd.add_argument("--source", help="language code of the query")
            cmd.add_argument("--target", help="language code to search")
            cmd.add_argument("--source-embeddings")
            cmd.add_argument("--target-embeddings")
            cmd.add_argument("--k", type=int, default=3)
            cmd.add_argument("--metric", choices=("cosine", "csls"), default="cosine")
        if name == "sentiment-eval":
            cmd.add_argument("--mode", choices=MODES)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        config = load_config(args.config, args.seed, args.out) if args.config else None
        if args.command == "nn" and args.k < 1:
            raise ConfigError("--k must be positive")
        return COMMANDS[args.command](config, args)
    except XlingError as e:
        print(f"xling: {e}", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        print(f"xling: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
