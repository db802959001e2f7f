"""Command-line entry point: corrupt -> stats -> index -> train -> correct -> run -> eval -> report.

Option precedence is defaults < config file (--config, YAML) < environment
variables (RAGNOISE_*) < flags.  Every run command snapshots its effective
configuration next to its outputs.  Exit codes: 0 success, 1 validation
error, 2 runtime error; errors also emit one machine-readable JSON line on
stderr.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import yaml

from ragnoise import __version__, datakit, evalkit, pipelines, synthetic
from ragnoise.errors import RagNoiseError, TransportError, ValidationError
from ragnoise.genclient import ChatCompletionsClient, ExternalGenerator, StubGenerator
from ragnoise.pipelines import (
    ExternalCorrector,
    GroundedCorrector,
    PipelineConfig,
    load_prompt,
    run_qer_rag,
    run_quadrant,
    run_ra_qcg,
    run_standard_rag,
    save_run,
)
from ragnoise.retrieval import (
    DenseRetriever,
    LexicalRetriever,
    TrainConfig,
    build_lexical_index,
    build_training_set,
    create_model,
    embed_corpus,
    evaluate_recall,
    load_corpus,
    load_index,
    load_model,
    save_corpus,
    save_index,
    save_model,
    train_retriever,
)
from ragnoise.textnoise import CorruptionSpec


def _parse_weights(value: str) -> tuple[int, int, int]:
    parts = [int(v) for v in value.split(",")]
    if len(parts) != 3:
        raise click.BadParameter("expected three comma-separated integers, e.g. 3,1,1")
    return tuple(parts)  # type: ignore[return-value]


def _load_config_file(ctx: click.Context, param, value):
    """Flat YAML keys (matching option names) become defaults for every subcommand."""
    if value:
        data = yaml.safe_load(Path(value).read_text(encoding="utf-8")) or {}
        if not isinstance(data, dict):
            raise click.BadParameter("config file must be a flat YAML mapping")
        nested = {name: dict(data) for name in
                  ("corrupt", "stats", "synth", "correct", "run", "eval", "report", "sweep-k")}
        nested["index"] = {"build": dict(data)}
        nested["retriever"] = {"train": dict(data), "eval": dict(data)}
        ctx.default_map = nested
    return value


@click.group(context_settings={"auto_envvar_prefix": "RAGNOISE"})
@click.version_option(__version__)
@click.option("--config", type=click.Path(exists=True, dir_okay=False),
              callback=_load_config_file, expose_value=False, is_eager=True,
              help="YAML config file; flat keys become option defaults.")
def cli():
    """Toolkit for RAG benchmarks with typo-corrupted queries."""


@cli.command()
@click.option("--in", "in_path", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Clean dataset (JSONL).")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False),
              help="Corrupted dataset output path.")
@click.option("--rate", default=0.2, show_default=True, help="Fraction of queries to corrupt.")
@click.option("--seed", default=0, show_default=True, help="Corruption seed.")
@click.option("--word-select-prob", default=0.3, show_default=True)
@click.option("--char-corrupt-prob", default=0.3, show_default=True)
@click.option("--weights", default="3,1,1", show_default=True,
              help="spelling,keyboard,visual error-type weights.")
@click.option("--min-word-len", default=3, show_default=True)
@click.option("--sampling", type=click.Choice(["quota", "bernoulli"]), default="quota",
              show_default=True, help="Exact quotas or per-query Bernoulli draws.")
@click.option("--name", default=None, help="Dataset name recorded in the manifest.")
def corrupt(in_path, out_path, rate, seed, word_select_prob, char_corrupt_prob,
            weights, min_word_len, sampling, name):
    """Inject query entry errors into a dataset at an exact rate."""
    records = datakit.load_dataset(in_path)
    spec = CorruptionSpec(
        word_select_prob=word_select_prob, char_corrupt_prob=char_corrupt_prob,
        type_weights=_parse_weights(weights), seed=seed, min_word_len=min_word_len,
    )
    corrupted, manifest = datakit.corrupt_dataset(
        records, rate, spec, name=name or Path(out_path).stem, sampling=sampling,
    )
    datakit.save_dataset(corrupted, out_path, manifest=manifest)
    click.echo(json.dumps(manifest.counts))


@cli.command()
@click.option("--in", "in_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--as-json", is_flag=True, help="Emit machine-readable stats.")
def stats(in_path, as_json):
    """Average characters/words per query."""
    s = datakit.compute_stats(datakit.load_dataset(in_path))
    if as_json:
        click.echo(json.dumps({
            "n_queries": s.n_queries,
            "avg_chars_per_query": s.avg_chars_per_query,
            "avg_words_per_query": s.avg_words_per_query,
        }))
    else:
        click.echo(f"queries:         {s.n_queries}")
        click.echo(f"avg chars/query: {s.avg_chars_per_query:.2f}")
        click.echo(f"avg words/query: {s.avg_words_per_query:.2f}")


@cli.command()
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
@click.option("--seed", default=11, show_default=True)
@click.option("--groups", default=17, show_default=True)
@click.option("--group-size", default=6, show_default=True)
@click.option("--hubs", default=3, show_default=True)
@click.option("--distractors", default=30, show_default=True)
@click.option("--queries", default=100, show_default=True)
def synth(out_dir, seed, groups, group_size, hubs, distractors, queries):
    """Materialize the synthetic corpus, clean queries and positives map."""
    world = synthetic.build_world(seed=seed, n_groups=groups, group_size=group_size,
                                  n_hubs=hubs, n_distractors=distractors, n_queries=queries)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_corpus(world.corpus, out / "corpus.jsonl")
    datakit.save_dataset(world.queries, out / "queries.jsonl")
    (out / "positives.json").write_text(json.dumps(world.positives, indent=2) + "\n")
    click.echo(f"wrote {len(world.corpus)} docs, {len(world.queries)} queries to {out}")


@cli.group()
def index():
    """Lexical index operations."""


@index.command("build")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--k1", default=1.2, show_default=True)
@click.option("--b", default=0.75, show_default=True)
def index_build(corpus_path, out_path, k1, b):
    """Build and save a BM25 index."""
    idx = build_lexical_index(load_corpus(corpus_path), k1=k1, b=b)
    save_index(idx, out_path)
    click.echo(f"indexed {idx.n_docs} docs, {len(idx.postings)} terms")


@cli.group()
def retriever():
    """Dense retriever training and evaluation."""


@retriever.command("train")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--dataset", "dataset_path", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Training queries (clean and/or corrupted).")
@click.option("--positives", "positives_path", required=True, type=click.Path(exists=True, dir_okay=False),
              help="JSON map of query id -> positive doc id.")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--lr", default=2e-5, show_default=True)
@click.option("--batch-size", default=64, show_default=True)
@click.option("--epochs", default=1, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--dim", default=128, show_default=True)
@click.option("--buckets", default=2**18, show_default=True)
@click.option("--tau", default=0.05, show_default=True)
def retriever_train(corpus_path, dataset_path, positives_path, out_path, lr,
                    batch_size, epochs, seed, dim, buckets, tau):
    """Train the dense retriever with the contrastive objective."""
    corpus = load_corpus(corpus_path)
    records = datakit.load_dataset(dataset_path)
    positives = json.loads(Path(positives_path).read_text(encoding="utf-8"))
    examples = build_training_set(records, corpus, positives, seed=seed)
    model = create_model(seed=seed, dim=dim, n_buckets=buckets, tau=tau)
    trained, curve = train_retriever(
        model, examples, TrainConfig(lr=lr, batch_size=batch_size, epochs=epochs, seed=seed)
    )
    save_model(trained, out_path)
    click.echo(json.dumps({
        "steps": len(curve),
        "first_loss": curve[0] if curve else None,
        "final_loss": curve[-1] if curve else None,
    }))


@retriever.command("eval")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--dataset", "dataset_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--positives", "positives_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--model", "model_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--recall-at", default=3, show_default=True)
def retriever_eval(corpus_path, dataset_path, positives_path, model_path, recall_at):
    """Recall@k of a trained model, split by corrupted/clean queries."""
    corpus = load_corpus(corpus_path)
    records = datakit.load_dataset(dataset_path)
    positives = json.loads(Path(positives_path).read_text(encoding="utf-8"))
    model = load_model(model_path)
    emb = embed_corpus(model, corpus)
    click.echo(json.dumps(evaluate_recall(model, emb, records, positives, k=recall_at)))


def _make_retriever(kind, corpus, index_path, model_path):
    if kind == "lexical":
        idx = load_index(index_path) if index_path else build_lexical_index(corpus)
        return LexicalRetriever(idx)
    if not model_path:
        raise ValidationError("--model is required for the dense retriever")
    model = load_model(model_path)
    return DenseRetriever(model, embed_corpus(model, corpus))


@cli.command()
@click.option("--in", "in_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--retriever", "retriever_kind", type=click.Choice(["lexical", "dense"]),
              default="lexical", show_default=True)
@click.option("--index", "index_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Prebuilt BM25 index (default: build from corpus).")
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Dense model file (dense retriever only).")
@click.option("--k", default=3, show_default=True, help="Documents used as correction evidence.")
@click.option("--external", "external_url", default=None,
              help="Correct through a chat-completions endpoint instead of the grounded channel.")
@click.option("--gen-model", default="default", show_default=True,
              help="Model name sent to the external endpoint.")
def correct(in_path, corpus_path, out_path, retriever_kind, index_path, model_path,
            k, external_url, gen_model):
    """Correct each query using its retrieved evidence; writes a corrected dataset."""
    records = datakit.load_dataset(in_path)
    corpus = load_corpus(corpus_path)
    search = _make_retriever(retriever_kind, corpus, index_path, model_path)
    by_id = {d.doc_id: d for d in corpus}
    if external_url:
        corrector = ExternalCorrector(
            client=ChatCompletionsClient(base_url=external_url, model=gen_model),
        )
    else:
        corrector = GroundedCorrector()
    n_changed = 0
    out_records = []
    for r in records:
        docs = [by_id[doc_id] for doc_id, _ in search.search(r.question, k)]
        result = corrector.correct(r.question, docs)
        n_changed += bool(result.changed)
        out_records.append(datakit.QueryRecord(
            id=r.id, question=result.corrected_query,
            golden_answers=r.golden_answers, corruption=r.corruption,
        ))
    datakit.save_dataset(out_records, out_path)
    click.echo(json.dumps({"queries": len(records), "changed": n_changed}))


def _build_pipeline_config(records, corpus, retriever_kind, index_path, model_path, k,
                           corrector_kind, generator_kind, endpoint, gen_model,
                           max_input_units, workers, single_stage):
    search = _make_retriever(retriever_kind, corpus, index_path, model_path)
    if generator_kind == "stub":
        generator = StubGenerator({r.id: list(r.golden_answers) for r in records})
    else:
        if not endpoint:
            raise ValidationError("--endpoint is required for the external generator")
        generator = ExternalGenerator(
            client=ChatCompletionsClient(base_url=endpoint, model=gen_model),
            prompt_template=load_prompt("generation.txt"),
        )
    corrector = None
    if corrector_kind == "grounded":
        corrector = GroundedCorrector()
    elif corrector_kind == "external":
        if not endpoint:
            raise ValidationError("--endpoint is required for the external corrector")
        corrector = ExternalCorrector(
            client=ChatCompletionsClient(base_url=endpoint, model=gen_model),
        )
    return PipelineConfig(
        retriever=search, generator=generator, corrector=corrector, k_docs=k,
        requery_after_correction=not single_stage, max_input_units=max_input_units,
        workers=workers,
    )


@cli.command()
@click.option("--dataset", "dataset_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
@click.option("--method", type=click.Choice(["standard", "qer", "raqcg", "quadrant"]),
              default="standard", show_default=True)
@click.option("--retriever", "retriever_kind", type=click.Choice(["lexical", "dense"]),
              default="lexical", show_default=True)
@click.option("--index", "index_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--k", default=3, show_default=True)
@click.option("--corrector", "corrector_kind", type=click.Choice(["none", "grounded", "external"]),
              default="none", show_default=True)
@click.option("--generator", "generator_kind", type=click.Choice(["stub", "external"]),
              default="stub", show_default=True)
@click.option("--endpoint", default=None, help="Chat-completions base URL for external paths.")
@click.option("--gen-model", default="default", show_default=True)
@click.option("--max-input-units", default=4096, show_default=True)
@click.option("--workers", default=1, show_default=True)
@click.option("--single-stage", is_flag=True,
              help="Generate from the first retrieval instead of re-retrieving after correction.")
@click.option("--seed", default=0, show_default=True, help="Recorded in the config snapshot.")
def run(dataset_path, corpus_path, out_dir, method, retriever_kind, index_path, model_path,
        k, corrector_kind, generator_kind, endpoint, gen_model, max_input_units, workers,
        single_stage, seed):
    """Run a pipeline over a dataset and write records + report."""
    records = datakit.load_dataset(dataset_path)
    corpus = load_corpus(corpus_path)
    snapshot = {
        "dataset": str(dataset_path), "corpus": str(corpus_path), "method": method,
        "retriever": retriever_kind, "index": index_path, "model": model_path, "k": k,
        "corrector": corrector_kind, "generator": generator_kind, "endpoint": endpoint,
        "gen_model": gen_model, "max_input_units": max_input_units, "workers": workers,
        "single_stage": single_stage, "seed": seed, "version": __version__,
    }
    if method == "quadrant":
        config = _build_pipeline_config(records, corpus, retriever_kind, index_path,
                                        model_path, k, "none", generator_kind, endpoint,
                                        gen_model, max_input_units, workers, single_stage)
        result = run_quadrant(records, corpus, config)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for case, case_records in result.records.items():
            report = result.reports[case]
            if report is not None:
                save_run(case_records, report, out / case.lower())
        (out / "config.json").write_text(json.dumps(snapshot, indent=2, sort_keys=True) + "\n")
        summary = {case: (r.overall["f1"] if r else None) for case, r in result.reports.items()}
        click.echo(json.dumps(summary))
        return

    needs_corrector = method == "raqcg"
    if needs_corrector and corrector_kind == "none":
        corrector_kind = "grounded"
    if not needs_corrector:
        corrector_kind = "none"
    config = _build_pipeline_config(records, corpus, retriever_kind, index_path, model_path,
                                    k, corrector_kind, generator_kind, endpoint, gen_model,
                                    max_input_units, workers, single_stage)
    runner = {"standard": run_standard_rag, "qer": run_qer_rag, "raqcg": run_ra_qcg}[method]
    run_records, report = runner(records, corpus, config)
    save_run(run_records, report, out_dir, config_snapshot=snapshot)
    click.echo(json.dumps({"overall_f1": report.overall["f1"],
                           "corrupted_f1": report.corrupted["f1"],
                           "clean_f1": report.clean["f1"]}))


@cli.command("eval")
@click.option("--records", "records_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--dataset", "dataset_path", default=None, type=click.Path(exists=True, dir_okay=False),
              help="Re-score answers against this dataset's golds (default: aggregate stored metrics).")
@click.option("--out", "out_path", default=None, type=click.Path(dir_okay=False))
def eval_cmd(records_path, dataset_path, out_path):
    """Aggregate (or recompute) metrics from a run's records file."""
    run_records = pipelines.load_run_records(records_path)
    if dataset_path:
        golds = {r.id: list(r.golden_answers) for r in datakit.load_dataset(dataset_path)}
        results = []
        for rr in run_records:
            em, f1, acc = evalkit.score_answer(rr.answer, golds[rr.id])
            results.append(evalkit.QueryResult(rr.id, em, f1, acc, rr.corrupted))
    else:
        results = [evalkit.QueryResult(rr.id, rr.em, rr.f1, rr.acc, rr.corrupted)
                   for rr in run_records]
    report = evalkit.aggregate(results)
    if out_path:
        evalkit.save_report(report, out_path)
    click.echo(json.dumps(report.to_dict()["aggregates"]))


@cli.command()
@click.argument("reports", nargs=-1, required=True,
                type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", default=None, type=click.Path(dir_okay=False),
              help="Write the comparison table as CSV.")
def report(reports, out_path):
    """Merge run reports into one corrupted-vs-clean comparison table."""
    merged = {}
    for path in reports:
        name = Path(path).parent.name or Path(path).stem
        merged[name] = evalkit.load_report(path)
    csv_text = evalkit.aggregates_csv(merged)
    if out_path:
        Path(out_path).write_text(csv_text, encoding="utf-8")
    click.echo(csv_text.rstrip("\n"))


@cli.command("sweep-k")
@click.option("--dataset", "dataset_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
@click.option("--ks", default="1,3,5,15", show_default=True)
@click.option("--methods", default="standard,raqcg", show_default=True)
@click.option("--retriever", "retriever_kind", type=click.Choice(["lexical", "dense"]),
              default="lexical", show_default=True)
@click.option("--index", "index_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--max-input-units", default=4096, show_default=True)
def sweep_k(dataset_path, corpus_path, out_dir, ks, methods, retriever_kind,
            index_path, model_path, max_input_units):
    """Run pipelines at several retrieval depths and tabulate mean F1 per k."""
    records = datakit.load_dataset(dataset_path)
    corpus = load_corpus(corpus_path)
    k_values = [int(v) for v in ks.split(",") if v]
    method_list = [m.strip() for m in methods.split(",") if m.strip()]
    rows = []
    for k in k_values:
        row = {"k": k}
        for method in method_list:
            corrector_kind = "grounded" if method == "raqcg" else "none"
            config = _build_pipeline_config(records, corpus, retriever_kind, index_path,
                                            model_path, k, corrector_kind, "stub", None,
                                            "default", max_input_units, 1, False)
            runner = run_ra_qcg if method == "raqcg" else run_standard_rag
            _, rep = runner(records, corpus, config)
            row[method] = rep.overall["f1"]
        rows.append(row)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "sweep.json").write_text(json.dumps(rows, indent=2) + "\n")
    header = "k    " + "".join(f"{m:>12}" for m in method_list)
    click.echo(header)
    for row in rows:
        click.echo(f"{row['k']:<5}" + "".join(f"{row[m]:>12.4f}" for m in method_list))


def main() -> int:
    try:
        cli.main(standalone_mode=False)
        return 0
    except click.exceptions.Abort:
        return 1
    except (click.UsageError, RagNoiseError) as exc:
        kind = type(exc).__name__
        click.echo(f"error: {exc}", err=True)
        click.echo(json.dumps({"error": kind, "message": str(exc)}), err=True)
        return 2 if isinstance(exc, TransportError) else 1
    except Exception as exc:  # anything unexpected is a runtime error
        click.echo(f"runtime error: {exc}", err=True)
        click.echo(json.dumps({"error": type(exc).__name__, "message": str(exc)}), err=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
