"""Command-line pipeline: mine concepts, build a dictionary, decompose and edit.

Settings resolve as command-line flag, then YAML config file, then built-in
default.  Exit codes: 1 usage, 2 validation, 3 transport, 4 numeric failure.
"""

from __future__ import annotations

import csv
import io
import json
import os
import re
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click
import numpy as np
import yaml

from .dictionary import (
    CLIP_SEQ_LEN,
    CLIP_TOKEN_DIM,
    NULL_CONCEPT,
    Concept,
    ConceptDictionary,
    LatentSpaceTag,
    ReadMethod,
    SpaceKind,
    assemble,
    null_concept,
    rep_read,
)
from .errors import (
    ConceptTransplantError,
    HashMismatch,
    NonConvergence,
    NumericError,
    SchemaViolation,
    TransportError,
    UnknownConcept,
    ValidationError,
)
from .mining.client import ClientConfig, EditTask, MiningClient
from .mining.transport import HttpTransport, RecordingTransport, ReplayTransport
from .solver import SolverConfig, SparseSolution
from .store import EmbeddingCache, read_dataset, read_dictionary, read_matrix, write_dataset, write_matrix
from .transplant import (
    Decomposition,
    EditKind,
    EditRequest,
    SourceAbsentWarning,
    decompose,
    strength_sweep,
    top_k_report,
    transplant,
)

EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_TRANSPORT = 3
EXIT_NUMERIC = 4

DEFAULTS = {
    "solver": {"lam": 0.01, "rho": 1.0, "tol": 1e-7, "max_sweeps": 1000},
    "report": {"k": 10, "format": "plain"},
    "client": {
        "endpoint_url": "https://api.openai.com/v1",
        "model_name": "gpt-4o",
        "api_key_env": "OPENAI_API_KEY",
        "max_retries": 3,
        "request_timeout": 60.0,
        "max_concurrent_requests": 4,
        "supports_images": True,
    },
    "embedding": {},
    "space": {},
    "paths": {},
}

DECOMP_FORMAT = "concept-decomposition"
EMBED_INDEX = "index.json"


# -- configuration -----------------------------------------------------------

def load_config(path) -> dict:
    cfg = {k: dict(v) for k, v in DEFAULTS.items()}
    if path is None:
        return cfg
    try:
        with open(path, encoding="utf-8") as fh:
            doc = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise click.UsageError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ValidationError(f"config {path} is not valid YAML: {exc}") from exc
    if not isinstance(doc, dict):
        raise ValidationError(f"config {path} must be a mapping")
    for section, values in doc.items():
        if section not in cfg or not isinstance(values, dict):
            raise ValidationError(f"config {path}: unknown or malformed section {section!r}")
        cfg[section].update(values)
    return cfg


def _pick(flag, cfg: dict, section: str, key: str):
    return flag if flag is not None else cfg[section].get(key)


def _solver_config(cfg, lam, rho, tol, max_sweeps) -> SolverConfig:
    return SolverConfig(
        lam=float(_pick(lam, cfg, "solver", "lam")),
        rho=float(_pick(rho, cfg, "solver", "rho")),
        tol=float(_pick(tol, cfg, "solver", "tol")),
        max_sweeps=int(_pick(max_sweeps, cfg, "solver", "max_sweeps")),
    )


def _client_config(cfg, section: str, endpoint, model) -> ClientConfig:
    values = dict(cfg["client"])
    if section != "client":
        values.update(cfg[section])
    if endpoint is not None:
        values["endpoint_url"] = endpoint
    if model is not None:
        values["model_name"] = model
    try:
        return ClientConfig(**values)
    except TypeError as exc:
        raise ValidationError(f"bad {section} settings: {exc}") from exc


def _space_for(width: int, cfg: dict, kind, seq_len, token_dim) -> LatentSpaceTag:
    kind = _pick(kind, cfg, "space", "kind")
    seq_len = _pick(seq_len, cfg, "space", "seq_len")
    token_dim = _pick(token_dim, cfg, "space", "token_dim")
    if kind is None:
        text = (seq_len and token_dim) or width == LatentSpaceTag.text_embedding().flat_dim
        kind = SpaceKind.TEXT_EMBEDDING if text else SpaceKind.SCORE
    if SpaceKind(kind) is SpaceKind.TEXT_EMBEDDING:
        tag = LatentSpaceTag.text_embedding(int(seq_len or CLIP_SEQ_LEN), int(token_dim or CLIP_TOKEN_DIM))
    else:
        tag = LatentSpaceTag.score(width)
    if tag.flat_dim != width:
        raise ValidationError(f"embedding width {width} does not match the {tag.kind.value} space ({tag.flat_dim})")
    return tag


# -- small I/O helpers ---------------------------------------------------------

def _read_json(path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise click.UsageError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"{path}: not valid JSON ({exc})") from exc


def _write_json(path, doc) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, ensure_ascii=False, indent=1) + "\n", encoding="utf-8")


def _emit(doc) -> None:
    click.echo(json.dumps(doc, ensure_ascii=False, indent=1))


def _slug(name: str) -> str:
    s = re.sub(r"[^0-9A-Za-z]+", "-", name).strip("-").lower()
    return s[:40] or "concept"


def _vector_file(path, dim: int) -> np.ndarray:
    """A single latent stored in any shape with ``dim`` elements, as float64."""
    m = read_matrix(path)
    if m.size != dim:
        raise ValidationError(f"{path}: {m.shape[0]}x{m.shape[1]} does not hold a {dim}-vector")
    return m.reshape(-1).astype(np.float64)


def _latent_matrix(vec, space: LatentSpaceTag) -> np.ndarray:
    v = np.asarray(vec, dtype=np.float32)
    if space.kind is SpaceKind.TEXT_EMBEDDING:
        return v.reshape(space.seq_len, space.token_dim)
    return v.reshape(1, -1)


def _rel(path: Path, base: Path) -> str:
    return os.path.relpath(path, base)


# -- mining plumbing -------------------------------------------------------

def _mining_options(fn):
    fn = click.option("--model", default=None, help="Model name override.")(fn)
    fn = click.option("--endpoint", default=None, help="Service base URL override.")(fn)
    fn = click.option("--record", "record_dir", type=click.Path(file_okay=False), help="Record exchanges here.")(fn)
    fn = click.option("--replay", "replay_dir", type=click.Path(file_okay=False), help="Serve replies from recordings.")(fn)
    fn = click.option("--dry-run", is_flag=True, help="Validate inputs and print the request without sending it.")(fn)
    return fn


def _client(cfg, section, endpoint, model, replay_dir, record_dir, cache=None) -> MiningClient:
    ccfg = _client_config(cfg, section, endpoint, model)
    if replay_dir and record_dir:
        raise click.UsageError("--replay and --record are mutually exclusive")
    if replay_dir:
        transport = ReplayTransport(replay_dir)
    else:
        transport = HttpTransport(ccfg.endpoint_url, ccfg.api_key_env, ccfg.request_timeout)
        if record_dir:
            transport = RecordingTransport(transport, record_dir)
    return MiningClient(ccfg, transport, cache=cache)


def _dry(path: str, body: dict) -> None:
    _emit({"dry_run": True, "path": path, "body": body})


def _load_task(path) -> EditTask:
    doc = _read_json(path)
    if not isinstance(doc, dict):
        raise SchemaViolation(f"{path}: task must be a JSON object")
    return EditTask.from_dict(doc)


def _load_concept_names(path) -> list[str]:
    doc = _read_json(path)
    if isinstance(doc, dict):
        doc = doc.get("concepts")
    if not isinstance(doc, list) or not all(isinstance(x, str) for x in doc) or not doc:
        raise SchemaViolation(f"{path}: expected a non-empty list of concept names or {{'concepts': [...]}}")
    return doc


# -- decomposition files -------------------------------------------------------

def _save_decomposition(dec: Decomposition, out: Path, manifest: Path, cfg: SolverConfig) -> None:
    stem = out.with_suffix("")
    src_path = stem.with_name(stem.name + ".source.clan")
    res_path = stem.with_name(stem.name + ".residual.clan")
    write_matrix(dec.source.reshape(1, -1), src_path)
    write_matrix(dec.residual.reshape(1, -1), res_path)
    sol = dec.solution
    doc = {
        "format": DECOMP_FORMAT,
        "version": 1,
        "dictionary": {"manifest": _rel(manifest, out.parent), "sha256": dec.dictionary_id},
        "names": list(dec.dictionary.names),
        "weights": [float(w) for w in dec.weights],
        "source": _rel(src_path, out.parent),
        "residual": _rel(res_path, out.parent),
        "solver": {
            "lam": cfg.lam,
            "rho": cfg.rho,
            "tol": cfg.tol,
            "max_sweeps": cfg.max_sweeps,
            "sweeps_used": sol.sweeps_used,
            "converged": sol.converged,
            "objective": sol.objective,
            "solve_seconds": dec.solve_seconds,
        },
    }
    _write_json(out, doc)


def load_decomposition(path, dictionary: ConceptDictionary | None = None) -> Decomposition:
    path = Path(path)
    doc = _read_json(path)
    try:
        if doc.get("format") != DECOMP_FORMAT:
            raise SchemaViolation(f"{path}: not a {DECOMP_FORMAT} file")
        sha = doc["dictionary"]["sha256"]
        weights = np.asarray(doc["weights"], dtype=np.float64)
        names = tuple(doc["names"])
        stats = doc["solver"]
        manifest = path.parent / doc["dictionary"]["manifest"]
        src_file = path.parent / doc["source"]
        res_file = path.parent / doc["residual"]
    except (KeyError, TypeError, AttributeError, ValueError) as exc:
        if isinstance(exc, SchemaViolation):
            raise
        raise SchemaViolation(f"{path}: malformed decomposition ({exc})") from exc
    if dictionary is None:
        dictionary = read_dictionary(manifest)
    if dictionary.content_hash() != sha:
        raise HashMismatch(f"{path}: decomposition was made with a different dictionary")
    if names != dictionary.names or weights.shape != (len(names),):
        raise SchemaViolation(f"{path}: names or weights disagree with the dictionary")
    d = dictionary.space.flat_dim
    source = _vector_file(src_file, d)
    residual = _vector_file(res_file, d)
    sol = SparseSolution(weights, int(stats["sweeps_used"]), bool(stats["converged"]), float(stats["objective"]))
    return Decomposition(
        source.astype(np.float32), dictionary, weights, residual.astype(np.float32), sol, float(stats["solve_seconds"])
    )


# -- report formatting ----------------------------------------------------------

def format_report(rows: list[dict], fmt: str) -> str:
    if fmt == "json":
        return json.dumps(rows, ensure_ascii=False, indent=1)
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=["rank", "concept", "coefficient", "magnitude"], lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
        return buf.getvalue().rstrip("\n")
    width = max([len(r["concept"]) for r in rows] + [7])
    lines = [f"{'rank':>4}  {'concept':<{width}}  {'coefficient':>12}"]
    for r in rows:
        lines.append(f"{r['rank']:>4}  {r['concept']:<{width}}  {r['coefficient']:>12.6f}")
    return "\n".join(lines)


# -- the command group -------------------------------------------------------

class _Cli(click.Group):
    """Maps engine errors onto exit codes instead of tracebacks."""

    def main(self, args=None, prog_name=None, complete_var=None, standalone_mode=True, **extra):
        try:
            rv = super().main(args, prog_name, complete_var, standalone_mode=False, **extra)
            code = rv if isinstance(rv, int) else 0
        except click.exceptions.Abort:
            click.echo("Aborted!", err=True)
            code = EXIT_USAGE
        except click.ClickException as exc:
            exc.show()
            code = EXIT_USAGE
        except ConceptTransplantError as exc:
            click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
            if isinstance(exc, TransportError):
                code = EXIT_TRANSPORT
            elif isinstance(exc, NumericError):
                code = EXIT_NUMERIC
            else:
                code = EXIT_VALIDATION
        if standalone_mode:
            sys.exit(code)
        return code


@click.group(cls=_Cli)
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None, help="YAML config file.")
@click.pass_context
def cli(ctx, config_path):
    """Sparse concept decomposition and transplant editing."""
    ctx.obj = load_config(config_path)


@cli.group()
def concepts():
    """Concept lists and insertion rewrites from a task file."""


@concepts.command("parse")
@click.option("--task", "task_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Also write the list here.")
@_mining_options
@click.pass_obj
def concepts_parse(cfg, task_path, out, dry_run, replay_dir, record_dir, endpoint, model):
    """Ask the vision-language model for the task's concept list."""
    task = _load_task(task_path)
    client = _client(cfg, "client", endpoint, model, replay_dir, record_dir)
    if dry_run:
        _dry("chat/completions", client.chat_body(client.parse_messages(task)))
        return
    resp = client.parse_concepts(task)
    doc = {"source_concept": resp.source_concept, "target_concept": resp.target_concept, "concepts": list(resp.concepts)}
    if out:
        _write_json(out, doc)
    _emit(doc)


@concepts.command("rewrite")
@click.option("--task", "task_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Also write the new task here.")
@_mining_options
@click.pass_obj
def concepts_rewrite(cfg, task_path, out, dry_run, replay_dir, record_dir, endpoint, model):
    """Pick a counterpart source concept for an insertion edit."""
    task = _load_task(task_path)
    client = _client(cfg, "client", endpoint, model, replay_dir, record_dir)
    if dry_run:
        _dry("chat/completions", client.chat_body(client.rewrite_messages(task)))
        return
    doc = client.rewrite_for_insertion(task).to_dict()
    if out:
        _write_json(out, doc)
    _emit(doc)


@cli.group()
def stimuli():
    """Stimulus synthesis."""


@stimuli.command("gen")
@click.option("--concepts", "concepts_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Dataset file to write.")
@_mining_options
@click.pass_obj
def stimuli_gen(cfg, concepts_path, out, dry_run, replay_dir, record_dir, endpoint, model):
    """Generate stimuli for every concept and write a dataset file."""
    names = _load_concept_names(concepts_path)
    client = _client(cfg, "client", endpoint, model, replay_dir, record_dir)
    if dry_run:
        for name in names:
            _dry("chat/completions", client.chat_body(client.stimuli_messages(name)))
        return
    if out is None:
        raise click.UsageError("--out is required unless --dry-run is given")
    sets = client.synthesize_many(names)
    write_dataset([Concept(s.concept, s.stimuli) for s in sets], out)
    _emit({"dataset": str(out), "concepts": len(sets), "stimuli": sum(len(s.stimuli) for s in sets)})


@cli.command()
@click.option("--dataset", "dataset_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--out-dir", type=click.Path(file_okay=False), default=None, help="Directory for per-concept matrices.")
@click.option("--text", "texts", multiple=True, help="Embed these texts instead of a dataset.")
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Matrix file for --text.")
@click.option("--null", "with_null", is_flag=True, help="Also embed the empty string as the null concept.")
@click.option("--cache", "cache_dir", type=click.Path(file_okay=False), default=None, help="Embedding cache directory.")
@_mining_options
@click.pass_obj
def embed(cfg, dataset_path, out_dir, texts, out, with_null, cache_dir, dry_run, replay_dir, record_dir, endpoint, model):
    """Embed stimuli through the embedding service, with caching."""
    cache_dir = _pick(cache_dir, cfg, "paths", "cache_dir")
    cache = EmbeddingCache(cache_dir) if cache_dir else None
    client = _client(cfg, "embedding", endpoint, model, replay_dir, record_dir, cache)
    if texts:
        if dataset_path:
            raise click.UsageError("give either --dataset or --text")
        if dry_run:
            _dry("embeddings", client.embed_body(list(texts)))
            return
        if out is None:
            raise click.UsageError("--out is required with --text")
        m = client.embed_texts(list(texts))
        write_matrix(m, out)
        _emit({"matrix": str(out), "rows": m.shape[0], "cols": m.shape[1]})
        return
    if not dataset_path or not out_dir:
        raise click.UsageError("--dataset and --out-dir are required (or use --text/--out)")
    records = read_dataset(dataset_path)
    if dry_run:
        for c in records:
            _dry("embeddings", client.embed_body(list(c.stimuli)))
        return
    out_dir = Path(out_dir)
    with ThreadPoolExecutor(max_workers=client.cfg.max_concurrent_requests) as pool:
        mats = list(pool.map(lambda c: client.embed_texts(list(c.stimuli)), records))
    entries = []
    for i, (c, m) in enumerate(zip(records, mats)):
        name = f"{i:03d}_{_slug(c.name)}.clan"
        write_matrix(m, out_dir / name)
        entries.append({"concept": c.name, "file": name})
    index = {"format": "concept-embeddings", "version": 1, "model": client.cfg.model_name, "concepts": entries}
    if with_null:
        write_matrix(client.embed_texts([""]), out_dir / "null.clan")
        index["null"] = "null.clan"
    _write_json(out_dir / EMBED_INDEX, index)
    _emit({"index": str(out_dir / EMBED_INDEX), "concepts": len(entries)})


def _embedding_index(emb_dir) -> tuple[Path, dict]:
    emb_dir = Path(emb_dir)
    index = _read_json(emb_dir / EMBED_INDEX)
    if not isinstance(index, dict) or not isinstance(index.get("concepts"), list):
        raise SchemaViolation(f"{emb_dir / EMBED_INDEX}: malformed embedding index")
    return emb_dir, index


def _space_options(fn):
    fn = click.option("--token-dim", type=int, default=None, help="Token width of a text-embedding space.")(fn)
    fn = click.option("--seq-len", type=int, default=None, help="Sequence length of a text-embedding space.")(fn)
    fn = click.option("--space", "space_kind", type=click.Choice([k.value for k in SpaceKind]), default=None)(fn)
    return fn


@cli.group("dict")
def dict_group():
    """Concept dictionaries."""


@dict_group.command("build")
@click.option("--dataset", "dataset_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--embeddings", "emb_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--method", type=click.Choice([m.value for m in ReadMethod]), default=ReadMethod.AVG.value, show_default=True)
@click.option("--normalize/--no-normalize", default=False, show_default=True, help="Scale columns to unit norm.")
@click.option("--null-embedding", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Append the null concept from this embedding file.")
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Manifest path.")
@_space_options
@click.pass_obj
def dict_build(cfg, dataset_path, emb_dir, method, normalize, null_embedding, out, space_kind, seq_len, token_dim):
    """Read one vector per concept and stack them into a dictionary."""
    from .store import write_dictionary

    records = read_dataset(dataset_path)
    emb_dir, index = _embedding_index(emb_dir)
    files = {e["concept"]: e["file"] for e in index["concepts"]}
    if null_embedding is None and index.get("null"):
        null_embedding = emb_dir / index["null"]
    vectors, space = [], None
    for c in records:
        if c.name not in files:
            raise UnknownConcept(f"no embeddings for concept {c.name!r} in {emb_dir}")
        m = read_matrix(emb_dir / files[c.name])
        if space is None:
            space = _space_for(m.shape[1], cfg, space_kind, seq_len, token_dim)
        vectors.append(rep_read(m, method, c.name, space))
    if null_embedding is not None and NULL_CONCEPT not in files:
        vectors.append(null_concept(space, _vector_file(null_embedding, space.flat_dim)))
    dictionary = assemble(vectors, normalize=normalize)
    manifest = write_dictionary(dictionary, out)
    _emit({"manifest": str(out), "matrix": manifest.matrix_file, "concepts": len(dictionary), "sha256": manifest.sha256})


def _solver_options(fn):
    fn = click.option("--max-sweeps", type=int, default=None)(fn)
    fn = click.option("--tol", type=float, default=None)(fn)
    fn = click.option("--rho", type=float, default=None, help="L1 share of the penalty [default: 1.0].")(fn)
    fn = click.option("--lam", type=float, default=None, help="Penalty weight [default: 0.01].")(fn)
    return fn


@cli.command("decompose")
@click.option("--source", "source_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--dict", "manifest_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Decomposition JSON to write.")
@click.option("--k", type=int, default=None, help="Rows in the printed report [default: 10].")
@click.option("--strict", is_flag=True, help="Exit 4 when the solver does not converge.")
@_solver_options
@click.pass_obj
def decompose_cmd(cfg, source_path, manifest_path, out, k, strict, lam, rho, tol, max_sweeps):
    """Solve for concept coefficients and keep the residual."""
    scfg = _solver_config(cfg, lam, rho, tol, max_sweeps)
    dictionary = read_dictionary(manifest_path)
    source = _vector_file(source_path, dictionary.space.flat_dim)
    dec = decompose(source, dictionary, scfg)
    out = Path(out)
    _save_decomposition(dec, out, Path(manifest_path), scfg)
    sol = dec.solution
    k = min(int(_pick(k, cfg, "report", "k")), len(dictionary))
    click.echo(f"solve_time_s: {dec.solve_seconds:.6f}")
    click.echo(f"converged: {str(sol.converged).lower()} (sweeps: {sol.sweeps_used})")
    click.echo(f"residual_norm: {float(np.linalg.norm(dec.residual.astype(np.float64))):.6g}")
    click.echo("weights: " + json.dumps([float(w) for w in dec.weights]))
    click.echo(format_report(top_k_report(dec, k).to_rows(), "plain"))
    if strict and not sol.converged:
        raise NonConvergence(f"solver stopped after {sol.sweeps_used} sweeps without converging")


def _edit_options(fn):
    fn = click.option("--method", type=click.Choice([m.value for m in ReadMethod]), default=ReadMethod.AVG.value,
                      show_default=True, help="Read method for multi-row target files.")(fn)
    fn = click.option("--null-embedding", type=click.Path(exists=True, dir_okay=False), default=None)(fn)
    fn = click.option("--embeddings", "emb_dir", type=click.Path(exists=True, file_okay=False), default=None,
                      help="Embedding directory holding the target concept.")(fn)
    fn = click.option("--target-vector", type=click.Path(exists=True, dir_okay=False), default=None)(fn)
    fn = click.option("--target-concept", default=None)(fn)
    fn = click.option("--source-concept", required=True)(fn)
    fn = click.option("--kind", required=True, type=click.Choice([k.value for k in EditKind]))(fn)
    fn = click.option("--decomp", "decomp_path", required=True, type=click.Path(exists=True, dir_okay=False))(fn)
    fn = click.option("--dict", "manifest_path", required=True, type=click.Path(exists=True, dir_okay=False))(fn)
    return fn


def _edit_request(dec: Decomposition, kind, source_concept, target_concept, target_vector, emb_dir,
                  null_embedding, method) -> EditRequest:
    d = dec.dictionary
    d.index(source_concept)
    kind = EditKind(kind)
    if kind is EditKind.REMOVE:
        if target_concept not in (None, NULL_CONCEPT):
            raise ValidationError("removal edits target the null concept; omit --target-concept")
        if null_embedding is not None:
            null = null_concept(d.space, _vector_file(null_embedding, d.space.flat_dim))
        elif NULL_CONCEPT in d.names:
            null = d.vector(NULL_CONCEPT)
        else:
            raise ValidationError("removal needs --null-embedding or a dictionary with the null concept")
        return EditRequest.remove(source_concept, null)
    if not target_concept:
        raise click.UsageError(f"--target-concept is required for {kind.value} edits")
    if target_vector is not None:
        m = read_matrix(target_vector)
        if m.size == d.space.flat_dim:
            m = m.reshape(1, -1)
    elif emb_dir is not None:
        emb_dir, index = _embedding_index(emb_dir)
        files = {e["concept"]: e["file"] for e in index["concepts"]}
        if target_concept not in files:
            raise UnknownConcept(f"no embeddings for concept {target_concept!r} in {emb_dir}")
        m = read_matrix(emb_dir / files[target_concept])
    elif target_concept in d.names:
        m = d.column(target_concept).reshape(1, -1)
    else:
        raise ValidationError("give --target-vector or --embeddings for a target outside the dictionary")
    target = rep_read(m, method, target_concept, d.space)
    return EditRequest(kind, source_concept, target_concept, target)


def _with_warnings(fn, *args):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", SourceAbsentWarning)
        result = fn(*args)
    for w in caught:
        click.echo(f"warning: {w.message}", err=True)
    return result


@cli.command()
@_edit_options
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Edited latent matrix file.")
@click.pass_obj
def edit(cfg, manifest_path, decomp_path, kind, source_concept, target_concept, target_vector, emb_dir,
         null_embedding, method, out):
    """Transplant one concept and write the edited latent."""
    dictionary = read_dictionary(manifest_path)
    dec = load_decomposition(decomp_path, dictionary)
    request = _edit_request(dec, kind, source_concept, target_concept, target_vector, emb_dir, null_embedding, method)
    edited = _with_warnings(transplant, dec, request)
    write_matrix(_latent_matrix(edited, dictionary.space), out)
    _emit({
        "edited": str(out),
        "kind": request.kind.value,
        "source_concept": source_concept,
        "target_concept": request.target_concept,
        "strength": dec.coefficient(source_concept),
    })


@cli.command()
@_edit_options
@click.option("--grid", required=True, help="Comma-separated edit strengths, e.g. 0,0.5,1.")
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
@click.pass_obj
def sweep(cfg, manifest_path, decomp_path, kind, source_concept, target_concept, target_vector, emb_dir,
          null_embedding, method, grid, out_dir):
    """Write one edited latent per strength along the edit direction."""
    try:
        alphas = [float(a) for a in grid.split(",") if a.strip()]
    except ValueError as exc:
        raise click.UsageError(f"--grid must be comma-separated numbers: {exc}") from exc
    dictionary = read_dictionary(manifest_path)
    dec = load_decomposition(decomp_path, dictionary)
    request = _edit_request(dec, kind, source_concept, target_concept, target_vector, emb_dir, null_embedding, method)
    latents = strength_sweep(dec, request, alphas)
    out_dir = Path(out_dir)
    entries = []
    for i, (a, v) in enumerate(zip(alphas, latents)):
        name = f"alpha_{i:03d}.clan"
        write_matrix(_latent_matrix(v, dictionary.space), out_dir / name)
        entries.append({"alpha": a, "file": name})
    _write_json(out_dir / "sweep.json", {"source_concept": source_concept, "target_concept": request.target_concept,
                                         "points": entries})
    _emit({"out_dir": str(out_dir), "points": entries})


@cli.command()
@click.option("--decomp", "decomp_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--k", type=int, default=None, help="Number of concepts [default: 10].")
@click.option("--format", "fmt", type=click.Choice(["json", "csv", "plain"]), default=None, help="[default: plain]")
@click.pass_obj
def report(cfg, decomp_path, k, fmt):
    """Rank concepts by coefficient magnitude."""
    dec = load_decomposition(decomp_path)
    k = int(_pick(k, cfg, "report", "k"))
    fmt = _pick(fmt, cfg, "report", "format")
    click.echo(format_report(top_k_report(dec, k).to_rows(), fmt))


def main(argv=None):
    return cli.main(args=argv, prog_name="concept-transplant")


if __name__ == "__main__":
    main()
