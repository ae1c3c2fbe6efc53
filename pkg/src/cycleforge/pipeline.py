"""Corpus-level drivers behind the CLI: forging, IQA filtering, manifests, eval, validation."""

from __future__ import annotations

import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .config import RunConfig
from .embfile import EmbeddingFormatError, EmbeddingTable, load_embeddings
from .errors import CycleForgeError, ValidationError
from .forge import (
    ManifestRow,
    PairInputs,
    Triplet,
    build_manifest,
    forge_pair,
    iqa_gate,
    read_pairs,
    rotate_to_cycle,
    routing_violations,
)
from .imaging import write_image
from .metrics import Gallery, fid_from_features, id_retrieval, id_similarity, vector_l2_error
from .reshaping import colorize_region_map

log = logging.getLogger("cycleforge")

EXIT_OK, EXIT_INPUT, EXIT_PARTIAL = 0, 1, 2
TRIPLETS_INDEX = "triplets.jsonl"


class JsonLineFormatter(logging.Formatter):
    def format(self, record: logging.LogRecord) -> str:
        payload = {"level": record.levelname.lower(), "event": record.getMessage()}
        payload.update(getattr(record, "fields", {}))
        return json.dumps(payload, sort_keys=True)


def setup_logging(level: int = logging.INFO) -> None:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(JsonLineFormatter())
    log.handlers[:] = [handler]
    log.setLevel(level)
    log.propagate = False


def _event(msg: str, level: int = logging.INFO, **fields) -> None:
    log.log(level, msg, extra={"fields": fields})


def _rel(path: str | Path, start: str | Path) -> str:
    return Path(os.path.relpath(os.path.abspath(path), os.path.abspath(start))).as_posix()


def write_jsonl(path: str | Path, records: Iterable[dict]) -> None:
    with open(path, "w", newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_jsonl(path: str | Path) -> list[dict]:
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if line.strip():
                try:
                    out.append(json.loads(line))
                except json.JSONDecodeError as exc:
                    raise ValidationError(f"{path}:{lineno}: {exc}") from None
    return out


# -- forge ---------------------------------------------------------------------

@dataclass
class ForgeSummary:
    pairs: int = 0
    processed: int = 0
    kept: int = 0
    dropped: int = 0
    unscored: int = 0
    failed: list[dict] = field(default_factory=list)
    wall_time_s: float = 0.0

    @property
    def exit_code(self) -> int:
        return EXIT_PARTIAL if self.failed else EXIT_OK

    def to_json(self) -> dict:
        return asdict(self)


def _forge_one(pair: PairInputs, cfg: RunConfig, out_dir: str, dump_stages: bool) -> dict:
    """Synthesize one pair and write its images; runs inside worker processes."""
    try:
        forged = forge_pair(pair, None, cfg.blend, cfg.inpaint)
    except (OSError, CycleForgeError) as exc:
        return {"pair_id": pair.pair_id, "error": f"{type(exc).__name__}: {exc}"}
    pair_dir = Path(out_dir) / pair.pair_id
    pair_dir.mkdir(parents=True, exist_ok=True)
    write_image(pair_dir / "c_ab.png", forged.stages_ab.swapped)
    write_image(pair_dir / "c_ba.png", forged.stages_ba.swapped)
    write_image(pair_dir / "regionmap_ab.png", colorize_region_map(forged.stages_ab.region_map) / 255.0)
    write_image(pair_dir / "regionmap_ba.png", colorize_region_map(forged.stages_ba.region_map) / 255.0)
    if dump_stages:
        write_image(pair_dir / "m_ab.png", forged.stages_ab.blended)
        write_image(pair_dir / "m_ba.png", forged.stages_ba.blended)

    def rel(t: Triplet) -> dict:
        rec = t.to_json()
        for role, ref in zip(("target", "source", "reference"), t.refs):
            if not ref.synthetic:
                rec[role] = _rel(ref.path, out_dir)
        return rec

    cycles = rotate_to_cycle(forged.naive)
    return {"pair_id": pair.pair_id, "triplets": [rel(t) for t in forged.naive + cycles],
            "real": [_rel(pair.c_a, out_dir), _rel(pair.c_b, out_dir)]}


def read_scores(path: str | Path) -> dict[str, float]:
    """IQA score JSONL ``{"path", "score"}``; keys are absolute paths."""
    base = Path(path).parent
    scores = {}
    for rec in read_jsonl(path):
        try:
            p, s = rec["path"], float(rec["score"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"{path}: bad score record {rec!r}: {exc}") from None
        scores[os.path.abspath(base / p)] = s
    return scores


def gate_triplets(records: list[dict], index_dir: str | Path, scores: dict[str, float],
                  threshold: float) -> dict[str, str | None]:
    """Decide keep/drop per pair from the scores of its four images."""
    by_pair: dict[str, dict] = {}
    for rec in records:
        if rec["kind"] == "naive":
            by_pair.setdefault(rec["pair_id"], {})[rec["reference"]] = rec
    decisions = {}
    for pair_id, naive in sorted(by_pair.items()):
        rows = sorted(naive.values(), key=lambda r: r["reference"])
        real = [os.path.abspath(Path(index_dir) / r["target"]) for r in rows]
        synth = [os.path.abspath(Path(index_dir) / r["reference"]) for r in rows]
        if len(rows) != 2 or any(p not in scores for p in real + synth):
            decisions[pair_id] = None
            continue
        decisions[pair_id] = iqa_gate([scores[p] for p in real], [scores[p] for p in synth], threshold)
    return decisions


def apply_gate(records: list[dict], decisions: dict[str, str | None]) -> list[dict]:
    return [dict(rec, iqa=decisions.get(rec["pair_id"])) for rec in records]


def run_forge(pairs_file: str | Path, out_dir: str | Path, cfg: RunConfig = RunConfig(),
              iqa_scores: str | Path | None = None, dump_stages: bool = False) -> ForgeSummary:
    """Synthesize every pair, write images and ``triplets.jsonl``.

    Bad pair files raise ``ValidationError``; per-pair failures are collected
    in the summary instead. Output bytes do not depend on ``cfg.workers``.
    """
    start = time.perf_counter()
    pairs = read_pairs(pairs_file)
    scores = read_scores(iqa_scores) if iqa_scores else None
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = ForgeSummary(pairs=len(pairs))
    _event("forge.start", pairs=len(pairs), workers=cfg.workers)

    args = [(p, cfg, str(out_dir), dump_stages) for p in pairs]
    if cfg.workers > 1 and len(pairs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_forge_one, *zip(*args)))
    else:
        results = [_forge_one(*a) for a in args]

    records = []
    for res in sorted(results, key=lambda r: r["pair_id"]):
        if "error" in res:
            summary.failed.append({"pair_id": res["pair_id"], "error": res["error"]})
            _event("forge.pair_failed", logging.WARNING, **summary.failed[-1])
            continue
        summary.processed += 1
        records.extend(res["triplets"])
        _event("forge.pair_done", pair_id=res["pair_id"])

    decisions = gate_triplets(records, out_dir, scores, cfg.iqa_threshold) if scores is not None else {}
    for pair_id in sorted({r["pair_id"] for r in records}):
        verdict = decisions.get(pair_id)
        if verdict == "keep":
            summary.kept += 1
        elif verdict == "drop":
            summary.dropped += 1
        else:
            summary.unscored += 1
    write_jsonl(out_dir / TRIPLETS_INDEX, apply_gate(records, decisions))
    summary.wall_time_s = round(time.perf_counter() - start, 3)
    _event("forge.done", processed=summary.processed, failed=len(summary.failed))
    return summary


def filter_iqa(triplets_file: str | Path, scores_file: str | Path, out_file: str | Path,
               threshold: float = 0.4) -> dict:
    records = read_jsonl(triplets_file)
    index_dir = Path(triplets_file).parent
    decisions = gate_triplets(records, index_dir, read_scores(scores_file), threshold)
    gated = apply_gate(records, decisions)
    out_dir = Path(out_file).parent
    for rec in gated:
        for role in ("target", "source", "reference"):
            rec[role] = _rel(index_dir / rec[role], out_dir)
    write_jsonl(out_file, gated)
    verdicts = list(decisions.values())
    return {"pairs": len(decisions), "kept": verdicts.count("keep"), "dropped": verdicts.count("drop"),
            "unscored": verdicts.count(None)}


# -- manifest ------------------------------------------------------------------

def read_vanilla_list(path: str | Path) -> list[str]:
    """One image path per line (relative to the list file); ``#`` starts a comment."""
    base = Path(path).parent
    out = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            out.append(os.path.abspath(base / line))
    return out


def load_cycle_triplets(paths: Iterable[str | Path]) -> list[Triplet]:
    """Cycle triplets from index files, skipping pairs the IQA gate dropped."""
    out = []
    for path in paths:
        base = Path(path).parent
        for rec in read_jsonl(path):
            if rec.get("kind") != "cycle" or rec.get("iqa") == "drop":
                continue
            for role in ("target", "source", "reference"):
                rec[role] = os.path.abspath(base / rec[role])
            out.append(Triplet.from_json(rec))
    return out


def write_manifest(rows: list[ManifestRow], path: str | Path) -> None:
    base = Path(path).parent
    recs = []
    for row in rows:
        rec = row.to_json()
        for role in ("target", "source", "reference"):
            if rec[role] is not None:
                rec[role] = _rel(rec[role], base)
        recs.append(rec)
    write_jsonl(path, recs)


def run_manifest(vanilla_file: str | Path, triplet_files: list[str | Path], out_file: str | Path,
                 cfg: RunConfig = RunConfig()) -> dict:
    vanilla = read_vanilla_list(vanilla_file)
    cycles = load_cycle_triplets(triplet_files)
    rows = build_manifest(vanilla, cycles, cfg.ratio, cfg.recon_fraction, cfg.seed)
    Path(out_file).parent.mkdir(parents=True, exist_ok=True)
    write_manifest(rows, out_file)
    kinds = [r.kind for r in rows]
    return {"rows": len(rows), **{k: kinds.count(k) for k in ("vanilla_recon", "vanilla_swap", "cycle")}}


# -- eval ----------------------------------------------------------------------

EVAL_TASKS = ("id-ret", "id-sim", "l-ret", "l-sim", "pose", "exp", "fid")


def run_eval(task: str, path_a: str | Path, path_b: str | Path) -> dict:
    """Compute one metric from two embedding/feature files.

    Retrieval tasks read queries from ``path_a`` and the gallery from
    ``path_b``; both need identity labels (sidecar or CSV). Similarity and
    distance tasks pair rows of the two files by index.
    """
    if task not in EVAL_TASKS:
        raise ValidationError(f"unknown eval task {task!r}")
    a: EmbeddingTable = load_embeddings(path_a)
    b: EmbeddingTable = load_embeddings(path_b)
    if a.dim != b.dim:
        raise ValidationError(f"dims differ: {path_a} has {a.dim}, {path_b} has {b.dim}")
    if task in ("id-ret", "l-ret"):
        if a.ids is None or b.ids is None:
            raise ValidationError("retrieval needs identity labels for queries and gallery")
        value = id_retrieval(a.vectors, a.ids, Gallery(tuple(b.ids), b.vectors))
        metric = "top1_cosine_retrieval_percent"
    elif task in ("id-sim", "l-sim"):
        value = id_similarity(a.vectors, b.vectors)
        metric = "mean_cosine_similarity"
    elif task in ("pose", "exp"):
        value = vector_l2_error(a.vectors, b.vectors)
        metric = "mean_l2_distance"
    else:
        value = fid_from_features(a.vectors, b.vectors)
        metric = "frechet_distance"
    return {"task": task, "value": value, "n": len(a),
            "config": {"a": str(path_a), "b": str(path_b), "dim": a.dim, "metric": metric}}


# -- validation ----------------------------------------------------------------

VALIDATE_TARGETS = ("manifest", "pairs", "embeddings")


def validate_manifest(path: str | Path) -> list[str]:
    findings = []
    base = Path(path).parent
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                row = ManifestRow.from_json(json.loads(line))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                findings.append(f"line {lineno}: unparseable row ({exc})")
                continue
            findings.extend(f"line {lineno}: {msg}" for msg in routing_violations(row))
            for role in ("target", "source", "reference"):
                p = getattr(row, role)
                if p is not None and not (base / p).exists():
                    findings.append(f"line {lineno}: {role} {p} does not exist")
    return findings


def validate_pairs(path: str | Path) -> list[str]:
    try:
        pairs = read_pairs(path)
    except (OSError, ValidationError) as exc:
        return [str(exc)]
    findings = []
    for pair in pairs:
        missing = [k for k, p in pair.paths().items() if not Path(p).exists()]
        if missing:
            findings.append(f"pair {pair.pair_id}: missing files for {', '.join(missing)}")
            continue
        try:
            pair.load()
        except (OSError, CycleForgeError) as exc:
            findings.append(f"pair {pair.pair_id}: {exc}")
    return findings


def validate_embeddings(path: str | Path) -> list[str]:
    try:
        table = load_embeddings(path)
    except (OSError, EmbeddingFormatError) as exc:
        return [str(exc)]
    findings = []
    zero = np.flatnonzero(np.linalg.norm(table.vectors, axis=1) == 0) if len(table) else []
    findings.extend(f"row {int(i)}: zero vector" for i in zero)
    return findings


def validate(target: str, path: str | Path) -> list[str]:
    if target not in VALIDATE_TARGETS:
        raise ValidationError(f"unknown validation target {target!r}")
    if not Path(path).exists():
        return [f"{path} does not exist"]
    return {"manifest": validate_manifest, "pairs": validate_pairs,
            "embeddings": validate_embeddings}[target](path)
