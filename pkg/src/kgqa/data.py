"""Dataset files and the ingestion adapter for the official distribution.

Normalized dataset TSV: ``subject<TAB>relation<TAB>object<TAB>question``.
Raw files may carry ``www.freebase.com/...`` prefixes; :func:`ingest`
strips them and writes the normalized layout.
"""

from __future__ import annotations

import os
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from .kg import load_kg_files, strip_freebase
from .text import QuestionExample

SPLITS = ("train", "valid", "test")
RAW_SPLIT_NAMES = {
    "train": ("annotated_fb_data_train.txt", "train.txt", "train.tsv"),
    "valid": ("annotated_fb_data_valid.txt", "valid.txt", "valid.tsv"),
    "test": ("annotated_fb_data_test.txt", "test.txt", "test.tsv"),
}
RAW_TRIPLES_NAMES = ("freebase-FB2M.txt", "fb2m.txt", "triples.txt", "triples.tsv")
RAW_ALIAS_NAMES = ("aliases.txt", "aliases.tsv", "names.tsv", "names.txt")


class DataError(ValueError):
    pass


def parse_dataset_lines(lines, split="", strict=True):
    """Yield QuestionExamples; malformed lines raise (``strict``) or are skipped."""
    examples, rejected = [], []
    for lineno, line in enumerate(lines, 1):
        line = line.rstrip("\r\n")
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 4 or not all(f.strip() for f in fields[:3]):
            if strict:
                raise DataError(f"{split or 'dataset'} line {lineno}: expected 4 fields, got {len(fields)}")
            rejected.append({"line": lineno, "reason": f"expected 4 fields, got {len(fields)}"})
            continue
        s, r, o, text = fields
        examples.append(QuestionExample.from_text(text, strip_freebase(s.strip()), strip_freebase(r.strip()),
                                                  strip_freebase(o.strip()), qid=f"{split}-{lineno}"))
    return examples, rejected


def read_dataset(path, split="") -> list[QuestionExample]:
    with open(path, encoding="utf-8") as fh:
        examples, _ = parse_dataset_lines(fh, split or Path(path).stem)
    return examples


def write_dataset(path, examples):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for q in examples:
            fh.write(f"{q.gold_subject}\t{q.gold_relation}\t{q.gold_object}\t{q.raw}\n")


def relation_counts(examples) -> Counter:
    return Counter(q.gold_relation for q in examples)


def _find(directory: Path, names):
    for name in names:
        p = directory / name
        if p.is_file():
            return p
    return None


@dataclass
class IngestReport:
    splits: dict = field(default_factory=dict)
    rejected_lines: list = field(default_factory=list)
    kg: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)

    def to_json(self):
        return {"schema": "kgqa-ingest/1", "splits": self.splits, "rejected_lines": self.rejected_lines,
                "kg": self.kg, "outputs": self.outputs}


def _normalize_triples(src: Path, dst: Path, report: IngestReport):
    with open(src, encoding="utf-8") as fin, open(dst, "w", encoding="utf-8", newline="\n") as fout:
        for lineno, line in enumerate(fin, 1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            fields = line.split("\t")
            if len(fields) != 3 or not all(f.strip() for f in fields):
                report.rejected_lines.append({"file": src.name, "line": lineno,
                                              "reason": f"expected 3 fields, got {len(fields)}"})
                continue
            s, r, objs = fields
            objs = " ".join(strip_freebase(o) for o in objs.split())
            fout.write(f"{strip_freebase(s.strip())}\t{strip_freebase(r.strip())}\t{objs}\n")


def _normalize_aliases(src: Path, dst: Path, report: IngestReport):
    with open(src, encoding="utf-8") as fin, open(dst, "w", encoding="utf-8", newline="\n") as fout:
        for lineno, line in enumerate(fin, 1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            fields = line.split("\t")
            if len(fields) != 2 or not fields[0].strip() or not fields[1].strip():
                report.rejected_lines.append({"file": src.name, "line": lineno,
                                              "reason": f"expected 2 fields, got {len(fields)}"})
                continue
            fout.write(f"{strip_freebase(fields[0].strip())}\t{fields[1].strip()}\n")


def ingest(raw_dir, out_dir, triples_file=None, aliases_file=None) -> IngestReport:
    """Normalize the raw distribution found in ``raw_dir`` into ``out_dir``.

    Writes ``triples.tsv``, ``aliases.tsv`` and one ``<split>.tsv`` per split
    found. Raises :class:`DataError` when nothing usable is present.
    """
    raw_dir, out_dir = Path(raw_dir), Path(out_dir)
    if not raw_dir.is_dir() or not any(raw_dir.iterdir()):
        raise DataError(f"no input files in {raw_dir}")
    triples_src = Path(triples_file) if triples_file else _find(raw_dir, RAW_TRIPLES_NAMES)
    aliases_src = Path(aliases_file) if aliases_file else _find(raw_dir, RAW_ALIAS_NAMES)
    split_src = {s: _find(raw_dir, RAW_SPLIT_NAMES[s]) for s in SPLITS}
    missing = []
    if triples_src is None or not triples_src.is_file():
        missing.append("triples file (" + " / ".join(RAW_TRIPLES_NAMES) + ")")
    if aliases_src is None or not aliases_src.is_file():
        missing.append("aliases file (" + " / ".join(RAW_ALIAS_NAMES) + ")")
    if not any(split_src.values()):
        missing.append("dataset split files")
    if missing:
        raise DataError(f"no input files in {raw_dir}: missing " + ", ".join(missing))

    os.makedirs(out_dir, exist_ok=True)
    report = IngestReport()
    triples_out, aliases_out = out_dir / "triples.tsv", out_dir / "aliases.tsv"
    _normalize_triples(triples_src, triples_out, report)
    _normalize_aliases(aliases_src, aliases_out, report)
    report.outputs = {"triples": str(triples_out), "aliases": str(aliases_out)}
    for split, src in split_src.items():
        if src is None:
            continue
        with open(src, encoding="utf-8") as fh:
            examples, rejected = parse_dataset_lines(fh, split, strict=False)
        report.rejected_lines.extend({"file": src.name, **r} for r in rejected)
        dst = out_dir / f"{split}.tsv"
        write_dataset(dst, examples)
        report.splits[split] = len(examples)
        report.outputs[split] = str(dst)
    kg = load_kg_files(triples_out, aliases_out)
    report.kg = kg.report.to_json()
    return report
