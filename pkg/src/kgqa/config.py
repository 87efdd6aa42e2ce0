"""Run configuration: one INI file, overridable from the command line.

Example::

    [paths]
    raw_dir = raw
    data_dir = data
    tagger_embeddings = raw/glove.txt
    classifier_embeddings = raw/fasttext.vec
    checkpoint_dir = checkpoints
    report_dir = reports

    [tagger]
    lr = 0.0001
    patience = 3
    epochs = 30
    k = 10

    [classifier]
    lr = 0.0001
    amsgrad = true
    batch_size = 32

    [audit]
    table_scope = all          ; all | train
    guess_rule = dataset_then_kg

Relative paths resolve against the config file's directory. Hidden size,
batch size and epoch counts are conventions, not published values.
"""

from __future__ import annotations

import configparser
import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path

from .audit import GUESS_RULES
from .relation import ClassifierConfig
from .tagger import TaggerConfig


class ConfigError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass
class Paths:
    raw_dir: str = "raw"
    data_dir: str = "data"
    raw_triples: str = ""
    raw_aliases: str = ""
    tagger_embeddings: str = ""
    classifier_embeddings: str = ""
    checkpoint_dir: str = "checkpoints"
    report_dir: str = "reports"

    def split(self, name):
        return os.path.join(self.data_dir, f"{name}.tsv")

    @property
    def triples(self):
        return os.path.join(self.data_dir, "triples.tsv")

    @property
    def aliases(self):
        return os.path.join(self.data_dir, "aliases.tsv")

    @property
    def tagger_checkpoint(self):
        return os.path.join(self.checkpoint_dir, "tagger.npz")

    @property
    def classifier_checkpoint(self):
        return os.path.join(self.checkpoint_dir, "classifier.npz")


@dataclass
class AuditConfig:
    table_scope: str = "all"
    guess_rule: str = "dataset_then_kg"


@dataclass
class EvalConfig:
    sample_size: int = 5
    seed: int = 0


@dataclass
class RunConfig:
    paths: Paths = field(default_factory=Paths)
    tagger: TaggerConfig = field(default_factory=TaggerConfig)
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    audit: AuditConfig = field(default_factory=AuditConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    SECTIONS = ("paths", "tagger", "classifier", "audit", "eval")

    @classmethod
    def load(cls, path=None, overrides=()) -> "RunConfig":
        """Read ``path`` (optional) and apply ``section.key=value`` overrides."""
        cfg = cls()
        errors = []
        base = Path(".")
        parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
        if path is not None:
            if not os.path.isfile(path):
                raise ConfigError([f"config file not found: {path}"])
            parser.read(path, encoding="utf-8")
            base = Path(path).resolve().parent
        for section in parser.sections():
            if section not in cls.SECTIONS:
                errors.append(f"unknown section [{section}]")
                continue
            for key, value in parser.items(section):
                errors.extend(cfg._set(section, key, value))
        for item in overrides:
            if "=" not in item or "." not in item.split("=", 1)[0]:
                errors.append(f"override {item!r} is not section.key=value")
                continue
            dotted, value = item.split("=", 1)
            section, key = dotted.split(".", 1)
            errors.extend(cfg._set(section.strip(), key.strip(), value.strip()))
        if errors:
            raise ConfigError(errors)
        for f in dataclasses.fields(cfg.paths):
            value = getattr(cfg.paths, f.name)
            if value and not os.path.isabs(value):
                setattr(cfg.paths, f.name, str(base / value))
        return cfg

    def _set(self, section, key, value):
        if section not in self.SECTIONS:
            return [f"unknown section {section!r}"]
        target = getattr(self, section)
        fields = {f.name: f for f in dataclasses.fields(target)}
        if key not in fields:
            return [f"unknown key {section}.{key}"]
        current = getattr(target, key)
        try:
            if isinstance(current, bool):
                lowered = value.lower()
                if lowered not in ("true", "false", "1", "0", "yes", "no"):
                    raise ValueError(value)
                parsed = lowered in ("true", "1", "yes")
            elif isinstance(current, int):
                parsed = int(value)
            elif isinstance(current, float):
                parsed = float(value)
            else:
                parsed = value
        except ValueError:
            return [f"{section}.{key}: cannot parse {value!r} as {type(current).__name__}"]
        setattr(target, key, parsed)
        return []

    def set_seed(self, seed: int):
        self.tagger.seed = seed
        self.classifier.seed = seed
        self.eval.seed = seed

    def validate(self, command: str, **kw) -> list[str]:
        """Every problem that would stop ``command``, without side effects."""
        errors = self.tagger.validate() + self.classifier.validate()
        if self.audit.table_scope not in ("all", "train"):
            errors.append("audit.table_scope must be 'all' or 'train'")
        if self.audit.guess_rule not in GUESS_RULES:
            errors.append(f"audit.guess_rule must be one of {GUESS_RULES}")
        p = self.paths

        def need(path, what):
            if not path:
                errors.append(f"{what} path is not configured")
            elif not os.path.exists(path):
                errors.append(f"{what} not found: {path}")

        if command == "ingest":
            need(p.raw_dir, "raw input directory")
        if command in ("train", "audit", "eval", "predict"):
            need(p.triples, "triples (run ingest first)")
            need(p.aliases, "aliases (run ingest first)")
        if command == "train":
            need(p.split("train"), "train split")
            if kw.get("target") == "tagger":
                need(p.tagger_embeddings, "tagger embeddings")
            elif kw.get("target") == "classifier":
                need(p.classifier_embeddings, "classifier embeddings")
        if command == "audit":
            for part in kw["split"].split("+"):
                need(p.split(part), f"{part} split")
        if command == "eval":
            need(p.split(kw["split"]), f"{kw['split']} split")
        if command in ("eval", "predict"):
            need(p.tagger_checkpoint, "tagger checkpoint")
            need(p.classifier_checkpoint, "classifier checkpoint")
        return errors

    def to_ini(self) -> str:
        lines = []
        for section in self.SECTIONS:
            lines.append(f"[{section}]")
            for f in dataclasses.fields(getattr(self, section)):
                value = getattr(getattr(self, section), f.name)
                lines.append(f"{f.name} = {str(value).lower() if isinstance(value, bool) else value}")
            lines.append("")
        return "\n".join(lines)
