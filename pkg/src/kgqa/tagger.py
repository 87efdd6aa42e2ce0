"""Subject-mention tagger: BiLSTM emissions feeding a two-label (I/O)
linear-chain CRF, trained by conditional log likelihood."""

from __future__ import annotations

import copy
import logging
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import checkpoint, crf
from .neural import Adam, EmbeddingTable, NonFiniteError, Plateau, bi_encode, bi_encode_backward, init_bilstm
from .text import INSIDE, OUTSIDE, TokenSpan, spans_from_tags

log = logging.getLogger(__name__)

LABELS = (INSIDE, OUTSIDE)
LABEL_INDEX = {lab: i for i, lab in enumerate(LABELS)}


@dataclass
class TaggerConfig:
    lr: float = 1e-4
    patience: int = 3
    epochs: int = 30
    batch_size: int = 32
    hidden: int = 128
    seed: int = 0
    k: int = 10

    def validate(self):
        errors = []
        if self.lr <= 0:
            errors.append("tagger.lr must be > 0")
        if self.patience < 1:
            errors.append("tagger.patience must be >= 1")
        if self.epochs < 0:
            errors.append("tagger.epochs must be >= 0")
        if self.batch_size < 1:
            errors.append("tagger.batch_size must be >= 1")
        if self.hidden < 1:
            errors.append("tagger.hidden must be >= 1")
        if self.k < 1:
            errors.append("tagger.k must be >= 1")
        return errors


@dataclass
class TagSequence:
    labels: tuple[str, ...]
    score: float


class TaggerModel:
    """Frozen embeddings, BiLSTM encoder, 2H->2 emission projection and CRF
    scores ``trans[prev][next]``, ``start`` and ``end``. Label order is
    (I, O)."""

    def __init__(self, embeddings: EmbeddingTable, params: dict, config: TaggerConfig):
        self.embeddings = embeddings
        self.params = params
        self.config = config

    @classmethod
    def init(cls, embeddings: EmbeddingTable, config: TaggerConfig) -> "TaggerModel":
        rng = np.random.default_rng(config.seed)
        params = init_bilstm(rng, embeddings.dim, config.hidden)
        params["proj_W"] = rng.uniform(-0.1, 0.1, (2, 2 * config.hidden))
        params["proj_b"] = rng.uniform(-0.1, 0.1, 2)
        params["trans"] = rng.uniform(-0.1, 0.1, (2, 2))
        params["start"] = np.zeros(2)
        params["end"] = np.zeros(2)
        return cls(embeddings, params, config)

    # -- scoring -----------------------------------------------------------

    def emissions(self, tokens):
        X = self.embeddings.embed(tokens)
        outputs, _, cache = bi_encode(self.params, X)
        E = outputs @ self.params["proj_W"].T + self.params["proj_b"]
        return E, (outputs, cache)

    def _crf(self):
        p = self.params
        return p["trans"], p["start"], p["end"]

    def sequence_score(self, tokens, labels) -> float:
        if len(labels) != len(tokens):
            raise ValueError(f"{len(labels)} labels for {len(tokens)} tokens")
        E, _ = self.emissions(tokens)
        return crf.path_score(E, *self._crf(), [LABEL_INDEX[y] for y in labels])

    def log_partition(self, tokens) -> float:
        if not len(tokens):
            raise ValueError("log partition of an empty sentence is undefined")
        E, _ = self.emissions(tokens)
        return crf.log_partition(E, *self._crf())

    def nll(self, tokens, labels):
        """``(loss, grads)`` for one sentence; grads cover every trainable block."""
        if len(labels) != len(tokens) or not len(tokens):
            raise ValueError("labels must match a non-empty token sequence")
        E, (outputs, cache) = self.emissions(tokens)
        gold = np.array([LABEL_INDEX[y] for y in labels])
        loss, dE, dT, dstart, dend = crf.nll(E, *self._crf(), gold)
        grads, _ = bi_encode_backward(self.params, cache, d_outputs=dE @ self.params["proj_W"])
        grads["proj_W"] = dE.T @ outputs
        grads["proj_b"] = dE.sum(axis=0)
        grads["trans"] = dT
        grads["start"] = dstart
        grads["end"] = dend
        return loss, grads

    # -- decoding ----------------------------------------------------------

    def viterbi_topk(self, tokens, k: int) -> list[TagSequence]:
        if k < 1:
            raise ValueError("k must be >= 1")
        E, _ = self.emissions(tokens)
        return [TagSequence(tuple(LABELS[i] for i in lab), score)
                for lab, score in crf.viterbi_topk(E, *self._crf(), k)]

    def decode(self, tokens) -> tuple[str, ...]:
        return self.viterbi_topk(tokens, 1)[0].labels

    def topk_subject_spans(self, tokens, k: int) -> list[tuple[TokenSpan, float]]:
        """Candidate spans from the k best decodes, in decode order, deduplicated."""
        out, seen = [], set()
        for seq in self.viterbi_topk(tokens, k):
            for span in spans_from_tags(seq.labels):
                if span not in seen:
                    seen.add(span)
                    out.append((span, seq.score))
        return out

    # -- persistence -------------------------------------------------------

    def save(self, path, extra=None):
        checkpoint.save(path, "tagger", self.params, asdict(self.config), self.embeddings, extra=extra)

    @classmethod
    def load(cls, path) -> "TaggerModel":
        meta, params, _, emb = checkpoint.load(path, "tagger")
        return cls(emb, params, TaggerConfig(**meta["config"]))


def span_accuracy(model: TaggerModel, examples) -> float:
    """Fraction of sentences whose top-1 decode equals the gold labels."""
    if not examples:
        return 0.0
    hits = sum(model.decode(toks) == tuple(labs) for toks, labs in examples)
    return hits / len(examples)


@dataclass
class TrainResult:
    model: object
    log: list = field(default_factory=list)
    best_epoch: int = 0
    best_accuracy: float = 0.0


def check_tagging_examples(examples):
    for i, (toks, labs) in enumerate(examples):
        if len(toks) != len(labs) or not toks:
            raise ValueError(f"tagging example {i}: labels do not match tokens")
        if INSIDE not in labs:
            raise ValueError(f"tagging example {i} has no I label")


def train_tagger(examples: Sequence, config: TaggerConfig, embeddings: Optional[EmbeddingTable] = None,
                 validation: Optional[Sequence] = None, init: Optional[TaggerModel] = None) -> TrainResult:
    """Minimize mean CRF NLL with Adam, halving the learning rate on
    validation plateaus. Returns the best-validation model.

    ``examples`` are ``(tokens, IO labels)`` pairs. Without a validation
    set the training examples are scored instead.
    """
    check_tagging_examples(examples)
    if init is None:
        if embeddings is None:
            raise ValueError("need embeddings or an initial model")
        model = TaggerModel.init(embeddings, config)
    else:
        model = TaggerModel(init.embeddings, copy.deepcopy(init.params), config)
    validation = examples if validation is None else validation
    rng = np.random.default_rng(config.seed)
    opt = Adam(lr=config.lr)
    sched = Plateau(config.patience)
    best = copy.deepcopy(model.params)
    best_acc, best_epoch = -1.0, 0
    history = []
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(examples))
        total = 0.0
        for lo in range(0, len(order), config.batch_size):
            batch = order[lo:lo + config.batch_size]
            acc_grads = None
            for j in batch:
                loss, grads = model.nll(*examples[j])
                total += loss
                if acc_grads is None:
                    acc_grads = grads
                else:
                    for name, g in grads.items():
                        acc_grads[name] += g
            for g in acc_grads.values():
                g /= len(batch)
            opt.step(model.params, acc_grads)
        train_loss = total / len(examples)
        if not np.isfinite(train_loss):
            raise NonFiniteError(f"tagger loss became non-finite at epoch {epoch}")
        val_acc = span_accuracy(model, validation)
        history.append({"epoch": epoch, "train_loss": float(train_loss), "val_accuracy": val_acc, "lr": opt.lr})
        log.info("tagger epoch %d loss %.4f val %.4f lr %g", epoch, train_loss, val_acc, opt.lr)
        if val_acc > best_acc:
            best_acc, best_epoch = val_acc, epoch
            best = copy.deepcopy(model.params)
        if sched.step(val_acc):
            opt.lr /= 2
    if config.epochs > 0:
        model.params = best
    else:
        best_acc = span_accuracy(model, validation) if validation else 0.0
    return TrainResult(model, history, best_epoch, best_acc)


def build_tagging_dataset(questions, kg):
    """IO-labelled ``(tokens, labels)`` pairs from gold alias matches.

    Returns ``(examples, skipped)``; questions not mentioning their subject
    have no I label and are skipped.
    """
    from .text import match_subject_alias, tags_for_span

    out, skipped = [], 0
    for q in questions:
        match = match_subject_alias(q, kg)
        if match is None:
            skipped += 1
            continue
        out.append((q.tokens, tuple(tags_for_span(len(q.tokens), match[0]))))
    return out, skipped
