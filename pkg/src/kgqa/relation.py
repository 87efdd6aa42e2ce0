"""Relation classifier over abstract predicates.

The predicate is encoded by a BiLSTM (concatenated final states), passed
through batch norm and a linear layer, then softmax-normalized over the
candidate relation set only.
"""

from __future__ import annotations

import copy
import logging
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import checkpoint
from .neural import Adam, BatchNorm, EmbeddingTable, NonFiniteError, Plateau, bi_encode, bi_encode_backward, init_bilstm
from .text import PredicateTemplate, QuestionExample, abstract_predicate, match_subject_alias

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ClfExample:
    template: PredicateTemplate
    candidates: frozenset
    gold: str

    def __post_init__(self):
        if not self.candidates or self.gold not in self.candidates:
            raise ValueError("gold relation must be among non-empty candidates")


@dataclass
class ClfDatasetStats:
    kept: int = 0
    no_alias_match: int = 0
    gold_not_in_candidates: int = 0


def build_clf_dataset(examples: Sequence[QuestionExample], kg):
    """Return ``(clf_examples, stats)``; questions whose gold subject is not
    mentioned, or whose gold relation is not reachable, are skipped."""
    out, stats = [], ClfDatasetStats()
    for q in examples:
        match = match_subject_alias(q, kg)
        if match is None:
            stats.no_alias_match += 1
            continue
        span, alias = match
        candidates = frozenset(kg.relations_over(kg.entities_with_alias(alias)))
        if q.gold_relation not in candidates:
            stats.gold_not_in_candidates += 1
            continue
        out.append(ClfExample(abstract_predicate(q.tokens, span), candidates, q.gold_relation))
        stats.kept += 1
    return out, stats


@dataclass
class ClassifierConfig:
    lr: float = 1e-4
    amsgrad: bool = True
    batch_size: int = 32
    patience: int = 3
    epochs: int = 30
    hidden: int = 128
    seed: int = 0
    bn_momentum: float = 0.1
    bn_eps: float = 1e-5

    def validate(self):
        errors = []
        if self.lr <= 0:
            errors.append("classifier.lr must be > 0")
        if self.patience < 1:
            errors.append("classifier.patience must be >= 1")
        if self.epochs < 0:
            errors.append("classifier.epochs must be >= 0")
        if self.batch_size < 2:
            errors.append("classifier.batch_size must be >= 2 (train-mode batch norm)")
        if self.hidden < 1:
            errors.append("classifier.hidden must be >= 1")
        return errors


def _masked_log_softmax(scores, idx):
    s = scores[idx]
    m = s.max()
    return s - m - np.log(np.exp(s - m).sum())


class ClassifierModel:
    def __init__(self, embeddings: EmbeddingTable, params: dict, bn: BatchNorm,
                 relations: Sequence[str], config: ClassifierConfig):
        self.embeddings = embeddings
        self.params = params
        self.bn = bn
        self.relations = list(relations)
        self.index = {r: i for i, r in enumerate(self.relations)}
        self.config = config

    @classmethod
    def init(cls, embeddings, relations, config: ClassifierConfig) -> "ClassifierModel":
        rng = np.random.default_rng(config.seed)
        H2 = 2 * config.hidden
        params = init_bilstm(rng, embeddings.dim, config.hidden)
        params.update(BatchNorm.init_params(H2))
        params["out_W"] = rng.uniform(-0.1, 0.1, (H2, len(relations)))
        params["out_b"] = np.zeros(len(relations))
        bn = BatchNorm(H2, eps=config.bn_eps, momentum=config.bn_momentum)
        return cls(embeddings, params, bn, sorted(relations), config)

    def encode(self, template: PredicateTemplate):
        _, final, cache = bi_encode(self.params, self.embeddings.embed(template.tokens))
        return final, cache

    def scores(self, template: PredicateTemplate) -> np.ndarray:
        """Inference-mode scores for every known relation."""
        final, _ = self.encode(template)
        z, _ = self.bn.forward(self.params, final[None, :], train=False)
        return (z @ self.params["out_W"] + self.params["out_b"])[0]

    def classify(self, template: PredicateTemplate, allowed) -> dict:
        """Probabilities over ``allowed``; every other relation gets 0.

        Allowed relations without a column score as -inf. If no allowed
        relation has a column the mass is spread uniformly.
        """
        allowed = sorted(set(allowed))
        if not allowed:
            raise ValueError("classify needs a non-empty allowed set")
        known = [r for r in allowed if r in self.index]
        unknown = [r for r in allowed if r not in self.index]
        if unknown:
            log.debug("relations without a classifier column: %s", unknown)
        if not known:
            return {r: 1.0 / len(allowed) for r in allowed}
        scores = self.scores(template)
        logp = _masked_log_softmax(scores, [self.index[r] for r in known])
        probs = {r: 0.0 for r in unknown}
        probs.update(zip(known, np.exp(logp).tolist()))
        return probs

    def batch_loss(self, batch: Sequence[ClfExample], train=True):
        """Mean candidate-masked NLL over ``batch`` and its gradients."""
        finals, caches = zip(*(self.encode(ex.template) for ex in batch))
        F = np.stack(finals)
        Z, bn_cache = self.bn.forward(self.params, F, train=train)
        S = Z @ self.params["out_W"] + self.params["out_b"]
        B = len(batch)
        dS = np.zeros_like(S)
        loss = 0.0
        for row, ex in enumerate(batch):
            idx = [self.index[r] for r in sorted(ex.candidates) if r in self.index]
            logp = _masked_log_softmax(S[row], idx)
            gold = idx.index(self.index[ex.gold])
            loss -= logp[gold]
            p = np.exp(logp)
            p[gold] -= 1.0
            dS[row, idx] = p / B
        grads = {"out_W": Z.T @ dS, "out_b": dS.sum(axis=0)}
        dZ = dS @ self.params["out_W"].T
        if train:
            bn_grads, dF = BatchNorm.backward(self.params, bn_cache, dZ)
        else:
            dF = dZ * self.params["bn_scale"] / np.sqrt(self.bn.running_var + self.bn.eps)
            xhat = (F - self.bn.running_mean) / np.sqrt(self.bn.running_var + self.bn.eps)
            bn_grads = {"bn_scale": (dZ * xhat).sum(axis=0), "bn_shift": dZ.sum(axis=0)}
        grads.update(bn_grads)
        for row, cache in enumerate(caches):
            g, _ = bi_encode_backward(self.params, cache, d_final=dF[row])
            for name, val in g.items():
                grads[name] = grads[name] + val if name in grads else val
        return loss / B, grads

    def predict(self, template, allowed) -> str:
        return argmax_relation(self.classify(template, allowed))

    def buffers(self) -> dict:
        return {"bn_running_mean": self.bn.running_mean, "bn_running_var": self.bn.running_var}

    def save(self, path, extra=None):
        extra = dict(extra or {}, relations=self.relations)
        checkpoint.save(path, "classifier", self.params, asdict(self.config), self.embeddings,
                        buffers=self.buffers(), extra=extra)

    @classmethod
    def load(cls, path) -> "ClassifierModel":
        meta, params, buffers, emb = checkpoint.load(path, "classifier")
        config = ClassifierConfig(**meta["config"])
        bn = BatchNorm(len(params["bn_scale"]), eps=config.bn_eps, momentum=config.bn_momentum,
                       running_mean=buffers["bn_running_mean"], running_var=buffers["bn_running_var"])
        return cls(emb, params, bn, meta["extra"]["relations"], config)


def argmax_relation(probs: dict) -> str:
    """Most probable relation; ties go to the lexicographically smallest path."""
    return min(probs, key=lambda r: (-probs[r], r))


def clf_accuracy(model: ClassifierModel, dataset: Sequence[ClfExample]) -> float:
    if not dataset:
        return 0.0
    return sum(model.predict(ex.template, ex.candidates) == ex.gold for ex in dataset) / len(dataset)


@dataclass
class ClfTrainResult:
    model: ClassifierModel
    log: list = field(default_factory=list)
    best_epoch: int = 0
    best_accuracy: float = 0.0


def _batches(order, size):
    chunks = [order[i:i + size] for i in range(0, len(order), size)]
    if len(chunks) > 1 and len(chunks[-1]) < 2:
        # train-mode batch norm cannot normalize a single row
        chunks[-2] = np.concatenate([chunks[-2], chunks[-1]])
        chunks.pop()
    return chunks


def train_classifier(dataset: Sequence[ClfExample], config: ClassifierConfig,
                     embeddings: Optional[EmbeddingTable] = None,
                     validation: Optional[Sequence[ClfExample]] = None,
                     init: Optional[ClassifierModel] = None) -> ClfTrainResult:
    """Minimize masked NLL with Adam/AMSGrad; on validation plateaus the
    batch size doubles (capped at the dataset size). Returns the
    best-validation model."""
    if len(dataset) < 2:
        raise ValueError("classifier training needs at least 2 examples")
    relations = sorted({r for ex in dataset for r in ex.candidates})
    if init is None:
        if embeddings is None:
            raise ValueError("need embeddings or an initial model")
        model = ClassifierModel.init(embeddings, relations, config)
    else:
        model = copy.deepcopy(init)
        model.config = config
    validation = dataset if validation is None else validation
    rng = np.random.default_rng(config.seed)
    opt = Adam(lr=config.lr, amsgrad=config.amsgrad)
    sched = Plateau(config.patience)
    batch_size = min(config.batch_size, len(dataset))
    best = (copy.deepcopy(model.params), copy.deepcopy(model.bn))
    best_acc, best_epoch = -1.0, 0
    history = []
    for epoch in range(1, config.epochs + 1):
        total = 0.0
        for batch_idx in _batches(rng.permutation(len(dataset)), batch_size):
            loss, grads = model.batch_loss([dataset[j] for j in batch_idx], train=True)
            total += loss * len(batch_idx)
            opt.step(model.params, grads)
        train_loss = total / len(dataset)
        if not np.isfinite(train_loss):
            raise NonFiniteError(f"classifier loss became non-finite at epoch {epoch}")
        val_acc = clf_accuracy(model, validation)
        entry = {"epoch": epoch, "loss": float(train_loss), "val_accuracy": val_acc, "batch_size": batch_size}
        if val_acc > best_acc:
            best_acc, best_epoch = val_acc, epoch
            best = (copy.deepcopy(model.params), copy.deepcopy(model.bn))
        if sched.step(val_acc):
            new_size = min(batch_size * 2, len(dataset))
            entry["event"] = "double_batch"
            entry["next_batch_size"] = new_size
            batch_size = new_size
        history.append(entry)
        log.info("classifier epoch %d loss %.4f val %.4f batch %d", epoch, train_loss, val_acc, batch_size)
    if config.epochs > 0:
        model.params, model.bn = best
    else:
        best_acc = clf_accuracy(model, validation)
    return ClfTrainResult(model, history, best_epoch, best_acc)
