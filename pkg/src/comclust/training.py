"""Training loops: supervised deep clustering (SDC), unsupervised deep
clustering on GMM pseudo-labels (UDC), and the weighted-cross-entropy
classifier baseline, plus triplet sampling and split evaluation."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import encoder as enc
from . import gmm as gmm_mod
from .autodiff import backward, grad_of, make_rng
from .dataio import TRAIN, LabeledDataset
from .encoder import AdamConfig, EncoderConfig, ParamStore
from .errors import (MissingClassError, NonFiniteLossError,
                     TooFewSamplesError)
from .losses import (C_MAJ, C_MIN, ClassWeights, MarginSpec, com_triplet_loss,
                     triplet_loss_batch, udc_com_loss, weighted_cross_entropy)
from .metrics import roc_auc, weighted_metrics
from .prototypes import (Prototypes, batch_centers, infer_label,
                         malignancy_score, update_prototypes)

log = logging.getLogger(__name__)

LOSS_COM = "com"
LOSS_TRIPLET = "triplet"


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 15
    epochs: int = 15
    margin: MarginSpec = MarginSpec("adaptive")
    loss_kind: str = LOSS_COM            # "com" or "triplet"
    seed: int = 0
    adam: AdamConfig = AdamConfig()
    hidden: tuple = (64, 64)
    embedding_dim: int = 32
    dropout_rate: float = 0.3
    gmm: gmm_mod.GmmConfig = field(default_factory=gmm_mod.GmmConfig)

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.loss_kind not in (LOSS_COM, LOSS_TRIPLET):
            raise ValueError(f"unknown loss kind {self.loss_kind!r}")

    def encoder_config(self, input_dim: int) -> EncoderConfig:
        return EncoderConfig(input_dim, tuple(self.hidden),
                             self.embedding_dim, self.dropout_rate)


@dataclass
class TrainLog:
    losses: list = field(default_factory=list)
    separations: list = field(default_factory=list)
    gmm_nlls: list = field(default_factory=list)
    prototypes: Prototypes = None
    params: ParamStore = None
    encoder_config: EncoderConfig = None


def _training_split(dataset: LabeledDataset):
    if dataset.splits is None:
        return dataset.features, dataset.labels
    return dataset.subset(TRAIN)


def _iterations(n_train: int, config: TrainConfig) -> int:
    t = config.epochs * (n_train // config.batch_size)
    if t < 1:
        raise TooFewSamplesError(
            f"{n_train} training samples with batch size {config.batch_size} "
            f"and {config.epochs} epochs give zero iterations")
    return t


def sample_triplets(labels: np.ndarray, m: int, rng):
    """Sample M (anchor, positive, negative) index triples.

    Anchors are uniform over the split; P is uniform over the anchor's class
    excluding the anchor itself when the class has more than one member
    (otherwise P = A, with a warning); N is uniform over the other class.
    """
    labels = np.asarray(labels, dtype=int)
    by_class = {c: np.flatnonzero(labels == c) for c in (C_MAJ, C_MIN)}
    for c, idx in by_class.items():
        if len(idx) == 0:
            raise MissingClassError(f"no samples of class {c}")
    anchors = rng.integers(0, len(labels), size=m)
    positives = np.empty(m, dtype=int)
    negatives = np.empty(m, dtype=int)
    for i, a in enumerate(anchors):
        same = by_class[labels[a]]
        other = by_class[1 - labels[a]]
        if len(same) == 1:
            log.warning("class %d has a single sample; using P = A", labels[a])
            positives[i] = a
        else:
            p = same[rng.integers(0, len(same))]
            while p == a:
                p = same[rng.integers(0, len(same))]
            positives[i] = p
        negatives[i] = other[rng.integers(0, len(other))]
    return anchors, positives, negatives


def _check_finite(value: float, iteration: int):
    if not np.isfinite(value):
        raise NonFiniteLossError(f"loss {value} at iteration {iteration}")


def train_sdc(dataset: LabeledDataset, config: TrainConfig) -> TrainLog:
    """Supervised deep clustering.

    Per iteration: sample triplets, embed them, take a COM-triplet (or
    traditional triplet) gradient step, then offer the per-class batch
    centers to the running prototype pair, which only ever moves to a more
    separated pair.
    """
    x, y = _training_split(dataset)
    t = _iterations(len(y), config)
    m = config.batch_size
    rng = make_rng(config.seed)
    enc_config = config.encoder_config(x.shape[1])
    store = enc.init_encoder_params(enc_config, rng)

    result = TrainLog(encoder_config=enc_config)
    proto = None
    for it in range(t):
        a_idx, p_idx, n_idx = sample_triplets(y, m, rng)
        rows = np.concatenate([a_idx, p_idx, n_idx])
        param_vars = store.wrap()
        emb = enc.forward(param_vars, enc_config, x[rows],
                          train_mode=True, rng=rng)
        e_a = ad.take_rows(emb, np.arange(m))
        e_p = ad.take_rows(emb, np.arange(m, 2 * m))
        e_n = ad.take_rows(emb, np.arange(2 * m, 3 * m))
        if config.loss_kind == LOSS_COM:
            loss = com_triplet_loss(e_a, e_p, e_n, config.margin)
        else:
            loss = triplet_loss_batch(e_a, e_p, e_n, config.margin.alpha)
        _check_finite(loss.item(), it)
        backward(loss)
        enc.adam_step(store, [grad_of(p) for p in param_vars], config.adam)

        classes = y[rows]
        cl_min_cand, cl_maj_cand = batch_centers(emb.value, classes)
        proto = update_prototypes(proto, cl_min_cand, cl_maj_cand)
        result.losses.append(loss.item())
        result.separations.append(proto.separation)

    result.prototypes = proto.with_feature_mask()
    result.params = store
    return result


def train_udc(dataset: LabeledDataset, config: TrainConfig) -> TrainLog:
    """Unsupervised deep clustering: labels are ignored.

    Per iteration a batch of 3M samples is embedded, a fresh two-component
    GMM is fitted on those embeddings to produce pseudo-labels, and each
    sample acts as an anchor against the two component means (which also
    serve as the candidate prototype pair).
    """
    x, y = _training_split(dataset)
    t = _iterations(len(y), config)
    m3 = 3 * config.batch_size
    if len(y) < 2 * m3:
        log.warning("training split has %d samples; at least %d recommended "
                    "for UDC batches of %d", len(y), 2 * m3, m3)
    rng = make_rng(config.seed)
    enc_config = config.encoder_config(x.shape[1])
    store = enc.init_encoder_params(enc_config, rng)

    result = TrainLog(encoder_config=enc_config)
    proto = None
    for it in range(t):
        rows = rng.choice(len(y), size=min(m3, len(y)), replace=len(y) < m3)
        param_vars = store.wrap()
        emb = enc.forward(param_vars, enc_config, x[rows],
                          train_mode=True, rng=rng)
        model = gmm_mod.fit_em(emb.value, config.gmm,
                               seed=int(rng.integers(2 ** 31)))
        labels = gmm_mod.responsibilities(model, emb.value)
        k_min = labels.minority_component
        pseudo = np.where(labels.assignments == k_min, C_MIN, C_MAJ)
        mu_min, mu_maj = model.means[k_min], model.means[1 - k_min]

        loss = udc_com_loss(emb, pseudo, mu_min, mu_maj,
                            config.margin if config.loss_kind == LOSS_COM
                            else MarginSpec("constant", config.margin.alpha))
        _check_finite(loss.item(), it)
        backward(loss)
        enc.adam_step(store, [grad_of(p) for p in param_vars], config.adam)

        proto = update_prototypes(proto, mu_min, mu_maj)
        result.losses.append(loss.item())
        result.separations.append(proto.separation)
        result.gmm_nlls.append(model.nll_trace[-1])

    result.prototypes = proto.with_feature_mask()
    result.params = store
    return result


@dataclass
class ClassifierModel:
    params: ParamStore          # encoder arrays followed by head (W, b)
    encoder_config: EncoderConfig

    def predict_proba(self, x) -> np.ndarray:
        """Eval-mode minority-class probabilities."""
        param_vars = self.params.wrap()
        n_enc = 2 * (len(self.encoder_config.layer_dims) - 1)
        emb = enc.forward(param_vars[:n_enc], self.encoder_config, x,
                          train_mode=False)
        return enc.minority_probability(param_vars[n_enc:], emb).value


EQUAL = "equal"
INVERSE_FREQUENCY = "inverse_frequency"


def batch_class_weights(batch_labels: np.ndarray, weighting: str) -> ClassWeights:
    """Per-iteration class weights. inverse_frequency sets w_c proportional
    to batch_size / (2 * count_c); a batch missing a class falls back to
    equal weights."""
    if weighting == EQUAL:
        return ClassWeights(1.0, 1.0)
    n = len(batch_labels)
    n_min = int(np.sum(batch_labels == C_MIN))
    n_maj = n - n_min
    if n_min == 0 or n_maj == 0:
        return ClassWeights(1.0, 1.0)
    return ClassWeights(w_min=n / (2.0 * n_min), w_maj=n / (2.0 * n_maj))


def train_classifier(dataset: LabeledDataset, config: TrainConfig,
                     weighting: str = INVERSE_FREQUENCY) -> tuple:
    """Direct-classifier baseline: the same encoder topped with a 2-output
    softmax head, trained with (optionally inverse-frequency weighted)
    cross-entropy. Returns (ClassifierModel, TrainLog)."""
    if weighting not in (EQUAL, INVERSE_FREQUENCY):
        raise ValueError(f"unknown weighting {weighting!r}")
    x, y = _training_split(dataset)
    for c in (C_MAJ, C_MIN):
        if not np.any(y == c):
            raise MissingClassError(f"no samples of class {c}")
    t = _iterations(len(y), config)
    m = config.batch_size
    rng = make_rng(config.seed)
    enc_config = config.encoder_config(x.shape[1])
    store = enc.init_encoder_params(enc_config, rng)
    store.arrays.extend(enc.init_head_params(enc_config.embedding_dim, 2, rng))
    store = ParamStore(store.arrays)   # reset moments to cover the head
    n_enc = 2 * (len(enc_config.layer_dims) - 1)

    result = TrainLog(encoder_config=enc_config)
    for it in range(t):
        rows = rng.choice(len(y), size=min(m, len(y)), replace=len(y) < m)
        weights = batch_class_weights(y[rows], weighting)
        param_vars = store.wrap()
        emb = enc.forward(param_vars[:n_enc], enc_config, x[rows],
                          train_mode=True, rng=rng)
        probs = enc.minority_probability(param_vars[n_enc:], emb)
        loss = weighted_cross_entropy(y[rows], probs, weights)
        _check_finite(loss.item(), it)
        backward(loss)
        enc.adam_step(store, [grad_of(p) for p in param_vars], config.adam)
        result.losses.append(loss.item())

    result.params = store
    return ClassifierModel(store, enc_config), result


def evaluate_prototypes(params: ParamStore, enc_config: EncoderConfig,
                        proto: Prototypes, x, y) -> dict:
    """Prototype-distance inference over a split: per-sample labels and
    scores plus aggregate weighted metrics and AUC (when both classes are
    present)."""
    emb = enc.embed(params, enc_config, x)
    preds = np.empty(len(emb), dtype=int)
    scores = np.empty(len(emb))
    for i, e in enumerate(emb):
        preds[i], _, _ = infer_label(e, proto)
        scores[i] = malignancy_score(e, proto)
    return _aggregate(np.asarray(y, dtype=int), preds, scores)


def evaluate_classifier(model: ClassifierModel, x, y) -> dict:
    probs = model.predict_proba(x)
    preds = (probs >= 0.5).astype(int)
    return _aggregate(np.asarray(y, dtype=int), preds, probs)


def _aggregate(y: np.ndarray, preds: np.ndarray, scores: np.ndarray) -> dict:
    out = weighted_metrics(y, preds)
    out["auc"] = (roc_auc(y, scores)
                  if len(np.unique(y)) == 2 else None)
    return {"metrics": out,
            "predictions": preds.tolist(),
            "scores": scores.tolist()}


def best_permutation_accuracy(y_true, y_pred) -> float:
    """Clustering accuracy up to label permutation (for unsupervised runs)."""
    y_true = np.asarray(y_true, dtype=int)
    y_pred = np.asarray(y_pred, dtype=int)
    direct = float(np.mean(y_true == y_pred))
    flipped = float(np.mean(y_true == 1 - y_pred))
    return max(direct, flipped)
