"""Training loop and the sklearn-style estimator facade.

``HetTransformerClassifier`` follows scikit-learn conventions (verbatim
init params, ``fit``/``predict``/``predict_proba``/``get_params``,
``NotFittedError`` before fit) so it slots into ecosystem tooling, but its
data argument is a :class:`~hetformer.dataset.Dataset` plus news-node ids
rather than a feature matrix: the features live in the graph.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError

from .content import ContentConfig
from .dataset import Dataset
from .errors import MissingLabel, MissingSample, NotANewsNode, TooFewSamples
from .graph import NodeType
from .metrics import MetricsReport, binary_report
from .model import HetTransformerModel, bce_loss
from . import autodiff as ad
from .rwr import NeighborSample
from .transformer import TransformerConfig


@dataclass
class Split:
    train: list[int]
    val: list[int]
    test: list[int]

    def as_dict(self) -> dict:
        return {"train": list(self.train), "val": list(self.val), "test": list(self.test)}


def split_news(
    ids,
    labels: dict[int, int],
    test_fraction: float = 0.10,
    val_share: float = 0.20,
    seed: int = 0,
) -> Split:
    """Stratified test / train / val split.

    Per class: ``test_fraction`` of the nodes go to the test set, and the
    remainder splits 4:1 (``val_share`` of it) into train and validation.
    Deterministic for a fixed seed.
    """
    ids = sorted(ids)
    if len(ids) < 10:
        raise TooFewSamples(f"need at least 10 labeled news, got {len(ids)}")
    for i in ids:
        if i not in labels:
            raise MissingLabel(i)

    rng = np.random.default_rng(seed)
    train, val, test = [], [], []
    for label in (0, 1):
        members = [i for i in ids if labels[i] == label]
        rng.shuffle(members)
        n = len(members)
        n_test = int(math.floor(test_fraction * n + 0.5))
        rest = n - n_test
        n_val = int(math.floor(val_share * rest + 0.5))
        test.extend(members[:n_test])
        val.extend(members[n_test:n_test + n_val])
        train.extend(members[n_test + n_val:])
    return Split(train=sorted(train), val=sorted(val), test=sorted(test))


class HetTransformerClassifier(BaseEstimator, ClassifierMixin):
    """News classifier over propagation neighborhoods.

    Parameters mirror the experiment knobs; all are stored verbatim.
    ``target_only`` drops every neighbor at model time (a content-only
    baseline on the identical architecture).
    """

    def __init__(
        self,
        unified_dim: int = 32,
        content_heads: int = 4,
        content_layers: int = 1,
        per_attribute_blocks: bool = False,
        xf_layers: int = 1,
        xf_heads: int = 4,
        ff_dim: int | None = None,
        dropout: float = 0.1,
        max_seq_len: int | None = None,
        head_hidden: int | None = None,
        literal_eq8: bool = False,
        ablate_decoder: bool = False,
        ablate_positional: bool = False,
        target_only: bool = False,
        lr: float = 1e-3,
        momentum: float = 0.0,
        max_epochs: int = 40,
        patience: int = 5,
        batch_size: int = 32,
        class_weight: dict | None = None,
        seed: int = 0,
        dtype: str = "float32",
        verbose: bool = False,
    ):
        self.unified_dim = unified_dim
        self.content_heads = content_heads
        self.content_layers = content_layers
        self.per_attribute_blocks = per_attribute_blocks
        self.xf_layers = xf_layers
        self.xf_heads = xf_heads
        self.ff_dim = ff_dim
        self.dropout = dropout
        self.max_seq_len = max_seq_len
        self.head_hidden = head_hidden
        self.literal_eq8 = literal_eq8
        self.ablate_decoder = ablate_decoder
        self.ablate_positional = ablate_positional
        self.target_only = target_only
        self.lr = lr
        self.momentum = momentum
        self.max_epochs = max_epochs
        self.patience = patience
        self.batch_size = batch_size
        self.class_weight = class_weight
        self.seed = seed
        self.dtype = dtype
        self.verbose = verbose

    # --- internals ---

    def _np_dtype(self):
        return {"float32": np.float32, "float64": np.float64}[self.dtype]

    def _build_model(self, dataset: Dataset) -> HetTransformerModel:
        content_cfg = ContentConfig(
            unified_dim=self.unified_dim,
            heads=self.content_heads,
            attention_layers=self.content_layers,
            per_attribute_blocks=self.per_attribute_blocks,
        )
        max_len = self.max_seq_len
        if max_len is None:
            max_len = max(2, dataset.max_sequence_len())
        xf_cfg = TransformerConfig(
            layers=self.xf_layers,
            heads=self.xf_heads,
            model_dim=self.unified_dim,
            ff_dim=self.ff_dim,
            dropout=self.dropout,
            max_len=max_len,
        )
        return HetTransformerModel(
            content_cfg,
            xf_cfg,
            dataset.attributes_by_type(),
            head_hidden=self.head_hidden,
            literal_eq8=self.literal_eq8,
            ablate_decoder=self.ablate_decoder,
            ablate_positional=self.ablate_positional,
            seed=self.seed,
            dtype=self._np_dtype(),
        )

    def _sample_for(self, dataset: Dataset, news_id: int) -> NeighborSample:
        if self.target_only:
            return NeighborSample.empty(news_id)
        sample = dataset.samples.get(news_id)
        if sample is None:
            raise MissingSample(news_id)
        return sample

    def _check_ids(self, dataset: Dataset, ids, need_labels: bool) -> list[int]:
        out = [int(i) for i in np.asarray(ids).ravel()]
        for i in out:
            if dataset.graph.node_type(i) is not NodeType.NEWS:
                raise NotANewsNode(i)
            if need_labels and i not in dataset.graph.labels:
                raise MissingLabel(i)
            self._sample_for(dataset, i)
        return out

    # --- sklearn-style API ---

    def fit(self, dataset: Dataset, train_ids=None, val_ids=None):
        """Train with SGD on cross-entropy; early-stop on validation accuracy.

        With no validation set the loop simply runs ``max_epochs``. The
        parameters of the best validation epoch are restored at the end.
        """
        labels = dataset.graph.labels
        if train_ids is None:
            train_ids = dataset.graph.labeled_news_ids()
        train_ids = self._check_ids(dataset, train_ids, need_labels=True)
        if not train_ids:
            raise TooFewSamples("no labeled news nodes to train on")
        if val_ids is not None:
            val_ids = self._check_ids(dataset, val_ids, need_labels=True)

        model = self._build_model(dataset)
        rng = np.random.default_rng(np.random.SeedSequence((self.seed, 0xE90C)))
        velocity = {name: np.zeros_like(p.data) for name, p in model.params.items()}
        weights = self.class_weight or {}

        history: list[dict] = []
        best_acc = -1.0
        best_state: dict[str, np.ndarray] | None = None
        best_epoch = -1
        stale = 0

        for epoch in range(1, self.max_epochs + 1):
            t0 = time.perf_counter()
            order = np.array(train_ids)
            rng.shuffle(order)
            epoch_loss = 0.0
            for start in range(0, len(order), self.batch_size):
                batch = order[start:start + self.batch_size]
                model.zero_grad()
                losses = []
                wsum = 0.0
                for news_id in batch:
                    news_id = int(news_id)
                    y = labels[news_id]
                    y_hat = model.predict_news(
                        news_id, self._sample_for(dataset, news_id),
                        dataset.tables, train=True, rng=rng,
                    )
                    w = float(weights.get(y, 1.0))
                    losses.append(ad.scale(bce_loss(y_hat, y), w))
                    wsum += w
                total = losses[0]
                for item in losses[1:]:
                    total = ad.add(total, item)
                batch_loss = ad.scale(total, 1.0 / wsum)
                ad.backward(batch_loss)
                epoch_loss += batch_loss.item() * len(batch)
                for name, p in model.params.items():
                    if p.grad is None:
                        continue
                    if self.momentum:
                        velocity[name] = self.momentum * velocity[name] + p.grad
                        p.data -= self.lr * velocity[name]
                    else:
                        p.data -= self.lr * p.grad
            epoch_loss /= len(order)

            row = {"epoch": epoch, "train_loss": epoch_loss}
            if val_ids:
                val_pred = [
                    int(self._predict_one(model, dataset, i) >= 0.5) for i in val_ids
                ]
                val_true = [labels[i] for i in val_ids]
                report = binary_report(val_true, val_pred)
                row["val_acc"] = report.accuracy
                row["val_f1_fake"] = report.per_class["fake"].f1
                row["val_f1_real"] = report.per_class["real"].f1
            row["seconds"] = time.perf_counter() - t0
            history.append(row)
            if self.verbose:
                print("  " + " ".join(f"{k}={v:.4g}" if isinstance(v, float) else f"{k}={v}"
                                      for k, v in row.items()))

            if val_ids:
                if row["val_acc"] > best_acc:
                    best_acc = row["val_acc"]
                    best_epoch = epoch
                    best_state = {n: p.data.copy() for n, p in model.params.items()}
                    stale = 0
                else:
                    stale += 1
                    if stale >= self.patience:
                        break

        if best_state is not None:
            for name, arr in best_state.items():
                model.params[name].data = arr
        self.model_ = model
        self.history_ = history
        self.best_epoch_ = best_epoch if best_epoch > 0 else len(history)
        self.n_epochs_ = len(history)
        self.classes_ = np.array([0, 1])
        return self

    def _predict_one(self, model: HetTransformerModel, dataset: Dataset, news_id: int) -> float:
        y_hat = model.predict_news(
            news_id, self._sample_for(dataset, news_id), dataset.tables, train=False
        )
        return y_hat.item()

    def _require_fitted(self):
        if not hasattr(self, "model_"):
            raise NotFittedError("call fit before predicting")

    def predict_proba(self, dataset: Dataset, ids) -> np.ndarray:
        self._require_fitted()
        ids = self._check_ids(dataset, ids, need_labels=False)
        p_real = np.array([self._predict_one(self.model_, dataset, i) for i in ids])
        return np.column_stack([1.0 - p_real, p_real])

    def predict(self, dataset: Dataset, ids) -> np.ndarray:
        return (self.predict_proba(dataset, ids)[:, 1] >= 0.5).astype(int)

    def score(self, dataset: Dataset, ids, y=None) -> float:
        return self.evaluate(dataset, ids, y).accuracy

    def evaluate(self, dataset: Dataset, ids, y=None) -> MetricsReport:
        ids = self._check_ids(dataset, ids, need_labels=y is None)
        if y is None:
            y = [dataset.graph.labels[i] for i in ids]
        return binary_report(y, self.predict(dataset, ids))


@dataclass
class TrainRun:
    config: dict
    split: Split
    history: list[dict]
    best_epoch: int
    test_report: MetricsReport
    classifier: HetTransformerClassifier = field(repr=False, default=None)

    def as_dict(self) -> dict:
        return {
            "config": self.config,
            "split_sizes": {k: len(v) for k, v in self.split.as_dict().items()},
            "history": self.history,
            "best_epoch": self.best_epoch,
            "test": self.test_report.as_dict(),
        }


def run_experiment(
    dataset: Dataset, clf: HetTransformerClassifier, split_seed: int | None = None
) -> TrainRun:
    """The full protocol: stratified 10% test split, 4:1 train/val on the
    rest, fit with early stopping, evaluate on the held-out test set."""
    labels = dataset.graph.labels
    split = split_news(
        dataset.graph.labeled_news_ids(),
        labels,
        seed=clf.seed if split_seed is None else split_seed,
    )
    clf.fit(dataset, split.train, val_ids=split.val)
    report = clf.evaluate(dataset, split.test)
    return TrainRun(
        config=clf.get_params(),
        split=split,
        history=clf.history_,
        best_epoch=clf.best_epoch_,
        test_report=report,
        classifier=clf,
    )
