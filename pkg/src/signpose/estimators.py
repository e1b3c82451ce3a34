"""scikit-learn style estimators over pose sequences.

These wrap the functional pipeline (normalize / augment / classify) in
fit/transform/predict objects with get_params, so the toolkit composes with
sklearn pipelines and model selection. X is always a list of PoseSequence.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.exceptions import NotFittedError

from .augment import AugmentConfig, augment_sequence
from .models import PoseLSTMConfig, PoseTransformerConfig, forward
from .ndcore import softmax
from .normalize import NormalizationStrategy, normalize_sequence
from .train import batch_rows, fit_model, prepare_sequence, top_k_accuracy
from .validation import check_labels, check_pose_sequences


class SequenceNormalizer(TransformerMixin, BaseEstimator):
    """Apply one normalization strategy to every sequence.

    Parameters
    ----------
    strategy : str, default="com"
        One of "raw", "nose", "face", "com".
    """

    def __init__(self, strategy="com"):
        self.strategy = strategy

    def fit(self, X, y=None):
        check_pose_sequences(X)
        NormalizationStrategy(self.strategy)
        return self

    def transform(self, X):
        strategy = NormalizationStrategy(self.strategy)
        return [normalize_sequence(s, strategy) for s in check_pose_sequences(X)]


class SequenceAugmenter(TransformerMixin, BaseEstimator):
    """Stochastic augmentation keyed by (seed, position in X); stateless."""

    def __init__(self, jitter_sigma=0.01, scale_lo=0.8, scale_hi=1.2,
                 temporal_dropout_rate=0.05, seed=0):
        self.jitter_sigma = jitter_sigma
        self.scale_lo = scale_lo
        self.scale_hi = scale_hi
        self.temporal_dropout_rate = temporal_dropout_rate
        self.seed = seed

    def _config(self) -> AugmentConfig:
        return AugmentConfig(
            jitter_sigma=self.jitter_sigma,
            scale_lo=self.scale_lo,
            scale_hi=self.scale_hi,
            temporal_dropout_rate=self.temporal_dropout_rate,
            seed=self.seed,
        )

    def fit(self, X, y=None):
        check_pose_sequences(X)
        self._config()
        return self

    def transform(self, X):
        cfg = self._config()
        return [augment_sequence(s, cfg, i) for i, s in enumerate(check_pose_sequences(X))]


class _PoseClassifier(ClassifierMixin, BaseEstimator):
    """Shared fit/predict machinery; subclasses supply the model config."""

    def _model_config(self, n_classes):
        raise NotImplementedError

    def _augment_config(self):
        if not self.augment:
            return None
        if isinstance(self.augment, AugmentConfig):
            return self.augment
        return AugmentConfig(**dict(self.augment))

    def fit(self, X, y):
        seqs = check_pose_sequences(X)
        labels = check_labels(y, len(seqs))
        self.classes_ = np.unique(labels)
        index = {c: i for i, c in enumerate(self.classes_)}
        y_idx = np.array([index[v] for v in labels], dtype=np.int64)
        prepared = [prepare_sequence(s, NormalizationStrategy.RAW, self.seq_len) for s in seqs]
        cfg = self._model_config(len(self.classes_))
        result = fit_model(
            cfg,
            prepared,
            y_idx,
            [str(c) for c in self.classes_],
            epochs=self.epochs,
            batch_size=self.batch_size,
            lr=self.lr,
            seed=self.seed,
            augment_cfg=self._augment_config(),
        )
        self.model_config_ = cfg
        self.params_ = result.params
        self.history_ = result.history
        self.n_features_in_ = cfg.input_dim
        return self

    def _check_fitted(self):
        if not hasattr(self, "params_"):
            raise NotFittedError(f"{type(self).__name__} is not fitted yet; call fit first")

    def decision_function(self, X):
        self._check_fitted()
        seqs = [
            prepare_sequence(s, NormalizationStrategy.RAW, self.seq_len)
            for s in check_pose_sequences(X)
        ]
        x, mask = batch_rows(seqs)
        out = forward(x, mask, self.model_config_, self.params_, training=False)
        return out.logits.data

    def predict_proba(self, X):
        return softmax(self.decision_function(X))

    def predict(self, X):
        logits = self.decision_function(X)
        return self.classes_[np.argmax(logits, axis=1)]

    def top_k_score(self, X, y, k=5) -> float:
        """Top-k accuracy under the deterministic low-index tie-break."""
        self._check_fitted()
        labels = check_labels(y, len(list(X)))
        index = {c: i for i, c in enumerate(self.classes_)}
        y_idx = np.array([index[v] for v in labels], dtype=np.int64)
        return top_k_accuracy(self.decision_function(X), y_idx, min(k, len(self.classes_)))


class PoseLSTMClassifier(_PoseClassifier):
    """Gloss classifier: frame embedding, (bi)LSTM, masked mean pooling.

    Expects already-normalized sequences (compose with SequenceNormalizer);
    they are resampled to ``seq_len`` frames internally.
    """

    def __init__(self, embed_dim=32, hidden_dim=64, bidirectional=True, dropout_rate=0.2,
                 epochs=30, batch_size=32, lr=1e-3, seq_len=32, seed=0, augment=None):
        self.embed_dim = embed_dim
        self.hidden_dim = hidden_dim
        self.bidirectional = bidirectional
        self.dropout_rate = dropout_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.seq_len = seq_len
        self.seed = seed
        self.augment = augment

    def _model_config(self, n_classes):
        return PoseLSTMConfig(
            n_classes=n_classes,
            embed_dim=self.embed_dim,
            hidden_dim=self.hidden_dim,
            bidirectional=self.bidirectional,
            dropout_rate=self.dropout_rate,
        )


class PoseTransformerClassifier(_PoseClassifier):
    """Gloss classifier: frame embedding plus positional encoding into a
    masked transformer encoder stack with mean pooling."""

    def __init__(self, d_model=256, n_heads=4, n_layers=3, dropout_rate=0.1,
                 inter_layer_dropout=False, epochs=30, batch_size=32, lr=1e-3,
                 seq_len=32, seed=0, augment=None):
        self.d_model = d_model
        self.n_heads = n_heads
        self.n_layers = n_layers
        self.dropout_rate = dropout_rate
        self.inter_layer_dropout = inter_layer_dropout
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.seq_len = seq_len
        self.seed = seed
        self.augment = augment

    def _model_config(self, n_classes):
        return PoseTransformerConfig(
            n_classes=n_classes,
            d_model=self.d_model,
            n_heads=self.n_heads,
            n_layers=self.n_layers,
            dropout_rate=self.dropout_rate,
            inter_layer_dropout=self.inter_layer_dropout,
        )
