"""Scikit-learn style estimator facade over the training harness.

X is a stack of per-video frame-feature matrices (n, T, D) or a list of
(T, D) arrays; y holds class names (strings) or integer indices. The
estimator plugs into sklearn pipelines and model selection via the
standard get_params/set_params contract.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .autodiff import no_grad
from .container import FrameFeatureSequence
from .model import DEFAULT_PROMPT_INIT, TrainConfig, forward
from .validation import check_labels, check_view_array


class VideoActionClassifier(BaseEstimator, ClassifierMixin):
    """Contrastive matching classifier over frozen frame features.

    Fitting runs the SGD loop over the motion encoder, prompt learner and
    communication block; prediction scores each video against the class
    text bank.
    """

    def __init__(self, frames_per_clip=8, max_step=4, prompt_len=5,
                 prompt_init=DEFAULT_PROMPT_INIT, adapter_mid=None, depth=1,
                 heads=8, ffn_expansion=2, motion_stream=True, map_enabled=True,
                 mcb_enabled=True, mcb_at_eval=True, tau=0.07, lr0=0.3,
                 momentum=0.9, epochs=50, max_steps=None, batch_size=8,
                 seed=0, eval_mode="view_average", class_names=None):
        self.frames_per_clip = frames_per_clip
        self.max_step = max_step
        self.prompt_len = prompt_len
        self.prompt_init = prompt_init
        self.adapter_mid = adapter_mid
        self.depth = depth
        self.heads = heads
        self.ffn_expansion = ffn_expansion
        self.motion_stream = motion_stream
        self.map_enabled = map_enabled
        self.mcb_enabled = mcb_enabled
        self.mcb_at_eval = mcb_at_eval
        self.tau = tau
        self.lr0 = lr0
        self.momentum = momentum
        self.epochs = epochs
        self.max_steps = max_steps
        self.batch_size = batch_size
        self.seed = seed
        self.eval_mode = eval_mode
        self.class_names = class_names

    def _make_config(self) -> TrainConfig:
        return TrainConfig(
            seed=self.seed, lr0=self.lr0, momentum=self.momentum,
            epochs=self.epochs, max_steps=self.max_steps,
            batch_size=self.batch_size, frames_per_clip=self.frames_per_clip,
            max_step=self.max_step, prompt_len=self.prompt_len,
            prompt_init=self.prompt_init, adapter_mid=self.adapter_mid,
            depth=self.depth, heads=self.heads, ffn_expansion=self.ffn_expansion,
            motion_stream=self.motion_stream, map_enabled=self.map_enabled,
            mcb_enabled=self.mcb_enabled, mcb_at_eval=self.mcb_at_eval,
            tau=self.tau, eval_mode=self.eval_mode,
        )

    def _resolve_names(self, y: np.ndarray) -> tuple[np.ndarray, list[str], np.ndarray]:
        classes, indices = np.unique(y, return_inverse=True)
        if classes.dtype.kind in ("U", "S", "O"):
            names = [str(c) for c in classes]
        else:
            if self.class_names is not None:
                if len(self.class_names) < len(classes):
                    raise ValueError(
                        f"class_names has {len(self.class_names)} entries, "
                        f"y holds {len(classes)} distinct labels")
                names = [str(self.class_names[int(c)]) for c in classes]
            else:
                names = [f"action {int(c):02d}" for c in classes]
        return classes, names, indices

    def fit(self, X, y):
        from .training import train_on_records

        views = check_view_array(X)
        y = check_labels(y, len(views))
        config = self._make_config()
        if views[0].shape[0] != config.frames_per_clip:
            raise ValueError(
                f"videos have {views[0].shape[0]} frames; set frames_per_clip to match "
                f"(got {config.frames_per_clip})")
        self.classes_, names, indices = self._resolve_names(y)
        records = [
            FrameFeatureSequence(video_id=f"sample_{i:05d}", view_id=0,
                                 frames=v.astype(np.float32), label_index=int(lbl))
            for i, (v, lbl) in enumerate(zip(views, indices))
        ]
        dim = views[0].shape[1]
        self.model_, self.loss_trace_ = train_on_records(records, names, dim, config)
        self.n_features_in_ = dim
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise RuntimeError("this VideoActionClassifier instance is not fitted yet")

    def predict_proba(self, X) -> np.ndarray:
        self._check_fitted()
        views = check_view_array(X)
        config = self._make_config()
        probs = np.zeros((len(views), len(self.classes_)))
        with no_grad():
            for i, v in enumerate(views):
                dist = forward(v, self.model_, config, training=False)
                probs[i] = dist.probs.data
        return probs

    def predict(self, X) -> np.ndarray:
        probs = self.predict_proba(X)
        return self.classes_[np.argmax(probs, axis=1)]
