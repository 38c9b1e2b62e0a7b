"""scikit-learn style wrappers around the augmentation, training, and
refinement pipelines, so they compose with Pipeline/clone/grid tooling.

The functional core stays in degrade/selfprior/refine; these classes only
hold parameters and translate fit/transform/predict calls.
"""

from __future__ import annotations

from pathlib import Path

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .degrade import AugmentConfig, augment
from .iqa import MetricHandle
from .refine import RefineConfig, TeacherStudentState, refine_loop
from .restorer import LinearPatchRestorer, RestorerModel, model_from_checkpoint
from .rng import RngStream
from .selfprior import TrainConfig, train_prior
from .validation import check_image_list


def _as_metric(metric) -> MetricHandle:
    if isinstance(metric, MetricHandle):
        return metric.validate()
    return MetricHandle.parse(str(metric))


class SevereAugmenter(TransformerMixin, BaseEstimator):
    """Transformer that degrades clear images with the severe pipeline.

    transform() is deterministic given random_state: every call re-derives
    the same stream, so equal inputs give equal outputs.
    """

    def __init__(
        self,
        blend_min=0.001,
        blend_max=0.1,
        noise_weight=0.1,
        mild_noise_weight=0.01,
        glow_count=(2, 10),
        glow_size=(15, 80),
        glow_gain=1.0,
        mild_glow_gain=0.5,
        blend_regions=8,
        blend_region_size=64,
        blend_jitter=0.04,
        severity_ratio=1.0,
        light_bank=None,
        random_state=0,
    ):
        self.blend_min = blend_min
        self.blend_max = blend_max
        self.noise_weight = noise_weight
        self.mild_noise_weight = mild_noise_weight
        self.glow_count = glow_count
        self.glow_size = glow_size
        self.glow_gain = glow_gain
        self.mild_glow_gain = mild_glow_gain
        self.blend_regions = blend_regions
        self.blend_region_size = blend_region_size
        self.blend_jitter = blend_jitter
        self.severity_ratio = severity_ratio
        self.light_bank = light_bank
        self.random_state = random_state

    def config(self) -> AugmentConfig:
        return AugmentConfig(
            blend_min=self.blend_min,
            blend_max=self.blend_max,
            noise_weight=self.noise_weight,
            mild_noise_weight=self.mild_noise_weight,
            glow_count=tuple(self.glow_count),
            glow_size=tuple(self.glow_size),
            glow_gain=self.glow_gain,
            mild_glow_gain=self.mild_glow_gain,
            blend_regions=self.blend_regions,
            blend_region_size=self.blend_region_size,
            blend_jitter=self.blend_jitter,
            severity_ratio=self.severity_ratio,
            light_bank=self.light_bank,
        ).validate()

    def fit(self, X=None, y=None):
        self.config()
        return self

    def transform(self, X):
        return [img for img, _ in self.transform_with_records(X)]

    def transform_with_records(self, X):
        cfg = self.config()
        images = check_image_list(X)
        rng = RngStream(self.random_state)
        return [augment(img, cfg, rng) for img in images]


class SelfPriorLearner(BaseEstimator):
    """Fits a patch restorer by inverting on-the-fly severe degradations."""

    def __init__(
        self,
        radius=2,
        steps=500,
        batch_size=8,
        learning_rate=1e-3,
        loss="mse",
        crop_size=64,
        augment_config=None,
        random_state=0,
    ):
        self.radius = radius
        self.steps = steps
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.loss = loss
        self.crop_size = crop_size
        self.augment_config = augment_config
        self.random_state = random_state

    def fit(self, X, y=None):
        if isinstance(X, (str, Path)):
            clear = X
            channels = 3
        else:
            clear = check_image_list(X)
            channels = clear[0].shape[2]
        aug_cfg = self.augment_config or AugmentConfig()
        cfg = TrainConfig(
            steps=self.steps,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            loss=self.loss,
            crop_size=self.crop_size,
            seed=self.random_state,
        )
        model = LinearPatchRestorer(radius=self.radius, channels=channels)
        self.model_, self.loss_trace_ = train_prior(clear, aug_cfg, cfg, model)
        return self

    def predict(self, X):
        if not hasattr(self, "model_"):
            raise NotFittedError("call fit before predict")
        return [self.model_.predict(img) for img in check_image_list(X)]


class SelfRefiner(BaseEstimator):
    """Refines a trained restorer on unlabeled degraded images.

    `model` may be a RestorerModel, a checkpoint path, or None for an
    identity patch restorer. After fit, teacher_ holds the refined model
    and audit_ the per-step gate decisions.
    """

    def __init__(
        self,
        model=None,
        patch_size=32,
        stride=8,
        var_threshold=0.005,
        score_threshold=0.0,
        ema_momentum=0.9999,
        steps=50,
        batch_size=4,
        learning_rate=2e-5,
        metric="contrast",
        probe_count=4,
        probe_mode="holdout",
        gate_every=1,
        gate_mode="difference",
        degradation=None,
        random_state=0,
    ):
        self.model = model
        self.patch_size = patch_size
        self.stride = stride
        self.var_threshold = var_threshold
        self.score_threshold = score_threshold
        self.ema_momentum = ema_momentum
        self.steps = steps
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.metric = metric
        self.probe_count = probe_count
        self.probe_mode = probe_mode
        self.gate_every = gate_every
        self.gate_mode = gate_mode
        self.degradation = degradation
        self.random_state = random_state

    def _base_model(self, channels: int) -> RestorerModel:
        if self.model is None:
            return LinearPatchRestorer(radius=2, channels=channels)
        if isinstance(self.model, RestorerModel):
            return self.model
        return model_from_checkpoint(self.model)

    def config(self) -> RefineConfig:
        return RefineConfig(
            patch_size=self.patch_size,
            stride=self.stride,
            var_threshold=self.var_threshold,
            score_threshold=self.score_threshold,
            ema_momentum=self.ema_momentum,
            steps=self.steps,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            degradation=self.degradation or AugmentConfig(severity_ratio=0.0),
            metric=_as_metric(self.metric),
            probe_count=self.probe_count,
            probe_mode=self.probe_mode,
            gate_every=self.gate_every,
            gate_mode=self.gate_mode,
            seed=self.random_state,
        ).validate()

    def fit(self, X, y=None):
        if isinstance(X, (str, Path)):
            unlabeled = X
            channels = 3
        else:
            imgs = check_image_list(X)
            unlabeled = [(f"img{i:04d}", img) for i, img in enumerate(imgs)]
            channels = imgs[0].shape[2]
        state = TeacherStudentState.from_model(self._base_model(channels))
        state, self.audit_ = refine_loop(state, unlabeled, self.config())
        self.teacher_ = state.teacher
        self.student_ = state.student
        self.accepted_ = state.accepted
        self.rejected_ = state.rejected
        return self

    def predict(self, X):
        if not hasattr(self, "teacher_"):
            raise NotFittedError("call fit before predict")
        return [self.teacher_.predict(img) for img in check_image_list(X)]
