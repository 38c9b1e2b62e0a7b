"""Quality-gated teacher-student refinement on unlabeled degraded images.

The teacher predicts every overlapping patch of an unlabeled image; the
per-pixel mean becomes the pseudo label and the per-pixel variance becomes
a confidence map (low variance = high confidence). The student trains on
freshly degraded copies of the image against the pseudo label, masked to
confident pixels. Each candidate update must not regress a no-reference
quality score on probe images; accepted updates flow into the teacher
through an exponential moving average, rejected ones are rolled back
entirely.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .degrade import AugmentConfig, augment
from .errors import DataError, DimensionError, MetricError
from .image import list_images, load_image, save_image
from .iqa import MetricHandle, score
from .optim import AdamState, adam_step
from .restorer import RestorerModel, model_from_checkpoint
from .rng import RngStream
from .validation import check_image


def axis_positions(length: int, patch: int, stride: int) -> list[int]:
    """Start offsets along one axis; the last patch is clamped to the border.

    The effective step never exceeds the patch size, so consecutive patches
    always overlap or abut and every pixel is covered.
    """
    if patch > length:
        raise DimensionError(f"patch {patch} exceeds axis length {length}")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    last = length - patch
    step = min(stride, patch)
    pos = list(range(0, last + 1, step))
    if pos[-1] != last:
        pos.append(last)
    return pos


def tile_positions(dims, patch: int, stride: int) -> list[tuple[int, int]]:
    """Top-left corners of overlapping patches covering the whole image."""
    if isinstance(dims, int):
        dims = (dims, dims)
    h, w = dims[0], dims[1]
    ys = axis_positions(h, patch, stride)
    xs = axis_positions(w, patch, stride)
    return [(y, x) for y in ys for x in xs]


@dataclass
class ConfidenceMap:
    """Ensemble mean prediction and per-pixel population variance."""

    mean: np.ndarray
    variance: np.ndarray


def ensemble_predict(
    model: RestorerModel, image: np.ndarray, patch: int, stride: int
) -> ConfidenceMap:
    """Predict every overlapping patch; merge per pixel with mean/variance.

    Uses Welford accumulation, so patches that agree exactly produce a
    variance of exactly zero.
    """
    arr = check_image(image)
    h, w, c = arr.shape
    count = np.zeros((h, w, c))
    mean = np.zeros((h, w, c))
    m2 = np.zeros((h, w, c))
    for y, x in tile_positions((h, w), patch, stride):
        pred = model.predict(arr[y : y + patch, x : x + patch])
        sl = (slice(y, y + patch), slice(x, x + patch))
        count[sl] += 1.0
        delta = pred - mean[sl]
        mean[sl] += delta / count[sl]
        m2[sl] += delta * (pred - mean[sl])
    variance = m2 / count
    return ConfidenceMap(mean=np.clip(mean, 0.0, 1.0), variance=variance)


def confidence_mask(conf, threshold: float) -> np.ndarray:
    """Binary mask of confident pixels: 1 where variance <= threshold."""
    if threshold < 0:
        raise ValueError("variance threshold must be >= 0")
    variance = conf.variance if isinstance(conf, ConfidenceMap) else np.asarray(conf)
    return variance <= threshold


def masked_l1(student_out, pseudo, mask) -> float:
    """Mean absolute error against pseudo labels, zeroed outside the mask.

    Accepts one sample or a batch (lists of equal length); the batch value
    is the mean of per-sample means, and masked-out pixels still count in
    each sample's denominator.
    """
    if isinstance(student_out, np.ndarray):
        student_out, pseudo, mask = [student_out], [pseudo], [mask]
    if not (len(student_out) == len(pseudo) == len(mask)):
        raise ValueError("batch lists must have equal length")
    if not student_out:
        raise ValueError("empty batch")
    total = 0.0
    for s, p, m in zip(student_out, pseudo, mask):
        s = np.asarray(s, dtype=np.float64)
        p = np.asarray(p, dtype=np.float64)
        m = np.asarray(m, dtype=np.float64)
        if s.shape != p.shape or s.shape != m.shape:
            raise DimensionError(
                f"sample shapes differ: {s.shape}, {p.shape}, {m.shape}"
            )
        total += float(np.mean(np.abs(s - p) * m))
    return total / len(student_out)


def ema_update(w_teacher, w_student, alpha: float) -> np.ndarray:
    """Exponential moving average: alpha * teacher + (1 - alpha) * student."""
    wt = np.asarray(w_teacher, dtype=np.float64)
    ws = np.asarray(w_student, dtype=np.float64)
    if wt.shape != ws.shape:
        raise DimensionError(f"weight vectors differ: {wt.shape} vs {ws.shape}")
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    return alpha * wt + (1.0 - alpha) * ws


@dataclass
class GateResult:
    accepted: bool
    score: float
    per_probe: list[tuple[float, float]] = field(default_factory=list)
    error: str | None = None


def iqa_gate(
    metric: MetricHandle,
    model_old: RestorerModel,
    model_new: RestorerModel,
    probes,
    threshold: float = 0.0,
    mode: str = "difference",
) -> GateResult:
    """Accept the new model only if probe quality clears the threshold.

    Score = mean over probes of (new - old) quality; "sum" mode replaces
    the difference with the literal sum for compatibility experiments. Any
    metric failure rejects the update and reports the reason.
    """
    probes = list(probes)
    if not probes:
        raise DataError("gate needs at least one probe image")
    if mode not in ("difference", "sum"):
        raise ValueError(f"unknown gate mode {mode!r}")
    per = []
    try:
        for probe in probes:
            s_new = score(metric, model_new.predict(probe))
            s_old = score(metric, model_old.predict(probe))
            per.append((s_new, s_old))
    except MetricError as exc:
        return GateResult(accepted=False, score=float("nan"), error=str(exc))
    if mode == "difference":
        value = float(np.mean([n - o for n, o in per]))
    else:
        value = float(np.mean([n + o for n, o in per]))
    return GateResult(accepted=bool(value > threshold), score=value, per_probe=per)


@dataclass
class RefineConfig:
    patch_size: int = 224
    stride: int = 4
    var_threshold: float = 0.005
    score_threshold: float = 0.0
    ema_momentum: float = 0.9999
    steps: int = 1000
    batch_size: int = 16
    learning_rate: float = 2e-5
    beta1: float = 0.9
    beta2: float = 0.999
    opt_eps: float = 1e-8
    degradation: AugmentConfig = field(
        default_factory=lambda: AugmentConfig(severity_ratio=0.0)
    )
    metric: MetricHandle = field(default_factory=MetricHandle)
    probe_count: int = 4
    probe_mode: str = "holdout"  # or "current": gate on the step's own image
    gate_every: int = 1
    gate_mode: str = "difference"
    seed: int = 0

    def validate(self) -> "RefineConfig":
        if self.patch_size < 1 or self.stride < 1:
            raise ValueError("patch_size and stride must be >= 1")
        if not (0.0 < self.ema_momentum < 1.0):
            raise ValueError("ema_momentum must be in (0, 1)")
        if self.var_threshold < 0:
            raise ValueError("var_threshold must be >= 0")
        if self.steps < 0 or self.batch_size < 1:
            raise ValueError("bad steps/batch_size")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.probe_mode not in ("holdout", "current"):
            raise ValueError(f"unknown probe_mode {self.probe_mode!r}")
        if self.gate_mode not in ("difference", "sum"):
            raise ValueError(f"unknown gate_mode {self.gate_mode!r}")
        if self.gate_every < 1:
            raise ValueError("gate_every must be >= 1")
        if self.probe_count < 1:
            raise ValueError("probe_count must be >= 1")
        self.degradation.validate()
        self.metric.validate()
        return self

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["degradation"] = self.degradation.to_dict()
        d["metric"] = {
            "kind": self.metric.kind,
            "command": self.metric.command,
            "timeout": self.metric.timeout,
        }
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RefineConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown refine config keys: {sorted(unknown)}")
        d = dict(d)
        if "degradation" in d and isinstance(d["degradation"], dict):
            d["degradation"] = AugmentConfig.from_dict(d["degradation"])
        if "metric" in d and isinstance(d["metric"], dict):
            d["metric"] = MetricHandle(**d["metric"]).validate()
        return cls(**d).validate()


# Published full-scale recipe, recorded as a preset; tests never run it.
REFERENCE_REFINE = RefineConfig(
    patch_size=224,
    stride=4,
    var_threshold=0.005,
    score_threshold=0.0,
    ema_momentum=0.9999,
    steps=10_000,
    batch_size=16,
    learning_rate=2e-5,
)


@dataclass
class TeacherStudentState:
    """Teacher/student models plus optimizer state and decision counters."""

    teacher: RestorerModel
    student: RestorerModel
    opt: AdamState
    accepted: int = 0
    rejected: int = 0

    @classmethod
    def from_model(cls, model: RestorerModel) -> "TeacherStudentState":
        teacher = model.clone()
        student = model.clone()
        return cls(
            teacher=teacher,
            student=student,
            opt=AdamState.for_size(student.get_weights().size),
        )

    @classmethod
    def from_checkpoint(cls, path) -> "TeacherStudentState":
        return cls.from_model(model_from_checkpoint(path))


def _center_crop(img: np.ndarray, size: int) -> np.ndarray:
    h, w, _ = img.shape
    ch, cw = min(size, h), min(size, w)
    y = (h - ch) // 2
    x = (w - cw) // 2
    return img[y : y + ch, x : x + cw]


def load_unlabeled(source) -> list[tuple[str, np.ndarray]]:
    """(id, image) pairs from a directory, or a provided list of pairs."""
    if isinstance(source, (str, Path)):
        files = list_images(source)
        if not files:
            raise DataError(f"no unlabeled images found in {source}")
        return [(p.name, load_image(p)) for p in files]
    pairs = [(str(name), check_image(img)) for name, img in source]
    if not pairs:
        raise DataError("empty unlabeled set")
    return pairs


def refine_loop(
    state: TeacherStudentState, unlabeled, cfg: RefineConfig
) -> tuple[TeacherStudentState, list[dict]]:
    """Run the gated refinement loop; returns the state and an audit log.

    Every step produces exactly one audit record; a rejected step leaves
    the student weights and optimizer state bitwise untouched and the
    teacher unchanged.
    """
    cfg.validate()
    pairs = load_unlabeled(unlabeled)
    if state.teacher.get_weights().size != state.student.get_weights().size:
        raise DimensionError("teacher and student weight vectors differ in length")
    rng = RngStream(cfg.seed)

    if cfg.probe_mode == "holdout":
        if len(pairs) <= cfg.probe_count:
            raise DataError(
                f"holdout gating needs more than {cfg.probe_count} unlabeled images, "
                f"got {len(pairs)}"
            )
        order = np.argsort(rng.random(len(pairs)), kind="stable")
        probe_idx = set(int(i) for i in order[: cfg.probe_count])
        probes = [_center_crop(pairs[i][1], cfg.patch_size) for i in sorted(probe_idx)]
        pool = [pairs[i] for i in range(len(pairs)) if i not in probe_idx]
    else:
        probes = None
        pool = pairs

    audit: list[dict] = []
    for step in range(cfg.steps):
        name, img = pool[rng.integers(0, len(pool) - 1)]
        h, w, _ = img.shape
        conf = ensemble_predict(state.teacher, img, cfg.patch_size, cfg.stride)
        mask = confidence_mask(conf, cfg.var_threshold)
        degraded, _ = augment(img, cfg.degradation, rng)

        n_weights = state.student.get_weights().size
        grad_sum = np.zeros(n_weights)
        loss_sum = 0.0
        for _ in range(cfg.batch_size):
            y = int(rng.integers(0, h - cfg.patch_size))
            x = int(rng.integers(0, w - cfg.patch_size))
            sl = (slice(y, y + cfg.patch_size), slice(x, x + cfg.patch_size))
            loss, grad = state.student.loss_gradient(
                degraded[sl], conf.mean[sl], "l1", mask=mask[sl].astype(np.float64)
            )
            loss_sum += loss
            grad_sum += grad
        step_loss = loss_sum / cfg.batch_size

        cand_weights, cand_opt = adam_step(
            state.student.get_weights(),
            grad_sum / cfg.batch_size,
            state.opt,
            cfg.learning_rate,
            beta1=cfg.beta1,
            beta2=cfg.beta2,
            eps=cfg.opt_eps,
        )

        gated = (step + 1) % cfg.gate_every == 0
        if gated:
            candidate = state.student.clone()
            candidate.set_weights(cand_weights)
            gate_probes = (
                probes if probes is not None else [_center_crop(img, cfg.patch_size)]
            )
            gate = iqa_gate(
                cfg.metric,
                state.student,
                candidate,
                gate_probes,
                threshold=cfg.score_threshold,
                mode=cfg.gate_mode,
            )
            accepted = gate.accepted
            gate_score = gate.score
        else:
            accepted = True
            gate_score = None

        if accepted:
            state.student.set_weights(cand_weights)
            state.opt = cand_opt
            state.teacher.set_weights(
                ema_update(state.teacher.get_weights(), cand_weights, cfg.ema_momentum)
            )
            state.accepted += 1
        else:
            state.rejected += 1

        audit.append(
            {
                "step": step,
                "image": name,
                "loss": step_loss,
                "score": gate_score,
                "accepted": bool(accepted),
            }
        )
    return state, audit


def write_audit_log(path, records) -> None:
    """Audit log as JSON lines, one record per refinement step."""
    with open(Path(path), "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")


def dump_pseudo_labels(
    model: RestorerModel, unlabeled, cfg: RefineConfig, out_dir
) -> list[Path]:
    """Write the ensemble mean and confidence mask per image as PNG pairs."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for name, img in load_unlabeled(unlabeled):
        conf = ensemble_predict(model, img, cfg.patch_size, cfg.stride)
        mask = confidence_mask(conf, cfg.var_threshold)
        stem = Path(name).stem
        mean_path = out_dir / f"{stem}_mean.png"
        mask_path = out_dir / f"{stem}_mask.png"
        save_image(conf.mean, mean_path)
        save_image(mask.astype(np.float64), mask_path)
        written.extend([mean_path, mask_path])
    return written
