"""Action scoring: feature extraction, a trainable linear model, and the
scorer interface the decoder consumes.

The built-in backend hashes character n-grams of the focus node's content
and the incoming segment into a fixed-dimension vector, adds a small block
of dense indicator features, and scores actions with a linear layer
followed by a softmax. Training minimizes mean cross-entropy with
adaptive moment estimation and decoupled weight decay; moment updates are
applied lazily per touched feature column, so cost scales with the sparse
footprint of each batch rather than the full dimension.
"""
from __future__ import annotations

import re
import struct
import zlib
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .tree import TERMINAL_PUNCTUATION, NodeKind

DEFAULT_DIM = 1 << 18
INDICATOR_SLOTS = 64

# Indicator slot layout (the n-gram block starts at INDICATOR_SLOTS):
#   0..2   focus kind one-hot (root, heading, text)
#   3      focus content ends with terminal punctuation
#   4..7   focus length bucket
#   8..11  segment length bucket
#   12     segment length <= 20
#   13     segment matches no numbering pattern
#   14     focus matches no numbering pattern (empty focus fires nothing)
#   16..   segment numbering-pattern hits (one slot per pattern)
#   32..   focus numbering-pattern hits
#   48..51 segment numbering depth bucket (1, 2, 3, >=4)
#   52..55 focus numbering depth bucket
#   56..58 both numbered: segment exactly one deeper / at or above / two+ deeper
#   59..61 numbering combination: only focus / only segment / neither
_KIND_SLOT = {NodeKind.ROOT: 0, NodeKind.HEADING: 1, NodeKind.TEXT: 2}
_SENTENCE_END_SLOT = 3
_FOCUS_LEN_BASE = 4
_SEGMENT_LEN_BASE = 8
_SHORT_SEGMENT_SLOT = 12
_SEGMENT_UNNUMBERED_SLOT = 13
_FOCUS_UNNUMBERED_SLOT = 14
_SEGMENT_PATTERN_BASE = 16
_FOCUS_PATTERN_BASE = 32
_SEGMENT_DEPTH_BASE = 48
_FOCUS_DEPTH_BASE = 52
_CHILD_DEPTH_SLOT = 56
_SIBLING_OR_SHALLOWER_SLOT = 57
_SKIPPED_DEPTH_SLOT = 58
_ONLY_FOCUS_NUMBERED_SLOT = 59
_ONLY_SEGMENT_NUMBERED_SLOT = 60
_NEITHER_NUMBERED_SLOT = 61
_MAX_PATTERNS = 16


class EmptyTrainingSet(Exception):
    """Training was requested with no examples."""


@dataclass(frozen=True)
class ScoringInput:
    """One (focus node, incoming segment) pair presented to a scorer."""

    focus_kind: NodeKind
    focus_text: str
    segment_text: str

    def __post_init__(self) -> None:
        if not self.segment_text:
            raise ValueError("segment text must be non-empty")


@dataclass(frozen=True)
class ActionScores:
    logits: tuple[float, float, float, float]
    probabilities: tuple[float, float, float, float]

    @classmethod
    def from_logits(cls, logits: Sequence[float]) -> "ActionScores":
        values = np.asarray(logits, dtype=np.float64)
        if values.shape != (4,):
            raise ValueError(f"expected 4 logits, got shape {values.shape}")
        return cls(logits=tuple(values.tolist()), probabilities=tuple(softmax(values).tolist()))

    @property
    def best(self) -> int:
        """Index of the highest-scoring action; ties go to the lowest index."""
        return int(np.argmax(self.logits))


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - np.max(logits)
    exp = np.exp(shifted)
    return exp / exp.sum()


@dataclass(frozen=True)
class NumberingPattern:
    """A leading numbering shape, with the nesting depth it suggests."""

    name: str
    regex: re.Pattern
    depth: Callable[[re.Match], int]


def _dotted_components(match: re.Match) -> int:
    return len([p for p in re.split(r"[.、]", match.group(1)) if p])


_CJK_UNIT_DEPTH = {"章": 1, "篇": 1, "节": 2, "条": 3, "款": 4}


def default_numbering_patterns() -> list[NumberingPattern]:
    """Leading numbering shapes recognized out of the box.

    The list is extensible; custom patterns slot in after these.
    """
    return [
        NumberingPattern(
            "arabic_dotted",
            re.compile(r"^(\d+(?:[.、]\d+)*)[.、]?\s*"),
            _dotted_components,
        ),
        NumberingPattern(
            "cjk_ordinal",
            re.compile(
                r"^第[零一二三四五六七八"
                r"九十百千\d]+"
                r"([章篇节条款])"
            ),
            lambda m: _CJK_UNIT_DEPTH.get(m.group(1), 2),
        ),
        NumberingPattern(
            "parenthesized",
            re.compile(
                r"^[(（][\d一二三四五六七八"
                r"九十]+[)）]"
            ),
            lambda m: 4,
        ),
        NumberingPattern(
            "roman",
            re.compile(r"^[IVXLCDM]+[.、)]\s*"),
            lambda m: 1,
        ),
    ]


@dataclass
class FeaturizerConfig:
    dim: int = DEFAULT_DIM
    patterns: list[NumberingPattern] = field(default_factory=default_numbering_patterns)

    def __post_init__(self) -> None:
        if self.dim <= INDICATOR_SLOTS:
            raise ValueError("feature dimension must exceed the indicator block")
        if len(self.patterns) > _MAX_PATTERNS:
            raise ValueError(f"at most {_MAX_PATTERNS} numbering patterns supported")


DEFAULT_FEATURIZER = FeaturizerConfig()


def _length_bucket(n: int) -> int:
    if n <= 10:
        return 0
    if n <= 30:
        return 1
    if n <= 80:
        return 2
    return 3


def _numbering_hits(text: str, patterns: list[NumberingPattern]) -> tuple[list[int], int]:
    """Indices of matching patterns plus the depth suggested by the first hit."""
    hits = []
    depth = 0
    for i, pattern in enumerate(patterns):
        match = pattern.regex.match(text)
        if match:
            hits.append(i)
            if depth == 0:
                depth = max(1, pattern.depth(match))
    return hits, depth


def _hash_ngrams(
    text: str, namespace: bytes, seed: int, buckets: int, counts: dict[int, float]
) -> None:
    padded = "^" + text + "$"
    data = padded.encode("utf-8")
    # Precompute byte offsets per character so slicing stays cheap for
    # multi-byte scripts.
    offsets = [0]
    for ch in padded:
        offsets.append(offsets[-1] + len(ch.encode("utf-8")))
    base = zlib.crc32(namespace, seed & 0xFFFFFFFF)
    n_chars = len(padded)
    for n in (1, 2, 3):
        for start in range(n_chars - n + 1):
            gram = data[offsets[start]:offsets[start + n]]
            bucket = INDICATOR_SLOTS + zlib.crc32(gram, base) % buckets
            counts[bucket] = counts.get(bucket, 0.0) + 1.0


def featurize(
    inp: ScoringInput,
    hash_seed: int = 0,
    config: FeaturizerConfig = DEFAULT_FEATURIZER,
) -> tuple[np.ndarray, np.ndarray]:
    """Hash one scoring input into a sparse (indices, values) pair.

    Character 1- to 3-grams of the focus and segment texts live in
    disjoint hash namespaces inside the n-gram block; the dense indicator
    block occupies its own reserved index range, so the two can never
    collide. The n-gram block is L2-normalized so the indicators keep a
    stable share of the margin. Deterministic for a fixed hash seed.
    """
    counts: dict[int, float] = {}
    counts[_KIND_SLOT[inp.focus_kind]] = 1.0
    focus, segment = inp.focus_text, inp.segment_text
    if focus and focus[-1] in TERMINAL_PUNCTUATION:
        counts[_SENTENCE_END_SLOT] = 1.0
    counts[_FOCUS_LEN_BASE + _length_bucket(len(focus))] = 1.0
    counts[_SEGMENT_LEN_BASE + _length_bucket(len(segment))] = 1.0
    if len(segment) <= 20:
        counts[_SHORT_SEGMENT_SLOT] = 1.0

    seg_hits, seg_depth = _numbering_hits(segment, config.patterns)
    for i in seg_hits:
        counts[_SEGMENT_PATTERN_BASE + i] = 1.0
    if seg_depth:
        counts[_SEGMENT_DEPTH_BASE + min(seg_depth, 4) - 1] = 1.0
    else:
        counts[_SEGMENT_UNNUMBERED_SLOT] = 1.0
    if focus:
        focus_hits, focus_depth = _numbering_hits(focus, config.patterns)
        for i in focus_hits:
            counts[_FOCUS_PATTERN_BASE + i] = 1.0
        if focus_depth:
            counts[_FOCUS_DEPTH_BASE + min(focus_depth, 4) - 1] = 1.0
        else:
            counts[_FOCUS_UNNUMBERED_SLOT] = 1.0
        # How the two numbering depths relate decides most attachments,
        # so spell the comparison out instead of leaving it additive.
        if focus_depth and seg_depth:
            if seg_depth == focus_depth + 1:
                counts[_CHILD_DEPTH_SLOT] = 1.0
            elif seg_depth <= focus_depth:
                counts[_SIBLING_OR_SHALLOWER_SLOT] = 1.0
            else:
                counts[_SKIPPED_DEPTH_SLOT] = 1.0
        elif focus_depth:
            counts[_ONLY_FOCUS_NUMBERED_SLOT] = 1.0
        elif seg_depth:
            counts[_ONLY_SEGMENT_NUMBERED_SLOT] = 1.0
        else:
            counts[_NEITHER_NUMBERED_SLOT] = 1.0

    buckets = config.dim - INDICATOR_SLOTS
    _hash_ngrams(focus, b"s:", hash_seed, buckets, counts)
    _hash_ngrams(segment, b"q:", hash_seed, buckets, counts)

    indices = np.fromiter(sorted(counts), dtype=np.int64, count=len(counts))
    values = np.array([counts[i] for i in indices], dtype=np.float64)
    grams = indices >= INDICATOR_SLOTS
    norm = float(np.sqrt(np.sum(values[grams] ** 2)))
    if norm > 0:
        values[grams] /= norm
    return indices, values


@dataclass
class LinearModel:
    """A multiclass linear scorer over hashed features.

    The action scorer uses four classes; the baseline heads reuse the
    same container with their own class counts.
    """

    weights: np.ndarray  # (classes, dim) float64
    bias: np.ndarray  # (classes,) float64
    hash_seed: int
    version: int = 1

    @classmethod
    def create(cls, dim: int = DEFAULT_DIM, classes: int = 4, hash_seed: int = 0) -> "LinearModel":
        return cls(
            weights=np.zeros((classes, dim), dtype=np.float64),
            bias=np.zeros(classes, dtype=np.float64),
            hash_seed=hash_seed,
        )

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    @property
    def classes(self) -> int:
        return self.weights.shape[0]

    def copy(self) -> "LinearModel":
        return LinearModel(
            weights=self.weights.copy(),
            bias=self.bias.copy(),
            hash_seed=self.hash_seed,
            version=self.version,
        )

    def logits_for(self, indices: np.ndarray, values: np.ndarray) -> np.ndarray:
        return self.weights[:, indices] @ values + self.bias


def score(
    inp: ScoringInput,
    model: LinearModel,
    config: FeaturizerConfig = DEFAULT_FEATURIZER,
) -> ActionScores:
    """Score the four actions for one input with a 4-class model."""
    if model.classes != 4:
        raise ValueError(f"action scoring needs a 4-class model, got {model.classes}")
    indices, values = featurize(inp, model.hash_seed, config)
    return ActionScores.from_logits(model.logits_for(indices, values))


@dataclass
class TrainConfig:
    learning_rate: float = 2e-3
    epochs: int = 10
    batch_size: int = 20
    weight_decay: float = 0.01
    seed: int = 0
    class_weighting: bool = False

    def __post_init__(self) -> None:
        if self.learning_rate <= 0 or self.epochs <= 0 or self.batch_size <= 0:
            raise ValueError("learning rate, epochs and batch size must be positive")
        if self.weight_decay <= 0:
            raise ValueError("weight decay must be positive")


_BETA1 = 0.9
_BETA2 = 0.999
_EPS = 1e-8


def example_loss_and_grad(
    model: LinearModel, indices: np.ndarray, values: np.ndarray, label: int
) -> tuple[float, np.ndarray, np.ndarray]:
    """Cross-entropy loss with gradients for one example.

    Returns (loss, grad over the touched weight columns with shape
    (classes, len(indices)), bias gradient).
    """
    logits = model.logits_for(indices, values)
    log_probs = logits - np.max(logits)
    log_probs -= np.log(np.exp(log_probs).sum())
    probs = np.exp(log_probs)
    loss = -log_probs[label]
    err = probs.copy()
    err[label] -= 1.0
    return float(loss), np.outer(err, values), err


def mean_cross_entropy(
    model: LinearModel,
    examples: Sequence[tuple[ScoringInput, int]],
    config: FeaturizerConfig = DEFAULT_FEATURIZER,
) -> float:
    if not examples:
        raise EmptyTrainingSet("no examples to evaluate")
    total = 0.0
    for inp, label in examples:
        indices, values = featurize(inp, model.hash_seed, config)
        logits = model.logits_for(indices, values)
        shifted = logits - np.max(logits)
        total += float(np.log(np.exp(shifted).sum()) - shifted[int(label)])
    return total / len(examples)


def train(
    examples: Sequence[tuple[ScoringInput, int]],
    config: TrainConfig,
    classes: int = 4,
    dim: int = DEFAULT_DIM,
    featurizer: FeaturizerConfig | None = None,
    epoch_callback: Callable[[int, LinearModel], None] | None = None,
) -> LinearModel:
    """Fit a linear model by mini-batch cross-entropy descent.

    Deterministic for a fixed config seed: the same data and seed yield a
    bit-identical model. ``epoch_callback`` runs after every epoch with
    the live model (copy it to keep a snapshot).
    """
    if not examples:
        raise EmptyTrainingSet("cannot train on an empty example list")
    featurizer = featurizer or FeaturizerConfig(dim=dim)
    if featurizer.dim != dim:
        raise ValueError("featurizer dimension must match the model dimension")

    model = LinearModel.create(dim=dim, classes=classes, hash_seed=config.seed)
    feats = [featurize(inp, model.hash_seed, featurizer) for inp, _ in examples]
    labels = np.array([int(label) for _, label in examples], dtype=np.int64)
    if labels.min() < 0 or labels.max() >= classes:
        raise ValueError("label out of range for the class count")

    weights_per_class = np.ones(classes, dtype=np.float64)
    if config.class_weighting:
        counts = np.bincount(labels, minlength=classes).astype(np.float64)
        present = counts > 0
        weights_per_class[present] = len(labels) / (present.sum() * counts[present])

    moment1 = np.zeros_like(model.weights)
    moment2 = np.zeros_like(model.weights)
    bias_m1 = np.zeros_like(model.bias)
    bias_m2 = np.zeros_like(model.bias)
    last_step = np.zeros(dim, dtype=np.int64)
    step = 0
    lr, decay = config.learning_rate, config.weight_decay

    rng = np.random.default_rng(config.seed)
    n = len(examples)
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            step += 1
            errors = np.empty((len(batch), classes), dtype=np.float64)
            for row, j in enumerate(batch):
                indices, values = feats[j]
                label = labels[j]
                logits = model.logits_for(indices, values)
                shifted = logits - np.max(logits)
                probs = np.exp(shifted)
                probs /= probs.sum()
                probs[label] -= 1.0
                errors[row] = probs * weights_per_class[label]
            all_cols = np.concatenate([feats[j][0] for j in batch])
            all_vals = np.concatenate([feats[j][1] for j in batch])
            rows = np.repeat(
                np.arange(len(batch)), [len(feats[j][0]) for j in batch]
            )
            cols, inverse = np.unique(all_cols, return_inverse=True)
            contrib = errors[rows] * all_vals[:, None]
            grad_t = np.zeros((len(cols), classes), dtype=np.float64)
            np.add.at(grad_t, inverse, contrib)
            scale = 1.0 / len(batch)
            grad = grad_t.T * scale
            bias_grad = errors.sum(axis=0) * scale

            # Catch up lazily skipped steps: decay moments and apply the
            # decoupled weight decay those columns would have received.
            lag = (step - 1) - last_step[cols]
            moment1[:, cols] *= _BETA1 ** lag
            moment2[:, cols] *= _BETA2 ** lag
            model.weights[:, cols] *= (1.0 - lr * decay) ** lag
            last_step[cols] = step

            moment1[:, cols] = _BETA1 * moment1[:, cols] + (1 - _BETA1) * grad
            moment2[:, cols] = _BETA2 * moment2[:, cols] + (1 - _BETA2) * grad**2
            m_hat = moment1[:, cols] / (1 - _BETA1**step)
            v_hat = moment2[:, cols] / (1 - _BETA2**step)
            model.weights[:, cols] = model.weights[:, cols] * (1.0 - lr * decay) - (
                lr * m_hat / (np.sqrt(v_hat) + _EPS)
            )

            bias_m1 = _BETA1 * bias_m1 + (1 - _BETA1) * bias_grad
            bias_m2 = _BETA2 * bias_m2 + (1 - _BETA2) * bias_grad**2
            b_hat1 = bias_m1 / (1 - _BETA1**step)
            b_hat2 = bias_m2 / (1 - _BETA2**step)
            model.bias -= lr * b_hat1 / (np.sqrt(b_hat2) + _EPS)

        if epoch_callback is not None:
            _settle_decay(model, last_step, step, lr, decay)
            epoch_callback(epoch, model)

    _settle_decay(model, last_step, step, lr, decay)
    return model


def _settle_decay(
    model: LinearModel, last_step: np.ndarray, step: int, lr: float, decay: float
) -> None:
    """Apply the weight decay owed to columns not touched since their last update."""
    lag = step - last_step
    pending = lag > 0
    if np.any(pending):
        model.weights[:, pending] *= (1.0 - lr * decay) ** lag[pending]
        last_step[pending] = step


# Model file container. All integers little-endian. Layout:
#   magic    4 bytes  (b"CTXM" action scorer; baseline heads use their own)
#   version  uint32
#   dim      uint64
#   seed     int64
#   classes  uint32
#   weights  classes*dim float64, row-major
#   bias     classes float64
# A file may hold several containers back to back (the two pipeline
# heads share one file).
MODEL_MAGIC = b"CTXM"
_HEADER = struct.Struct("<4sIQqI")


def write_container(handle, model: LinearModel, magic: bytes = MODEL_MAGIC) -> None:
    if len(magic) != 4:
        raise ValueError("model magic must be exactly 4 bytes")
    handle.write(
        _HEADER.pack(magic, model.version, model.dim, model.hash_seed, model.classes)
    )
    handle.write(np.ascontiguousarray(model.weights, dtype="<f8").tobytes())
    handle.write(np.ascontiguousarray(model.bias, dtype="<f8").tobytes())


def read_container(handle, magic: bytes = MODEL_MAGIC, name: str = "model") -> LinearModel:
    header = handle.read(_HEADER.size)
    if len(header) < _HEADER.size:
        raise ValueError(f"{name}: truncated model header")
    found, version, dim, seed, classes = _HEADER.unpack(header)
    if found != magic:
        raise ValueError(f"{name}: expected magic {magic!r}, found {found!r}")
    payload = handle.read((classes * dim + classes) * 8)
    expected = (classes * dim + classes) * 8
    if len(payload) != expected:
        raise ValueError(f"{name}: payload is {len(payload)} bytes, expected {expected}")
    weights = np.frombuffer(payload[: classes * dim * 8], dtype="<f8").reshape(classes, dim)
    bias = np.frombuffer(payload[classes * dim * 8 :], dtype="<f8")
    return LinearModel(
        weights=weights.astype(np.float64),
        bias=bias.astype(np.float64),
        hash_seed=int(seed),
        version=int(version),
    )


def save_model(model: LinearModel, path: str | Path, magic: bytes = MODEL_MAGIC) -> None:
    with open(path, "wb") as handle:
        write_container(handle, model, magic)


def load_model(path: str | Path, magic: bytes = MODEL_MAGIC) -> LinearModel:
    with open(path, "rb") as handle:
        return read_container(handle, magic, name=str(path))


class ActionScorer(ABC):
    """Anything that can score the four actions for a (focus, segment) pair."""

    @abstractmethod
    def score_input(self, inp: ScoringInput) -> ActionScores:
        ...


class LinearScorer(ActionScorer):
    def __init__(self, model: LinearModel, config: FeaturizerConfig | None = None):
        if model.classes != 4:
            raise ValueError("action scoring needs a 4-class model")
        self.model = model
        self.config = config or FeaturizerConfig(dim=model.dim)

    def score_input(self, inp: ScoringInput) -> ActionScores:
        return score(inp, self.model, self.config)
