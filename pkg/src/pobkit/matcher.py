"""Desk-scale audio-text matcher with swappable scoring heads.

The pipeline mirrors a typical open-vocabulary keyword spotter: a text
encoder embeds anchor phonemes, an audio surrogate emits noisy frames
for the query, scaled-dot cross-attention aligns the two, and a scoring
head turns the aligned features into one logit.

Two heads are provided.  The baseline flattens the m x D feature matrix
and applies a position-dependent linear layer (one weight row per text
position).  The eps head shares a single weight vector across positions
and averages over the true anchor length, so its score cannot prefer
early positions.

There is no autograd here.  Gradients are derived by hand and verified
against central finite differences; run_gradient_check is the oracle.
The audio surrogate replaces a real front-end with projected one-hot
vectors plus gaussian noise, which keeps the whole model in numpy while
preserving the position-matching structure the diagnostics measure.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from pobkit.diagnostics import AlignedFeatureSample, ScoringWeights
from pobkit.manifest import PairRecord
from pobkit.util import atomic_write_text, dump_json

PARAMS_FORMAT_VERSION = 1
SCORER_KINDS = ("baseline", "eps")

PAD_ID = 0


class MatcherError(ValueError):
    pass


class VocabularyError(MatcherError):
    pass


class LengthError(MatcherError):
    pass


class AlignmentError(MatcherError):
    pass


class NumericError(MatcherError):
    pass


class TrainingError(RuntimeError):
    def __init__(self, message: str, step: int):
        super().__init__(f"{message} (step {step})")
        self.step = step


class PhonemeVocab:
    """Phoneme symbol table; id 0 is reserved for padding."""

    def __init__(self, symbols):
        self.symbols = tuple(sorted(set(symbols)))
        if not self.symbols:
            raise VocabularyError("empty phoneme inventory")
        self.index = {s: i for i, s in enumerate(self.symbols, start=1)}

    @property
    def size(self) -> int:
        return len(self.symbols) + 1

    def encode(self, phonemes) -> np.ndarray:
        try:
            return np.array([self.index[p] for p in phonemes], dtype=np.int64)
        except KeyError as exc:
            raise VocabularyError(f"phoneme {exc.args[0]!r} not in vocabulary") from exc

    @classmethod
    def from_records(cls, records) -> "PhonemeVocab":
        symbols = set()
        for rec in records:
            symbols.update(rec.anchor_phonemes)
            symbols.update(rec.query_phonemes)
        return cls(symbols)


@dataclass(frozen=True)
class MatcherConfig:
    vocab_size: int
    embed_dim: int = 16
    max_positions: int = 25
    noise_sigma: float = 0.1
    frame_dup: int = 2
    scorer_kind: str = "baseline"

    def __post_init__(self):
        if self.vocab_size < 2:
            raise ValueError("vocab_size must be >= 2 (pad + one symbol)")
        if self.embed_dim < 1 or self.max_positions < 1 or self.frame_dup < 1:
            raise ValueError("embed_dim, max_positions, frame_dup must be >= 1")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be nonnegative")
        if self.scorer_kind not in SCORER_KINDS:
            raise ValueError(f"unknown scorer_kind {self.scorer_kind!r}")


@dataclass
class MatcherParams:
    config: MatcherConfig
    vocab: PhonemeVocab
    text_embedding: np.ndarray   # V x D
    audio_projection: np.ndarray  # D x V
    scorer_rows: np.ndarray      # baseline: m x D; eps: single shared row (D,)
    scorer_bias: float

    def validate(self):
        cfg = self.config
        if self.text_embedding.shape != (cfg.vocab_size, cfg.embed_dim):
            raise MatcherError("text_embedding shape mismatch")
        if self.audio_projection.shape != (cfg.embed_dim, cfg.vocab_size):
            raise MatcherError("audio_projection shape mismatch")
        expect = (
            (cfg.max_positions, cfg.embed_dim)
            if cfg.scorer_kind == "baseline"
            else (cfg.embed_dim,)
        )
        if self.scorer_rows.shape != expect:
            raise MatcherError(
                f"scorer shape {self.scorer_rows.shape}, expected {expect}"
            )
        if self.vocab.size != cfg.vocab_size:
            raise MatcherError("vocabulary size disagrees with config")
        for arr in (self.text_embedding, self.audio_projection, self.scorer_rows):
            if not np.all(np.isfinite(arr)):
                raise NumericError("non-finite parameter values")

    def scorer_param_count(self) -> int:
        return self.scorer_rows.size + 1


def init_params(config: MatcherConfig, vocab: PhonemeVocab, seed: int) -> MatcherParams:
    """All weights uniform in [-0.1, 0.1] from the given seed."""
    if vocab.size != config.vocab_size:
        raise VocabularyError(
            f"vocabulary size {vocab.size} != config vocab_size {config.vocab_size}"
        )
    rng = np.random.default_rng(seed)
    u = lambda shape: rng.uniform(-0.1, 0.1, size=shape)
    scorer_shape = (
        (config.max_positions, config.embed_dim)
        if config.scorer_kind == "baseline"
        else (config.embed_dim,)
    )
    params = MatcherParams(
        config=config,
        vocab=vocab,
        text_embedding=u((config.vocab_size, config.embed_dim)),
        audio_projection=u((config.embed_dim, config.vocab_size)),
        scorer_rows=u(scorer_shape),
        scorer_bias=float(u(())),
    )
    params.validate()
    return params


def encode_text(anchor_ids: np.ndarray, params: MatcherParams) -> tuple[np.ndarray, int]:
    """Zero-padded m x D embedding matrix plus the true length p."""
    cfg = params.config
    p = len(anchor_ids)
    if p > cfg.max_positions:
        raise LengthError(f"anchor length {p} exceeds max_positions {cfg.max_positions}")
    if p and (anchor_ids.min() < 1 or anchor_ids.max() >= cfg.vocab_size):
        raise VocabularyError("anchor id outside vocabulary range")
    e_t = np.zeros((cfg.max_positions, cfg.embed_dim))
    e_t[:p] = params.text_embedding[anchor_ids]
    return e_t, p


def encode_audio_surrogate(
    query_ids: np.ndarray,
    params: MatcherParams,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Project each query phoneme to frame_dup noisy frames.

    Returns (E_a, U) where U holds the one-hot-plus-noise inputs; the
    backward pass needs U to reach audio_projection.
    """
    cfg = params.config
    if len(query_ids) == 0:
        raise AlignmentError("query has zero phonemes, no frames to align")
    if query_ids.min() < 1 or query_ids.max() >= cfg.vocab_size:
        raise VocabularyError("query id outside vocabulary range")
    frames = np.repeat(query_ids, cfg.frame_dup)
    n_frames = len(frames)
    u = np.zeros((n_frames, cfg.vocab_size))
    u[np.arange(n_frames), frames] = 1.0
    if cfg.noise_sigma > 0:
        if rng is None:
            raise ValueError("noise_sigma > 0 requires an rng")
        u += rng.normal(0.0, cfg.noise_sigma, size=u.shape)
    e_a = u @ params.audio_projection.T
    return e_a, u


def align(
    e_t: np.ndarray, p: int, e_a: np.ndarray, config: MatcherConfig
) -> tuple[AlignedFeatureSample, dict]:
    """Cross-attention alignment; X_i = e_t_i * c_i elementwise.

    The returned cache carries the intermediates the backward pass needs.
    """
    if e_a.shape[0] == 0:
        raise AlignmentError("no audio frames")
    scale = 1.0 / np.sqrt(config.embed_dim)
    s = (e_t[:p] @ e_a.T) * scale
    s_shift = s - s.max(axis=1, keepdims=True)
    expo = np.exp(s_shift)
    alpha = expo / expo.sum(axis=1, keepdims=True)
    context = alpha @ e_a
    x = np.zeros_like(e_t)
    x[:p] = e_t[:p] * context
    cache = {"alpha": alpha, "context": context, "e_t": e_t, "e_a": e_a, "scale": scale}
    return AlignedFeatureSample(x, p), cache


def score(features: AlignedFeatureSample, params: MatcherParams) -> float:
    """Logit: baseline sums a_i . X_i over all m rows; eps averages w . X_i over p."""
    cfg = params.config
    x = features.features
    if x.shape != (cfg.max_positions, cfg.embed_dim):
        raise MatcherError(f"feature shape {x.shape} does not match config")
    if cfg.scorer_kind == "baseline":
        return float(np.sum(params.scorer_rows * x) + params.scorer_bias)
    p = features.valid_length
    if p == 0:
        raise LengthError("eps score undefined for empty anchor")
    return float((x[:p] @ params.scorer_rows).mean() + params.scorer_bias)


@dataclass(frozen=True)
class ForwardTrace:
    aligned_features: AlignedFeatureSample
    logit: float
    probability: float


def forward(
    anchor_ids: np.ndarray,
    query_ids: np.ndarray,
    params: MatcherParams,
    rng: np.random.Generator | None = None,
) -> ForwardTrace:
    e_t, p = encode_text(anchor_ids, params)
    e_a, _ = encode_audio_surrogate(query_ids, params, rng)
    features, _ = align(e_t, p, e_a, params.config)
    z = score(features, params)
    return ForwardTrace(features, z, float(1.0 / (1.0 + np.exp(-z))))


def _bce(z: float, label: bool) -> float:
    # softplus(z) - y*z, stable for large |z|
    return float(max(z, 0.0) + np.log1p(np.exp(-abs(z))) - (1.0 if label else 0.0) * z)


@dataclass
class Gradients:
    text_embedding: np.ndarray
    audio_projection: np.ndarray
    scorer_rows: np.ndarray
    scorer_bias: float

    @classmethod
    def zeros_like(cls, params: MatcherParams) -> "Gradients":
        return cls(
            np.zeros_like(params.text_embedding),
            np.zeros_like(params.audio_projection),
            np.zeros_like(params.scorer_rows),
            0.0,
        )

    def scale(self, factor: float) -> None:
        self.text_embedding *= factor
        self.audio_projection *= factor
        self.scorer_rows *= factor
        self.scorer_bias *= factor


def _example_backward(
    anchor_ids, query_ids, label, params: MatcherParams, rng, grads: Gradients
) -> float:
    """Accumulate one example's gradients into grads; return its loss."""
    cfg = params.config
    e_t, p = encode_text(anchor_ids, params)
    e_a, u = encode_audio_surrogate(query_ids, params, rng)
    features, cache = align(e_t, p, e_a, cfg)
    z = score(features, params)
    loss = _bce(z, label)
    if not np.isfinite(loss):
        raise NumericError(f"non-finite loss {loss}")

    dz = float(1.0 / (1.0 + np.exp(-z))) - (1.0 if label else 0.0)
    x = features.features
    if cfg.scorer_kind == "baseline":
        grads.scorer_rows += dz * x
        g_x = dz * params.scorer_rows[:p]
    else:
        grads.scorer_rows += dz * x[:p].sum(axis=0) / p
        g_x = np.tile(dz * params.scorer_rows / p, (p, 1))
    grads.scorer_bias += dz

    # X_i = e_t_i * c_i for the p valid rows; padded rows carry nothing.
    alpha, context = cache["alpha"], cache["context"]
    g_context = g_x * e_t[:p]
    g_t = g_x * context
    g_alpha = g_context @ e_a.T
    g_ea = alpha.T @ g_context
    # softmax jacobian, row by row
    g_s = alpha * (g_alpha - (alpha * g_alpha).sum(axis=1, keepdims=True))
    scale = cache["scale"]
    g_t += (g_s @ e_a) * scale
    g_ea += (g_s.T @ e_t[:p]) * scale
    np.add.at(grads.text_embedding, anchor_ids, g_t)
    grads.audio_projection += g_ea.T @ u
    return loss


def loss_and_grad(
    batch, params: MatcherParams, rng: np.random.Generator | None = None
) -> tuple[float, Gradients]:
    """Mean BCE over the batch plus analytic gradients for every block.

    batch entries are (anchor_ids, query_ids, label).
    """
    if not batch:
        raise ValueError("empty batch")
    grads = Gradients.zeros_like(params)
    total = 0.0
    for anchor_ids, query_ids, label in batch:
        total += _example_backward(anchor_ids, query_ids, label, params, rng, grads)
    n = len(batch)
    grads.scale(1.0 / n)
    return total / n, grads


def batch_loss(batch, params: MatcherParams, rng=None) -> float:
    if not batch:
        raise ValueError("empty batch")
    return sum(
        _bce(forward(a, q, params, rng).logit, y) for a, q, y in batch
    ) / len(batch)


def run_gradient_check(
    params: MatcherParams, batch, h: float = 1e-5
) -> dict[str, float]:
    """Central finite differences against the analytic gradients.

    Noise must be frozen (noise_sigma = 0) so both sides see the same
    function.  Returns the block-level relative error
    ||g_analytic - g_numeric|| / max(||g_analytic||, ||g_numeric||).
    """
    if params.config.noise_sigma != 0:
        raise ValueError("gradient check requires noise_sigma = 0")
    _, grads = loss_and_grad(batch, params)
    errors = {}
    blocks = {
        "text_embedding": (params.text_embedding, grads.text_embedding),
        "audio_projection": (params.audio_projection, grads.audio_projection),
        "scorer_rows": (params.scorer_rows, grads.scorer_rows),
    }
    for name, (tensor, analytic) in blocks.items():
        numeric = np.zeros_like(tensor)
        flat_t = tensor.reshape(-1)
        flat_n = numeric.reshape(-1)
        for idx in range(flat_t.size):
            keep = flat_t[idx]
            flat_t[idx] = keep + h
            up = batch_loss(batch, params)
            flat_t[idx] = keep - h
            down = batch_loss(batch, params)
            flat_t[idx] = keep
            flat_n[idx] = (up - down) / (2 * h)
        denom = max(np.linalg.norm(analytic), np.linalg.norm(numeric))
        errors[name] = (
            float(np.linalg.norm(analytic - numeric) / denom) if denom else 0.0
        )
    keep = params.scorer_bias
    params.scorer_bias = keep + h
    up = batch_loss(batch, params)
    params.scorer_bias = keep - h
    down = batch_loss(batch, params)
    params.scorer_bias = keep
    numeric_b = (up - down) / (2 * h)
    denom = max(abs(grads.scorer_bias), abs(numeric_b))
    errors["scorer_bias"] = abs(grads.scorer_bias - numeric_b) / denom if denom else 0.0
    return errors


@dataclass(frozen=True)
class TrainSettings:
    steps: int = 2000
    batch_size: int = 64
    learning_rate: float = 0.01
    val_fraction: float = 0.1
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8


def _encode_records(records, vocab: PhonemeVocab):
    return [
        (vocab.encode(r.anchor_phonemes), vocab.encode(r.query_phonemes), r.label)
        for r in records
    ]


def _accuracy(examples, params: MatcherParams) -> float:
    if not examples:
        return float("nan")
    hits = sum(
        (forward(a, q, params).logit >= 0.0) == y for a, q, y in examples
    )
    return hits / len(examples)


def train(
    records: list[PairRecord],
    config: MatcherConfig,
    settings: TrainSettings,
    seed: int,
    vocab: PhonemeVocab | None = None,
) -> tuple[MatcherParams, dict]:
    """Adam training loop; deterministic in (records, config, settings, seed).

    Noise augments training batches only; accuracy is measured with the
    noise-free forward pass.  The report holds the per-epoch mean loss.
    A caller-supplied vocab lets the model cover symbols that appear only
    in held-out data; by default the training records define it.
    """
    if not records:
        raise TrainingError("no training records", 0)
    if vocab is None:
        vocab = PhonemeVocab.from_records(records)
    if vocab.size != config.vocab_size:
        raise VocabularyError(
            f"phoneme inventory gives vocab_size {vocab.size}, "
            f"config says {config.vocab_size}"
        )
    rng = np.random.default_rng(seed)
    params = init_params(config, vocab, seed)
    examples = _encode_records(records, vocab)
    order = rng.permutation(len(examples))
    n_val = int(len(examples) * settings.val_fraction)
    val = [examples[i] for i in order[:n_val]]
    pool = [examples[i] for i in order[n_val:]]
    if not pool:
        raise TrainingError("validation split consumed every record", 0)

    clean_cfg = MatcherConfig(**{**config.__dict__, "noise_sigma": 0.0})
    moments = {
        name: (np.zeros_like(arr), np.zeros_like(arr))
        for name, arr in (
            ("text_embedding", params.text_embedding),
            ("audio_projection", params.audio_projection),
            ("scorer_rows", params.scorer_rows),
        )
    }
    m_b = v_b = 0.0
    losses: list[float] = []
    epoch_losses: list[float] = []
    batch_size = min(settings.batch_size, len(pool))
    cursor = len(pool)  # force an initial shuffle
    perm = np.arange(len(pool))
    for step in range(1, settings.steps + 1):
        if cursor + batch_size > len(pool):
            if epoch_losses:
                losses.append(float(np.mean(epoch_losses)))
                epoch_losses = []
            perm = rng.permutation(len(pool))
            cursor = 0
        batch = [pool[i] for i in perm[cursor : cursor + batch_size]]
        cursor += batch_size
        try:
            loss, grads = loss_and_grad(batch, params, rng)
        except NumericError as exc:
            raise TrainingError(str(exc), step) from exc
        if not np.isfinite(loss):
            raise TrainingError(f"loss diverged to {loss}", step)
        epoch_losses.append(loss)
        lr = settings.learning_rate
        b1, b2, eps = settings.beta1, settings.beta2, settings.adam_eps
        corr1 = 1.0 - b1**step
        corr2 = 1.0 - b2**step
        for name, grad in (
            ("text_embedding", grads.text_embedding),
            ("audio_projection", grads.audio_projection),
            ("scorer_rows", grads.scorer_rows),
        ):
            m, v = moments[name]
            m *= b1
            m += (1 - b1) * grad
            v *= b2
            v += (1 - b2) * grad * grad
            tensor = getattr(params, name)
            tensor -= lr * (m / corr1) / (np.sqrt(v / corr2) + eps)
        m_b = b1 * m_b + (1 - b1) * grads.scorer_bias
        v_b = b2 * v_b + (1 - b2) * grads.scorer_bias**2
        params.scorer_bias -= lr * (m_b / corr1) / (np.sqrt(v_b / corr2) + eps)
    if epoch_losses:
        losses.append(float(np.mean(epoch_losses)))

    clean = MatcherParams(
        clean_cfg, vocab, params.text_embedding, params.audio_projection,
        params.scorer_rows, params.scorer_bias,
    )
    report = {
        "steps": settings.steps,
        "losses": losses,
        "train_acc": _accuracy(pool, clean),
        "val_acc": _accuracy(val, clean),
        "seed": seed,
    }
    params.validate()
    return params, report


def export_scoring_weights(params: MatcherParams) -> ScoringWeights:
    """Adapt matcher parameters to the diagnostics weight type.

    The eps head stores one shared row; exporting tiles it to m identical
    rows, which is what makes rho(k) = k/m hold by construction.
    """
    cfg = params.config
    if cfg.scorer_kind == "baseline":
        return ScoringWeights("baseline", params.scorer_rows.copy(), params.scorer_bias)
    return ScoringWeights.eps(params.scorer_rows, cfg.max_positions, params.scorer_bias)


def export_aligned_features(
    params: MatcherParams, records, count: int
) -> list[AlignedFeatureSample]:
    """Noise-free forward passes collecting X for the first count records."""
    if count > len(records):
        warnings.warn(
            f"requested {count} feature samples, manifest has {len(records)}; truncating"
        )
        count = len(records)
    clean_cfg = MatcherConfig(**{**params.config.__dict__, "noise_sigma": 0.0})
    clean = MatcherParams(
        clean_cfg, params.vocab, params.text_embedding, params.audio_projection,
        params.scorer_rows, params.scorer_bias,
    )
    out = []
    for rec in records[:count]:
        a = params.vocab.encode(rec.anchor_phonemes)
        q = params.vocab.encode(rec.query_phonemes)
        out.append(forward(a, q, clean).aligned_features)
    return out


def score_records(params: MatcherParams, records) -> list[tuple[str, float, bool]]:
    """Deterministic (id, logit, label) rows for evaluation; noise disabled."""
    clean_cfg = MatcherConfig(**{**params.config.__dict__, "noise_sigma": 0.0})
    clean = MatcherParams(
        clean_cfg, params.vocab, params.text_embedding, params.audio_projection,
        params.scorer_rows, params.scorer_bias,
    )
    out = []
    for rec in records:
        a = params.vocab.encode(rec.anchor_phonemes)
        q = params.vocab.encode(rec.query_phonemes)
        out.append((rec.id, forward(a, q, clean).logit, rec.label))
    return out


def save_params(params: MatcherParams, path) -> None:
    params.validate()
    cfg = params.config
    scorer: dict = {"kind": cfg.scorer_kind, "bias": params.scorer_bias}
    if cfg.scorer_kind == "baseline":
        scorer["rows"] = params.scorer_rows.tolist()
    else:
        scorer["w"] = params.scorer_rows.tolist()
    doc = {
        "format_version": PARAMS_FORMAT_VERSION,
        "config": {
            "vocab_size": cfg.vocab_size,
            "embed_dim": cfg.embed_dim,
            "max_positions": cfg.max_positions,
            "noise_sigma": cfg.noise_sigma,
            "frame_dup": cfg.frame_dup,
            "scorer_kind": cfg.scorer_kind,
            "phoneme_symbols": list(params.vocab.symbols),
        },
        "text_embedding": params.text_embedding.tolist(),
        "audio_projection": params.audio_projection.tolist(),
        "scorer": scorer,
    }
    atomic_write_text(path, dump_json(doc))


def load_params(path) -> MatcherParams:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format_version") != PARAMS_FORMAT_VERSION:
        raise MatcherError(
            f"unsupported params format_version {doc.get('format_version')!r}"
        )
    raw_cfg = dict(doc["config"])
    symbols = raw_cfg.pop("phoneme_symbols")
    config = MatcherConfig(**raw_cfg)
    scorer = doc["scorer"]
    if scorer["kind"] != config.scorer_kind:
        raise MatcherError("scorer kind disagrees with config")
    rows = np.array(
        scorer["rows"] if config.scorer_kind == "baseline" else scorer["w"]
    )
    params = MatcherParams(
        config=config,
        vocab=PhonemeVocab(symbols),
        text_embedding=np.array(doc["text_embedding"]),
        audio_projection=np.array(doc["audio_projection"]),
        scorer_rows=rows,
        scorer_bias=float(scorer["bias"]),
    )
    params.validate()
    return params
