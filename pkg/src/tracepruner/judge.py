"""Pluggable answer-equivalence judges.

Four implementations share one contract, ``score(left, right) -> float in
[0, 1]``: a ground-truth oracle, a noise-calibrated simulator, a trainable
logistic feature judge (focal loss + minority oversampling), and a remote
chat-completions judge (see remote_judge.py).
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Protocol, Sequence

import numpy as np

from .answers import reward
from .model import Segment, TracePair
from .truncation import ReasoningLexicon, _core

FEATURE_SPEC_VERSION = 1
FEATURE_DIM = 5
_HASH_SPACE = 1 << 16


class MissingGroundTruth(Exception):
    pass


class SingleClassDataset(Exception):
    pass


class Judge(Protocol):
    def score(self, left: Segment, right: Segment) -> float: ...


# ---------------------------------------------------------------------------
# Oracle judge


def oracle_score(left_answer: Optional[str], right_answer: Optional[str]) -> float:
    """1.0 iff the ground-truth final answers are equivalent."""
    if left_answer is None or right_answer is None:
        raise MissingGroundTruth("oracle judge requires both final answers")
    return float(reward(left_answer, right_answer))


class OracleJudge:
    """Perfect judge; usable only on replay/synthetic sources that carry answers."""

    def score(self, left: Segment, right: Segment) -> float:
        return oracle_score(left.answer_hint, right.answer_hint)


# ---------------------------------------------------------------------------
# Simulated judge (calibrated noise model)


def beta_shape_auroc(a: float) -> float:
    """AUROC of scores drawn Beta(a,1) for positives and Beta(1,a) for negatives.

    Closed form: 1 - a*B(a, a+1).
    """
    return 1.0 - math.exp(math.log(a) + math.lgamma(a) + math.lgamma(a + 1.0) - math.lgamma(2.0 * a + 1.0))


def calibrate_beta_shape(target_auroc: float, tol: float = 1e-12) -> float:
    """Shape parameter whose Beta score model attains the target AUROC."""
    if not 0.5 <= target_auroc <= 1.0:
        raise ValueError("target_auroc must lie in [0.5, 1]")
    if target_auroc == 0.5:
        return 1.0
    lo, hi = 1.0, 2.0
    while beta_shape_auroc(hi) < target_auroc:
        hi *= 2.0
        if hi > 1e12:
            break
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if beta_shape_auroc(mid) < target_auroc:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


def _pair_key_digest(seed: int, left_id: str, right_id: str) -> int:
    a, b = sorted((left_id, right_id))
    h = hashlib.blake2b(f"{seed}|{a}|{b}".encode("utf-8"), digest_size=8)
    return int.from_bytes(h.digest(), "big")


def simulated_score(label: int, seed: int, pair_key: tuple[str, str], target_auroc: float,
                    shape: Optional[float] = None) -> float:
    """Deterministic noisy score: Beta(a,1) for positives, Beta(1,a) for negatives.

    The draw depends only on (seed, unordered pair id), so repeated queries for
    the same pair return the same score.
    """
    if target_auroc >= 1.0:
        return float(label)
    a = calibrate_beta_shape(target_auroc) if shape is None else shape
    rng = np.random.default_rng(_pair_key_digest(seed, *pair_key))
    u = rng.random()
    x = u ** (1.0 / a)  # Beta(a, 1) via inverse CDF
    return x if label == 1 else 1.0 - x


class SimulatedJudge:
    """Oracle corrupted to a target AUROC; deterministic under its seed."""

    def __init__(self, target_auroc: float, seed: int = 0):
        if not 0.5 <= target_auroc <= 1.0:
            raise ValueError("target_auroc must lie in [0.5, 1]")
        self.target_auroc = target_auroc
        self.seed = seed
        self._shape = None if target_auroc >= 1.0 else calibrate_beta_shape(target_auroc)

    def score(self, left: Segment, right: Segment) -> float:
        label = int(oracle_score(left.answer_hint, right.answer_hint))
        return simulated_score(
            label, self.seed, (left.trace_id, right.trace_id), self.target_auroc, self._shape
        )


# ---------------------------------------------------------------------------
# Feature extraction


@dataclass(frozen=True)
class FeatureVector:
    cosine_hashed_unigrams: float
    jaccard_numeric_literals: float
    norm_length_diff: float
    shared_reasoning_word_frac: float
    bias: float = 1.0

    def as_array(self) -> np.ndarray:
        return np.array(
            [
                self.cosine_hashed_unigrams,
                self.jaccard_numeric_literals,
                self.norm_length_diff,
                self.shared_reasoning_word_frac,
                self.bias,
            ]
        )


def _hash_token(token: str) -> int:
    # Stable across runs and platforms, unlike builtin hash().
    h = hashlib.blake2b(token.encode("utf-8"), digest_size=8)
    return int.from_bytes(h.digest(), "big") % _HASH_SPACE


def _hashed_counts(tokens: Sequence[str]) -> dict[int, int]:
    counts: dict[int, int] = {}
    for tok in tokens:
        idx = _hash_token(tok)
        counts[idx] = counts.get(idx, 0) + 1
    return counts


def _cosine(a: dict[int, int], b: dict[int, int]) -> float:
    dot = sum(v * b.get(k, 0) for k, v in a.items())
    na = math.sqrt(sum(v * v for v in a.values()))
    nb = math.sqrt(sum(v * v for v in b.values()))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return dot / (na * nb)


def _numeric_literals(tokens: Sequence[str]) -> set[str]:
    out = set()
    for tok in tokens:
        core = _core(tok)
        if core and all(ch.isdigit() or ch == "." for ch in core) and any(ch.isdigit() for ch in core):
            out.add(core)
    return out


def _jaccard(a: set, b: set) -> float:
    if not a and not b:
        return 1.0  # both-empty convention
    union = a | b
    return len(a & b) / len(union)


def extract_features(
    left: Sequence[str], right: Sequence[str], lexicon: ReasoningLexicon
) -> FeatureVector:
    if not left or not right:
        raise ValueError("segments must be non-empty")
    cos = _cosine(_hashed_counts(left), _hashed_counts(right))
    jac = _jaccard(_numeric_literals(left), _numeric_literals(right))
    ldiff = abs(len(left) - len(right)) / max(len(left), len(right))
    words_l = {_core(t) for t in left if _core(t) in lexicon.words}
    words_r = {_core(t) for t in right if _core(t) in lexicon.words}
    shared = _jaccard(words_l, words_r)
    return FeatureVector(cos, jac, ldiff, shared)


# ---------------------------------------------------------------------------
# Focal loss


@dataclass(frozen=True)
class FocalLossParams:
    gamma: float = 2.0
    alpha: float = 0.5

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")


_EPS = 1e-12


def focal_loss(p_model: float, label: int, params: FocalLossParams) -> float:
    """-alpha_t * (1 - p_t)^gamma * log(p_t), with p clamped away from {0, 1}."""
    p = min(max(p_model, _EPS), 1.0 - _EPS)
    p_t = p if label == 1 else 1.0 - p
    alpha_t = params.alpha if label == 1 else 1.0 - params.alpha
    return -alpha_t * (1.0 - p_t) ** params.gamma * math.log(p_t)


def focal_loss_grad_logit(z: float, label: int, params: FocalLossParams) -> float:
    """d(focal_loss)/dz where p_model = sigmoid(z)."""
    p = 1.0 / (1.0 + math.exp(-z))
    p = min(max(p, _EPS), 1.0 - _EPS)
    p_t = p if label == 1 else 1.0 - p
    alpha_t = params.alpha if label == 1 else 1.0 - params.alpha
    q = 1.0 - p_t
    # dL/dp_t, then chain through dp_t/dz = +-p(1-p)
    dl_dpt = -alpha_t * (-params.gamma * q ** (params.gamma - 1.0) * math.log(p_t) + (q ** params.gamma) / p_t) \
        if params.gamma > 0 else -alpha_t / p_t
    dpt_dz = p * (1.0 - p) * (1.0 if label == 1 else -1.0)
    return dl_dpt * dpt_dz


# ---------------------------------------------------------------------------
# Trainable feature judge


def lexicon_hash(lexicon: ReasoningLexicon) -> str:
    payload = "\n".join(sorted(lexicon.words)).encode("utf-8")
    return hashlib.blake2b(payload, digest_size=16).hexdigest()


class FeatureJudge:
    """Logistic model over the 5-d pair feature vector. Immutable after training."""

    def __init__(self, weights: np.ndarray, lexicon: ReasoningLexicon,
                 focal_params: FocalLossParams = FocalLossParams(), seed: int = 0):
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (FEATURE_DIM,):
            raise ValueError(f"expected {FEATURE_DIM} weights, got {weights.shape}")
        self.weights = weights
        self.lexicon = lexicon
        self.focal_params = focal_params
        self.seed = seed

    def score(self, left: Segment, right: Segment) -> float:
        return self.score_segments(left.tokens, right.tokens)

    def score_segments(self, left: Sequence[str], right: Sequence[str]) -> float:
        x = extract_features(left, right, self.lexicon).as_array()
        z = float(self.weights @ x)
        return 1.0 / (1.0 + math.exp(-z))

    def to_dict(self) -> dict:
        return {
            "weights": [float(w) for w in self.weights],
            "feature_spec_version": FEATURE_SPEC_VERSION,
            "lexicon_hash": lexicon_hash(self.lexicon),
            "lexicon_words": sorted(self.lexicon.words),
            "focal": {"gamma": self.focal_params.gamma, "alpha": self.focal_params.alpha},
            "seed": self.seed,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "FeatureJudge":
        d = json.loads(Path(path).read_text(encoding="utf-8"))
        if d.get("feature_spec_version") != FEATURE_SPEC_VERSION:
            raise ValueError(f"unsupported feature_spec_version {d.get('feature_spec_version')}")
        lex = ReasoningLexicon.from_words(d["lexicon_words"])
        focal = FocalLossParams(d["focal"]["gamma"], d["focal"]["alpha"])
        return cls(np.array(d["weights"]), lex, focal, d.get("seed", 0))


def _oversample(labels: np.ndarray, factor: int, rng: np.random.Generator) -> np.ndarray:
    """Indices with each minority-class row duplicated (factor - 1) extra times, shuffled."""
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    minority = 1 if n_pos < n_neg else 0
    idx = list(range(len(labels)))
    if factor > 1:
        extras = [i for i in range(len(labels)) if labels[i] == minority]
        idx.extend(extras * (factor - 1))
    idx = np.array(idx)
    rng.shuffle(idx)
    return idx


def train_feature_judge(
    pairs: Sequence[TracePair],
    lexicon: ReasoningLexicon,
    params: FocalLossParams = FocalLossParams(),
    oversample_factor: int = 2,
    epochs: int = 200,
    lr: float = 1.0,
    seed: int = 0,
) -> FeatureJudge:
    """Fit the logistic feature judge by full-batch gradient descent on mean focal loss."""
    if oversample_factor < 1:
        raise ValueError("oversample_factor must be >= 1")
    labels = np.array([p.label for p in pairs], dtype=int)
    if len(labels) == 0 or labels.min() == labels.max():
        raise SingleClassDataset("training needs both labels present")
    X = np.stack([extract_features(p.left, p.right, lexicon).as_array() for p in pairs])
    y = labels.astype(float)

    rng = np.random.default_rng(seed)
    idx = _oversample(labels, oversample_factor, rng)
    X, y = X[idx], y[idx]

    w = np.zeros(FEATURE_DIM)
    gamma, alpha = params.gamma, params.alpha
    for _ in range(epochs):
        z = X @ w
        p = 1.0 / (1.0 + np.exp(-z))
        p = np.clip(p, _EPS, 1.0 - _EPS)
        p_t = np.where(y == 1.0, p, 1.0 - p)
        alpha_t = np.where(y == 1.0, alpha, 1.0 - alpha)
        q = 1.0 - p_t
        if gamma > 0:
            dl_dpt = -alpha_t * (-gamma * q ** (gamma - 1.0) * np.log(p_t) + q**gamma / p_t)
        else:
            dl_dpt = -alpha_t / p_t
        dpt_dz = p * (1.0 - p) * np.where(y == 1.0, 1.0, -1.0)
        grad = (X * (dl_dpt * dpt_dz)[:, None]).mean(axis=0)
        w -= lr * grad
    return FeatureJudge(w, lexicon, params, seed)
