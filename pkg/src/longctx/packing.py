"""Long-context training-data pipeline.

Length classification, recipe-targeted corpus sampling, first-fit-decreasing
concatenation to a target context length, and ChatML serialization.
Token counts are supplied with each sample; no tokenizer is involved.
"""

from __future__ import annotations

import bisect
import json
import math
import re
from dataclasses import asdict, dataclass, field
from typing import Iterable

import numpy as np

from .errors import ConfigurationError, InvalidInputError, MissingSampleError

__all__ = [
    "CATEGORIES",
    "DEFAULT_CATEGORY_RATIOS",
    "Pack",
    "PackManifest",
    "RecipeConfig",
    "Sample",
    "Selection",
    "Turn",
    "classify_length",
    "normalize_content",
    "pack",
    "parse_chatml",
    "sample_corpus",
    "serialize_chatml",
    "serialize_turns",
    "video_frame_budget",
]

CATEGORIES = ("TextLong", "ImageShortInstruction", "ImageInterleave", "Video")
DEFAULT_CATEGORY_RATIOS = {
    "TextLong": 0.20,
    "ImageShortInstruction": 0.25,
    "ImageInterleave": 0.25,
    "Video": 0.30,
}
ROLES = ("system", "user", "assistant")

IM_START = "<|im_start|>"
IM_END = "<|im_end|>"
MEDIA = "<|vision_start|><|placeholder|><|vision_end|>"
_SPECIAL = ("<|im_start|>", "<|im_end|>", "<|vision_start|>", "<|vision_end|>", "<|placeholder|>")


@dataclass(frozen=True)
class Turn:
    role: str
    content: str
    attachments: int = 0


@dataclass(frozen=True)
class Sample:
    id: str
    category: str
    token_len: int
    turns: tuple[Turn, ...]

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise InvalidInputError(f"{self.id}: unknown category {self.category!r}")
        if self.token_len < 1:
            raise InvalidInputError(f"{self.id}: token_len must be >= 1")
        if not self.turns:
            raise InvalidInputError(f"{self.id}: a sample needs at least one turn")
        roles = [t.role for t in self.turns]
        if roles[0] == "system":
            roles = roles[1:]
        for k, role in enumerate(roles):
            expected = "user" if k % 2 == 0 else "assistant"
            if role != expected:
                raise InvalidInputError(f"{self.id}: turn roles must alternate user/assistant, got {roles}")

    @classmethod
    def from_dict(cls, d: dict) -> "Sample":
        turns = tuple(
            Turn(t["role"], t.get("content", ""), int(t.get("attachments", 0))) for t in d["turns"]
        )
        return cls(str(d["id"]), d["category"], int(d["token_len"]), turns)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "category": self.category,
            "token_len": self.token_len,
            "turns": [asdict(t) for t in self.turns],
        }


def classify_length(sample: Sample, threshold: int = 8192) -> str:
    """``"long"`` when the sample strictly exceeds ``threshold`` tokens."""
    if threshold <= 0:
        raise InvalidInputError("threshold must be positive")
    return "long" if sample.token_len > threshold else "short"


@dataclass
class RecipeConfig:
    category_ratios: dict = field(default_factory=lambda: dict(DEFAULT_CATEGORY_RATIOS))
    long_threshold: int = 8192
    long_ratio: float = 0.60
    target_length: int = 131072
    ratio_tolerance: float = 0.02
    # "tokens" measures the long share in tokens, "count" in samples.
    long_ratio_basis: str = "tokens"

    def __post_init__(self):
        unknown = set(self.category_ratios) - set(CATEGORIES)
        if unknown:
            raise ConfigurationError(f"unknown categories {sorted(unknown)}")
        values = list(self.category_ratios.values())
        if any(not 0.0 <= v <= 1.0 for v in values) or abs(sum(values) - 1.0) > 1e-9:
            raise ConfigurationError("category ratios must lie in [0, 1] and sum to 1")
        if not 0.0 <= self.long_ratio <= 1.0 or not 0.0 <= self.ratio_tolerance <= 1.0:
            raise ConfigurationError("long_ratio and ratio_tolerance must lie in [0, 1]")
        if self.long_ratio_basis not in ("tokens", "count"):
            raise ConfigurationError("long_ratio_basis must be 'tokens' or 'count'")

    @classmethod
    def from_dict(cls, d: dict) -> "RecipeConfig":
        return cls(**d)


@dataclass
class Selection:
    samples: list
    category_shares: dict
    long_share: float
    warnings: list

    @property
    def total_tokens(self) -> int:
        return sum(s.token_len for s in self.samples)


def _achieved(samples, recipe: RecipeConfig):
    total = sum(s.token_len for s in samples)
    shares = {c: 0.0 for c in CATEGORIES}
    if not total:
        return shares, 0.0
    for s in samples:
        shares[s.category] += s.token_len / total
    is_long = [classify_length(s, recipe.long_threshold) == "long" for s in samples]
    if recipe.long_ratio_basis == "count":
        long_share = sum(is_long) / len(samples)
    else:
        long_share = sum(s.token_len for s, lg in zip(samples, is_long) if lg) / total
    return shares, long_share


def _fill_cell(pool: list, target: float, rng) -> list:
    """Pick samples whose lengths sum as close to ``target`` as possible without exceeding it.

    Greedy pass in shuffled order, then single swaps that close the gap.
    """
    order = rng.permutation(len(pool))
    chosen, rest = [], []
    used = 0
    for k in order:
        s = pool[k]
        if used + s.token_len <= target:
            chosen.append(s)
            used += s.token_len
        else:
            rest.append(s)
    rest.sort(key=lambda s: (s.token_len, s.id))
    lengths = [s.token_len for s in rest]
    improved = True
    while improved and rest and chosen:
        improved = False
        gap = target - used
        best = None
        for i, a in enumerate(chosen):
            # largest unchosen b with a < b <= a + gap
            j = bisect.bisect_right(lengths, a.token_len + gap) - 1
            if j >= 0 and lengths[j] > a.token_len:
                gain = lengths[j] - a.token_len
                if best is None or gain > best[0]:
                    best = (gain, i, j)
        if best is not None:
            gain, i, j = best
            chosen[i], rest[j] = rest[j], chosen[i]
            used += gain
            rest.sort(key=lambda s: (s.token_len, s.id))
            lengths = [s.token_len for s in rest]
            improved = True
    return chosen


def _fill_by_count(longs: list, shorts: list, quota: float, long_ratio: float, rng) -> list:
    """Alternate long and short picks so the long sample count tracks ``long_ratio``.

    Stops once the lagging class has nothing left that fits the quota.
    """
    queues = {
        True: [longs[k] for k in rng.permutation(len(longs))],
        False: [shorts[k] for k in rng.permutation(len(shorts))],
    }
    chosen: list = []
    used = n_long = 0
    while queues[True] or queues[False]:
        want_long = n_long < long_ratio * (len(chosen) + 1)
        if not queues[want_long]:
            want_long = not want_long
        queue = queues[want_long]
        k = next((i for i, s in enumerate(queue) if used + s.token_len <= quota), None)
        if k is None:
            break
        s = queue.pop(k)
        chosen.append(s)
        used += s.token_len
        n_long += want_long
    return chosen


def sample_corpus(recipe: RecipeConfig, corpus: Iterable[Sample], token_budget: int, seed: int = 0) -> Selection:
    """Select samples matching the recipe's category and long/short token shares.

    Each category receives ``ratio * budget`` tokens, split between long and
    short samples by ``long_ratio``. Unreachable targets are reported in
    ``warnings`` together with the shares actually achieved.
    """
    corpus = list(corpus)
    if not corpus:
        raise InvalidInputError("corpus is empty")
    if token_budget <= 0:
        raise InvalidInputError("token budget must be positive")
    rng = np.random.default_rng(seed)
    warnings: list = []
    if token_budget < min(s.token_len for s in corpus):
        warnings.append(f"budget {token_budget} is smaller than every sample")

    selected: list = []
    for cat in CATEGORIES:
        quota = recipe.category_ratios.get(cat, 0.0) * token_budget
        members = sorted((s for s in corpus if s.category == cat), key=lambda s: s.id)
        longs = [s for s in members if classify_length(s, recipe.long_threshold) == "long"]
        shorts = [s for s in members if classify_length(s, recipe.long_threshold) == "short"]
        if recipe.long_ratio_basis == "count":
            selected.extend(_fill_by_count(longs, shorts, quota, recipe.long_ratio, rng))
        else:
            selected.extend(_fill_cell(longs, quota * recipe.long_ratio, rng))
            selected.extend(_fill_cell(shorts, quota * (1.0 - recipe.long_ratio), rng))

    shares, long_share = _achieved(selected, recipe)
    tol = recipe.ratio_tolerance
    for cat in CATEGORIES:
        want = recipe.category_ratios.get(cat, 0.0)
        if abs(shares[cat] - want) > tol:
            warnings.append(f"category {cat}: achieved share {shares[cat]:.4f}, target {want:.4f}")
    if selected and abs(long_share - recipe.long_ratio) > tol:
        warnings.append(f"long share: achieved {long_share:.4f}, target {recipe.long_ratio:.4f}")
    selected.sort(key=lambda s: (CATEGORIES.index(s.category), s.id))
    return Selection(selected, shares, long_share, warnings)


@dataclass(frozen=True)
class Pack:
    sample_ids: tuple[str, ...]
    total_len: int


@dataclass
class PackManifest:
    target_length: int
    packs: list
    leftovers: list
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "target_length": self.target_length,
            "packs": [{"sample_ids": list(p.sample_ids), "total_len": p.total_len} for p in self.packs],
            "leftovers": list(self.leftovers),
            "notes": list(self.notes),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def pack(samples: Iterable[Sample], target_length: int) -> PackManifest:
    """First-fit-decreasing concatenation without splitting any sample.

    Samples longer than ``target_length`` go to ``leftovers``.
    """
    if target_length <= 0:
        raise InvalidInputError("target_length must be positive")
    ordered = sorted(samples, key=lambda s: (-s.token_len, s.id))
    bins: list[list] = []
    room: list[int] = []
    leftovers, notes = [], []
    for s in ordered:
        if s.token_len > target_length:
            leftovers.append(s.id)
            notes.append(f"{s.id}: {s.token_len} tokens exceeds target {target_length}")
            continue
        for k, free in enumerate(room):
            if s.token_len <= free:
                bins[k].append(s)
                room[k] -= s.token_len
                break
        else:
            bins.append([s])
            room.append(target_length - s.token_len)
    packs = [Pack(tuple(s.id for s in b), sum(s.token_len for s in b)) for b in bins]
    return PackManifest(target_length, packs, leftovers, notes)


def normalize_content(text: str) -> str:
    """Strip reserved ChatML and vision marker strings from free text."""
    for tok in _SPECIAL:
        text = text.replace(tok, "")
    return text


def _render_turn(turn: Turn) -> str:
    if turn.role not in ROLES:
        raise InvalidInputError(f"unknown role {turn.role!r}")
    if turn.attachments < 0:
        raise InvalidInputError("attachments must be >= 0")
    if any(tok in turn.content for tok in _SPECIAL):
        raise InvalidInputError("turn content contains reserved marker text; run normalize_content first")
    return f"{IM_START}{turn.role}\n{MEDIA * turn.attachments}{turn.content}{IM_END}\n"


def serialize_turns(turns: Iterable[Turn]) -> str:
    return "".join(_render_turn(t) for t in turns)


def serialize_chatml(pack_: Pack, samples) -> str:
    """Render every turn of the pack's samples, in pack order, as ChatML.

    ``samples`` is a mapping from id to Sample or an iterable of Samples.
    """
    if not isinstance(samples, dict):
        samples = {s.id: s for s in samples}
    parts = []
    for sid in pack_.sample_ids:
        if sid not in samples:
            raise MissingSampleError(sid)
        parts.append(serialize_turns(samples[sid].turns))
    return "".join(parts)


_TURN_RE = re.compile(
    re.escape(IM_START) + r"(system|user|assistant)\n(.*?)" + re.escape(IM_END) + r"\n", re.DOTALL
)


def parse_chatml(text: str) -> list[Turn]:
    """Inverse of :func:`serialize_turns`; raises on any unparsed text."""
    turns, pos = [], 0
    for m in _TURN_RE.finditer(text):
        if m.start() != pos:
            raise InvalidInputError(f"unexpected text at offset {pos}")
        body = m.group(2)
        n = 0
        while body.startswith(MEDIA):
            body = body[len(MEDIA):]
            n += 1
        turns.append(Turn(m.group(1), body, n))
        pos = m.end()
    if pos != len(text):
        raise InvalidInputError(f"unexpected text at offset {pos}")
    return turns


def video_frame_budget(duration_seconds: float, fps: float = 2.0) -> int:
    """Frames kept when sampling a clip at ``fps``: ``floor(duration * fps)``, at least 1."""
    if not (duration_seconds > 0 and fps > 0):
        raise InvalidInputError("duration and fps must be positive")
    return max(1, math.floor(duration_seconds * fps))
