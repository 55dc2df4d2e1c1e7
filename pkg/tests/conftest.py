import numpy as np
import pytest

from longctx.packing import CATEGORIES, Sample, Turn


def make_sample(sid, length, category="Video", turns=None):
    if turns is None:
        turns = (Turn("user", f"question {sid}", 1), Turn("assistant", f"answer {sid}"))
    return Sample(sid, category, length, tuple(turns))


def synthetic_corpus(per_category=1000, seed=1, lo=256, hi=65536):
    """Log-uniform lengths so every category has both short and long samples."""
    rng = np.random.default_rng(seed)
    out = []
    for cat in CATEGORIES:
        for k in range(per_category):
            n = int(np.exp(rng.uniform(np.log(lo), np.log(hi))))
            out.append(make_sample(f"{cat}-{k:05d}", n, cat))
    return out


def random_turns(rng, n_exchanges):
    alphabet = list("abcdefghij \n<>|{}\t") + ["é", "日"]
    def text():
        return "".join(rng.choice(alphabet, size=int(rng.integers(0, 30))))
    turns = []
    if rng.random() < 0.3:
        turns.append(Turn("system", text()))
    for _ in range(n_exchanges):
        turns.append(Turn("user", text(), int(rng.integers(0, 3))))
        turns.append(Turn("assistant", text()))
    return tuple(turns)


@pytest.fixture(scope="session")
def corpus_4000():
    return synthetic_corpus()
