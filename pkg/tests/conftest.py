import numpy as np
import pytest

from navspeaker import envsim
from navspeaker.corpus import Vocabulary, default_lexicon, record_from_silver, tokenize
from navspeaker.features import EmbeddingTable, FeatureExtractor


@pytest.fixture(scope="session")
def house():
    return envsim.generate_house(3, envsim.HouseSpec(4, 3, 2))


@pytest.fixture(scope="session")
def lexicon():
    return default_lexicon()


@pytest.fixture(scope="session")
def silver_corpus(house):
    """8 deterministic silver records on one house plus their vocabulary."""
    samples = [
        envsim.template_instruction(house, envsim.sample_path(house, 100 + s, 5.0, 20.0), seed=100 + s)
        for s in range(8)
    ]
    vocab = Vocabulary(t for s in samples for t in tokenize(s.instruction))
    records = [record_from_silver(s, house, vocab, f"r{k}") for k, s in enumerate(samples)]
    return records, vocab


@pytest.fixture(scope="session")
def extractor():
    return FeatureExtractor(EmbeddingTable(dim=16, seed=1), v_dim=32)


def line_house(n_nodes: int = 4, gap: float = 2.0) -> envsim.House:
    """Straight chain of nodes `gap` metres apart inside one big room."""
    names = [chr(ord("a") + i) for i in range(n_nodes)]
    pos = {n: np.array([0.0, gap * i, 1.5]) for i, n in enumerate(names)}
    edges = {(a, b): gap for a, b in zip(names, names[1:])}
    rooms = [envsim.Room("r0", "kitchen", np.array([-50.0, -50.0, 0.0]), np.array([50.0, 50.0, 3.0]))]
    return envsim.House("line", names, pos, edges, rooms, [])
