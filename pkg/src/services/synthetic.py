"""
Seeded synthetic harness: a corpus with planted rare entities, bridge and
comparison questions about them, simulated retrieval runs and the true
retrieval probability of every question
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Sequence, Set

import numpy as np

from ..models.errors import InvalidArgumentError
from ..models.qpp_models import Document, QuestionRecord, RetrievalRun
from .retrieval_path import COMPARATIVE_CUES
from .term_extraction import LEADING_WORDS

logger = logging.getLogger(__name__)

CONSONANTS = list("bdfgklmnprstvz")
VOWELS = list("aeiou")

BRIDGE_TEMPLATE = "What year was the organization tied to {e1} founded, according to its {rel} archive?"
COMPARISON_TEMPLATE = "Were {e1} and {e2} from the same country?"

TEMPLATE_WORDS = frozenset(
    w.strip("{},?").lower()
    for w in (BRIDGE_TEMPLATE + " " + COMPARISON_TEMPLATE).split()
)
RESERVED_WORDS = TEMPLATE_WORDS | COMPARATIVE_CUES | LEADING_WORDS

MAX_ENTITY_DF = 60
MAX_RELATION_DF = 200
FIRST_NAMES = 40


@dataclass
class SyntheticConfig:
    """Sizes and noise of a generated dataset"""
    seed: int = 7
    questions: int = 1000
    bridge_fraction: float = 0.5
    list_length: int = 10
    noise: float = 0.1
    cost_consistent: bool = False
    p_hop2: float = 0.125

    def __post_init__(self):
        if self.questions < 1:
            raise InvalidArgumentError(f"questions must be >= 1, got {self.questions}")
        if not 0.0 <= self.bridge_fraction <= 1.0:
            raise InvalidArgumentError(f"bridge_fraction must be in [0, 1], got {self.bridge_fraction}")
        if not 0.0 <= self.noise <= 1.0:
            raise InvalidArgumentError(f"noise must be in [0, 1], got {self.noise}")
        if self.list_length < 1:
            raise InvalidArgumentError(f"list_length must be >= 1, got {self.list_length}")

    @property
    def filler_documents(self) -> int:
        return max(3 * MAX_RELATION_DF // 2, self.questions)


@dataclass
class SyntheticDataset:
    documents: List[Document] = field(default_factory=list)
    questions: List[QuestionRecord] = field(default_factory=list)
    runs: List[RetrievalRun] = field(default_factory=list)
    truth: List[Dict[str, object]] = field(default_factory=list)


class SyntheticGenerator:
    """Generates a reproducible dataset from a seed"""

    def __init__(self, config: SyntheticConfig):
        self.config = config
        self.rng = np.random.default_rng(config.seed)
        self.logger = logging.getLogger(__name__)
        self._taken: Set[str] = set(RESERVED_WORDS)

    def _word(self, syllables: int, suffix: str = "") -> str:
        letters = []
        for _ in range(syllables):
            letters.append(str(self.rng.choice(CONSONANTS)))
            letters.append(str(self.rng.choice(VOWELS)))
        return "".join(letters) + suffix

    def _pool(self, size: int, make: Callable[[], str]) -> List[str]:
        words: List[str] = []
        while len(words) < size:
            word = make()
            if word not in self._taken:
                self._taken.add(word)
                words.append(word)
        return words

    def _filler(self, pool: List[str], low: int, high: int) -> List[str]:
        count = int(self.rng.integers(low, high + 1))
        return [pool[i] for i in self.rng.integers(0, len(pool), size=count)]

    def _log_uniform_df(self) -> int:
        return int(round(math.exp(self.rng.uniform(0.0, math.log(MAX_ENTITY_DF)))))

    def _entities(self, count: int) -> List[str]:
        firsts = self._pool(FIRST_NAMES, lambda: self._word(2, "ia").capitalize())
        surnames = self._pool(max(20, count // 10), lambda: self._word(3, "ov").capitalize())
        names: List[str] = []
        seen: Set[str] = set()
        while len(names) < count:
            name = f"{firsts[self.rng.integers(len(firsts))]} {surnames[self.rng.integers(len(surnames))]}"
            if name not in seen:
                seen.add(name)
                names.append(name)
        return names

    def _text(self, mentions: List[str], filler: List[str]) -> str:
        if not mentions:
            return " ".join(self._filler(filler, 6, 10)) + "."
        tokens: List[str] = []
        for i in self.rng.permutation(len(mentions)):
            tokens.extend(self._filler(filler, 1, 3))
            tokens.append(mentions[i])
        tokens.extend(self._filler(filler, 1, 3))
        return " ".join(tokens) + "."

    def generate(self) -> SyntheticDataset:
        cfg = self.config
        n = cfg.questions
        n_filler = cfg.filler_documents
        filler = self._pool(300, lambda: self._word(2))
        relations = self._pool(n, lambda: self._word(3, "q"))
        names = self._entities(2 * n)
        is_bridge = self.rng.random(n) < cfg.bridge_fraction

        # entity 2i is the question entity, 2i+1 the bridge or second compared entity
        entity_df = [self._log_uniform_df() for _ in names]
        filler_mentions: List[List[str]] = [[] for _ in range(n_filler)]
        home_mentions: List[List[str]] = [[] for _ in names]
        for e, name in enumerate(names):
            for j in self.rng.choice(n_filler, size=entity_df[e] - 1, replace=False):
                filler_mentions[int(j)].append(name)
        for q in range(n):
            if is_bridge[q]:
                home_mentions[2 * q].append(names[2 * q + 1])
            df = int(self.rng.integers(1, MAX_RELATION_DF + 1))
            for j in self.rng.choice(n_filler, size=df, replace=False):
                filler_mentions[int(j)].append(relations[q])

        data = SyntheticDataset()
        for e, name in enumerate(names):
            data.documents.append(Document(f"home-{e:05d}", name, self._text(home_mentions[e], filler)))
        filler_ids = [f"doc-{j:05d}" for j in range(n_filler)]
        for j, doc_id in enumerate(filler_ids):
            title = " ".join(self._filler(filler, 2, 2)).title()
            data.documents.append(Document(doc_id, title, self._text(filler_mentions[j], filler)))

        for q in range(n):
            qid = f"synth-{q:05d}"
            e1, e2 = 2 * q, 2 * q + 1
            gold = (f"home-{e1:05d}", f"home-{e2:05d}")
            d1 = entity_df[e1]
            if is_bridge[q]:
                text = BRIDGE_TEMPLATE.format(e1=names[e1], rel=relations[q])
                p_true = (1.0 / d1) * cfg.p_hop2
                hop_p = (1.0 / d1, cfg.p_hop2)
                kind = "bridge"
                truth = {"d1": d1}
            else:
                d2 = entity_df[e2]
                text = COMPARISON_TEMPLATE.format(e1=names[e1], e2=names[e2])
                p_true = (1.0 / d1) * (1.0 / d2)
                hop_p = (1.0 / d1, 1.0 / d2)
                kind = "comparison"
                truth = {"d1": d1, "d2": d2}
            data.questions.append(QuestionRecord(qid, text, None, gold, kind, None))
            data.runs.append(self._run(qid, gold, hop_p, p_true, filler_ids))
            truth.update({"question_id": qid, "type": kind, "p_true": p_true})
            data.truth.append(truth)

        self.logger.info(f"Generated {len(data.documents)} documents and {n} questions (seed {cfg.seed})")
        return data

    def _hop_ranks(self, hop_p: Sequence[float]) -> List[int]:
        """Gold rank per hop, geometric with mean 1/p of that hop

        Hops are drawn independently and p_true is the product of the hop
        probabilities, so the product of the ranks has expectation 1/p_true.
        With probability ``noise`` a rank is replaced by a uniform draw over
        the list plus one off-list position.
        """
        ranks = []
        for p in hop_p:
            rank = int(self.rng.geometric(p))
            if self.rng.random() < self.config.noise:
                rank = int(self.rng.integers(1, self.config.list_length + 2))
            ranks.append(rank)
        return ranks

    def _run(self, qid: str, gold, hop_p, p_true: float, filler_ids: List[str]) -> RetrievalRun:
        cfg = self.config
        length = cfg.list_length
        if cfg.cost_consistent:
            # disjoint distractors keep interleaved positions monotone in the hop-2 rank
            picks = self.rng.choice(len(filler_ids), size=2 * length, replace=False)
            distractors = [[filler_ids[i] for i in picks[:length]],
                           [filler_ids[i] for i in picks[length:]]]
            ranks = [1, min(length + 1, max(1, math.ceil(math.log2(1.0 / p_true))))]
        else:
            distractors = [[filler_ids[i] for i in self.rng.choice(len(filler_ids), size=length, replace=False)]
                           for _ in gold]
            ranks = self._hop_ranks(hop_p)
        hops = []
        for doc_id, rank, others in zip(gold, ranks, distractors):
            hop = list(others)
            if rank <= length:
                hop.insert(rank - 1, doc_id)
            hops.append(hop[:length])
        return RetrievalRun(qid, hops, frozenset(gold))


def generate(config: SyntheticConfig) -> SyntheticDataset:
    return SyntheticGenerator(config).generate()
