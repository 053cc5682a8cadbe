import logging
from typing import Dict, List, Sequence, Tuple

import numpy as np

from app.exceptions import UsageError
from app.models.corpus import Corpus, FeedbackRecord, SentimentLabel, TokenAnnotation, TopicLabel, ROOT

logger = logging.getLogger(__name__)

SENTIMENT_SHARES = (49.8, 45.8, 4.3)
TOPIC_SHARES = (71.7, 18.8, 4.4, 5.0)
LENGTH_SHARES = (44.8, 37.7, 6.1, 11.7)
LENGTH_RANGES = ((3, 10), (11, 20), (21, 30), (31, 40))
MIN_SIZE = 10

TOPIC_WORDS: Dict[TopicLabel, List[str]] = {
    TopicLabel.LECTURERS: ["giảng_viên", "thầy", "cô", "giảng_dạy", "giáo_viên", "trợ_giảng", "bài_giảng", "nhiệt_huyết"],
    TopicLabel.CURRICULUMS: ["môn_học", "chương_trình", "giáo_trình", "tín_chỉ", "đề_cương", "bài_tập", "lý_thuyết", "thực_hành"],
    TopicLabel.FACILITIES: ["phòng_học", "máy_chiếu", "wifi", "điều_hòa", "bàn_ghế", "thư_viện", "micro", "cơ_sở_vật_chất"],
    TopicLabel.OTHERS: ["khảo_sát", "học_phí", "lịch_thi", "thủ_tục", "câu_lạc_bộ", "ký_túc_xá", "học_bổng", "căn_tin"],
}
SENTIMENT_WORDS: Dict[SentimentLabel, List[str]] = {
    SentimentLabel.POSITIVE: ["hay", "tốt", "tận_tình", "dễ_hiểu", "thú_vị", "hữu_ích", "vui_vẻ", "tuyệt_vời"],
    SentimentLabel.NEGATIVE: ["chán", "tệ", "khó_hiểu", "hỏng", "chậm", "ồn", "thiếu", "nóng"],
    SentimentLabel.NEUTRAL: ["bình_thường", "tạm", "vừa_phải", "trung_bình", "tạm_được", "không_rõ", "chưa_biết", "như_cũ"],
}
FILLER_WORDS = ["và", "rất", "thì", "là", "của", "em", "mong", "nên", "có", "này", "khi", "cũng"]


def allocate(total: int, shares: Sequence[float], minimum: int = 1) -> List[int]:
    """Split total by shares with largest remainders, at least `minimum` each."""
    k = len(shares)
    if total < minimum * k:
        raise UsageError(f"cannot give {k} classes {minimum} of {total} records each")
    weights = np.asarray(shares, dtype=np.float64)
    exact = weights / weights.sum() * total
    counts = np.floor(exact).astype(np.int64)
    remainders = exact - counts
    for i in sorted(range(k), key=lambda j: (-remainders[j], j))[: total - int(counts.sum())]:
        counts[i] += 1
    # lift starved classes to the minimum at the expense of the largest
    for i in range(k):
        while counts[i] < minimum:
            counts[int(np.argmax(counts))] -= 1
            counts[i] += 1
    return [int(c) for c in counts]


class FeedbackSynthesizer:
    """Generates labeled student feedback with controllable class overlap.

    Each content token comes from its class's word pool with probability
    `separability`, otherwise from the pool of a random other class.
    """

    def __init__(
        self,
        separability: float = 1.0,
        sentiment_shares: Sequence[float] = SENTIMENT_SHARES,
        topic_shares: Sequence[float] = TOPIC_SHARES,
        length_shares: Sequence[float] = LENGTH_SHARES,
        semesters: Sequence[str] = ("2015-1", "2015-2"),
    ):
        if not 0.0 <= separability <= 1.0:
            raise UsageError(f"separability must be in [0, 1], got {separability}")
        if len(sentiment_shares) != len(SentimentLabel) or len(topic_shares) != len(TopicLabel):
            raise UsageError("one share per sentiment and per topic label is required")
        if len(length_shares) != len(LENGTH_RANGES):
            raise UsageError(f"length shares need {len(LENGTH_RANGES)} values")
        if not semesters:
            raise UsageError("at least one semester tag is required")
        self.separability = separability
        self.sentiment_shares = tuple(sentiment_shares)
        self.topic_shares = tuple(topic_shares)
        self.length_shares = np.asarray(length_shares, dtype=np.float64) / sum(length_shares)
        self.semesters = list(semesters)

    def _pick(self, rng: np.random.Generator, pools: Dict, label) -> str:
        if rng.random() < self.separability:
            pool = pools[label]
        else:
            others = [key for key in pools if key != label]
            pool = pools[others[rng.integers(len(others))]]
        return pool[rng.integers(len(pool))]

    def _sentence(
        self, rng: np.random.Generator, topic: TopicLabel, sentiment: SentimentLabel
    ) -> List[Tuple[str, str]]:
        low, high = LENGTH_RANGES[rng.choice(len(LENGTH_RANGES), p=self.length_shares)]
        length = int(rng.integers(low, high + 1))
        words = [(self._pick(rng, TOPIC_WORDS, topic), "N"), (self._pick(rng, SENTIMENT_WORDS, sentiment), "A")]
        while len(words) < length:
            draw = rng.random()
            if draw < 0.3:
                words.append((self._pick(rng, TOPIC_WORDS, topic), "N"))
            elif draw < 0.6:
                words.append((self._pick(rng, SENTIMENT_WORDS, sentiment), "A"))
            else:
                words.append((FILLER_WORDS[rng.integers(len(FILLER_WORDS))], "X"))
        order = rng.permutation(len(words))
        return [words[i] for i in order]

    @staticmethod
    def _annotate(words: List[Tuple[str, str]]) -> List[TokenAnnotation]:
        # first adjective is the root; everything else hangs off it
        root = next((i for i, (_, pos) in enumerate(words) if pos == "A"), 0)
        relations = {"N": "nsubj", "A": "conj", "X": "dep"}
        return [
            TokenAnnotation(
                token=form,
                pos=pos,
                head=ROOT if i == root else root,
                deprel="root" if i == root else relations[pos],
            )
            for i, (form, pos) in enumerate(words)
        ]

    def generate(self, size: int, seed: int = 42) -> Corpus:
        """`size` records with annotations; same seed, same corpus."""
        if size < MIN_SIZE:
            raise UsageError(f"synthetic corpus size must be >= {MIN_SIZE}, got {size}")
        rng = np.random.default_rng(seed)
        sentiments = np.repeat(np.arange(len(SentimentLabel)), allocate(size, self.sentiment_shares))
        topics = np.repeat(np.arange(len(TopicLabel)), allocate(size, self.topic_shares))
        sentiments = rng.permutation(sentiments)
        topics = rng.permutation(topics)

        records, annotations = [], {}
        for n in range(size):
            topic = TopicLabel.from_code(int(topics[n]))
            sentiment = SentimentLabel.from_code(int(sentiments[n]))
            words = self._sentence(rng, topic, sentiment)
            record_id = f"{n + 2:06d}"
            records.append(
                FeedbackRecord(
                    id=record_id,
                    text=" ".join(form for form, _ in words),
                    semester=self.semesters[int(rng.integers(len(self.semesters)))],
                    sentiment=sentiment,
                    topic=topic,
                )
            )
            annotations[record_id] = self._annotate(words)

        logger.info(f"Synthesized {size} records (separability={self.separability}, seed={seed})")
        return Corpus(records=records, annotations=annotations)
