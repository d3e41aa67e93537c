"""Like-vs-dislike popularity scoring over subjective vote tallies.

Each tally counts likes and dislikes one (image, algorithm) pair received.
The popularity index is the natural log of the smoothed like:dislike ratio;
the natural base is what makes a 249-like / 1147-dislike tally with c=1 come
out at ln(250/1148) = -1.524. Tallies merge commutatively, so shards can be
ingested in any order.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable


class VoteError(ValueError):
    """Raised for invalid smoothing constants, tallies, or record streams."""


@dataclass
class VoteTally:
    image_id: str
    algorithm_id: str
    n_like: int = 0
    n_dislike: int = 0

    def __post_init__(self) -> None:
        if self.n_like < 0 or self.n_dislike < 0:
            raise VoteError(
                f"counts must be >= 0, got likes={self.n_like} dislikes={self.n_dislike}"
            )


def pop_image(tally: VoteTally, c: float = 1.0) -> float:
    """ln((likes + c) / (dislikes + c)) for a single image/algorithm pair."""
    if c <= 0:
        raise VoteError(f"smoothing constant c must be > 0, got {c}")
    return math.log((tally.n_like + c) / (tally.n_dislike + c))


def pop_algorithm(tallies: list[VoteTally], c: float = 1.0) -> float:
    """ln((total likes + c) / (total dislikes + c)) across one algorithm's images."""
    if c <= 0:
        raise VoteError(f"smoothing constant c must be > 0, got {c}")
    if not tallies:
        raise VoteError("tallies must be non-empty")
    algos = {t.algorithm_id for t in tallies}
    if len(algos) != 1:
        raise VoteError(f"mixed algorithm ids in one aggregate: {sorted(algos)}")
    likes = sum(t.n_like for t in tallies)
    dislikes = sum(t.n_dislike for t in tallies)
    return math.log((likes + c) / (dislikes + c))


@dataclass
class AlgorithmReport:
    algorithm_id: str
    pop: float
    mean_image_pop: float
    variance_image_pop: float
    total_likes: int
    total_dislikes: int
    n_images: int


@dataclass
class PopReport:
    c: float
    sample_variance: bool
    algorithms: list[AlgorithmReport] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "c": self.c,
            "variance_kind": "sample" if self.sample_variance else "population",
            "algorithms": [
                {
                    "algorithm_id": a.algorithm_id,
                    "pop": a.pop,
                    "mean_image_pop": a.mean_image_pop,
                    "variance_image_pop": a.variance_image_pop,
                    "total_likes": a.total_likes,
                    "total_dislikes": a.total_dislikes,
                    "n_images": a.n_images,
                }
                for a in self.algorithms
            ],
        }

    def to_table(self) -> str:
        header = f"{'algorithm':<16}{'pop':>10}{'mean':>10}{'variance':>10}{'likes':>8}{'dislikes':>10}"
        lines = [header, "-" * len(header)]
        for a in self.algorithms:
            lines.append(
                f"{a.algorithm_id:<16}{a.pop:>10.3f}{a.mean_image_pop:>10.3f}"
                f"{a.variance_image_pop:>10.3f}{a.total_likes:>8d}{a.total_dislikes:>10d}"
            )
        return "\n".join(lines)


def summarize(
    tallies: list[VoteTally], c: float = 1.0, sample_variance: bool = False
) -> PopReport:
    """Per-algorithm popularity, plus mean and variance of per-image scores.

    Variance is population (divide by N) by default; sample_variance switches
    to N-1 (undefined for a single image, reported as 0).
    """
    if c <= 0:
        raise VoteError(f"smoothing constant c must be > 0, got {c}")
    if not tallies:
        raise VoteError("tallies must be non-empty")
    by_algo: dict[str, list[VoteTally]] = {}
    for t in tallies:
        by_algo.setdefault(t.algorithm_id, []).append(t)
    report = PopReport(c=c, sample_variance=sample_variance)
    for algo in sorted(by_algo):
        ts = by_algo[algo]
        pops = [pop_image(t, c) for t in ts]
        mean = sum(pops) / len(pops)
        centered = [(p - mean) ** 2 for p in pops]
        if sample_variance:
            var = sum(centered) / (len(pops) - 1) if len(pops) > 1 else 0.0
        else:
            var = sum(centered) / len(pops)
        report.algorithms.append(
            AlgorithmReport(
                algorithm_id=algo,
                pop=pop_algorithm(ts, c),
                mean_image_pop=mean,
                variance_image_pop=var,
                total_likes=sum(t.n_like for t in ts),
                total_dislikes=sum(t.n_dislike for t in ts),
                n_images=len(ts),
            )
        )
    return report


@dataclass
class IngestResult:
    tallies: list[VoteTally]
    accepted: int
    rejected: int


def ingest_votes(records: Iterable[dict]) -> IngestResult:
    """Fold best/worst choice records into tallies.

    Each record is {voter_id, image_id, best, worst}: best increments likes
    for (image, best), worst increments dislikes for (image, worst).
    Records where best == worst are rejected and counted.
    """
    table: dict[tuple[str, str], VoteTally] = {}

    def tally(image_id: str, algo: str) -> VoteTally:
        key = (image_id, algo)
        if key not in table:
            table[key] = VoteTally(image_id=image_id, algorithm_id=algo)
        return table[key]

    accepted = rejected = 0
    for rec in records:
        try:
            image_id = str(rec["image_id"])
            best = str(rec["best"])
            worst = str(rec["worst"])
        except (KeyError, TypeError) as exc:
            raise VoteError(f"malformed vote record {rec!r}: {exc}") from exc
        if best == worst:
            rejected += 1
            continue
        tally(image_id, best).n_like += 1
        tally(image_id, worst).n_dislike += 1
        accepted += 1
    return IngestResult(
        tallies=list(table.values()), accepted=accepted, rejected=rejected
    )


def read_vote_records(path) -> list[dict]:
    """Load line-delimited JSON vote records."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise VoteError(f"bad JSON on line {i + 1} of {path}: {exc}") from exc
    return records
