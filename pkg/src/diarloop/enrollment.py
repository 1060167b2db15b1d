"""Speaker assignment against per-speaker enrollment pools.

Each speaker holds seed embeddings plus a bounded FIFO of online
enrollments added from user corrections. Assignment picks the speaker
whose best pool member has the highest cosine similarity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NoEnrollmentsError, UnknownSpeakerError, ValidationError
from .model import Embedding, SpeakerId, cosine, normalize


@dataclass(frozen=True)
class AssignmentTrace:
    segment_id: str
    chosen: SpeakerId
    scores: dict[SpeakerId, float]
    pool_revision: int


@dataclass(frozen=True)
class EnrollmentPool:
    """Immutable pool snapshot; updates return a new pool.

    Seeds are never evicted. Online enrollments are capped per speaker;
    the oldest is dropped first when the cap is exceeded. A cap of zero
    disables online enrollment entirely.
    """

    seeds: dict[SpeakerId, tuple[Embedding, ...]]
    online: dict[SpeakerId, tuple[Embedding, ...]] = field(default_factory=dict)
    online_cap: int = 1
    revision: int = 0

    @staticmethod
    def from_seeds(
        seeds: dict[SpeakerId, list[Embedding]], online_cap: int = 1
    ) -> "EnrollmentPool":
        if not seeds:
            raise NoEnrollmentsError("enrollment pool needs at least one speaker")
        clean: dict[SpeakerId, tuple[Embedding, ...]] = {}
        dim: int | None = None
        for spk, vecs in seeds.items():
            if not spk:
                raise ValidationError("speaker id is empty")
            if not vecs:
                raise NoEnrollmentsError(f"speaker {spk!r} has no seed embedding")
            norms = tuple(normalize(v) for v in vecs)
            for v in norms:
                if dim is None:
                    dim = v.shape[0]
                elif v.shape[0] != dim:
                    raise ValidationError(
                        f"seed dimension {v.shape[0]} != {dim}", location=spk
                    )
            clean[spk] = norms
        return EnrollmentPool(
            seeds=clean, online={s: () for s in clean}, online_cap=online_cap
        )

    def speakers(self) -> list[SpeakerId]:
        return sorted(self.seeds)

    def members(self, speaker: SpeakerId) -> tuple[Embedding, ...]:
        return self.seeds[speaker] + self.online.get(speaker, ())

    def online_counts(self) -> dict[SpeakerId, int]:
        return {s: len(self.online.get(s, ())) for s in self.speakers()}

    def enroll_online(self, speaker: SpeakerId, e: Embedding) -> "EnrollmentPool":
        """Append ``e`` to the speaker's online list, evicting FIFO at cap.

        Returns the updated pool; this pool is left unchanged so prior
        assignment traces stay auditable. A cap of 0 returns self.
        """
        if speaker not in self.seeds:
            raise UnknownSpeakerError(f"speaker {speaker!r} is not enrolled")
        if self.online_cap == 0:
            return self
        vec = normalize(e)
        if vec.shape[0] != self.seeds[speaker][0].shape[0]:
            raise ValidationError("online embedding dimension mismatch", location=speaker)
        current = self.online.get(speaker, ()) + (vec,)
        if len(current) > self.online_cap:
            current = current[len(current) - self.online_cap :]
        online = dict(self.online)
        online[speaker] = current
        return EnrollmentPool(
            seeds=self.seeds,
            online=online,
            online_cap=self.online_cap,
            revision=self.revision + 1,
        )


def assign_speaker(
    e: Embedding, pool: EnrollmentPool, segment_id: str = ""
) -> AssignmentTrace:
    """Label an embedding with the max-cosine speaker over the whole pool.

    Per speaker the score is the best cosine across seeds and online
    enrollments; ties between speakers go to the lexicographically
    smallest id.
    """
    if not pool.seeds:
        raise NoEnrollmentsError("enrollment pool is empty")
    query = normalize(e)
    scores: dict[SpeakerId, float] = {}
    for spk in pool.speakers():
        scores[spk] = max(float(np.dot(query, m)) for m in pool.members(spk))
    best = max(scores.values())
    chosen = min(s for s, v in scores.items() if v == best)
    return AssignmentTrace(
        segment_id=segment_id, chosen=chosen, scores=scores, pool_revision=pool.revision
    )


__all__ = [
    "AssignmentTrace",
    "EnrollmentPool",
    "assign_speaker",
    "cosine",
]
