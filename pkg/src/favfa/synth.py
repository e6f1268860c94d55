"""Synthetic verification datasets for demos, tests and experiments.

The generator controls match probabilities directly: every pair draws its
distance below or above a nominal decision point according to its target
rate, so the optimized threshold lands next to that point and group-level
rates land next to their targets. A per-level false-match handicap can be
injected to produce a known, recoverable bias.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import ImageRecord, ImageTable, Label, PairRecord
from .schema import (
    AttributeDef,
    AttributeSchema,
    Categorical,
    Continuous,
    Scope,
    schema_to_dict,
)
from .util import canonical_json

GENDERS = ("Male", "Female")
ETHNICITIES = ("Caucasian", "African", "Asian", "Indian")


def default_schema() -> AttributeSchema:
    """The four-attribute schema used by the demos: identity-level gender and
    ethnicity, image-level age and pose, default bins."""
    from .schema import DEFAULT_AGE_BINS, DEFAULT_POSE_BINS

    return AttributeSchema(
        (
            AttributeDef("gender", Categorical(GENDERS, "Male"), Scope.IDENTITY),
            AttributeDef("ethnicity", Categorical(ETHNICITIES, "Caucasian"), Scope.IDENTITY),
            AttributeDef("age", Continuous("years"), Scope.IMAGE, DEFAULT_AGE_BINS),
            AttributeDef("pose", Continuous("degrees"), Scope.IMAGE, DEFAULT_POSE_BINS),
        )
    )


@dataclass
class SyntheticDataset:
    schema: AttributeSchema
    images: ImageTable
    pairs: tuple[PairRecord, ...]
    nominal_threshold: float = 0.5
    identity_attrs: dict[str, tuple[str, str]] = field(default_factory=dict)


def make_verification_dataset(
    n_identities: int = 200,
    images_per_identity: int = 4,
    n_positive: int = 1000,
    n_negative: int = 1000,
    seed: int = 0,
    true_match_rate: float = 0.9,
    false_match_rate: float = 0.05,
    fmr_bias: dict[str, float] | None = None,
    within_segment_negatives: float = 0.75,
) -> SyntheticDataset:
    """Random identities, images and pairs with controlled match rates.

    ``fmr_bias`` adds a handicap to the false-match probability of negative
    pairs whose two sides share the given ethnicity level. A
    ``within_segment_negatives`` share of negative pairs is drawn inside one
    demographic segment (hard negatives, as verification protocols do), the
    rest across segments. Distances are uniform on (0, 0.5) for in-threshold
    draws and (0.5, 1) otherwise.
    """
    rng = np.random.default_rng(seed)
    fmr_bias = fmr_bias or {}
    tau = 0.5

    identity_attrs = {}
    by_segment: dict[tuple[str, str], list[str]] = {}
    records = []
    for i in range(n_identities):
        identity = f"id{i:05d}"
        gender = GENDERS[rng.integers(len(GENDERS))]
        ethnicity = ETHNICITIES[rng.integers(len(ETHNICITIES))]
        identity_attrs[identity] = (gender, ethnicity)
        by_segment.setdefault((gender, ethnicity), []).append(identity)
        for j in range(images_per_identity):
            records.append(
                ImageRecord(
                    image_id=f"{identity}_img{j}",
                    identity_id=identity,
                    values={
                        "gender": gender,
                        "ethnicity": ethnicity,
                        "age": float(rng.uniform(18.0, 69.0)),
                        "pose": float(min(abs(rng.normal(18.0, 12.0)), 85.0)),
                    },
                )
            )
    images = ImageTable(records)
    identities = sorted(identity_attrs)

    def draw_distance(match_prob: float) -> float:
        if rng.random() < match_prob:
            return tau * (0.02 + 0.96 * rng.random())
        return tau + (1.0 - tau) * (0.02 + 0.96 * rng.random())

    pairs = []
    for k in range(n_positive):
        identity = identities[rng.integers(n_identities)]
        a, b = rng.choice(images_per_identity, size=2, replace=False)
        pairs.append(
            PairRecord(
                pair_id=f"pos{k:06d}",
                image_a=f"{identity}_img{a}",
                image_b=f"{identity}_img{b}",
                ground_truth=Label.SAME,
                distance=draw_distance(true_match_rate),
            )
        )
    for k in range(n_negative):
        id_a = identities[rng.integers(n_identities)]
        segment_pool = by_segment[identity_attrs[id_a]]
        if len(segment_pool) > 1 and rng.random() < within_segment_negatives:
            id_b = id_a
            while id_b == id_a:
                id_b = segment_pool[rng.integers(len(segment_pool))]
        else:
            id_b = id_a
            while id_b == id_a:
                id_b = identities[rng.integers(n_identities)]
        rate = false_match_rate
        eth_a, eth_b = identity_attrs[id_a][1], identity_attrs[id_b][1]
        if eth_a == eth_b and eth_a in fmr_bias:
            rate += fmr_bias[eth_a]
        pairs.append(
            PairRecord(
                pair_id=f"neg{k:06d}",
                image_a=f"{id_a}_img{rng.integers(images_per_identity)}",
                image_b=f"{id_b}_img{rng.integers(images_per_identity)}",
                ground_truth=Label.DIFFERENT,
                distance=draw_distance(rate),
            )
        )

    return SyntheticDataset(
        schema=default_schema(),
        images=images,
        pairs=tuple(pairs),
        nominal_threshold=tau,
        identity_attrs=identity_attrs,
    )


def make_planner_pools(
    ids_per_cell: int = 4,
    styles_per_segment: int = 40,
    seed: int = 0,
) -> tuple[AttributeSchema, ImageTable, ImageTable]:
    """Candidate id and style tables with every demographic cell populated
    and style cells spread over the age and pose bins."""
    rng = np.random.default_rng(seed)
    schema = default_schema()
    age_bins = schema["age"].bins
    pose_bins = schema["pose"].bins

    def bin_sample(bins, index) -> float:
        lo, hi = bins[index % len(bins)]
        if math.isinf(hi):
            hi = lo + 10.0
        return float(lo + (hi - lo) * rng.random())

    id_records = []
    style_records = []
    serial = 0
    for gender in GENDERS:
        for ethnicity in ETHNICITIES:
            for _ in range(ids_per_cell):
                image_id = f"seed{serial:05d}"
                id_records.append(
                    ImageRecord(
                        image_id=image_id,
                        identity_id=image_id,
                        values={
                            "gender": gender,
                            "ethnicity": ethnicity,
                            "age": bin_sample(age_bins, serial),
                            "pose": bin_sample(pose_bins, serial),
                        },
                    )
                )
                serial += 1
            for s in range(styles_per_segment):
                image_id = f"style_{gender}_{ethnicity}_{s:05d}"
                style_records.append(
                    ImageRecord(
                        image_id=image_id,
                        identity_id=image_id,
                        values={
                            "gender": gender,
                            "ethnicity": ethnicity,
                            "age": bin_sample(age_bins, s),
                            "pose": bin_sample(pose_bins, s // len(age_bins)),
                        },
                    )
                )
    return schema, ImageTable(id_records), ImageTable(style_records)


def write_dataset(dataset: SyntheticDataset, out_dir: str | Path, soft_scores: bool = True) -> None:
    """Write schema.json, images.csv and pairs.csv for a synthetic dataset.

    With ``soft_scores`` enabled the identity attributes are emitted as
    per-level score columns whose identity-average argmax reproduces the
    assigned level, exercising the consolidation path end to end.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "schema.json").write_text(
        canonical_json(schema_to_dict(dataset.schema)), encoding="utf-8"
    )
    rng = np.random.default_rng(12345)

    def soft_vector(levels: tuple[str, ...], level: str) -> list[float]:
        noise = 0.05 + 0.2 * rng.random(len(levels))
        noise[levels.index(level)] += 1.0
        noise /= noise.sum()
        return [round(float(v), 6) for v in noise]

    with open(out / "images.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        header = ["image_id", "identity_id"]
        if soft_scores:
            header += [f"gender:{l}" for l in GENDERS]
            header += [f"ethnicity:{l}" for l in ETHNICITIES]
        else:
            header += ["gender", "ethnicity"]
        header += ["age", "pitch", "yaw", "roll"]
        writer.writerow(header)
        for rec in dataset.images:
            row: list[object] = [rec.image_id, rec.identity_id]
            gender = str(rec.values["gender"])
            ethnicity = str(rec.values["ethnicity"])
            if soft_scores:
                gv = soft_vector(GENDERS, gender)
                ev = soft_vector(ETHNICITIES, ethnicity)
                gv[GENDERS.index(gender)] = round(1.0 - sum(v for i, v in enumerate(gv) if i != GENDERS.index(gender)), 6)
                ev[ETHNICITIES.index(ethnicity)] = round(1.0 - sum(v for i, v in enumerate(ev) if i != ETHNICITIES.index(ethnicity)), 6)
                row += gv + ev
            else:
                row += [gender, ethnicity]
            pose = float(rec.values["pose"])
            # split the pose norm over the three rotation axes
            pitch = round(pose * 0.48, 4)
            yaw = round(pose * 0.64, 4)
            roll = round(math.sqrt(max(pose**2 - pitch**2 - yaw**2, 0.0)), 4)
            row += [round(float(rec.values["age"]), 3), pitch, yaw, roll]
            writer.writerow(row)

    with open(out / "pairs.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["pair_id", "image_a", "image_b", "ground_truth", "distance"])
        for pair in dataset.pairs:
            writer.writerow(
                [
                    pair.pair_id,
                    pair.image_a,
                    pair.image_b,
                    pair.ground_truth.value,
                    round(pair.distance, 6),
                ]
            )
