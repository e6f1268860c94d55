from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from favfa.data import ImageRecord, ImageTable, Label, PairRecord
from favfa.schema import (
    AttributeDef,
    AttributeSchema,
    Categorical,
    Continuous,
    DEFAULT_AGE_BINS,
    DEFAULT_POSE_BINS,
    Scope,
)

GENDERS = ("Male", "Female")
ETHNICITIES = ("Caucasian", "African", "Asian", "Indian")


@pytest.fixture
def schema() -> AttributeSchema:
    return AttributeSchema(
        (
            AttributeDef("gender", Categorical(GENDERS, "Male"), Scope.IDENTITY),
            AttributeDef("ethnicity", Categorical(ETHNICITIES, "Caucasian"), Scope.IDENTITY),
            AttributeDef("age", Continuous("years"), Scope.IMAGE, DEFAULT_AGE_BINS),
            AttributeDef("pose", Continuous("degrees"), Scope.IMAGE, DEFAULT_POSE_BINS),
        )
    )


def image(image_id, identity_id, gender="Male", ethnicity="Caucasian", age=30.0,
          pose=10.0, soft_scores=None):
    return ImageRecord(
        image_id=image_id,
        identity_id=identity_id,
        values={"gender": gender, "ethnicity": ethnicity, "age": age, "pose": pose},
        soft_scores=soft_scores or {},
    )


def pair(pair_id, image_a, image_b, same, distance, predicted=None):
    return PairRecord(
        pair_id=pair_id,
        image_a=image_a,
        image_b=image_b,
        ground_truth=Label.SAME if same else Label.DIFFERENT,
        distance=distance,
        predicted=None if predicted is None else (Label.SAME if predicted else Label.DIFFERENT),
    )


@pytest.fixture
def tiny_tables(schema):
    """Two identities, two images each, plus four pairs."""
    images = ImageTable(
        [
            image("a1", "A", "Male", "African", 30.0, 12.0),
            image("a2", "A", "Male", "African", 40.0, 4.0),
            image("b1", "B", "Female", "Asian", 22.0, 8.0),
            image("b2", "B", "Female", "Asian", 26.0, 30.0),
        ]
    )
    pairs = (
        pair("p1", "a1", "a2", True, 0.2),
        pair("p2", "b1", "b2", True, 0.3),
        pair("p3", "a1", "b1", False, 0.7),
        pair("p4", "a2", "b2", False, 0.9),
    )
    return images, pairs
