import numpy as np
import pytest
from numpy.testing import assert_array_equal

from app.core.config import QUESTION_TYPES, WorldConfig
from app.core.errors import ConfigError
from app.world.dataset import generate_dataset, question_type, scene_seed
from app.world.language import (
    ANSWER_CLASSES,
    captions_for,
    count_caption,
    listing_caption,
    location_word,
    primary_caption,
    question_for,
)
from app.world.scenes import RGB, SceneObject, build_scene, generate_scene

WORLD = WorldConfig()


def test_generated_scene_is_a_function_of_the_seed():
    assert generate_scene(11, WORLD) == generate_scene(11, WORLD)
    assert generate_scene(11, WORLD) != generate_scene(12, WORLD)


def test_scene_objects_have_distinct_cells_colors_and_kinds():
    for seed in range(50):
        scene = generate_scene(seed, WORLD)
        objects = scene.objects
        assert 1 <= len(objects) <= 4
        assert len({(o.row, o.col) for o in objects}) == len(objects)
        assert len({o.color for o in objects}) == len(objects)
        assert len({(o.size, o.shape) for o in objects}) == len(objects)
        assert list(objects) == sorted(objects, key=lambda o: (o.row, o.col))


def test_render_paints_only_the_object_cell():
    scene = build_scene([SceneObject("square", "blue", "large", 1, 2)], WORLD)
    assert scene.canvas.shape == (16, 16, 3)
    cell = scene.canvas[4:8, 8:12]
    assert_array_equal(cell, np.broadcast_to(RGB["blue"], (4, 4, 3)))
    assert scene.canvas.sum() == pytest.approx(16.0)


@pytest.mark.parametrize(
    "objects",
    [
        [],
        [SceneObject("square", "blue", "large", 4, 0)],
        [SceneObject("square", "blue", "large", 0, 0), SceneObject("circle", "red", "small", 0, 0)],
    ],
)
def test_invalid_explicit_scenes_are_rejected(objects):
    with pytest.raises(ConfigError):
        build_scene(objects, WORLD)


def test_unknown_attribute_is_rejected():
    with pytest.raises(ConfigError):
        SceneObject("hexagon", "blue", "large", 0, 0)


def test_world_config_invariants():
    with pytest.raises(ValueError):
        WorldConfig(grid_h=4, grid_w=2)
    with pytest.raises(ValueError):
        WorldConfig(grid_size=12)
    with pytest.raises(ValueError):
        WorldConfig(grid_size=8, grid_h=2, grid_w=2, max_objects=4, min_objects=5)
    with pytest.raises(ValueError):
        WorldConfig(object_share=0.5)


def test_caption_templates():
    one = [SceneObject("circle", "red", "small", 3, 1)]
    assert primary_caption(one, 4) == "a small red circle at the bottom"
    assert count_caption(one) == "there is one object"

    two = [SceneObject("square", "green", "large", 0, 0), SceneObject("circle", "red", "small", 0, 3)]
    # red comes first in the colour order, so it is the subject
    assert primary_caption(two, 4) == "a small red circle is right of a large green square"
    assert count_caption(two) == "there are two objects"
    assert listing_caption(two) == "a large green square and a small red circle"
    assert captions_for(two, 4, 2) == [primary_caption(two, 4), count_caption(two)]


def test_location_words_split_rows_into_bands():
    assert [location_word(r, 4) for r in range(4)] == ["top", "upper", "lower", "bottom"]
    assert [location_word(r, 2) for r in range(2)] == ["top", "lower"]


def test_questions_have_unique_referents():
    rng = np.random.default_rng(0)
    for seed in range(30):
        scene = generate_scene(seed, WORLD)
        for qtype in QUESTION_TYPES:
            question, answer = question_for(qtype, scene.objects, WORLD.grid_h, rng)
            assert answer in ANSWER_CLASSES
            if qtype == "object":
                color = question.split()[-2]
                assert [o.shape for o in scene.objects if o.color == color] == [answer]
            if qtype == "color":
                size, shape = question.split()[-2:]
                assert [o.color for o in scene.objects if (o.size, o.shape) == (size, shape)] == [answer]


def test_question_types_follow_configured_shares():
    shares = {"object": 0.5, "number": 0.1, "color": 0.2, "location": 0.2}
    drawn = [question_type(i, shares) for i in range(1000)]
    for qtype, share in shares.items():
        assert abs(drawn.count(qtype) / 1000 - share) < 0.01


def test_scene_seeds_are_spread_per_dataset_seed():
    assert scene_seed(0, 5) == 5
    assert scene_seed(1, 0) != scene_seed(0, 1)


def test_generate_dataset_is_deterministic(world_config):
    first = generate_dataset(3, 6, 2, world_config)
    second = generate_dataset(3, 6, 2, world_config)
    assert first[0] == second[0]
    assert first[1] == second[1]
    assert first[2] == second[2]


def test_concept_labels_mark_concept_words_in_captions(tiny_dataset):
    train, _, vocab = tiny_dataset
    for sample in train:
        words = {vocab.tokens[t] for caption in sample.captions for t in caption}
        assert list(sample.labels) == [int(w in words) for w in vocab.concepts]
        assert len(sample.qa) == 2


@pytest.mark.parametrize("seed", [0, 7, 4242])
def test_train_and_test_scene_seeds_are_disjoint(seed, world_config):
    train, test, _ = generate_dataset(seed, 40, 10, world_config)
    train_seeds = {s.scene.seed for s in train}
    test_seeds = {s.scene.seed for s in test}
    assert len(train_seeds) == 40
    assert len(test_seeds) == 10
    assert not train_seeds & test_seeds
