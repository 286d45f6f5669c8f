"""Closed word lists and the caption/question templates of the scene world."""
from __future__ import annotations

SHAPES = ("circle", "square", "triangle")
COLORS = ("red", "green", "blue", "yellow", "brown")
SIZES = ("small", "large")
NUMBERS = ("zero", "one", "two", "three", "four")
# row bands, top to bottom
LOCATIONS = ("top", "upper", "lower", "bottom")

STOPWORDS = frozenset({"a", "is", "the", "on", "of", "in"})

START, END, UNKNOWN, PAD = "<start>", "<end>", "<unk>", "<pad>"
SPECIAL_TOKENS = (START, END, UNKNOWN, PAD)

# every answer the question templates can emit, in class-id order
ANSWER_CLASSES = SHAPES + COLORS + NUMBERS + LOCATIONS


def location_word(row: int, rows: int) -> str:
    return LOCATIONS[row * len(LOCATIONS) // rows]


def describe(obj) -> str:
    return f"a {obj.size} {obj.color} {obj.shape}"


def relation(subject, other) -> str:
    if subject.row == other.row:
        return "left of" if subject.col < other.col else "right of"
    return "above" if subject.row < other.row else "below"


def primary_caption(objects, rows: int) -> str:
    """Main description; `objects` must be in reading order."""
    if len(objects) == 1:
        obj = objects[0]
        return f"{describe(obj)} at the {location_word(obj.row, rows)}"
    subject = min(objects, key=lambda o: COLORS.index(o.color))
    other = next(o for o in objects if o is not subject)
    text = f"{describe(subject)} is {relation(subject, other)} {describe(other)}"
    for obj in objects:
        if obj is not subject and obj is not other:
            text += f" and {describe(obj)}"
    return text


def count_caption(objects) -> str:
    if len(objects) == 1:
        return "there is one object"
    return f"there are {NUMBERS[len(objects)]} objects"


def listing_caption(objects) -> str:
    return " and ".join(describe(obj) for obj in objects)


CAPTION_TEMPLATES = (primary_caption, count_caption, listing_caption)


def captions_for(objects, rows: int, count: int) -> list[str]:
    texts = [primary_caption(objects, rows), count_caption(objects), listing_caption(objects)]
    return texts[:count]


def question_for(qtype: str, objects, rows: int, rng) -> tuple[str, str]:
    """Build one (question, answer) pair of the given type for a scene."""
    if qtype == "object":
        target = objects[rng.integers(len(objects))]
        return f"what shape is the {target.color} object", target.shape
    if qtype == "color":
        target = objects[rng.integers(len(objects))]
        return f"what color is the {target.size} {target.shape}", target.color
    if qtype == "location":
        target = objects[rng.integers(len(objects))]
        return f"where is the {target.color} {target.shape}", location_word(target.row, rows)
    if qtype == "number":
        if rng.random() < 0.5:
            return "how many objects are there", NUMBERS[len(objects)]
        shape = SHAPES[rng.integers(len(SHAPES))]
        count = sum(1 for o in objects if o.shape == shape)
        return f"how many {shape} objects are there", NUMBERS[count]
    raise ValueError(f"unknown question type {qtype!r}")
