"""Semantic label maps resolved to categories and plane orientations."""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .errors import MappingError, ParseError
from .kvfile import format_key_values, parse_key_values

HORIZONTAL = "horizontal"
VERTICAL = "vertical"
UNCONSTRAINED = "unconstrained"
ORIENTATIONS = (HORIZONTAL, VERTICAL, UNCONSTRAINED)

DEFAULT_GATED = ("flat", "vehicle", "construction")


@dataclass(frozen=True)
class LabelMapping:
    """Class ID -> (class name, category) plus category -> orientation.

    ``default`` is the category assigned to IDs missing from ``classes``;
    ``None`` makes such IDs an error and ``"unconstrained"`` leaves them
    outside every category.
    """

    classes: dict[int, tuple[str, str]]
    orientations: dict[str, str]
    default: str | None = UNCONSTRAINED
    categories: tuple[str, ...] = field(init=False)

    def __post_init__(self):
        cats = []
        for cid in sorted(self.classes):
            cat = self.classes[cid][1]
            if cat not in cats:
                cats.append(cat)
        for cat in self.orientations:
            if cat not in cats:
                cats.append(cat)
        if self.default not in (None, UNCONSTRAINED) and self.default not in cats:
            cats.append(self.default)
        for cat, orient in self.orientations.items():
            if orient not in ORIENTATIONS:
                raise MappingError(f"category '{cat}' has unknown orientation '{orient}'")
        object.__setattr__(self, "categories", tuple(cats))

    def orientation(self, category: str) -> str:
        return self.orientations.get(category, UNCONSTRAINED)

    def class_id(self, name: str) -> int:
        for cid, (cname, _) in self.classes.items():
            if cname == name:
                return cid
        raise MappingError(f"no class named '{name}'")

    def representative_class(self, category: str) -> int:
        """Lowest class ID belonging to ``category``."""
        ids = sorted(cid for cid, (_, cat) in self.classes.items() if cat == category)
        if not ids:
            raise MappingError(f"no class belongs to category '{category}'")
        return ids[0]

    def resolve(self, class_ids: np.ndarray) -> "SemanticMask":
        """Map a class-ID image to a ``SemanticMask``.

        Raises ``MappingError`` listing unmapped IDs when there is no default.
        """
        class_ids = np.asarray(class_ids)
        codes = np.full(class_ids.shape, -1, dtype=np.int16)
        index = {cat: i for i, cat in enumerate(self.categories)}
        present = np.unique(class_ids)
        missing = [int(v) for v in present if int(v) not in self.classes]
        if missing and self.default is None:
            raise MappingError(f"label IDs without mapping: {missing}")
        for value in present:
            value = int(value)
            if value in self.classes:
                cat = self.classes[value][1]
            elif self.default == UNCONSTRAINED:
                continue
            else:
                cat = self.default
            codes[class_ids == value] = index[cat]
        return SemanticMask(codes, self.categories, tuple(self.orientation(c) for c in self.categories), class_ids.astype(np.int32))

    def to_text(self) -> str:
        items = [("default", self.default if self.default is not None else "none")]
        items += [(f"class.{cid}", f"{name} {cat}") for cid, (name, cat) in sorted(self.classes.items())]
        items += [(f"orientation.{cat}", orient) for cat, orient in self.orientations.items()]
        return format_key_values(items)

    @classmethod
    def from_text(cls, text: str, source: str = "<string>") -> "LabelMapping":
        kv = parse_key_values(text, source)
        classes: dict[int, tuple[str, str]] = {}
        orientations: dict[str, str] = {}
        default: str | None = UNCONSTRAINED
        for key, value in kv.items():
            if key == "default":
                default = None if value.lower() == "none" else value
            elif key.startswith("class."):
                try:
                    cid = int(key[len("class.") :])
                except ValueError:
                    raise ParseError(f"{source}: bad class key '{key}'") from None
                parts = value.split()
                if len(parts) != 2:
                    raise ParseError(f"{source}: '{key}' needs '<name> <category>', got {value!r}")
                classes[cid] = (parts[0], parts[1])
            elif key.startswith("orientation."):
                orientations[key[len("orientation.") :]] = value
            else:
                raise ParseError(f"{source}: unknown key '{key}'")
        return cls(classes, orientations, default)


def default_mapping() -> LabelMapping:
    """CityScapes 19-class grouping into flat/human/vehicle/construction/object/nature/sky."""
    text = resources.files("geosup").joinpath("data/cityscapes_categories.txt").read_text(encoding="utf-8")
    return LabelMapping.from_text(text, "cityscapes_categories.txt")


@dataclass(frozen=True)
class SemanticMask:
    """Per-pixel category codes (``-1`` = no category) with their orientations."""

    codes: np.ndarray
    category_names: tuple[str, ...]
    orientations: tuple[str, ...]
    class_ids: np.ndarray | None = None

    @property
    def shape(self):
        return self.codes.shape

    def category_mask(self, category: str) -> np.ndarray:
        if category not in self.category_names:
            return np.zeros(self.codes.shape, dtype=bool)
        return self.codes == self.category_names.index(category)

    def orientation_of(self, category: str) -> str:
        if category not in self.category_names:
            return UNCONSTRAINED
        return self.orientations[self.category_names.index(category)]

    def orientation_map(self) -> np.ndarray:
        """Per-pixel orientation string array."""
        table = np.array(list(self.orientations) + [UNCONSTRAINED], dtype=object)
        return table[np.where(self.codes >= 0, self.codes, len(self.orientations))]

    def gated(self, categories) -> np.ndarray:
        """Pixels whose category is in ``categories`` and has a plane orientation."""
        out = np.zeros(self.codes.shape, dtype=bool)
        for cat in categories:
            if self.orientation_of(cat) in (HORIZONTAL, VERTICAL):
                out |= self.category_mask(cat)
        return out

    @classmethod
    def uniform(cls, shape, category: str | None, orientation: str = UNCONSTRAINED) -> "SemanticMask":
        if category is None:
            return cls(np.full(shape, -1, dtype=np.int16), (), ())
        return cls(np.zeros(shape, dtype=np.int16), (category,), (orientation,))
