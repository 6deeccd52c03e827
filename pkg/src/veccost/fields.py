from __future__ import annotations

import math
from enum import Enum
from typing import TYPE_CHECKING, Any, Optional

from .utils import comma_join, format_float, get_subclass_names

if TYPE_CHECKING:
    from veccost.models import Model


class Field:
    """
    Abstract base class for all field types.
    """

    name: str = None  # this is set by the parent model
    parent: type["Model"] = None  # this is set by the parent model
    creation_counter: int = 0  # used for keeping the model fields ordered
    class_default: Any = 0  # should be overridden by concrete subclasses

    def __init__(self, default: Any = None, doc: Optional[str] = None):
        assert doc is None or isinstance(doc, str), "doc parameter must be a string if given"

        self.creation_counter = Field.creation_counter
        Field.creation_counter += 1
        self.default = self.class_default if default is None else default
        self.doc = doc

    def __str__(self):
        return self.name

    def __repr__(self):
        return "<%s>" % self.__class__.__name__

    def to_python(self, value):
        """
        Converts the input value into the expected Python data type, raising ValueError if the
        data can't be converted. Returns the converted value. Subclasses should override this.
        """
        return value  # pragma: no cover

    def validate(self, value):
        """
        Called after to_python to validate that the value is acceptable for the field.
        Subclasses should override this.
        """
        pass

    def _range_check(self, value, min_value, max_value, strict_min=False):
        """
        Utility method to check that the given value is between min_value and max_value.
        Either bound may be None. With `strict_min`, the value must exceed min_value.
        """
        too_small = min_value is not None and (
            value <= min_value if strict_min else value < min_value
        )
        too_large = max_value is not None and value > max_value
        if too_small or too_large:
            lower = "(%s" % min_value if strict_min else "[%s" % min_value
            raise ValueError(
                "%s out of range - %s is not in %s, %s]"
                % (self.__class__.__name__, value, lower, max_value)
            )

    def to_string(self, value) -> str:
        """
        Returns the field's value as text, for CSV cells and log lines.
        """
        return str(value)

    def to_json(self, value):
        """
        Returns the field's value as a JSON-compatible Python object.
        """
        return value


class StringField(Field):
    class_default = ""

    def to_python(self, value) -> str:
        if isinstance(value, str):
            return value
        raise ValueError("Invalid value for %s: %r" % (self.__class__.__name__, value))


class BoolField(Field):
    class_default = False

    TRUE_STRINGS = frozenset({"1", "true", "yes", "on"})
    FALSE_STRINGS = frozenset({"0", "false", "no", "off"})

    def to_python(self, value) -> bool:
        if isinstance(value, bool):
            return value
        if isinstance(value, int) and value in (0, 1):
            return bool(value)
        if isinstance(value, str):
            lowered = value.strip().lower()
            if lowered in self.TRUE_STRINGS:
                return True
            if lowered in self.FALSE_STRINGS:
                return False
        raise ValueError("Invalid value for %s - %r" % (self.__class__.__name__, value))

    def to_string(self, value) -> str:
        return "1" if value else "0"


class IntField(Field):
    """
    An integer with optional bounds.
    """

    def __init__(
        self,
        default: Any = None,
        min_value: Optional[int] = None,
        max_value: Optional[int] = None,
        doc: Optional[str] = None,
    ):
        self.min_value = min_value
        self.max_value = max_value
        super().__init__(default, doc)

    def to_python(self, value) -> int:
        if isinstance(value, bool):
            raise ValueError("Invalid value for %s - %r" % (self.__class__.__name__, value))
        if isinstance(value, float):
            if not value.is_integer():
                raise ValueError("Invalid value for %s - %r" % (self.__class__.__name__, value))
            return int(value)
        try:
            return int(value)
        except (TypeError, ValueError):
            raise ValueError("Invalid value for %s - %r" % (self.__class__.__name__, value))

    def validate(self, value):
        self._range_check(value, self.min_value, self.max_value)


class FloatField(Field):
    """
    A finite real number with optional bounds. Pass `strict_min=True` for
    quantities that must be strictly positive (lengths, time steps).
    """

    def __init__(
        self,
        default: Any = None,
        min_value: Optional[float] = None,
        max_value: Optional[float] = None,
        strict_min: bool = False,
        doc: Optional[str] = None,
    ):
        self.min_value = min_value
        self.max_value = max_value
        self.strict_min = strict_min
        super().__init__(default, doc)

    def to_python(self, value) -> float:
        if isinstance(value, bool):
            raise ValueError("Invalid value for %s - %r" % (self.__class__.__name__, value))
        try:
            value = float(value)
        except (TypeError, ValueError):
            raise ValueError("Invalid value for %s - %r" % (self.__class__.__name__, value))
        if not math.isfinite(value):
            raise ValueError("Non-finite value for %s - %r" % (self.__class__.__name__, value))
        return value

    def validate(self, value):
        self._range_check(value, self.min_value, self.max_value, self.strict_min)

    def to_string(self, value) -> str:
        return format_float(value)


class EnumField(Field):
    """
    A member of a Python `Enum`. Accepts members, member names and member values.
    """

    def __init__(
        self,
        enum_cls: type[Enum],
        default: Any = None,
        doc: Optional[str] = None,
    ):
        self.enum_cls = enum_cls
        if default is None:
            default = list(enum_cls)[0]
        super().__init__(default, doc)

    def to_python(self, value):
        if isinstance(value, self.enum_cls):
            return value
        try:
            if isinstance(value, str):
                try:
                    return self.enum_cls[value]
                except KeyError:
                    return self.enum_cls(value)
            return self.enum_cls(value)
        except (KeyError, ValueError, TypeError):
            pass
        raise ValueError(
            "Invalid value for %s: %r (expected one of %s)"
            % (self.enum_cls.__name__, value, comma_join(m.value for m in self.enum_cls))
        )

    def to_string(self, value) -> str:
        return str(value.value)

    def to_json(self, value):
        return value.value


class ArrayField(Field):
    """
    A list of values of a single inner field type, optionally of a fixed length.
    """

    class_default = []

    def __init__(
        self,
        inner_field: Field,
        length: Optional[int] = None,
        default: Any = None,
        doc: Optional[str] = None,
    ):
        assert isinstance(
            inner_field, Field
        ), "The first argument of ArrayField must be a Field instance"
        assert not isinstance(
            inner_field, ArrayField
        ), "Multidimensional array fields are not supported"
        self.inner_field = inner_field
        self.length = length
        super().__init__(default, doc)

    def to_python(self, value):
        if not isinstance(value, (list, tuple)):
            raise ValueError("ArrayField expects list or tuple, not %s" % type(value))
        return [self.inner_field.to_python(v) for v in value]

    def validate(self, value):
        if self.length is not None and len(value) != self.length:
            raise ValueError(
                "ArrayField expects exactly %d values, got %d" % (self.length, len(value))
            )
        for v in value:
            self.inner_field.validate(v)

    def to_string(self, value) -> str:
        return "[" + comma_join(self.inner_field.to_string(v) for v in value) + "]"

    def to_json(self, value):
        return [self.inner_field.to_json(v) for v in value]


class NullableField(Field):
    class_default = None

    def __init__(
        self,
        inner_field: Field,
        default: Any = None,
        doc: Optional[str] = None,
    ):
        assert isinstance(
            inner_field, Field
        ), "The first argument of NullableField must be a Field instance." " Not: {}".format(
            inner_field
        )
        self.inner_field = inner_field
        self._null_values = [None, ""]
        super().__init__(default, doc)

    def to_python(self, value):
        if value in self._null_values:
            return None
        return self.inner_field.to_python(value)

    def validate(self, value):
        value in self._null_values or self.inner_field.validate(value)

    def to_string(self, value):
        if value in self._null_values:
            return ""
        return self.inner_field.to_string(value)

    def to_json(self, value):
        if value in self._null_values:
            return None
        return self.inner_field.to_json(value)


class ModelField(Field):
    """
    A nested model. Accepts an instance of `model_class` or a dict of its fields;
    a dict is converted with `model_class.from_dict`, so unknown keys are rejected
    and omitted keys take their defaults.
    """

    class_default = None

    def __init__(self, model_class: type["Model"], doc: Optional[str] = None):
        self.model_class = model_class
        super().__init__(None, doc)

    def to_python(self, value):
        if value is None:
            return self.model_class()
        if isinstance(value, self.model_class):
            return value
        if isinstance(value, dict):
            try:
                return self.model_class.from_dict(value)
            except AttributeError as e:
                raise ValueError(str(e))
        raise ValueError(
            "Invalid value for %s - expected a %s or a dict, got %r"
            % (self.__class__.__name__, self.model_class.__name__, value)
        )

    def validate(self, value):
        value.validate()

    def to_string(self, value) -> str:
        return repr(value)

    def to_json(self, value):
        return value.to_json_dict()


# Expose only relevant classes in import *
__all__ = get_subclass_names(locals(), Field)
