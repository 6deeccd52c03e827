from __future__ import annotations

import json
import math
import sys
from collections import OrderedDict
from copy import deepcopy
from enum import Enum
from typing import TypeVar, Optional, Any

from .fields import (
    Field,
    StringField,
    BoolField,
    IntField,
    FloatField,
    EnumField,
    ArrayField,
    NullableField,
    ModelField,
)
from .utils import VecCostException, get_subclass_names

MODEL = TypeVar("MODEL", bound="Model")


class ConfigError(VecCostException, ValueError):
    """
    Raised when a configuration document or record cannot be converted to a model.
    """


class ModelBase(type):
    """
    A metaclass for models. It adds the _fields list to model classes.
    """

    def __new__(mcs, name, bases, attrs):

        # Collect fields from parent classes
        fields = {}
        for base in bases:
            if isinstance(base, ModelBase):
                fields.update(base._fields)

        # Add fields from this class
        for n, obj in attrs.items():
            if isinstance(obj, Field):
                fields[n] = obj

        # Convert fields to a list of (name, field) tuples
        # in the order they were listed in the class
        fields = sorted(fields.items(), key=lambda item: item[1].creation_counter)

        # Build a dictionary of default values
        defaults = {n: f.to_python(f.default) for n, f in fields}

        # Create the model class
        attrs = dict(
            attrs,
            _fields=OrderedDict(fields),
            _defaults=defaults,
        )
        model = super(ModelBase, mcs).__new__(mcs, str(name), bases, attrs)

        # Let each field know its parent and its own name
        for n, obj in fields:
            setattr(obj, "parent", model)
            setattr(obj, "name", n)

        return model


class Model(metaclass=ModelBase):
    """
    A base class for typed records. Each model class declares its fields, for example:

        class Waypoint(Model):
            x = FloatField()
            y = FloatField()
            label = StringField(default="start")

    Values are converted and validated on assignment, so an instance is never in
    an invalid per-field state. Checks that involve several fields belong in `clean`.
    """

    _fields: dict[str, Field]

    def __init__(self, **kwargs):
        """
        Creates a model instance, using keyword arguments as field values.
        Since values are immediately converted to their Pythonic type,
        invalid values will cause a `ValueError` to be raised.
        Unrecognized field names will cause an `AttributeError`.
        """
        super(Model, self).__init__()
        # Assign default values; nested models and lists must not be shared
        self.__dict__.update(deepcopy(self._defaults))
        # Assign field values from keyword arguments
        for name, value in kwargs.items():
            field = self.get_field(name)
            if field:
                setattr(self, name, value)
            else:
                raise AttributeError(
                    "%s does not have a field called %s" % (self.__class__.__name__, name)
                )

    def __setattr__(self, name, value):
        """
        When setting a field value, converts the value to its Pythonic type and validates it.
        This may raise a `ValueError`.
        """
        field = self.get_field(name)
        if field:
            try:
                value = field.to_python(value)
                field.validate(value)
            except ValueError:
                tp, v, tb = sys.exc_info()
                new_msg = "{} (field '{}')".format(v, name)
                raise tp.with_traceback(tp(new_msg), tb)
        super(Model, self).__setattr__(name, value)

    def __eq__(self, other):
        return type(self) is type(other) and self.to_dict() == other.to_dict()

    def __repr__(self):
        return "<%s %s>" % (
            self.__class__.__name__,
            " ".join(
                "%s=%s" % (name, field.to_string(getattr(self, name)))
                for name, field in self.fields().items()
                if not isinstance(field, ModelField)
            ),
        )

    def get_field(self, name: str) -> Optional[Field]:
        """
        Gets a `Field` instance given its name, or `None` if not found.
        """
        return self._fields.get(name)

    def clean(self):
        """
        Checks constraints that involve more than one field, raising `ValueError`.
        Subclasses should override this.
        """
        pass

    def validate(self):
        """
        Validates every field value and then the cross-field constraints.
        Nested models are validated recursively.
        """
        for name, field in self.fields().items():
            try:
                field.validate(getattr(self, name))
            except ValueError as e:
                raise ValueError("%s (field '%s')" % (e, name))
        self.clean()
        return self

    @classmethod
    def from_dict(cls: type[MODEL], data: dict[str, Any]) -> MODEL:
        """
        Creates a validated instance from a dict, e.g. a parsed JSON document.
        Omitted fields take their defaults; unknown keys raise `AttributeError`.
        """
        if not isinstance(data, dict):
            raise ValueError(
                "%s expects a JSON object, got %s" % (cls.__name__, type(data).__name__)
            )
        return cls(**data).validate()

    @classmethod
    def from_json(cls: type[MODEL], text: str) -> MODEL:
        """
        Parses a JSON document into a validated instance, converting every
        failure into `ConfigError`.
        """
        try:
            return cls.from_dict(json.loads(text))
        except (ValueError, AttributeError) as e:
            raise ConfigError("Invalid %s: %s" % (cls.__name__, e))

    def to_dict(self) -> dict[str, Any]:
        """
        Returns the instance's field values as a dict of Python objects.
        """
        data = self.__dict__
        return {name: data[name] for name in self.fields()}

    def to_json_dict(self) -> dict[str, Any]:
        """
        Returns the instance's field values converted to JSON-compatible objects.
        """
        return {name: field.to_json(getattr(self, name)) for name, field in self.fields().items()}

    @classmethod
    def csv_header(cls) -> list[str]:
        """
        Returns the field names in declaration order, for the first line of a CSV file.
        """
        return list(cls.fields())

    def to_csv_row(self) -> list[str]:
        """
        Returns the instance's field values as a list of strings, in declaration order.
        """
        return [field.to_string(getattr(self, name)) for name, field in self.fields().items()]

    @classmethod
    def fields(cls) -> dict[str, Field]:
        """
        Returns an `OrderedDict` of the model's fields (from name to `Field` instance).
        Callers should not modify the dictionary.
        """
        return cls._fields


class Scenario(Enum):
    """
    The three race set-ups. Player 1 always indexes matrix rows.
    """

    I = "I"  # both scalarized, player 1 attacks
    II = "II"  # player 1 vector-cost attacker
    III = "III"  # player 1 vector-cost defender


class Role(Enum):
    ATTACKER = "attacker"
    DEFENDER = "defender"


class Method(Enum):
    SCALARIZED = "scalarized"
    VECTOR_COST = "vector-cost"


class VehicleParams(Model):
    """
    Kinematic bicycle constants and the discrete action set.
    """

    l_r = FloatField(1.0, min_value=0, strict_min=True, doc="rear axle distance (m)")
    l_f = FloatField(1.0, min_value=0, strict_min=True, doc="front axle distance (m)")
    dt = FloatField(0.1, min_value=0, strict_min=True, doc="time step (s)")
    v_min = FloatField(0.0, doc="speed floor (m/s)")
    v_max = FloatField(15.0, doc="speed cap (m/s)")
    accel_mag = FloatField(1.0, min_value=0, doc="primitive acceleration magnitude (m/s^2)")
    steer_mag = FloatField(
        0.8, min_value=0, max_value=math.pi / 2, doc="primitive steering magnitude (rad)"
    )
    horizon = IntField(10, min_value=0, doc="steps per decision epoch")

    def clean(self):
        if self.v_min > self.v_max:
            raise ValueError("v_min (%s) exceeds v_max (%s)" % (self.v_min, self.v_max))
        if self.steer_mag >= math.pi / 2:
            raise ValueError("steer_mag must be below pi/2, got %s" % self.steer_mag)


class TrackParams(Model):
    """
    A circular ring track, travelled counter-clockwise.
    """

    center_x = FloatField(0.0)
    center_y = FloatField(0.0)
    radius = FloatField(50.0, min_value=0, strict_min=True, doc="centerline radius (m)")
    half_width = FloatField(2.0, min_value=0, strict_min=True, doc="half track width (m)")

    def clean(self):
        if not self.radius > self.half_width:
            raise ValueError(
                "radius (%s) must exceed half_width (%s)" % (self.radius, self.half_width)
            )


class PlayerConfig(Model):
    """
    The resolved set-up of one player in a race, see `RaceConfig.players`.
    """

    role = EnumField(Role)
    method = EnumField(Method)
    theta = ArrayField(FloatField(), length=2, default=[2.0, 1.0])
    v_max = FloatField(15.0, min_value=0, strict_min=True)


class RaceConfig(Model):
    """
    Everything needed to reproduce a race. Every field has a default, so `{}` is a
    complete configuration document.
    """

    scenario = EnumField(Scenario)
    attacker_theta = ArrayField(FloatField(), length=2, default=[2.0, 1.0])
    defender_theta = ArrayField(FloatField(), length=2, default=[2.0, 1.0])
    defender_v_max = FloatField(15.0, min_value=0, strict_min=True)
    attacker_v_max = NullableField(
        FloatField(min_value=0, strict_min=True), doc="defaults to 1.5 x defender_v_max"
    )
    off_track_per_point = FloatField(1.0, min_value=0)
    collision_one_time = FloatField(50.0, min_value=0)
    collision_radius = FloatField(2.0, min_value=0, strict_min=True)
    epochs = IntField(30, min_value=0)
    seed = IntField(0, min_value=0)
    epsilon = FloatField(1e-6, min_value=0, strict_min=True)
    spawn_gap_min = FloatField(2.0, min_value=0)
    spawn_gap_max = FloatField(10.0, min_value=0)
    initial_speed = FloatField(1.0, min_value=0)
    vehicle = ModelField(VehicleParams)
    track = ModelField(TrackParams)

    ATTACKER_SPEED_RATIO = 1.5

    def clean(self):
        if self.spawn_gap_min > self.spawn_gap_max:
            raise ValueError(
                "spawn_gap_min (%s) exceeds spawn_gap_max (%s)"
                % (self.spawn_gap_min, self.spawn_gap_max)
            )
        for v_max in (self.defender_v_max, self.resolved_attacker_v_max()):
            if v_max < self.vehicle.v_min:
                raise ValueError("v_max %s is below vehicle v_min %s" % (v_max, self.vehicle.v_min))

    def resolved_attacker_v_max(self) -> float:
        if self.attacker_v_max is None:
            return self.ATTACKER_SPEED_RATIO * self.defender_v_max
        return self.attacker_v_max

    def players(self) -> tuple[PlayerConfig, PlayerConfig]:
        """
        Returns the set-ups of player 1 (matrix rows) and player 2 (matrix columns)
        implied by the scenario.
        """
        attacker = PlayerConfig(
            role=Role.ATTACKER, theta=self.attacker_theta, v_max=self.resolved_attacker_v_max()
        )
        defender = PlayerConfig(
            role=Role.DEFENDER, theta=self.defender_theta, v_max=self.defender_v_max
        )
        if self.scenario is Scenario.I:
            return attacker, defender
        if self.scenario is Scenario.II:
            attacker.method = Method.VECTOR_COST
            return attacker, defender
        defender.method = Method.VECTOR_COST
        return defender, attacker


class TraceRecord(Model):
    """
    One player's state after one simulation step.
    """

    epoch = IntField(min_value=0)
    step = IntField(min_value=0)
    player = IntField(1, min_value=1, max_value=2)
    x = FloatField()
    y = FloatField()
    v = FloatField()
    psi = FloatField()
    beta = FloatField()
    chosen_gamma = IntField(1, min_value=1)
    chosen_sigma = IntField(1, min_value=1)
    method = StringField()
    off_track = BoolField()
    collided = BoolField()


class RaceStats(Model):
    """
    Event counts and progress figures of one race, or of a batch when `races` > 1.
    """

    scenario = EnumField(Scenario)
    seed = NullableField(IntField(min_value=0), doc="None for batch aggregates")
    races = IntField(1, min_value=0)
    epochs = IntField(0, min_value=0)
    passes = IntField(0, min_value=0)
    collisions = IntField(0, min_value=0)
    attacker_off_track = IntField(0, min_value=0)
    defender_off_track = IntField(0, min_value=0)
    attacker_lead_time_fraction = FloatField(0.0, min_value=0, max_value=1)
    defender_lead_time_fraction = FloatField(0.0, min_value=0, max_value=1)
    attacker_laps = FloatField(0.0)
    defender_laps = FloatField(0.0)
    vector_epochs = IntField(0, min_value=0)
    adjusted_epochs = IntField(0, min_value=0)
    feasibility_rate = FloatField(0.0, min_value=0, max_value=1)


# Expose only relevant classes in import *
__all__ = get_subclass_names(locals(), Model) + [
    "ModelBase",
    "ConfigError",
    "Scenario",
    "Role",
    "Method",
]
