"""Parameter schemas of every experiment command and of the experiment config file."""

# License: MIT

from marshmallow import Schema, ValidationError, fields, validate, validates_schema

FORMAT_VERSION = 1

GRID_FUNCTION_NAMES = ["a", "c", "a+c", "a+b2+c", "generic"]
GENERIC_BASEPOINT = [0.031, -0.017, 0.013]


def _point(**kwargs):
    return fields.List(fields.Float(), validate=validate.Length(equal=3), **kwargs)


def _positive_floats(default):
    return fields.List(fields.Float(validate=validate.Range(min=0, min_inclusive=False)),
                       validate=validate.Length(min=1), load_default=lambda: list(default))


def _exactly_one(data: dict, names: list[str]) -> None:
    given = [name for name in names if data.get(name) not in (None, "", 0)]
    if len(given) != 1:
        raise ValidationError(f"Give exactly one of {', '.join(names)}; got {given or 'none'}")


class GridSchema(Schema):
    resolution = fields.List(fields.Integer(validate=validate.Range(min=2)), validate=validate.Length(equal=3),
                             load_default=None)
    half_width = fields.Float(validate=validate.Range(min=0, min_inclusive=False), load_default=1.0)


class SetSchema(GridSchema):
    set_file = fields.String(load_default=None)
    function = fields.String(validate=validate.OneOf(GRID_FUNCTION_NAMES), load_default=None)
    level = fields.Float(load_default=0.05)
    half_space_angle = fields.Float(load_default=None)

    @validates_schema
    def check_source(self, data, **kwargs):
        given = [name for name in ("set_file", "function") if data.get(name)]
        given += ["half_space_angle"] if data.get("half_space_angle") is not None else []
        if len(given) != 1:
            raise ValidationError(f"Give exactly one of set_file, function, half_space_angle; got {given or 'none'}")


class SigmaSchema(GridSchema):
    cut_measure_file = fields.String(load_default=None)
    function = fields.String(validate=validate.OneOf(GRID_FUNCTION_NAMES), load_default=None)
    half_space_family = fields.Integer(validate=validate.Range(min=1), load_default=None)
    step = fields.Float(validate=validate.Range(min=0, min_inclusive=False), load_default=None)
    phase = fields.Float(validate=validate.Range(min=0, max=1, min_inclusive=False, max_inclusive=False),
                         load_default=0.25)
    seed = fields.Integer(load_default=0)

    @validates_schema
    def check_source(self, data, **kwargs):
        _exactly_one(data, ["cut_measure_file", "function", "half_space_family"])


class CayleyBallSchema(Schema):
    k = fields.Integer(required=True, validate=validate.Range(min=0))
    generators = fields.List(fields.List(fields.Integer(), validate=validate.Length(equal=3)), load_default=None)


class DistortionSchema(Schema):
    graph = fields.String(load_default=None)
    space_file = fields.String(load_default=None)
    cayley = fields.Integer(validate=validate.Range(min=1), load_default=None)
    cayley_sequence = fields.Integer(validate=validate.Range(min=1), load_default=None)
    method = fields.String(validate=validate.OneOf(["exact", "colgen"]), load_default="colgen")
    budget = fields.Integer(validate=validate.Range(min=1), load_default=100)
    seed = fields.Integer(load_default=0)

    @validates_schema
    def check_source(self, data, **kwargs):
        _exactly_one(data, ["graph", "space_file", "cayley", "cayley_sequence"])


class SliceSchema(Schema):
    map_file = fields.String(load_default=None)
    points = fields.Integer(validate=validate.Range(min=1), load_default=12)
    coords = fields.Integer(validate=validate.Range(min=1), load_default=4)
    seed = fields.Integer(load_default=0)


class CoareaSchema(GridSchema):
    resolution = fields.List(fields.Integer(validate=validate.Range(min=2)), validate=validate.Length(equal=3),
                             load_default=lambda: [6, 6, 12])
    trials = fields.Integer(validate=validate.Range(min=1), load_default=100)
    levels = fields.Integer(validate=validate.Range(min=2), load_default=5)
    seed = fields.Integer(load_default=0)


class TvIdentitySchema(CoareaSchema):
    trials = fields.Integer(validate=validate.Range(min=1), load_default=10)
    levels = fields.Integer(validate=validate.Range(min=1), load_default=3)
    coords = fields.Integer(validate=validate.Range(min=1), load_default=3)


class PerimeterSchema(SetSchema):
    basepoint = _point(load_default=lambda: [0.0, 0.0, 0.0])
    mollifier = fields.Integer(validate=validate.Range(min=1), load_default=3)


class AlphaSchema(SetSchema):
    basepoint = _point(load_default=lambda: list(GENERIC_BASEPOINT))
    radii = _positive_floats([0.4, 0.2])
    refine = fields.Boolean(load_default=True)


class BadMassSchema(SigmaSchema):
    eps = fields.Float(validate=validate.Range(min=0, min_inclusive=False), load_default=0.15)
    R = _positive_floats([0.4, 0.2, 0.1, 0.05])
    site_budget = fields.Integer(validate=validate.Range(min=1), load_default=64)


class StraightenSchema(SigmaSchema):
    basepoint = _point(load_default=lambda: list(GENERIC_BASEPOINT))
    delta = fields.Float(validate=validate.Range(min=0, min_inclusive=False), load_default=0.1)
    eps = fields.Float(validate=validate.Range(min=0, min_inclusive=False), load_default=0.1)
    r = fields.Float(validate=validate.Range(min=0, min_inclusive=False), load_default=0.1)
    R0 = fields.Float(validate=validate.Range(min=0, min_inclusive=False), load_default=0.25)
    max_candidates = fields.Integer(validate=validate.Range(min=1), load_default=16)


class HalfSpaceConstantSchema(GridSchema):
    radii = _positive_floats([0.05, 0.1, 0.2, 0.4])
    angles = fields.Integer(validate=validate.Range(min=1), load_default=16)
    basepoints = fields.List(_point(), load_default=None)


class CollapseSchema(SigmaSchema):
    basepoint = _point(load_default=lambda: list(GENERIC_BASEPOINT))
    t = _positive_floats([0.2, 0.1, 0.05, 0.025])
    direction = fields.String(validate=validate.OneOf(["center", "horizontal", "both"]), load_default="both")


class ScaleCompareSchema(SigmaSchema):
    basepoints = fields.List(_point(), load_default=None)
    basepoint_count = fields.Integer(validate=validate.Range(min=1), load_default=4)
    r = _positive_floats([0.4, 0.2, 0.1, 0.05])
    deltas = _positive_floats([0.1])
    epss = _positive_floats([0.1])
    R0_factor = fields.Float(validate=validate.Range(min=2, min_inclusive=False), load_default=2.5)
    pairs_log2 = fields.Integer(validate=validate.Range(min=4, max=20), load_default=15)


class MovingCharSchema(Schema):
    n = fields.Integer(validate=validate.Range(min=2), load_default=100)
    t = fields.Float(validate=validate.Range(min=0, max=1), load_default=0.5)
    h = fields.List(fields.Float(validate=validate.Range(min=0, min_inclusive=False)),
                    load_default=lambda: [0.1, 0.05, 0.02])


COMMAND_SCHEMAS = {
    "cayley-ball": CayleyBallSchema,
    "distortion": DistortionSchema,
    "slice": SliceSchema,
    "coarea": CoareaSchema,
    "tv-identity": TvIdentitySchema,
    "perimeter": PerimeterSchema,
    "alpha": AlphaSchema,
    "bad-mass": BadMassSchema,
    "straighten": StraightenSchema,
    "half-space-constant": HalfSpaceConstantSchema,
    "collapse": CollapseSchema,
    "scale-compare": ScaleCompareSchema,
    "moving-char": MovingCharSchema,
}


class ExperimentConfigSchema(Schema):
    command = fields.String(required=True, validate=validate.OneOf(list(COMMAND_SCHEMAS)))
    params = fields.Dict(keys=fields.String(), load_default=dict)
    seed = fields.Integer(load_default=None)
    output_dir = fields.String(load_default=None)
    format_version = fields.Integer(validate=validate.Equal(FORMAT_VERSION), load_default=FORMAT_VERSION)
