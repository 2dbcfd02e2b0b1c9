"""JSON schemas for experiment configs, one per experiment kind."""

KINDS = ("sweep-theorem1", "sweep-theorem2", "carleman-certify", "carleman-inequality",
         "compatible-pair", "rellich", "zonal")

_descriptor = {"type": "object", "required": ["kind"]}
_number_list = {"type": "array", "items": {"type": "number"}, "minItems": 1}
_positive_list = {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1}
_domain = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind", "bounds"],
    "properties": {
        "kind": {"enum": ["interval", "rectangle", "periodic-strip"]},
        "bounds": {"type": "array", "items": {"type": "array", "items": {"type": "number"},
                                              "minItems": 2, "maxItems": 2},
                   "minItems": 1, "maxItems": 2},
    },
}
_resolution = {
    "oneOf": [
        {"type": "integer", "minimum": 3},
        {"type": "array", "items": {"type": "integer", "minimum": 3}, "minItems": 1, "maxItems": 2},
        {"type": "object", "additionalProperties": False, "required": ["nodes_per_h"],
         "properties": {"nodes_per_h": {"type": "number", "exclusiveMinimum": 0}}},
    ]
}
_energy = {
    "oneOf": [
        {"type": "object", "additionalProperties": False, "required": ["mode", "E"],
         "properties": {"mode": {"const": "fixed"}, "E": {"type": "number"}}},
        {"type": "object", "additionalProperties": False, "required": ["mode"],
         "properties": {"mode": {"const": "track"}, "index": {"type": "integer", "minimum": 0}}},
    ]
}
_regions = {"type": "object", "minProperties": 1, "additionalProperties": _descriptor}
_common = {
    "kind": {"enum": list(KINDS)},
    "id": {"type": "string", "minLength": 1},
    "seed": {"type": "integer", "minimum": 0},
    "description": {"type": "string"},
}


def _obj(required, props):
    return {
        "type": "object",
        "additionalProperties": False,
        "required": ["kind", "id"] + list(required),
        "properties": {**_common, **props},
    }


_sweep_props = {
    "domain": _domain,
    "resolution": _resolution,
    "V": _descriptor,
    "G": _descriptor,
    "energy": _energy,
    "h": {**_positive_list, "minItems": 4},          # a rate fit needs four points
    "omega": _regions,
    "gamma": {"type": "array", "items": {"type": "string"}, "minItems": 1},
    "agmon_E": {"type": "number"},
    "cutoff": {"type": "object", "additionalProperties": False, "required": ["inner", "outer"],
               "properties": {"inner": _descriptor, "outer": _descriptor}},
    "elliptic": {"type": "object", "additionalProperties": False, "required": ["chi"],
                 "properties": {"chi": _descriptor}},
    "alpha_window": {"type": "number", "exclusiveMinimum": 0},
}

SCHEMAS = {
    "sweep-theorem1": _obj(["domain", "V", "h", "omega"], _sweep_props),
    "sweep-theorem2": _obj(["domain", "V", "h", "gamma"], _sweep_props),
    "carleman-certify": _obj(["domain", "resolution", "V", "psi", "E_range"], {
        "domain": _domain,
        "resolution": _resolution,
        "V": _descriptor,
        "G": _descriptor,
        "psi": _descriptor,
        "gamma": {"type": "number", "exclusiveMinimum": 0},
        "calibrate": {"type": "boolean"},
        "c_target": {"type": "number", "exclusiveMinimum": 0},
        "E_range": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
        "region": _descriptor,
        "x_samples": {"type": "integer", "minimum": 1},
        "xi_samples": {"type": "integer", "minimum": 1},
        "expect_gamma": {"type": "number"},
    }),
    "carleman-inequality": _obj(["domain", "resolution", "V", "psi", "gamma", "boundary", "E", "h"], {
        "domain": _domain,
        "resolution": _resolution,
        "V": _descriptor,
        "G": _descriptor,
        "psi": _descriptor,
        "gamma": {"type": "number", "exclusiveMinimum": 0},
        "boundary": {"type": "array", "items": {"type": "string"}, "minItems": 1},
        "E": {"type": "number"},
        "h": {**_positive_list, "minItems": 2},
        "n_samples": {"type": "integer", "minimum": 1},
        "band": {"type": "integer", "minimum": 0},
        "E_range": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
        "min_slope": {"type": "number"},
        "control": {"type": "boolean"},
        "control_factor": {"type": "number", "exclusiveMinimum": 0},
    }),
    "compatible-pair": _obj(["domain", "resolution"], {
        "domain": _domain,
        "resolution": _resolution,
        "G": _descriptor,
        "gamma_side": {"enum": ["inner", "outer"]},
        "max_trials": {"type": "integer", "minimum": 1},
        "min_critical": {"type": "integer", "minimum": 0},
    }),
    "rellich": _obj(["domain", "V", "delta"], {
        "domain": _domain,
        "V": _descriptor,
        "delta": {"type": "number", "exclusiveMinimum": 0},
        "mode": {"enum": ["closed-form", "eigen"]},
        "nodes": {"type": "array", "items": {"type": "integer", "minimum": 5}, "minItems": 1},
        "h": _positive_list,
        "resolution": _resolution,
        "energy": _energy,
        "max_gap": {"type": "number", "exclusiveMinimum": 0},
        "min_improvement": {"type": "number", "exclusiveMinimum": 0},
        "max_ratio": {"type": "number", "exclusiveMinimum": 0},
    }),
    "zonal": _obj(["n", "s0"], {
        "n": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 4},
        "s0": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "alpha_window": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
        "norm_check_max_n": {"type": "integer", "minimum": 0},
        "eigen_samples": {"type": "integer", "minimum": 1},
    }),
}

TOP = {
    "type": "object",
    "required": ["kind"],
    "properties": {"kind": {"enum": list(KINDS)}},
}
