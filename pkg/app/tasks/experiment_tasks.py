"""Tasks and helper methods that run one experiment from validated parameters."""

# License: MIT

import logging
from dataclasses import dataclass, field

import numpy as np

from app.bv.cut_families import HalfSpaceMeasure, bad_mass_decay, half_space_family, straighten
from app.bv.grid import GridGeometry, GridSet
from app.bv.halfspaces import HalfSpace, alpha, half_space_constant_reference, half_space_perimeter_constant
from app.bv.perimeter import (
    grid_function_variation,
    mollified_perimeter,
    perimeter,
    slice_grid_function,
    total_perimeter_measure,
)
from app.geometry.heisenberg import GroupElement, multiply_arrays
from app.metrics.cayley import CayleySpec, generate_ball, named_graph
from app.metrics.cuts import L1Map, coarea_check, cut_measure_from_map, cut_metric, slice_set, total_variation_identity
from app.metrics.distortion import (
    cayley_distortion_sequence,
    min_distortion_colgen,
    min_distortion_exact,
    verify_witness,
)
from app.tasks.collapse_tasks import (
    center_collapse,
    difference_quotient_profile,
    horizontal_control,
    moving_char_check,
    scale_comparison_sweep,
)
from app.utils.config import InvalidExperimentUsage, get_config
from app.utils.storage_utils import file_hash, load_cut_measure, load_grid_set, load_l1_map, load_metric_space

logger = logging.getLogger(__name__)

CHARACTERISTIC_FRACTION = 0.1


GRID_FUNCTIONS = {
    "a": lambda p: p[:, 0],
    "c": lambda p: p[:, 2],
    "a+c": lambda p: p[:, 0] + p[:, 2],
    "a+b2+c": lambda p: p[:, 0] + p[:, 1] ** 2 + p[:, 2],
    "generic": lambda p: p[:, 0] + 0.5 * p[:, 1] + 0.3 * p[:, 0] * p[:, 1] + p[:, 2] + 0.25 * np.sin(3 * p[:, 1]),
}


@dataclass
class TaskOutput:
    """Result payload, plot rows, extra artifacts by file suffix, and hashes of the files read."""

    result: dict
    rows: list = field(default_factory=list)
    artifacts: dict = field(default_factory=dict)
    inputs: dict = field(default_factory=dict)


def build_geometry(params: dict) -> GridGeometry:
    resolution = params.get("resolution") or get_config().GRID_RESOLUTION
    half_width = params.get("half_width", 1.0)
    return GridGeometry(((-half_width, half_width),) * 3, tuple(resolution))


def _point(values) -> GroupElement:
    return GroupElement.from_array(values)


def build_set(params: dict, geometry: GridGeometry, inputs: dict) -> GridSet:
    """The voxel set named by set_file, half_space_angle or function with level."""
    if params.get("set_file"):
        inputs["set_file"] = file_hash(params["set_file"])
        return load_grid_set(params["set_file"])
    if params.get("half_space_angle") is not None:
        return HalfSpace(_point(params.get("basepoint", (0, 0, 0))), params["half_space_angle"]).to_grid_set(geometry)
    values = GRID_FUNCTIONS[params["function"]](geometry.centers)
    return GridSet(geometry, slice_set(values, params.get("level", 0.0)).membership)


def build_sigma(params: dict, geometry: GridGeometry, inputs: dict, allow_half_spaces: bool = False):
    """
    The cut measure named by cut_measure_file, half_space_family or function.

    Functions are sliced every step (default one c-cell) at phase 1/4, off the voxel-centre lattice.
    """
    if params.get("cut_measure_file"):
        inputs["cut_measure_file"] = file_hash(params["cut_measure_file"])
        sigma = load_cut_measure(params["cut_measure_file"])
        if sigma.n != geometry.size:
            raise InvalidExperimentUsage(
                f"Cut measure over {sigma.n} points does not match a grid of {geometry.size} voxels",
                payload={"cut_points": sigma.n, "voxels": geometry.size},
            )
        return sigma
    if params.get("half_space_family"):
        family = half_space_family(params["half_space_family"], seed=params.get("seed", 0))
        return family if allow_half_spaces else family.to_cut_measure(geometry)
    step = params.get("step") or float(geometry.spacing[2])
    values = GRID_FUNCTIONS[params["function"]](geometry.centers)
    return slice_grid_function(values, step=step, phase=params.get("phase", 0.25))


def perform_cayley_ball(params: dict) -> TaskOutput:
    kwargs = {"generators": tuple(map(tuple, params["generators"]))} if params.get("generators") else {}
    space = generate_ball(CayleySpec(params["k"], **kwargs))
    from_identity = space.dist[0]
    sizes = [int((from_identity <= j).sum()) for j in range(1, params["k"] + 1)]
    slope = None
    if len(sizes) >= 2:
        slope = float(np.polyfit(np.log(np.arange(1, len(sizes) + 1)), np.log(sizes), 1)[0])
    return TaskOutput(
        result={"name": space.name, "n": space.n, "diameter": float(space.dist.max()), "sizes": sizes,
                "growth_slope": slope},
        rows=[{"k": j, "size": size} for j, size in enumerate(sizes, start=1)],
        artifacts={"space.json": space.to_dict(), "edges.txt": space.to_edge_list()},
    )


def _distortion_space(params: dict, inputs: dict):
    if params.get("space_file"):
        inputs["space_file"] = file_hash(params["space_file"])
        return load_metric_space(params["space_file"])
    if params.get("cayley"):
        return generate_ball(CayleySpec(params["cayley"]))
    return named_graph(params["graph"], params.get("seed", 0))


def perform_distortion(params: dict) -> TaskOutput:
    if params.get("cayley_sequence"):
        sequence = cayley_distortion_sequence(params["cayley_sequence"], params["budget"], params["seed"])
        rows = [{"k": k, "n": space.n, "distortion": result.distortion, "status": result.status.value}
                for k, (space, result) in enumerate(sequence, start=1)]
        values = [row["distortion"] for row in rows]
        return TaskOutput(
            result={"sequence": rows,
                    "nondecreasing": all(b >= a - 1e-9 for a, b in zip(values, values[1:]))},
            rows=rows,
        )

    inputs = {}
    space = _distortion_space(params, inputs)
    if params["method"] == "exact":
        result = min_distortion_exact(space)
    else:
        result = min_distortion_colgen(space, budget=params["budget"], seed=params["seed"])
    rows = [{"cut": index, "weight": w, "size": len(cut)} for index, (cut, w) in enumerate(result.witness)]
    return TaskOutput(
        result={"space": space.name, "n": space.n, **result.to_dict(), "verification": verify_witness(space, result)},
        rows=rows,
        artifacts={"witness.json": result.witness.to_dict()},
        inputs=inputs,
    )


def _random_map(rng: np.random.Generator, n: int, m: int) -> L1Map:
    return L1Map(rng.normal(size=(n, m)), rng.uniform(0.5, 2.0, m), rng.uniform(0.5, 2.0, n))


def perform_slice(params: dict) -> TaskOutput:
    inputs = {}
    if params.get("map_file"):
        inputs["map_file"] = file_hash(params["map_file"])
        f = load_l1_map(params["map_file"])
    else:
        f = _random_map(np.random.default_rng(params["seed"]), params["points"], params["coords"])
    sigma = cut_measure_from_map(f)
    metric_error = float(np.abs(cut_metric(sigma) - f.distance_matrix()).max())
    mass_error = abs(sigma.mass(f.source_weights) - f.norm())
    return TaskOutput(
        result={"atoms": len(sigma), "metric_error": metric_error, "mass_error": mass_error, "norm": f.norm()},
        rows=[{"atom": index, "weight": w, "size": len(cut)} for index, (cut, w) in enumerate(sigma)],
        artifacts={"cut_measure.json": sigma.to_dict()},
        inputs=inputs,
    )


def perform_coarea(params: dict) -> TaskOutput:
    geometry = build_geometry(params)
    rng = np.random.default_rng(params["seed"])
    rows = []
    for trial in range(params["trials"]):
        h = rng.integers(0, params["levels"], size=geometry.size).astype(float)
        variation, coarea = coarea_check(h, geometry.lines)
        total = total_perimeter_measure(slice_grid_function(h, step=1.0), geometry).total()
        rows.append({"trial": trial, "variation": variation, "coarea": coarea, "total_perimeter": total,
                     "total_variation": grid_function_variation(h, geometry)})
    return TaskOutput(
        result={
            "trials": len(rows),
            "max_coarea_error": max(abs(r["variation"] - r["coarea"]) for r in rows),
            "max_perimeter_error": max(abs(r["total_perimeter"] - r["total_variation"]) for r in rows),
            "grid": geometry.to_dict(),
        },
        rows=rows,
    )


def perform_tv_identity(params: dict) -> TaskOutput:
    geometry = build_geometry(params)
    rng = np.random.default_rng(params["seed"])
    rows = []
    for trial in range(params["trials"]):
        values = rng.integers(-params["levels"], params["levels"] + 1, size=(geometry.size, params["coords"]))
        f = L1Map(values.astype(float), rng.uniform(0.5, 2.0, params["coords"]))
        total_perimeter, total_variation = total_variation_identity(f, geometry.lines)
        rows.append({"trial": trial, "total_perimeter": total_perimeter, "total_variation": total_variation})
    return TaskOutput(
        result={"trials": len(rows),
                "max_error": max(abs(r["total_perimeter"] - r["total_variation"]) for r in rows),
                "grid": geometry.to_dict()},
        rows=rows,
    )


def perform_perimeter(params: dict) -> TaskOutput:
    inputs = {}
    E = build_set(params, build_geometry(params), inputs)
    geometry = E.geometry
    field = perimeter(E)
    by_family = {"P": perimeter(E, lines=geometry.p_lines).total(), "Q": perimeter(E, lines=geometry.q_lines).total()}
    mollified = mollified_perimeter(E, params["mollifier"])
    return TaskOutput(
        result={"total": field.total(), "by_family": by_family, "mollified": mollified, "volume": E.volume,
                "q_snap_error": geometry.q_snap_error, "grid": geometry.to_dict()},
        rows=[{"estimate": "P-lines", "perimeter": by_family["P"]},
              {"estimate": "Q-lines", "perimeter": by_family["Q"]},
              {"estimate": "crossing", "perimeter": field.total()},
              {"estimate": "mollified-l1", "perimeter": mollified["l1"]},
              {"estimate": "mollified-l2", "perimeter": mollified["l2"]}],
        artifacts={"set.hcgs": E.to_bytes(), "perimeter.csv": field.to_csv()},
        inputs=inputs,
    )


def perform_alpha(params: dict) -> TaskOutput:
    inputs = {}
    E = build_set(params, build_geometry(params), inputs)
    x = _point(params["basepoint"])
    rows = []
    for r in params["radii"]:
        value, H = alpha(E, x, r, refine=params["refine"])
        rows.append({"r": r, "alpha": value, "normal_angle": H.normal_angle})
    return TaskOutput(result={"basepoint": list(x.as_tuple()), "alpha": rows}, rows=rows, inputs=inputs)


def perform_bad_mass(params: dict) -> TaskOutput:
    inputs = {}
    geometry = build_geometry(params)
    sigma = build_sigma(params, geometry, inputs)
    report = bad_mass_decay(sigma, geometry, params["eps"], params["R"], params["site_budget"], params["seed"])
    masses = report.masses
    return TaskOutput(
        result={**report.to_dict(), "nonincreasing": all(b <= a + 1e-12 for a, b in zip(masses, masses[1:])),
                "final_over_initial": masses[-1] / masses[0] if masses[0] > 0 else None},
        rows=[{"R": R, "bad_mass": mass} for R, mass in zip(report.R_list, masses)],
        inputs=inputs,
    )


def perform_straighten(params: dict) -> TaskOutput:
    inputs = {}
    geometry = build_geometry(params)
    sigma = build_sigma(params, geometry, inputs)
    result = straighten(sigma, geometry, _point(params["basepoint"]), params["delta"], params["eps"], params["r"],
                        params["R0"], params["max_candidates"])
    rows = [{"half_space": index, "weight": w, "normal_angle": H.normal_angle, "basepoint": list(H.basepoint.as_tuple())}
            for index, (H, w) in enumerate(result.measure.atoms)]
    return TaskOutput(result=result.to_dict(), rows=rows, inputs=inputs)


def perform_half_space_constant(params: dict) -> TaskOutput:
    geometry = build_geometry(params)
    basepoints = [_point(p) for p in params["basepoints"]] if params.get("basepoints") else None
    sweep = half_space_perimeter_constant(geometry, params["radii"], params["angles"], basepoints)
    return TaskOutput(
        result={"min": sweep["min"], "max": sweep["max"], "reference_at_zero": half_space_constant_reference(0.0),
                "cells": len(sweep["rows"])},
        rows=sweep["rows"],
    )


def perform_collapse(params: dict) -> TaskOutput:
    inputs = {}
    geometry = build_geometry(params)
    sigma = build_sigma(params, geometry, inputs, allow_half_spaces=True)
    x = _point(params["basepoint"])
    reports = []
    if params["direction"] in ("center", "both"):
        reports.append(center_collapse(sigma, geometry, x, params["t"]))
    if params["direction"] in ("horizontal", "both"):
        reports.append(horizontal_control(sigma, geometry, x, params["t"]))
    result = {report.direction: report.to_dict() for report in reports}
    if len(reports) == 2:
        result["center_over_horizontal"] = [
            c / h if h > 0 else None for c, h in zip(reports[0].ratios, reports[1].ratios)
        ]
    result["atoms"] = len(sigma)
    result["half_space_atoms"] = isinstance(sigma, HalfSpaceMeasure)
    return TaskOutput(result=result, rows=[row for report in reports for row in report.rows()], inputs=inputs)


def horizontal_gradient(function: str, points, h: float = 1e-4) -> np.ndarray:
    """|(Xf, Yf)| of a built-in grid function by central differences along right translations."""
    f = GRID_FUNCTIONS[function]
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    components = []
    for step in (np.array([h, 0.0, 0.0]), np.array([0.0, h, 0.0])):
        forward = f(multiply_arrays(points, step))
        backward = f(multiply_arrays(points, -step))
        components.append((forward - backward) / (2 * h))
    return np.hypot(*components)


def _basepoints(params: dict) -> list[GroupElement]:
    """
    Explicit basepoints, or random interior ones. Random basepoints of a sliced function avoid
    characteristic points, where the horizontal gradient is below CHARACTERISTIC_FRACTION of its maximum.
    """
    if params.get("basepoints"):
        return [_point(p) for p in params["basepoints"]]
    rng = np.random.default_rng(params["seed"])
    count = params["basepoint_count"]
    if not params.get("function"):
        return [_point(p) for p in rng.uniform(-0.1, 0.1, size=(count, 3))]
    candidates = rng.uniform(-0.1, 0.1, size=(4 * count, 3))
    gradient = horizontal_gradient(params["function"], candidates)
    keep = gradient >= CHARACTERISTIC_FRACTION * gradient.max()
    filtered = int((~keep).sum())
    if filtered:
        logger.warning(f"Filtered {filtered} basepoints near characteristic points of {params['function']}")
    return [_point(p) for p in candidates[keep][:count]]


def perform_scale_compare(params: dict) -> TaskOutput:
    inputs = {}
    geometry = build_geometry(params)
    sigma = build_sigma(params, geometry, inputs)
    reports, rows = [], []
    for x in _basepoints(params):
        for report in scale_comparison_sweep(sigma, geometry, x, params["r"], params["deltas"], params["epss"],
                                             R0_factor=params["R0_factor"], pairs_log2=params["pairs_log2"],
                                             seed=params["seed"]):
            entry = report.to_dict()
            valid = [d for d in report.discrepancies if d is not None]
            entry["decrease_factor"] = valid[0] / valid[-1] if len(valid) >= 2 and valid[-1] > 0 else None
            reports.append(entry)
            rows.extend({"basepoint": report.basepoint, **row} for row in report.rows())
    return TaskOutput(result={"reports": reports}, rows=rows, inputs=inputs)


def perform_moving_char(params: dict) -> TaskOutput:
    error = moving_char_check(params["n"])
    profile = difference_quotient_profile(params["n"], params["t"], params["h"])
    logger.info(f"Moving characteristic function, n = {params['n']}: max error {error:.3g}")
    return TaskOutput(result={"n": params["n"], "max_error": error, "isometric": error < 1e-12,
                              "profile": profile},
                      rows=profile)


TASKS = {
    "cayley-ball": perform_cayley_ball,
    "distortion": perform_distortion,
    "slice": perform_slice,
    "coarea": perform_coarea,
    "tv-identity": perform_tv_identity,
    "perimeter": perform_perimeter,
    "alpha": perform_alpha,
    "bad-mass": perform_bad_mass,
    "straighten": perform_straighten,
    "half-space-constant": perform_half_space_constant,
    "collapse": perform_collapse,
    "scale-compare": perform_scale_compare,
    "moving-char": perform_moving_char,
}
