import json

import pytest

from elimpose.elimderive import get_problem
from elimpose.templates import (
    TEMPLATE_VERSION,
    SolverTemplate,
    TemplateFormatError,
    TemplateVersionError,
    build_template,
    check_closure_exact,
    exact_action_matrix,
    exact_nullspace,
    groebner_action_matrix,
    load_template,
    quotient_basis,
    random_exact_instance,
    save_template,
    template_from_json,
    template_to_json,
)

PIDS = ["FEF", "EF", "EFK", "HF"]


@pytest.fixture(scope="module")
def bundled():
    return {p: load_template(p) for p in PIDS}


@pytest.mark.parametrize("pid,count", [("FEF", 15), ("EF", 9), ("EFK", 19), ("HF", 4)])
def test_quotient_basis_size(pid, count):
    basis = quotient_basis(pid, seed=0)
    assert len(basis) == count
    assert (0,) * len(get_problem(pid).unknowns) in basis


def test_exact_nullspace():
    from fractions import Fraction

    rows = [[Fraction(1), Fraction(2), Fraction(3)], [Fraction(2), Fraction(4), Fraction(7)]]
    ns = exact_nullspace(rows)
    assert len(ns) == 1
    assert all(sum(a * b for a, b in zip(r, ns[0])) == 0 for r in rows)


@pytest.mark.parametrize("pid", PIDS)
def test_bundled_template_shape_and_invariants(pid, bundled):
    tpl = bundled[pid]
    assert tpl.problem == pid
    assert tpl.rows == len(tpl.multipliers)
    assert tpl.cols == len(set(tpl.monomials)) == len(tpl.monomials)
    assert len(tpl.basis) == get_problem(pid).solution_count
    assert tpl.monomials[-len(tpl.basis) :] == tpl.basis
    assert tpl.action == get_problem(pid).action


def test_bundled_sizes(bundled):
    shapes = {p: bundled[p].shape for p in PIDS}
    assert shapes == {"FEF": (21, 36), "EF": (6, 15), "EFK": (51, 70), "HF": (1, 5)}


@pytest.mark.parametrize("pid", ["FEF", "EF", "EFK"])
def test_template_genericity(pid, bundled):
    """Built from one seed, the template closes on instances from other seeds."""
    tpl = bundled[pid]
    for seed in (tpl.seed + 501, tpl.seed + 733):
        inst = random_exact_instance(pid, seed)
        assert check_closure_exact(tpl, inst)


@pytest.mark.parametrize("pid", ["FEF", "EF", "EFK"])
def test_exact_action_matrix_matches_normal_forms(pid, bundled):
    tpl = bundled[pid]
    inst = random_exact_instance(pid, 42)
    assert exact_action_matrix(tpl, inst) == groebner_action_matrix(tpl, inst)


@pytest.mark.parametrize("pid", ["EF", "FEF", "HF"])
def test_build_is_deterministic_and_matches_bundle(pid, bundled):
    a = build_template(pid)
    b = build_template(pid)
    assert template_to_json(a) == template_to_json(b)
    assert template_to_json(a) == template_to_json(bundled[pid])


def test_hf_template_is_the_univariate_quartic(bundled):
    tpl = bundled["HF"]
    assert tpl.rows == 1 and tpl.basis == [(3,), (2,), (1,), (0,)]


def test_round_trip(tmp_path, bundled):
    for pid in PIDS:
        path = tmp_path / f"{pid}.json"
        save_template(bundled[pid], path)
        back = load_template(str(path))
        assert back == bundled[pid]
        assert template_to_json(back) == template_to_json(bundled[pid])
        assert load_template(pid, str(path)) == bundled[pid]


def test_version_error(bundled):
    doc = json.loads(template_to_json(bundled["EF"]))
    doc["version"] = TEMPLATE_VERSION + 1
    with pytest.raises(TemplateVersionError):
        template_from_json(json.dumps(doc))


def test_truncated_file(bundled):
    text = template_to_json(bundled["FEF"])
    with pytest.raises(TemplateFormatError):
        template_from_json(text[: len(text) // 2])


@pytest.mark.parametrize(
    "mutate",
    [
        lambda d: d.update(rows=d["rows"] + 1),
        lambda d: d.pop("multipliers"),
        lambda d: d["partition"].update(excessive=0),
        lambda d: d.update(basis=d["basis"][::-1]),
    ],
)
def test_inconsistent_file_rejected(mutate, bundled):
    doc = json.loads(template_to_json(bundled["EF"]))
    mutate(doc)
    with pytest.raises(TemplateFormatError):
        template_from_json(json.dumps(doc))


def test_action_rows_cover_basis(bundled):
    tpl = bundled["FEF"]
    rows = tpl.action_rows()
    assert len(rows) == 15
    assert sum(kind == "reducible" for kind, _ in rows) == tpl.n_reducible


def test_template_dataclass_properties():
    tpl = SolverTemplate("EF", ("x", "y"), "x", [], [(1, 0), (0, 1), (0, 0)], [(0, 1), (0, 0)], 0, 1)
    assert tpl.action_index == 0
    assert tpl.reducible == [(1, 0)]
    assert tpl.column_index[(0, 0)] == 2
