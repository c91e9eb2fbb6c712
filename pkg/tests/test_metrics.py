import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from finsler_nullity import metrics as M
from finsler_nullity.errors import DomainError, MetricSpecError
from finsler_nullity.jets import SupportElement
from finsler_nullity.sampling import sample_support_elements

from conftest import battery_metrics, randers2_flat


def test_closed_form_values():
    assert M.euclidean(2)(SupportElement.of([0, 0], [3, 4])) == pytest.approx(5.0)
    assert M.sphere(2, 1.0)(SupportElement.of([0, 0], [1, 0])) == pytest.approx(2.0)
    assert M.funk_disk(2)(SupportElement.of([0, 0], [1, 0])) == pytest.approx(1.0)
    assert np.allclose(M.sphere(2, 1.0).riemannian_matrix([0, 0]), 4 * np.eye(2))


def test_parse_examples():
    s = M.parse_metric_spec('{"family":"euclidean","dimension":3}')
    assert s.family == "euclidean" and s.dimension == 3
    r = M.parse_metric_spec('{"family":"randers","dimension":2,"b":[0.1,0.0]}')
    assert np.linalg.norm(r.b) == pytest.approx(0.1)
    with pytest.raises(MetricSpecError, match="b norm must be < 1") as e:
        M.parse_metric_spec('{"family":"randers","dimension":2,"b":[1.0,0.5]}')
    assert e.value.field == "b"


def test_spec_round_trip():
    for m in battery_metrics().values():
        again = M.parse_metric_spec(json.dumps(m.spec.to_dict()))
        assert again == m.spec


@pytest.mark.parametrize(
    "text, field",
    [
        ('{"family":"euclidean","dimension":2,"radius":1}', "radius"),
        ('{"family":"torus","dimension":2}', "family"),
        ('{"family":"euclidean","dimension":9}', "dimension"),
        ('{"family":"riemannian_closed_form","dimension":2,"kind":"sphere","radius":-1}', "radius"),
        ('{"family":"product","dimension":3,"factors":[{"family":"euclidean","dimension":1},{"family":"euclidean","dimension":1}]}', "factors"),
        ('{"family":"product","dimension":3,"factors":[{"family":"funk_disk","dimension":2},{"family":"euclidean","dimension":1}]}', "factors"),
        ('{"family":"minkowski_quartic","dimension":2,"epsilon":-1}', "epsilon"),
    ],
)
def test_invalid_specs_name_the_field(text, field):
    with pytest.raises(MetricSpecError) as e:
        M.make_metric(M.parse_metric_spec(text))
    assert e.value.field == field


def test_parse_error_reports_line():
    with pytest.raises(MetricSpecError) as e:
        M.parse_metric_spec('{"family": "euclidean",\n "dimension": 2,\n}')
    assert e.value.line == 3
    with pytest.raises(MetricSpecError) as e:
        M.parse_metric_spec('{\n"family":"riemannian_closed_form",\n"dimension":2,\n"kind":"torus","radius":1}')
    assert e.value.as_dict()["line"] == 4


def test_domains():
    f = M.funk_disk(2)
    assert f.in_domain([0.5, 0.5]) and not f.in_domain([0.8, 0.8])
    with pytest.raises(DomainError):
        f.check(SupportElement.of([1.0, 0.0], [1.0, 0.0]))
    h = M.make_metric(M.MetricSpec("riemannian_closed_form", 2, kind="hyperbolic", radius=2.0))
    assert h.in_domain([1.9, 0.0]) and not h.in_domain([2.0, 0.1])


def test_validate_metric_randers_samples(rng):
    m = M.randers([0.1, 0.0])
    rep = M.validate_metric(m, sample_support_elements(m, 100, rng))
    assert rep.passed and rep.min_eig_g > 0
    e = M.validate_metric(M.euclidean(2), sample_support_elements(M.euclidean(2), 10, rng))
    assert e.passed and e.max_homogeneity_residual == 0.0
    with pytest.raises(ValueError):
        M.validate_metric(m, [])


def test_completeness_declarations():
    assert M.euclidean(2).complete and M.sphere_times_flat(1).complete
    assert not M.funk_disk(2).complete
    assert not randers2_flat().complete
    assert M.randers([0.1, 0.0]).complete


@settings(max_examples=40, deadline=None)
@given(
    name=st.sampled_from(sorted(battery_metrics()) + ["funk", "randers_flat"]),
    seed=st.integers(0, 2**32 - 1),
    lam=st.floats(0.1, 10.0),
)
def test_homogeneity_and_positivity(name, seed, lam):
    ms = dict(battery_metrics(), funk=M.funk_disk(3), randers_flat=randers2_flat())
    m = ms[name]
    (z,) = sample_support_elements(m, 1, np.random.default_rng(seed))
    F = m(z)
    assert F > 0
    assert float(m.F(z.xa, lam * z.va)) == pytest.approx(lam * F, rel=1e-12)
    assert np.linalg.eigvalsh(M.fundamental_tensor_value(m, z))[0] > 0
