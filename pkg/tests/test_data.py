import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from zofw.data import (
    Dataset,
    LibsvmParseError,
    dataset_stats,
    load_libsvm,
    max_abs_scale,
    parse_libsvm,
    scale_labels_pm1,
    synth_logistic,
    synth_regression,
    write_libsvm,
)


def test_parse_single_line():
    ds = parse_libsvm("+1 3:0.5 7:1.0\n")
    assert ds.n == 1 and ds.d == 7
    assert ds.labels[0] == 1.0
    row = ds.row(0)
    np.testing.assert_array_equal(row.indices, [2, 6])
    np.testing.assert_array_equal(row.values, [0.5, 1.0])


def test_parse_declared_dimension():
    ds = parse_libsvm("-1 1:2\n+1 5:1\n", declared_d=5)
    assert (ds.n, ds.d, ds.nnz) == (2, 5, 2)
    np.testing.assert_array_equal(ds.labels, [-1.0, 1.0])
    ds = parse_libsvm("-1 1:2\n", declared_d=9)
    assert ds.d == 9


def test_parse_error_names_token():
    with pytest.raises(LibsvmParseError) as err:
        parse_libsvm("-1 4:a\n")
    e = err.value
    assert (e.line, e.column, e.token) == (1, 4, "4:a")
    assert "line 1" in str(e) and "4:a" in str(e)


@pytest.mark.parametrize(
    "text, line, token",
    [
        ("+1 2:1 2:3\n", 1, "2:3"),
        ("+1 1:1\n-1 3:1 2:1\n", 2, "2:1"),
        ("+1 0:1\n", 1, "0:1"),
        ("x 1:1\n", 1, "x"),
        ("+1 1:1 17\n", 1, "17"),
        ("+1 1:nan\n", 1, "1:nan"),
    ],
)
def test_parse_errors_are_positioned(text, line, token):
    with pytest.raises(LibsvmParseError) as err:
        parse_libsvm(text)
    assert err.value.line == line
    assert err.value.token == token


def test_index_beyond_declared_dimension():
    with pytest.raises(LibsvmParseError) as err:
        parse_libsvm("+1 1:1\n-1 6:1\n", declared_d=5)
    assert err.value.line == 2 and err.value.column == 4


def test_comments_and_blank_lines():
    ds = parse_libsvm("# header\n\n+1 2:1.5  # trailing\n   \n-1 1:1\n")
    assert ds.n == 2 and ds.d == 2


def test_empty_input_is_an_error():
    with pytest.raises(LibsvmParseError):
        parse_libsvm("# nothing\n\n")


def test_label_only_row():
    ds = parse_libsvm("+1\n-1 2:1\n")
    assert ds.n == 2 and ds.row(0).nnz == 0


def test_stats_examples():
    st_ = dataset_stats(parse_libsvm("-1 1:2\n+1 5:1\n", declared_d=5))
    assert (st_.n, st_.d, st_.nnz) == (2, 5, 2)
    assert st_.label_counts == {1.0: 1, -1.0: 1}
    st_ = dataset_stats(parse_libsvm("+1 3:0.5 7:1.0\n"))
    assert st_.max_row_norm_sq == 1.25
    assert st_.logistic_L_hat == 0.3125
    assert any("L_hat" in line for line in st_.lines())


def test_scale_labels():
    ds = parse_libsvm("0 1:1\n1 1:2\n")
    out = scale_labels_pm1(ds)
    np.testing.assert_array_equal(out.labels, [-1.0, 1.0])
    assert scale_labels_pm1(out) is out
    pm = parse_libsvm("-1 1:1\n+1 1:2\n")
    np.testing.assert_array_equal(scale_labels_pm1(pm).labels, pm.labels)
    with pytest.raises(ValueError, match="2"):
        scale_labels_pm1(parse_libsvm("0 1:1\n2 1:2\n"))


def test_max_abs_scale():
    ds = parse_libsvm("+1 1:2 3:-4\n-1 1:-1\n")
    out = max_abs_scale(ds)
    np.testing.assert_allclose(out.features.toarray(), [[1.0, 0.0, -1.0], [-0.5, 0.0, 0.0]])
    np.testing.assert_array_equal(ds.features.toarray()[0], [2.0, 0.0, -4.0])


def test_dataset_is_read_only():
    ds = parse_libsvm("+1 1:1\n")
    with pytest.raises(ValueError):
        ds.labels[0] = 3.0
    with pytest.raises(ValueError):
        Dataset(ds.features, np.ones(2))


def test_load_from_file(tmp_path):
    p = tmp_path / "tiny.svm"
    p.write_text("+1 1:0.25 3:1\n-1 2:1e-3\n")
    ds = load_libsvm(p)
    assert ds.name == "tiny.svm" and ds.d == 3 and ds.nnz == 3


rows = st.lists(
    st.tuples(
        st.sampled_from([-1.0, 1.0, 0.0, 2.5]),
        st.dictionaries(st.integers(1, 30), st.floats(-1e6, 1e6, allow_nan=False).filter(lambda v: v != 0),
                        max_size=6),
    ),
    min_size=1,
    max_size=8,
)


@settings(max_examples=100, deadline=None)
@given(rows)
def test_round_trip(rs):
    lines = []
    for label, feats in rs:
        lines.append(" ".join([repr(label)] + [f"{k}:{feats[k]!r}" for k in sorted(feats)]))
    ds = parse_libsvm("\n".join(lines))
    again = parse_libsvm(write_libsvm(ds), declared_d=ds.d)
    assert (again.n, again.d, again.nnz) == (ds.n, ds.d, ds.nnz)
    np.testing.assert_array_equal(again.labels, ds.labels)
    np.testing.assert_array_equal(again.features.toarray(), ds.features.toarray())
    assert write_libsvm(again) == write_libsvm(ds)


@settings(max_examples=300, deadline=None)
@given(st.text(alphabet="0123456789+-.:e# \n\tab", max_size=60))
def test_parser_is_total(text):
    try:
        ds = parse_libsvm(text)
    except LibsvmParseError as e:
        assert e.line >= 1 and e.column >= 1
    else:
        assert ds.n >= 1
        assert ds.features.shape == (ds.n, ds.d)


def test_write_to_stream():
    ds = parse_libsvm("+1 3:0.5 7:1.0\n-1 1:2\n")
    buf = io.StringIO()
    assert write_libsvm(ds, buf) is None
    assert buf.getvalue() == "1 3:0.5 7:1\n-1 1:2\n"


def test_synthetic_generators_are_seeded():
    a, wa = synth_logistic(50, 8, sparsity=0.5, label_noise=0.1, seed=3)
    b, wb = synth_logistic(50, 8, sparsity=0.5, label_noise=0.1, seed=3)
    np.testing.assert_array_equal(wa, wb)
    np.testing.assert_array_equal(a.features.toarray(), b.features.toarray())
    np.testing.assert_array_equal(a.labels, b.labels)
    assert set(np.unique(a.labels)) <= {-1.0, 1.0}
    clean, w = synth_logistic(300, 8, seed=4)
    np.testing.assert_array_equal(clean.labels, np.where(clean.features @ w >= 0, 1.0, -1.0))
    r1, _ = synth_regression(40, 6, sparsity=0.3, seed=2)
    r2, _ = synth_regression(40, 6, sparsity=0.3, seed=2)
    np.testing.assert_array_equal(r1.labels, r2.labels)
    with pytest.raises(ValueError):
        synth_logistic(10, 3, sparsity=1.5)


def test_synth_logistic_separable_without_noise():
    ds, w = synth_logistic(100, 20, sparsity=1.0, label_noise=0.0, seed=1)
    margins = ds.labels * (ds.features @ w)
    assert np.all(margins >= 0)


def test_synth_logistic_half_noise_decorrelates():
    ds, w = synth_logistic(20_000, 5, sparsity=1.0, label_noise=0.5, seed=2)
    clean = np.where(ds.features @ w >= 0, 1.0, -1.0)
    agree = ds.labels * clean
    # under a fair coin the mean of +-1 agreements is 0 with s.d. 1/sqrt(n)
    assert abs(agree.mean()) <= 3 / np.sqrt(ds.n)
