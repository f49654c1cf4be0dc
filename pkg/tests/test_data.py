import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from ccral.data import (
    BUILTIN_SCHEMAS,
    Column,
    FeatureSchema,
    RawTable,
    SplitSpec,
    TabularEncoder,
    builtin_schema,
    fit_encoder,
    generate_synthetic,
    load_csv,
    load_schema,
    save_schema,
    split,
    split_indices,
    synthetic_schema,
    transform,
    write_csv,
)
from ccral.exceptions import (
    ConstantTreatment,
    EmptyTable,
    FileUnreadable,
    HeaderMismatch,
    InfeasibleSplit,
    LayoutMismatch,
    SchemaError,
    UnknownKind,
)

from conftest import DATA_DIR


@pytest.fixture
def small_schema():
    return FeatureSchema(
        (Column("age", "continuous"), Column("color", "categorical"),
         Column("sex", "binary"), Column("y", "binary")),
        treatment="sex", treatment_one="male", label="y", positive_label="yes",
    )


def write(tmp_path, text, name="t.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_load_csv_three_valid_rows(tmp_path, small_schema):
    p = write(tmp_path, "age,color,sex,y\n1,red,male,yes\n3,blue,female,no\n2,green,male,no\n")
    raw = load_csv(p, small_schema)
    assert raw.n_rows == 3
    assert raw.n_dropped == 0


def test_load_csv_header_lacks_treatment(tmp_path, small_schema):
    p = write(tmp_path, "age,color,y\n1,red,yes\n")
    with pytest.raises(HeaderMismatch) as info:
        load_csv(p, small_schema)
    assert info.value.missing == ["sex"]


def test_load_csv_reorders_to_schema_and_drops_bad_rows(tmp_path, small_schema):
    text = ('y,sex,"color",age,extra\n'
            "yes,male,red,1,x\n"
            "no,female,blue,abc,x\n"
            "no,female,?,4,x\n"
            "no,male,\"dark, red\",5,x\n")
    raw = load_csv(write(tmp_path, text), small_schema)
    assert raw.header == ("age", "color", "sex", "y")
    assert raw.rows == (("1", "red", "male", "yes"), ("5", "dark, red", "male", "no"))
    assert raw.n_dropped == 2


def test_load_csv_errors(tmp_path, small_schema):
    with pytest.raises(FileUnreadable):
        load_csv(tmp_path / "nope.csv", small_schema)
    with pytest.raises(EmptyTable):
        load_csv(write(tmp_path, "age,color,sex,y\n,red,male,yes\n"), small_schema)


@pytest.mark.skipif(not (DATA_DIR / "german.csv").exists(), reason="german.csv not prepared")
def test_german_has_1000_rows():
    raw = load_csv(DATA_DIR / "german.csv", builtin_schema("german"))
    assert raw.n_rows == 1000


def test_fit_encoder_two_point_statistics(small_schema):
    raw = RawTable(("age", "color", "sex", "y"),
                   [("1.0", "a", "male", "yes"), ("3.0", "b", "female", "no")])
    enc = fit_encoder(raw, small_schema)
    assert enc.stats["age"] == (2.0, 1.0)


def test_categorical_three_levels_three_coordinates(small_schema):
    raw = RawTable(("age", "color", "sex", "y"),
                   [("1", "red", "male", "yes"), ("2", "green", "female", "no"),
                    ("3", "blue", "male", "no")])
    enc = fit_encoder(raw, small_schema)
    layout = {name: (a, b) for name, a, b in enc.layout}
    assert layout["color"][1] - layout["color"][0] == 3
    starts = sorted(enc.layout, key=lambda e: e[1])
    assert starts[0][1] == 0
    assert all(prev[2] == nxt[1] for prev, nxt in zip(starts, starts[1:]))
    assert starts[-1][2] == enc.n_features == 5


def test_constant_treatment(small_schema):
    raw = RawTable(("age", "color", "sex", "y"),
                   [("1", "red", "male", "yes"), ("2", "red", "male", "no")])
    with pytest.raises(ConstantTreatment):
        fit_encoder(raw, small_schema)


def test_unknown_kind():
    with pytest.raises(UnknownKind):
        Column("a", "ordinal")


def test_transform_rules(small_schema):
    fit_raw = RawTable(("age", "color", "sex", "y"),
                       [("1", "red", "male", "yes"), ("3", "green", "female", "no"),
                        ("2", "blue", "male", "no")])
    enc = fit_encoder(fit_raw, small_schema)
    new = RawTable(("age", "color", "sex", "y"), [("2", "other", "male", "yes")])
    ds = transform(enc, new)
    layout = {name: (a, b) for name, a, b in enc.layout}
    a, b = layout["age"]
    assert ds.X[0, a] == 0.0
    c0, c1 = layout["color"]
    assert list(ds.X[0, c0:c1]) == [0.0, 0.0, 0.0]
    assert ds.n_unseen == 1
    assert ds.t[0] == 1 and ds.X[0, enc.treatment_coord] == 1.0
    assert ds.y[0] == 1


def test_transform_unknown_treatment_value(small_schema):
    fit_raw = RawTable(("age", "color", "sex", "y"),
                       [("1", "red", "male", "yes"), ("3", "red", "female", "no")])
    enc = fit_encoder(fit_raw, small_schema)
    with pytest.raises(LayoutMismatch):
        transform(enc, RawTable(("age", "color", "sex", "y"), [("1", "red", "other", "no")]))
    with pytest.raises(LayoutMismatch):
        transform(enc, RawTable(("age", "sex", "y"), [("1", "male", "no")]))


def test_encoding_is_deterministic_and_standardized():
    raw = generate_synthetic(300, 4, 1.0, 0.2, 5)
    schema = synthetic_schema(4)
    d1 = transform(fit_encoder(raw, schema), raw)
    d2 = transform(fit_encoder(raw, schema), raw)
    assert d1.X.tobytes() == d2.X.tobytes()
    cont = d1.X[:, :4]
    assert np.all(np.abs(cont.mean(axis=0)) <= 1e-6)
    assert np.all(np.abs(cont.std(axis=0) - 1.0) <= 1e-6)
    # inverse lookup of the treatment coordinate reproduces T exactly
    assert np.array_equal(d1.X[:, d1.treatment_coord], np.array(raw.column("T"), dtype=float))


def test_split_ten_rows():
    from ccral.data import Dataset

    X = np.zeros((10, 2))
    X[::2, 1] = 1
    y = np.array([0, 1] * 5)
    ds = Dataset.from_arrays(X, y, 1)
    tr, va, te = split(ds, SplitSpec(0.6, 0.2, 0.2, seed=7))
    assert (tr.n, va.n, te.n) == (6, 2, 2)
    assert (tr.y.sum(), va.y.sum(), te.y.sum()) == (3, 1, 1)


def test_split_deterministic():
    y = np.random.default_rng(0).integers(0, 2, 200)
    a = split_indices(y, SplitSpec(seed=7))
    b = split_indices(y, SplitSpec(seed=7))
    assert all(np.array_equal(u, v) for u, v in zip(a, b))
    c = split_indices(y, SplitSpec(seed=8))
    assert not np.array_equal(a[0], c[0])


def test_split_twins_size():
    y = np.random.default_rng(1).integers(0, 2, 4821)
    tr, va, te = split_indices(y, SplitSpec(0.6, 0.2, 0.2, seed=0))
    assert abs(len(tr) - 2893) <= 1 and abs(len(va) - 964) <= 1 and abs(len(te) - 964) <= 1
    assert len(tr) + len(va) + len(te) == 4821


def test_split_infeasible():
    with pytest.raises(InfeasibleSplit):
        split_indices(np.array([0, 0, 0, 1, 1, 1]), SplitSpec())
    with pytest.raises(InfeasibleSplit):
        SplitSpec(0.5, 0.5, 0.2)


@settings(max_examples=60, deadline=None)
@given(n0=st.integers(5, 80), n1=st.integers(5, 80), seed=st.integers(0, 2**63),
       stratify=st.booleans())
def test_split_partition_property(n0, n1, seed, stratify):
    y = np.array([0] * n0 + [1] * n1)
    np.random.default_rng(seed % 1000).shuffle(y)
    parts = split_indices(y, SplitSpec(seed=seed, stratify=stratify))
    joined = np.concatenate(parts)
    assert sorted(joined.tolist()) == list(range(n0 + n1))
    if stratify:
        for frac, idx in zip((0.6, 0.2, 0.2), parts):
            for label, count in ((0, n0), (1, n1)):
                assert abs(np.count_nonzero(y[idx] == label) - frac * count) <= 1 + 1e-9


def test_synthetic_effect_zero_ignores_treatment():
    table, latent = generate_synthetic(100, 3, 0.0, 0.0, 1, return_latent=True)
    y = np.array(table.column("y"), dtype=int)
    X = np.array([table.column(f"x_{j}") for j in (1, 2, 3)], dtype=float).T
    assert np.array_equal(y, (X @ latent["w"] > 0).astype(int))


def test_synthetic_treatment_flip_fraction():
    table, latent = generate_synthetic(2000, 5, 2.0, 0.1, 1, return_latent=True)
    X, T, w, eps = latent["X"], latent["T"], latent["w"], latent["eps"]
    rule = lambda t: (X @ w + 2.0 * t * np.sign(X[:, 0]) + eps > 0).astype(int)
    y = np.array(table.column("y"), dtype=int)
    assert np.array_equal(y, rule(T))
    flipped = np.mean(rule(1 - T) != y)
    assert flipped >= 0.2


def test_synthetic_byte_identical(tmp_path):
    write_csv(generate_synthetic(50, 2, 1.0, 0.5, 9), tmp_path / "a.csv")
    write_csv(generate_synthetic(50, 2, 1.0, 0.5, 9), tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    raw = load_csv(tmp_path / "a.csv", synthetic_schema(2))
    assert raw.rows == generate_synthetic(50, 2, 1.0, 0.5, 9).rows


def test_schema_validation():
    base = [Column("a", "continuous"), Column("t", "binary"), Column("y", "binary")]
    with pytest.raises(SchemaError):
        FeatureSchema(tuple(base), "missing", "1", "y", "1")
    with pytest.raises(SchemaError):
        FeatureSchema(tuple(base), "a", "1", "y", "1")
    with pytest.raises(SchemaError):
        FeatureSchema(tuple(base), "t", "1", "t", "1")
    with pytest.raises(SchemaError):
        Column("c", "categorical", ("x", "x"))
    with pytest.raises(SchemaError):
        Column("c", "categorical", ())


@pytest.mark.parametrize("name,m", [("german", 20), ("bank", 14), ("compas", 10), ("adult", 13)])
def test_builtin_schema_feature_counts(name, m):
    assert len(builtin_schema(name).feature_columns) == m


@pytest.mark.parametrize("name", BUILTIN_SCHEMAS)
def test_schema_roundtrip(tmp_path, name):
    schema = builtin_schema(name)
    save_schema(schema, tmp_path / "s.json")
    assert load_schema(tmp_path / "s.json") == schema


def test_tabular_encoder_estimator(small_schema):
    raw = RawTable(("age", "color", "sex", "y"),
                   [("1", "red", "male", "yes"), ("3", "blue", "female", "no")])
    enc = TabularEncoder(schema=small_schema)
    assert clone(enc).get_params()["schema"] == small_schema
    X = enc.fit(raw).transform(raw)
    assert X.shape == (2, 4)
    assert list(enc.get_feature_names_out()) == ["age", "color=blue", "color=red", "sex"]
