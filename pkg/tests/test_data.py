"""Dataset schema, validation, and CSV round-trip tests."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mnarfuse.data import (
    DatasetFormatError,
    DomainTag,
    PooledDataset,
    UnitRecord,
    VariableSchema,
    expand_m,
    read_csv,
    split_by_domain,
    validate,
    write_csv,
)

SCHEMA = VariableSchema(covariate_names=("x1",))


def rec(g=DomainTag.PRIMARY, x=(0.0,), m=1.0, y=2.0, r=1):
    return UnitRecord(g=g, x=x, m=m, y=y, r=r)


def test_validate_rejects_auxiliary_y():
    ds = PooledDataset(
        records=(rec(), rec(g=DomainTag.AUXILIARY, y=2.0)),
        schema=SCHEMA,
    )
    msgs = [v for v in validate(ds) if "auxiliary" in v.lower()]
    assert len(msgs) == 1


def test_validate_rejects_m_present_when_r0():
    ds = PooledDataset(
        records=(rec(r=0, m=1.0, y=None), rec(g=DomainTag.AUXILIARY, y=None)),
        schema=SCHEMA,
    )
    assert any("R=0 but M present" in v for v in validate(ds))


def test_validate_clean_dataset():
    ds = PooledDataset(
        records=(
            rec(),
            rec(r=0, m=None, y=None),
            rec(g=DomainTag.AUXILIARY, y=None),
            rec(g=DomainTag.AUXILIARY, r=0, m=None, y=None),
        ),
        schema=SCHEMA,
    )
    assert validate(ds) == []


def test_split_by_domain_preserves_order():
    rows = (rec(x=(0.0,)), rec(g=DomainTag.AUXILIARY, y=None), rec(x=(5.0,)))
    primary, aux = split_by_domain(PooledDataset(records=rows, schema=SCHEMA))
    assert [r.x for r in primary] == [(0.0,), (5.0,)]
    assert len(aux) == 1


def test_split_all_primary_and_empty():
    ds = PooledDataset(records=(rec(), rec()), schema=SCHEMA)
    primary, aux = split_by_domain(ds)
    assert len(primary) == 2 and aux == []
    primary, aux = split_by_domain(PooledDataset(records=(), schema=SCHEMA))
    assert primary == [] and aux == []


CAT = VariableSchema(covariate_names=("x1",), m_kind="categorical",
                     m_levels=("A", "B", "C"))


def test_expand_m_categorical():
    assert expand_m("B", CAT) == (1.0, 0.0)
    assert expand_m("A", CAT) == (0.0, 0.0)


def test_expand_m_numeric_passthrough():
    assert expand_m(2.5, SCHEMA) == (2.5,)


def test_validate_flags_unseen_level():
    ds = PooledDataset(
        records=(rec(m="D", y=1.0), rec(g=DomainTag.AUXILIARY, m="A", y=None)),
        schema=CAT,
    )
    assert any("unseen" in v for v in validate(ds))


def test_csv_round_trip(tmp_path):
    ds = PooledDataset(
        records=(
            rec(x=(0.25,), m=-1.5, y=3.75),
            rec(r=0, m=None, y=None),
            rec(g=DomainTag.AUXILIARY, x=(1.0,), m=0.125, y=None),
        ),
        schema=SCHEMA,
    )
    path = tmp_path / "d.csv"
    write_csv(ds, str(path))
    back = read_csv(str(path), SCHEMA)
    assert back.records == ds.records


def test_read_csv_names_bad_line(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("domain,r,x1,m,y\n1,1,0.0,1.0,2.0\n1,one,0.0,1.0,2.0\n")
    with pytest.raises(DatasetFormatError, match="line 3"):
        read_csv(str(path), SCHEMA)


def test_read_csv_rejects_wrong_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("site,r,x1,m,y\n")
    with pytest.raises(DatasetFormatError):
        read_csv(str(path), SCHEMA)


finite = st.floats(allow_nan=False, allow_infinity=False, width=32)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.sampled_from([1, 2]), finite, finite, finite,
                           st.sampled_from([0, 1])), min_size=1, max_size=20))
def test_csv_round_trip_property(tmp_path_factory, raw_rows):
    records = []
    for g, x, m, y, r in raw_rows:
        tag = DomainTag(g)
        records.append(UnitRecord(
            g=tag,
            x=(float(x),),
            m=float(m) if r == 1 else None,
            y=float(y) if (tag == DomainTag.PRIMARY and r == 1) else None,
            r=r,
        ))
    ds = PooledDataset(records=tuple(records), schema=SCHEMA)
    path = tmp_path_factory.mktemp("rt") / "d.csv"
    write_csv(ds, str(path))
    assert read_csv(str(path), SCHEMA).records == ds.records
