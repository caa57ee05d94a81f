"""Pooled two-domain dataset with joint missingness encoding.

A unit belongs to the primary domain (domain tag 1, outcome recorded but
possibly missing not at random) or the auxiliary domain (tag 2, outcome never
recorded, auxiliary variable missing at random).  Missingness of the auxiliary
variable M and the outcome Y in the primary domain is a single joint
indicator R: rows with discordant per-column missingness are rejected, not
repaired.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

MValue = Union[float, str]


class DomainTag(enum.IntEnum):
    PRIMARY = 1
    AUXILIARY = 2


@dataclass(frozen=True)
class VariableSchema:
    """Column layout: covariate names, the kind of M and Y, file missing token."""

    covariate_names: tuple[str, ...]
    m_kind: str = "numeric"  # "numeric" or "categorical"
    m_levels: tuple[str, ...] = ()
    y_kind: str = "numeric"  # "numeric" or "binary"
    missing_token: str = "?"

    def __post_init__(self):
        if self.m_kind not in ("numeric", "categorical"):
            raise ValueError(f"unknown m_kind {self.m_kind!r}")
        if self.y_kind not in ("numeric", "binary"):
            raise ValueError(f"unknown y_kind {self.y_kind!r}")
        if self.m_kind == "categorical":
            if not self.m_levels:
                raise ValueError("categorical M requires a nonempty level list")
            if len(set(self.m_levels)) != len(self.m_levels):
                raise ValueError("categorical M levels must be distinct")

    @property
    def n_covariates(self) -> int:
        return len(self.covariate_names)

    @property
    def m_dim(self) -> int:
        """Width of the expanded M feature block (reference-level one-hot)."""
        if self.m_kind == "categorical":
            return len(self.m_levels) - 1
        return 1


@dataclass(frozen=True)
class UnitRecord:
    g: DomainTag
    x: tuple[float, ...]
    m: Optional[MValue]
    y: Optional[float]
    r: int


@dataclass(frozen=True)
class PooledDataset:
    records: tuple[UnitRecord, ...]
    schema: VariableSchema

    def __len__(self) -> int:
        return len(self.records)


def validate(dataset: PooledDataset) -> list[str]:
    """Return one message per invariant violation; empty list means clean."""
    schema = dataset.schema
    violations = []
    n_primary = n_aux = 0
    for i, rec in enumerate(dataset.records):
        if rec.g == DomainTag.PRIMARY:
            n_primary += 1
        else:
            n_aux += 1
        if rec.r not in (0, 1):
            violations.append(f"row {i}: R must be 0 or 1, got {rec.r}")
            continue
        if len(rec.x) != schema.n_covariates:
            violations.append(
                f"row {i}: expected {schema.n_covariates} covariates, got {len(rec.x)}"
            )
        if rec.r == 1 and rec.m is None:
            violations.append(f"row {i}: R=1 but M absent")
        if rec.r == 0 and rec.m is not None:
            violations.append(f"row {i}: R=0 but M present")
        if rec.g == DomainTag.PRIMARY:
            if rec.r == 1 and rec.y is None:
                violations.append(f"row {i}: primary-domain R=1 but Y absent")
            if rec.r == 0 and rec.y is not None:
                violations.append(f"row {i}: primary-domain R=0 but Y present")
        else:
            if rec.y is not None:
                violations.append(f"row {i}: Y present in auxiliary domain")
        if rec.m is not None and schema.m_kind == "categorical":
            if rec.m not in schema.m_levels:
                violations.append(f"row {i}: unseen M level {rec.m!r}")
    if n_primary == 0:
        violations.append("dataset has no primary-domain records")
    if n_aux == 0:
        violations.append("dataset has no auxiliary-domain records")
    return violations


def split_by_domain(
    dataset: PooledDataset,
) -> tuple[list[UnitRecord], list[UnitRecord]]:
    """Order-preserving partition into (primary, auxiliary) records."""
    primary = [rec for rec in dataset.records if rec.g == DomainTag.PRIMARY]
    auxiliary = [rec for rec in dataset.records if rec.g == DomainTag.AUXILIARY]
    return primary, auxiliary


def expand_m(m: MValue, schema: VariableSchema) -> tuple[float, ...]:
    """Expand an observed M value into its numeric feature block.

    Categorical M with L levels maps to L-1 indicators with the first level as
    reference; numeric M passes through as a single feature.
    """
    if schema.m_kind == "numeric":
        return (float(m),)
    if m not in schema.m_levels:
        raise ValueError(f"unseen categorical level {m!r}")
    idx = schema.m_levels.index(m)
    return tuple(1.0 if idx == k else 0.0 for k in range(1, len(schema.m_levels)))


def one_hot_expand(record: UnitRecord, schema: VariableSchema) -> tuple[float, ...]:
    """Real covariate row for a record: X features plus expanded M when present."""
    row = tuple(record.x)
    if record.m is not None:
        row = row + expand_m(record.m, schema)
    return row


def _format_value(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(dataset: PooledDataset, path: str) -> None:
    """Write the canonical CSV form: domain, r, covariates, m, y."""
    schema = dataset.schema
    header = ["domain", "r", *schema.covariate_names, "m", "y"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for rec in dataset.records:
            row = [int(rec.g), rec.r]
            row.extend(_format_value(x) for x in rec.x)
            row.append(schema.missing_token if rec.m is None else _format_value(rec.m))
            row.append(schema.missing_token if rec.y is None else _format_value(rec.y))
            writer.writerow(row)


class DatasetFormatError(ValueError):
    """Raised when a CSV file cannot be parsed into a valid dataset."""


def _parse_missing(token: str, missing_token: str) -> bool:
    return token == missing_token or token == ""


def read_csv(path: str, schema: VariableSchema) -> PooledDataset:
    """Read the canonical CSV form back into a dataset.

    The domain-2 y column may be absent entirely; the missing token and the
    empty cell are both accepted as missing.
    """
    records = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetFormatError(f"{path}: empty file") from None
        expected = ["domain", "r", *schema.covariate_names, "m"]
        has_y = len(header) == len(expected) + 1 and header[-1] == "y"
        if header[: len(expected)] != expected or (
            len(header) != len(expected) and not has_y
        ):
            raise DatasetFormatError(
                f"{path}: header {header} does not match schema columns {expected + ['y']}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                g = DomainTag(int(row[0]))
                r = int(row[1])
                x = tuple(float(v) for v in row[2 : 2 + schema.n_covariates])
                m_tok = row[2 + schema.n_covariates]
                if _parse_missing(m_tok, schema.missing_token):
                    m = None
                elif schema.m_kind == "categorical":
                    m = m_tok
                else:
                    m = float(m_tok)
                y = None
                if has_y:
                    y_tok = row[3 + schema.n_covariates]
                    if not _parse_missing(y_tok, schema.missing_token):
                        y = float(y_tok)
            except (ValueError, IndexError) as exc:
                raise DatasetFormatError(f"{path}: line {lineno}: {exc}") from None
            records.append(UnitRecord(g=g, x=x, m=m, y=y, r=r))
    return PooledDataset(records=tuple(records), schema=schema)
