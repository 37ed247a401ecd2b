"""Yearly city panels: schema, validation, CSV ingestion and built-in data."""
import csv
import io
import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import reference_data as ref
from .diagnostics import ResidualMatrix
from .errors import ParseError, SchemaError, ValidationError

COLUMNS = ("year", "av_price", "new_homes", "accessible", "central_ac", "green", "waterfront")
FACTORS = ref.FACTORS
MIN_ROWS = 3

_CODE_RE = re.compile(r"^[A-Z]{3}$")


@dataclass(frozen=True)
class YearRow:
    year: int
    av_price: float
    new_homes: int
    accessible: int
    central_ac: int
    green: int
    waterfront: int

    def as_tuple(self):
        return tuple(getattr(self, c) for c in COLUMNS)


@dataclass(frozen=True)
class CityPanel:
    """One city's consecutive yearly observations, sorted by year."""

    city_code: str
    rows: tuple

    def __post_init__(self):
        code = str(self.city_code).upper()
        if not _CODE_RE.match(code):
            raise ValidationError(f"city code must be three letters, got {self.city_code!r}")
        object.__setattr__(self, "city_code", code)
        rows = tuple(self.rows)
        object.__setattr__(self, "rows", rows)
        if len(rows) < MIN_ROWS:
            raise ValidationError(f"{code}: need at least {MIN_ROWS} years, got {len(rows)}")
        for prev, cur in zip(rows, rows[1:]):
            if cur.year != prev.year + 1:
                kind = "duplicate year" if cur.year == prev.year else "year gap"
                raise ValidationError(f"{code}: {kind} between {prev.year} and {cur.year}")
        for row in rows:
            if not (math.isfinite(row.av_price) and row.av_price > 0):
                raise ValidationError(f"{code} {row.year}: av_price must be > 0, got {row.av_price}")
            for name in FACTORS:
                if getattr(row, name) < 0:
                    raise ValidationError(f"{code} {row.year}: {name} must be >= 0")

    @property
    def years(self):
        return np.array([r.year for r in self.rows], dtype=int)

    @property
    def start_year(self):
        return self.rows[0].year

    def column(self, name):
        """Return one column as a float array."""
        if name not in COLUMNS:
            raise KeyError(name)
        return np.array([getattr(r, name) for r in self.rows], dtype=float)

    def __len__(self):
        return len(self.rows)


@dataclass(frozen=True)
class PanelSet:
    panels: tuple

    def __post_init__(self):
        panels = tuple(self.panels)
        codes = [p.city_code for p in panels]
        if len(set(codes)) != len(codes):
            raise ValidationError(f"duplicate city codes in {codes}")
        if codes != sorted(codes):
            raise ValidationError("panels must be ordered alphabetically by city code")
        object.__setattr__(self, "panels", panels)

    @classmethod
    def of(cls, panels):
        return cls(tuple(sorted(panels, key=lambda p: p.city_code)))

    @property
    def city_codes(self):
        return tuple(p.city_code for p in self.panels)

    def __iter__(self):
        return iter(self.panels)

    def __len__(self):
        return len(self.panels)

    def __getitem__(self, code):
        for p in self.panels:
            if p.city_code == code:
                return p
        raise KeyError(code)


@dataclass(frozen=True)
class CityMeta:
    water_area_pct: float
    seniors_alone_pct: float

    def __post_init__(self):
        for name in ("water_area_pct", "seniors_alone_pct"):
            v = getattr(self, name)
            if not 0.0 <= v <= 100.0:
                raise ValidationError(f"{name} must lie in [0, 100], got {v}")


# Census-derived proxies for the eight study cities.
CITY_META = {
    code: CityMeta(w, s)
    for code, w, s in zip(ref.CITIES, ref.WATER_AREA_PCT, ref.SENIORS_ALONE_PCT)
}


def _parse_cell(text, row, column, integer):
    raw = text.strip()
    try:
        value = float(raw)
    except ValueError:
        raise ParseError(f"row {row}, column {column!r}: cannot parse {raw!r} as a number",
                         row=row, column=column) from None
    if not math.isfinite(value):
        raise ParseError(f"row {row}, column {column!r}: non-finite value {raw!r}",
                         row=row, column=column)
    if integer:
        if value != int(value):
            raise ParseError(f"row {row}, column {column!r}: expected an integer, got {raw!r}",
                             row=row, column=column)
        return int(value)
    return value


def _detect_delimiter(header_line):
    for delim in (",", "\t", ";", "|"):
        if delim in header_line:
            return delim
    return ","


def ingest_panel(source, city_code, delimiter=None):
    """Read and validate a city panel.

    Parameters
    ----------
    source : str, path-like or text stream
        Delimiter-separated text whose header names the seven columns
        ``year,av_price,new_homes,accessible,central_ac,green,waterfront``
        (any order). A ``str`` containing a newline is treated as the text
        itself; otherwise strings and paths are opened as files.
    city_code : str
        Three-letter city identifier.
    delimiter : str, optional
        Field separator; detected from the header when omitted.

    Returns
    -------
    CityPanel
        Rows sorted by year.

    Raises
    ------
    SchemaError
        A required column is missing.
    ParseError
        A cell is not numeric (carries ``row`` and ``column``).
    ValidationError
        Year gaps, duplicate years, non-positive price or negative counts.
    """
    if isinstance(source, (str, Path)) and not (isinstance(source, str) and "\n" in source):
        with open(source, newline="") as fh:
            return ingest_panel(fh, city_code, delimiter=delimiter)
    if isinstance(source, str):
        source = io.StringIO(source)

    lines = [ln for ln in source.read().splitlines() if ln.strip()]
    if not lines:
        raise SchemaError("empty input: expected a header row", column=None)
    delim = delimiter or _detect_delimiter(lines[0])
    reader = csv.reader(lines, delimiter=delim)
    header = [h.strip().lower() for h in next(reader)]
    for col in COLUMNS:
        if col not in header:
            raise SchemaError(f"missing column {col!r}", column=col)
    index = {col: header.index(col) for col in COLUMNS}

    rows = []
    for lineno, cells in enumerate(reader, start=2):
        if len(cells) < len(header):
            raise ParseError(f"row {lineno}: expected {len(header)} cells, got {len(cells)}",
                             row=lineno)
        values = {}
        for col in COLUMNS:
            integer = col != "av_price"
            values[col] = _parse_cell(cells[index[col]], lineno, col, integer)
        rows.append(YearRow(**values))
    rows.sort(key=lambda r: r.year)
    return CityPanel(city_code, tuple(rows))


def load_panel(path, city_code=None):
    """Load ``<CODE>.csv``; the city code defaults to the file stem."""
    path = Path(path)
    return ingest_panel(path, city_code or path.stem)


def _fmt_number(value):
    if isinstance(value, int) or float(value).is_integer():
        return str(int(value))
    return repr(float(value))


def serialize_panel(panel, stream=None):
    """Write ``panel`` as CSV; returns the text when ``stream`` is None."""
    out = stream if stream is not None else io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(COLUMNS)
    for row in panel.rows:
        writer.writerow([_fmt_number(v) for v in row.as_tuple()])
    if stream is None:
        return out.getvalue()
    return None


def builtin_atl():
    """Atlanta panel, 2000-2022, as published."""
    rows = tuple(YearRow(y, float(p), *counts) for y, p, *counts in ref.ATL_ROWS)
    return CityPanel("ATL", rows)


def builtin_csv_path(city_code="ATL"):
    """Path of a CSV fixture shipped with the package."""
    path = Path(__file__).with_name("data") / f"{city_code.upper()}.csv"
    if not path.exists():
        raise FileNotFoundError(f"no built-in panel for {city_code}")
    return path


def printed_residual_table(name):
    """Residual table exactly as printed ("B1" or "B2"), as a ResidualMatrix."""
    values = ref.PRINTED_RESIDUALS[name.upper()]
    return ResidualMatrix(values, ref.RESIDUAL_YEARS, ref.CITIES)


def builtin_residuals(model):
    """Published 22 x 8 residual matrix for ``model`` in {"glm", "gam"}.

    The two appendix tables are printed under interchanged captions; this
    returns the table whose residuals belong to ``model`` (see
    :data:`reference_data.MODEL_RESIDUAL_TABLE`).
    """
    key = str(model).lower()
    if key not in ref.MODEL_RESIDUAL_TABLE:
        raise ValueError(f"model must be 'glm' or 'gam', got {model!r}")
    return printed_residual_table(ref.MODEL_RESIDUAL_TABLE[key])
