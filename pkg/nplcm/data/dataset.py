"""
Dataset Module
Validated case-control measurement tables and their CSV interchange
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import numpy as np
import pandas as pd

from nplcm.data.schemas import DataSchema
from nplcm.middleware.error_handler import DataValidationError
from nplcm.utils.file_utils import write_frame

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Dataset:
    """
    Observable data for one study

    brs is N x J in {0,1}; ss is N x J_ss with NaN for missing and ss_index
    mapping its columns to 0-based pathogen indices; controls have all-missing
    ss rows and all-zero x_design rows.
    """
    brs: np.ndarray
    y: np.ndarray
    x_design: np.ndarray
    w_design: np.ndarray
    pathogens: Tuple[str, ...]
    ss: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))
    ss_index: Tuple[int, ...] = ()
    x_columns: Tuple[str, ...] = ()
    w_columns: Tuple[str, ...] = ()
    covariate_text: Dict[str, Tuple[str, ...]] = field(default_factory=dict, compare=False, repr=False)

    @property
    def n_subjects(self) -> int:
        return self.brs.shape[0]

    @property
    def n_pathogens(self) -> int:
        return self.brs.shape[1]

    @property
    def case_mask(self) -> np.ndarray:
        return self.y == 1

    @property
    def n_cases(self) -> int:
        return int(self.y.sum())

    @property
    def n_controls(self) -> int:
        return self.n_subjects - self.n_cases

    @property
    def ss_pathogens(self) -> Tuple[str, ...]:
        return tuple(self.pathogens[j] for j in self.ss_index)

    @property
    def has_ss(self) -> bool:
        return len(self.ss_index) > 0

    def summary(self) -> Dict[str, object]:
        """Counts of cases and controls, overall and per binary W column"""
        info: Dict[str, object] = {
            'n_subjects': self.n_subjects,
            'n_cases': self.n_cases,
            'n_controls': self.n_controls,
            'n_pathogens': self.n_pathogens,
        }
        strata = {}
        for c, name in enumerate(self.w_columns):
            col = self.w_design[:, c]
            if np.isin(col, (0.0, 1.0)).all():
                strata[name] = {
                    'cases': int(col[self.case_mask].sum()),
                    'controls': int(col[~self.case_mask].sum()),
                }
        info['strata'] = strata
        return info

    def to_frame(self, schema: Optional[DataSchema] = None) -> pd.DataFrame:
        schema = schema or DataSchema()
        columns: Dict[str, object] = {schema.case_column: self.y.astype(int)}
        for j, name in enumerate(self.pathogens):
            columns[f"{schema.brs_prefix}{name}"] = self.brs[:, j].astype(int)
        for s, j in enumerate(self.ss_index):
            values = self.ss[:, s]
            columns[f"{schema.ss_prefix}{self.pathogens[j]}"] = pd.array(
                [pd.NA if np.isnan(v) else int(v) for v in values], dtype='Int64'
            )
        for prefix, names, matrix in ((schema.x_prefix, self.x_columns, self.x_design),
                                      (schema.w_prefix, self.w_columns, self.w_design)):
            for c, name in enumerate(names):
                header = f"{prefix}{name}"
                text = self.covariate_text.get(header)
                columns[header] = list(text) if text is not None else matrix[:, c]
        return pd.DataFrame(columns)


def _binary(values: pd.Series, column: str, allow_missing: bool = False) -> np.ndarray:
    text = values.astype(str).str.strip()
    missing = text == ''
    if missing.any() and not allow_missing:
        raise DataValidationError(
            f"Missing value in measurement column '{column}' (row {int(np.argmax(missing.values))})"
        )
    bad = ~(text.isin(['0', '1']) | missing)
    if bad.any():
        row = int(np.argmax(bad.values))
        raise DataValidationError(
            f"Non-binary value '{text.iloc[row]}' in measurement column '{column}' (row {row})",
            payload={'column': column, 'row': row},
        )
    out = np.full(len(text), np.nan)
    out[~missing.values] = text[~missing].astype(int).values
    return out


def _numeric(values: pd.Series, column: str) -> np.ndarray:
    try:
        return values.astype(str).str.strip().astype(float).values
    except ValueError:
        raise DataValidationError(f"Non-numeric value in covariate column '{column}'")


def load_dataset(table: Union[str, Path, pd.DataFrame],
                 schema: Optional[DataSchema] = None) -> Dataset:
    """
    Load and validate a case-control table

    Args:
        table: CSV path or DataFrame read with string dtype
        schema: Column naming; defaults to y / brs_ / ss_ / x_ / w_

    Returns:
        Validated Dataset with control x rows zeroed
    """
    schema = schema or DataSchema()
    if isinstance(table, pd.DataFrame):
        frame = table.astype(str).replace({'nan': '', '<NA>': ''})
    else:
        try:
            frame = pd.read_csv(table, dtype=str, keep_default_na=False, encoding='utf-8')
        except (OSError, pd.errors.ParserError, UnicodeDecodeError) as e:
            raise DataValidationError(f"Cannot read dataset {table}: {e}")

    header = list(frame.columns)
    if schema.case_column not in header:
        raise DataValidationError(f"Header mismatch: case column '{schema.case_column}' not found")
    brs_cols = [c for c in header if c.startswith(schema.brs_prefix)]
    ss_cols = [c for c in header if c.startswith(schema.ss_prefix)]
    x_cols = [c for c in header if c.startswith(schema.x_prefix)]
    w_cols = [c for c in header if c.startswith(schema.w_prefix)]
    known = {schema.case_column, *brs_cols, *ss_cols, *x_cols, *w_cols}
    unknown = [c for c in header if c not in known]
    if unknown:
        raise DataValidationError(f"Header mismatch: unrecognized columns {unknown}")
    if not brs_cols:
        raise DataValidationError("Header mismatch: no bronze-standard columns")

    pathogens = tuple(c[len(schema.brs_prefix):] for c in brs_cols)
    ss_names = [c[len(schema.ss_prefix):] for c in ss_cols]
    missing_map = [name for name in ss_names if name not in pathogens]
    if missing_map:
        raise DataValidationError(f"Silver-standard columns without a BrS pathogen: {missing_map}")

    y = _binary(frame[schema.case_column], schema.case_column)
    if len(y) < 2:
        raise DataValidationError("At least two subjects are required")
    y = y.astype(np.int8)
    if y.sum() == 0:
        raise DataValidationError("at least one case required")
    if y.sum() == len(y):
        raise DataValidationError("at least one control required")

    brs = np.column_stack([_binary(frame[c], c) for c in brs_cols]).astype(np.int8)

    if ss_cols:
        ss = np.column_stack([_binary(frame[c], c, allow_missing=True) for c in ss_cols])
        on_control = ~np.isnan(ss[y == 0])
        if on_control.any():
            raise DataValidationError("silver-standard on control")
    else:
        ss = np.empty((len(y), 0))
    ss_index = tuple(pathogens.index(name) for name in ss_names)

    x_design = (np.column_stack([_numeric(frame[c], c) for c in x_cols])
                if x_cols else np.empty((len(y), 0)))
    w_design = (np.column_stack([_numeric(frame[c], c) for c in w_cols])
                if w_cols else np.empty((len(y), 0)))
    for name, matrix in (('x', x_design), ('w', w_design)):
        if not np.isfinite(matrix).all():
            raise DataValidationError(f"Non-finite value in {name} covariates")

    covariate_text = {c: tuple(frame[c].astype(str).str.strip()) for c in (*x_cols, *w_cols)}

    control_rows = x_design[y == 0]
    if control_rows.size and np.any(control_rows != 0):
        logger.warning("Nonzero etiology covariates on control rows were set to zero")
        zeroed = (x_design != 0) & (y == 0)[:, None]
        for c, column in enumerate(x_cols):
            covariate_text[column] = tuple(
                '0' if flag else token for token, flag in zip(covariate_text[column], zeroed[:, c])
            )
        x_design = x_design.copy()
        x_design[y == 0] = 0.0

    dataset = Dataset(
        brs=brs, y=y, x_design=x_design, w_design=w_design, pathogens=pathogens,
        ss=ss, ss_index=ss_index, covariate_text=covariate_text,
        x_columns=tuple(c[len(schema.x_prefix):] for c in x_cols),
        w_columns=tuple(c[len(schema.w_prefix):] for c in w_cols),
    )
    info = dataset.summary()
    logger.info(
        f"Loaded dataset: {info['n_cases']} cases, {info['n_controls']} controls, "
        f"J={info['n_pathogens']}, strata={info['strata']}"
    )
    return dataset


def store_dataset(dataset: Dataset, path: Union[str, Path],
                  schema: Optional[DataSchema] = None) -> Path:
    """Write a dataset in the CSV schema; missing SS is an empty cell"""
    return write_frame(path, dataset.to_frame(schema))


def standardize_continuous(column) -> Tuple[np.ndarray, float, float]:
    """
    Standardize to sample mean 0 and sample s.d. 1

    Returns:
        (standardized values, mean, scale)
    """
    values = np.asarray(column, dtype=float)
    if values.size < 2:
        raise DataValidationError("degenerate continuous covariate: fewer than two values")
    mean = float(values.mean())
    scale = float(values.std(ddof=1))
    if not np.isfinite(scale) or scale <= 0.0:
        raise DataValidationError("degenerate continuous covariate")
    return (values - mean) / scale, mean, scale
