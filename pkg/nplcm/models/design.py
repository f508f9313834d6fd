"""
Design Module
Expands regression formulas into design matrices and binds a dataset to a model
"""
import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from nplcm.data.dataset import Dataset, standardize_continuous
from nplcm.data.schemas import ModelSpec, TermSpec
from nplcm.middleware.error_handler import ConfigurationError, ModelError
from nplcm.splines.basis import SplineBasis, build_basis

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TermBlock:
    """One formula term mapped to a contiguous slice of design columns"""
    label: str
    kind: str
    start: int
    stop: int
    column: Optional[int] = None
    basis: Optional[SplineBasis] = None

    @property
    def columns(self) -> slice:
        return slice(self.start, self.stop)

    @property
    def width(self) -> int:
        return self.stop - self.start

    def to_dict(self) -> Dict[str, Any]:
        data = {'label': self.label, 'kind': self.kind, 'start': self.start,
                'stop': self.stop, 'column': self.column}
        if self.basis is not None:
            data['basis'] = self.basis.to_dict()
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'TermBlock':
        basis = SplineBasis.from_dict(data['basis']) if 'basis' in data else None
        return cls(label=data['label'], kind=data['kind'], start=data['start'],
                   stop=data['stop'], column=data['column'], basis=basis)


@dataclass(frozen=True)
class UpdateBlock:
    """Coefficients updated jointly by one Metropolis step"""
    name: str
    columns: slice
    spline_index: Optional[int] = None

    @property
    def width(self) -> int:
        return self.columns.stop - self.columns.start


@dataclass(frozen=True)
class AdditiveDesign:
    """
    Expanded additive formula

    Linear terms (intercept first) occupy the leading columns and form a single
    update group; each spline term follows as its own block.
    """
    source_columns: Tuple[str, ...]
    terms: Tuple[TermBlock, ...]

    @property
    def width(self) -> int:
        return self.terms[-1].stop if self.terms else 0

    @property
    def n_linear(self) -> int:
        return sum(t.width for t in self.terms if t.kind != 'spline')

    @property
    def spline_terms(self) -> List[TermBlock]:
        return [t for t in self.terms if t.kind == 'spline']

    @property
    def labels(self) -> List[str]:
        out = []
        for t in self.terms:
            if t.kind == 'spline':
                out.extend(f"{t.label}[{c + 1}]" for c in range(t.width))
            else:
                out.append(t.label)
        return out

    def update_blocks(self) -> List[UpdateBlock]:
        blocks = []
        if self.n_linear:
            blocks.append(UpdateBlock('linear', slice(0, self.n_linear)))
        for s, term in enumerate(self.spline_terms):
            blocks.append(UpdateBlock(term.label, term.columns, spline_index=s))
        return blocks

    def transform(self, source: np.ndarray) -> np.ndarray:
        """Design rows for raw covariate rows laid out like the source matrix"""
        source = np.atleast_2d(np.asarray(source, dtype=float))
        if source.shape[1] != len(self.source_columns):
            raise ConfigurationError(
                f"grid has {source.shape[1]} columns, formula expects {len(self.source_columns)}"
            )
        out = np.zeros((source.shape[0], self.width))
        for term in self.terms:
            if term.kind == 'intercept':
                out[:, term.start] = 1.0
            elif term.kind == 'linear':
                out[:, term.start] = source[:, term.column]
            else:
                out[:, term.columns] = term.basis.evaluate(source[:, term.column])
        return out

    def to_dict(self) -> Dict[str, Any]:
        return {'source_columns': list(self.source_columns),
                'terms': [t.to_dict() for t in self.terms]}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'AdditiveDesign':
        return cls(source_columns=tuple(data['source_columns']),
                   terms=tuple(TermBlock.from_dict(t) for t in data['terms']))


def _resolve_column(term: TermSpec, names: Sequence[str]) -> int:
    ref = term.column
    if isinstance(ref, str):
        if ref not in names:
            raise ConfigurationError(f"Formula column '{ref}' not among {list(names)}")
        return list(names).index(ref)
    if not 0 <= ref < len(names):
        raise ConfigurationError(f"Formula column index {ref} outside design width {len(names)}")
    return ref


def build_design(formula: Sequence[TermSpec], source: np.ndarray, names: Sequence[str],
                 intercept: bool = False) -> AdditiveDesign:
    """
    Expand a formula over the fitting rows of a covariate matrix

    Spline columns are standardized on the fitting rows and the basis is built
    and centered there; both transforms are frozen inside the design.
    """
    linear = [t for t in formula if t.kind != 'spline']
    splines = [t for t in formula if t.kind == 'spline']
    if intercept and not any(t.kind == 'intercept' for t in linear):
        linear = [TermSpec(kind='intercept')] + linear
    linear.sort(key=lambda t: t.kind != 'intercept')

    terms: List[TermBlock] = []
    start = 0
    for term in linear:
        column = None if term.kind == 'intercept' else _resolve_column(term, names)
        label = '(Intercept)' if column is None else names[column]
        terms.append(TermBlock(label, term.kind, start, start + 1, column=column))
        start += 1
    for term in splines:
        column = _resolve_column(term, names)
        _, shift, scale = standardize_continuous(source[:, column])
        basis = build_basis(source[:, column], term.df, shift=shift, scale=scale)
        terms.append(TermBlock(f"s({names[column]})", 'spline', start, start + basis.n_basis,
                               column=column, basis=basis))
        start += basis.n_basis
    return AdditiveDesign(source_columns=tuple(names), terms=tuple(terms))


@dataclass(frozen=True)
class SubjectBlock:
    """Measurements and design rows for the cases or the controls"""
    brs: np.ndarray
    w_rows: np.ndarray
    x_rows: Optional[np.ndarray] = None
    ss: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return self.brs.shape[0]


@dataclass(frozen=True)
class ModelContext:
    """
    A dataset bound to a model specification

    cause_matrix is the L x J incidence of pathogens in causes; ss_in_cause is
    the L x J_ss incidence restricted to silver-standard pathogens.
    """
    dataset: Dataset
    spec: ModelSpec
    causes: Tuple[Tuple[int, ...], ...]
    cause_labels: Tuple[str, ...]
    cause_matrix: np.ndarray
    ss_in_cause: np.ndarray
    etiology_design: AdditiveDesign
    subclass_design: AdditiveDesign
    cases: SubjectBlock
    controls: SubjectBlock
    strata_rows: Optional[np.ndarray] = None
    case_strata: Optional[np.ndarray] = None

    @property
    def n_causes(self) -> int:
        return len(self.causes)

    @property
    def n_subclasses(self) -> int:
        return self.spec.k_subclasses

    @property
    def n_pathogens(self) -> int:
        return self.dataset.n_pathogens

    @property
    def n_ss(self) -> int:
        return self.ss_in_cause.shape[1]

    @property
    def dirichlet(self) -> bool:
        return self.spec.etiology_prior == 'dirichlet'

    def singleton_causes(self) -> Dict[int, int]:
        """Pathogen index -> cause index for singleton causes"""
        return {c[0]: l for l, c in enumerate(self.causes) if len(c) == 1}

    def design_summary(self) -> Dict[str, Any]:
        return {
            'causes': list(self.cause_labels),
            'etiology_design': self.etiology_design.to_dict(),
            'subclass_design': self.subclass_design.to_dict(),
            'strata_rows': None if self.strata_rows is None else self.strata_rows.tolist(),
        }


def stratum_index(strata_rows: np.ndarray, design_rows: np.ndarray) -> np.ndarray:
    """Index of each design row among the stored strata rows"""
    design_rows = np.atleast_2d(design_rows)
    match = np.all(design_rows[:, None, :] == strata_rows[None, :, :], axis=2)
    found = match.any(axis=1)
    if not found.all():
        raise ModelError(
            f"{int((~found).sum())} covariate row(s) match no fitted etiology stratum"
        )
    return match.argmax(axis=1)


def build_context(dataset: Dataset, spec: ModelSpec) -> ModelContext:
    """Resolve causes and expand both formulas over the dataset"""
    causes = spec.cause_spec.resolve(list(dataset.pathogens))
    labels = tuple(spec.cause_spec.labels(list(dataset.pathogens)))
    J = dataset.n_pathogens
    cause_matrix = np.zeros((len(causes), J))
    for l, cause in enumerate(causes):
        cause_matrix[l, list(cause)] = 1.0

    use_ss = spec.ss_enabled and dataset.has_ss
    if spec.ss_enabled and not dataset.has_ss:
        logger.info("Silver-standard enabled but dataset has no SS columns")
    ss_index = list(dataset.ss_index) if use_ss else []
    ss_in_cause = cause_matrix[:, ss_index].astype(bool)

    mask = dataset.case_mask
    x_cases = dataset.x_design[mask]
    etiology_design = build_design(spec.etiology_formula, x_cases, dataset.x_columns,
                                   intercept=spec.etiology_intercept)
    subclass_design = build_design(spec.subclass_formula, dataset.w_design, dataset.w_columns)
    if spec.k_subclasses == 1 and subclass_design.width:
        logger.info("K=1: subclass formula has no effect")

    x_rows = etiology_design.transform(x_cases)
    ss_cases = dataset.ss[mask][:, :len(ss_index)] if use_ss else np.empty((int(mask.sum()), 0))
    cases = SubjectBlock(
        brs=dataset.brs[mask].astype(float),
        w_rows=subclass_design.transform(dataset.w_design[mask]),
        x_rows=x_rows,
        ss=ss_cases,
    )
    controls = SubjectBlock(
        brs=dataset.brs[~mask].astype(float),
        w_rows=subclass_design.transform(dataset.w_design[~mask]),
    )

    strata_rows = case_strata = None
    if spec.etiology_prior == 'dirichlet':
        strata_rows, case_strata = np.unique(x_rows, axis=0, return_inverse=True)
        case_strata = np.asarray(case_strata).reshape(-1)
        logger.info(f"Dirichlet etiology over {strata_rows.shape[0]} case strata")

    logger.info(
        f"Model context: L={len(causes)}, K={spec.k_subclasses}, "
        f"etiology width={etiology_design.width}, subclass width={subclass_design.width}"
    )
    return ModelContext(
        dataset=dataset, spec=spec, causes=causes, cause_labels=labels,
        cause_matrix=cause_matrix, ss_in_cause=ss_in_cause,
        etiology_design=etiology_design, subclass_design=subclass_design,
        cases=cases, controls=controls,
        strata_rows=strata_rows, case_strata=case_strata,
    )
