"""
Draws Store
Flattened multi-chain posterior draws with a stable parameter address book
"""
import logging
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from nplcm import SCHEMA_VERSION
from nplcm.middleware.error_handler import ArtifactError
from nplcm.models.design import ModelContext
from nplcm.models.params import (
    CASE, CONTROL, ETIOLOGY, ParamState, RateParams, RegressionParams, SmoothingState,
)
from nplcm.mcmc.state import smoothing_shapes
from nplcm.utils.file_utils import ensure_dir, read_json, write_frame, write_json

logger = logging.getLogger(__name__)

ADDRESS_BOOK_FILE = 'address_book.json'
LOGLIK_COLUMN = 'loglik'
RHO_KEYS = (ETIOLOGY, 'subclass')


def _entry_names(group: str, shape: Tuple[int, ...]) -> List[str]:
    if shape == ():
        return [group]
    return [f"{group}[{','.join(str(i + 1) for i in index)}]"
            for index in product(*(range(n) for n in shape))]


@dataclass
class AddressBook:
    """
    Ordered parameter groups and their shapes

    Every scalar has a 1-based bracketed name, e.g. theta[2,1]; the flat
    vector concatenates groups in order, each in C order.
    """
    groups: List[Tuple[str, Tuple[int, ...]]]
    cause_labels: List[str] = field(default_factory=list)
    strata_rows: Optional[List[List[float]]] = None

    @property
    def names(self) -> List[str]:
        out = []
        for group, shape in self.groups:
            out.extend(_entry_names(group, shape))
        return out

    @property
    def size(self) -> int:
        return sum(int(np.prod(shape)) for _, shape in self.groups)

    def slices(self) -> Dict[str, Tuple[slice, Tuple[int, ...]]]:
        out, start = {}, 0
        for group, shape in self.groups:
            stop = start + int(np.prod(shape))
            out[group] = (slice(start, stop), shape)
            start = stop
        return out

    def has_group(self, group: str) -> bool:
        return any(g == group for g, _ in self.groups)

    def _values(self, params: ParamState) -> Dict[str, np.ndarray]:
        rates, regression, smoothing = params.rates, params.regression, params.smoothing
        values = {'theta': rates.theta, 'psi': rates.psi, 'theta_ss': rates.theta_ss,
                  'etiology': regression.etiology, 'etiology_table': regression.etiology_table,
                  'control': regression.control, 'case': regression.case,
                  'mu_star': regression.mu_star, 'tau0': regression.tau0,
                  'rho': np.array([smoothing.rho[k] for k in RHO_KEYS])}
        for family in smoothing.tau:
            values[f"tau_{family}"] = smoothing.tau[family]
            values[f"xi_{family}"] = smoothing.xi[family]
        return values

    def flatten(self, params: ParamState) -> np.ndarray:
        values = self._values(params)
        parts = []
        for group, shape in self.groups:
            array = np.asarray(values[group], dtype=float)
            if array.shape != shape:
                raise ArtifactError(f"group {group} has shape {array.shape}, address book says {shape}")
            parts.append(array.ravel())
        return np.concatenate(parts) if parts else np.empty(0)

    def unpack(self, vector: np.ndarray) -> Dict[str, np.ndarray]:
        return {group: np.asarray(vector[s]).reshape(shape)
                for group, (s, shape) in self.slices().items()}

    def param_state(self, vector: np.ndarray) -> ParamState:
        """Rebuild a ParamState from one flat draw"""
        g = self.unpack(vector)
        n_sub = g['mu_star'].shape[0] if 'mu_star' in g else 0
        empty = np.empty(0)
        rates = RateParams(g['theta'], g['psi'], g.get('theta_ss', empty))
        regression = RegressionParams(
            etiology=g.get('etiology', np.zeros((len(self.cause_labels), 0))),
            control=g.get('control', np.zeros((n_sub, 0))),
            case=g.get('case', np.zeros((n_sub, 0))),
            mu_star=g.get('mu_star', empty),
            tau0=g.get('tau0', empty),
            u=np.tril(np.ones((n_sub, n_sub))),
        )
        if 'etiology_table' in g:
            regression.etiology_table = g['etiology_table']
            regression.etiology_strata = np.asarray(self.strata_rows, dtype=float)
        tau, xi = {}, {}
        for group, array in g.items():
            if group.startswith('tau_'):
                tau[group[4:]] = array
            elif group.startswith('xi_'):
                xi[group[3:]] = array.astype(int)
        rho = dict(zip(RHO_KEYS, g['rho'].tolist()))
        return ParamState(rates, regression, SmoothingState(tau=tau, xi=xi, rho=rho))

    def to_dict(self) -> Dict[str, Any]:
        return {'groups': [[g, list(s)] for g, s in self.groups],
                'cause_labels': list(self.cause_labels),
                'strata_rows': self.strata_rows}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'AddressBook':
        return cls(groups=[(g, tuple(s)) for g, s in data['groups']],
                   cause_labels=list(data.get('cause_labels', [])),
                   strata_rows=data.get('strata_rows'))


def build_address_book(context: ModelContext) -> AddressBook:
    J, K, L = context.n_pathogens, context.n_subclasses, context.n_causes
    pw = context.subclass_design.width
    groups: List[Tuple[str, Tuple[int, ...]]] = [('theta', (J, K)), ('psi', (J, K))]
    if context.n_ss:
        groups.append(('theta_ss', (context.n_ss,)))
    strata = None
    if context.dirichlet:
        groups.append(('etiology_table', (context.strata_rows.shape[0], L)))
        strata = context.strata_rows.tolist()
    elif context.etiology_design.width:
        groups.append(('etiology', (L, context.etiology_design.width)))
    if K > 1:
        if pw:
            groups += [(CONTROL, (K - 1, pw)), (CASE, (K - 1, pw))]
        groups += [('mu_star', (K - 1,)), ('tau0', (K - 1,))]
    for family, shape in smoothing_shapes(context).items():
        if shape[0] * shape[1]:
            groups += [(f"tau_{family}", shape), (f"xi_{family}", shape)]
    groups.append(('rho', (len(RHO_KEYS),)))
    return AddressBook(groups=groups, cause_labels=list(context.cause_labels), strata_rows=strata)


@dataclass
class DrawsStore:
    """
    Posterior draws for all chains

    draws has shape (chains, draws, parameters); class_counts holds, per
    chain, how often each case was allocated to each cause over kept draws.
    """
    book: AddressBook
    draws: np.ndarray
    loglik: np.ndarray
    class_counts: np.ndarray
    acceptance: List[Dict[str, float]] = field(default_factory=list)
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def n_chains(self) -> int:
        return self.draws.shape[0]

    @property
    def n_draws(self) -> int:
        return self.draws.shape[1]

    @property
    def names(self) -> List[str]:
        return self.book.names

    def param(self, name: str) -> np.ndarray:
        """(chains, draws) trace of one named scalar"""
        try:
            index = self.names.index(name)
        except ValueError:
            raise ArtifactError(f"Unknown parameter '{name}'")
        return self.draws[:, :, index]

    def group(self, group: str) -> np.ndarray:
        """(chains, draws, *shape) array of one parameter group"""
        slices = self.book.slices()
        if group not in slices:
            raise ArtifactError(f"Unknown parameter group '{group}'")
        s, shape = slices[group]
        return self.draws[:, :, s].reshape(self.n_chains, self.n_draws, *shape)

    def pooled(self) -> np.ndarray:
        """All chains stacked, shape (chains * draws, parameters)"""
        return self.draws.reshape(-1, self.draws.shape[2])

    def param_states(self):
        """Iterate ParamState for every pooled draw"""
        for vector in self.pooled():
            yield self.book.param_state(vector)

    def to_dir(self, path: Union[str, Path]) -> Path:
        """Write chain_{c}.csv, class_counts_{c}.csv and the JSON sidecar"""
        path = ensure_dir(path)
        names = self.names
        for c in range(self.n_chains):
            frame = pd.DataFrame(self.draws[c], columns=names)
            frame[LOGLIK_COLUMN] = self.loglik[c]
            write_frame(path / f"chain_{c}.csv", frame)
            counts = pd.DataFrame(self.class_counts[c].astype(int), columns=self.book.cause_labels)
            write_frame(path / f"class_counts_{c}.csv", counts)
        write_json(path / ADDRESS_BOOK_FILE, {
            'schema_version': SCHEMA_VERSION,
            'address_book': self.book.to_dict(),
            'n_chains': self.n_chains,
            'n_draws': self.n_draws,
            'acceptance': self.acceptance,
            'metadata': self.metadata,
        })
        logger.info(f"Wrote {self.n_chains} chain(s) x {self.n_draws} draws to {path}")
        return path

    @classmethod
    def from_dir(cls, path: Union[str, Path]) -> 'DrawsStore':
        path = Path(path)
        sidecar = read_json(path / ADDRESS_BOOK_FILE)
        version = str(sidecar.get('schema_version', ''))
        if version.split('.')[0] != SCHEMA_VERSION.split('.')[0]:
            raise ArtifactError(f"schema_version {version} incompatible with {SCHEMA_VERSION}")
        book = AddressBook.from_dict(sidecar['address_book'])
        names = book.names
        draws, loglik, counts = [], [], []
        for c in range(sidecar['n_chains']):
            chain_file = path / f"chain_{c}.csv"
            counts_file = path / f"class_counts_{c}.csv"
            if not chain_file.exists() or not counts_file.exists():
                raise ArtifactError(f"Missing draws for chain {c} in {path}")
            frame = pd.read_csv(chain_file, float_precision='round_trip')
            if list(frame.columns) != names + [LOGLIK_COLUMN]:
                raise ArtifactError(f"{chain_file} columns do not match the address book")
            draws.append(frame[names].to_numpy(dtype=float))
            loglik.append(frame[LOGLIK_COLUMN].to_numpy(dtype=float))
            counts.append(pd.read_csv(counts_file).to_numpy(dtype=float))
        return cls(book=book, draws=np.stack(draws), loglik=np.stack(loglik),
                   class_counts=np.stack(counts), acceptance=sidecar.get('acceptance', []),
                   metadata=sidecar.get('metadata', {}))


def assemble_store(book: AddressBook, results: Sequence, metadata: Optional[Dict] = None) -> DrawsStore:
    """Stack chain results ordered by chain index, whatever order they finished in"""
    ordered = sorted(results, key=lambda r: r.chain)
    return DrawsStore(
        book=book,
        draws=np.stack([r.draws for r in ordered]),
        loglik=np.stack([r.loglik for r in ordered]),
        class_counts=np.stack([r.class_counts for r in ordered]),
        acceptance=[r.acceptance for r in ordered],
        metadata=dict(metadata or {}),
    )
