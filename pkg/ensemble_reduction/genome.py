# ensemble_reduction/genome.py
from __future__ import annotations

import operator
from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple

import numpy as np

PROPERTIES: tuple[str, ...] = ("sw", "ntg", "phi")
N_ALLELES = 24

# Knot layout inside a gene: depth, stratigraphy, strike, dip.
TREND_KNOTS: tuple[tuple[str, int], ...] = (
    ("depth", 3),
    ("stratigraphy", 35),
    ("strike", 3),
    ("dip", 3),
)
GENE_LENGTH = sum(n for _, n in TREND_KNOTS)
GENOME_LENGTH = len(PROPERTIES) * GENE_LENGTH


def trend_slice(trend: str) -> slice:
    start = 0
    for name, n in TREND_KNOTS:
        if name == trend:
            return slice(start, start + n)
        start += n
    raise KeyError(f"Unknown trend: {trend}")


def property_slice(prop: str) -> slice:
    """Columns of the genome holding the gene of `prop`."""
    if prop not in PROPERTIES:
        raise KeyError(f"Unknown property: {prop}")
    i = PROPERTIES.index(prop)
    return slice(i * GENE_LENGTH, (i + 1) * GENE_LENGTH)


class Alleles(NamedTuple):
    sw: int
    ntg: int
    phi: int


def _check_allele(value: int, n_alleles: int, name: str) -> int:
    try:
        v = operator.index(value)
    except TypeError as e:
        raise ValueError(f"Allele '{name}' must be an integer, got {value!r}") from e
    if not 0 <= v < n_alleles:
        raise ValueError(f"Allele '{name}'={v} outside [0, {n_alleles - 1}]")
    return v


def check_alleles(a: Iterable[int], n_alleles: int = N_ALLELES) -> Alleles:
    vals = tuple(a)
    if len(vals) != len(PROPERTIES):
        raise ValueError(f"Expected {len(PROPERTIES)} alleles, got {len(vals)}")
    return Alleles(*(_check_allele(v, n_alleles, p) for v, p in zip(vals, PROPERTIES)))


def ensemble_size(n_alleles: int = N_ALLELES) -> int:
    return n_alleles ** len(PROPERTIES)


def alleles_to_id(a: Iterable[int], n_alleles: int = N_ALLELES) -> int:
    sw, ntg, phi = check_alleles(a, n_alleles)
    return sw * n_alleles * n_alleles + ntg * n_alleles + phi


def id_to_alleles(model_id: int, n_alleles: int = N_ALLELES) -> Alleles:
    try:
        m = operator.index(model_id)
    except TypeError as e:
        raise ValueError(f"Model id must be an integer, got {model_id!r}") from e
    if not 0 <= m < ensemble_size(n_alleles):
        raise ValueError(f"Model id {m} outside [0, {ensemble_size(n_alleles) - 1}]")
    sw, rest = divmod(m, n_alleles * n_alleles)
    ntg, phi = divmod(rest, n_alleles)
    return Alleles(sw, ntg, phi)


def _frozen(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=float, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class Gene:
    property: str
    allele: int
    knots: np.ndarray
    n_alleles: int = N_ALLELES

    def __post_init__(self) -> None:
        if self.property not in PROPERTIES:
            raise ValueError(f"Unknown property: {self.property}")
        _check_allele(self.allele, self.n_alleles, self.property)
        knots = _frozen(self.knots)
        if knots.shape != (GENE_LENGTH,):
            raise ValueError(f"Gene must hold {GENE_LENGTH} knots, got shape {knots.shape}")
        object.__setattr__(self, "knots", knots)

    def trend(self, name: str) -> np.ndarray:
        return self.knots[trend_slice(name)]


@dataclass(frozen=True, eq=False)
class GeneLibrary:
    """
    Candidate genes of every property, stored as a
    (n_properties, n_alleles, GENE_LENGTH) array in PROPERTIES order.
    """

    knots: np.ndarray

    def __post_init__(self) -> None:
        knots = _frozen(self.knots)
        if knots.ndim != 3 or knots.shape[0] != len(PROPERTIES) or knots.shape[2] != GENE_LENGTH:
            raise ValueError(
                f"Gene library must have shape ({len(PROPERTIES)}, n_alleles, {GENE_LENGTH}), "
                f"got {knots.shape}"
            )
        if knots.shape[1] < 1:
            raise ValueError("Gene library needs at least one allele per property.")
        object.__setattr__(self, "knots", knots)

    @property
    def n_alleles(self) -> int:
        return int(self.knots.shape[1])

    def __len__(self) -> int:
        return self.knots.shape[0] * self.knots.shape[1]

    def gene(self, prop: str, allele: int) -> Gene:
        if prop not in PROPERTIES:
            raise KeyError(f"Unknown property: {prop}")
        a = _check_allele(allele, self.n_alleles, prop)
        return Gene(
            property=prop,
            allele=a,
            knots=self.knots[PROPERTIES.index(prop), a],
            n_alleles=self.n_alleles,
        )

    def genes(self) -> Iterator[Gene]:
        for prop in PROPERTIES:
            for a in range(self.n_alleles):
                yield self.gene(prop, a)

    def equals(self, other: GeneLibrary) -> bool:
        return np.array_equal(self.knots, other.knots)

    @classmethod
    def zeros(cls, n_alleles: int = N_ALLELES) -> GeneLibrary:
        return cls(np.zeros((len(PROPERTIES), n_alleles, GENE_LENGTH)))

    @classmethod
    def from_genes(cls, genes: Iterable[Gene]) -> GeneLibrary:
        by_key = {}
        for g in genes:
            key = (g.property, g.allele)
            if key in by_key:
                raise ValueError(f"Duplicate gene for {key}")
            by_key[key] = g.knots
        n_alleles = 1 + max((a for _, a in by_key), default=-1)
        missing = [(p, a) for p in PROPERTIES for a in range(n_alleles) if (p, a) not in by_key]
        if missing or n_alleles == 0:
            raise ValueError(f"Incomplete gene library, missing: {missing[:10]}")
        knots = np.stack(
            [np.stack([by_key[(p, a)] for a in range(n_alleles)]) for p in PROPERTIES]
        )
        return cls(knots)


def assemble_genome(lib: GeneLibrary, a: Iterable[int]) -> np.ndarray:
    """sw gene, then ntg gene, then phi gene."""
    alleles = check_alleles(a, lib.n_alleles)
    return np.concatenate([lib.knots[i, allele] for i, allele in enumerate(alleles)])


@dataclass(frozen=True, eq=False)
class Ensemble:
    """All allele combinations of a library, ordered by ascending model id."""

    ids: np.ndarray
    alleles: np.ndarray
    genomes: np.ndarray

    def __len__(self) -> int:
        return len(self.ids)

    def __getitem__(self, i: int) -> tuple[int, np.ndarray]:
        return int(self.ids[i]), self.genomes[i]

    def __iter__(self) -> Iterator[tuple[int, np.ndarray]]:
        for i in range(len(self)):
            yield self[i]


def enumerate_ensemble(lib: GeneLibrary) -> Ensemble:
    n = lib.n_alleles
    ids = np.arange(ensemble_size(n), dtype=np.int64)
    alleles = np.stack(np.unravel_index(ids, (n,) * len(PROPERTIES)), axis=1).astype(np.int64)
    genomes = np.concatenate(
        [lib.knots[i][alleles[:, i]] for i in range(len(PROPERTIES))], axis=1
    )
    for arr in (ids, alleles, genomes):
        arr.setflags(write=False)
    return Ensemble(ids=ids, alleles=alleles, genomes=genomes)
