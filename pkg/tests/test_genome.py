import numpy as np
import pytest

from ensemble_reduction.genome import (
    GENE_LENGTH,
    GENOME_LENGTH,
    Alleles,
    Gene,
    GeneLibrary,
    alleles_to_id,
    assemble_genome,
    enumerate_ensemble,
    id_to_alleles,
    property_slice,
    trend_slice,
)


def test_worked_example_id():
    assert alleles_to_id((5, 7, 13)) == 3061
    assert id_to_alleles(3061) == Alleles(5, 7, 13)


def test_id_edge_cases():
    assert alleles_to_id((0, 0, 0)) == 0
    assert alleles_to_id((23, 23, 23)) == 13823
    assert id_to_alleles(0) == (0, 0, 0)
    assert id_to_alleles(25) == (0, 1, 1)


def test_round_trip_bijection_over_all_ids():
    seen = set()
    for m in range(24**3):
        a = id_to_alleles(m)
        assert alleles_to_id(a) == m
        seen.add(tuple(a))
    assert len(seen) == 13824


@pytest.mark.parametrize("bad", [(24, 0, 0), (0, -1, 0), (0, 0, 99)])
def test_out_of_range_allele_raises(bad):
    with pytest.raises(ValueError):
        alleles_to_id(bad)


@pytest.mark.parametrize("bad", [-1, 13824])
def test_out_of_range_id_raises(bad):
    with pytest.raises(ValueError):
        id_to_alleles(bad)


def test_gene_layout():
    assert GENE_LENGTH == 44
    assert GENOME_LENGTH == 132
    assert trend_slice("stratigraphy") == slice(3, 38)
    assert trend_slice("dip") == slice(41, 44)
    assert property_slice("ntg") == slice(44, 88)


def test_gene_rejects_wrong_length():
    with pytest.raises(ValueError):
        Gene(property="sw", allele=0, knots=np.zeros(43))


def test_gene_rejects_out_of_range_allele():
    for allele in (-1, 24):
        with pytest.raises(ValueError):
            Gene(property="ntg", allele=allele, knots=np.zeros(44))
    with pytest.raises(ValueError):
        Gene(property="ntg", allele=6, knots=np.zeros(44), n_alleles=6)
    assert GeneLibrary.zeros(30).gene("phi", 29).allele == 29


def _library(seed=0):
    rng = np.random.default_rng(seed)
    return GeneLibrary(rng.normal(size=(3, 24, 44)))


def test_library_has_72_entries_with_matching_keys():
    lib = _library()
    genes = list(lib.genes())
    assert len(lib) == 72
    assert len(genes) == 72
    g = lib.gene("phi", 13)
    assert g.property == "phi" and g.allele == 13


def test_assemble_genome_concatenates_in_property_order():
    lib = _library()
    genome = assemble_genome(lib, (5, 7, 13))
    assert genome.shape == (132,)
    assert np.array_equal(genome[:44], lib.gene("sw", 5).knots)
    assert np.array_equal(genome[44:88], lib.gene("ntg", 7).knots)
    assert np.array_equal(genome[88:], lib.gene("phi", 13).knots)
    assert genome[44] == lib.gene("ntg", 7).knots[0]


def test_assemble_genome_listed_values():
    knots = np.zeros((3, 24, 44))
    knots[0, 5, :4] = [0.077, 0.024, -0.029, -0.315]
    knots[1, 7, 0] = 0.621
    knots[2, 13, 0] = -0.041
    genome = assemble_genome(GeneLibrary(knots), Alleles(5, 7, 13))
    assert list(genome[:4]) == [0.077, 0.024, -0.029, -0.315]
    assert genome[44] == 0.621
    assert genome[88] == -0.041


def test_zero_library_gives_zero_genome():
    assert not assemble_genome(GeneLibrary.zeros(), (3, 4, 5)).any()


def test_from_genes_round_trip():
    lib = _library(1)
    assert GeneLibrary.from_genes(lib.genes()).equals(lib)


def test_from_genes_incomplete_raises():
    genes = [g for g in _library().genes() if not (g.property == "ntg" and g.allele == 3)]
    with pytest.raises(ValueError):
        GeneLibrary.from_genes(genes)


def test_enumerate_ensemble_order():
    lib = _library()
    ens = enumerate_ensemble(lib)
    assert len(ens) == 13824
    assert np.array_equal(ens.ids, np.arange(13824))
    assert ens.genomes.shape == (13824, 132)
    assert np.array_equal(ens.genomes[0], assemble_genome(lib, (0, 0, 0)))
    model_id, genome = ens[3061]
    assert model_id == 3061
    assert np.array_equal(genome, assemble_genome(lib, (5, 7, 13)))
    assert tuple(ens.alleles[3061]) == (5, 7, 13)
