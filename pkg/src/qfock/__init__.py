"""Numerical lab for truncated mixed q-Gaussian and q-Araki-Woods Fock spaces."""

from .errors import (
    CacheError,
    ConsistencyError,
    DegeneracyError,
    DomainError,
    PreconditionError,
    QFockError,
    SizeError,
    TruncationError,
    UnsupportedModeError,
)
from .fock import VACUUM, FockBasis, Word, enumerate_basis, index_word, word_index
from .operators import BlockOperator, FockModel
from .qgram import GramSeries, QMatrix, gram_block, gram_naive, gram_recursive
from .qops import MixedModel, build_generator, commutator_blocks, pair_partition_moment, vacuum_moment
from .wick import conjugate_J, right_wick, wick_crossing
from .arakiwoods import AWModel, modular_data, thm44_chain_check

__all__ = [
    "AWModel",
    "BlockOperator",
    "CacheError",
    "ConsistencyError",
    "DegeneracyError",
    "DomainError",
    "FockBasis",
    "FockModel",
    "GramSeries",
    "MixedModel",
    "PreconditionError",
    "QFockError",
    "QMatrix",
    "SizeError",
    "TruncationError",
    "UnsupportedModeError",
    "VACUUM",
    "Word",
    "build_generator",
    "commutator_blocks",
    "conjugate_J",
    "enumerate_basis",
    "gram_block",
    "gram_naive",
    "gram_recursive",
    "index_word",
    "modular_data",
    "pair_partition_moment",
    "right_wick",
    "thm44_chain_check",
    "vacuum_moment",
    "wick_crossing",
    "word_index",
]
