"""Sparsity-exploiting erasure coding for versioned data.

Successive versions of an object are stored as a full first version
plus encoded differences.  When a difference is sparse it can be read
back from fewer shares than a full object needs.
"""

from .codec import (
    CodeParams,
    DeltaRecord,
    EncodedVersion,
    IoReport,
    Mode,
    SparseDecoder,
    StoredAs,
    VersionedArchive,
    compute_sparsity,
    decode_full,
    decode_sparse,
    encode_archive,
    read_cost,
    retrieval_plan,
    retrieve,
    retrieve_prefix,
)
from .errors import *  # noqa: F401,F403
from .gf import GF, FieldElement, field
from .linalg import GfMatrix, cauchy, satisfies_criterion2
from .placement import FailurePattern, Placement, PlacementMap
from .resilience import FailureModel, archive_retention, census, loss_prob_delta_nonsys, loss_prob_delta_sys, loss_prob_full
from .sim import SparsityPmf, TrialConfig, expected_io_latest, expected_io_pair, monte_carlo_mu, scenario_l5
from .store import Manifest, open_archive, read_shares, write_archive

__version__ = "0.1.0"
