import pytest
import os
import sys

# Add project root to sys.path to allow importing src modules
project_root = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
sys.path.insert(0, project_root)

from src.constraints import MatchingFamily, Rank1Family
from src.data_models import InstanceSequence
from src.ocrs.ocrs_factory import SCHEMES, create_ocrs
from src.ocrs.perfect_selector import PerfectSelector
from src.ocrs.subfamily_ocrs import MatchingOcrs, Rank1Ocrs
from src.ocrs.temporal_ocrs import TemporalOcrs

SEQ = InstanceSequence.from_lists([1, 1, 1], [0, 1, 2])


def test_create_rank1_without_wrapper():
    scheme = create_ocrs("rank1", Rank1Family(3), temporal=False)
    assert isinstance(scheme, Rank1Ocrs)
    assert not isinstance(scheme, TemporalOcrs)


def test_create_rank1_with_wrapper():
    scheme = create_ocrs("rank1", Rank1Family(3), SEQ)
    assert isinstance(scheme, TemporalOcrs)
    assert isinstance(scheme.base, Rank1Ocrs)


def test_create_matching_case_insensitive():
    family = MatchingFamily([("a", "b"), ("b", "c"), ("c", "d")])
    scheme = create_ocrs("Matching", family, SEQ, b=0.5)
    assert isinstance(scheme.base, MatchingOcrs)
    assert scheme.b == 0.5


def test_create_perfect_selector():
    assert isinstance(create_ocrs("PERFECT", Rank1Family(3), SEQ), PerfectSelector)
    with pytest.raises(ValueError):
        create_ocrs("perfect", Rank1Family(3))


def test_wrapper_needs_sequence():
    with pytest.raises(ValueError):
        create_ocrs("rank1", Rank1Family(3))


def test_unknown_scheme():
    with pytest.raises(ValueError) as e:
        create_ocrs("knapsack", Rank1Family(3), SEQ)
    assert "Unknown OCRS scheme" in str(e.value)
    assert "knapsack" not in SCHEMES
