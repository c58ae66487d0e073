from .base import Drafter
from .model_based import ModelLinearDrafter, ModelTreeDrafter, model_draft_linear, model_draft_tree
from .pld import NgramIndex, PldDrafter, pld_draft
from .recycle import RecyclePool, RecyclingDrafter, recycle_draft
from .sam import SamDrafter, SuffixAutomaton, sam_draft, sam_extend
from .trie import ContinuationTrie, LookaheadDrafter, trie_draft

__all__ = [
    "ContinuationTrie",
    "Drafter",
    "LookaheadDrafter",
    "ModelLinearDrafter",
    "ModelTreeDrafter",
    "NgramIndex",
    "PldDrafter",
    "RecyclePool",
    "RecyclingDrafter",
    "SamDrafter",
    "SuffixAutomaton",
    "model_draft_linear",
    "model_draft_tree",
    "pld_draft",
    "recycle_draft",
    "sam_draft",
    "sam_extend",
    "trie_draft",
]
