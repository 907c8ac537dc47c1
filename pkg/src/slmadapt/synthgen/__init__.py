from slmadapt.synthgen.backends import (
    CallableBackend,
    GenerationBackend,
    GenerationRequest,
    HttpGenerationBackend,
    MockGenerationBackend,
)
from slmadapt.synthgen.campaign import (
    CampaignResult,
    GenerationRecord,
    GenerationStatus,
    fixed_clock,
    generate_for_context,
    run_generation_campaign,
)
from slmadapt.synthgen.dedup import DedupCluster, DedupReport, dedup_filter, jaccard
from slmadapt.synthgen.grammar import parse_generation, render_pairs, scan_blocks
from slmadapt.synthgen.prompt import GenerationConfig, PromptBundle, PromptError, build_prompt, select_exemplars

__all__ = [
    "CallableBackend",
    "CampaignResult",
    "DedupCluster",
    "DedupReport",
    "GenerationBackend",
    "GenerationConfig",
    "GenerationRecord",
    "GenerationRequest",
    "GenerationStatus",
    "HttpGenerationBackend",
    "MockGenerationBackend",
    "PromptBundle",
    "PromptError",
    "build_prompt",
    "dedup_filter",
    "fixed_clock",
    "generate_for_context",
    "jaccard",
    "parse_generation",
    "render_pairs",
    "run_generation_campaign",
    "scan_blocks",
    "select_exemplars",
]
