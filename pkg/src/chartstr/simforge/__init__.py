"""LLM-driven chart simulation with sandboxed self-inspection."""

from .llm import HttpChatClient, LlmClient, LlmTransport, MockLlmClient, strip_code_fences
from .pipeline import (
    ConfigInvalid,
    ManifestEntry,
    PipelineConfig,
    SimManifest,
    ValidationFailed,
    generate_label,
    generate_script,
    run_pipeline,
    validate_label,
)
from .prompts import DATA_TEMPLATE, IMAGE_TEMPLATE, PromptTemplate
from .sandbox import (
    NoImageProduced,
    NonzeroExit,
    SandboxConfig,
    Timeout,
    VerificationError,
    VerifyResult,
    verify_script,
)

__all__ = [
    "HttpChatClient",
    "LlmClient",
    "LlmTransport",
    "MockLlmClient",
    "strip_code_fences",
    "ConfigInvalid",
    "ManifestEntry",
    "PipelineConfig",
    "SimManifest",
    "ValidationFailed",
    "generate_label",
    "generate_script",
    "run_pipeline",
    "validate_label",
    "DATA_TEMPLATE",
    "IMAGE_TEMPLATE",
    "PromptTemplate",
    "NoImageProduced",
    "NonzeroExit",
    "SandboxConfig",
    "Timeout",
    "VerificationError",
    "VerifyResult",
    "verify_script",
]
