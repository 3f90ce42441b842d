from .clients import AggregateResult, LweClient, NvClient, OpsTally, PwClient
from .messages import (
    BUS_SENDER,
    ChunkSharePayload,
    ContributorSetPayload,
    MsgKind,
    ProtocolMessage,
    PubKeyPayload,
    SECRET_DH_KEY,
    SECRET_PERSONAL_SEED,
    ShareVectorPayload,
    UnmaskEntry,
    UnmaskPayload,
    VectorPayload,
)
from .rounds import (
    LWE,
    NV,
    PW,
    ROUND_FNS,
    STAGES,
    RoundConfig,
    client_on_message,
    contributor_set,
    default_threshold,
    lwe_round,
    nv_round,
    pw_round,
    run_round,
)

__all__ = [
    "AggregateResult", "LweClient", "NvClient", "OpsTally", "PwClient",
    "BUS_SENDER", "ChunkSharePayload", "ContributorSetPayload", "MsgKind",
    "ProtocolMessage", "PubKeyPayload", "SECRET_DH_KEY",
    "SECRET_PERSONAL_SEED", "ShareVectorPayload", "UnmaskEntry",
    "UnmaskPayload", "VectorPayload",
    "LWE", "NV", "PW", "ROUND_FNS", "STAGES", "RoundConfig",
    "client_on_message", "contributor_set", "default_threshold",
    "lwe_round", "nv_round", "pw_round", "run_round",
]
