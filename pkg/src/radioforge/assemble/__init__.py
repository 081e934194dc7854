"""Frame synthesis, archiving and batch orchestration."""

from .frame import (
    ReceiverFrame,
    SignalTruth,
    TxSegment,
    frame_name,
    generate_frame,
    link_channel,
    synthesize_frame,
    transmit_segment,
)

__all__ = [
    "ReceiverFrame", "SignalTruth", "TxSegment", "frame_name", "generate_frame", "link_channel",
    "synthesize_frame", "transmit_segment",
]

from .batch import build_manifest, dataset_stats, run_batch, total_frames, worker_cap  # noqa: E402
from .io import read_annotation, read_iq, write_frame  # noqa: E402

__all__ += ["build_manifest", "dataset_stats", "read_annotation", "read_iq", "run_batch", "total_frames",
            "worker_cap", "write_frame"]
