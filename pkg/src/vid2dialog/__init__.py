"""
Turn instructional videos (narrated or step-annotated) into multi-turn
user/expert task dialogues, and benchmark assistants on the result.
"""

from .dataset import Session, assemble, compute_stats, read_dataset, stratified_split, write_dataset
from .dialogue import ActionType, Conversation, DialogueTurn, SpeechStyle, TurnKind, generate, validate
from .ingest import (
    ErrorLabel,
    SourceKind,
    SourceRecording,
    StepAnnotation,
    SubtitleEntry,
    TimeSpan,
    load_manifest,
    parse_step_annotation_file,
    parse_subtitle_file,
)
from .instruction import (
    InstructionSet,
    InstructionStep,
    cluster_and_filter_steps,
    extract_from_narration,
    mark_corrections,
    normalize_annotated_steps,
)
from .llm import Cassette, LiveBackend, PromptRequest, RecordBackend, ReplayBackend
from .localize import StepSpanMap, attach_clips, emit_cutlist, localize_direct, localize_from_subtitles, score_segmentation

__version__ = "0.1.0"
