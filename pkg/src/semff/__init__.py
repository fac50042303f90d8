"""Semantic fast-forward of first-person videos.

Frames are chosen per segment by a weighted, locality-constrained sparse
reconstruction of the segment, then topped up by inserting frames into the
least stable transitions.
"""

__version__ = "0.1.0"

from .config import PipelineConfig, load_config
from .descriptor import (DESCRIPTOR_SIZE, FlowField, FrameDescriptor, MotionProfile, abrupt_motion_mask,
                         appearance_descriptor, compute_dense_flow, content_descriptor,
                         cumulative_displacement_curves, describe_frame, flow_histograms,
                         sequence_descriptor)
from .ingest import (Detection, DetectionSet, FrameSequence, InputError, load_detections,
                     load_feature_matrix, load_frame_sequence, save_feature_matrix)
from .metrics import (EvaluationReport, appearance_cost_cv, instability_index, semantic_retention,
                      speedup_deviation)
from .sampler import (ActivationResult, SegmentDictionary, activated_frames, adjust_lambda,
                      build_dictionary, num_of_frames, sample_segment, solve_weighted_llc)
from .semantics import SegmentPlan, SemanticProfile, allocate_speedups, build_profile, segment_profile, semantic_score
from .sft import (AppearanceModel, Saturated, SelectionTimeline, best_insert_frame, color_histogram, emd_1d,
                  find_shakiest_transition, instability, smooth_transitions)
