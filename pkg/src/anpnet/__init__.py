"""Interpretable adjective-noun pair fusion classifier with Deep Taylor relevance."""

from .analysis import (
    AnrRecord,
    Mode,
    Orientation,
    Profile,
    anr_of_report,
    anr_table,
    classify_orientation,
    contribution_profiles,
    related_concepts,
    visually_equivalent,
)
from .dataio import Dataset, Sample, SynthConfig, Vocabulary, stratified_split, synth_generate
from .fusion import FusionNetwork, TrainConfig, build_anpnet, load_checkpoint, predict, save_checkpoint, train
from .relevance import RelevanceReport, explain

__version__ = "0.1.0"
