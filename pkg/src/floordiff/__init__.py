"""Graph-conditioned diffusion over vector floorplan polygons, in plain numpy."""

from .floorplan import BubbleDiagram, ComponentType, Door, Floorplan, Loop
from .denoiser import DenoiserConfig, Model
from .diffusion import cosine_schedule, sample, sample_batch
from .evaluate import compatibility, reconstruct_bubble_diagram
from .training import TrainConfig, Trainer, load_model

__all__ = [
    "BubbleDiagram", "ComponentType", "Door", "Floorplan", "Loop",
    "DenoiserConfig", "Model", "cosine_schedule", "sample", "sample_batch",
    "compatibility", "reconstruct_bubble_diagram", "TrainConfig", "Trainer", "load_model",
]

__version__ = "0.1.0"
