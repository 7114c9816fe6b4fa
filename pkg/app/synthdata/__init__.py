"""Synthetic multi-label scenes, proposals and the dataset file format."""
from app.synthdata.dataset_io import (
    DatasetManifest,
    generate_dataset,
    ingest_proposals,
    load_dataset,
    read_manifest,
    read_split,
    write_dataset,
    write_split,
)
from app.synthdata.proposals import generate_proposals
from app.synthdata.scenes import generate_scene
from app.synthdata.types import Proposal, Scene, SceneObject, box_iou

__all__ = [
    "DatasetManifest",
    "Proposal",
    "Scene",
    "SceneObject",
    "box_iou",
    "generate_dataset",
    "generate_proposals",
    "generate_scene",
    "ingest_proposals",
    "load_dataset",
    "read_manifest",
    "read_split",
    "write_dataset",
    "write_split",
]
