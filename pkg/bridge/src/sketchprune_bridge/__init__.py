"""Bridge between PyTorch checkpoints and the sketchprune archive format."""

from .demo import Dataset, finetune_demo, make_dataset, pretrain_toy, toy_manifest, train
from .export import ExportSpec, export_checkpoint
from .formats import Archive, BridgeError, load_archive, save_archive
from .models import ManifestNet, dummy_forward, import_archive, load_weights

__version__ = "0.1.0"

__all__ = [
    "Archive",
    "BridgeError",
    "load_archive",
    "save_archive",
    "ExportSpec",
    "export_checkpoint",
    "ManifestNet",
    "import_archive",
    "load_weights",
    "dummy_forward",
    "Dataset",
    "make_dataset",
    "toy_manifest",
    "pretrain_toy",
    "train",
    "finetune_demo",
    "__version__",
]
