from .graphs import GraphDataset, GraphFormatError, load_graph, load_graph_dir, make_sbm, save_graph, stratified_split
from .idx import IdxFormatError, load_mnist, parse_idx, read_idx
from .images import ImageDataset, make_blobs

__all__ = [
    "GraphDataset",
    "GraphFormatError",
    "IdxFormatError",
    "ImageDataset",
    "load_graph",
    "load_graph_dir",
    "load_mnist",
    "make_blobs",
    "make_sbm",
    "parse_idx",
    "read_idx",
    "save_graph",
    "stratified_split",
]
