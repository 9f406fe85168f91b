#!/usr/bin/env python3
"""Extract last-layer embeddings from a pre-trained vision model.

Runs a torchvision model over a folder dataset (one subdirectory per class)
and writes the pooled pre-head embeddings as a FEAT file, plus optionally
the softmaxed classifier probabilities as a second FEAT file, for ingestion
by the face-rank toolkit.

    python3 extract.py --model mobilenet_v3_small --data ./images \
        --out feats.feat [--preds preds.feat] [--batch 64]

Embedding hook point per architecture family (the tensor feeding the
classifier head, i.e. after global pooling):

    resnet*, resnext*, shufflenet*, regnet*, googlenet, inception  -> .fc input
    mobilenet*, densenet*, efficientnet*, convnext*, mnasnet       -> .classifier input
    vgg*   -> .classifier input, which is the flattened conv stack
              (25088-d for the stock 224px models; VGG has no pooled
              bottleneck in front of its MLP head)
    vit_*, swin_*                                                  -> .heads/.head input

If the captured tensor still has spatial extent (e.g. squeezenet's
convolutional head), it is global-average-pooled to (batch, channels).

Rows follow the dataset's deterministic order: class subdirectories sorted
by name, files sorted by name within each class. Repeated runs of the same
job produce byte-identical files (eval mode, no augmentation, fixed batch
layout, and a fixed init seed when running with --weights none).
"""

import argparse
import struct
import sys
from pathlib import Path

import numpy as np
import torch
from PIL import Image
from torchvision import transforms
from torchvision.models import get_model

FEAT_MAGIC = b"FACE"
FEAT_VERSION = 1
_HEADER = struct.Struct("<4sHBBQQ")

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".webp"}

# ImageNet statistics; applied regardless of weights so runs are comparable
NORM_MEAN = (0.485, 0.456, 0.406)
NORM_STD = (0.229, 0.224, 0.225)


def write_feat(matrix: np.ndarray, labels: np.ndarray, path) -> None:
    """Write an n x d float32 matrix plus u32 labels in FEAT layout."""
    matrix = np.ascontiguousarray(matrix, dtype="<f4")
    labels = np.ascontiguousarray(labels, dtype="<u4")
    n, d = matrix.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(FEAT_MAGIC, FEAT_VERSION, 0, 0, n, d))
        fh.write(matrix.tobytes())
        fh.write(labels.tobytes())


def list_dataset(root) -> tuple[list[Path], np.ndarray, list[str]]:
    """Deterministic (paths, labels, class_names) for a folder dataset."""
    root = Path(root)
    classes = sorted(p.name for p in root.iterdir() if p.is_dir())
    if not classes:
        raise SystemExit(f"extract: no class subdirectories under {root}")
    paths, labels = [], []
    for idx, name in enumerate(classes):
        files = sorted(p for p in (root / name).iterdir()
                       if p.suffix.lower() in IMAGE_SUFFIXES)
        if not files:
            raise SystemExit(f"extract: class directory {name!r} has no images")
        paths.extend(files)
        labels.extend([idx] * len(files))
    return paths, np.asarray(labels, dtype=np.int64), classes


def resolve_head(model: torch.nn.Module) -> torch.nn.Module:
    for attr in ("fc", "classifier", "heads", "head"):
        head = getattr(model, attr, None)
        if isinstance(head, torch.nn.Module):
            return head
    raise SystemExit(
        f"extract: cannot locate the classifier head of "
        f"{type(model).__name__}; expected one of .fc/.classifier/.heads/.head")


def extract(args) -> int:
    if args.weights == "none":
        torch.manual_seed(args.init_seed)
        model = get_model(args.model, weights=None)
    else:
        model = get_model(args.model, weights=args.weights)
    model.eval()
    device = torch.device(args.device)
    model.to(device)

    captured = []
    head = resolve_head(model)

    def grab(module, inputs):
        h = inputs[0]
        if h.dim() > 2:  # conv head: pool any remaining spatial extent
            h = h.flatten(2).mean(dim=2)
        captured.append(h.detach().cpu())

    hook = head.register_forward_pre_hook(grab)

    paths, labels, classes = list_dataset(args.data)
    prep = transforms.Compose([
        transforms.Resize((args.img_size, args.img_size)),
        transforms.ToTensor(),
        transforms.Normalize(NORM_MEAN, NORM_STD),
    ])

    probs_chunks = []
    with torch.no_grad():
        for start in range(0, len(paths), args.batch):
            batch_paths = paths[start:start + args.batch]
            batch = torch.stack([
                prep(Image.open(p).convert("RGB")) for p in batch_paths
            ]).to(device)
            logits = model(batch)
            if args.preds:
                probs_chunks.append(
                    torch.softmax(logits, dim=1).cpu().to(torch.float32))
    hook.remove()

    feats = torch.cat(captured).to(torch.float32).numpy()
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_feat(feats, labels, out)
    print(f"extract: wrote {feats.shape[0]}x{feats.shape[1]} embeddings "
          f"({len(classes)} classes) to {out}")

    if args.preds:
        probs = torch.cat(probs_chunks).numpy()
        write_feat(probs, labels, args.preds)
        print(f"extract: wrote {probs.shape[0]}x{probs.shape[1]} "
              f"probabilities to {args.preds}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    parser.add_argument("--model", required=True,
                        help="torchvision model name, e.g. resnet18")
    parser.add_argument("--data", required=True,
                        help="dataset root: one subdirectory per class")
    parser.add_argument("--out", required=True, help="output FEAT path")
    parser.add_argument("--preds", help="optional FEAT path for softmax "
                                        "probabilities of the model head")
    parser.add_argument("--batch", type=int, default=64)
    parser.add_argument("--img-size", type=int, default=224)
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--weights", default="DEFAULT",
                        help="torchvision weights id, or 'none' for a "
                             "randomly initialized network")
    parser.add_argument("--init-seed", type=int, default=0,
                        help="weight init seed when --weights none")
    return parser


def main(argv=None) -> int:
    return extract(build_parser().parse_args(argv))


if __name__ == "__main__":
    sys.exit(main())
