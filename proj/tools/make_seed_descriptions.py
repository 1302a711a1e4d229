#!/usr/bin/env python3
"""Author the seed architecture descriptions shipped in data/seeds/.

Each TorchVision 0.7 classification model is written out as a flat list of
atomic layers. Classifier heads are resized to 10 classes. Branching blocks
are linearized along one canonical path:

  * residual additions are dropped (main path kept, downsample skipped);
  * concatenating blocks (dense layers, Inception, Fire, ShuffleNet units)
    follow one branch whose first layer consumes the full path width and
    whose last convolution emits the concatenated width, so every tensor
    boundary on the path keeps the channel count of the real network;
  * functional global pooling (`x.mean([2, 3])`, F.adaptive_avg_pool2d) is
    written as ADAPTIVEAVGPOOL2D(1) followed by an explicit FLATTEN;
  * ceil-mode pooling is written with floor semantics.

Output is canonical: keys sorted, two-space indent, trailing newline.

Usage: make_seed_descriptions.py [OUT_DIR]
"""

import json
import math
import pathlib
import sys

NUM_CLASSES = 10
INPUT_SHAPE = [3, 224, 224]


class Builder:
    def __init__(self):
        self.layers = []
        self.channels = 3

    def add(self, op, **components):
        self.layers.append({"op": op, "components": components})

    def conv(self, out, k, s=1, p=0, groups=1, bias=False, inp=None):
        inp = self.channels if inp is None else inp
        self.add("CONV2D", in_channels=inp, out_channels=out, kernel_size=k,
                 stride=s, padding=p, groups=groups, bias=int(bias))
        self.channels = out

    def bn(self):
        self.add("BATCHNORM2D", num_features=self.channels)

    def relu(self):
        self.add("RELU")

    def relu6(self):
        self.add("RELU6")

    def maxpool(self, k, s, p=0):
        self.add("MAXPOOL2D", kernel_size=k, stride=s, padding=p)

    def avgpool(self, k, s, p=0):
        self.add("AVGPOOL2D", kernel_size=k, stride=s, padding=p)

    def adaptive(self, size):
        self.add("ADAPTIVEAVGPOOL2D", output_size=size)

    def flatten(self, features):
        self.add("FLATTEN")
        self.channels = features

    def dropout(self, p):
        self.add("DROPOUT", dropout_p=p)

    def linear(self, out):
        self.add("LINEAR", in_features=self.channels, out_features=out)
        self.channels = out

    def shuffle(self, groups):
        self.add("CHANNELSHUFFLE", groups=groups)

    def global_pool_head(self, dropout=None):
        c = self.channels
        self.adaptive(1)
        self.flatten(c)
        if dropout is not None:
            self.dropout(dropout)
        self.linear(NUM_CLASSES)


def alexnet():
    b = Builder()
    b.conv(64, 11, 4, 2, bias=True); b.relu(); b.maxpool(3, 2)
    b.conv(192, 5, 1, 2, bias=True); b.relu(); b.maxpool(3, 2)
    b.conv(384, 3, 1, 1, bias=True); b.relu()
    b.conv(256, 3, 1, 1, bias=True); b.relu()
    b.conv(256, 3, 1, 1, bias=True); b.relu(); b.maxpool(3, 2)
    b.adaptive(6)
    b.flatten(256 * 6 * 6)
    b.dropout(0.5); b.linear(4096); b.relu()
    b.dropout(0.5); b.linear(4096); b.relu()
    b.linear(NUM_CLASSES)
    return b


VGG_CFGS = {
    "vgg11": [64, "M", 128, "M", 256, 256, "M", 512, 512, "M", 512, 512, "M"],
    "vgg13": [64, 64, "M", 128, 128, "M", 256, 256, "M", 512, 512, "M", 512, 512, "M"],
    "vgg16": [64, 64, "M", 128, 128, "M", 256, 256, 256, "M", 512, 512, 512, "M",
              512, 512, 512, "M"],
    "vgg19": [64, 64, "M", 128, 128, "M", 256, 256, 256, 256, "M", 512, 512, 512, 512, "M",
              512, 512, 512, 512, "M"],
}


def vgg(cfg, batch_norm):
    b = Builder()
    for v in cfg:
        if v == "M":
            b.maxpool(2, 2)
        else:
            b.conv(v, 3, 1, 1, bias=True)
            if batch_norm:
                b.bn()
            b.relu()
    b.adaptive(7)
    b.flatten(512 * 7 * 7)
    b.linear(4096); b.relu(); b.dropout(0.5)
    b.linear(4096); b.relu(); b.dropout(0.5)
    b.linear(NUM_CLASSES)
    return b


def resnet(block, layers, groups=1, width_per_group=64):
    b = Builder()
    b.conv(64, 7, 2, 3); b.bn(); b.relu(); b.maxpool(3, 2, 1)
    expansion = 1 if block == "basic" else 4
    for planes, blocks, stride in zip((64, 128, 256, 512), layers, (1, 2, 2, 2)):
        for i in range(blocks):
            s = stride if i == 0 else 1
            if block == "basic":
                b.conv(planes, 3, s, 1); b.bn(); b.relu()
                b.conv(planes, 3, 1, 1); b.bn(); b.relu()
            else:
                width = int(planes * (width_per_group / 64.0)) * groups
                b.conv(width, 1); b.bn(); b.relu()
                b.conv(width, 3, s, 1, groups=groups); b.bn(); b.relu()
                b.conv(planes * expansion, 1); b.bn(); b.relu()
    b.global_pool_head()
    return b


def densenet(growth, block_config, init_features, bn_size=4):
    b = Builder()
    b.conv(init_features, 7, 2, 3); b.bn(); b.relu(); b.maxpool(3, 2, 1)
    c = init_features
    for i, n in enumerate(block_config):
        for _ in range(n):
            b.bn(); b.relu()
            b.conv(bn_size * growth, 1); b.bn(); b.relu()
            b.conv(c + growth, 3, 1, 1)
            c += growth
        if i != len(block_config) - 1:
            b.bn(); b.relu()
            b.conv(c // 2, 1)
            b.avgpool(2, 2)
            c //= 2
    b.bn(); b.relu()
    b.global_pool_head()
    return b


def googlenet():
    b = Builder()

    def basic(out, k, s=1, p=0):
        b.conv(out, k, s, p); b.bn(); b.relu()

    def inception(ch1, ch3red, ch3, ch5red, ch5, pool_proj):
        basic(ch3red, 1)
        basic(ch1 + ch3 + ch5 + pool_proj, 3, 1, 1)

    basic(64, 7, 2, 3); b.maxpool(3, 2)
    basic(64, 1); basic(192, 3, 1, 1); b.maxpool(3, 2)
    inception(64, 96, 128, 16, 32, 32)
    inception(128, 128, 192, 32, 96, 64)
    b.maxpool(3, 2)
    inception(192, 96, 208, 16, 48, 64)
    inception(160, 112, 224, 24, 64, 64)
    inception(128, 128, 256, 24, 64, 64)
    inception(112, 144, 288, 32, 64, 64)
    inception(256, 160, 320, 32, 128, 128)
    b.maxpool(2, 2)
    inception(256, 160, 320, 32, 128, 128)
    inception(384, 192, 384, 48, 128, 128)
    b.global_pool_head(dropout=0.2)
    return b


def mobilenet_v2():
    b = Builder()
    b.conv(32, 3, 2, 1); b.bn(); b.relu6()
    settings = [(1, 16, 1, 1), (6, 24, 2, 2), (6, 32, 3, 2), (6, 64, 4, 2),
                (6, 96, 3, 1), (6, 160, 3, 2), (6, 320, 1, 1)]
    for t, c, n, s in settings:
        for i in range(n):
            stride = s if i == 0 else 1
            hidden = int(round(b.channels * t))
            if t != 1:
                b.conv(hidden, 1); b.bn(); b.relu6()
            b.conv(hidden, 3, stride, 1, groups=hidden); b.bn(); b.relu6()
            b.conv(c, 1); b.bn()
    b.conv(1280, 1); b.bn(); b.relu6()
    b.global_pool_head(dropout=0.2)
    return b


def _round_to_multiple_of(val, divisor, round_up_bias=0.9):
    new_val = max(divisor, int(val + divisor / 2) // divisor * divisor)
    return new_val if new_val >= round_up_bias * val else new_val + divisor


def mnasnet(alpha):
    d = [_round_to_multiple_of(x * alpha, 8) for x in (32, 16, 24, 40, 80, 96, 192, 320)]
    b = Builder()
    b.conv(d[0], 3, 2, 1); b.bn(); b.relu()
    b.conv(d[0], 3, 1, 1, groups=d[0]); b.bn(); b.relu()
    b.conv(d[1], 1); b.bn()
    stacks = [(d[2], 3, 2, 3, 3), (d[3], 5, 2, 3, 3), (d[4], 5, 2, 6, 3),
              (d[5], 3, 1, 6, 2), (d[6], 5, 2, 6, 4), (d[7], 3, 1, 6, 1)]
    for out, k, stride, expansion, repeats in stacks:
        for i in range(repeats):
            s = stride if i == 0 else 1
            mid = b.channels * expansion
            b.conv(mid, 1); b.bn(); b.relu()
            b.conv(mid, k, s, k // 2, groups=mid); b.bn(); b.relu()
            b.conv(out, 1); b.bn()
    b.conv(1280, 1); b.bn(); b.relu()
    b.global_pool_head(dropout=0.2)
    return b


SHUFFLE_CHANNELS = {
    "shufflenet_v2_x0_5": [24, 48, 96, 192, 1024],
    "shufflenet_v2_x1_0": [24, 116, 232, 464, 1024],
    "shufflenet_v2_x1_5": [24, 176, 352, 704, 1024],
    "shufflenet_v2_x2_0": [24, 244, 488, 976, 2048],
}


def shufflenet_v2(channels):
    b = Builder()
    b.conv(channels[0], 3, 2, 1); b.bn(); b.relu(); b.maxpool(3, 2, 1)
    for repeats, out in zip((4, 8, 4), channels[1:4]):
        for i in range(repeats):
            stride = 2 if i == 0 else 1
            branch = out // 2
            b.conv(branch, 1); b.bn(); b.relu()
            b.conv(branch, 3, stride, 1, groups=branch); b.bn()
            b.conv(out, 1, inp=branch); b.bn(); b.relu()
            b.shuffle(2)
    b.conv(channels[4], 1); b.bn(); b.relu()
    b.global_pool_head()
    return b


def squeezenet(version):
    b = Builder()

    def fire(squeeze, e1, e3):
        b.conv(squeeze, 1, bias=True); b.relu()
        b.conv(e1 + e3, 3, 1, 1, bias=True); b.relu()

    if version == "1_0":
        b.conv(96, 7, 2, bias=True); b.relu(); b.maxpool(3, 2)
        fire(16, 64, 64); fire(16, 64, 64); fire(32, 128, 128); b.maxpool(3, 2)
        fire(32, 128, 128); fire(48, 192, 192); fire(48, 192, 192); fire(64, 256, 256)
        b.maxpool(3, 2)
        fire(64, 256, 256)
    else:
        b.conv(64, 3, 2, bias=True); b.relu(); b.maxpool(3, 2)
        fire(16, 64, 64); fire(16, 64, 64); b.maxpool(3, 2)
        fire(32, 128, 128); fire(32, 128, 128); b.maxpool(3, 2)
        fire(48, 192, 192); fire(48, 192, 192); fire(64, 256, 256); fire(64, 256, 256)
    # The 1x1 convolutional classifier followed by global pooling is written
    # as global pooling followed by the equivalent linear layer.
    b.dropout(0.5)
    b.global_pool_head()
    return b


def seeds():
    out = {"alexnet": alexnet(), "googlenet": googlenet(), "mobilenet_v2": mobilenet_v2()}
    for name, cfg in VGG_CFGS.items():
        out[name] = vgg(cfg, False)
        out[name + "_bn"] = vgg(cfg, True)
    out["resnet18"] = resnet("basic", [2, 2, 2, 2])
    out["resnet34"] = resnet("basic", [3, 4, 6, 3])
    out["resnet50"] = resnet("bottleneck", [3, 4, 6, 3])
    out["resnet101"] = resnet("bottleneck", [3, 4, 23, 3])
    out["resnet152"] = resnet("bottleneck", [3, 8, 36, 3])
    out["resnext50_32x4d"] = resnet("bottleneck", [3, 4, 6, 3], groups=32, width_per_group=4)
    out["resnext101_32x8d"] = resnet("bottleneck", [3, 4, 23, 3], groups=32, width_per_group=8)
    out["wide_resnet50_2"] = resnet("bottleneck", [3, 4, 6, 3], width_per_group=128)
    out["wide_resnet101_2"] = resnet("bottleneck", [3, 4, 23, 3], width_per_group=128)
    out["densenet121"] = densenet(32, (6, 12, 24, 16), 64)
    out["densenet161"] = densenet(48, (6, 12, 36, 24), 96)
    out["densenet169"] = densenet(32, (6, 12, 32, 32), 64)
    out["densenet201"] = densenet(32, (6, 12, 48, 32), 64)
    for alpha, tag in ((0.5, "0_5"), (0.75, "0_75"), (1.0, "1_0"), (1.3, "1_3")):
        out["mnasnet" + tag] = mnasnet(alpha)
    for name, channels in SHUFFLE_CHANNELS.items():
        out[name] = shufflenet_v2(channels)
    out["squeezenet1_0"] = squeezenet("1_0")
    out["squeezenet1_1"] = squeezenet("1_1")
    return out


def main():
    out_dir = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else
                           pathlib.Path(__file__).resolve().parent.parent / "data" / "seeds")
    out_dir.mkdir(parents=True, exist_ok=True)
    models = seeds()
    assert len(models) == 34, len(models)
    for name, b in sorted(models.items()):
        doc = {"name": name, "input_shape": INPUT_SHAPE, "num_classes": NUM_CLASSES,
               "layers": b.layers}
        text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
        (out_dir / (name + ".json")).write_text(text)
    print(f"wrote {len(models)} descriptions to {out_dir}")


if __name__ == "__main__":
    main()
