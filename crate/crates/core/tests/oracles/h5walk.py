"""Builds HDF5 fixtures with h5py and prints what h5py sees in them.

usage: h5walk.py OUTDIR
Prints one JSON object: file name -> {"groups": [...], "datasets": {path: {"shape", "attrs"}}}.
"""
import json
import random
import sys

import h5py
import numpy as np


def fixed(out):
    with h5py.File(f"{out}/single.h5", "w") as f:
        f.create_dataset("temperature/data", data=np.zeros((4, 3), dtype="f4"))
    with h5py.File(f"{out}/empty.h5", "w"):
        pass
    with h5py.File(f"{out}/nested.h5", "w") as f:
        f.create_group("a/b/c")
        f.create_dataset("a/x", data=np.arange(5))
        f.create_dataset("a/b/c/y", data=np.ones((2, 2, 2)))
    with h5py.File(f"{out}/attrs.h5", "w") as f:
        d = f.create_dataset("measurements/temperature", data=np.zeros(24, dtype="f4"))
        d.attrs["units"] = "K"
        d.attrs["scale_factor"] = np.float64(0.5)
        d.attrs["fill"] = np.int32(-999)
        d.attrs["valid_range"] = np.array([0.0, 400.0])
        d.attrs["history"] = "x" * 500


def random_tree(out, i):
    rng = random.Random(1000 + i)
    names = ["geo", "lat", "lon", "time", "temp", "obs", "grid", "kspace", "meta", "swath"]
    with h5py.File(f"{out}/random{i}.h5", "w") as f:
        groups = ["/"]
        for _ in range(rng.randint(0, 6)):
            parent = rng.choice(groups)
            name = rng.choice(names) + str(rng.randint(0, 9))
            path = parent.rstrip("/") + "/" + name
            if path in f:
                continue
            f.create_group(path)
            groups.append(path)
        for _ in range(rng.randint(0, 8)):
            parent = rng.choice(groups)
            path = parent.rstrip("/") + "/" + rng.choice(names) + "_" + str(rng.randint(0, 99))
            if path in f:
                continue
            shape = tuple(rng.randint(0, 4) for _ in range(rng.randint(0, 3)))
            d = f.create_dataset(path, data=np.zeros(shape, dtype=rng.choice(["f4", "f8", "i2", "u1"])))
            for k in range(rng.randint(0, 3)):
                d.attrs[f"attr{k}"] = rng.random()


def walk(path):
    groups, datasets = ["/"], {}
    with h5py.File(path, "r") as f:
        def visit(name, obj):
            full = "/" + name
            if isinstance(obj, h5py.Group):
                groups.append(full)
            elif isinstance(obj, h5py.Dataset):
                datasets[full] = {"shape": list(obj.shape), "attrs": sorted(obj.attrs.keys())}
        f.visititems(visit)
    return {"groups": sorted(groups), "datasets": datasets}


def main():
    out = sys.argv[1]
    fixed(out)
    n_random = 15
    for i in range(n_random):
        random_tree(out, i)
    files = ["single.h5", "empty.h5", "nested.h5", "attrs.h5"] + [f"random{i}.h5" for i in range(n_random)]
    print(json.dumps({name: walk(f"{out}/{name}") for name in files}))


main()
