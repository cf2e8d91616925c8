#!/usr/bin/env python3
"""Download the four MNIST IDX files into data/mnist/.

Usage: python scripts/fetch_mnist.py [--base-url URL] [--dest DIR]

The default mirror serves the original gzip files; any mirror with the
same layout works via --base-url.
"""

import argparse
import hashlib
import urllib.request
from pathlib import Path

FILES = {
    "train-images-idx3-ubyte.gz": "6bbc9ace898e44ae57da46a324031adb",
    "train-labels-idx1-ubyte.gz": "a25bea736e30d166cdddb491f175f624",
    "t10k-images-idx3-ubyte.gz": "2646ac647ad5339dbf082846283269ea",
    "t10k-labels-idx1-ubyte.gz": "27ae3e4e09519cfbb04c329615203637",
}
DEFAULT_BASE = "https://ossci-datasets.s3.amazonaws.com/mnist"


def decompressed_md5(path: Path) -> str:
    import gzip

    return hashlib.md5(gzip.decompress(path.read_bytes())).hexdigest()


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--base-url", default=DEFAULT_BASE)
    parser.add_argument("--dest", default="data/mnist")
    args = parser.parse_args()
    dest = Path(args.dest)
    dest.mkdir(parents=True, exist_ok=True)
    for name, want in FILES.items():
        target = dest / name
        if target.exists() and decompressed_md5(target) == want:
            print(f"{name}: already present")
            continue
        url = f"{args.base_url.rstrip('/')}/{name}"
        print(f"fetching {url}")
        urllib.request.urlretrieve(url, target)
        got = decompressed_md5(target)
        if got != want:
            print(f"{name}: checksum mismatch ({got} != {want})")
            return 1
        print(f"{name}: ok")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
