"""Download the four MNIST IDX files into data/mnist/.

Files are kept gzipped; the loaders read .gz transparently. Already
present files are skipped, so the script is safe to rerun.
"""

import argparse
import sys
import urllib.error
import urllib.request
from pathlib import Path

MIRRORS = (
    "https://ossci-datasets.s3.amazonaws.com/mnist/",
    "https://storage.googleapis.com/cvdf-datasets/mnist/",
)
FILES = (
    "train-images-idx3-ubyte.gz",
    "train-labels-idx1-ubyte.gz",
    "t10k-images-idx3-ubyte.gz",
    "t10k-labels-idx1-ubyte.gz",
)


def fetch(url: str, dest: Path) -> None:
    tmp = dest.with_suffix(dest.suffix + ".part")
    with urllib.request.urlopen(url, timeout=60) as resp, open(tmp, "wb") as fh:
        while True:
            block = resp.read(1 << 20)
            if not block:
                break
            fh.write(block)
    tmp.rename(dest)


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dest", type=Path, default=Path("data/mnist"))
    args = ap.parse_args()
    args.dest.mkdir(parents=True, exist_ok=True)
    for name in FILES:
        dest = args.dest / name
        if dest.exists() or dest.with_suffix("").exists():
            print(f"{dest} already present, skipping")
            continue
        for mirror in MIRRORS:
            url = mirror + name
            try:
                print(f"fetching {url}")
                fetch(url, dest)
                break
            except (urllib.error.URLError, OSError) as exc:
                print(f"  failed: {exc}", file=sys.stderr)
        else:
            print(f"could not fetch {name} from any mirror", file=sys.stderr)
            return 1
    print(f"MNIST ready under {args.dest}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
