"""Download the CIFAR-10 binary batches into data/cifar/.

Pulls the ~163 MB cifar-10-binary.tar.gz and unpacks only the *.bin
members. Safe to rerun; skips work already done.
"""

import argparse
import sys
import tarfile
import urllib.error
import urllib.request
from pathlib import Path

URL = "https://www.cs.toronto.edu/~kriz/cifar-10-binary.tar.gz"
BATCHES = [f"data_batch_{i}.bin" for i in range(1, 6)] + ["test_batch.bin"]


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dest", type=Path, default=Path("data/cifar"))
    args = ap.parse_args()
    out = args.dest / "cifar-10-batches-bin"
    if all((out / name).exists() for name in BATCHES):
        print(f"{out} already complete, skipping")
        return 0
    args.dest.mkdir(parents=True, exist_ok=True)
    tarball = args.dest / "cifar-10-binary.tar.gz"
    if not tarball.exists():
        print(f"fetching {URL}")
        tmp = tarball.with_suffix(".part")
        try:
            with urllib.request.urlopen(URL, timeout=120) as resp, \
                    open(tmp, "wb") as fh:
                while True:
                    block = resp.read(1 << 20)
                    if not block:
                        break
                    fh.write(block)
        except (urllib.error.URLError, OSError) as exc:
            print(f"download failed: {exc}", file=sys.stderr)
            return 1
        tmp.rename(tarball)
    print(f"unpacking {tarball}")
    with tarfile.open(tarball, "r:gz") as tf:
        for member in tf.getmembers():
            if member.name.endswith(".bin"):
                member.name = Path(member.name).name
                tf.extract(member, out)
    print(f"CIFAR-10 ready under {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
