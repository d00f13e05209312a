"""Download 300-d GloVe word vectors into data/glove/.

Pulls the ~820 MB glove.6B.zip and extracts only glove.6B.300d.txt,
which is what the word-embedding retrieval protocol reads. Safe to
rerun; skips work already done.
"""

import argparse
import sys
import urllib.error
import urllib.request
import zipfile
from pathlib import Path

MIRRORS = (
    "https://downloads.cs.stanford.edu/nlp/data/glove.6B.zip",
    "https://nlp.stanford.edu/data/glove.6B.zip",
)
MEMBER = "glove.6B.300d.txt"


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dest", type=Path, default=Path("data/glove"))
    ap.add_argument("--keep-zip", action="store_true",
                    help="keep glove.6B.zip after extraction")
    args = ap.parse_args()
    target = args.dest / MEMBER
    if target.exists():
        print(f"{target} already present, skipping")
        return 0
    args.dest.mkdir(parents=True, exist_ok=True)
    archive = args.dest / "glove.6B.zip"
    if not archive.exists():
        for url in MIRRORS:
            print(f"fetching {url} (about 820 MB, be patient)")
            tmp = archive.with_suffix(".part")
            try:
                with urllib.request.urlopen(url, timeout=300) as resp, \
                        open(tmp, "wb") as fh:
                    done = 0
                    while True:
                        block = resp.read(1 << 22)
                        if not block:
                            break
                        fh.write(block)
                        done += len(block)
                        print(f"\r  {done / 1e6:.0f} MB", end="", flush=True)
                print()
                tmp.rename(archive)
                break
            except (urllib.error.URLError, OSError) as exc:
                print(f"\n  failed: {exc}", file=sys.stderr)
        else:
            print("could not fetch glove.6B.zip from any mirror",
                  file=sys.stderr)
            return 1
    print(f"extracting {MEMBER}")
    with zipfile.ZipFile(archive) as zf:
        zf.extract(MEMBER, args.dest)
    if not args.keep_zip:
        archive.unlink()
    print(f"embeddings ready at {target}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
