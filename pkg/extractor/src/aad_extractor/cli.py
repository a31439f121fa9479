"""Command-line wrapper: aad-extract --audio DIR --labels labels.csv
--ptm NAME --out F.aemb"""

from __future__ import annotations

import argparse
import sys

from aad_extractor.extract import ExtractionError, ExtractJob, UsageError, run_extract
from aad_extractor.ptms import PTM_DIMS


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aad-extract",
        description="Extract clip-level speech embeddings into an AEMB file.",
    )
    parser.add_argument("--audio", required=True, help="directory of audio clips")
    parser.add_argument("--labels", required=True,
                        help="CSV with columns id,relative_path,label")
    parser.add_argument("--ptm", required=True, choices=sorted(PTM_DIMS))
    parser.add_argument("--out", required=True, help="output .aemb path")
    parser.add_argument("--language", default="unknown",
                        help="language tag recorded in the file")
    parser.add_argument("--backend", choices=("pretrained", "spectral"),
                        default="pretrained",
                        help="'pretrained' runs the published checkpoints; "
                             "'spectral' is the offline deterministic stand-in")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        job = ExtractJob(audio_dir=args.audio, labels_csv=args.labels, ptm=args.ptm,
                         out_path=args.out, language=args.language,
                         backend=args.backend)
        summary = run_extract(job)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ExtractionError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    print(f"wrote {summary['written']} vector(s) of dim {summary['dim']} "
          f"to {summary['out']} ({summary['skipped']} skipped)")
    return 0


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
