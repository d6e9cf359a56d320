import os
import sys


def main(argv=None) -> int:
    # BLAS thread caps must be set before numpy loads
    threads = os.environ.get("TRACTOR_THREADS")
    if threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, threads)
    from .cli import main as cli_main
    return cli_main(argv)


if __name__ == "__main__":
    sys.exit(main())
