"""Python access to the drpn recommender: command line, metrics and trained models."""

from ._core import (  # noqa: F401
    ConfigError,
    DataError,
    Model,
    NumericError,
    ShapeError,
    auc,
    gradcheck,
    mrr,
    ndcg,
    run,
)


def main(argv=None):
    """Entry point mirroring the drpn executable."""
    import sys

    code, out, err = run(list(sys.argv[1:] if argv is None else argv))
    sys.stdout.write(out)
    sys.stderr.write(err)
    return code
